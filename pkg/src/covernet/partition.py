"""Partition of items into non-overlapping groups.

Group ids are canonicalised on construction: groups are numbered in order of
first appearance, so two partitions describing the same grouping compare
equal regardless of the labels they were built from.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError


def _canonical(labels) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    # rank unique labels by first occurrence
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.reshape(-1)].astype(np.int64)


@dataclass(frozen=True, eq=False)
class Partition:
    assignment: np.ndarray

    def __post_init__(self):
        a = _canonical(self.assignment)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        return cls(np.asarray(labels))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n))

    @classmethod
    def single_group(cls, n: int) -> "Partition":
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def from_groups(cls, groups, n: int) -> "Partition":
        labels = np.full(n, -1, dtype=np.int64)
        for gid, members in enumerate(groups):
            labels[list(members)] = gid
        if (labels < 0).any():
            raise ValueError("groups do not cover every item")
        return cls(labels)

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    @property
    def group_count(self) -> int:
        return int(self.assignment.max()) + 1 if self.n else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.group_count)

    def group_sizes_per_item(self) -> np.ndarray:
        return self.sizes()[self.assignment]

    def groups(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)

    def same_group(self) -> np.ndarray:
        """Boolean n x n matrix, True where two items share a group."""
        return self.assignment[:, None] == self.assignment[None, :]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash(self.assignment.tobytes())

    def __repr__(self) -> str:
        return f"Partition(n={self.n}, groups={self.group_count})"


def write_partition(p: Partition, path) -> None:
    """Write ``item_index group_id`` lines."""
    with open(path, "w") as fh:
        for i, g in enumerate(p.assignment):
            fh.write(f"{i} {g}\n")


def read_partition(path) -> Partition:
    path = Path(path)
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError("expected 'item_index group_id'", path, lineno)
            try:
                item, group = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError("non-integer field", path, lineno) from None
            if item != len(rows):
                raise FormatError(f"expected item index {len(rows)}, got {item}", path, lineno)
            rows.append(group)
    return Partition(np.array(rows, dtype=np.int64))
