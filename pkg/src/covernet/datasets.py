"""Ground-truth collections, experimental setups and a synthetic generator.

A :class:`Collection` labels every item with its cover group and marks at
most one original per group.  :func:`generate_collection` plants groups in a
dissimilarity matrix (low within groups, high across) with an optional pull
that makes each original closer to its covers.  :func:`sample_setup` draws the
fixed- or variable-cardinality subsets used by the experiments.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import FormatError, InvalidInputError
from .graph import DissimilarityMatrix, load_matrix, save_matrix
from .partition import Partition

VARIABLE = None  # cardinality marker for variable-size setups
MIN_CARD, MAX_CARD = 2, 18
ORIGINAL_RATE = 426 / 523


@dataclass(frozen=True, eq=False)
class Collection:
    group_of: np.ndarray
    is_original: np.ndarray
    durations: np.ndarray
    source_index: np.ndarray | None = None

    def __post_init__(self):
        g = Partition(self.group_of).assignment
        o = np.array(self.is_original, dtype=bool)
        d = np.array(self.durations, dtype=float)
        n = g.size
        if o.shape != (n,) or d.shape != (n,):
            raise InvalidInputError("group_of, is_original and durations must have equal length")
        if (d <= 0).any():
            raise InvalidInputError("durations must be positive")
        per_group = np.bincount(g[o], minlength=int(g.max()) + 1 if n else 0)
        if (per_group > 1).any():
            raise InvalidInputError(f"group {int(np.argmax(per_group > 1))} has several originals")
        src = np.arange(n) if self.source_index is None else np.array(self.source_index, dtype=np.int64)
        for name, a in (("group_of", g), ("is_original", o), ("durations", d), ("source_index", src)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return int(self.group_of.size)

    def truth(self) -> Partition:
        return Partition(self.group_of)

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_of)

    def noise_mask(self) -> np.ndarray:
        return self.group_sizes()[self.group_of] == 1

    def __eq__(self, other):
        if not isinstance(other, Collection):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("group_of", "is_original", "durations")
        )


@dataclass(frozen=True)
class SetupSpec:
    n_c: int
    cardinality: int | None
    n_n: int
    n_t: int
    seed: int = 0

    def __post_init__(self):
        if self.n_c < 1 or self.n_t < 1:
            raise InvalidInputError("n_c and n_t must be >= 1")
        if self.cardinality is not None and self.cardinality < 2:
            raise InvalidInputError("fixed cardinality must be >= 2")
        if self.n_n < 0:
            raise InvalidInputError("n_n must be non-negative")

    @property
    def expected_size(self) -> float:
        card = 4 if self.cardinality is None else self.cardinality
        return self.n_c * card + self.n_n


SETUPS = {
    "1.1": SetupSpec(25, 4, 0, 20),
    "1.2": SetupSpec(25, VARIABLE, 0, 20),
    "1.3": SetupSpec(25, 4, 100, 20),
    "1.4": SetupSpec(25, VARIABLE, 100, 20),
    "2.1": SetupSpec(125, 4, 0, 20),
    "2.2": SetupSpec(125, VARIABLE, 0, 20),
    "2.3": SetupSpec(125, 4, 400, 20),
    "2.4": SetupSpec(125, VARIABLE, 400, 20),
    "3": SetupSpec(523, VARIABLE, 0, 1),
}


def setup(name: str, seed: int = 0, trials: int | None = None) -> SetupSpec:
    try:
        spec = SETUPS[name]
    except KeyError:
        raise InvalidInputError(f"unknown setup {name!r}; known: {', '.join(SETUPS)}") from None
    return replace(spec, seed=seed, n_t=spec.n_t if trials is None else trials)


@lru_cache(maxsize=None)
def geometric_cardinality_weights(mean: float = 4.0) -> tuple[float, ...]:
    """Truncated geometric on sizes 2..18 with the requested mean."""
    sizes = np.arange(MIN_CARD, MAX_CARD + 1)

    def weights(q):
        w = q ** (sizes - MIN_CARD)
        return w / w.sum()

    q = brentq(lambda q: float(weights(q) @ sizes) - mean, 1e-9, 1 - 1e-9)
    return tuple(float(x) for x in weights(q))


@dataclass(frozen=True)
class GeneratorParams:
    intra_mean: float = 0.40
    intra_sd: float = 0.12
    inter_mean: float = 0.75
    inter_sd: float = 0.05
    prototype_pull: float = 0.0
    asymmetry_jitter: float = 0.02
    cardinality_weights: tuple[float, ...] = field(default_factory=geometric_cardinality_weights)
    original_rate: float = ORIGINAL_RATE
    stray_rate: float = 0.06
    n_noise: int = 0
    duration_range: tuple[float, float] = (120.0, 360.0)
    floor: float = 1e-3

    def __post_init__(self):
        if not self.intra_mean < self.inter_mean:
            raise InvalidInputError("intra_mean must be below inter_mean")
        if min(self.intra_sd, self.inter_sd, self.asymmetry_jitter) < 0:
            raise InvalidInputError("standard deviations must be non-negative")
        if not 0 <= self.prototype_pull <= 1:
            raise InvalidInputError("prototype_pull must lie in [0, 1]")
        if not 0 <= self.stray_rate <= 1:
            raise InvalidInputError("stray_rate must lie in [0, 1]")
        w = np.asarray(self.cardinality_weights, dtype=float)
        if w.size != MAX_CARD - MIN_CARD + 1 or (w < 0).any() or w.sum() <= 0:
            raise InvalidInputError("cardinality_weights needs one non-negative weight per size 2..18")

    def cardinality_probs(self) -> np.ndarray:
        w = np.asarray(self.cardinality_weights, dtype=float)
        return w / w.sum()


def generate_collection(params: GeneratorParams, n_groups: int, seed: int) -> tuple[Collection, DissimilarityMatrix]:
    """Planted-group dissimilarity matrix with ground truth.

    Pairs inside a group draw from N(intra_mean, intra_sd) and pairs across
    groups from N(inter_mean, inter_sd); both directions share one draw and
    then receive independent jitter.  A fraction ``stray_rate`` of items are
    hard covers whose within-group pairs are drawn like cross-group pairs.
    Originals get their outgoing within-group weights lowered by
    ``prototype_pull * intra_mean``.  All weights are floored at ``floor``.
    """
    rng = np.random.default_rng(seed)
    sizes = rng.choice(np.arange(MIN_CARD, MAX_CARD + 1), size=n_groups, p=params.cardinality_probs())
    group_of = np.concatenate([np.repeat(np.arange(n_groups), sizes), n_groups + np.arange(params.n_noise)])
    n = group_of.size
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    is_original = np.zeros(n, dtype=bool)
    has_original = rng.random(n_groups) < params.original_rate
    pick = (rng.random(n_groups) * sizes).astype(np.int64)
    is_original[(starts + pick)[has_original]] = True

    same = group_of[:, None] == group_of[None, :]
    base = rng.normal(params.inter_mean, params.inter_sd, size=(n, n))
    intra = rng.normal(params.intra_mean, params.intra_sd, size=(n, n))
    stray = rng.random(n) < params.stray_rate
    use_intra = same & ~stray[:, None] & ~stray[None, :]
    w = np.where(use_intra, intra, base)
    w = np.triu(w, 1)
    w = w + w.T
    if params.asymmetry_jitter > 0:
        w = w + rng.normal(0.0, params.asymmetry_jitter, size=(n, n))
    if params.prototype_pull > 0:
        rows = same & is_original[:, None] & use_intra
        w = w - rows * (params.prototype_pull * params.intra_mean)
    w = np.maximum(w, params.floor)
    np.fill_diagonal(w, 0.0)

    lo, hi = params.duration_range
    durations = rng.uniform(lo, hi, size=n)
    return Collection(group_of, is_original, durations), DissimilarityMatrix(w, durations)


def _rng_for(spec: SetupSpec, trial: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, trial])


def sample_setup(c: Collection, m: DissimilarityMatrix, spec: SetupSpec, trial: int) -> tuple[Collection, DissimilarityMatrix]:
    """Draw one trial of a setup from a larger collection.

    Fixed cardinality ``C`` samples ``n_c`` groups holding at least ``C``
    items and keeps ``C`` random members of each; variable cardinality keeps
    whole groups.  Noise items are drawn from the collection's singletons and
    from one member of each unselected group, so no two noise items are
    covers of each other; they become singleton groups.
    """
    if c.n != m.n:
        raise InvalidInputError("collection and matrix sizes differ")
    rng = _rng_for(spec, trial)
    sizes = c.group_sizes()
    cover_groups = np.flatnonzero(sizes >= 2)
    need = MIN_CARD if spec.cardinality is None else spec.cardinality
    eligible = cover_groups[sizes[cover_groups] >= need]
    if eligible.size < spec.n_c:
        raise InvalidInputError(
            f"only {eligible.size} groups of cardinality >= {need}; setup needs {spec.n_c}"
        )
    chosen = np.sort(rng.choice(eligible, size=spec.n_c, replace=False))
    members_of = c.truth().groups()
    picked = []
    for g in chosen.tolist():
        members = members_of[g]
        if spec.cardinality is not None:
            members = np.sort(rng.choice(members, size=spec.cardinality, replace=False))
        picked.append(members)

    pool = [members_of[g][0] for g in np.flatnonzero(sizes == 1).tolist()]
    for g in np.setdiff1d(cover_groups, chosen).tolist():
        members = members_of[g]
        pool.append(members[int(rng.integers(members.size))])
    pool = np.sort(np.array(pool, dtype=np.int64))
    if pool.size < spec.n_n:
        raise InvalidInputError(f"only {pool.size} candidate noise items; setup needs {spec.n_n}")
    noise = rng.choice(pool, size=spec.n_n, replace=False) if spec.n_n else np.zeros(0, np.int64)

    items = np.concatenate(picked + [noise]).astype(np.int64)
    labels = np.concatenate([np.full(len(p), k) for k, p in enumerate(picked)] + [len(picked) + np.arange(noise.size)])
    order = np.argsort(items, kind="stable")
    items, labels = items[order], labels[order]
    is_noise = labels >= len(picked)
    sub = Collection(
        labels,
        c.is_original[items] & ~is_noise,
        c.durations[items],
        source_index=c.source_index[items],
    )
    return sub, m.submatrix(items)


def extra_noise_needed(n_groups: int, spec: SetupSpec) -> int:
    """Singleton items a generated collection must carry so the setup is drawable."""
    return max(0, spec.n_n - (n_groups - spec.n_c))


# --- files ----------------------------------------------------------------------

def write_labels(c: Collection, path) -> None:
    with open(path, "w") as fh:
        for g, o in zip(c.group_of.tolist(), c.is_original.tolist()):
            fh.write(f"{g} {int(o)}\n")


def read_labels(path, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    groups, flags = [], []
    owner: dict[int, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError("expected 'group_id original_flag'", path, lineno)
            try:
                g, o = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError("non-integer field", path, lineno) from None
            if g < 0 or o not in (0, 1):
                raise FormatError("group id must be >= 0 and flag 0 or 1", path, lineno)
            if o:
                if g in owner:
                    raise FormatError(
                        f"group {g} has a second original (first on line {owner[g]})", path, lineno
                    )
                owner[g] = lineno
            groups.append(g)
            flags.append(bool(o))
    if n is not None and len(groups) != n:
        raise FormatError(f"expected {n} label lines, found {len(groups)}", path)
    return np.array(groups, dtype=np.int64), np.array(flags, dtype=bool)


def load_collection(matrix_path, durations_path, labels_path) -> tuple[Collection, DissimilarityMatrix]:
    m = load_matrix(matrix_path, durations_path)
    groups, flags = read_labels(labels_path, m.n)
    return Collection(groups, flags, m.durations), m


def save_collection(c: Collection, m: DissimilarityMatrix, matrix_path, durations_path, labels_path) -> None:
    save_matrix(m, matrix_path, durations_path)
    write_labels(c, labels_path)
