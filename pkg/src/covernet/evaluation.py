"""Accuracy measures for detected groups and for ranked query answers."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidInputError
from .graph import DissimilarityMatrix
from .partition import Partition


@dataclass(frozen=True)
class CountsPerSong:
    true_pos: int
    false_pos: int
    false_neg: int


@dataclass(frozen=True)
class EvalReport:
    mean_precision: float = float("nan")
    mean_recall: float = float("nan")
    f: float = float("nan")
    map: float = float("nan")
    delta: float = float("nan")
    per_query: tuple[tuple[int, float], ...] = field(default=(), repr=False)


def song_counts(predicted: Partition, truth: Partition) -> list[CountsPerSong]:
    tp, fp, fn = _counts(predicted, truth)
    return [CountsPerSong(int(a), int(b), int(c)) for a, b, c in zip(tp, fp, fn)]


def _counts(predicted: Partition, truth: Partition):
    if predicted.n != truth.n:
        raise InvalidInputError(f"partition sizes differ: {predicted.n} vs {truth.n}")
    p, t = predicted.assignment, truth.assignment
    # size of (predicted group, true group) cell each song falls in
    cell = p.astype(np.int64) * truth.group_count + t
    _, inv, cell_size = np.unique(cell, return_inverse=True, return_counts=True)
    both = cell_size[inv.reshape(-1)] - 1
    same_pred = predicted.group_sizes_per_item() - 1
    same_true = truth.group_sizes_per_item() - 1
    return both, same_pred - both, same_true - both


def per_song_f(predicted: Partition, truth: Partition) -> EvalReport:
    """Precision and recall per song, averaged over songs, combined into F.

    A ratio with a zero denominator (no possible mistake) counts as 1.
    """
    tp, fp, fn = _counts(predicted, truth)
    tp = tp.astype(float)
    prec_den, rec_den = tp + fp, tp + fn
    prec = np.divide(tp, prec_den, out=np.ones_like(tp), where=prec_den > 0)
    rec = np.divide(tp, rec_den, out=np.ones_like(tp), where=rec_den > 0)
    pm, rm = float(prec.mean()), float(rec.mean())
    f = 2 * pm * rm / (pm + rm) if pm + rm > 0 else 0.0
    return EvalReport(mean_precision=pm, mean_recall=rm, f=f)


def refine_matrix(m: DissimilarityMatrix, p: Partition, c: float = 2.0) -> DissimilarityMatrix:
    """Rescale to [0, 1] and push every cross-group pair up by ``c``."""
    if not c > 1:
        raise InvalidInputError("c must exceed 1")
    if p.n != m.n:
        raise InvalidInputError("partition and matrix sizes differ")
    top = float(m.weights.max()) if m.n else 0.0
    if top <= 0:
        raise InvalidInputError("matrix maximum is zero")
    w = m.weights / top + np.where(p.same_group(), 0.0, c)
    np.fill_diagonal(w, 0.0)
    return DissimilarityMatrix(w, m.durations)


def average_precision(rank_list, relevant, c_cardinality: int) -> float:
    """Mean of precision-at-rank over the ranks holding a relevant item.

    ``rank_list`` excludes the query; ``c_cardinality`` is the size of the
    query's true group, so ``c_cardinality - 1`` relevant items exist.
    """
    if c_cardinality < 2:
        raise InvalidInputError("queries without covers have no average precision")
    relevant = set(relevant)
    hits = 0
    total = 0.0
    for r, item in enumerate(rank_list, 1):
        if item in relevant:
            hits += 1
            total += hits / r
    return total / (c_cardinality - 1)


def ranking(m: DissimilarityMatrix, query: int) -> np.ndarray:
    """Other items in ascending dissimilarity from ``query``, ties by index."""
    row = m.weights[query]
    order = np.argsort(row, kind="stable")
    return order[order != query]


def per_query_ap(m: DissimilarityMatrix, truth: Partition) -> list[tuple[int, float]]:
    if truth.n != m.n:
        raise InvalidInputError("partition and matrix sizes differ")
    sizes = truth.group_sizes_per_item()
    labels = truth.assignment
    out = []
    for q in np.flatnonzero(sizes >= 2).tolist():
        order = ranking(m, q)
        rel = labels[order] == labels[q]
        ranks = np.flatnonzero(rel) + 1
        ap = float(np.sum(np.arange(1, ranks.size + 1) / ranks)) / (sizes[q] - 1)
        out.append((q, ap))
    return out


def map_score(m: DissimilarityMatrix, truth: Partition) -> float:
    aps = per_query_ap(m, truth)
    if not aps:
        raise InvalidInputError("no query has a cover; MAP undefined")
    return math.fsum(ap for _, ap in aps) / len(aps)


def relative_map_increase(map_refined: float, map_original: float) -> float:
    if not map_original > 0:
        raise InvalidInputError("original MAP must be positive")
    return 100.0 * (map_refined / map_original - 1.0)


def binomial_pvalue(hits: int, trials: int, p_null: float) -> float:
    """Exact one-sided P[X >= hits] for X ~ Binomial(trials, p_null)."""
    if not 0 <= hits <= trials:
        raise InvalidInputError("need 0 <= hits <= trials")
    if not 0 < p_null < 1:
        raise InvalidInputError("p_null must lie strictly between 0 and 1")
    if hits == 0:
        return 1.0
    # p_null is a dyadic rational a/d, so the tail is an exact integer ratio
    a, d = Fraction(p_null).as_integer_ratio()
    tail = sum(math.comb(trials, k) * a**k * (d - a) ** (trials - k) for k in range(hits, trials + 1))
    return float(Fraction(tail, d**trials))


def significance_stars(p: float) -> str:
    return "**" if p < 0.01 else "*" if p < 0.05 else ""


def evaluate(
    m: DissimilarityMatrix,
    predicted: Partition,
    truth: Partition,
    c: float = 2.0,
    keep_per_query: bool = False,
) -> EvalReport:
    """F of the predicted groups plus MAP of the refined matrix and its gain."""
    fr = per_song_f(predicted, truth)
    base = map_score(m, truth)
    refined_aps = per_query_ap(refine_matrix(m, predicted, c), truth)
    refined = math.fsum(ap for _, ap in refined_aps) / len(refined_aps)
    return EvalReport(
        mean_precision=fr.mean_precision,
        mean_recall=fr.mean_recall,
        f=fr.f,
        map=refined,
        delta=relative_map_increase(refined, base),
        per_query=tuple(refined_aps) if keep_per_query else (),
    )


REPORT_HEADER = ["mean_precision", "mean_recall", "f", "map", "delta"]


def write_report_csv(report: EvalReport, path, per_query: bool = False) -> None:
    """One summary row; with ``per_query`` a second table of query APs follows."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_HEADER)
        out.writerow([repr(float(getattr(report, k))) for k in REPORT_HEADER])
        if per_query:
            out.writerow(["query", "average_precision"])
            for q, ap in report.per_query:
                out.writerow([q, repr(float(ap))])
