"""Inter-rater reliability statistics and the agreement status grid.

Covers the measures a screening team typically reports: raw percent
agreement, Cohen's kappa for two reviewers, its weighted variant for
ordinal scales, and Fleiss' kappa when three or more reviewers rate
every paper. The grid statuses double as the color coding for a voting
spreadsheet view.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .errors import DataIntegrityError, PreconditionError
from .model import Scale, ScaleKind, SelectionPolicy, WorkflowKind
from .selection import Vote, VotingMatrix

_EPS = 1e-12


class AgreementMethod(str, Enum):
    PERCENT = "percent"
    COHEN_KAPPA = "cohen_kappa"
    WEIGHTED_COHEN_KAPPA = "weighted_cohen_kappa"
    FLEISS_KAPPA = "fleiss_kappa"


class ItemStatus(str, Enum):
    AGREE_INCLUDE = "agree_include"
    AGREE_EXCLUDE = "agree_exclude"
    DISAGREE = "disagree"


class Weighting(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class FleissStratum:
    """Fleiss' kappa over the items that received exactly n_raters ratings."""

    n_raters: int
    n_items: int
    value: float
    degenerate: bool = False


@dataclass(frozen=True)
class AgreementReport:
    """One reliability statistic plus the per-item agreement statuses.

    value is None only for Fleiss' kappa over an incomplete design, where
    pooling strata with different rater counts would be misleading; the
    strata field then carries one entry per maximal fully-rated stratum.
    """

    method: AgreementMethod
    value: Optional[float]
    n_items: int
    n_raters: int
    per_item_status: Mapping[str, ItemStatus]
    degenerate: bool = False
    strata: Tuple[FleissStratum, ...] = ()

    def __post_init__(self) -> None:
        if self.value is not None and not -1.0 - _EPS <= self.value <= 1.0 + _EPS:
            raise DataIntegrityError(
                "agreement value out of range", details={"value": self.value}
            )


def _paired_values(
    a: Mapping[str, object], b: Mapping[str, object]
) -> Tuple[Sequence[object], Sequence[object]]:
    if set(a) != set(b):
        asymmetric = sorted(set(a) ^ set(b))
        raise PreconditionError(
            "both raters must vote the same item set", details=asymmetric
        )
    if not a:
        raise PreconditionError("agreement needs at least one rated item")
    items = sorted(a)
    return [a[i] for i in items], [b[i] for i in items]


def _cohen_core(
    va: Sequence[object], vb: Sequence[object], categories: Sequence[object]
) -> Tuple[float, bool]:
    m = len(va)
    p_o = sum(1 for x, y in zip(va, vb) if x == y) / m
    p_e = 0.0
    for cat in categories:
        p_e += (sum(1 for x in va if x == cat) / m) * (
            sum(1 for y in vb if y == cat) / m
        )
    if abs(1.0 - p_e) < _EPS:
        return (1.0 if abs(1.0 - p_o) < _EPS else 0.0), True
    return (p_o - p_e) / (1.0 - p_e), False


def cohen_kappa(
    a: Mapping[str, object],
    b: Mapping[str, object],
    categories: Optional[Sequence[object]] = None,
) -> float:
    """Cohen's kappa for two raters over the same item set.

    a and b map item id to the assigned category. When both raters use a
    single category throughout, chance agreement is 1 and the statistic is
    conventionally 1 for perfect agreement, 0 otherwise.
    """
    va, vb = _paired_values(a, b)
    if categories is None:
        categories = sorted(set(va) | set(vb), key=str)
    value, _ = _cohen_core(va, vb, categories)
    return value


def _disagreement_weight(i: int, j: int, k: int, quadratic: bool) -> float:
    base = abs(i - j) / (k - 1)
    return base * base if quadratic else base


def _weighted_core(
    va: Sequence[int], vb: Sequence[int], scale: Scale, quadratic: bool
) -> Tuple[float, bool]:
    cats = list(scale.values())
    k = len(cats)
    index = {c: i for i, c in enumerate(cats)}
    m = len(va)
    observed = [[0.0] * k for _ in range(k)]
    for x, y in zip(va, vb):
        observed[index[x]][index[y]] += 1.0 / m
    rows = [sum(observed[i]) for i in range(k)]
    cols = [sum(observed[i][j] for i in range(k)) for j in range(k)]
    num = 0.0
    den = 0.0
    for i in range(k):
        for j in range(k):
            w = _disagreement_weight(i, j, k, quadratic)
            num += w * observed[i][j]
            den += w * rows[i] * cols[j]
    if den < _EPS:
        return (1.0 if num < _EPS else 0.0), True
    return 1.0 - num / den, False


def weighted_cohen_kappa(
    a: Mapping[str, int],
    b: Mapping[str, int],
    scale: Scale,
    weighting: Weighting = Weighting.LINEAR,
) -> float:
    """Weighted kappa with |i - j| / (k - 1) disagreement weights.

    The quadratic variant squares each weight, punishing far misses harder.
    Only meaningful for ordinal scales; binary votes have no notion of a
    near miss, so use cohen_kappa for those.
    """
    if scale.kind is ScaleKind.BINARY:
        raise PreconditionError(
            "weighted kappa needs an ordinal scale; use cohen_kappa for binary votes"
        )
    va, vb = _paired_values(a, b)
    for v in list(va) + list(vb):
        if not scale.contains(int(v)):
            raise PreconditionError(
                "vote off the declared scale", details={"value": v}
            )
    value, _ = _weighted_core([int(v) for v in va], [int(v) for v in vb], scale, weighting is Weighting.QUADRATIC)
    return value


def _fleiss_core(counts: Sequence[Sequence[int]], n: int) -> Tuple[float, bool]:
    m = len(counts)
    k = len(counts[0])
    p_bar = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in counts
    ) / m
    proportions = [sum(row[j] for row in counts) / (m * n) for j in range(k)]
    p_e = sum(p * p for p in proportions)
    if abs(1.0 - p_e) < _EPS:
        return (1.0 if abs(1.0 - p_bar) < _EPS else 0.0), True
    return (p_bar - p_e) / (1.0 - p_e), False


def fleiss_kappa(counts: Sequence[Sequence[int]], n_raters: int) -> float:
    """Fleiss' kappa over an item-by-category count matrix.

    Each row holds, for one item, how many raters picked each category;
    every row must sum to n_raters.
    """
    if n_raters < 2:
        raise PreconditionError("fleiss kappa needs at least two raters")
    if not counts:
        raise PreconditionError("fleiss kappa needs at least one item")
    offending = [i for i, row in enumerate(counts) if sum(row) != n_raters]
    if offending:
        raise PreconditionError(
            "every item needs exactly one rating per rater", details=offending
        )
    value, _ = _fleiss_core(counts, n_raters)
    return value


def fleiss_strata(matrix: VotingMatrix) -> Tuple[FleissStratum, ...]:
    """Fleiss' kappa per maximal fully-rated stratum of a voting matrix.

    Items are grouped by how many ratings they received; each group with
    two or more ratings per item gets its own statistic. Items rated once
    carry no pairwise agreement information and are skipped.
    """
    by_count: Dict[int, list] = {}
    for paper in matrix.papers:
        column = matrix.column(paper)
        if len(column) >= 2:
            by_count.setdefault(len(column), []).append(list(column.values()))
    cats = list(matrix.scale.values())
    strata = []
    for n in sorted(by_count):
        counts = [[votes.count(c) for c in cats] for votes in by_count[n]]
        value, degenerate = _fleiss_core(counts, n)
        strata.append(FleissStratum(n_raters=n, n_items=len(counts), value=value, degenerate=degenerate))
    return tuple(strata)


def agreement_grid(matrix: VotingMatrix) -> Dict[str, ItemStatus]:
    """Per-item agreement status over the fully rated binary items."""
    if matrix.scale.kind is not ScaleKind.BINARY:
        raise PreconditionError("the agreement grid is defined for binary votes")
    grid: Dict[str, ItemStatus] = {}
    for paper in matrix.papers:
        column = matrix.column(paper)
        if len(column) != len(matrix.reviewers) or not column:
            continue
        values = set(column.values())
        if values == {1}:
            grid[paper] = ItemStatus.AGREE_INCLUDE
        elif values == {0}:
            grid[paper] = ItemStatus.AGREE_EXCLUDE
        else:
            grid[paper] = ItemStatus.DISAGREE
    return grid


def percent_agreement(grid: Mapping[str, ItemStatus]) -> float:
    """Fraction of fully rated items the raters agree on; 0.0 when empty."""
    if not grid:
        return 0.0
    agreeing = sum(1 for s in grid.values() if s is not ItemStatus.DISAGREE)
    return agreeing / len(grid)


def _ordinal_status(values: Sequence[int], scale: Scale) -> ItemStatus:
    midpoint = scale.neutral if scale.neutral is not None else (scale.lo + scale.hi) / 2
    if len(set(values)) == 1:
        if values[0] > midpoint:
            return ItemStatus.AGREE_INCLUDE
        if values[0] < midpoint:
            return ItemStatus.AGREE_EXCLUDE
    return ItemStatus.DISAGREE


def _status_map(matrix: VotingMatrix) -> Dict[str, ItemStatus]:
    if matrix.scale.kind is ScaleKind.BINARY:
        return agreement_grid(matrix)
    statuses: Dict[str, ItemStatus] = {}
    for paper in matrix.papers:
        column = matrix.column(paper)
        if len(column) == len(matrix.reviewers) and column:
            statuses[paper] = _ordinal_status(list(column.values()), matrix.scale)
    return statuses


def _pair_maps(matrix: VotingMatrix) -> Tuple[Dict[str, int], Dict[str, int]]:
    if len(matrix.reviewers) != 2:
        raise PreconditionError(
            "this statistic compares exactly two raters",
            details={"reviewers": list(matrix.reviewers)},
        )
    first, second = matrix.reviewers
    a = {p: matrix.cells[(first, p)] for p in matrix.papers if (first, p) in matrix.cells}
    b = {p: matrix.cells[(second, p)] for p in matrix.papers if (second, p) in matrix.cells}
    shared = set(a) & set(b)
    return {p: a[p] for p in shared}, {p: b[p] for p in shared}


def build_report(
    matrix: VotingMatrix,
    method: AgreementMethod,
    weighting: Weighting = Weighting.LINEAR,
) -> AgreementReport:
    """Compute one reliability statistic over a voting matrix.

    Pairwise methods restrict themselves to the items both raters voted
    on; Fleiss' kappa over an incomplete design yields per-stratum values
    instead of a single pooled number.
    """
    method = AgreementMethod(method)
    statuses = _status_map(matrix)
    if method is AgreementMethod.PERCENT:
        return AgreementReport(
            method=method,
            value=percent_agreement(statuses),
            n_items=len(statuses),
            n_raters=len(matrix.reviewers),
            per_item_status=statuses,
        )
    if method is AgreementMethod.COHEN_KAPPA:
        a, b = _pair_maps(matrix)
        va, vb = _paired_values(a, b)
        value, degenerate = _cohen_core(va, vb, sorted(set(va) | set(vb), key=str))
        return AgreementReport(
            method=method,
            value=value,
            n_items=len(a),
            n_raters=2,
            per_item_status=statuses,
            degenerate=degenerate,
        )
    if method is AgreementMethod.WEIGHTED_COHEN_KAPPA:
        if matrix.scale.kind is ScaleKind.BINARY:
            raise PreconditionError(
                "weighted kappa needs an ordinal scale; use cohen_kappa for binary votes"
            )
        a, b = _pair_maps(matrix)
        va, vb = _paired_values(a, b)
        value, degenerate = _weighted_core(
            [int(v) for v in va], [int(v) for v in vb], matrix.scale, weighting is Weighting.QUADRATIC
        )
        return AgreementReport(
            method=method,
            value=value,
            n_items=len(a),
            n_raters=2,
            per_item_status=statuses,
            degenerate=degenerate,
        )
    strata = fleiss_strata(matrix)
    if not strata:
        raise PreconditionError("no item carries two or more ratings")
    if len(strata) == 1:
        only = strata[0]
        return AgreementReport(
            method=AgreementMethod.FLEISS_KAPPA,
            value=only.value,
            n_items=only.n_items,
            n_raters=only.n_raters,
            per_item_status=statuses,
            degenerate=only.degenerate,
            strata=strata,
        )
    return AgreementReport(
        method=AgreementMethod.FLEISS_KAPPA,
        value=None,
        n_items=sum(s.n_items for s in strata),
        n_raters=len(matrix.reviewers),
        per_item_status=statuses,
        degenerate=any(s.degenerate for s in strata),
        strata=strata,
    )


def matrix_for_method(
    policy: "SelectionPolicy",
    reviewers: Sequence[str],
    papers: Sequence[str],
    votes: Sequence["Vote"],
    method: AgreementMethod,
) -> VotingMatrix:
    """The voting matrix an agreement method should run over.

    Pairwise methods compare the two initial reviewers across the initial
    voting rounds; Fleiss' kappa sees every reviewer and every round.
    """
    pairwise = method is not AgreementMethod.FLEISS_KAPPA
    raters = tuple(reviewers[:2]) if pairwise else tuple(reviewers)
    rounds: Optional[Tuple[int, ...]] = None
    if pairwise and policy.workflow in (
        WorkflowKind.TWO_PLUS_ONE,
        WorkflowKind.TWO_REVIEWER_WORKSHOP,
    ):
        rounds = (1, 2)
    filtered = [v for v in votes if v.reviewer in raters]
    return VotingMatrix.from_votes(filtered, raters, papers, policy.scale, rounds)


def report_to_json(report: AgreementReport) -> Dict[str, object]:
    """JSON-ready view of a report, used by both the service and the CLI."""
    return {
        "method": report.method.value,
        "value": report.value,
        "n_items": report.n_items,
        "n_raters": report.n_raters,
        "degenerate": report.degenerate,
        "per_item_status": {p: s.value for p, s in report.per_item_status.items()},
        "strata": [
            {
                "n_raters": s.n_raters,
                "n_items": s.n_items,
                "value": s.value,
                "degenerate": s.degenerate,
            }
            for s in report.strata
        ],
    }
