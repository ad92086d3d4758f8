"""Aggregation of rating sheets: criterion means, overall score, verdicts, Fleiss' kappa, Mann-Whitney U."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .framework import CRITERION_IDS, NOT_APPLICABLE, RatingSheet, Verdict

NA_POLICIES = ("exclude", "as_midpoint")
EXACT_MAX_N = 16


class EmptyInput(ValueError):
    pass


class UnbalancedRaters(ValueError):
    def __init__(self, item: int, expected: int, got: int):
        super().__init__(f"item {item} has {got} ratings, expected {expected}")
        self.item = item


class TooFewRaters(ValueError):
    pass


@dataclass(frozen=True)
class CriterionMean:
    mean: float | None
    n_applicable: int
    n_na: int


@dataclass(frozen=True)
class FrameworkScore:
    sigma: float | None
    n_scores: int


@dataclass(frozen=True)
class VerdictTally:
    counts: Mapping[Verdict, int]
    gendered_flag: bool
    majority: Verdict | None

    @property
    def n_raters(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "counts": {v.value: self.counts.get(v, 0) for v in Verdict},
            "gendered": self.gendered_flag,
            "majority": self.majority.value if self.majority else None,
        }


def _scored(sheets: Iterable[RatingSheet]) -> list[RatingSheet]:
    out = [s for s in sheets if s.scores is not None]
    if not out:
        raise EmptyInput("no scored rating sheets")
    return out


def _applicable(value: int, na_policy: str) -> int | None:
    if na_policy not in NA_POLICIES:
        raise ValueError(f"na_policy must be one of {NA_POLICIES}")
    if value == NOT_APPLICABLE:
        return 3 if na_policy == "as_midpoint" else None
    return value


def criterion_means(sheets: Iterable[RatingSheet], na_policy: str = "exclude") -> dict[str, CriterionMean]:
    """Per-criterion mean over raters; N/A scores are reported but (by default) not averaged."""
    scored = _scored(sheets)
    keys = [c for c in CRITERION_IDS if any(c in s.scores for s in scored)]
    keys += sorted({k for s in scored for k in s.scores} - set(keys))
    out = {}
    for cid in keys:
        values = [s.scores[cid] for s in scored if cid in s.scores]
        n_na = sum(v == NOT_APPLICABLE for v in values)
        used = [u for u in (_applicable(v, na_policy) for v in values) if u is not None]
        out[cid] = CriterionMean(sum(used) / len(used) if used else None, len(used), n_na)
    return out


def framework_score(sheets: Iterable[RatingSheet], na_policy: str = "exclude") -> FrameworkScore:
    """Overall score: flat mean of every applicable (criterion, rater) score."""
    used = [
        u
        for s in _scored(sheets)
        for v in s.scores.values()
        if (u := _applicable(v, na_policy)) is not None
    ]
    return FrameworkScore(sum(used) / len(used) if used else None, len(used))


def verdict_tally(sheets: Iterable[RatingSheet]) -> VerdictTally:
    sheets = list(sheets)
    if not sheets:
        raise EmptyInput("no rating sheets")
    counts = Counter(s.verdict for s in sheets)
    gendered = counts[Verdict.BOY] + counts[Verdict.GIRL] >= 1
    top = counts.most_common()
    majority = top[0][0] if len(top) == 1 or top[0][1] > top[1][1] else None
    return VerdictTally({v: counts.get(v, 0) for v in Verdict}, gendered, majority)


def flagged_fraction(tallies: Sequence[VerdictTally]) -> float:
    """Share of projects called gender-specific by at least one rater."""
    if not tallies:
        raise EmptyInput("no projects")
    return sum(t.gendered_flag for t in tallies) / len(tallies)


# ---------------------------------------------------------------------------
# Fleiss' kappa
# ---------------------------------------------------------------------------


def fleiss_kappa(ratings: Sequence[Sequence[Hashable]]) -> float:
    """Fleiss' kappa for an items x raters matrix of nominal labels.

    Every item must carry the same number (>= 2) of ratings. When expected
    agreement is 1 (a single category used throughout) the result is 1.0.
    """
    if len(ratings) == 0:
        raise EmptyInput("no items")
    n = len(ratings[0])
    for i, row in enumerate(ratings):
        if len(row) != n:
            raise UnbalancedRaters(i, n, len(row))
    if n < 2:
        raise TooFewRaters(f"need at least 2 raters per item, got {n}")
    counts = [Counter(row) for row in ratings]
    return fleiss_kappa_counts(counts, n)


def fleiss_kappa_counts(counts: Sequence[Mapping[Hashable, int]], n: int) -> float:
    """Same statistic from per-item category counts (each summing to ``n``)."""
    N = len(counts)
    p_bar = sum((sum(c * c for c in row.values()) - n) / (n * (n - 1)) for row in counts) / N
    totals: Counter = Counter()
    for row in counts:
        totals.update(row)
    pe_bar = sum((t / (N * n)) ** 2 for t in totals.values())
    if math.isclose(pe_bar, 1.0, rel_tol=0.0, abs_tol=1e-15):
        return 1.0
    return (p_bar - pe_bar) / (1.0 - pe_bar)


@dataclass(frozen=True)
class KappaResult:
    kappa: float | None
    n_items: int
    n_dropped: int
    n_raters: int


def _balanced_kappa(rows: list[list[Hashable]]) -> KappaResult:
    if not rows:
        return KappaResult(None, 0, 0, 0)
    modal = Counter(len(r) for r in rows).most_common(1)[0][0]
    kept = [r for r in rows if len(r) == modal]
    if modal < 2:
        return KappaResult(None, len(kept), len(rows) - len(kept), modal)
    return KappaResult(fleiss_kappa(kept), len(kept), len(rows) - len(kept), modal)


def verdict_kappa(sheets_by_project: Mapping[str, Sequence[RatingSheet]]) -> KappaResult:
    """Agreement on the overall verdict; projects with an off-mode rater count are dropped."""
    rows = [[s.verdict.value for s in sheets] for _, sheets in sorted(sheets_by_project.items())]
    return _balanced_kappa(rows)


def criteria_kappa(sheets_by_project: Mapping[str, Sequence[RatingSheet]]) -> KappaResult:
    """Agreement on criterion scores, each (project, criterion) an item and 0-5 nominal categories."""
    rows = []
    for _, sheets in sorted(sheets_by_project.items()):
        scored = [s for s in sheets if s.scores is not None]
        if not scored:
            continue
        for cid in CRITERION_IDS:
            row = [s.scores[cid] for s in scored if cid in s.scores]
            if row:
                rows.append(row)
    return _balanced_kappa(rows)


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_two_sided: float
    method: str  # "exact" | "normal"

    def __iter__(self):
        yield self.u
        yield self.p_two_sided


def midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def u_distribution(n1: int, n2: int) -> list[int]:
    """Number of rank arrangements giving each U in ``0..n1*n2`` (no ties)."""
    # table[m][n] holds the count vector for sample sizes (m, n)
    table = [[[1] for _ in range(n2 + 1)] for _ in range(n1 + 1)]
    for m in range(1, n1 + 1):
        for n in range(1, n2 + 1):
            size = m * n + 1
            out = [0] * size
            # largest observation from the first sample: contributes n to U
            for u, c in enumerate(table[m - 1][n]):
                out[u + n] += c
            for u, c in enumerate(table[m][n - 1]):
                out[u] += c
            table[m][n] = out
    return table[n1][n2]


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test.

    Exact null distribution when the samples are tie-free and small
    (combined size <= 16), otherwise the normal approximation with tie and
    continuity corrections.
    """
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise EmptyInput("both samples need at least one value")
    pooled = [float(x) for x in a] + [float(x) for x in b]
    ranks = midranks(pooled)
    u_a = sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0
    u = min(u_a, n1 * n2 - u_a)
    ties = [t for t in Counter(pooled).values() if t > 1]

    if not ties and n1 + n2 <= EXACT_MAX_N:
        dist = u_distribution(n1, n2)
        tail = sum(dist[: int(round(u)) + 1])
        return MannWhitneyResult(u, min(1.0, 2.0 * tail / sum(dist)), "exact")

    N = n1 + n2
    tie_term = sum(t**3 - t for t in ties) / (N * (N - 1)) if N > 1 else 0.0
    var = n1 * n2 / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return MannWhitneyResult(u, 1.0, "normal")
    z = (abs(u - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    p = math.erfc(max(z, 0.0) / math.sqrt(2.0))
    return MannWhitneyResult(u, min(1.0, p), "normal")


def group_by_project(sheets: Iterable[RatingSheet]) -> dict[str, list[RatingSheet]]:
    out: dict[str, list[RatingSheet]] = defaultdict(list)
    for s in sheets:
        out[s.project_id].append(s)
    return dict(out)
