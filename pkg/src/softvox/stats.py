"""Statistics for comparing runs: bootstrap CIs, Mann-Whitney U tests,
Bonferroni correction, aggregate Pareto fronts, and an exact 3D
hypervolume.

The Mann-Whitney p-value is exact (full null distribution of U over all
C(n+m, n) rank arrangements, via the standard counting recurrence) when
both samples have at most 12 values and there are no ties; otherwise it
falls back to the normal approximation with tie-corrected variance and a
continuity correction.

The bootstrap is a percentile bootstrap of the sample mean with
outward-rounded percentiles.  When the number of requested resamples
covers every possible resample (n^n), resampling is enumerated
exhaustively instead of drawn, which makes tiny cases exact.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .evolution import ObjectiveVector, sort_objective_fronts
from . import seeds


class PValueMethod(enum.Enum):
    EXACT_ENUMERATION = "exact"
    NORMAL_APPROXIMATION = "normal"


EXACT_LIMIT = 12


@dataclass(frozen=True)
class TestResult:
    u_statistic: float
    p_value: float
    adjusted_p: float
    method: PValueMethod


@dataclass(frozen=True)
class ParetoPoint:
    objectives: ObjectiveVector
    run_id: str
    individual_id: int


def bootstrap_ci(
    samples: list[float],
    level: float = 0.95,
    resamples: int = 10_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    if len(samples) == 0:
        raise ValueError("samples must be nonempty")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    data = np.asarray(samples, dtype=np.float64)
    n = len(data)
    total = n ** n
    if total <= resamples:
        means = np.array([
            float(np.mean(data[list(pick)]))
            for pick in itertools.product(range(n), repeat=n)
        ])
    else:
        rng = seeds.rng_for(seed)
        draws = rng.integers(0, n, size=(resamples, n))
        means = data[draws].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo = float(np.quantile(means, alpha, method="lower"))
    hi = float(np.quantile(means, 1.0 - alpha, method="higher"))
    return lo, hi


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    wins = (a[:, None] > b[None, :]).sum()
    ties = (a[:, None] == b[None, :]).sum()
    return float(wins) + 0.5 * float(ties)


def _exact_u_counts(n: int, m: int) -> np.ndarray:
    """counts[u] of tie-free rank arrangements giving U statistic u.

    Peeling the largest pooled value: if it belongs to the first sample
    it beats all j remaining second-sample values (U grows by j), else U
    is untouched, giving f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u).
    """
    dp: list[list[np.ndarray | None]] = [[None] * (m + 1) for _ in range(n + 1)]

    def counts(i: int, j: int) -> np.ndarray:
        cached = dp[i][j]
        if cached is not None:
            return cached
        out = np.zeros(i * j + 1)
        if i == 0 or j == 0:
            out[0] = 1.0
        else:
            a_side = counts(i - 1, j)
            out[j: j + len(a_side)] += a_side
            b_side = counts(i, j - 1)
            out[: len(b_side)] += b_side
        dp[i][j] = out
        return out

    return counts(n, m)


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(a: list[float], b: list[float]) -> TestResult:
    """Two-sided Mann-Whitney U test of a against b.

    adjusted_p starts equal to p_value; apply bonferroni_adjust for
    families of comparisons.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be nonempty")
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    n, m = len(xa), len(xb)
    u = _u_statistic(xa, xb)

    pooled = np.concatenate([xa, xb])
    has_ties = len(np.unique(pooled)) != len(pooled)

    if n <= EXACT_LIMIT and m <= EXACT_LIMIT and not has_ties:
        counts = _exact_u_counts(n, m)
        total = counts.sum()
        ui = int(round(u))
        p_low = float(counts[: ui + 1].sum() / total)
        p_high = float(counts[ui:].sum() / total)
        p = min(1.0, 2.0 * min(p_low, p_high))
        method = PValueMethod.EXACT_ENUMERATION
    else:
        mean_u = n * m / 2.0
        nm = n + m
        _, tie_counts = np.unique(pooled, return_counts=True)
        tie_term = float(((tie_counts ** 3) - tie_counts).sum()) / (nm * (nm - 1.0))
        var_u = n * m / 12.0 * ((nm + 1.0) - tie_term)
        if var_u <= 0:
            p = 1.0
        else:
            shift = -0.5 if u > mean_u else (0.5 if u < mean_u else 0.0)
            z = (u - mean_u + shift) / math.sqrt(var_u)
            p = min(1.0, 2.0 * _normal_sf(abs(z)))
        method = PValueMethod.NORMAL_APPROXIMATION
    return TestResult(u_statistic=u, p_value=p, adjusted_p=p, method=method)


def bonferroni_adjust(p_values: list[float], m: int) -> list[float]:
    """Scale each p-value by the number of comparisons, clamped at 1."""
    if m < len(p_values):
        raise ValueError("m must cover all reported p-values")
    return [min(1.0, m * p) for p in p_values]


def aggregate_pareto(runs) -> list[ParetoPoint]:
    """Nondominated union of all feasible points across runs.

    Duplicate objective vectors collapse to their first occurrence in
    run order; the result is sorted by distance descending.  Each run
    needs a run_id and an iterable of records with feasible, distance,
    energy, material, and individual_id fields.
    """
    points: list[ParetoPoint] = []
    seen: set[tuple] = set()
    for run in runs:
        for rec in run.records:
            if not rec.feasible:
                continue
            key = (rec.distance, rec.energy, rec.material)
            if key in seen:
                continue
            seen.add(key)
            points.append(
                ParetoPoint(
                    objectives=ObjectiveVector(rec.distance, rec.energy, rec.material),
                    run_id=run.run_id,
                    individual_id=rec.individual_id,
                )
            )
    if not points:
        return []
    fronts = sort_objective_fronts([p.objectives for p in points])
    front = [points[i] for i in fronts[0]]
    front.sort(
        key=lambda p: (
            -p.objectives.distance,
            p.objectives.energy,
            p.objectives.material,
            p.run_id,
            p.individual_id,
        )
    )
    return front


def hypervolume_3d(
    points: list[ObjectiveVector],
    ref_distance: float = 0.0,
    ref_energy: float = 1.0,
    ref_material: int | float = 448,
) -> float:
    """Volume of objective space dominated between the points and the
    reference (distance maximized, energy and material minimized).

    Points not strictly better than the reference in every coordinate
    contribute nothing.  Exact sweep over the material axis with a 2D
    staircase per slab.
    """
    boxes = []
    for p in points:
        u = (p.distance - ref_distance, ref_energy - p.energy, ref_material - p.material)
        if all(c > 0 for c in u):
            boxes.append(u)
    if not boxes:
        return 0.0
    boxes.sort(key=lambda u: -u[2])
    total = 0.0
    staircase: list[tuple[float, float]] = []  # maxima in the (u1, u2) plane
    prev_depth = boxes[0][2]
    for u1, u2, depth in boxes + [(0.0, 0.0, 0.0)]:
        if depth < prev_depth:
            total += _staircase_area(staircase) * (prev_depth - depth)
            prev_depth = depth
        if u1 > 0 and u2 > 0:
            if not any(s1 >= u1 and s2 >= u2 for s1, s2 in staircase):
                staircase = [
                    (s1, s2) for s1, s2 in staircase if not (u1 >= s1 and u2 >= s2)
                ]
                staircase.append((u1, u2))
    return total


def _staircase_area(points: list[tuple[float, float]]) -> float:
    if not points:
        return 0.0
    area = 0.0
    prev_x = 0.0
    for x, y in sorted(points, key=lambda p: (-p[1], p[0])):
        if x > prev_x:
            area += (x - prev_x) * y
            prev_x = x
    return area
