"""Falsification checks for instrumental-variable compatibility.

The central statistic is the instrumental-inequality score

    score = max_x sum_y [ max_z P(x, y | z) ],

which cannot exceed 1 for any distribution produced by a two-stage
instrumental process (treatment responds to instrument and latent state,
outcome responds to treatment and the same latent state, instrument
independent of the latent state).  A score above 1 therefore falsifies the
claim that Z is an instrument for (X, Y).

Also provided:

* the four-line specialization of the score for all-binary domains;
* the tightened one-sided comparisons valid when no unit responds against
  its assignment (monotone treatment uptake);
* the gridded-density analogue for continuous outcome and instrument with
  discrete treatment;
* a lower bound on the latent mass that responds identically to two distinct
  instrument levels; and
* a stratified multinomial bootstrap for the sampling uncertainty of the
  score on count data.

Exact-table verdicts use ``DEFAULT_TOL``; sampled data should be judged via
the bootstrap interval, with the point verdict flagged as such by callers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ._rng import stream
from .errors import TableError, UndefinedStrataError
from .tables import (
    ConditionalTable,
    Domain,
    SampleCounts,
    estimate_from_counts,
    _freeze,
)

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class IvReport:
    """Result of the instrumental-inequality evaluation.

    ``per_x_sums`` maps each treatment level to its sum of stratum-maxima;
    ``argmax_z`` records, per (x, y), which stratum attained the maximum
    (lowest-index defined stratum on ties).  ``violated`` is exactly
    ``score > 1 + tol``.
    """

    score: float
    per_x_sums: dict[str, float]
    argmax_z: dict[str, dict[str, str]]
    violated: bool
    tol: float

    def as_dict(self) -> dict:
        return {
            "score": self.score,
            "per_x_sums": self.per_x_sums,
            "argmax_z": self.argmax_z,
            "violated": self.violated,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class BinaryIvReport:
    """The four binary-domain inequality left-hand sides, in printed order."""

    lhs: tuple[float, float, float, float]
    violated_indices: tuple[int, ...]
    tol: float

    def as_dict(self) -> dict:
        return {
            "lhs": list(self.lhs),
            "violated_indices": list(self.violated_indices),
            "tol": self.tol,
        }


@dataclass(frozen=True)
class MonotonicityComparison:
    index: int
    description: str
    lhs: float
    rhs: float
    holds: bool

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "description": self.description,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class MarginInterval:
    """Percentile bootstrap interval for the score."""

    lower: float
    upper: float
    level: float
    replicates: int

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "replicates": self.replicates,
        }


def iv_score(table: ConditionalTable, tol: float = DEFAULT_TOL) -> IvReport:
    """Evaluate the instrumental inequality on a conditional table.

    Maxima run over defined strata only; ties go to the lowest-index defined
    stratum in declared Z order, which never changes the score.
    """
    if not table.defined_strata:
        raise UndefinedStrataError("table has no defined strata to maximize over")
    idx = table.defined_indices()
    sub = table.values[idx]  # (defined, x, y)
    best = sub.max(axis=0)
    which = idx[sub.argmax(axis=0)]
    per_x = best.sum(axis=1)
    score = float(per_x.max())
    x_levels = table.domains.x.levels
    y_levels = table.domains.y.levels
    z_levels = table.domains.z.levels
    return IvReport(
        score=score,
        per_x_sums={x: float(per_x[i]) for i, x in enumerate(x_levels)},
        argmax_z={
            x: {y: z_levels[which[i, j]] for j, y in enumerate(y_levels)}
            for i, x in enumerate(x_levels)
        },
        violated=bool(score > 1.0 + tol),
        tol=tol,
    )


def _require_all_binary(table: ConditionalTable, op: str) -> None:
    if not table.domains.is_all_binary():
        raise TableError(f"{op} requires binary Z, X and Y domains")
    if len(table.defined_strata) != 2:
        raise UndefinedStrataError(f"{op} requires both strata to be defined")


def binary_inequalities(table: ConditionalTable, tol: float = DEFAULT_TOL) -> BinaryIvReport:
    """The four inequalities the score reduces to on all-binary domains.

    With level positions taken from the declared orders (position 0 is "=0",
    position 1 is "=1"), the left-hand sides are, in order:

        1. P(Y=0, X=0 | Z=0) + P(Y=1, X=0 | Z=1)
        2. P(Y=0, X=1 | Z=0) + P(Y=1, X=1 | Z=1)
        3. P(Y=1, X=0 | Z=0) + P(Y=0, X=0 | Z=1)
        4. P(Y=1, X=1 | Z=0) + P(Y=0, X=1 | Z=1)

    Each must be <= 1; a table violates overall exactly when the full score
    does, with the same tolerance.
    """
    _require_all_binary(table, "binary_inequalities")
    v = table.values
    lhs = (
        float(v[0, 0, 0] + v[1, 0, 1]),
        float(v[0, 1, 0] + v[1, 1, 1]),
        float(v[0, 0, 1] + v[1, 0, 0]),
        float(v[0, 1, 1] + v[1, 1, 0]),
    )
    violated = tuple(i + 1 for i, s in enumerate(lhs) if s > 1.0 + tol)
    return BinaryIvReport(lhs=lhs, violated_indices=violated, tol=tol)


def monotonicity_check(
    table: ConditionalTable, tol: float = DEFAULT_TOL
) -> list[MonotonicityComparison]:
    """The tightened comparisons under monotone treatment uptake.

    Valid when no unit takes the treatment opposite to its assignment
    (g(z1, u) >= g(z2, u) whenever z1 >= z2 in declared order).  For each
    outcome level y the two lines are

        P(y, X=1 | Z=1) >= P(y, X=1 | Z=0)
        P(y, X=0 | Z=0) >= P(y, X=0 | Z=1)

    A failure flags selection bias, a direct instrument effect, or the
    presence of contrarian units; the overall score may still pass.
    """
    _require_all_binary(table, "monotonicity_check")
    v = table.values
    z0, z1 = table.domains.z.levels
    x0, x1 = table.domains.x.levels
    out: list[MonotonicityComparison] = []
    for yj, y in enumerate(table.domains.y.levels):
        out.append(
            MonotonicityComparison(
                index=len(out) + 1,
                description=f"P(y={y},x={x1}|z={z1}) >= P(y={y},x={x1}|z={z0})",
                lhs=float(v[1, 1, yj]),
                rhs=float(v[0, 1, yj]),
                holds=bool(v[1, 1, yj] >= v[0, 1, yj] - tol),
            )
        )
    for yj, y in enumerate(table.domains.y.levels):
        out.append(
            MonotonicityComparison(
                index=len(out) + 1,
                description=f"P(y={y},x={x0}|z={z0}) >= P(y={y},x={x0}|z={z1})",
                lhs=float(v[0, 0, yj]),
                rhs=float(v[1, 0, yj]),
                holds=bool(v[0, 0, yj] >= v[1, 0, yj] - tol),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Continuous outcome / instrument with discrete treatment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GriddedDensity:
    """Cell-averaged conditional densities f(y | x, z) with weights P(x | z).

    ``y_edges`` are the m+1 increasing cell edges; ``density[zi, xi, c]`` is
    the density on cell c given treatment level xi and observed instrument
    value ``z_levels[zi]``; ``weight[zi, xi]`` is P(x | z).  Densities must
    integrate to 1 (within 1e-6) wherever the weight is positive, and the
    weights must sum to 1 over x in every stratum.
    """

    x_domain: Domain
    z_levels: tuple[float, ...]
    y_edges: np.ndarray
    density: np.ndarray
    weight: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.y_edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise TableError("y_edges must contain at least two edges (one cell)")
        if not np.all(np.diff(edges) > 0):
            raise TableError("y_edges must be strictly increasing")
        object.__setattr__(self, "z_levels", tuple(float(z) for z in self.z_levels))
        if len(self.z_levels) < 1:
            raise TableError("need at least one observed z value")
        nz, nx, m = len(self.z_levels), self.x_domain.size, edges.size - 1
        dens = np.asarray(self.density, dtype=float)
        wt = np.asarray(self.weight, dtype=float)
        if dens.shape != (nz, nx, m):
            raise TableError(f"density has shape {dens.shape}, expected {(nz, nx, m)}")
        if wt.shape != (nz, nx):
            raise TableError(f"weight has shape {wt.shape}, expected {(nz, nx)}")
        if dens.min(initial=0.0) < -1e-12 or wt.min(initial=0.0) < -1e-12:
            raise TableError("densities and weights must be nonnegative")
        dens = np.clip(dens, 0.0, None)
        wt = np.clip(wt, 0.0, None)
        col = wt.sum(axis=1)
        if np.abs(col - 1.0).max() > 1e-9:
            raise TableError("treatment weights must sum to 1 in every stratum")
        widths = np.diff(edges)
        mass = (dens * widths).sum(axis=2)
        bad = (wt > 1e-12) & (np.abs(mass - 1.0) > 1e-6)
        if bad.any():
            zi, xi = np.argwhere(bad)[0]
            raise TableError(
                f"density for (z={self.z_levels[zi]}, x={self.x_domain.levels[xi]}) "
                f"integrates to {mass[zi, xi]}, not within 1e-6 of 1"
            )
        object.__setattr__(self, "y_edges", _freeze(edges))
        object.__setattr__(self, "density", _freeze(dens))
        object.__setattr__(self, "weight", _freeze(wt))

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.y_edges)


@dataclass(frozen=True)
class ContinuousIvReport:
    """Per-treatment values of the gridded instrumental-inequality integral."""

    values: dict[str, float]
    grid_tolerance: float
    violated: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "values": self.values,
            "grid_tolerance": self.grid_tolerance,
            "violated": list(self.violated),
        }


def continuous_iv_score(density: GriddedDensity) -> ContinuousIvReport:
    """Rectangle-rule evaluation of ``int_y max_z [f(y|x,z) P(x|z)] dy`` per x.

    The verdict tolerance is ``1e-6 + 2 * max cell width`` so that honest
    discretization error can never manufacture a violation.
    """
    widths = density.cell_widths
    if widths.size < 1:
        raise TableError("empty grid")
    integrand = density.density * density.weight[:, :, None]
    per_x = (integrand.max(axis=0) * widths[None, :]).sum(axis=1)
    grid_tol = 1e-6 + 2.0 * float(widths.max())
    values = {x: float(v) for x, v in zip(density.x_domain.levels, per_x)}
    violated = tuple(x for x, v in values.items() if v > 1.0 + grid_tol)
    return ContinuousIvReport(values=values, grid_tolerance=grid_tol, violated=violated)


# ---------------------------------------------------------------------------
# Nonresponsive subpopulation bound
# ---------------------------------------------------------------------------


def _group_by_z(x_given_z: Mapping[tuple[str, str], float]) -> dict[str, dict[str, float]]:
    by_z: dict[str, dict[str, float]] = {}
    for (x, z), p in x_given_z.items():
        by_z.setdefault(str(z), {})[str(x)] = float(p)
    if not by_z:
        raise TableError("empty treatment-given-instrument map")
    for z, col in by_z.items():
        total = sum(col.values())
        if abs(total - 1.0) > 1e-9:
            raise TableError(f"P(x | z={z}) sums to {total}, not within 1e-9 of 1")
        if min(col.values()) < -1e-12:
            raise TableError(f"P(x | z={z}) has a negative entry")
    return by_z


def nonresponsive_certificate(
    x_given_z: Mapping[tuple[str, str], float]
) -> tuple[float, str | None, str | None, str | None]:
    """Bound plus the (x, z1, z2) triple achieving it.

    Whenever ``P(x|z1) + P(x|z2) > 1`` a latent mass of at least the excess
    must map both instrument levels to the same treatment, so the returned
    value lower-bounds the probability of states with g(z1, u) = g(z2, u).
    Returns (0, None, None, None) when no pair certifies anything.
    """
    by_z = _group_by_z(x_given_z)
    zs = sorted(by_z)
    xs = sorted({x for col in by_z.values() for x in col})
    best, arg = 0.0, (None, None, None)
    for i, z1 in enumerate(zs):
        for z2 in zs[i + 1 :]:
            for x in xs:
                excess = by_z[z1].get(x, 0.0) + by_z[z2].get(x, 0.0) - 1.0
                if excess > best:
                    best, arg = excess, (x, z1, z2)
    return (best, *arg)


def nonresponsive_bound(x_given_z: Mapping[tuple[str, str], float]) -> float:
    """``max_{x, z1 != z2} max(0, P(x|z1) + P(x|z2) - 1)``."""
    return nonresponsive_certificate(x_given_z)[0]


def x_margin_given_z(table: ConditionalTable) -> dict[tuple[str, str], float]:
    """Collapse a conditional table to its P(x | z) map over defined strata."""
    out: dict[tuple[str, str], float] = {}
    for z in table.defined_strata:
        slab = table.stratum(z).sum(axis=1)
        for x, p in zip(table.domains.x.levels, slab):
            out[(x, z)] = float(p)
    return out


# ---------------------------------------------------------------------------
# Bootstrap uncertainty for the score on count data
# ---------------------------------------------------------------------------


def bootstrap_margin(
    counts: SampleCounts,
    replicates: int,
    level: float,
    seed: int,
    score_fn: Callable[[ConditionalTable], IvReport] = iv_score,
) -> MarginInterval:
    """Percentile interval for the score under stratified multinomial resampling.

    Each replicate redraws every non-empty z-stratum with its original size
    held fixed (instrument assignment is by design, so stratum sizes are not
    random), re-estimates the conditional table and re-scores it.  Replicate
    r uses the stream keyed by ``(seed, r)``, so the result is identical for
    a fixed seed no matter how replicates are scheduled.  Empty strata are
    excluded with a warning.
    """
    if replicates < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    sizes = counts.stratum_sizes()
    for lv, nz in zip(counts.domains.z.levels, sizes):
        if nz == 0:
            warnings.warn(
                f"z stratum {lv!r} has zero count and is excluded from the bootstrap",
                stacklevel=2,
            )
    nx, ny = counts.domains.x.size, counts.domains.y.size
    nonzero = np.flatnonzero(sizes)
    probs = [counts.counts[zi].ravel() / sizes[zi] for zi in nonzero]
    scores = np.empty(replicates)
    for r in range(replicates):
        rng = stream(seed, r)
        resampled = np.zeros(counts.domains.shape, dtype=np.int64)
        for zi, p in zip(nonzero, probs):
            resampled[zi] = rng.multinomial(int(sizes[zi]), p).reshape(nx, ny)
        est = estimate_from_counts(SampleCounts(counts.domains, resampled))
        scores[r] = score_fn(est).score
    alpha = 1.0 - level
    lower = float(np.quantile(scores, alpha / 2.0))
    upper = float(np.quantile(scores, 1.0 - alpha / 2.0))
    return MarginInterval(lower=lower, upper=upper, level=level, replicates=replicates)
