"""Unit-interval generator constructions and their verification.

A *generator* of a conditional law F(x | z) is a map g(z, u) whose output,
with u drawn from some fixed distribution, has law F(. | z) for every z.  A
generator is *one-to-one* when z can be recovered uniquely from (x, u).  The
constructions here all ride on wrap-around arithmetic on [0, 1):

* ``u ⊕ z`` is uniform for every z when u is uniform, and ``⊖`` inverts it,
  so ``x = F^{-1}(u ⊕ z)`` is a one-to-one generator of any z-independent
  law F;
* the worked triangular example takes F(x) = x^2 (density 2x) and adds an
  outcome ``y = v * (x^2 ⊖ u)`` with an independent uniform v.  Because
  ``x^2 ⊖ u`` reconstructs z exactly, y is uniform on [0, z] given z even
  though the outcome equation never reads z -- the whole point of the
  construction.

Verification is empirical: sample the generator at probe z values and
compare the empirical CDF against the target on a fixed 512-point grid.
The grid supremum stands in for the true supremum (the targets in scope are
2-Lipschitz, so the gap is at most one grid step times that constant).

Scalars and numpy arrays are both accepted everywhere; values equal to 1.0
fold to 0.0 so the wrap-around arithmetic stays total on [0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import stream
from .errors import InversionError

GRID_POINTS = 512
UNIT_GRID = np.linspace(0.0, 1.0, GRID_POINTS)
UNIT_GRID.setflags(write=False)

_RESIDUAL_TOL = 1e-9


def fold_unit(value):
    """Map values in [0, 1] into [0, 1), folding exact 1.0 to 0.0."""
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("unit-interval values must lie in [0, 1]")
    folded = np.where(arr >= 1.0, 0.0, arr)
    return float(folded) if np.ndim(value) == 0 else folded


def _wrap(r):
    # float % 1.0 can return exactly 1.0 for tiny negative numerators
    arr = np.asarray(r)
    folded = np.where(arr >= 1.0, arr - 1.0, arr)
    return float(folded) if arr.ndim == 0 else folded


def mod1_add(z, u):
    """Wrap-around sum on [0, 1): the fractional part of z + u."""
    z = fold_unit(z)
    u = fold_unit(u)
    return _wrap((z + u) % 1.0)


def mod1_sub(x, u):
    """Wrap-around difference on [0, 1): inverts :func:`mod1_add` in u."""
    x = fold_unit(x)
    u = fold_unit(u)
    return _wrap((x - u) % 1.0)


def example1_sample(z, u, v):
    """One draw of the worked triangular construction.

    ``x = sqrt(z ⊕ u)`` realizes the density 2x regardless of z; the outcome
    is computed through the substituted form ``y = v * (x^2 ⊖ u)`` -- not as
    ``v * z`` directly -- so the reconstruction of z out of (x, u) is
    actually exercised.  Algebraically the two coincide to rounding.
    """
    v = fold_unit(v)
    x = np.sqrt(mod1_add(z, u))
    y = v * mod1_sub(x * x, u)
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


@dataclass(frozen=True)
class GeneratorSpec:
    """An inverse-CDF description of the law a generator should realize.

    ``inverse_cdf(p, z)`` must be nondecreasing in p for fixed z and accept
    numpy arrays for p.  For z-independent laws, supplying the forward
    ``cdf`` enables exact inversion; otherwise a bisection fallback is used.
    Set ``z_dependent`` for laws that genuinely vary with z -- those have no
    one-to-one inverse through this construction.
    """

    inverse_cdf: Callable[[np.ndarray, float], np.ndarray]
    description: str = ""
    cdf: Callable[[np.ndarray], np.ndarray] | None = None
    z_dependent: bool = False

    def __post_init__(self) -> None:
        probe = np.linspace(0.0, 1.0, 17)
        vals = np.asarray([float(self.inverse_cdf(float(p), 0.0)) for p in probe])
        if np.any(np.diff(vals) < -1e-12):
            raise ValueError(f"inverse_cdf of {self.description!r} is not nondecreasing")


def uniform_spec() -> GeneratorSpec:
    """The identity law F(x) = x on [0, 1)."""
    return GeneratorSpec(
        inverse_cdf=lambda p, z: p,
        cdf=lambda x: np.clip(x, 0.0, 1.0),
        description="uniform",
    )


def triangular_spec() -> GeneratorSpec:
    """The triangular law with density 2x on [0, 1], i.e. F(x) = x^2."""
    return GeneratorSpec(
        inverse_cdf=lambda p, z: np.sqrt(p),
        cdf=lambda x: np.clip(x, 0.0, 1.0) ** 2,
        description="triangular(2x)",
    )


def corollary1_sample(spec: GeneratorSpec, z, u):
    """Draw from the shift generator ``x = F^{-1}(u ⊕ z | z)``.

    With u uniform on [0, 1) the output has law F(. | z); the construction
    is one-to-one exactly when the law does not actually depend on z.
    """
    p = mod1_add(u, z)
    x = spec.inverse_cdf(p, z)
    return float(x) if np.ndim(x) == 0 else np.asarray(x)


def _bisect_probability(spec: GeneratorSpec, x: float, iters: int = 80) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if float(spec.inverse_cdf(mid, 0.0)) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invert_generator(spec: GeneratorSpec, x, u):
    """Recover the unique z with ``corollary1_sample(spec, z, u) = x``.

    Computes ``z = F(x) ⊖ u``; available only for z-independent laws.  The
    round trip is checked and must land back within 1e-9 of x.
    """
    if spec.z_dependent:
        raise InversionError("one-to-one inverse not available: law depends on z")
    if spec.cdf is not None:
        p = spec.cdf(x)
    else:
        if np.ndim(x) != 0:
            p = np.asarray([_bisect_probability(spec, float(xi)) for xi in np.asarray(x).ravel()])
            p = p.reshape(np.shape(x))
        else:
            p = _bisect_probability(spec, float(x))
    z = mod1_sub(fold_unit(np.clip(p, 0.0, 1.0)), u)
    residual = np.abs(np.asarray(corollary1_sample(spec, z, u)) - np.asarray(x))
    worst = float(residual.max()) if residual.ndim else float(residual)
    if worst > _RESIDUAL_TOL:
        raise InversionError(f"inversion residual {worst:.3e} exceeds {_RESIDUAL_TOL}")
    return z


def empirical_cdf_sup_deviation(
    samples: np.ndarray,
    target_cdf: Callable[[np.ndarray], np.ndarray],
    grid: np.ndarray = UNIT_GRID,
) -> float:
    """Largest |empirical CDF - target CDF| over the evaluation grid."""
    xs = np.sort(np.asarray(samples, dtype=float))
    ecdf = np.searchsorted(xs, grid, side="right") / xs.size
    return float(np.abs(ecdf - np.asarray(target_cdf(grid), dtype=float)).max())


def probe_deviations(
    spec: GeneratorSpec,
    target_cdf: Callable[[np.ndarray, float], np.ndarray],
    z_probes: Sequence[float],
    n: int,
    seed: int,
) -> dict[float, float]:
    """Per-probe sup deviation of the generator's output law from the target.

    Probe i draws its n uniforms from the stream keyed by ``(seed, i)``, so
    results do not depend on probe evaluation order.
    """
    if n < 10**4:
        raise ValueError("need at least 10^4 samples per probe")
    out: dict[float, float] = {}
    for i, z in enumerate(z_probes):
        z = fold_unit(float(z))
        u = stream(seed, i).random(n)
        x = corollary1_sample(spec, z, u)
        out[z] = empirical_cdf_sup_deviation(x, lambda t: target_cdf(t, z))
    return out


def verify_generator(
    spec: GeneratorSpec,
    target_cdf: Callable[[np.ndarray, float], np.ndarray],
    z_probes: Sequence[float],
    n: int,
    seed: int,
) -> float:
    """Worst probe deviation; small iff the generator realizes the target."""
    devs = probe_deviations(spec, target_cdf, z_probes, n, seed)
    return max(devs.values())
