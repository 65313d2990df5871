"""Instrumental processes: finite structural models and the linear-Gaussian one.

A finite instrumental process draws an instrument level z and an independent
latent state u, then sets ``x = g(z, u)`` and ``y = h(x, u)``.  The latent
state is an explicit finite index set: for finite domains nothing is lost by
this (see the response-type oracle), and it buys exact enumeration of the
observable conditional instead of integration.

Interventions are structural: ``set(X = x)`` replaces the g-equation with the
constant x and leaves everything else untouched, which is what
:func:`causal_effect` enumerates and what the sampling oracle in the tests
replays.

The linear-Gaussian model ``x = a z + c u``, ``y = b x + u`` (z, u independent
zero-mean Gaussians) shares one scalar disturbance between both equations, so
its implied covariance has rank two; :func:`fit_linear_iv` inverts it exactly
when an exact inversion exists and refuses otherwise.

Randomness is counter-based (Philox) keyed by the caller's seed: results
depend only on the arguments, never on scheduling or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .errors import InconsistentModelError, NotAnInstrumentError, TableError
from .tables import ConditionalTable, Domain, DomainTriple, SampleCounts, _freeze

_PROB_TOL = 1e-9


def _as_distribution(p, size: int, what: str) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (size,):
        raise TableError(f"{what} has shape {arr.shape}, expected ({size},)")
    if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < -1e-12:
        raise TableError(f"{what} must be finite and nonnegative")
    arr = np.clip(arr, 0.0, None)
    total = float(arr.sum())
    if abs(total - 1.0) > _PROB_TOL:
        raise TableError(f"{what} sums to {total}, not within {_PROB_TOL} of 1")
    return arr / total


def _as_function_table(t, shape: tuple[int, int], n_out: int, what: str) -> np.ndarray:
    arr = np.asarray(t)
    if arr.shape != shape:
        raise TableError(f"{what} has shape {arr.shape}, expected {shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise TableError(f"{what} must hold integer level indices")
    arr = arr.astype(np.int64)
    if arr.min(initial=0) < 0 or arr.max(initial=0) >= n_out:
        raise TableError(f"{what} maps outside the target domain (size {n_out})")
    return arr


@dataclass(frozen=True)
class FiniteSCM:
    """An instrumental process on finite domains.

    ``g_table[z, u]`` is the x-index chosen under instrument level z in latent
    state u; ``h_table[x, u]`` is the y-index under treatment x in state u.
    Z and U are independent by construction: there is no joint table to
    misspecify.
    """

    domains: DomainTriple
    p_z: np.ndarray
    p_u: np.ndarray
    g_table: np.ndarray
    h_table: np.ndarray

    def __post_init__(self) -> None:
        nz, nx, ny = self.domains.shape
        p_u = np.asarray(self.p_u, dtype=float)
        if p_u.ndim != 1 or p_u.size < 1:
            raise TableError("p_u must be a non-empty vector")
        object.__setattr__(self, "p_z", _freeze(_as_distribution(self.p_z, nz, "p_z")))
        object.__setattr__(self, "p_u", _freeze(_as_distribution(p_u, p_u.size, "p_u")))
        nu = self.u_size
        object.__setattr__(
            self, "g_table", _freeze(_as_function_table(self.g_table, (nz, nu), nx, "g_table"))
        )
        object.__setattr__(
            self, "h_table", _freeze(_as_function_table(self.h_table, (nx, nu), ny, "h_table"))
        )

    @property
    def u_size(self) -> int:
        return int(self.p_u.size)


def induced_conditional(scm: FiniteSCM) -> ConditionalTable:
    """Exact observable conditional P(x, y | z) of an instrumental process.

    For each stratum, ``P(x, y | z) = sum_u p_u(u) [g(z,u)=x][h(x,u)=y]``;
    no sampling is involved.  Strata with zero instrument probability are
    left undefined.
    """
    nz, nx, ny = scm.domains.shape
    nu = scm.u_size
    vals = np.zeros((nz, nx, ny), dtype=float)
    u_idx = np.arange(nu)
    for zi in range(nz):
        x_idx = scm.g_table[zi]
        y_idx = scm.h_table[x_idx, u_idx]
        np.add.at(vals[zi], (x_idx, y_idx), scm.p_u)
    defined = scm.p_z > 0.0
    vals[~defined] = 0.0
    labels = tuple(lv for lv, d in zip(scm.domains.z.levels, defined) if d)
    return ConditionalTable(scm.domains, vals, labels)


def sample_rows(scm: FiniteSCM, n: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """n i.i.d. draws from the process, as (z, x, y) index arrays."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = stream(seed)
    z = rng.choice(scm.domains.z.size, size=n, p=scm.p_z)
    u = rng.choice(scm.u_size, size=n, p=scm.p_u)
    x = scm.g_table[z, u]
    y = scm.h_table[x, u]
    return z, x, y


def sample(scm: FiniteSCM, n: int, seed: int) -> SampleCounts:
    """Aggregate :func:`sample_rows` into counts; deterministic per seed."""
    nz, nx, ny = scm.domains.shape
    z, x, y = sample_rows(scm, n, seed)
    flat = (z * nx + x) * ny + y
    counts = np.bincount(flat, minlength=nz * nx * ny).reshape(nz, nx, ny)
    return SampleCounts(scm.domains, counts)


def intervene(scm: FiniteSCM, x_level: str) -> FiniteSCM:
    """Replace the g-equation with the constant x (the set(X=x) intervention)."""
    xi = scm.domains.x.index(x_level)
    g = np.full((scm.domains.z.size, scm.u_size), xi, dtype=np.int64)
    return FiniteSCM(scm.domains, scm.p_z, scm.p_u, g, scm.h_table)


def causal_effect(scm: FiniteSCM, x_level: str) -> dict[str, float]:
    """Distribution of Y under set(X=x): sum of p_u over states with h(x,u)=y."""
    forced = intervene(scm, x_level)
    xi = scm.domains.x.index(x_level)
    ny = scm.domains.y.size
    weights = np.bincount(forced.h_table[xi], weights=forced.p_u, minlength=ny)
    weights = weights / weights.sum()
    return {lv: float(w) for lv, w in zip(scm.domains.y.levels, weights)}


def random_instrumental_scm(
    dims: tuple[int, int, int, int], seed: int, monotone_g: bool = False
) -> FiniteSCM:
    """Draw a random instrumental process for property sweeps.

    ``dims`` is (|Z|, |X|, |Y|, |U|) with every observed domain of size >= 2
    and |U| >= 1.  ``p_z`` and ``p_u`` are flat-Dirichlet distributed, g and h
    are uniform over functions.  With ``monotone_g`` each latent state's
    response section g(., u) is made nondecreasing in the declared Z order by
    sorting its values, so no state responds against its assignment.
    """
    nz, nx, ny, nu = dims
    if min(nz, nx, ny) < 2:
        raise ValueError("observed domains need at least 2 levels")
    if nu < 1:
        raise ValueError("|U| must be at least 1")
    rng = stream(seed)
    domains = DomainTriple(
        Domain("Z", tuple(str(i) for i in range(nz))),
        Domain("X", tuple(str(i) for i in range(nx))),
        Domain("Y", tuple(str(i) for i in range(ny))),
    )
    p_z = rng.dirichlet(np.ones(nz))
    p_u = rng.dirichlet(np.ones(nu))
    g = rng.integers(0, nx, size=(nz, nu))
    if monotone_g:
        g = np.sort(g, axis=0)
    h = rng.integers(0, ny, size=(nx, nu))
    return FiniteSCM(domains, p_z, p_u, g, h)


# ---------------------------------------------------------------------------
# Linear-Gaussian instrumental model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearGaussianSCM:
    """x = a z + c u, y = b x + u with independent z ~ N(0, var_z), u ~ N(0, var_u)."""

    a_hat: float
    b_hat: float
    c_hat: float
    var_z: float
    var_u: float

    def __post_init__(self) -> None:
        for name in ("var_z", "var_u"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise TableError(f"{name} must be positive, got {v}")
        for name in ("a_hat", "b_hat", "c_hat"):
            if not np.isfinite(getattr(self, name)):
                raise TableError(f"{name} must be finite")

    def implied_covariance(self) -> np.ndarray:
        """Covariance of (Z, X, Y); always symmetric PSD of rank <= 2."""
        a, b, c = self.a_hat, self.b_hat, self.c_hat
        vz, vu = self.var_z, self.var_u
        szz = vz
        szx = a * vz
        szy = a * b * vz
        sxx = a * a * vz + c * c * vu
        sxy = b * sxx + c * vu
        syy = b * b * sxx + 2.0 * b * c * vu + vu
        return np.array([[szz, szx, szy], [szx, sxx, sxy], [szy, sxy, syy]])

    def to_dict(self) -> dict:
        return {
            "a": self.a_hat,
            "b": self.b_hat,
            "c": self.c_hat,
            "var_z": self.var_z,
            "var_u": self.var_u,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearGaussianSCM":
        try:
            return cls(
                float(data["a"]),
                float(data["b"]),
                float(data["c"]),
                float(data["var_z"]),
                float(data["var_u"]),
            )
        except KeyError as exc:
            raise TableError(f"linear model JSON is missing key {exc}") from None


def sample_linear(model: LinearGaussianSCM, n: int, seed: int) -> np.ndarray:
    """n rows of (z, x, y) drawn from the linear model; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = stream(seed)
    z = rng.normal(0.0, np.sqrt(model.var_z), size=n)
    u = rng.normal(0.0, np.sqrt(model.var_u), size=n)
    x = model.a_hat * z + model.c_hat * u
    y = model.b_hat * x + u
    return np.column_stack([z, x, y])


@dataclass(frozen=True)
class CovarianceTriple:
    """A symmetric positive-definite 3x3 covariance over (Z, X, Y)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise TableError(f"covariance must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise TableError("covariance contains non-finite entries")
        if np.abs(m - m.T).max() > 1e-9 * max(1.0, np.abs(m).max()):
            raise TableError("covariance is not symmetric")
        m = 0.5 * (m + m.T)
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise TableError("covariance is not positive definite") from None
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def zx(self) -> float:
        return float(self.matrix[0, 1])

    @property
    def zy(self) -> float:
        return float(self.matrix[0, 2])


def fit_linear_iv(cov: CovarianceTriple, tol: float = 1e-9) -> LinearGaussianSCM:
    """Invert a covariance into the linear instrumental model, or refuse.

    The slope is the instrumental-variable ratio ``b = Cov(Z,Y) / Cov(Z,X)``;
    the remaining parameters follow uniquely from the (Z, X) block and the
    X-Y moments.  The fit is accepted only if the model's implied covariance
    reproduces the input within ``tol`` (scaled by the largest entry) -- a
    covariance that admits no such model with positive disturbance variance
    is reported, never forced.
    """
    m = cov.matrix
    szz, szx, szy = m[0, 0], m[0, 1], m[0, 2]
    sxx, sxy, syy = m[1, 1], m[1, 2], m[2, 2]
    if abs(szx) < 1e-12 * max(1.0, np.sqrt(szz * sxx)):
        raise NotAnInstrumentError("not an instrument for identification: Cov(Z, X) = 0")
    b = szy / szx
    a = szx / szz
    var_z = szz
    cu = sxy - b * sxx  # = c * var_u
    var_u = syy - b * b * sxx - 2.0 * b * cu
    if not np.isfinite(var_u) or var_u <= 0.0:
        raise InconsistentModelError(
            "inconsistent with instrumental linear model: "
            f"implied disturbance variance {var_u} is not positive"
        )
    c = cu / var_u
    model = LinearGaussianSCM(a, b, c, var_z, var_u)
    err = np.abs(model.implied_covariance() - m).max()
    if err > tol * max(1.0, np.abs(m).max()):
        raise InconsistentModelError(
            "inconsistent with instrumental linear model: "
            f"covariance residual {err:.3e} exceeds tolerance"
        )
    return model


def scm_from_dict(data: dict) -> FiniteSCM:
    """Build a finite SCM from its JSON form.

    Schema: ``{"domains": {"z": [...], "x": [...], "y": [...]}, "p_z": [...],
    "p_u": [...], "g": [[x per u] per z], "h": [[y per u] per x]}`` where g/h
    entries are level labels (or integer indices).
    """
    for key in ("domains", "p_z", "p_u", "g", "h"):
        if key not in data:
            raise TableError(f"SCM JSON is missing {key!r}")
    dd = data["domains"]
    domains = DomainTriple(
        Domain("Z", tuple(dd["z"])), Domain("X", tuple(dd["x"])), Domain("Y", tuple(dd["y"]))
    )

    def decode(rows, domain: Domain, what: str) -> np.ndarray:
        out = []
        for row in rows:
            out.append(
                [e if isinstance(e, int) else domain.index(e) for e in row]
            )
        arr = np.asarray(out, dtype=np.int64)
        if arr.ndim != 2:
            raise TableError(f"{what} must be a matrix")
        return arr

    return FiniteSCM(
        domains,
        np.asarray(data["p_z"], dtype=float),
        np.asarray(data["p_u"], dtype=float),
        decode(data["g"], domains.x, "g"),
        decode(data["h"], domains.y, "h"),
    )


def scm_to_dict(scm: FiniteSCM) -> dict:
    return {
        "domains": {
            "z": list(scm.domains.z.levels),
            "x": list(scm.domains.x.levels),
            "y": list(scm.domains.y.levels),
        },
        "p_z": scm.p_z.tolist(),
        "p_u": scm.p_u.tolist(),
        "g": [[scm.domains.x.levels[i] for i in row] for row in scm.g_table],
        "h": [[scm.domains.y.levels[i] for i in row] for row in scm.h_table],
    }
