"""Exact generability oracle for finite conditional tables.

A conditional table P(x, y | z) is generable by an instrumental process iff
it is a mixture of *response types*: deterministic pairs (g_type, h_type)
where g_type maps instrument levels to treatment levels and h_type maps
treatment levels to outcome levels.  Latent states with identical sections
are observationally interchangeable, so the finitely many types canonically
partition any latent space without losing anything observable.

Generability is therefore a linear-programming feasibility question: does a
probability vector q over the types reproduce every cell?  The system is

    sum_{types t : g_t(z) = x, h_t(x) = y} q_t = P(x, y | z)   for all cells,
    sum_t q_t = 1,   q >= 0,

solved by a self-contained phase-1 simplex (Bland's rule, so it always
terminates).  The phase-1 optimum is the residual left after the best
sub-probability cover of the cells; the table is declared generable when
that residual is at most ``FEAS_TOL``.  Float verdicts closer to the
boundary than ``EXACT_BAND`` are re-solved in exact rational arithmetic,
because deterministic cells sit exactly on the polytope boundary and that is
where float pivoting can lie.

The inequality score is necessary but (beyond binary treatment) not
sufficient, so this oracle is the ground truth the score is tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import OracleSizeError, TableError, UndefinedStrataError
from .scm import FiniteSCM
from .tables import ConditionalTable, DomainTriple

FEAS_TOL = 1e-7
EXACT_BAND = 1e-5
MAX_TYPES = 10**6
WITNESS_CELL_TOL = 1e-7


@dataclass(frozen=True)
class ResponseType:
    """One deterministic latent section: x-indices per z, y-indices per x."""

    g_type: tuple[int, ...]
    h_type: tuple[int, ...]

    def column(self, domains: DomainTriple) -> np.ndarray:
        """The table this type alone would induce, as a (z, x, y) 0/1 array."""
        nz, nx, ny = domains.shape
        col = np.zeros((nz, nx, ny))
        for zi in range(nz):
            xi = self.g_type[zi]
            col[zi, xi, self.h_type[xi]] = 1.0
        return col


@dataclass(frozen=True)
class FeasibilityWitness:
    """A mixture over response types that reproduces a conditional table."""

    domains: DomainTriple
    weights: dict[ResponseType, float]
    residual: float

    def __post_init__(self) -> None:
        if any(w < -1e-12 for w in self.weights.values()):
            raise TableError("witness weights must be nonnegative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise TableError(f"witness weights sum to {total}, not within 1e-9 of 1")

    def reconstruct(self) -> np.ndarray:
        """The mixed table, cell by cell."""
        out = np.zeros(self.domains.shape)
        for t, w in self.weights.items():
            if w > 0.0:
                out += w * t.column(self.domains)
        return out

    def mass_where(self, predicate) -> float:
        """Total weight on types satisfying ``predicate(type)``."""
        return float(sum(w for t, w in self.weights.items() if predicate(t)))

    def to_dict(self) -> dict:
        x_levels = self.domains.x.levels
        y_levels = self.domains.y.levels
        return {
            "types": [
                {
                    "g": [x_levels[i] for i in t.g_type],
                    "h": [y_levels[i] for i in t.h_type],
                    "q": w,
                }
                for t, w in self.weights.items()
            ],
            "residual": self.residual,
        }


def enumerate_types(domains: DomainTriple) -> list[ResponseType]:
    """All |X|^|Z| * |Y|^|X| response types in canonical order.

    Canonical order is lexicographic, reading g_type as a |Z|-digit base-|X|
    numeral (first declared z level most significant) and then h_type as a
    |X|-digit base-|Y| numeral, so witnesses are reproducible.
    """
    nz, nx, ny = domains.shape
    count = nx**nz * ny**nx
    if count > MAX_TYPES:
        raise OracleSizeError(
            f"domain too large for exact oracle: {count} response types exceed {MAX_TYPES}"
        )
    return [
        ResponseType(g, h)
        for g in itertools.product(range(nx), repeat=nz)
        for h in itertools.product(range(ny), repeat=nx)
    ]


@lru_cache(maxsize=64)
def _constraint_matrix(shape: tuple[int, int, int]) -> np.ndarray:
    """Cell rows plus a final normalization row, one column per type."""
    nz, nx, ny = shape
    g_all = list(itertools.product(range(nx), repeat=nz))
    h_all = list(itertools.product(range(ny), repeat=nx))
    n_types = len(g_all) * len(h_all)
    a = np.zeros((nz * nx * ny + 1, n_types))
    for tj, (g, h) in enumerate(itertools.product(g_all, h_all)):
        for zi in range(nz):
            xi = g[zi]
            a[(zi * nx + xi) * ny + h[xi], tj] = 1.0
    a[-1, :] = 1.0
    return a


def _phase1_float(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimize the artificial mass of ``a q = b, q >= 0`` (b >= 0).

    Returns the optimum and the q part of the optimal basic solution.
    Bland's rule on both the entering and leaving choices rules out cycling.
    """
    eps = 1e-11
    m, n = a.shape
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n : n + m] = np.eye(m)
    t[:m, -1] = b
    t[m, :n] = -a.sum(axis=0)
    t[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    for _ in range(20000):
        candidates = np.flatnonzero(t[m, : n + m] < -eps)
        if candidates.size == 0:
            break
        enter = int(candidates[0])
        col = t[:m, enter]
        rows = np.flatnonzero(col > eps)
        if rows.size == 0:
            raise ArithmeticError("phase-1 objective unbounded; constraint build is broken")
        ratios = t[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-12]
        leave = int(min(tied, key=lambda i: basis[i]))
        piv = t[leave, enter]
        t[leave] /= piv
        mult = t[:, enter].copy()
        mult[leave] = 0.0
        t -= np.outer(mult, t[leave])
        basis[leave] = enter
    else:
        raise ArithmeticError("phase-1 simplex did not terminate")
    q = np.zeros(n)
    for i, bv in enumerate(basis):
        if bv < n:
            q[bv] = max(t[i, -1], 0.0)
    return max(-t[m, -1], 0.0), q


def _phase1_exact(a: np.ndarray, b: np.ndarray) -> tuple[Fraction, list[Fraction]]:
    """The same phase-1 LP in exact rational arithmetic.

    Entries of ``b`` are converted from floats exactly (binary rationals), so
    the returned optimum is the true residual of the stored table.
    """
    m, n = a.shape
    zero, one = Fraction(0), Fraction(1)
    rows: list[list[Fraction]] = []
    for i in range(m):
        row = [Fraction(int(v)) for v in a[i]]
        row.extend(one if j == i else zero for j in range(m))
        row.append(Fraction(float(b[i])))
        rows.append(row)
    obj = [zero] * (n + m + 1)
    for i in range(m):
        for j in range(n):
            obj[j] -= rows[i][j]
        obj[-1] -= rows[i][-1]
    basis = list(range(n, n + m))
    while True:
        enter = next((j for j in range(n + m) if obj[j] < zero), None)
        if enter is None:
            break
        leave, best = None, None
        for i in range(m):
            coef = rows[i][enter]
            if coef > zero:
                ratio = rows[i][-1] / coef
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:
            raise ArithmeticError("exact phase-1 unbounded; constraint build is broken")
        piv = rows[leave][enter]
        rows[leave] = [v / piv for v in rows[leave]]
        for i in range(m):
            if i != leave and rows[i][enter] != zero:
                f = rows[i][enter]
                rows[i] = [v - f * w for v, w in zip(rows[i], rows[leave])]
        if obj[enter] != zero:
            f = obj[enter]
            obj = [v - f * w for v, w in zip(obj, rows[leave])]
        basis[leave] = enter
    q = [zero] * n
    for i, bv in enumerate(basis):
        if bv < n:
            q[bv] = rows[i][-1]
    return -obj[-1], q


def _refine_weights(
    a: np.ndarray, b: np.ndarray, q: np.ndarray
) -> np.ndarray:
    """Polish a candidate mixture by least squares on its support."""
    support = np.flatnonzero(q > 1e-12)
    if support.size == 0:
        return q
    sol, *_ = np.linalg.lstsq(a[:, support], b, rcond=None)
    sol = np.clip(sol, 0.0, None)
    total = sol.sum()
    if total <= 0.0:
        return q
    refined = np.zeros_like(q)
    refined[support] = sol / total
    return refined


def _witness_from_vector(
    domains: DomainTriple,
    types: list[ResponseType],
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
) -> FeasibilityWitness:
    q = np.clip(q, 0.0, None)
    total = q.sum()
    if total <= 0.0:
        raise TableError("degenerate witness vector")
    q = q / total
    refined = _refine_weights(a, b, q)
    # keep whichever candidate reproduces the cells better
    def cell_residual(v: np.ndarray) -> float:
        return float(np.abs(a[:-1] @ v - b[:-1]).max())

    if cell_residual(refined) <= cell_residual(q):
        q = refined
    weights = {t: float(w) for t, w in zip(types, q) if w > 1e-12}
    leftover = 1.0 - sum(weights.values())
    if weights and abs(leftover) > 0.0:
        # fold the clipped dust into the heaviest type to keep an exact unit sum
        top = max(weights, key=weights.get)
        weights[top] += leftover
    return FeasibilityWitness(domains, weights, residual=cell_residual(q))


def check_feasibility(
    table: ConditionalTable, tol: float = FEAS_TOL
) -> tuple[bool, FeasibilityWitness | None]:
    """Decide whether an instrumental process can generate the table exactly.

    Requires every stratum to be defined (the oracle answers only for fully
    observed tables).  Returns ``(True, witness)`` with a mixture whose cells
    match within ``WITNESS_CELL_TOL``, or ``(False, None)``.
    """
    if len(table.defined_strata) != table.domains.z.size:
        raise UndefinedStrataError(
            "feasibility oracle requires every stratum to be defined; "
            f"missing {set(table.domains.z.levels) - set(table.defined_strata)}"
        )
    types = enumerate_types(table.domains)
    a = _constraint_matrix(table.domains.shape)
    b = np.append(table.values.ravel(), 1.0)
    w, q = _phase1_float(a, b)
    if w > EXACT_BAND:
        return False, None
    if w > tol:
        # float optimum sits in the ambiguous band: settle it exactly
        w_exact, q_exact = _phase1_exact(a, b)
        if w_exact > Fraction(tol):
            return False, None
        q = np.array([float(v) for v in q_exact])
    witness = _witness_from_vector(table.domains, types, a, b, q)
    if witness.residual > WITNESS_CELL_TOL:
        # float solve was too sloppy near the boundary; redo exactly
        w_exact, q_exact = _phase1_exact(a, b)
        if w_exact > Fraction(tol):
            return False, None
        witness = _witness_from_vector(
            table.domains, types, a, b, np.array([float(v) for v in q_exact])
        )
    return True, witness


def witness_to_scm(witness: FeasibilityWitness, p_z) -> FiniteSCM:
    """Realize a witness as an instrumental process, one latent state per type."""
    positive = [(t, w) for t, w in witness.weights.items() if w > 0.0]
    positive.sort(key=lambda tw: (tw[0].g_type, tw[0].h_type))
    if not positive:
        raise TableError("witness has no positive-weight types")
    nz, nx, _ = witness.domains.shape
    g = np.empty((nz, len(positive)), dtype=np.int64)
    h = np.empty((nx, len(positive)), dtype=np.int64)
    for uj, (t, _) in enumerate(positive):
        g[:, uj] = t.g_type
        h[:, uj] = t.h_type
    p_u = np.array([w for _, w in positive])
    return FiniteSCM(witness.domains, np.asarray(p_z, dtype=float), p_u, g, h)
