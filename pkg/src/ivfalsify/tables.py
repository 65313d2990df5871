"""Finite-domain probability tables over an (instrument, treatment, outcome) triple.

Every downstream check in this package consumes one of the table types
defined here.  Variables are categorical with a *declared* level order; that
order is load-bearing (monotonicity comparisons and argmax tie-breaking refer
to it), so levels are never re-sorted after construction.

Conventions
-----------
* Arrays are indexed ``[z, x, y]``.
* A z-stratum is *defined* when its marginal probability exceeds
  ``STRATUM_FLOOR`` (tables) or its count is positive (samples).  Evaluators
  only look at defined strata; the rest of the array is zero.
* Unit-mass checks use ``MASS_TOL``: totals within the tolerance are silently
  renormalized, anything worse is a hard error.

All types are immutable values (arrays are write-protected) and every
operation is a pure function, so concurrent use needs no synchronization.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateDistributionError,
    DomainMismatchError,
    TableError,
)

MASS_TOL = 1e-9
STRATUM_FLOOR = 1e-12
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """An ordered categorical variable: a name plus at least two unique levels."""

    name: str
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(str(lv) for lv in self.levels))
        if not self.name:
            raise TableError("domain name must be non-empty")
        if len(self.levels) < 2:
            raise TableError(f"domain {self.name!r} needs at least two levels")
        if any(lv == "" for lv in self.levels):
            raise TableError(f"domain {self.name!r} has an empty level label")
        if len(set(self.levels)) != len(self.levels):
            raise TableError(f"domain {self.name!r} has duplicate levels")

    @property
    def size(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        try:
            return self.levels.index(str(label))
        except ValueError:
            raise TableError(
                f"level {label!r} is not in domain {self.name!r} {self.levels}"
            ) from None


@dataclass(frozen=True)
class DomainTriple:
    """The (Z, X, Y) domains a table lives on."""

    z: Domain
    x: Domain
    y: Domain

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.z.size, self.x.size, self.y.size)

    def is_all_binary(self) -> bool:
        return self.shape == (2, 2, 2)


def _as_prob_array(values, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise TableError(f"{what} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise TableError(f"{what} contains non-finite entries")
    if arr.min(initial=0.0) < -_NEG_TOL:
        raise TableError(f"{what} contains negative entries")
    arr = np.clip(arr, 0.0, None)
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointTable:
    """A joint distribution P(z, x, y): nonnegative entries of total mass one."""

    domains: DomainTriple
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_prob_array(self.values, self.domains.shape, "joint table")
        total = float(arr.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise TableError(f"joint mass {total} is not within {MASS_TOL} of 1")
        object.__setattr__(self, "values", _freeze(arr / total))

    def z_marginal(self) -> np.ndarray:
        return self.values.sum(axis=(1, 2))


@dataclass(frozen=True)
class ConditionalTable:
    """Per-stratum conditionals P(x, y | z) for the defined z levels.

    ``defined_strata`` lists (in declared z order) the strata that carry a
    normalized conditional; all other strata are identically zero.
    """

    domains: DomainTriple
    values: np.ndarray
    defined_strata: tuple[str, ...]

    def __post_init__(self) -> None:
        arr = _as_prob_array(self.values, self.domains.shape, "conditional table")
        labels = tuple(str(s) for s in self.defined_strata)
        if len(set(labels)) != len(labels):
            raise TableError("defined_strata contains duplicates")
        idx = sorted(self.domains.z.index(s) for s in labels)
        object.__setattr__(
            self, "defined_strata", tuple(self.domains.z.levels[i] for i in idx)
        )
        defined = np.zeros(self.domains.z.size, dtype=bool)
        defined[idx] = True
        for zi in range(self.domains.z.size):
            mass = float(arr[zi].sum())
            if defined[zi]:
                if abs(mass - 1.0) > MASS_TOL:
                    raise TableError(
                        f"stratum z={self.domains.z.levels[zi]!r} has mass {mass}, "
                        f"not within {MASS_TOL} of 1"
                    )
                arr[zi] /= mass
            elif mass > MASS_TOL:
                raise TableError(
                    f"undefined stratum z={self.domains.z.levels[zi]!r} carries mass {mass}"
                )
            else:
                arr[zi] = 0.0
        object.__setattr__(self, "values", _freeze(arr))

    def defined_indices(self) -> np.ndarray:
        return np.asarray([self.domains.z.index(s) for s in self.defined_strata], dtype=int)

    def stratum(self, z_label: str) -> np.ndarray:
        """The (|X|, |Y|) conditional slab for one defined stratum."""
        if z_label not in self.defined_strata:
            raise TableError(f"stratum z={z_label!r} is not defined")
        return self.values[self.domains.z.index(z_label)]


@dataclass(frozen=True)
class SampleCounts:
    """Raw observation counts indexed by (z, x, y)."""

    domains: DomainTriple
    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.shape != self.domains.shape:
            raise TableError(f"counts have shape {arr.shape}, expected {self.domains.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.floor(arr)):
                raise TableError("counts must be integers")
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.int64)
        if arr.min(initial=0) < 0:
            raise TableError("counts must be nonnegative")
        if int(arr.sum()) < 1:
            raise TableError("total count must be at least 1")
        object.__setattr__(self, "counts", _freeze(arr))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def stratum_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=(1, 2))


def condition_on_z(joint: JointTable) -> ConditionalTable:
    """Condition a joint table on Z: P(x, y | z) = P(z, x, y) / P(z).

    Strata with marginal probability at or below ``STRATUM_FLOOR`` are left
    undefined; if no stratum survives the distribution is degenerate.
    """
    marg = joint.z_marginal()
    defined = marg > STRATUM_FLOOR
    if not defined.any():
        raise DegenerateDistributionError("degenerate distribution: no observable stratum")
    vals = np.zeros_like(joint.values)
    vals[defined] = joint.values[defined] / marg[defined, None, None]
    labels = tuple(
        lv for lv, d in zip(joint.domains.z.levels, defined) if d
    )
    return ConditionalTable(joint.domains, vals, labels)


def estimate_from_counts(counts: SampleCounts) -> ConditionalTable:
    """Plug-in (maximum-likelihood) conditional estimate from raw counts.

    Strata with zero observations are excluded from ``defined_strata``.
    """
    sizes = counts.stratum_sizes()
    defined = sizes > 0
    if not defined.any():
        raise DegenerateDistributionError("no observations in any stratum")
    vals = np.zeros(counts.domains.shape, dtype=float)
    vals[defined] = counts.counts[defined] / sizes[defined, None, None]
    labels = tuple(lv for lv, d in zip(counts.domains.z.levels, defined) if d)
    return ConditionalTable(counts.domains, vals, labels)


def total_variation(a: ConditionalTable, b: ConditionalTable) -> float:
    """Worst-stratum total-variation distance between two conditional tables.

    Both tables must share domains and defined strata; the result is
    ``max_z (1/2) * sum_{x,y} |a - b|`` over the shared strata.
    """
    if a.domains != b.domains:
        raise DomainMismatchError("tables have different domains")
    if a.defined_strata != b.defined_strata:
        raise DomainMismatchError(
            f"tables define different strata: {a.defined_strata} vs {b.defined_strata}"
        )
    idx = a.defined_indices()
    per_stratum = 0.5 * np.abs(a.values[idx] - b.values[idx]).sum(axis=(1, 2))
    return float(per_stratum.max())


# ---------------------------------------------------------------------------
# JSON table schema
#
#   {"domains": {"z": [...], "x": [...], "y": [...]},
#    "kind": "joint" | "conditional",
#    "values": {"<z-level>": [[row per x, column per y]]}}
#
# A joint table lists every stratum (entries are P(z, x, y)); a conditional
# table lists exactly its defined strata (entries are P(x, y | z)).
# ---------------------------------------------------------------------------


def _domains_from_dict(d: dict) -> DomainTriple:
    try:
        return DomainTriple(
            Domain("Z", tuple(d["z"])),
            Domain("X", tuple(d["x"])),
            Domain("Y", tuple(d["y"])),
        )
    except KeyError as exc:
        raise TableError(f"domains object is missing key {exc}") from None


def table_from_dict(data: dict) -> JointTable | ConditionalTable:
    if not isinstance(data, dict):
        raise TableError("table JSON must be an object")
    for key in ("domains", "kind", "values"):
        if key not in data:
            raise TableError(f"table JSON is missing {key!r}")
    domains = _domains_from_dict(data["domains"])
    kind = data["kind"]
    raw = data["values"]
    if not isinstance(raw, dict):
        raise TableError("values must map z levels to X-by-Y matrices")
    vals = np.zeros(domains.shape, dtype=float)
    seen = []
    for z_label, matrix in raw.items():
        zi = domains.z.index(z_label)
        block = np.asarray(matrix, dtype=float)
        if block.shape != (domains.x.size, domains.y.size):
            raise TableError(
                f"stratum {z_label!r} has shape {block.shape}, expected "
                f"{(domains.x.size, domains.y.size)}"
            )
        vals[zi] = block
        seen.append(domains.z.levels[zi])
    if kind == "joint":
        return JointTable(domains, vals)
    if kind == "conditional":
        return ConditionalTable(domains, vals, tuple(seen))
    raise TableError(f"unknown table kind {kind!r}")


def table_to_dict(table: JointTable | ConditionalTable) -> dict:
    domains = {
        "z": list(table.domains.z.levels),
        "x": list(table.domains.x.levels),
        "y": list(table.domains.y.levels),
    }
    if isinstance(table, JointTable):
        kind = "joint"
        strata = table.domains.z.levels
    else:
        kind = "conditional"
        strata = table.defined_strata
    values = {
        s: table.values[table.domains.z.index(s)].tolist() for s in strata
    }
    return {"domains": domains, "kind": kind, "values": values}


def load_table(path: str | Path) -> JointTable | ConditionalTable:
    with open(path, "r", encoding="utf-8") as fh:
        return table_from_dict(json.load(fh))


def dump_table(table: JointTable | ConditionalTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_to_dict(table), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# CSV sample schema: header "z,x,y", one observation per row.
# ---------------------------------------------------------------------------


def _infer_domain(name: str, labels: Iterable[str]) -> Domain:
    # Numeric-looking labels sort numerically ("2" before "10"), others
    # lexicographically; declared order elsewhere always wins over inference.
    def key(s: str):
        try:
            return (0, float(s), s)
        except ValueError:
            return (1, 0.0, s)

    return Domain(name, tuple(sorted(set(labels), key=key)))


def counts_from_rows(
    rows: Sequence[tuple[str, str, str]], domains: DomainTriple | None = None
) -> SampleCounts:
    if not rows:
        raise TableError("no sample rows")
    if domains is None:
        domains = DomainTriple(
            _infer_domain("Z", (r[0] for r in rows)),
            _infer_domain("X", (r[1] for r in rows)),
            _infer_domain("Y", (r[2] for r in rows)),
        )
    counts = np.zeros(domains.shape, dtype=np.int64)
    for z, x, y in rows:
        counts[domains.z.index(z), domains.x.index(x), domains.y.index(y)] += 1
    return SampleCounts(domains, counts)


def load_samples_csv(path: str | Path, domains: DomainTriple | None = None) -> SampleCounts:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["z", "x", "y"]:
            raise TableError("sample CSV must start with header 'z,x,y'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise TableError(f"line {lineno}: expected 3 columns, got {len(row)}")
            rows.append((row[0].strip(), row[1].strip(), row[2].strip()))
    return counts_from_rows(rows, domains)


def write_samples_csv(
    target: str | Path | io.TextIOBase, rows: Iterable[tuple[str, ...]], header: tuple[str, ...] = ("z", "x", "y")
) -> None:
    def _write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            _write(fh)
    else:
        _write(target)
