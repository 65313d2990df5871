import numpy as np
import pytest

from ivfalsify import ConditionalTable, Domain, DomainTriple


@pytest.fixture
def binary_domains() -> DomainTriple:
    return DomainTriple(
        Domain("Z", ("0", "1")), Domain("X", ("0", "1")), Domain("Y", ("0", "1"))
    )


def make_domains(nz: int = 2, nx: int = 2, ny: int = 2) -> DomainTriple:
    return DomainTriple(
        Domain("Z", tuple(str(i) for i in range(nz))),
        Domain("X", tuple(str(i) for i in range(nx))),
        Domain("Y", tuple(str(i) for i in range(ny))),
    )


def random_conditional(
    rng: np.random.Generator, nz: int = 2, nx: int = 2, ny: int = 2
) -> ConditionalTable:
    """Independent flat-Dirichlet conditional per stratum, all strata defined."""
    domains = make_domains(nz, nx, ny)
    vals = rng.dirichlet(np.ones(nx * ny), size=nz).reshape(nz, nx, ny)
    return ConditionalTable(domains, vals, domains.z.levels)


def violating_table(domains: DomainTriple) -> ConditionalTable:
    """Deterministic table where Z flips Y while X stays constant: score 2."""
    vals = np.zeros(domains.shape)
    vals[0, 1, 0] = 1.0
    vals[1, 1, 1] = 1.0
    return ConditionalTable(domains, vals, domains.z.levels)
