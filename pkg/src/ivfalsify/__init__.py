"""Falsification toolkit for instrumental-variable causal models.

Given observations of an instrument Z, a treatment X and an outcome Y on
finite domains, this package answers three questions:

* does the observed conditional distribution violate the instrumental
  inequality (a necessary condition for Z to be an instrument)?
* can the distribution be generated *exactly* by some instrumental process
  (decided by a linear-programming oracle over response types, with a
  constructive witness)?
* what do particular instrumental processes look like -- finite structural
  models with interventions, the linear-Gaussian model, and the
  unit-interval generator constructions for continuous treatments?

See the README for the JSON/CSV schemas and the ``ivfalsify`` CLI.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateDistributionError,
    DomainMismatchError,
    FalsifyError,
    InconsistentModelError,
    InversionError,
    NotAnInstrumentError,
    OracleSizeError,
    TableError,
    UndefinedStrataError,
)
from .tables import (
    ConditionalTable,
    Domain,
    DomainTriple,
    JointTable,
    SampleCounts,
    condition_on_z,
    counts_from_rows,
    dump_table,
    estimate_from_counts,
    load_samples_csv,
    load_table,
    table_from_dict,
    table_to_dict,
    total_variation,
    write_samples_csv,
)
from .ivtest import (
    BinaryIvReport,
    ContinuousIvReport,
    GriddedDensity,
    IvReport,
    MarginInterval,
    MonotonicityComparison,
    binary_inequalities,
    bootstrap_margin,
    continuous_iv_score,
    iv_score,
    monotonicity_check,
    nonresponsive_bound,
    nonresponsive_certificate,
    x_margin_given_z,
)
from .scm import (
    CovarianceTriple,
    FiniteSCM,
    LinearGaussianSCM,
    causal_effect,
    fit_linear_iv,
    induced_conditional,
    intervene,
    random_instrumental_scm,
    sample,
    sample_linear,
    sample_rows,
    scm_from_dict,
    scm_to_dict,
)
from .oracle import (
    FeasibilityWitness,
    ResponseType,
    check_feasibility,
    enumerate_types,
    witness_to_scm,
)
from .generators import (
    GeneratorSpec,
    UNIT_GRID,
    corollary1_sample,
    empirical_cdf_sup_deviation,
    example1_sample,
    fold_unit,
    invert_generator,
    mod1_add,
    mod1_sub,
    probe_deviations,
    triangular_spec,
    uniform_spec,
    verify_generator,
)
from .graphs import (
    CausalGraph,
    GraphError,
    Restriction,
    exclusion_restrictions,
    independence_restrictions,
    render_term,
)

__all__ = [
    "__version__",
    # errors
    "FalsifyError", "TableError", "DomainMismatchError", "DegenerateDistributionError",
    "UndefinedStrataError", "OracleSizeError", "NotAnInstrumentError",
    "InconsistentModelError", "InversionError", "GraphError",
    # tables
    "Domain", "DomainTriple", "JointTable", "ConditionalTable", "SampleCounts",
    "condition_on_z", "estimate_from_counts", "total_variation",
    "table_from_dict", "table_to_dict", "load_table", "dump_table",
    "counts_from_rows", "load_samples_csv", "write_samples_csv",
    # iv tests
    "IvReport", "BinaryIvReport", "MonotonicityComparison", "GriddedDensity",
    "ContinuousIvReport", "MarginInterval", "iv_score", "binary_inequalities",
    "monotonicity_check", "continuous_iv_score", "nonresponsive_bound",
    "nonresponsive_certificate", "x_margin_given_z", "bootstrap_margin",
    # SCMs
    "FiniteSCM", "LinearGaussianSCM", "CovarianceTriple", "induced_conditional",
    "sample", "sample_rows", "intervene", "causal_effect",
    "random_instrumental_scm", "fit_linear_iv", "sample_linear",
    "scm_from_dict", "scm_to_dict",
    # oracle
    "ResponseType", "FeasibilityWitness", "enumerate_types", "check_feasibility",
    "witness_to_scm",
    # generators
    "GeneratorSpec", "UNIT_GRID", "fold_unit", "mod1_add", "mod1_sub",
    "example1_sample", "corollary1_sample", "invert_generator", "verify_generator",
    "probe_deviations", "empirical_cdf_sup_deviation", "uniform_spec",
    "triangular_spec",
    # graphs
    "CausalGraph", "Restriction", "exclusion_restrictions",
    "independence_restrictions", "render_term",
]
