import json

import numpy as np
import pytest

from ivfalsify import (
    ConditionalTable,
    DegenerateDistributionError,
    Domain,
    DomainMismatchError,
    DomainTriple,
    JointTable,
    SampleCounts,
    TableError,
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
from conftest import make_domains, random_conditional


# ---------------------------------------------------------------------------
# Domain / construction contracts
# ---------------------------------------------------------------------------


def test_domain_rejects_duplicates_and_singletons():
    with pytest.raises(TableError):
        Domain("Z", ("a", "a"))
    with pytest.raises(TableError):
        Domain("Z", ("only",))
    with pytest.raises(TableError):
        Domain("Z", ("a", ""))


def test_domain_index_respects_declared_order():
    d = Domain("Z", ("high", "low", "mid"))
    assert [d.index(lv) for lv in ("high", "low", "mid")] == [0, 1, 2]
    with pytest.raises(TableError):
        d.index("absent")


def test_joint_renormalizes_within_tolerance_and_rejects_beyond():
    domains = make_domains()
    vals = np.full((2, 2, 2), 0.125)
    JointTable(domains, vals * (1 + 5e-10))  # inside the window: renormalized
    with pytest.raises(TableError):
        JointTable(domains, vals * 1.01)
    with pytest.raises(TableError):
        JointTable(domains, -vals)


def test_conditional_rejects_mass_on_undefined_stratum():
    domains = make_domains()
    vals = np.zeros((2, 2, 2))
    vals[0] = 0.25
    vals[1] = 0.25
    with pytest.raises(TableError):
        ConditionalTable(domains, vals, ("0",))


def test_sample_counts_require_at_least_one_observation():
    domains = make_domains()
    with pytest.raises(TableError):
        SampleCounts(domains, np.zeros((2, 2, 2), dtype=int))
    with pytest.raises(TableError):
        SampleCounts(domains, np.full((2, 2, 2), 0.5))


def test_tables_are_write_protected():
    domains = make_domains()
    joint = JointTable(domains, np.full((2, 2, 2), 0.125))
    with pytest.raises(ValueError):
        joint.values[0, 0, 0] = 1.0


# ---------------------------------------------------------------------------
# condition_on_z
# ---------------------------------------------------------------------------


def test_condition_uniform_joint_gives_quarter_cells():
    domains = make_domains()
    cond = condition_on_z(JointTable(domains, np.full((2, 2, 2), 0.125)))
    assert cond.defined_strata == ("0", "1")
    assert np.allclose(cond.values, 0.25)


def test_condition_skips_zero_probability_stratum():
    domains = make_domains()
    vals = np.zeros((2, 2, 2))
    vals[1] = 0.25  # all mass on z=1
    cond = condition_on_z(JointTable(domains, vals))
    assert cond.defined_strata == ("1",)
    assert np.all(cond.values[0] == 0.0)


def test_condition_round_trips_against_direct_multiplication():
    # oracle: multiply the conditional back by the z-marginal cell by cell
    rng = np.random.default_rng(11)
    for _ in range(25):
        joint = JointTable(make_domains(3, 2, 3), rng.dirichlet(np.ones(18)).reshape(3, 2, 3))
        cond = condition_on_z(joint)
        marg = joint.z_marginal()
        for zi, z in enumerate(joint.domains.z.levels):
            if z not in cond.defined_strata:
                continue
            rebuilt = cond.values[zi] * marg[zi]
            assert np.abs(rebuilt - joint.values[zi]).max() < 1e-12


# ---------------------------------------------------------------------------
# estimate_from_counts
# ---------------------------------------------------------------------------


def test_estimate_forced_proportions():
    domains = make_domains()
    counts = np.zeros((2, 2, 2), dtype=int)
    counts[0, 0, 0] = 5
    counts[0, 1, 1] = 5
    est = estimate_from_counts(SampleCounts(domains, counts))
    assert est.defined_strata == ("0",)
    assert est.values[0, 0, 0] == pytest.approx(0.5)
    assert est.values[0, 1, 1] == pytest.approx(0.5)


def test_estimate_point_mass():
    domains = make_domains()
    counts = np.zeros((2, 2, 2), dtype=int)
    counts[1, 0, 1] = 7
    est = estimate_from_counts(SampleCounts(domains, counts))
    assert est.values[1, 0, 1] == 1.0


def test_estimate_consistency_against_sampling_oracle():
    # draw (z, x, y) rows directly from a known table with uniform z
    rng = np.random.default_rng(5)
    truth = random_conditional(rng, 2, 2, 2)
    n = 10**5
    z = rng.integers(0, 2, size=n)
    flat = truth.values.reshape(2, 4)
    # inverse-CDF draw of the (x, y) cell within each sampled stratum
    cum = flat.cumsum(axis=1)
    r = rng.random(n)
    xy = (r[:, None] > cum[z]).sum(axis=1)
    counts = np.zeros((2, 2, 2), dtype=int)
    np.add.at(counts, (z, xy // 2, xy % 2), 1)
    est = estimate_from_counts(SampleCounts(truth.domains, counts))
    assert total_variation(est, truth) < 0.02


def test_estimate_output_always_satisfies_invariants():
    rng = np.random.default_rng(17)
    for _ in range(50):
        counts = rng.integers(0, 6, size=(2, 2, 2))
        if counts.sum() == 0:
            counts[0, 0, 0] = 1
        est = estimate_from_counts(SampleCounts(make_domains(), counts))
        idx = est.defined_indices()
        assert np.allclose(est.values[idx].sum(axis=(1, 2)), 1.0, atol=1e-9)


# ---------------------------------------------------------------------------
# total_variation
# ---------------------------------------------------------------------------


def test_tv_identity_and_point_masses():
    rng = np.random.default_rng(3)
    t = random_conditional(rng)
    assert total_variation(t, t) == 0.0

    domains = make_domains()
    a = np.zeros((2, 2, 2))
    a[:, 0, 0] = 1.0
    b = np.zeros((2, 2, 2))
    b[:, 1, 1] = 1.0
    ta = ConditionalTable(domains, a, ("0", "1"))
    tb = ConditionalTable(domains, b, ("0", "1"))
    assert total_variation(ta, tb) == pytest.approx(1.0)


def test_tv_matches_bruteforce_sum():
    rng = np.random.default_rng(23)
    for _ in range(20):
        a = random_conditional(rng, 2, 3, 2)
        b = random_conditional(rng, 2, 3, 2)
        expected = 0.0
        for z in a.defined_strata:
            acc = 0.0
            for i in range(3):
                for j in range(2):
                    acc += abs(a.stratum(z)[i, j] - b.stratum(z)[i, j])
            expected = max(expected, acc / 2.0)
        assert total_variation(a, b) == pytest.approx(expected, abs=1e-12)


def test_tv_is_a_metric():
    rng = np.random.default_rng(29)
    for _ in range(30):
        a = random_conditional(rng)
        b = random_conditional(rng)
        c = random_conditional(rng)
        dab, dba = total_variation(a, b), total_variation(b, a)
        assert dab >= 0.0
        assert dab == pytest.approx(dba, abs=1e-15)
        assert total_variation(a, c) <= dab + total_variation(b, c) + 1e-12


def test_tv_rejects_mismatched_inputs():
    rng = np.random.default_rng(31)
    a = random_conditional(rng, 2, 2, 2)
    b = random_conditional(rng, 2, 2, 3)
    with pytest.raises(DomainMismatchError):
        total_variation(a, b)
    domains = make_domains()
    vals = np.zeros((2, 2, 2))
    vals[0] = 0.25
    partial = ConditionalTable(domains, vals, ("0",))
    full = random_conditional(rng, 2, 2, 2)
    with pytest.raises(DomainMismatchError):
        total_variation(partial, full)


# ---------------------------------------------------------------------------
# JSON / CSV interfaces
# ---------------------------------------------------------------------------


def test_table_json_round_trip(tmp_path):
    rng = np.random.default_rng(37)
    cond = random_conditional(rng, 3, 2, 2)
    path = tmp_path / "table.json"
    dump_table(cond, path)
    back = load_table(path)
    assert isinstance(back, ConditionalTable)
    assert back.domains == cond.domains
    assert total_variation(back, cond) < 1e-12

    joint = JointTable(make_domains(), np.full((2, 2, 2), 0.125))
    dump_table(joint, path)
    again = load_table(path)
    assert isinstance(again, JointTable)
    assert np.allclose(again.values, joint.values)


def test_table_json_schema_errors():
    with pytest.raises(TableError):
        table_from_dict({"kind": "joint", "values": {}})
    good = {
        "domains": {"z": ["0", "1"], "x": ["0", "1"], "y": ["0", "1"]},
        "kind": "nonsense",
        "values": {"0": [[0.25, 0.25], [0.25, 0.25]], "1": [[0.25, 0.25], [0.25, 0.25]]},
    }
    with pytest.raises(TableError):
        table_from_dict(good)
    bad_shape = dict(good, kind="conditional")
    bad_shape["values"] = {"0": [[1.0]]}
    with pytest.raises(TableError):
        table_from_dict(bad_shape)


def test_conditional_json_lists_only_defined_strata():
    domains = make_domains()
    vals = np.zeros((2, 2, 2))
    vals[0] = 0.25
    cond = ConditionalTable(domains, vals, ("0",))
    d = table_to_dict(cond)
    assert set(d["values"]) == {"0"}


def test_samples_csv_round_trip(tmp_path):
    rows = [("0", "1", "1"), ("1", "0", "1"), ("0", "1", "0")]
    path = tmp_path / "samples.csv"
    write_samples_csv(path, rows)
    counts = load_samples_csv(path)
    assert counts.total == 3
    assert counts.counts[0, 1, 1] == 1
    assert counts.counts[1, 0, 1] == 1
    assert counts.counts[0, 1, 0] == 1


def test_single_valued_column_needs_declared_domains(tmp_path):
    # y never varies, so inference cannot build a two-level domain
    path = tmp_path / "flat.csv"
    write_samples_csv(path, [("0", "1", "1"), ("1", "0", "1")])
    with pytest.raises(TableError):
        load_samples_csv(path)
    counts = load_samples_csv(path, make_domains())
    assert counts.total == 2


def test_samples_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n0,0,0\n")
    with pytest.raises(TableError):
        load_samples_csv(path)


def test_counts_from_rows_with_declared_domains_keeps_order():
    domains = make_domains()
    counts = counts_from_rows([("1", "0", "0")], domains)
    assert counts.counts[1, 0, 0] == 1
    with pytest.raises(TableError):
        counts_from_rows([("2", "0", "0")], domains)  # level not declared


def test_inferred_domains_sort_numerically():
    counts = counts_from_rows([("10", "0", "0"), ("2", "1", "1")])
    assert counts.domains.z.levels == ("2", "10")
