import numpy as np
import pytest

from ivfalsify import (
    CovarianceTriple,
    FiniteSCM,
    InconsistentModelError,
    LinearGaussianSCM,
    NotAnInstrumentError,
    TableError,
    causal_effect,
    estimate_from_counts,
    fit_linear_iv,
    induced_conditional,
    intervene,
    iv_score,
    random_instrumental_scm,
    sample,
    sample_linear,
    sample_rows,
    scm_from_dict,
    scm_to_dict,
    total_variation,
)
from conftest import make_domains


def perfect_compliance_scm(p_z=(0.5, 0.5)) -> FiniteSCM:
    """g(z, u) = z and h(x, u) = x with a single latent state."""
    return FiniteSCM(
        make_domains(),
        np.asarray(p_z),
        np.array([1.0]),
        np.array([[0], [1]]),
        np.array([[0], [1]]),
    )


def contrarian_scm() -> FiniteSCM:
    """g(z, u) = 1 - z and h(x, u) = x: every unit acts against assignment."""
    return FiniteSCM(
        make_domains(),
        np.array([0.5, 0.5]),
        np.array([1.0]),
        np.array([[1], [0]]),
        np.array([[0], [1]]),
    )


# ---------------------------------------------------------------------------
# induced_conditional
# ---------------------------------------------------------------------------


def test_induced_perfect_compliance_is_identity_table():
    cond = induced_conditional(perfect_compliance_scm())
    for zi in range(2):
        expected = np.zeros((2, 2))
        expected[zi, zi] = 1.0
        assert np.array_equal(cond.values[zi], expected)


def test_induced_uniform_over_four_response_patterns():
    # z-blind g and x-blind h, with u uniform over all four (x, y) pairs
    domains = make_domains()
    g = np.array([[0, 0, 1, 1], [0, 0, 1, 1]])
    h = np.array([[0, 1, 0, 1], [0, 1, 0, 1]])
    scm = FiniteSCM(domains, np.array([0.5, 0.5]), np.full(4, 0.25), g, h)
    cond = induced_conditional(scm)
    for zi in range(2):
        # mass 1/4 on each of (x=0,y=0), (x=0,y=1), (x=1,y=0), (x=1,y=1)
        assert np.allclose(cond.values[zi], 0.25)


def test_induced_skips_zero_probability_strata():
    scm = perfect_compliance_scm(p_z=(1.0, 0.0))
    cond = induced_conditional(scm)
    assert cond.defined_strata == ("0",)


def test_induced_matches_sampling_frequencies():
    scm = random_instrumental_scm((3, 3, 3, 32), seed=41)
    exact = induced_conditional(scm)
    est = estimate_from_counts(sample(scm, 10**6, seed=42))
    assert est.defined_strata == exact.defined_strata
    assert total_variation(est, exact) < 0.01


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def test_sample_deterministic_scm_lands_in_one_cell():
    scm = perfect_compliance_scm(p_z=(1.0, 0.0))
    counts = sample(scm, 500, seed=7)
    assert counts.counts[0, 0, 0] == 500
    assert counts.total == 500


def test_sample_is_deterministic_per_seed():
    scm = random_instrumental_scm((2, 2, 2, 5), seed=1)
    a = sample(scm, 10_000, seed=9)
    b = sample(scm, 10_000, seed=9)
    c = sample(scm, 10_000, seed=10)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


def test_sample_estimates_converge_monotonically_in_n():
    scm = random_instrumental_scm((2, 2, 2, 12), seed=2)
    exact = induced_conditional(scm)
    medians = []
    for n in (10**3, 10**4, 10**5, 10**6):
        tvs = [
            total_variation(estimate_from_counts(sample(scm, n, seed=s)), exact)
            for s in range(5)
        ]
        medians.append(float(np.median(tvs)))
    assert all(a > b for a, b in zip(medians, medians[1:]))


# ---------------------------------------------------------------------------
# causal_effect / intervene
# ---------------------------------------------------------------------------


def test_effect_identity_response_is_point_mass():
    scm = perfect_compliance_scm()
    assert causal_effect(scm, "0") == {"0": 1.0, "1": 0.0}
    assert causal_effect(scm, "1") == {"0": 0.0, "1": 1.0}


def test_effect_is_null_when_h_ignores_x():
    domains = make_domains()
    h = np.array([[0, 1, 0], [0, 1, 0]])  # same row for both x
    g = np.array([[0, 1, 0], [1, 0, 1]])
    scm = FiniteSCM(domains, np.array([0.5, 0.5]), np.array([0.2, 0.5, 0.3]), g, h)
    assert causal_effect(scm, "0") == causal_effect(scm, "1")


def test_effect_rejects_unknown_level():
    with pytest.raises(TableError):
        causal_effect(perfect_compliance_scm(), "nope")


def test_effect_matches_interventional_sampling():
    # oracle: replace the g-equation, sample, and compare per-cell frequencies
    n = 10**5
    for case, seed in enumerate((101, 102, 103)):
        scm = random_instrumental_scm((2, 3, 2, 16), seed=seed)
        for x in scm.domains.x.levels:
            exact = causal_effect(scm, x)
            _, _, y = sample_rows(intervene(scm, x), n, seed=2000 + case)
            freq = np.bincount(y, minlength=2) / n
            for yi, ylab in enumerate(scm.domains.y.levels):
                p = exact[ylab]
                se = np.sqrt(p * (1 - p) / n)
                assert abs(freq[yi] - p) <= 3 * se + 1e-12


def test_effect_equals_x_section_under_forced_compliance():
    # point-mass instrument plus perfect compliance pins the x-section
    domains = make_domains()
    rng = np.random.default_rng(4)
    h = rng.integers(0, 2, size=(2, 6))
    scm = FiniteSCM(
        domains,
        np.array([1.0, 0.0]),
        rng.dirichlet(np.ones(6)),
        np.array([[0] * 6, [1] * 6]),
        h,
    )
    cond = induced_conditional(scm)
    effect = causal_effect(scm, "0")
    section = cond.values[0, 0, :]  # z = "0" stratum, x = "0" row
    assert np.allclose([effect[y] for y in domains.y.levels], section, atol=1e-12)


# ---------------------------------------------------------------------------
# random_instrumental_scm
# ---------------------------------------------------------------------------


def test_random_scm_is_seed_deterministic():
    a = random_instrumental_scm((2, 3, 2, 7), seed=5, monotone_g=True)
    b = random_instrumental_scm((2, 3, 2, 7), seed=5, monotone_g=True)
    assert np.array_equal(a.g_table, b.g_table)
    assert np.array_equal(a.h_table, b.h_table)
    assert np.array_equal(a.p_u, b.p_u)


def test_random_scm_single_state_monotone_is_sorted():
    scm = random_instrumental_scm((3, 3, 2, 1), seed=6, monotone_g=True)
    col = scm.g_table[:, 0]
    assert np.all(np.diff(col) >= 0)


def test_random_scm_monotone_sections_never_decrease():
    for seed in range(30):
        scm = random_instrumental_scm((3, 3, 3, 9), seed=seed, monotone_g=True)
        assert np.all(np.diff(scm.g_table, axis=0) >= 0)


def test_random_scm_validates_dims():
    with pytest.raises(ValueError):
        random_instrumental_scm((1, 2, 2, 4), seed=0)
    with pytest.raises(ValueError):
        random_instrumental_scm((2, 2, 2, 0), seed=0)


# ---------------------------------------------------------------------------
# linear-Gaussian model
# ---------------------------------------------------------------------------


def _implied_cov_oracle(a, b, c, vz, vu):
    # independent recomputation of the model's second moments
    szz = vz
    szx = a * vz
    szy = b * a * vz
    sxx = a**2 * vz + c**2 * vu
    sxy = b * (a**2 * vz + c**2 * vu) + c * vu
    syy = b**2 * (a**2 * vz + c**2 * vu) + 2 * b * c * vu + vu
    return np.array([[szz, szx, szy], [szx, sxx, sxy], [szy, sxy, syy]])


def test_linear_fit_recovers_iv_ratio():
    cov = CovarianceTriple(_implied_cov_oracle(0.5, 0.5, 1.0, 1.0, 0.75) + 1e-12 * np.eye(3))
    model = fit_linear_iv(cov)
    assert cov.zx == pytest.approx(0.5)
    assert cov.zy == pytest.approx(0.25)
    assert model.b_hat == cov.zy / cov.zx  # identical float operation


def test_linear_fit_round_trips_random_parameters():
    rng = np.random.default_rng(8)
    for _ in range(50):
        a = rng.uniform(0.2, 2.0) * rng.choice([-1, 1])
        b = rng.uniform(-2.0, 2.0)
        c = rng.uniform(0.2, 2.0) * rng.choice([-1, 1])
        vz = rng.uniform(0.3, 3.0)
        vu = rng.uniform(0.3, 3.0)
        cov = CovarianceTriple(_implied_cov_oracle(a, b, c, vz, vu) + 1e-12 * np.eye(3))
        model = fit_linear_iv(cov)
        assert model.a_hat == pytest.approx(a, abs=1e-9)
        assert model.b_hat == pytest.approx(b, abs=1e-9)
        assert model.c_hat == pytest.approx(c, abs=1e-9)
        assert model.var_z == pytest.approx(vz, abs=1e-9)
        assert model.var_u == pytest.approx(vu, abs=1e-9)
        assert np.abs(model.implied_covariance() - cov.matrix).max() < 1e-9


def test_linear_fit_rejects_zero_instrument_correlation():
    cov = CovarianceTriple(np.diag([1.0, 1.0, 1.0]))
    with pytest.raises(NotAnInstrumentError):
        fit_linear_iv(cov)


def test_linear_fit_reports_inconsistent_covariances():
    # a full-rank covariance cannot come from the shared-disturbance model
    rng = np.random.default_rng(12)
    raised = 0
    for _ in range(20):
        m = rng.normal(size=(3, 3))
        cov = CovarianceTriple(m @ m.T + 0.5 * np.eye(3))
        if abs(cov.zx) < 0.05:
            continue
        try:
            model = fit_linear_iv(cov)
            assert np.abs(model.implied_covariance() - cov.matrix).max() < 1e-9
        except InconsistentModelError:
            raised += 1
    assert raised > 0


def test_linear_sampling_matches_implied_covariance():
    model = LinearGaussianSCM(0.8, 1.3, 0.7, 1.2, 0.9)
    n = 10**6
    rows = sample_linear(model, n, seed=13)
    emp = np.cov(rows.T)
    implied = model.implied_covariance()
    for i in range(3):
        for j in range(3):
            se = np.sqrt((implied[i, i] * implied[j, j] + implied[i, j] ** 2) / n)
            assert abs(emp[i, j] - implied[i, j]) <= 3 * se


def test_iv_ratio_invariant_to_instrument_rescaling():
    base = _implied_cov_oracle(0.9, -0.7, 1.1, 1.0, 0.8)
    lam = 3.7
    scaled = base.copy()
    scaled[0, :] *= lam
    scaled[:, 0] *= lam
    b0 = fit_linear_iv(CovarianceTriple(base + 1e-12 * np.eye(3))).b_hat
    b1 = fit_linear_iv(CovarianceTriple(scaled + 1e-12 * np.eye(3))).b_hat
    assert b1 == pytest.approx(b0, rel=1e-12)


def test_covariance_triple_rejects_indefinite_or_asymmetric():
    with pytest.raises(TableError):
        CovarianceTriple(np.diag([1.0, -1.0, 1.0]))
    m = np.eye(3)
    m[0, 1] = 0.5
    with pytest.raises(TableError):
        CovarianceTriple(m)


# ---------------------------------------------------------------------------
# JSON forms
# ---------------------------------------------------------------------------


def test_scm_json_round_trip():
    scm = random_instrumental_scm((2, 3, 2, 4), seed=14)
    back = scm_from_dict(scm_to_dict(scm))
    assert np.array_equal(back.g_table, scm.g_table)
    assert np.array_equal(back.h_table, scm.h_table)
    assert np.allclose(back.p_z, scm.p_z)
    assert np.allclose(back.p_u, scm.p_u)


def test_scm_json_accepts_integer_indices():
    d = scm_to_dict(perfect_compliance_scm())
    d["g"] = [[0], [1]]
    d["h"] = [[0], [1]]
    scm = scm_from_dict(d)
    assert np.array_equal(scm.g_table, [[0], [1]])


def test_linear_json_round_trip():
    model = LinearGaussianSCM(0.5, 1.5, -0.4, 2.0, 0.7)
    assert LinearGaussianSCM.from_dict(model.to_dict()) == model


# ---------------------------------------------------------------------------
# cross-module necessity (small sweep; the acceptance suite runs 10^4)
# ---------------------------------------------------------------------------


def test_every_induced_conditional_satisfies_the_inequality_small_sweep():
    rng = np.random.default_rng(15)
    for seed in range(500):
        dims = (rng.integers(2, 4), rng.integers(2, 4), rng.integers(2, 4), rng.integers(1, 33))
        scm = random_instrumental_scm(tuple(int(d) for d in dims), seed=seed)
        assert iv_score(induced_conditional(scm)).score <= 1.0 + 1e-12
