import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, strategies as st

from oschom.quadrature import (
    QuadratureConstructionError,
    TimePartition,
    dump_rule_csv,
    gauss_radau_weighted,
    rules_for_partition,
    slab_inner_product,
    weighted_moments,
)


def adaptive_moment(j, tau, rho):
    """Independent oracle for mu_j via adaptive quadrature."""
    val, err = scipy.integrate.quad(
        lambda s: s ** j * np.exp(-2.0 * rho * s), 0.0, tau,
        epsabs=0.0, epsrel=1e-12, limit=300)
    assert err <= 1e-9 * max(abs(val), 1e-30)
    return val


# hand-integrated closed forms, cross-checked by adaptive_moment below
MU0_TAU1_RHO1 = (1.0 - np.exp(-2.0)) / 2.0
MU1_TAU1_RHO1 = 0.25 - 0.75 * np.exp(-2.0)


def test_moment_closed_forms():
    mu = weighted_moments(1, 1.0, 1.0)
    assert mu[0] == pytest.approx(MU0_TAU1_RHO1, rel=1e-14)
    assert mu[1] == pytest.approx(MU1_TAU1_RHO1, rel=1e-14)
    assert np.allclose(weighted_moments(3, 0.7, 0.0),
                       [0.7, 0.7 ** 2 / 2, 0.7 ** 3 / 3, 0.7 ** 4 / 4], rtol=1e-14)


@pytest.mark.parametrize("tau,rho", [(1.0, 0.0), (1.0, 1.0), (0.25, 3.0),
                                     (2.0, 0.05), (1.0, 10.0), (0.03125, 1.0)])
def test_moments_match_adaptive_integration(tau, rho):
    mu = weighted_moments(6, tau, rho)
    for j in range(7):
        assert mu[j] == pytest.approx(adaptive_moment(j, tau, rho), rel=1e-9)


def test_moments_input_validation():
    with pytest.raises(ValueError):
        weighted_moments(-1, 1.0, 1.0)
    with pytest.raises(ValueError):
        weighted_moments(2, 0.0, 1.0)
    with pytest.raises(ValueError):
        weighted_moments(2, 1.0, -0.5)


@pytest.mark.parametrize("q", [0, 1, 2, 3, 4])
@pytest.mark.parametrize("rho_tau", [0.0, 0.1, 1.0, 10.0])
def test_rule_integrates_monomials_exactly(q, rho_tau):
    tau = 0.7
    rule = gauss_radau_weighted(q, tau, rho_tau / tau)
    mu = weighted_moments(2 * q, tau, rho_tau / tau)
    for j in range(2 * q + 1):
        got = rule.apply(rule.nodes ** j)
        assert got == pytest.approx(mu[j], rel=1e-12)


@given(
    q=st.integers(0, 4),
    tau=st.floats(1e-3, 8.0, allow_nan=False),
    rho=st.floats(0.0, 4.0, allow_nan=False),
)
def test_rule_exactness_property(q, tau, rho):
    rule = gauss_radau_weighted(q, tau, rho)
    mu = weighted_moments(2 * q, tau, rho)
    for j in range(2 * q + 1):
        assert rule.apply(rule.nodes ** j) == pytest.approx(mu[j], rel=1e-11)


def test_rule_structure():
    for q in range(5):
        rule = gauss_radau_weighted(q, 0.3, 2.0)
        assert rule.nodes.shape == (q + 1,)
        assert rule.nodes[-1] == 0.3
        assert np.all(rule.nodes > 0)
        assert np.all(np.diff(rule.nodes) > 0)
        assert np.all(rule.weights > 0)


def test_unweighted_rules_match_classical_radau_tables():
    tau = 1.0
    r0 = gauss_radau_weighted(0, tau, 0.0)
    assert np.allclose(r0.nodes, [1.0], atol=1e-14)
    assert np.allclose(0.5 * tau * r0.weights, [1.0], rtol=1e-13)

    r1 = gauss_radau_weighted(1, tau, 0.0)
    assert np.allclose(r1.nodes, [1.0 / 3.0, 1.0], rtol=1e-13)
    assert np.allclose(0.5 * tau * r1.weights, [0.75, 0.25], rtol=1e-13)

    s6 = np.sqrt(6.0)
    r2 = gauss_radau_weighted(2, tau, 0.0)
    assert np.allclose(r2.nodes, [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0], rtol=1e-12)
    assert np.allclose(0.5 * tau * r2.weights,
                       [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0], rtol=1e-12)


def test_rule_scales_with_tau():
    # nodes scale linearly at rho = 0, total mass is tau
    for tau in (0.125, 0.5, 2.0):
        rule = gauss_radau_weighted(1, tau, 0.0)
        assert np.allclose(rule.nodes, tau * np.array([1.0 / 3.0, 1.0]), rtol=1e-12)
        assert rule.apply(np.ones(2)) == pytest.approx(tau, rel=1e-13)


def test_construction_validation():
    with pytest.raises(ValueError):
        gauss_radau_weighted(-1, 1.0, 0.0)
    with pytest.raises(ValueError):
        gauss_radau_weighted(1, 0.0, 0.0)
    with pytest.raises(ValueError):
        gauss_radau_weighted(1, 1.0, -1.0)


def test_extreme_decay_stays_exact():
    # nodes pile up near 0 while the right node keeps weight ~ e^{-2 rho tau};
    # the construction must stay exact instead of degenerating
    rule = gauss_radau_weighted(4, 1.0, 1e6)
    mu = weighted_moments(8, 1.0, 1e6)
    assert rule.nodes[-1] == 1.0
    for j in range(9):
        assert rule.apply(rule.nodes ** j) == pytest.approx(mu[j], rel=1e-12)


def test_nearly_vanishing_rho_matches_unweighted_rule():
    # exercises the cancellation guard in the moment recursion
    tiny = gauss_radau_weighted(2, 1.0, 1e-200)
    flat = gauss_radau_weighted(2, 1.0, 0.0)
    assert np.allclose(tiny.nodes, flat.nodes, rtol=1e-12)
    assert np.allclose(tiny.weights, flat.weights, rtol=1e-12)


def test_slab_inner_product_polynomial_fixture():
    # int_0^1 t*t dt = 1/3, degree 2 = 2q so still exact
    rule = gauss_radau_weighted(1, 1.0, 0.0)
    val = slab_inner_product(rule, lambda s: s, lambda s: s)
    assert complex(val) == pytest.approx(1.0 / 3.0, rel=1e-13)


def test_slab_inner_product_conjugates_second_slot():
    rule = gauss_radau_weighted(2, 1.0, 0.0)
    a = lambda s: np.array([1.0j * s, 0.0])
    b = lambda s: np.array([s, 0.0])
    # int_0^1 (i s) conj(s) ds = i/3
    assert slab_inner_product(rule, a, b) == pytest.approx(1j / 3.0, rel=1e-13)


def test_slab_inner_product_custom_pairing():
    rule = gauss_radau_weighted(2, 1.0, 0.0)
    m = np.array([[2.0, 0.0], [0.0, 3.0]])
    pairing = lambda x, y: complex(np.conj(y) @ (m @ x))
    a = lambda s: np.array([s, s])
    got = slab_inner_product(rule, a, a, pairing=pairing)
    assert got == pytest.approx(5.0 / 3.0, rel=1e-13)


def test_weighted_rule_reproduces_weighted_integrals():
    # the rule must integrate p(s) exp(-2 rho s) for polynomial p; cross-check
    # against adaptive quadrature of the full integrand
    rho, tau, q = 1.3, 0.8, 3
    rule = gauss_radau_weighted(q, tau, rho)
    coeffs = np.array([0.4, -1.0, 2.0, 0.1, 0.7])  # degree 4 < 2q+1
    exact, err = scipy.integrate.quad(
        lambda s: np.polyval(coeffs, s) * np.exp(-2.0 * rho * s), 0.0, tau,
        epsabs=0.0, epsrel=1e-12, limit=200)
    assert err < 1e-10
    assert rule.apply(np.polyval(coeffs, rule.nodes)) == pytest.approx(exact, rel=1e-12)


def test_rules_for_partition_deduplicates_equal_slabs():
    part = TimePartition.uniform(8, 1.0)
    rules = rules_for_partition(part, 1, 1.0)
    assert len(rules) == 8
    assert all(r is rules[0] for r in rules)


def test_rules_for_partition_distinct_lengths():
    part = TimePartition(np.array([0.0, 0.25, 1.0]))
    rules = rules_for_partition(part, 1, 0.0)
    assert rules[0].tau == pytest.approx(0.25)
    assert rules[1].tau == pytest.approx(0.75)


def test_time_partition_validation():
    with pytest.raises(ValueError):
        TimePartition(np.array([0.1, 1.0]))
    with pytest.raises(ValueError):
        TimePartition(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        TimePartition.uniform(0, 1.0)
    with pytest.raises(ValueError):
        TimePartition.uniform(4, -1.0)


def test_time_partition_accessors():
    part = TimePartition.uniform(4, 2.0)
    assert part.slab_count == 4
    assert part.t_final == 2.0
    assert np.allclose(part.lengths(), 0.5)
    assert part.slab(2) == (1.0, 1.5)


def test_dump_rule_csv_roundtrip(tmp_path):
    rule = gauss_radau_weighted(2, 0.5, 1.0)
    path = tmp_path / "rule.csv"
    dump_rule_csv(rule, path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(rows[:, 0], rule.nodes)
    assert np.allclose(rows[:, 1], rule.weights)
