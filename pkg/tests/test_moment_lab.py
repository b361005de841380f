import numpy as np
import pytest

from agglab.errors import ConvergenceError, DomainError
from agglab.kernels import Constant, ImpulsionPower
from agglab.moment_lab import (BoundReport, Gamma2State, MomentSeries, check_gamma1_brackets,
                               check_gamma_bracket_scaling, check_hs_bound, d1_recursion,
                               gamma2_closed_form, gamma2_rhs, integrate_gamma2, m6_closed_form,
                               moment_drift, sphere_constant)
from agglab.particle_sim import ParticleSystem


# -- k_d ---------------------------------------------------------------------

@pytest.mark.parametrize("d,expected", [(1, 1.0), (2, 0.5), (3, 1 / 3)])
def test_sphere_constant_values(d, expected):
    assert sphere_constant(d) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sphere_constant_monte_carlo(d):
    rng = np.random.default_rng(2024 + d)
    x = rng.normal(size=(1_000_000, d))
    s1 = x[:, 0] ** 2 / np.einsum("ij,ij->i", x, x)
    mean, se = s1.mean(), s1.std(ddof=1) / np.sqrt(len(s1))
    assert abs(mean - sphere_constant(d)) <= 3 * se + 1e-15


def test_sphere_constant_bad_dimension():
    with pytest.raises(DomainError):
        sphere_constant(0)


# -- moment drift ----------------------------------------------------------------

def test_moment_drift_two_particles():
    # ordered pairs (1,2),(2,1): a = 2, bracket = 0 - 1 - 1; (1/2)(1/4)(2*2*(-2)) = -1
    sys = ParticleSystem([1.0, 1.0], [[1.0], [-1.0]], ImpulsionPower(1.0), n0=2)
    assert moment_drift(ImpulsionPower(1.0), sys, 1.0) == pytest.approx(-1.0, rel=1e-15)


def test_moment_drift_single_particle_and_sign():
    one = ParticleSystem([1.0], [[3.0]], Constant(), n0=1)
    assert moment_drift(Constant(), one, 1.0) == 0.0
    rng = np.random.default_rng(3)
    p = rng.normal(size=(60, 2))
    sys = ParticleSystem(np.ones(60), p, Constant())
    assert moment_drift(Constant(), sys, 1.0) <= 0.0


def test_moment_drift_matches_explicit_loop():
    rng = np.random.default_rng(4)
    m = rng.exponential(size=9) + 0.1
    p = rng.normal(size=(9, 1))
    k = ImpulsionPower(0.5)
    sys = ParticleSystem(m, p, k, n0=12)
    total = 0.0
    for i in range(9):
        for j in range(9):
            if i != j:
                a = abs(p[i, 0] - p[j, 0]) ** 0.5
                total += a * (abs(p[i, 0] + p[j, 0]) ** 1.5 - abs(p[i, 0]) ** 1.5
                              - abs(p[j, 0]) ** 1.5)
    assert moment_drift(k, sys, 1.5) == pytest.approx(0.5 * total / 144, rel=1e-12)


# -- gamma = 2 hierarchy --------------------------------------------------------

def test_rhs_examples():
    assert gamma2_rhs(Gamma2State(1, [1.0, 1.0])).tolist() == [-1.0, -2.0]
    assert d1_recursion([1.0, 1.0, 1.0, 1.0], 3) == -2.0
    assert gamma2_rhs(Gamma2State(1, [1.0, 1.0, 1.0, 1.0]))[3] == -2.0
    assert gamma2_rhs(Gamma2State(1, np.zeros(5))).tolist() == [0.0] * 5


def test_rhs_general_dimension():
    v = gamma2_rhs(Gamma2State(3, [2.0, 0.5, 0.7]))
    k = 1 / 3
    assert v == pytest.approx([-0.5 * 2.0, -2 * k * 0.25, (2 - 4 * k) * 0.5 * 0.7], rel=1e-15)


def test_recursion_agrees_with_general_formulas_in_d1():
    rng = np.random.default_rng(6)
    for _ in range(20):
        vals = rng.uniform(0.1, 2.0, size=4)
        assert d1_recursion(vals, 1) == pytest.approx(-2 * vals[1] ** 2, rel=1e-14)
        assert d1_recursion(vals, 2) == pytest.approx(-2 * vals[1] * vals[2], rel=1e-14)


def test_high_moments_need_dimension_one():
    with pytest.raises(DomainError):
        gamma2_rhs(Gamma2State(2, [1.0, 1.0, 1.0, 1.0]))


def test_integrate_matches_closed_forms():
    s = integrate_gamma2(Gamma2State(1, [1.0, 0.5, 0.75]), 5.0, 0.005, record_every=100)
    t = s.t_grid
    assert s[(0, 2)] == pytest.approx(1 / (2 + 2 * t), rel=1e-8)
    cf = gamma2_closed_form(1.0, 0.5, 0.75, 1.0, t)
    assert s[(0, 0)] == pytest.approx(cf["M0"], rel=1e-8)
    assert s[(0, 4)] == pytest.approx(cf["M4"], rel=1e-8)
    assert s.provenance == "ode" and s.stderr is None


@pytest.mark.parametrize("d", [2, 3])
def test_integrate_matches_closed_forms_higher_d(d):
    s = integrate_gamma2(Gamma2State(d, [1.0, 1.0, 3.0]), 4.0, 0.004, record_every=250)
    cf = gamma2_closed_form(1.0, 1.0, 3.0, 1 / d, s.t_grid)
    for name, key in (("M0", (0, 0)), ("M2", (0, 2)), ("M4", (0, 4))):
        assert s[key] == pytest.approx(cf[name], rel=1e-8)


def test_m6_closed_form_against_ode():
    v0 = [1.0, 0.5, 0.75, 1.875]
    s = integrate_gamma2(Gamma2State(1, v0), 20.0, 0.005, record_every=400)
    assert s[(0, 6)] == pytest.approx(m6_closed_form(0.5, 0.75, 1.875, s.t_grid), rel=1e-8)


def test_m6_closed_form_solves_its_ode():
    # dM6/dt = 3 M2 M6 - 5 M4^2 with M2 = M2(0)/s and M4 = M4(0)/s, s = 1 + 2 M2(0) t
    M2, M4, M6 = 0.7, 0.9, 1.6
    t, h = np.array([0.3, 2.0, 11.0]), 1e-4
    dm6 = (m6_closed_form(M2, M4, M6, t + h) - m6_closed_form(M2, M4, M6, t - h)) / (2 * h)
    s = 1 + 2 * M2 * t
    rhs = 3 * (M2 / s) * m6_closed_form(M2, M4, M6, t) - 5 * (M4 / s) ** 2
    assert dm6 == pytest.approx(rhs, rel=1e-7)


def test_large_step_is_rejected():
    with pytest.raises(ConvergenceError):
        integrate_gamma2(Gamma2State(1, [1.0, 5.0, 30.0]), 10.0, 1.0)


def test_invalid_initial_moments():
    with pytest.raises(DomainError):
        integrate_gamma2(Gamma2State(1, [1.0, 2.0, 1.0]), 1.0, 0.1)  # M2^2 > M0 M4
    with pytest.raises(DomainError):
        integrate_gamma2(Gamma2State(1, [1.0, 0.5]), 1.0, 0.3)  # not a multiple of dt


def test_cauchy_schwarz_chain_along_trajectory():
    s = integrate_gamma2(Gamma2State(1, [1.0, 0.5, 0.75, 1.875]), 10.0, 0.01, record_every=10)
    M = np.stack([s[(0, 2 * q)] for q in range(4)])
    for b in (1, 2):
        assert np.all(M[b] ** 2 <= M[b - 1] * M[b + 1] * (1 + 1e-12))


# -- MomentSeries ------------------------------------------------------------------

def test_series_validation():
    t = np.array([0.0, 1.0])
    with pytest.raises(DomainError):
        MomentSeries(t, {(0, 0): [1.0]})
    with pytest.raises(DomainError):
        MomentSeries(t, {(0, 0): [1.0, 0.5]}, None, "monte-carlo")
    with pytest.raises(DomainError):
        MomentSeries(t, {(0, 0): [1.0, 0.5]}, {(0, 0): [0, 0]}, "ode")
    s = MomentSeries(t, {(0, 0): [1.0, 0.5]}, {(0, 0): [0.0, 0.1]}, "monte-carlo",
                     {"n_runs": 4})
    assert s.rows() == [(0.0, 0.0, 0.0, 1.0, 0.0, 4), (1.0, 0.0, 0.0, 0.5, 0.1, 4)]


# -- bound checks -----------------------------------------------------------------

def _mc(t, entries):
    return MomentSeries(t, entries, {k: np.zeros_like(t) for k in entries}, "monte-carlo")


def test_hs_bound_examples():
    t = np.array([0.0, 1.0, 2.0, 5.0])
    A_inv = 0.8
    bound = 1 / (1 / A_inv + t / 4)
    r = check_hs_bound(_mc(t, {(-1 / 3, 1): bound}), A_inv)
    assert r.ok and r.ratio[0] == pytest.approx(1.0)
    assert check_hs_bound(_mc(t, {(-1 / 3, 1): np.zeros_like(t)}), A_inv).ok
    bad = check_hs_bound(_mc(t, {(-1 / 3, 1): 2 * bound}), A_inv)
    assert not bad.passed.any() and bad.ratio == pytest.approx(2.0)
    with pytest.raises(DomainError):
        check_hs_bound(MomentSeries(t, {(-1 / 3, 1): bound}), A_inv)


def test_gamma1_brackets_examples():
    t = np.array([0.0, 1.0, 2.0, 5.0, 10.0])
    M0 = {0: 1.0, 1: 0.8, 2: 1.0, 3: 1.6}
    mid = 1 / (1 / M0[1] + 0.75 * t)
    reports = check_gamma1_brackets(_mc(t, {(0, 1): mid}), M0)
    assert len(reports) == 2 and all(r.ok for r in reports)
    # M_2 increasing violates both the upper bound and monotonicity
    rising = _mc(t, {(0, 1): mid, (0, 2): 1.0 + 0.5 * t})
    names = [r.claim for r in check_gamma1_brackets(rising, M0) if not r.ok]
    assert "M_2(t) <= M_2(0)" in names and "M_2 non-increasing" in names
    # t = 0 with exact initial values is inside every bracket
    t0 = _mc(np.array([0.0]), {(0, 0): [1.0], (0, 1): [0.8], (0, 2): [1.0], (0, 3): [1.6]})
    assert all(r.ok for r in check_gamma1_brackets(t0, M0))


def test_gamma1_brackets_kernel_tag():
    t = np.array([0.0, 1.0])
    s = MomentSeries(t, {(0, 1): [1, 0.6]}, {(0, 1): [0, 0]}, "monte-carlo",
                     {"kernel": {"type": "constant"}})
    with pytest.raises(DomainError):
        check_gamma1_brackets(s, {1: 1.0})


def test_bracket_scaling_examples():
    t = np.array([0.0, 1.0, 3.0, 10.0, 30.0])
    exact = _mc(t, {(0, 0.5): 1 / (2.0 + 0.3 * t)})
    r = check_gamma_bracket_scaling(exact)
    assert r.ok and r.ratio == pytest.approx(0.3)
    growing = _mc(t, {(0, 0.5): 1 / (2.0 + 0.3 * t ** 2)})
    assert not check_gamma_bracket_scaling(growing).ok
    const = _mc(t, {(0, 0): 1 / (1 + t / 2)})
    assert check_gamma_bracket_scaling(const).ratio == pytest.approx(0.5)


def test_bound_report_failures():
    r = BoundReport("x", np.array([1.0, 2.0]), np.array([True, False]), np.array([0.1, -0.2]),
                    np.array([0.9, 1.2]), {})
    assert not r.ok and r.failures == [(2.0, -0.2)]
