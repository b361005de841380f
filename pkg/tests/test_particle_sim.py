import numpy as np
import pytest

from agglab.acceptance import chi2_first_event, first_event_samples, gillespie_first_event
from agglab.errors import DomainError, NoMajorantError
from agglab.kernels import Constant, HardSphere, ImpulsionPower, Manev
from agglab.particle_sim import (Exponential, GaussianIsotropic, InitialCondition, Monodisperse,
                                 ParticleSystem, SimConfig, SymmetrizedSamples, empirical_moment,
                                 ensemble_moments, init_system, run_to)


def _cfg(**kw):
    base = dict(kernel=Constant(), n0=1000, d=1, t_grid=(0.0, 1.0, 2.0),
                init=InitialCondition(Monodisperse(1.0), GaussianIsotropic(1.0)), ensemble=4,
                seed=123)
    base.update(kw)
    return SimConfig(**base)


def test_forced_two_particle_init():
    cfg = _cfg(n0=2, init=InitialCondition(Monodisperse(1.0), SymmetrizedSamples(((1.0,),))))
    sys = init_system(cfg, 0)
    assert sorted(map(tuple, sys.live_p.tolist())) == [(-1.0,), (1.0,)]
    assert sys.live_m.tolist() == [1.0, 1.0]


def test_symmetrized_gaussian_has_zero_momentum_exactly():
    cfg = _cfg(n0=10_000, d=3)
    sys = init_system(cfg, 7)
    assert np.all(sys.live_p.sum(axis=0) == 0.0)


def test_init_determinism_and_independence():
    cfg = _cfg(init=InitialCondition(Exponential(2.0), GaussianIsotropic(1.0)))
    a, b = init_system(cfg, 3), init_system(cfg, 3)
    assert np.array_equal(a.live_m, b.live_m) and np.array_equal(a.live_p, b.live_p)
    c = init_system(cfg, 4)
    assert not np.array_equal(a.live_m, c.live_m)


def test_odd_n0_rejected_when_symmetrized():
    with pytest.raises(DomainError):
        _cfg(n0=11)
    _cfg(n0=11, init=InitialCondition(symmetrize=False))


def test_config_validation():
    with pytest.raises(DomainError):
        _cfg(n0=1)
    with pytest.raises(DomainError):
        _cfg(t_grid=(0.0, 2.0, 1.0))
    with pytest.raises(DomainError):
        _cfg(ensemble=0)


def test_empirical_moment_examples():
    sys = ParticleSystem([1.0, 3.0], [[2.0], [-1.0]], Constant(), n0=2)
    assert empirical_moment(sys, 0, 0) == 1.0
    assert empirical_moment(sys, 1, 0) == 2.0
    one = ParticleSystem([8.0], [[0.0, 0.0, 6.0]], Constant(), n0=1)
    assert empirical_moment(one, -1 / 3, 1) == pytest.approx(3.0, rel=1e-15)
    zero = ParticleSystem([1.0], [[0.0]], Constant(), n0=1)
    assert empirical_moment(zero, 0, 0) == 1.0
    with pytest.raises(DomainError):
        empirical_moment(zero, 0, -1)


def test_single_particle_is_inert():
    sys = ParticleSystem([2.0], [[1.0]], Constant(), n0=4)
    run_to(sys, 5.0)
    assert sys.n == 1 and sys.events == 0 and sys.t == 5.0
    assert sys.live_m.tolist() == [2.0]


def test_run_backwards_rejected():
    sys = init_system(_cfg(), 0)
    run_to(sys, 1.0)
    with pytest.raises(DomainError):
        run_to(sys, 0.5)


def test_manev_cannot_be_simulated():
    sys = ParticleSystem([1.0, 1.0], [[1.0], [-1.0]], Manev(), n0=2)
    with pytest.raises(NoMajorantError):
        run_to(sys, 1.0)


@pytest.mark.parametrize("kernel,d", [(Constant(), 1), (ImpulsionPower(1.0), 2),
                                      (ImpulsionPower(2.0), 1), (HardSphere(), 3)])
def test_conservation_along_run(kernel, d):
    cfg = _cfg(kernel=kernel, d=d, n0=2000,
               init=InitialCondition(Exponential(1.0), GaussianIsotropic(1.0)))
    sys = init_system(cfg, 0)
    mass0, mom0 = sys.live_m.sum(), sys.live_p.sum(axis=0)
    e0 = np.sum(np.einsum("ij,ij->i", sys.live_p, sys.live_p) / (2 * sys.live_m))
    n_prev = sys.n
    for t in (0.5, 1.0, 2.0, 4.0):
        run_to(sys, t)
        assert sys.n <= n_prev
        n_prev = sys.n
        assert sys.live_m.sum() == pytest.approx(mass0, rel=1e-12)
        assert np.allclose(sys.live_p.sum(axis=0), mom0, atol=1e-9)
        e = np.sum(np.einsum("ij,ij->i", sys.live_p, sys.live_p) / (2 * sys.live_m))
        assert e <= e0 * (1 + 1e-12)
        e0 = e


def test_count_drops_by_one_per_event():
    sys = init_system(_cfg(), 0)
    sys.enable_log(100)
    run_to(sys, 10.0, max_events=100)
    assert sys.events == 100 and sys.n == 900
    t, i, j = sys.event_log
    assert len(t) == 100 and np.all(np.diff(t) >= 0) and np.all(i != j)


def test_copy_is_independent_and_reproducible():
    sys = init_system(_cfg(), 0)
    run_to(sys, 0.5)
    other = sys.copy()
    run_to(sys, 2.0)
    run_to(other, 2.0)
    assert np.array_equal(sys.live_m, other.live_m)
    assert np.array_equal(sys.live_p, other.live_p)


def test_ensemble_thread_independence():
    cfg = _cfg(ensemble=6, kernel=ImpulsionPower(1.0))
    pairs = [(0, 0), (1, 0), (0, 2)]
    a = ensemble_moments(cfg, pairs, threads=1)
    b = ensemble_moments(cfg, pairs, threads=3)
    assert np.array_equal(a.runs, b.runs)
    for k in a.entries:
        assert np.array_equal(a[k], b[k]) and np.array_equal(a.se(k), b.se(k))
    assert a.metadata["n_runs"] == 6 and a.provenance == "monte-carlo"


def test_mass_column_constant():
    s = ensemble_moments(_cfg(ensemble=3), [(1, 0)])
    assert np.allclose(s[(1, 0)], s[(1, 0)][0], rtol=1e-12, atol=0)


def test_constant_kernel_number_decay_small():
    cfg = _cfg(n0=4000, ensemble=16, t_grid=(1.0, 4.0), seed=99)
    s = ensemble_moments(cfg, [(0, 0)])
    exact = 1 / (1 + np.array(cfg.t_grid) / 2)
    z = np.abs(s[(0, 0)] - exact) / s.se((0, 0))
    # the finite-n0 bias of M_0 is O(1/n0), far below the stderr here
    assert np.all(z < 4)


def test_single_run_has_nan_stderr():
    s = ensemble_moments(_cfg(ensemble=1), [(0, 0)])
    assert np.all(np.isnan(s.se((0, 0))))


def test_constant_kernel_keeps_impulsion_energy_in_law():
    # each event adds 2 p_i.p_j; with sum p = 0 a uniform pair has mean
    # p_i.p_j = -sum|p|^2 / (n(n-1)), so dM_{0,2}/dt = -M_{0,2}/n0 exactly
    cfg = _cfg(n0=4000, ensemble=8, t_grid=(0.0, 2.0), seed=5)
    s = ensemble_moments(cfg, [(0, 2)])
    expected = s[(0, 2)][0] * np.exp(-2.0 / cfg.n0)
    assert abs(s[(0, 2)][1] - expected) < 4 * s.se((0, 2))[1] + 1e-12


@pytest.mark.parametrize("n0", [3, 4])
def test_first_event_law_impulsion_kernel(n0):
    p = np.linspace(-1.0, 2.0, n0)
    kernel = ImpulsionPower(1.0)
    times, pairs = first_event_samples(n0, 20_000, seed=77 + n0, kernel=kernel, momenta=p)
    rates = np.abs(p[:, None] - p[None, :]) / n0
    tot, probs = gillespie_first_event(n0, rates)
    pt, pp = chi2_first_event(times, pairs, tot, probs)
    assert pt > 1e-3 and pp > 1e-3
