"""Mean-field stochastic coalescence simulator (Marcus-Lushnikov type).

``n0`` particles are drawn from an initial law; every unordered pair merges at
rate ``a(y_i, y_j) / n0`` so that the empirical measure ``(1/n0) sum delta``
tracks the solution of the kinetic coalescence equation.  Events are sampled
exactly by thinning against a global majorant of the kernel.

Random streams
--------------
Run ``r`` of a configuration with seed ``s`` uses
``numpy.random.Generator(Philox(SeedSequence(s, spawn_key=(r,))))``.  The
generator first draws the masses, then the impulsions, then a stream of
uniforms consumed four per candidate event.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _engine
from .errors import AggLabError, DomainError, MajorantViolation, NoMajorantError
from .kernels import KernelSpec, ParticleState, kernel_from_dict, MASS_FORMS
from .moment_lab import MomentSeries

GENERATOR_NAME = "numpy.random.Philox"
STREAM_DERIVATION = "SeedSequence(entropy=seed, spawn_key=(run_index,))"


@dataclass(frozen=True)
class Monodisperse:
    m0: float = 1.0

    def sample(self, rng, n):
        return np.full(n, float(self.m0))

    def to_dict(self):
        return {"type": "monodisperse", "m0": self.m0}


@dataclass(frozen=True)
class Exponential:
    """Masses with density ``rate * exp(-rate m)``."""

    rate: float = 1.0

    def sample(self, rng, n):
        m = rng.standard_exponential(n) / self.rate
        if np.any(m <= 0.0):
            raise DomainError("sampled a zero mass")
        return m

    def to_dict(self):
        return {"type": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class GaussianIsotropic:
    """Every impulsion component independent N(0, sigma^2)."""

    sigma: float = 1.0

    def sample(self, rng, n, d):
        return rng.normal(0.0, self.sigma, size=(n, d))

    def to_dict(self):
        return {"type": "gaussian", "sigma": self.sigma}


@dataclass(frozen=True)
class SymmetrizedSamples:
    """Deterministic impulsions cycled from a fixed list of vectors."""

    samples: tuple = ((1.0,),)

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in np.atleast_1d(s)) for s in self.samples)
        if not rows:
            raise DomainError("SymmetrizedSamples needs at least one vector")
        object.__setattr__(self, "samples", rows)

    def sample(self, rng, n, d):
        arr = np.asarray(self.samples, dtype=float)
        if arr.shape[1] != d:
            raise DomainError(f"sample vectors have dimension {arr.shape[1]}, expected {d}")
        return arr[np.arange(n) % len(arr)].copy()

    def to_dict(self):
        return {"type": "samples", "samples": [list(s) for s in self.samples]}


@dataclass(frozen=True)
class InitialCondition:
    mass_law: Union[Monodisperse, Exponential] = field(default_factory=Monodisperse)
    momentum_law: Union[GaussianIsotropic, SymmetrizedSamples] = field(
        default_factory=GaussianIsotropic)
    symmetrize: bool = True

    def to_dict(self):
        return {"mass": self.mass_law.to_dict(), "momentum": self.momentum_law.to_dict(),
                "symmetrize": self.symmetrize}

    @classmethod
    def from_dict(cls, d):
        ml = d.get("mass", {"type": "monodisperse"})
        pl = d.get("momentum", {"type": "gaussian"})
        if ml["type"] == "monodisperse":
            mass = Monodisperse(ml.get("m0", 1.0))
        else:
            mass = Exponential(ml.get("rate", 1.0))
        if pl["type"] == "gaussian":
            mom = GaussianIsotropic(pl.get("sigma", 1.0))
        else:
            mom = SymmetrizedSamples(tuple(tuple(s) for s in pl["samples"]))
        return cls(mass, mom, bool(d.get("symmetrize", True)))


@dataclass(frozen=True)
class SimConfig:
    kernel: KernelSpec
    n0: int
    d: int = 1
    t_grid: tuple = (0.0, 1.0)
    init: InitialCondition = field(default_factory=InitialCondition)
    ensemble: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n0 < 2:
            raise DomainError("n0 must be at least 2")
        if self.d not in (1, 2, 3):
            raise DomainError("dimension must be 1, 2 or 3")
        grid = tuple(float(t) for t in self.t_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])) or (grid and grid[0] < 0):
            raise DomainError("t_grid must be nonnegative and strictly increasing")
        object.__setattr__(self, "t_grid", grid)
        if self.ensemble < 1:
            raise DomainError("ensemble size must be at least 1")
        if self.init.symmetrize and self.n0 % 2:
            raise DomainError("symmetrized initial data needs an even n0")


def _stream(seed: int, run_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.Philox(ss))


class ParticleSystem:
    """Finite particle ensemble evolving under the coalescence dynamics.

    Live particles occupy the first ``n`` rows of ``m`` and ``p``.  A system is
    mutable and must not be shared between threads while it runs.
    """

    _first_chunk = 256
    _max_chunk = 1 << 18

    def __init__(self, m, p, kernel: KernelSpec, n0: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None, t: float = 0.0):
        m = np.array(m, dtype=float)
        p = np.array(p, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if m.ndim != 1 or p.shape[0] != m.shape[0]:
            raise DomainError("m must be 1-D and p must have one row per particle")
        if np.any(m <= 0) or not np.all(np.isfinite(m)) or not np.all(np.isfinite(p)):
            raise DomainError("masses must be positive and all values finite")
        self.m = m
        self.p = np.ascontiguousarray(p)
        self.n = m.shape[0]
        self.n0 = int(n0) if n0 is not None else self.n
        self.d = p.shape[1]
        self.t = float(t)
        self.kernel = kernel
        self.rng = rng if rng is not None else _stream(0, 0)
        self.stats = np.zeros(4)
        _engine.full_stats(self.m, self.p, self.n, self.stats)
        self.counters = np.zeros(3, dtype=np.int64)
        self.counters[_engine.REFRESH_EVERY] = max(1, self.n0 // 10)
        self.events = 0
        self._u = np.empty(0)
        self._pos = 0
        self._chunk = self._first_chunk
        self._log = None

    # -- views -----------------------------------------------------------
    @property
    def particles(self) -> List[ParticleState]:
        return [ParticleState(self.m[i], self.p[i]) for i in range(self.n)]

    @property
    def live_m(self) -> np.ndarray:
        return self.m[: self.n]

    @property
    def live_p(self) -> np.ndarray:
        return self.p[: self.n]

    def summary(self) -> dict:
        return {"max_p": self.stats[_engine.MAX_P], "max_r": self.stats[_engine.MAX_R],
                "max_v": self.stats[_engine.MAX_V], "max_m": self.stats[_engine.MAX_M]}

    def enable_log(self, capacity: int) -> None:
        """Record (time, i, j) of the next ``capacity`` accepted events."""
        self._log = (np.empty(capacity), np.empty(capacity, dtype=np.int64),
                     np.empty(capacity, dtype=np.int64))
        self.counters[_engine.LOG_LEN] = 0

    @property
    def event_log(self):
        if self._log is None:
            return np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        k = self.counters[_engine.LOG_LEN]
        return tuple(a[:k].copy() for a in self._log)

    def copy(self) -> "ParticleSystem":
        out = ParticleSystem.__new__(ParticleSystem)
        out.__dict__.update(self.__dict__)
        for name in ("m", "p", "stats", "counters", "_u"):
            setattr(out, name, getattr(self, name).copy())
        out.rng = np.random.Generator(type(self.rng.bit_generator)())
        out.rng.bit_generator.state = self.rng.bit_generator.state
        out._log = None
        return out

    # -- dynamics --------------------------------------------------------
    def _kernel_args(self):
        k = self.kernel
        if not k.is_simulatable:
            raise NoMajorantError(f"{type(k).__name__} kernel has no finite majorant")
        gamma = float(getattr(k, "gamma", 0.0))
        form = MASS_FORMS.get(getattr(k, "form", "constant"), 0)
        bound = getattr(k, "bound", None)
        return k.code, gamma, form, float(bound) if bound is not None else -1.0

    def _refill(self):
        # buffer length is a multiple of 4, so no partial candidate is left over
        self._u = self.rng.random(self._chunk)
        self._pos = 0
        self._chunk = min(self._chunk * 4, self._max_chunk)

    def run_to(self, t_target: float, max_events: Optional[int] = None) -> "ParticleSystem":
        if t_target < self.t:
            raise DomainError(f"cannot run backwards from t={self.t} to {t_target}")
        code, gamma, form, bound = self._kernel_args()
        if self._log is None:
            log = (np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        else:
            log = self._log
        budget = np.iinfo(np.int64).max if max_events is None else int(max_events)
        while True:
            n, t, pos, ev, status = _engine.advance(
                self.m, self.p, self.n, self.n0, self.t, float(t_target), code, gamma,
                form, bound, self.stats, self.counters, self._u, self._pos, budget, *log)
            self.n, self.t, self._pos = n, t, pos
            self.events += ev
            budget -= ev
            if status == _engine.STATUS_BUFFER:
                self._refill()
                continue
            if status == _engine.STATUS_VIOLATION:
                raise MajorantViolation(
                    f"kernel value exceeded majorant {self.summary()} at t={self.t}")
            return self

    def moment(self, alpha: float, beta: float) -> float:
        return empirical_moment(self, alpha, beta)


def init_system(cfg: SimConfig, run_index: int) -> ParticleSystem:
    """Sample the ``run_index``-th independent initial system of ``cfg``."""
    rng = _stream(cfg.seed, run_index)
    init = cfg.init
    if init.symmetrize:
        half = cfg.n0 // 2
        m_half = init.mass_law.sample(rng, half)
        p_half = init.momentum_law.sample(rng, half, cfg.d)
        m = np.empty(cfg.n0)
        p = np.empty((cfg.n0, cfg.d))
        m[0::2] = m_half
        m[1::2] = m_half
        p[0::2] = p_half
        p[1::2] = -p_half
    else:
        m = init.mass_law.sample(rng, cfg.n0)
        p = init.momentum_law.sample(rng, cfg.n0, cfg.d)
    return ParticleSystem(m, p, cfg.kernel, n0=cfg.n0, rng=rng)


def run_to(sys: ParticleSystem, t_target: float, max_events: Optional[int] = None) -> ParticleSystem:
    """Advance ``sys`` in place to ``t_target`` (or until one particle is left).

    When the system is reduced to a single particle the clock is still moved
    to ``t_target``: nothing can happen any more, so the state is the state at
    that time.
    """
    return sys.run_to(t_target, max_events=max_events)


def empirical_moment(sys: ParticleSystem, alpha: float, beta: float) -> float:
    """``(1/n0) sum_i m_i^alpha |p_i|^beta`` over the live particles (``|p|^0 = 1``)."""
    m = sys.live_m
    pn = np.sqrt(np.einsum("ij,ij->i", sys.live_p, sys.live_p))
    if beta == 0:
        w = np.ones_like(pn)
    else:
        if beta < 0 and np.any(pn == 0):
            raise DomainError("negative impulsion moment with a particle at p = 0")
        w = pn ** beta
    if alpha != 0:
        w = w * m ** alpha
    return float(np.sum(w) / sys.n0)


def _one_run(cfg: SimConfig, pairs, run_index: int) -> np.ndarray:
    sys = init_system(cfg, run_index)
    out = np.empty((len(cfg.t_grid), len(pairs)))
    for k, t in enumerate(cfg.t_grid):
        sys.run_to(t)
        for q, (a, b) in enumerate(pairs):
            out[k, q] = empirical_moment(sys, a, b)
    return out


def ensemble_moments(cfg: SimConfig, pairs: Sequence[Tuple[float, float]],
                     threads: int = 1) -> MomentSeries:
    """Mean and standard error of moments over ``cfg.ensemble`` independent runs.

    Runs are keyed by run index and reduced in index order, so the result does
    not depend on ``threads``.
    """
    pairs = [(float(a), float(b)) for a, b in pairs]
    R = cfg.ensemble
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda r: _one_run(cfg, pairs, r), range(R)))
    else:
        results = [_one_run(cfg, pairs, r) for r in range(R)]
    data = np.stack(results)  # (R, T, P)
    mean = data.mean(axis=0)
    if R > 1:
        se = data.std(axis=0, ddof=1) / math.sqrt(R)
    else:
        se = np.full_like(mean, np.nan)
    entries = {pq: mean[:, q].copy() for q, pq in enumerate(pairs)}
    stderr = {pq: se[:, q].copy() for q, pq in enumerate(pairs)}
    meta = {"kernel": cfg.kernel.to_dict(), "n0": cfg.n0, "d": cfg.d, "n_runs": R,
            "seed": cfg.seed, "generator": GENERATOR_NAME, "stream": STREAM_DERIVATION,
            "init": cfg.init.to_dict()}
    return MomentSeries(np.array(cfg.t_grid), entries, stderr, "monte-carlo", meta,
                        runs=data)
