"""Particle states, collision kernels and the coalescence map.

A particle is a pair ``y = (m, p)`` of a positive mass and an impulsion
vector in dimension 1, 2 or 3.  Two particles merge at rate ``a(y, y')``
into ``(m + m', p + p')``; the merge conserves mass and impulsion and
dissipates kinetic energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, NoMajorantError

__all__ = [
    "ParticleState",
    "KernelSpec",
    "Constant",
    "ImpulsionPower",
    "HardSphere",
    "Manev",
    "MassOnly",
    "eval_kernel",
    "coalesce",
    "kinetic_energy",
    "kinetic_energy_loss",
    "majorant",
    "kernel_from_dict",
]


def _norm(v: Sequence[float]) -> float:
    return math.sqrt(math.fsum(x * x for x in v))


@dataclass(frozen=True)
class ParticleState:
    """One particle: mass ``m > 0`` and impulsion ``p`` (a tuple of length d)."""

    m: float
    p: tuple

    def __init__(self, m, p):
        if np.ndim(p) == 0:
            p = (p,)
        p = tuple(float(x) for x in np.asarray(p, dtype=float).ravel())
        m = float(m)
        if not (m > 0.0) or not math.isfinite(m):
            raise DomainError(f"mass must be positive and finite, got {m!r}")
        if len(p) not in (1, 2, 3):
            raise DimensionMismatch(f"dimension must be 1, 2 or 3, got {len(p)}")
        if not all(math.isfinite(x) for x in p):
            raise DomainError("impulsion must be finite")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def v(self) -> tuple:
        return tuple(x / self.m for x in self.p)

    @property
    def speed(self) -> float:
        return _norm(self.p) / self.m


def _check_dims(y: ParticleState, y2: ParticleState) -> None:
    if y.d != y2.d:
        raise DimensionMismatch(f"particles live in different dimensions ({y.d} vs {y2.d})")


# Integer codes shared with the compiled event loop in ``_engine``.
CODE_CONSTANT = 0
CODE_IMPULSION = 1
CODE_HARD_SPHERE = 2
CODE_MANEV = 3
CODE_MASS_ONLY = 4

MASS_FORMS = {"constant": 0, "additive": 1, "multiplicative": 2}


class KernelSpec:
    """Base class of the collision rates ``a(y, y')``.

    Subclasses are small frozen dataclasses; ``rate`` evaluates the kernel on
    two particles, ``matrix`` on all pairs of an ensemble, and ``code`` tags
    the kernel for the compiled simulator.
    """

    code: int = -1
    tag: str = ""

    def rate(self, y: ParticleState, y2: ParticleState) -> float:
        raise NotImplementedError

    def matrix(self, m: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Rates ``a(y_i, y_j)`` for all pairs; ``m`` has shape (n,), ``p`` (n, d)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"type": self.tag}

    @property
    def is_simulatable(self) -> bool:
        return True

    @property
    def depends_on_mass(self) -> bool:
        return True


@dataclass(frozen=True)
class Constant(KernelSpec):
    code = CODE_CONSTANT
    tag = "constant"

    def rate(self, y, y2):
        _check_dims(y, y2)
        return 1.0

    def matrix(self, m, p):
        return np.ones((len(m), len(m)))

    @property
    def depends_on_mass(self):
        return False


@dataclass(frozen=True)
class ImpulsionPower(KernelSpec):
    """``a(p, p') = |p - p'|**gamma`` with ``0 <= gamma <= 2``."""

    gamma: float = 1.0
    code = CODE_IMPULSION
    tag = "impulsion_power"

    def __post_init__(self):
        g = float(self.gamma)
        if not (0.0 <= g <= 2.0):
            raise DomainError(f"impulsion exponent gamma must lie in [0, 2], got {g}")
        object.__setattr__(self, "gamma", g)

    def rate(self, y, y2):
        _check_dims(y, y2)
        return _norm([a - b for a, b in zip(y.p, y2.p)]) ** self.gamma

    def matrix(self, m, p):
        diff = p[:, None, :] - p[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)) ** self.gamma

    def to_dict(self):
        return {"type": self.tag, "gamma": self.gamma}

    @property
    def depends_on_mass(self):
        return False


@dataclass(frozen=True)
class HardSphere(KernelSpec):
    """``a = (m^(1/3) + m'^(1/3))^2 |v - v'|``."""

    code = CODE_HARD_SPHERE
    tag = "hard_sphere"

    def rate(self, y, y2):
        _check_dims(y, y2)
        r = np.cbrt(y.m) + np.cbrt(y2.m)
        dv = _norm([a / y.m - b / y2.m for a, b in zip(y.p, y2.p)])
        return float(r * r * dv)

    def matrix(self, m, p):
        v = p / m[:, None]
        diff = v[:, None, :] - v[None, :, :]
        r = np.cbrt(m)[:, None] + np.cbrt(m)[None, :]
        return r * r * np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class Manev(KernelSpec):
    """``a = (m + m') / (m m') / |v - v'|^2``; evaluable but never simulated."""

    code = CODE_MANEV
    tag = "manev"

    def rate(self, y, y2):
        _check_dims(y, y2)
        dv = _norm([a / y.m - b / y2.m for a, b in zip(y.p, y2.p)])
        if dv == 0.0:
            raise DomainError("Manev kernel is singular at equal velocities")
        return (y.m + y2.m) / (y.m * y2.m) / (dv * dv)

    def matrix(self, m, p):
        v = p / m[:, None]
        diff = v[:, None, :] - v[None, :, :]
        dv2 = np.einsum("ijk,ijk->ij", diff, diff)
        off = ~np.eye(len(m), dtype=bool)
        if np.any(dv2[off] == 0.0):
            raise DomainError("Manev kernel is singular at equal velocities")
        with np.errstate(divide="ignore"):
            out = (m[:, None] + m[None, :]) / (m[:, None] * m[None, :]) / dv2
        out[~off] = np.inf
        return out

    @property
    def is_simulatable(self):
        return False


@dataclass(frozen=True)
class MassOnly(KernelSpec):
    """Kernel depending on the masses only.

    ``form`` is one of ``"constant"`` (1), ``"additive"`` (m + m') or
    ``"multiplicative"`` (m m'); the homogeneity degree is 0, 1 and 2.
    ``bound`` is an optional user-supplied upper bound on ``a(m, m')`` over
    ``(0, total mass]^2``; without it the simulator derives the bound from the
    running maximal mass.
    """

    form: str = "constant"
    bound: Optional[float] = None
    code = CODE_MASS_ONLY
    tag = "mass_only"

    def __post_init__(self):
        if self.form not in MASS_FORMS:
            raise DomainError(f"unknown mass-only kernel form {self.form!r}")
        if self.bound is not None and not (self.bound > 0):
            raise DomainError("mass-only kernel bound must be positive")

    @property
    def homogeneity(self) -> float:
        return float(MASS_FORMS[self.form])

    def mass_rate(self, m: float, m2: float) -> float:
        if self.form == "constant":
            return 1.0
        if self.form == "additive":
            return m + m2
        return m * m2

    def rate(self, y, y2):
        _check_dims(y, y2)
        return self.mass_rate(y.m, y2.m)

    def matrix(self, m, p):
        return self.mass_rate(m[:, None], m[None, :]) * np.ones((len(m), len(m)))

    def to_dict(self):
        out = {"type": self.tag, "form": self.form}
        if self.bound is not None:
            out["bound"] = self.bound
        return out


def kernel_from_dict(spec: Mapping) -> KernelSpec:
    kind = spec["type"]
    if kind == "constant":
        return Constant()
    if kind == "impulsion_power":
        return ImpulsionPower(spec.get("gamma", 1.0))
    if kind == "hard_sphere":
        return HardSphere()
    if kind == "manev":
        return Manev()
    if kind == "mass_only":
        return MassOnly(spec.get("form", "constant"), spec.get("bound"))
    raise DomainError(f"unknown kernel type {kind!r}")


def eval_kernel(k: KernelSpec, y: ParticleState, y2: ParticleState) -> float:
    """Collision rate ``a(y, y2) >= 0``; symmetric in its arguments."""
    return k.rate(y, y2)


def coalesce(y: ParticleState, y2: ParticleState) -> ParticleState:
    """Merge two particles: masses and impulsions add."""
    _check_dims(y, y2)
    return ParticleState(y.m + y2.m, tuple(a + b for a, b in zip(y.p, y2.p)))


def kinetic_energy(y: ParticleState) -> float:
    return 0.5 * math.fsum(x * x for x in y.p) / y.m


def kinetic_energy_loss(y: ParticleState, y2: ParticleState) -> float:
    """Energy dissipated by merging ``y`` and ``y2``.

    Uses the reduced-mass form ``(1/2) m m' / (m + m') |v - v'|^2``, which is
    nonnegative by construction and agrees with
    ``E(y) + E(y2) - E(coalesce(y, y2))`` up to rounding.
    """
    _check_dims(y, y2)
    dv2 = math.fsum((a / y.m - b / y2.m) ** 2 for a, b in zip(y.p, y2.p))
    return 0.5 * (y.m * y2.m / (y.m + y2.m)) * dv2


def majorant(k: KernelSpec, stats: Mapping[str, float]) -> float:
    """Upper bound on ``a(y, y')`` over every pair of a particle system.

    ``stats`` carries the system summary: ``max_p`` (largest |p|), ``max_r``
    (largest m^(1/3)), ``max_v`` (largest |v|) and, for mass-only kernels
    without a user bound, ``max_m`` (largest mass).
    """
    if isinstance(k, Constant):
        return 1.0
    if isinstance(k, ImpulsionPower):
        return (2.0 * stats["max_p"]) ** k.gamma
    if isinstance(k, HardSphere):
        r = 2.0 * stats["max_r"]
        return r * r * (2.0 * stats["max_v"])
    if isinstance(k, MassOnly):
        if k.bound is not None:
            return float(k.bound)
        mmax = stats["max_m"]
        return k.mass_rate(mmax, mmax)
    if isinstance(k, Manev):
        raise NoMajorantError("Manev kernel is unbounded near equal velocities")
    raise NoMajorantError(f"no majorant known for {k!r}")
