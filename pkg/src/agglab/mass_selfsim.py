"""Lift of mass-only coagulation solutions to mass-impulsion solutions in R^3.

Given a momentum symbol ``b`` on R^3, homogeneous of degree ``1/theta`` and
with ``phi = F^-1(exp(-b)) >= 0``, and a solution ``F(t, m)`` of the
Smoluchowski equation, the density

    f(t, m, p) = m^(-3 theta) F(t, m) phi(p / m^theta)

solves the kinetic coalescence equation for the same mass kernel.  The key
fact is that ``g_m(p) = m^(-3 theta) phi(p / m^theta)`` has transform
``exp(-m b(eta))``, so ``g_m' * g_(m - m') = g_m``.

Fourier convention: ``hat phi(eta) = int exp(-i p . eta) phi(p) dp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import roots_genlaguerre, roots_hermite, roots_laguerre

from .errors import DomainError
from .quadrature import panel_rule

__all__ = [
    "LiftSpec",
    "MassSolution",
    "quadratic_lift",
    "radial_lift",
    "phi_from_b",
    "factorization_check",
    "lift_solution",
    "smoluchowski_constant_exact",
    "constant_kernel_solution",
    "smoluchowski_residual",
    "residual_check",
    "pk_values",
    "pk_scaling_check",
    "selfsimilar_form_check",
]


@dataclass(frozen=True)
class LiftSpec:
    """Momentum symbol ``b`` and the matching profile ``phi`` in dimension 3.

    ``b`` takes an array of shape (..., 3) and is homogeneous of degree
    ``1/theta``.  ``phi`` takes ``|p|``-compatible arrays of shape (..., 3).
    ``certified`` is false for custom symbols whose positivity is not proved.
    ``c`` is the coefficient of the quadratic symbol ``c |eta|^2`` (None for
    custom symbols).
    """

    theta: float
    b: Callable
    phi: Callable
    certified: bool = True
    c: Optional[float] = None
    d_p: int = 3
    label: str = "custom"

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be positive")
        if self.d_p != 3:
            raise DomainError("the lift is formulated in momentum dimension 3")

    def homogeneity_error(self, etas: np.ndarray, scales: Sequence[float] = (0.5, 2.0, 3.0)) -> float:
        """Max relative error of ``b(s eta) = s^(1/theta) b(eta)`` on a grid."""
        etas = np.asarray(etas, dtype=float)
        base = self.b(etas)
        err = 0.0
        for s in scales:
            lhs = self.b(s * etas)
            rhs = s ** (1.0 / self.theta) * base
            mask = rhs != 0
            if np.any(mask):
                err = max(err, float(np.max(np.abs(lhs[mask] - rhs[mask]) / np.abs(rhs[mask]))))
        return err


def quadratic_lift(c: float = 1.0) -> LiftSpec:
    """Symbol ``c |eta|^2``: ``phi(p) = (4 pi c)^(-3/2) exp(-|p|^2 / (4c))``, ``theta = 1/2``."""
    if not c > 0:
        raise DomainError("c must be positive")

    def b(eta):
        eta = np.asarray(eta, dtype=float)
        return c * np.sum(eta * eta, axis=-1)

    def phi(p):
        p = np.asarray(p, dtype=float)
        return (4 * math.pi * c) ** -1.5 * np.exp(-np.sum(p * p, axis=-1) / (4 * c))

    return LiftSpec(0.5, b, phi, True, float(c), 3, "quadratic")


def radial_lift(beta: Callable, theta: float, k_max: float = 60.0, panels: int = 400,
                order: int = 16) -> LiftSpec:
    """Custom radial symbol ``b(eta) = beta(|eta|)`` with a numerical profile.

    ``phi(r) = (1 / (2 pi^2 r)) int_0^inf k sin(k r) exp(-beta(k)) dk`` is
    evaluated by panel quadrature on ``[0, k_max]``.  Positivity is not
    checked, so the result is marked uncertified.
    """
    k, w = panel_rule(0.0, k_max, panels, order)
    wk = w * k * np.exp(-beta(k))

    def b(eta):
        eta = np.asarray(eta, dtype=float)
        return beta(np.sqrt(np.sum(eta * eta, axis=-1)))

    def phi(p):
        p = np.asarray(p, dtype=float)
        r = np.sqrt(np.sum(p * p, axis=-1))
        flat = r.ravel()
        out = np.empty_like(flat)
        small = flat < 1e-8
        # limit r -> 0: (1 / (2 pi^2)) int k^2 exp(-beta)
        out[small] = np.sum(wk * k) / (2 * math.pi ** 2)
        rr = flat[~small]
        out[~small] = (np.sin(np.outer(rr, k)) @ wk) / (2 * math.pi ** 2 * rr)
        return out.reshape(r.shape)

    return LiftSpec(float(theta), b, phi, False, None, 3, "radial")


def phi_from_b(spec: LiftSpec) -> Callable:
    """Profile evaluator ``phi = F^-1(exp(-b))`` of a lift specification."""
    return spec.phi


@dataclass(frozen=True)
class MassSolution:
    """Solution ``F(t, m)`` of the Smoluchowski equation.

    ``kernel`` is a mass kernel ``a(m, m')`` (vectorized) and ``lam`` its
    homogeneity.  ``dFdt`` is the exact time derivative when known; ``exact``
    marks solutions usable as residual oracles.  ``selfsim`` optionally holds
    ``(nu, mu, Phi)`` with ``F(t, m) = nu(t) Phi(mu(t) m)``.
    """

    F: Callable
    kernel: Callable
    lam: float
    dFdt: Optional[Callable] = None
    exact: bool = False
    selfsim: Optional[tuple] = None
    label: str = "custom"
    info: dict = field(default_factory=dict, compare=False)


def smoluchowski_constant_exact(t, m):
    """``T^-2 exp(-m/T)`` with ``T = 1 + t/2``: constant kernel, ``F(0, m) = exp(-m)``."""
    t = np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0) or np.any(t < 0):
        raise DomainError("need m > 0 and t >= 0")
    T = 1.0 + 0.5 * t
    return np.exp(-m / T) / (T * T)


def _constant_dFdt(t, m):
    T = 1.0 + 0.5 * np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    # dT/dt = 1/2
    return 0.5 * np.exp(-m / T) * (m / T ** 4 - 2.0 / T ** 3)


def constant_kernel_solution() -> MassSolution:
    """The built-in exact solution for ``a(m, m') = 1``."""
    return MassSolution(
        smoluchowski_constant_exact,
        lambda m, m2: np.ones(np.broadcast(np.asarray(m), np.asarray(m2)).shape),
        0.0, _constant_dFdt, True,
        (lambda t: (1 + 0.5 * np.asarray(t)) ** -2.0,
         lambda t: 1.0 / (1 + 0.5 * np.asarray(t)),
         lambda x: np.exp(-np.asarray(x))),
        "constant-exact")


def factorization_check(spec: LiftSpec, m: float, m2: float, eta_grid) -> float:
    """Max of ``|exp(-m b) - exp(-m2 b) exp(-(m - m2) b)|`` over ``eta_grid``."""
    if not 0 < m2 < m:
        raise DomainError("need 0 < m2 < m")
    bv = spec.b(np.asarray(eta_grid, dtype=float))
    with np.errstate(under="ignore"):
        lhs = np.exp(-m * bv)
        rhs = np.exp(-m2 * bv) * np.exp(-(m - m2) * bv)
    res = np.abs(lhs - rhs)
    if not np.all(np.isfinite(res)):
        raise DomainError("non-finite factorization residual")
    return float(np.max(res))


def _g(spec: LiftSpec, m, p):
    """``m^(-3 theta) phi(p / m^theta)`` for ``p`` of shape (..., 3)."""
    m = np.asarray(m, dtype=float)
    s = m ** spec.theta
    return m ** (-3 * spec.theta) * spec.phi(np.asarray(p, dtype=float) / s[..., None])


def lift_solution(F: MassSolution, spec: LiftSpec, t, m, p):
    """``m^(-3 theta) F(t, m) phi(p / m^theta)``; ``p`` has trailing dimension 3."""
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise DomainError("the lift is defined for m > 0")
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise DomainError("impulsion must have 3 components")
    return F.F(t, m) * _g(spec, m, p)


def smoluchowski_residual(F: MassSolution, t, m, n_mass: int = 64):
    """``dF/dt - Q_mass(F)`` at ``(t, m)`` by Gauss quadrature in mass.

    The gain term uses Gauss-Legendre on ``[0, m]``; the loss term uses
    Gauss-Laguerre scaled by ``m_scale = 1 + t/2`` (adequate for
    exponentially decaying solutions).
    """
    if F.dFdt is None:
        raise DomainError("residual needs the exact time derivative")
    x, w = np.polynomial.legendre.leggauss(n_mass)
    m = float(m)
    mp = 0.5 * m * (x + 1.0)
    gain = 0.5 * 0.5 * m * np.sum(w * F.F(t, m - mp) * F.F(t, mp) * F.kernel(m - mp, mp))
    xl, wl = roots_laguerre(n_mass)
    scale = 1.0 + 0.5 * t
    u = scale * xl
    loss = F.F(t, m) * np.sum(scale * wl * np.exp(xl) * F.F(t, u) * F.kernel(m, u))
    return float(F.dFdt(t, m) - (gain - loss))


def _gauss_conv(spec: LiftSpec, m1: float, m2: float, p: np.ndarray, n: int):
    """Numerical ``int g_m1(p - q) g_m2(q) dq`` for the quadratic symbol.

    The narrower factor ``g_m2`` (``m2 <= m1``) supplies the weight: with
    ``q = 2 sqrt(c m2) s`` it becomes ``pi^(-3/2) exp(-|s|^2)``.  Cylindrical
    coordinates around ``p`` reduce the remaining integral to a Gauss-Hermite
    rule in the axial direction and a Gauss-Laguerre rule in ``rho^2``.
    """
    c = spec.c
    zh, wh = roots_hermite(n)
    ul, wl = roots_laguerre(n)
    L = 2.0 * math.sqrt(c * m2)
    pn = float(np.linalg.norm(p))
    # int exp(-rho^2 - z^2) h rho drho dphi dz = pi int exp(-u) exp(-z^2) h(sqrt u, z) du dz
    rho = np.sqrt(ul)[:, None]
    z = zh[None, :]
    q2_axial = (pn - L * z) ** 2 + (L * rho) ** 2
    g1 = (4 * math.pi * c * m1) ** -1.5 * np.exp(-q2_axial / (4 * c * m1))
    return float(math.pi ** -1.5 * math.pi * np.sum(wl[:, None] * wh[None, :] * g1))


def residual_check(F: MassSolution, spec: LiftSpec, t: float, points, method: str = "direct",
                   n_mass: int = 64, n_p: int = 40) -> float:
    """Max ``|d f/dt - Q(f)|`` of the lifted solution at collocation points.

    ``points`` is a sequence of ``(m, p)`` with ``p`` a 3-vector.  The loss
    term ``f int int f'`` and the time derivative are exact up to mass
    quadrature.  With ``method="direct"`` the gain term is the full
    mass-impulsion convolution with the impulsion integral done numerically
    (quadratic symbols only); ``method="reduced"`` collapses it through
    ``g_m' * g_(m - m') = g_m`` and checks only the mass equation.
    """
    if not F.exact or F.dFdt is None:
        raise DomainError("residual_check needs an exact mass solution as oracle")
    if method == "direct" and spec.c is None:
        raise DomainError("direct convolution is available for quadratic symbols only")
    x, w = np.polynomial.legendre.leggauss(n_mass)
    xl, wl = roots_laguerre(n_mass)
    scale = 1.0 + 0.5 * t
    u = scale * xl
    worst = 0.0
    for m, p in points:
        m = float(m)
        p = np.asarray(p, dtype=float)
        gm = float(_g(spec, np.array(m), p))
        dfdt = float(F.dFdt(t, m)) * gm
        total_number = np.sum(scale * wl * np.exp(xl) * F.F(t, u) * F.kernel(m, u))
        loss = float(F.F(t, m)) * gm * total_number
        if method == "reduced":
            mp = 0.5 * m * (x + 1.0)
            gain = 0.25 * m * np.sum(w * F.F(t, m - mp) * F.F(t, mp) * F.kernel(m - mp, mp)) * gm
        else:
            # symmetric in m' <-> m - m': integrate over [0, m/2] and double
            mp = 0.25 * m * (x + 1.0)
            conv = np.array([_gauss_conv(spec, m - q, q, p, n_p) for q in mp])
            vals = F.F(t, m - mp) * F.F(t, mp) * F.kernel(m - mp, mp) * conv
            gain = 0.5 * 2.0 * 0.25 * m * np.sum(w * vals)
        worst = max(worst, abs(dfdt - (gain - loss)))
    return worst


def _radial_moment(spec: LiftSpec, k: float, panels: int = 64, order: int = 16) -> float:
    """``int |P|^k phi(P) dP`` over R^3 in spherical shells."""
    if spec.c is not None:
        # Gaussian with variance 2c per axis: E|P|^k = (4c)^(k/2) Gamma((3+k)/2) / Gamma(3/2)
        return (4 * spec.c) ** (k / 2) * gamma_fn((3 + k) / 2) / gamma_fn(1.5)
    r, w = panel_rule(0.0, 40.0, panels, order)
    pts = np.zeros((r.size, 3))
    pts[:, 0] = r
    return float(np.sum(w * 4 * math.pi * r ** (2 + k) * spec.phi(pts)))


def pk_values(F: MassSolution, spec: LiftSpec, k: float, t_grid, n_mass: int = 80):
    """``P_k(t) = int int |p|^k f dm dp`` on ``t_grid``.

    The integral factorizes into ``int m^(k theta) F dm`` times the ``k``-th
    radial moment of ``phi``.  The mass factor uses generalized Gauss-Laguerre
    with weight ``x^(k theta) exp(-x)`` in ``x = m / (1 + t/2)``, so the
    power singularity at ``m = 0`` is carried by the weight.
    """
    if k <= -3 or k * spec.theta <= -1:
        raise DomainError("P_k diverges for k <= -3 or k theta <= -1")
    a = k * spec.theta
    xl, wl = roots_genlaguerre(n_mass, a)
    pm = _radial_moment(spec, k)
    out = []
    for t in np.asarray(t_grid, dtype=float):
        scale = 1.0 + 0.5 * t
        u = scale * xl
        out.append(pm * scale ** (1 + a) * np.sum(wl * np.exp(xl) * F.F(t, u)))
    return np.array(out)


def pk_scaling_check(F: MassSolution, spec: LiftSpec, k: float, t_grid) -> float:
    """Least-squares slope of ``log P_k`` against ``log t`` over the last decade of ``t_grid``.

    The predicted value is ``-(1 - k theta) / (1 - lam)``.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t_grid must be positive")
    sel = t >= t[-1] / 10.0
    if sel.sum() < 2:
        raise DomainError("need at least two times in the last decade")
    P = pk_values(F, spec, k, t[sel])
    slope = np.polyfit(np.log(t[sel]), np.log(P), 1)[0]
    return float(slope)


def selfsimilar_form_check(F: MassSolution, spec: LiftSpec, t_grid, m_grid, p_grid) -> float:
    """Max relative gap between the lift and ``nu mu^(3 theta) Psi(mu m, mu^theta p)``.

    ``Psi(M, P) = M^(-3 theta) Phi(M) phi(P / M^theta)``; requires ``F.selfsim``.
    """
    if F.selfsim is None:
        raise DomainError("mass solution carries no self-similar form")
    nu, mu, Phi = F.selfsim
    th = spec.theta
    worst = 0.0
    for t in t_grid:
        for m in m_grid:
            for p in p_grid:
                p = np.asarray(p, dtype=float)
                lhs = float(lift_solution(F, spec, t, m, p))
                M = mu(t) * m
                P = mu(t) ** th * p
                psi = M ** (-3 * th) * Phi(M) * spec.phi(P / M ** th)
                rhs = float(nu(t) * mu(t) ** (3 * th) * psi)
                if lhs != 0 or rhs != 0:
                    worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    return worst
