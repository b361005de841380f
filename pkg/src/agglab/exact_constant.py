"""Exact transform-space solution of the constant-kernel equation in dimension 1.

Transforms use the Laplace kernel ``exp(-m zeta)`` in mass and the Fourier
kernel ``exp(-i p xi)`` in impulsion, with no ``2 pi`` factors:

    F(t, zeta, xi) = int_0^inf int_R exp(-m zeta - i p xi) f(t, m, p) dp dm.

The Fourier-Laplace transform obeys a Bernoulli equation in time whose
solution is explicit, and the rescaled solution converges to the transform
``Psi_inf`` of a limit profile with two scale constants ``A`` and ``B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.special import comb

from .errors import DomainError
from .quadrature import panel_rule

__all__ = [
    "TransformSolution",
    "exponential_gaussian",
    "compute_AB",
    "M0_exact",
    "F_exact",
    "bernoulli_residual",
    "bound_horizon",
    "transform_bound_check",
    "psi_infty",
    "rescaled_limit_check",
    "limit_profile_moments",
    "phi_infty_profile",
    "profile_width_candidates",
    "profile_transform",
    "SelfSimProfile",
    "g_hat",
    "selfsim_transform_pde_residual",
    "zplusone_profile",
]


@dataclass(frozen=True)
class TransformSolution:
    """Constant-kernel solution described by its initial transform.

    Parameters
    ----------
    H0 : float
        Inverse of the initial number ``M_{0,0}(f_in)``.
    A, B : float
        Mass and impulsion scale constants, ``A = H0^2 M_{1,0}(0)`` and
        ``B = (H0^2 / 2) M_{0,2}(0)``.
    F0 : callable
        ``F0(zeta, xi)``, the transform of the initial datum; vectorized.
    """

    H0: float
    A: float
    B: float
    F0: Callable
    info: Dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("H0", "A", "B"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


def compute_AB(M10: float, M02: float, H0: float):
    """Scale constants ``(A, B)`` from the initial moments and ``H0``."""
    if not (M10 > 0 and M02 > 0 and H0 > 0):
        raise DomainError("moments and H0 must be positive")
    return H0 * H0 * M10, 0.5 * H0 * H0 * M02


def exponential_gaussian(N: float = 1.0, rate: float = 1.0, sigma: float = 1.0) -> TransformSolution:
    """Datum ``N rate exp(-rate m)`` times the centred Gaussian of variance ``sigma^2``.

    ``F0(zeta, xi) = N rate / (rate + zeta) * exp(-sigma^2 xi^2 / 2)``.
    """

    def F0(zeta, xi):
        zeta = np.asarray(zeta)
        xi = np.asarray(xi)
        return N * rate / (rate + zeta) * np.exp(-0.5 * sigma * sigma * xi * xi)

    H0 = 1.0 / N
    A, B = compute_AB(N / rate, N * sigma * sigma, H0)
    info = {"datum": "exponential_gaussian", "N": N, "rate": rate, "sigma": sigma,
            "M00": N, "M10": N / rate, "M02": N * sigma * sigma}
    return TransformSolution(H0, A, B, F0, info)


def M0_exact(sol: TransformSolution, t):
    """Total number ``M_0(t) = 1 / (H0 + t/2)``."""
    return 1.0 / (sol.H0 + 0.5 * np.asarray(t, dtype=float))


def F_exact(sol: TransformSolution, t, zeta, xi):
    """Transform of the solution at time ``t``.

    ``F = H0^2 / ((H0 + t/2)^2 (1/F0 - H0 (t/2) / (H0 + t/2)))``.
    """
    f0 = np.asarray(sol.F0(zeta, xi))
    if np.any(f0 == 0):
        raise DomainError("initial transform vanishes at the evaluation point")
    t = np.asarray(t, dtype=float)
    H0 = sol.H0
    s = H0 + 0.5 * t
    return H0 * H0 / (s * s * (1.0 / f0 - H0 * 0.5 * t / s))


def bernoulli_residual(sol: TransformSolution, t, zeta, xi, h: float = 1e-3):
    """``|dF/dt - (F^2/2 - M_0 F)|`` with a centred difference of step ``h``."""
    if t - h < 0:
        raise DomainError("need t >= h for the centred difference")
    dF = (F_exact(sol, t + h, zeta, xi) - F_exact(sol, t - h, zeta, xi)) / (2 * h)
    F = F_exact(sol, t, zeta, xi)
    return np.abs(dF - (0.5 * F * F - M0_exact(sol, t) * F))


def bound_horizon(sol: TransformSolution, delta: float) -> float:
    """Largest ``T`` with ``H0 (t/2)/(H0 + t/2) <= H0 (1 - delta)`` on ``[0, T]``."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    return 2.0 * (1.0 - delta) * sol.H0 / delta


def transform_bound_check(sol: TransformSolution, delta: float, t_grid, zeta_grid, xi_grid):
    """Check ``|F(t)| <= H0^2 / (delta (H0 + t/2)^2) |F0|`` for ``t`` in ``[0, T]``.

    Returns the largest ratio of the left side to the right side (must be <= 1).
    Grid times above the horizon are rejected.
    """
    T = bound_horizon(sol, delta)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid > T * (1 + 1e-12)):
        raise DomainError(f"grid exceeds the horizon T = {T}")
    Z, X = np.meshgrid(np.asarray(zeta_grid, dtype=complex), np.asarray(xi_grid, dtype=float),
                       indexing="ij")
    worst = 0.0
    f0 = np.abs(sol.F0(Z, X))
    for t in t_grid:
        lhs = np.abs(F_exact(sol, t, Z, X))
        rhs = sol.H0 ** 2 / (delta * (sol.H0 + t / 2) ** 2) * f0
        worst = max(worst, float(np.max(lhs / rhs)))
    return worst


def psi_infty(sol: TransformSolution, zeta, xi):
    """Limit transform ``4 H0^2 / (A zeta + B xi^2 + 2 H0^2)``."""
    den = sol.A * np.asarray(zeta) + sol.B * np.asarray(xi) ** 2 + 2.0 * sol.H0 ** 2
    if np.any(den == 0):
        raise DomainError("pole of the limit transform")
    return 4.0 * sol.H0 ** 2 / den


def rescaled_limit_check(sol: TransformSolution, t_list: Sequence[float], zeta_grid, xi_grid):
    """Max deviation ``|t F(t, zeta/t, xi/sqrt t) - Psi_inf(zeta, xi)|`` per time.

    Returns an array aligned with ``t_list``.
    """
    t_list = np.asarray(t_list, dtype=float)
    if np.any(np.diff(t_list) <= 0) or np.any(t_list <= 0):
        raise DomainError("t_list must be positive and increasing")
    Z, X = np.meshgrid(np.asarray(zeta_grid, dtype=float), np.asarray(xi_grid, dtype=float),
                       indexing="ij")
    ref = psi_infty(sol, Z, X)
    return np.array([float(np.max(np.abs(t * F_exact(sol, t, Z / t, X / math.sqrt(t)) - ref)))
                     for t in t_list])


def limit_profile_moments(sol: TransformSolution, alpha: int, beta: int) -> float:
    """Moment ``int M^alpha |P|^beta phi_inf`` read off the Taylor series of ``Psi_inf``.

    Expanding ``Psi_inf = (4 H0^2 / c) sum_n (-(A zeta + B xi^2)/c)^n`` with
    ``c = 2 H0^2`` and matching ``(-zeta)^alpha (-i xi)^beta / (alpha! beta!)``
    gives ``alpha! beta! C(n, alpha) A^alpha B^(beta/2) 4 H0^2 / c^(n+1)`` with
    ``n = alpha + beta/2``.
    """
    if alpha < 0 or beta < 0 or int(alpha) != alpha or int(beta) != beta:
        raise DomainError("orders must be nonnegative integers")
    if beta % 2:
        raise DomainError("odd impulsion orders are not moments of |P| read from an even transform")
    alpha, beta = int(alpha), int(beta)
    n = alpha + beta // 2
    c = 2.0 * sol.H0 ** 2
    return (math.factorial(alpha) * math.factorial(beta) * comb(n, alpha, exact=True)
            * sol.A ** alpha * sol.B ** (beta // 2) * 4.0 * sol.H0 ** 2 / c ** (n + 1))


# -- real-space limit profile ------------------------------------------------

def _profile_constants(sol: TransformSolution, width: str = "transform"):
    """``(C, a, D)`` of ``C exp(-a m) exp(-p^2/(2 D m)) / sqrt(m)``.

    ``width="transform"`` picks ``D = 2B/A`` (the transform of the profile is
    then exactly ``Psi_inf``); ``width="display"`` picks ``D = B/A`` with the
    prefactor adjusted to keep total mass 2, which is the other candidate.
    """
    a = 2.0 * sol.H0 ** 2 / sol.A
    if width == "transform":
        D = 2.0 * sol.B / sol.A
    elif width == "display":
        D = sol.B / sol.A
    else:
        raise DomainError(f"unknown width choice {width!r}")
    # int C exp(-a m) sqrt(2 pi D) dm = C sqrt(2 pi D) / a must equal 2
    C = 2.0 * a / math.sqrt(2.0 * math.pi * D)
    return C, a, D


def phi_infty_profile(sol: TransformSolution, m, p, width: str = "transform"):
    """Limit profile ``C exp(-a m) exp(-p^2 / (2 D m)) / sqrt(m)`` with ``a = 2 H0^2 / A``.

    With the default width ``D = 2B/A`` and ``C = 4 H0^2 / sqrt(4 pi A B)`` the
    Fourier-Laplace transform equals :func:`psi_infty`.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0):
        raise DomainError("the limit profile is defined for m > 0")
    C, a, D = _profile_constants(sol, width)
    p = np.asarray(p, dtype=float)
    return C * np.exp(-a * m - p * p / (2.0 * D * m)) / np.sqrt(m)


def profile_width_candidates(sol: TransformSolution) -> Dict[str, Dict[str, float]]:
    """Both candidate widths with their mass, ``M^1`` and ``P^2`` moments.

    Moments are analytic: for ``C exp(-a m - p^2/(2Dm))/sqrt(m)`` the integral
    of ``m^i p^2j`` is ``C sqrt(2 pi D) D^j (2j-1)!! Gamma(i+j+1) / a^(i+j+1)``.
    """
    out = {}
    for name in ("transform", "display"):
        C, a, D = _profile_constants(sol, name)
        k = C * math.sqrt(2 * math.pi * D)
        out[name] = {"D": D, "C": C, "mu00": k / a, "mu10": k / a ** 2,
                     "mu02": k * D / a ** 2,
                     "mu02_expected": limit_profile_moments(sol, 0, 2)}
    return out


def profile_transform(sol: TransformSolution, zeta, xi, width: str = "transform",
                      u_max: Optional[float] = None, s_max: Optional[float] = None,
                      panels: int = 24, order: int = 20):
    """Fourier-Laplace transform of :func:`phi_infty_profile` by 2-D quadrature.

    Substituting ``m = u^2`` and ``p = u s`` removes the ``1/sqrt(m)``
    singularity and the shrinking Gaussian width:
    ``int int 2 C u exp(-(a + zeta) u^2) exp(-s^2/(2D)) cos(u s xi) ds du``.
    The domain is truncated to ``u <= u_max`` and ``|s| <= s_max`` where the
    Gaussian factors fall below ``1e-17``; the imaginary part vanishes by
    symmetry in ``s``.  ``zeta`` must be real and ``>= 0``.
    """
    C, a, D = _profile_constants(sol, width)
    if u_max is None:
        u_max = math.sqrt(40.0 / a)
    if s_max is None:
        s_max = math.sqrt(2.0 * D * 40.0)
    u, wu = panel_rule(0.0, u_max, panels, order)
    s, ws = panel_rule(0.0, s_max, panels, order)
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(zeta < 0):
        raise DomainError("zeta must be nonnegative")
    gs = ws * np.exp(-s * s / (2.0 * D))          # half line, doubled below
    out = np.empty((zeta.size, xi.size))
    for k, x in enumerate(xi):
        inner = 2.0 * np.cos(np.outer(u, s) * x) @ gs
        for j, z in enumerate(zeta):
            out[j, k] = np.sum(wu * 2.0 * C * u * np.exp(-(a + z) * u * u) * inner)
    meta = {"u_max": u_max, "s_max": s_max, "panels": panels, "order": order,
            "substitution": "m = u^2, p = u s"}
    return out, meta


# -- self-similar family -------------------------------------------------------

@dataclass(frozen=True)
class SelfSimProfile:
    """Member of the self-similar family fixed by a function ``Phi``.

    ``kind`` is one of ``"zplusone"`` (``Phi(z) = z + 1``), ``"one"``
    (``Phi = 1``), ``"z"`` (``Phi(z) = z``) or ``"custom"``, in which case
    ``phi`` is a vectorized evaluator.
    """

    kind: str = "zplusone"
    phi: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("zplusone", "one", "z", "custom"):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if (self.kind == "custom") != (self.phi is not None):
            raise DomainError("an evaluator is required for custom profiles only")

    def zeta_phi(self, zeta, xi):
        """``zeta Phi(xi^2 / zeta)``, continued to ``zeta = 0`` where closed-form."""
        zeta = np.asarray(zeta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.kind == "zplusone":
            return xi * xi + zeta
        if self.kind == "one":
            return zeta + 0.0 * xi
        if self.kind == "z":
            return xi * xi + 0.0 * zeta
        if np.any(zeta <= 0):
            raise DomainError("custom profiles are evaluated for zeta > 0 only")
        return zeta * np.asarray(self.phi(xi * xi / zeta))


def g_hat(profile: SelfSimProfile, zeta, xi):
    """``2 / (2 zeta Phi(xi^2/zeta) + 1)``."""
    den = 2.0 * profile.zeta_phi(zeta, xi) + 1.0
    if np.any(den == 0):
        raise DomainError("pole of the self-similar transform")
    return 2.0 / den


def selfsim_transform_pde_residual(profile: SelfSimProfile, zeta, xi, h: float = 1e-4):
    """Centred-difference residual of ``zeta G_zeta + (xi/2) G_xi = G - 1/2``, ``G = 1/g_hat``.

    The factor ``1/2`` on the ``xi`` derivative is what the self-similar scaling
    ``(zeta, xi) -> (s zeta, sqrt(s) xi)`` produces, and every
    ``G = zeta Phi(xi^2/zeta) + 1/2`` satisfies it.
    """
    zeta = np.asarray(zeta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(zeta - h <= 0):
        raise DomainError("need zeta > h")

    def G(z, x):
        return 1.0 / g_hat(profile, z, x)

    Gz = (G(zeta + h, xi) - G(zeta - h, xi)) / (2 * h)
    Gx = (G(zeta, xi + h) - G(zeta, xi - h)) / (2 * h)
    return np.abs(zeta * Gz + 0.5 * xi * Gx - G(zeta, xi) + 0.5)


def zplusone_profile(y, x):
    """Real-space inverse of ``g_hat`` for ``Phi(z) = z + 1``.

    ``g(y, x) = exp(-y/2) exp(-x^2/(4y)) / (2 sqrt(pi y))``; it coincides with
    the limit profile of ``H0 = 1, A = B = 4``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("y must be positive")
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * y - x * x / (4.0 * y)) / (2.0 * np.sqrt(np.pi * y))
