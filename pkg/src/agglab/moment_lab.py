"""Moment identities, the closed gamma = 2 hierarchy, and bound checkers.

Moments are stored in :class:`MomentSeries` keyed by ``(alpha, beta)`` for
``M_{alpha,beta} = int m^alpha |p|^beta f``.  For kernels depending on the
impulsion only, the pure impulsion moments ``M_k`` of the mass-integrated
density are the ``(0, k)`` entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from numba import njit
from scipy.special import comb

from .errors import ConvergenceError, DomainError

Key = Tuple[float, float]


@dataclass
class MomentSeries:
    """Moments ``M_{alpha,beta}(t)`` on a time grid.

    ``stderr`` is present exactly when ``provenance == "monte-carlo"``;
    ``runs`` optionally keeps the per-run values with shape (runs, times, keys).
    """

    t_grid: np.ndarray
    entries: Dict[Key, np.ndarray]
    stderr: Optional[Dict[Key, np.ndarray]] = None
    provenance: str = "ode"
    metadata: dict = field(default_factory=dict)
    runs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.entries = {_key(k): np.asarray(v, dtype=float) for k, v in self.entries.items()}
        if self.provenance not in ("monte-carlo", "ode", "closed-form"):
            raise DomainError(f"unknown provenance {self.provenance!r}")
        for k, v in self.entries.items():
            if v.shape != self.t_grid.shape:
                raise DomainError(f"entry {k} has shape {v.shape}, grid has {self.t_grid.shape}")
        if self.stderr is not None:
            self.stderr = {_key(k): np.asarray(v, dtype=float) for k, v in self.stderr.items()}
            if set(self.stderr) != set(self.entries):
                raise DomainError("stderr keys must match entry keys")
        if (self.stderr is not None) != (self.provenance == "monte-carlo"):
            raise DomainError("stderr must be given exactly for monte-carlo series")

    def __getitem__(self, key) -> np.ndarray:
        return self.entries[_key(key)]

    def __contains__(self, key) -> bool:
        return _key(key) in self.entries

    def se(self, key) -> np.ndarray:
        if self.stderr is None:
            return np.zeros_like(self.t_grid)
        return self.stderr[_key(key)]

    @property
    def n_runs(self) -> int:
        return int(self.metadata.get("n_runs", 0))

    def rows(self):
        """Rows ``(t, alpha, beta, value, stderr, n_runs)`` ordered by key then time."""
        out = []
        for key in sorted(self.entries):
            vals = self.entries[key]
            se = self.stderr[key] if self.stderr is not None else None
            for i, t in enumerate(self.t_grid):
                out.append((float(t), key[0], key[1], float(vals[i]),
                            None if se is None else float(se[i]),
                            self.n_runs if se is not None else None))
        return out


def _key(k) -> Key:
    a, b = k
    return (float(a), float(b))


@dataclass
class BoundReport:
    """Outcome of checking one claimed bound at every grid time.

    ``slack`` is ``allowed - measured`` in the direction of the claim (negative
    means violated) and ``ratio`` is ``measured / bound``.
    """

    claim: str
    times: np.ndarray
    passed: np.ndarray
    slack: np.ndarray
    ratio: np.ndarray
    tolerance: dict

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def failures(self) -> List[Tuple[float, float]]:
        return [(float(t), float(s)) for t, s, p in zip(self.times, self.slack, self.passed)
                if not p]

    def __str__(self):
        state = "pass" if self.ok else f"FAIL at {self.failures}"
        return f"{self.claim}: {state}"


def _upper(claim, t, value, se, bound, rel_tol, nsigma):
    allowed = bound * (1.0 + rel_tol) + nsigma * se
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound != 0, value / bound, np.inf)
    return BoundReport(claim, t, value <= allowed, allowed - value, ratio,
                       {"rel_tol": rel_tol, "nsigma": nsigma})


def _lower(claim, t, value, se, bound, rel_tol, nsigma):
    allowed = bound * (1.0 - rel_tol) - nsigma * se
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound != 0, value / bound, np.inf)
    return BoundReport(claim, t, value >= allowed, value - allowed, ratio,
                       {"rel_tol": rel_tol, "nsigma": nsigma})


# --------------------------------------------------------------------------
# sphere constant and empirical moment drift

def sphere_constant(d: int) -> float:
    """Mean of ``sigma_1^2`` over the unit sphere of R^d, i.e. ``1/d``."""
    if d not in (1, 2, 3):
        raise DomainError(f"dimension must be 1, 2 or 3, got {d}")
    return 1.0 / d


def _abs_pow(x, a):
    if a == 0:
        return np.ones_like(x)
    return x ** a


def moment_drift(k, sys, alpha: float) -> float:
    """Empirical right-hand side of ``dM_alpha/dt`` for a particle system.

    Computes ``(1/2) (1/n0^2) sum_{i != j} a_ij [|p_i+p_j|^alpha - |p_i|^alpha
    - |p_j|^alpha]`` over the live particles of ``sys``.
    """
    m = np.asarray(sys.live_m, dtype=float)
    p = np.asarray(sys.live_p, dtype=float)
    if len(m) < 2:
        return 0.0
    pn = np.sqrt(np.einsum("ij,ij->i", p, p))
    rates = k.matrix(m, p)
    s = p[:, None, :] + p[None, :, :]
    sn = np.sqrt(np.einsum("ijk,ijk->ij", s, s))
    delta = _abs_pow(sn, alpha) - _abs_pow(pn[:, None], alpha) - _abs_pow(pn[None, :], alpha)
    np.fill_diagonal(rates, 0.0)
    np.fill_diagonal(delta, 0.0)
    return 0.5 * float(np.sum(rates * delta)) / sys.n0 ** 2


# --------------------------------------------------------------------------
# gamma = 2 closed hierarchy

@dataclass
class Gamma2State:
    """Even moments ``(M_0, M_2, ..., M_2B)`` for the kernel ``|p - p'|^2``.

    ``k_d`` defaults to :func:`sphere_constant`; overriding it is meant for
    fault injection.
    """

    d: int
    values: np.ndarray
    k_d: Optional[float] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).copy()
        if self.k_d is None:
            self.k_d = sphere_constant(self.d)
        if len(self.values) < 2:
            raise DomainError("need at least (M_0, M_2)")

    @property
    def B(self) -> int:
        return len(self.values) - 1

    def violations(self) -> List[str]:
        """Positivity and Cauchy-Schwarz chain failures of the current values."""
        v = self.values
        out = [f"M_{2 * i} <= 0" for i in range(len(v)) if not v[i] > 0]
        for b in range(1, self.B):
            if v[b] ** 2 > v[b - 1] * v[b + 1] * (1 + 1e-12):
                out.append(f"M_{2 * b}^2 > M_{2 * b - 2} M_{2 * b + 2}")
        return out


def _binomial_table(B):
    n = 2 * B + 1
    return np.array([[comb(i, j, exact=True) for j in range(n)] for i in range(n)], dtype=float)


@njit(cache=True)
def _rhs(v, recursion, k, binom, out):
    # M_0, M_2, M_4 always use the general-dimension equations (with k = 1 in
    # d = 1 they coincide with the recursion); higher orders use the recursion.
    B = v.shape[0] - 1
    out[0] = -v[1] * v[0]
    out[1] = -2.0 * k * v[1] * v[1]
    if B >= 2:
        out[2] = (2.0 - 4.0 * k) * v[1] * v[2]
    if not recursion:
        return
    for a in range(3, B + 1):
        out[a] = _recursion_term(v, a, binom)


@njit(cache=True)
def _recursion_term(v, a, binom):
    s = 0.0
    for b in range(1, a):
        s += binom[2 * a, 2 * b] * v[b] * v[a + 1 - b]
    for b in range(0, a):
        s -= binom[2 * a, 2 * b + 1] * v[b + 1] * v[a - b]
    return s


def d1_recursion(values, alpha: int) -> float:
    """Right-hand side of ``dM_{2 alpha}/dt`` from the dimension-1 binomial recursion.

    Only ``M_0 .. M_{2 alpha}`` enter; ``alpha >= 1``.
    """
    v = np.asarray(values, dtype=float)
    if alpha < 1 or len(v) < alpha + 1:
        raise DomainError("recursion needs alpha >= 1 and moments up to M_{2 alpha}")
    return float(_recursion_term(v, int(alpha), _binomial_table(len(v) - 1)))


@njit(cache=True)
def _rk4(v0, dt, nsteps, record_every, recursion, k, binom):
    n = v0.shape[0]
    nrec = nsteps // record_every + 1
    rec = np.empty((nrec, n))
    v = v0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    rec[0] = v
    bad = -1
    for step in range(1, nsteps + 1):
        _rhs(v, recursion, k, binom, k1)
        for i in range(n):
            tmp[i] = v[i] + 0.5 * dt * k1[i]
        _rhs(tmp, recursion, k, binom, k2)
        for i in range(n):
            tmp[i] = v[i] + 0.5 * dt * k2[i]
        _rhs(tmp, recursion, k, binom, k3)
        for i in range(n):
            tmp[i] = v[i] + dt * k3[i]
        _rhs(tmp, recursion, k, binom, k4)
        for i in range(n):
            v[i] = v[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if bad < 0:
            for i in range(n):
                if not v[i] > 0.0:
                    bad = step
            for b in range(1, n - 1):
                if v[b] * v[b] > v[b - 1] * v[b + 1] * (1.0 + 1e-12):
                    bad = step
        if step % record_every == 0:
            rec[step // record_every] = v
    return rec, bad


def _mode(state: Gamma2State) -> bool:
    if state.B > 2:
        if state.d != 1:
            raise DomainError("moments beyond M_4 close only in dimension 1")
        return True
    return False


def gamma2_rhs(state: Gamma2State) -> np.ndarray:
    """Time derivative of ``(M_0, ..., M_2B)`` under the kernel ``|p - p'|^2``.

    For ``B <= 2`` the general-dimension equations with constant ``k_d`` are
    used; for ``B > 2`` (dimension 1 only) the binomial recursion.
    """
    rec = _mode(state)
    out = np.empty_like(state.values)
    _rhs(state.values, rec, float(state.k_d), _binomial_table(state.B), out)
    return out


def integrate_gamma2(state0: Gamma2State, t_end: float, dt: float,
                     record_every: int = 1, rtol: float = 1e-8) -> MomentSeries:
    """Integrate the closed hierarchy with fixed-step classical RK4.

    The integration is repeated with ``dt/2``; if the two runs differ by more
    than ``rtol`` (relative) at any recorded time a :class:`ConvergenceError`
    is raised.  The returned values come from the finer run, sampled every
    ``record_every`` steps of size ``dt``.
    """
    nsteps = int(round(t_end / dt))
    if nsteps < 1 or abs(nsteps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise DomainError("t_end must be a positive integer multiple of dt")
    if nsteps % record_every:
        raise DomainError("record_every must divide the number of steps")
    bad0 = state0.violations()
    if bad0:
        raise DomainError(f"invalid initial moments: {bad0}")
    rec = _mode(state0)
    binom = _binomial_table(state0.B)
    v0 = state0.values.astype(float)
    k = float(state0.k_d)
    coarse, bad_c = _rk4(v0, dt, nsteps, record_every, rec, k, binom)
    fine, bad_f = _rk4(v0, dt / 2, 2 * nsteps, 2 * record_every, rec, k, binom)
    if bad_c >= 0 or bad_f >= 0:
        step = bad_c if bad_c >= 0 else bad_f
        raise ConvergenceError(f"positivity / Cauchy-Schwarz chain broken at step {step}")
    err = np.max(np.abs(coarse - fine) / np.abs(fine))
    if not err < rtol:
        raise ConvergenceError(f"step doubling difference {err:.3e} exceeds {rtol:.1e}")
    t = np.arange(fine.shape[0]) * (dt * record_every)
    entries = {(0.0, 2.0 * q): fine[:, q] for q in range(state0.B + 1)}
    meta = {"d": state0.d, "k_d": k, "dt": dt, "method": "rk4", "step_doubling_error": float(err)}
    return MomentSeries(t, entries, None, "ode", meta)


def gamma2_closed_form(M0: float, M2: float, M4: float, k_d: float, t) -> Dict[str, np.ndarray]:
    """Exact ``M_0, M_2, M_4`` written with ``s = 1 + 2 k_d M_2(0) t``.

    ``M_0 = M_0(0) s^(-1/(2k_d))``, ``M_2 = M_2(0)/s`` and
    ``M_4 = M_4(0) s^(1/k_d - 2)``.
    """
    t = np.asarray(t, dtype=float)
    s = 1.0 + 2.0 * k_d * M2 * t
    return {"M0": M0 * s ** (-1.0 / (2.0 * k_d)), "M2": M2 / s,
            "M4": M4 * s ** (1.0 / k_d - 2.0)}


def m6_closed_form(M2: float, M4: float, M6: float, t) -> np.ndarray:
    """Exact ``M_6(t)`` in dimension 1.

    With ``s = 1 + 2 M_2(0) t``:
    ``M_6 = (M_6(0) - M_4(0)^2/M_2(0)) s^(3/2) + (M_4(0)^2/M_2(0)) / s``.
    """
    s = 1.0 + 2.0 * M2 * np.asarray(t, dtype=float)
    c = M4 * M4 / M2
    return (M6 - c) * s ** 1.5 + c / s


# --------------------------------------------------------------------------
# bound checks

def check_hs_bound(series: MomentSeries, A_inv: float, rel_tol: float = 0.05,
                   nsigma: float = 3.0) -> BoundReport:
    """Hard-sphere decay ``M_{-1/3,1}(t) <= 1/(A + t/4)`` with ``A = 1/A_inv``."""
    key = (-1.0 / 3.0, 1.0)
    if series.stderr is None:
        raise DomainError("hard-sphere bound check needs Monte Carlo standard errors")
    t = series.t_grid
    bound = 1.0 / (1.0 / A_inv + t / 4.0)
    return _upper("M_{-1/3,1}(t) <= 1/(A + t/4)", t, series[key], series.se(key), bound,
                  rel_tol, nsigma)


def _check_kernel_tag(series: MomentSeries, gamma: float):
    tag = series.metadata.get("kernel")
    if tag is None:
        return
    if tag.get("type") != "impulsion_power" or float(tag.get("gamma", -1)) != gamma:
        raise DomainError(f"series was produced with kernel {tag}, expected |p-p'|^{gamma}")
    d = series.metadata.get("d")
    if d is not None and d != 1:
        raise DomainError("gamma = 1 brackets hold in dimension 1 only")


def check_monotone(series: MomentSeries, key, label: str, rel_tol: float = 0.05,
                   nsigma: float = 3.0) -> BoundReport:
    """``M(t_{i+1}) <= M(t_i)`` within ``rel_tol`` and ``nsigma`` standard errors."""
    v = series[key]
    se = series.se(key)
    t = series.t_grid[1:]
    return _upper(f"{label} non-increasing", t, v[1:], se[1:] + se[:-1], v[:-1], rel_tol, nsigma)


def check_gamma1_brackets(series: MomentSeries, M_at_0: Mapping[int, float],
                          rel_tol: float = 0.05, nsigma: float = 3.0) -> List[BoundReport]:
    """Two-sided bounds on ``M_0..M_3`` for the kernel ``|p - p'|`` in dimension 1.

    ``M_at_0`` maps the order ``k`` to ``M_k(0)``.  Claims whose moment is
    absent from ``series`` are skipped.
    """
    _check_kernel_tag(series, 1.0)
    t = series.t_grid
    m0, m1 = M_at_0.get(0), M_at_0[1]
    reports = []
    if (0, 1) in series:
        v, se = series[(0, 1)], series.se((0, 1))
        reports.append(_lower("M_1(t) >= 1/(M_1(0)^-1 + t)", t, v, se, 1 / (1 / m1 + t),
                              rel_tol, nsigma))
        reports.append(_upper("M_1(t) <= 1/(M_1(0)^-1 + t/2)", t, v, se, 1 / (1 / m1 + t / 2),
                              rel_tol, nsigma))
    if (0, 0) in series and m0 is not None:
        v, se = series[(0, 0)], series.se((0, 0))
        lo = m0 / (1 + m1 * t / 2) ** 2
        if 3 in M_at_0:
            c = M_at_0[3] ** (1 / 3)
            lo = np.maximum(lo, 2 ** 1.5 * m0 / (2 + 3 * c * t) ** 1.5)
        reports.append(_lower("M_0(t) >= lower bracket", t, v, se, lo, rel_tol, nsigma))
        reports.append(_upper("M_0(t) <= M_0(0)/(1 + M_1(0) t)^(1/2)", t, v, se,
                              m0 / np.sqrt(1 + m1 * t), rel_tol, nsigma))
    for order in (2, 3):
        key = (0, order)
        if key in series and order in M_at_0:
            v, se = series[key], series.se(key)
            mk = M_at_0[order]
            reports.append(_lower(f"M_{order}(t) >= M_{order}(0)/(1 + M_1(0) t/2)^2", t, v, se,
                                  mk / (1 + m1 * t / 2) ** 2, rel_tol, nsigma))
            reports.append(_upper(f"M_{order}(t) <= M_{order}(0)", t, v, se,
                                  np.full_like(t, mk), rel_tol, nsigma))
            reports.append(check_monotone(series, key, f"M_{order}", rel_tol, nsigma))
    return reports


def check_gamma_bracket_scaling(series: MomentSeries, key=None, max_ratio: float = 10.0) -> BoundReport:
    """Check that ``(1/M(t) - 1/M(0))/t`` stays in a fixed positive interval.

    Without explicit constants, the two-sided decay bracket
    ``k_2 t <= 1/M(t) - 1/M(0) <= k_1 t`` is tested as ``min r > 0`` and
    ``max r / min r <= max_ratio`` over the grid times ``t > 0``.
    """
    if key is None:
        if len(series.entries) != 1:
            raise DomainError("series holds several moments; pass the key to check")
        key = next(iter(series.entries))
    v = series[key]
    if np.any(v == 0):
        raise DomainError("moment vanished; the rate is undefined")
    t = series.t_grid
    mask = t > 0
    r = (1.0 / v[mask] - 1.0 / v[0]) / t[mask]
    rmin, rmax = float(np.min(r)), float(np.max(r))
    ok = rmin > 0 and rmax / rmin <= max_ratio
    ratio = r / rmin if rmin > 0 else np.full_like(r, np.inf)
    passed = np.full(r.shape, ok)
    return BoundReport("k_2 t <= 1/M(t) - 1/M(0) <= k_1 t", t[mask], passed,
                       max_ratio - ratio, r, {"max_ratio": max_ratio})
