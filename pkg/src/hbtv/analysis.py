"""Convergence diagnostics for the HB-TV recursion.

Everything here is a pure function of recorded data: windowed excitation
levels, the gain-matrix bounds that hold under persistent excitation, the
rate constants of the exponential guarantee, the Lyapunov value, and a
log-linear rate fit used to check exponential decay on traces.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .estimators import HbTvHyper

PE_TOL = 1e-8
BOUND_SLACK = 1e-9
DEFAULT_PE_WINDOW = 40


# -- persistent excitation ---------------------------------------------------------


@dataclass
class PeReport:
    window: int
    eps1: float
    eps2: float
    max_phi_norm_sq: float
    window_min: np.ndarray = field(repr=False)
    window_max: np.ndarray = field(repr=False)

    @property
    def is_pe(self) -> bool:
        return self.eps1 > PE_TOL


def pe_metrics(regressors: Sequence[np.ndarray] | np.ndarray, window: int) -> PeReport:
    """Eigenvalue extremes of sum_{i=k-window}^{k-1} phi_i phi_i' over every full window."""
    phis = np.asarray(regressors, dtype=float)
    if phis.ndim == 1:
        phis = phis[:, None]
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(phis) < window:
        raise ValueError(f"window {window} is longer than the sequence ({len(phis)} regressors)")
    # (num_windows, dim, window) -> direct sums, no running-sum drift
    win = np.lib.stride_tricks.sliding_window_view(phis, window, axis=0)
    grams = np.einsum("kiw,kjw->kij", win, win)
    eig = np.linalg.eigvalsh(grams)
    # a PSD sum can come out at -1e-16 in floating point
    lo = np.maximum(eig[:, 0], 0.0)
    hi = eig[:, -1]
    return PeReport(
        window=window,
        eps1=float(lo.min()),
        eps2=float(hi.max()),
        max_phi_norm_sq=float(np.max(np.einsum("ki,ki->k", phis, phis))),
        window_min=lo,
        window_max=hi,
    )


# -- gain bounds ----------------------------------------------------------------------


@dataclass
class FMaxBound:
    value: float | None
    excitation_ok: bool
    initial_gain_ok: bool | None
    reason: str = ""

    @property
    def available(self) -> bool:
        return self.value is not None


def f_max_bound(hyper: HbTvHyper, pe: PeReport, gain0: np.ndarray | None = None) -> FMaxBound:
    """Upper bound F_max with F_k <= F_max I under persistent excitation.

    For lambda > 1 the bound needs
    ``kappa*eps1*(lambda-1)/(lambda*(lambda**T-1)) > (eta-kappa)*max|phi|^2``
    and, when ``gain0`` is given, ``F_0 <= F_max / lambda**(T-1)``.  With no
    forgetting (lambda = 1) the gain never grows and the bound is the largest
    eigenvalue of F_0.  A failed precondition yields ``value=None``.
    """
    lam, kappa, eta = hyper.lam, hyper.kappa, hyper.eta
    if lam == 1:
        if gain0 is None:
            return FMaxBound(None, True, None, "lambda = 1 needs the initial gain")
        return FMaxBound(float(np.linalg.eigvalsh(gain0)[-1]), True, True, "no forgetting: largest eigenvalue of F_0")
    if lam < 1:
        return FMaxBound(None, False, None, "lambda < 1")
    T = pe.window
    excitation = kappa * pe.eps1 * (lam - 1) / (lam * (lam**T - 1))
    leak = (eta - kappa) * pe.max_phi_norm_sq
    inv = excitation - leak
    if not inv > 0:
        return FMaxBound(
            None, False, None, f"excitation term {excitation:.4g} does not exceed (eta-kappa)*max|phi|^2 = {leak:.4g}"
        )
    f_max = 1.0 / inv
    if gain0 is None:
        return FMaxBound(f_max, True, None)
    init_ok = bool(np.linalg.eigvalsh(gain0)[-1] <= f_max / lam ** (T - 1))
    if not init_ok:
        return FMaxBound(None, True, False, f"F_0 exceeds F_max / lambda^(T-1) = {f_max / lam ** (T - 1):.4g}")
    return FMaxBound(f_max, True, True)


def f_min_bound(hyper: HbTvHyper, pe: PeReport, gain_at_window_end: np.ndarray) -> float:
    """Lower bound F_min with F_k >= F_min I, for lambda > 1.

    ``gain_at_window_end`` is F_{T-1}, the gain after T-1 updates.
    """
    lam = hyper.lam
    if not lam > 1:
        raise ValueError("the lower gain bound needs lambda > 1")
    F = np.atleast_2d(np.asarray(gain_at_window_end, dtype=float))
    eig = np.linalg.eigvalsh(F)
    if eig[0] <= 0:
        raise ValueError("F_{T-1} is singular")
    inv = 1.0 / eig[0] + hyper.kappa * pe.eps2 / (lam * (1 - lam ** (-pe.window)))
    return 1.0 / inv


def inverse_gain_update(gain_prev: np.ndarray, phi: np.ndarray, hyper: HbTvHyper) -> np.ndarray:
    """F_k^{-1} from F_{k-1} via the matrix inversion lemma.

    F_k^{-1} = F_{k-1}^{-1}/lambda + (kappa/lambda) phi phi' / (N_k - kappa phi' F_{k-1} phi)
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    s = float(phi @ gain_prev @ phi)
    N = 1.0 + hyper.eta * s
    inv_prev = np.linalg.inv(gain_prev)
    return inv_prev / hyper.lam + (hyper.kappa / hyper.lam) * np.outer(phi, phi) / (N - hyper.kappa * s)


# -- rate constants and the Lyapunov function ------------------------------------


@dataclass
class RateConstants:
    c1: float
    c2: float | None
    mu: float | None
    f_max: float
    f_min: float | None = None

    @property
    def guaranteed(self) -> bool:
        return self.c2 is not None and self.c1 >= 0 and self.c2 >= 0


def rate_constants(hyper: HbTvHyper, f_max: float, f_min: float | None = None) -> RateConstants:
    if not f_max > 0:
        raise ValueError("F_max must be positive")
    lam, kappa, beta, eta = hyper.lam, hyper.kappa, hyper.beta, hyper.eta
    c1 = (1 - 1 / lam) / f_max
    if eta == kappa:
        return RateConstants(c1, None, None, f_max, f_min)
    bracket = 1 / lam + kappa / (lam * (eta - kappa)) + 4 * lam / eta**2
    c2 = (1 - (1 - beta) ** 2 * bracket) / f_max
    return RateConstants(c1, c2, min(c1, c2), f_max, f_min)


def lyapunov_value(vartheta, theta, theta_star, gain_prev) -> float:
    """V = (vartheta - theta*)' F^-1 (vartheta - theta*) + (theta - vartheta)' F^-1 (theta - vartheta)."""
    a = np.atleast_1d(np.asarray(vartheta, dtype=float) - theta_star)
    b = np.atleast_1d(np.asarray(theta, dtype=float) - vartheta)
    F = np.atleast_2d(np.asarray(gain_prev, dtype=float))
    try:
        sol = np.linalg.solve(F, np.column_stack([a, b]))
    except np.linalg.LinAlgError as exc:
        raise ValueError("gain matrix is singular") from exc
    return float(a @ sol[:, 0] + b @ sol[:, 1])


def joint_error_sq(vartheta, theta, theta_star) -> float:
    """|vartheta - theta*|^2 + |theta - vartheta|^2."""
    vartheta = np.asarray(vartheta, dtype=float)
    return float(np.sum((vartheta - theta_star) ** 2) + np.sum((np.asarray(theta) - vartheta) ** 2))


# -- trace checks -------------------------------------------------------------------


@dataclass
class RateFit:
    rate: float
    r_squared: float
    intercept: float


def exp_rate_fit(values: Sequence[float] | np.ndarray, burn_in: int = DEFAULT_PE_WINDOW) -> RateFit:
    """Least-squares line through (k, ln v_k) for k >= burn_in; rate = -slope."""
    v = np.asarray(values, dtype=float)[burn_in:]
    if len(v) < 3:
        raise ValueError(f"need at least 3 points after burn-in, got {len(v)}")
    if np.any(~(v > 0)):
        raise ValueError("rate fit needs strictly positive values")
    k = np.arange(burn_in, burn_in + len(v), dtype=float)
    logv = np.log(v)
    slope, intercept = np.polyfit(k, logv, 1)
    resid = logv - (slope * k + intercept)
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(-float(slope), r2, float(intercept))


@dataclass
class BoundCheck:
    upper_violations: list[int]
    lower_violations: list[int]
    upper_checked: bool
    lower_checked: bool

    @property
    def ok(self) -> bool:
        return not self.upper_violations and not self.lower_violations


def check_bounds(
    gain_max: Sequence[float],
    gain_min: Sequence[float],
    f_max: float | None,
    f_min: float | None,
    slack: float = BOUND_SLACK,
) -> BoundCheck:
    """Indices where sigma_max(F_k) > F_max or sigma_min(F_k) < F_min.

    An unavailable bound (None) is skipped rather than failed.
    """
    gmax = np.asarray(gain_max, dtype=float)
    gmin = np.asarray(gain_min, dtype=float)
    upper = [] if f_max is None else np.flatnonzero(gmax > f_max * (1 + slack)).tolist()
    lower = [] if f_min is None else np.flatnonzero(gmin < f_min * (1 - slack)).tolist()
    return BoundCheck(upper, lower, f_max is not None, f_min is not None)
