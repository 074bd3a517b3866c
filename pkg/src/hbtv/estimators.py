"""Online update laws for y_k = phi_k @ theta_star.

Four estimators share a uniform ``step(phi, y) -> (e_y, diagnostics)``
interface:

* ``HbTvEstimator``: heavy-ball momentum with a time-varying gain matrix F_k
* ``NgdEstimator``: normalized gradient descent
* ``HbConstEstimator``: heavy ball with a constant scalar rate
* ``RlsFfEstimator``: recursive least squares with a forgetting factor

The per-law ``*_step`` functions are pure: they return a fresh state and the
a priori prediction error ``phi @ theta_k - y``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

# relative eigenvalue tolerance before a gain matrix counts as indefinite
GAIN_PD_TOL = 1e-12


class EstimatorError(ArithmeticError):
    pass


class NumericOverflowError(EstimatorError):
    def __init__(self, where: str):
        super().__init__(f"non-finite value in {where}")
        self.where = where


class GainDegeneracyError(EstimatorError):
    def __init__(self, min_eig: float, max_eig: float):
        super().__init__(
            f"gain matrix lost positive definiteness (eigenvalues in [{min_eig:.3e}, {max_eig:.3e}])"
        )
        self.min_eig = min_eig
        self.max_eig = max_eig


class HyperparameterWarning(UserWarning):
    pass


def _finite(x, where: str):
    if not np.all(np.isfinite(x)):
        raise NumericOverflowError(where)
    return x


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _check_pd(gain: np.ndarray) -> None:
    eig = np.linalg.eigvalsh(gain)
    if eig[-1] <= 0 or eig[0] < -GAIN_PD_TOL * eig[-1]:
        raise GainDegeneracyError(float(eig[0]), float(eig[-1]))


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


# -- HB-TV -------------------------------------------------------------------


@dataclass(frozen=True)
class HbTvHyper:
    lam: float
    kappa: float
    beta: float
    eta: float


@dataclass
class HbTvState:
    theta: np.ndarray
    vartheta: np.ndarray
    gain: np.ndarray
    normalizer: float = 1.0

    @classmethod
    def initial(cls, dim: int, gain0=100.0, theta0=None, vartheta0=None) -> HbTvState:
        theta = np.zeros(dim) if theta0 is None else _vec(theta0).copy()
        vartheta = theta.copy() if vartheta0 is None else _vec(vartheta0).copy()
        return cls(theta, vartheta, initial_gain(dim, gain0))


def initial_gain(dim: int, gain0) -> np.ndarray:
    """Scalar -> scalar * I; matrices are validated as symmetric positive definite."""
    g = np.asarray(gain0, dtype=float)
    if g.ndim == 0:
        if not g > 0:
            raise ValueError("initial gain must be positive")
        return float(g) * np.eye(dim)
    if g.shape != (dim, dim):
        raise ValueError(f"initial gain has shape {g.shape}, expected {(dim, dim)}")
    if not np.allclose(g, g.T):
        raise ValueError("initial gain must be symmetric")
    if np.linalg.eigvalsh(g)[0] <= 0:
        raise ValueError("initial gain must be positive definite")
    return g.copy()


def hbtv_step(state: HbTvState, hyper: HbTvHyper, phi, y: float) -> tuple[HbTvState, float]:
    phi = _vec(phi)
    F = state.gain
    Fphi = F @ phi
    # 1. normalizer from the previous gain
    N = _finite(1.0 + hyper.eta * float(phi @ Fphi), "normalizer N_k")
    # 2. gain update
    gain = _symmetrize(hyper.lam * (F - hyper.kappa * np.outer(Fphi, Fphi) / N))
    _finite(gain, "gain update F_k")
    _check_pd(gain)
    e_y = float(phi @ state.theta) - y
    # 3. momentum mixing, 4. gradient at the mixed estimate, 5. filtered update
    theta = _finite(state.theta - hyper.beta * (state.theta - state.vartheta), "theta update")
    grad = phi * (float(phi @ theta) - y)
    vartheta = _finite(state.vartheta - gain @ grad / N, "vartheta update")
    return HbTvState(theta, vartheta, gain, N), e_y


def eta_lower_bound(lam: float, kappa: float, beta: float) -> float:
    """Smallest eta for which the exponential-convergence guarantee applies.

    Returns inf when kappa >= 2*lam.  The momentum term only enters when
    lam > (1 - beta)**2.
    """
    if kappa >= 2 * lam:
        return math.inf
    first = (lam * (kappa + 2 * lam) + lam * math.sqrt(5 * kappa**2 - 4 * lam * kappa + 4 * lam**2)) / (
        2 * lam - kappa
    )
    mom = (1 - beta) ** 2
    second = 4 * lam * mom / (lam - mom) if lam > mom else -math.inf
    return max(first, second)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    hard: bool = True


@dataclass
class FeasibilityReport:
    hyper: HbTvHyper
    checks: list[Check]
    eta_bound: float

    @property
    def runnable(self) -> bool:
        """All hard constraints hold (the recursion is well defined)."""
        return all(c.passed for c in self.checks if c.hard)

    @property
    def theorem_ok(self) -> bool:
        """Every condition of the convergence theorem holds, including the eta bound."""
        return all(c.passed for c in self.checks)

    @property
    def warnings(self) -> list[str]:
        return [c.detail for c in self.checks if not c.hard and not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else ("FAIL" if c.hard else "WARN")
            out.append(f"  [{status}] {c.name}: {c.detail}")
        return out


def validate_hyperparameters(hyper: HbTvHyper, warn: bool = False) -> FeasibilityReport:
    """Check the HB-TV hyperparameters against the convergence conditions.

    A violated eta lower bound is a soft failure: the recursion still runs,
    only the guarantee is lost.  Pass ``warn=True`` to also emit a
    HyperparameterWarning in that case.
    """
    lam, kappa, beta, eta = hyper.lam, hyper.kappa, hyper.beta, hyper.eta
    if any(math.isnan(v) for v in (lam, kappa, beta, eta)):
        raise ValueError(f"NaN in hyperparameters {hyper}")
    bound = eta_lower_bound(lam, kappa, beta)
    checks = [
        Check("lambda >= 1", lam >= 1, f"lambda = {lam:.6g}"),
        Check("0 < kappa < 2*lambda", 0 < kappa < 2 * lam, f"kappa = {kappa:.6g}, 2*lambda = {2 * lam:.6g}"),
        Check("0 < beta < 2", 0 < beta < 2, f"beta = {beta:.6g}"),
        Check("eta >= kappa", eta >= kappa, f"eta = {eta:.6g}, kappa = {kappa:.6g}"),
        Check(
            "eta >= convergence bound",
            eta >= bound,
            f"eta = {eta:.6g}, bound = {bound:.6g}",
            hard=False,
        ),
    ]
    report = FeasibilityReport(hyper, checks, bound)
    if warn and report.runnable and not report.theorem_ok:
        warnings.warn(
            f"eta = {eta:.6g} is below the convergence bound {bound:.6g}; no rate guarantee",
            HyperparameterWarning,
            stacklevel=2,
        )
    return report


# -- RLS with forgetting -------------------------------------------------------


@dataclass
class RlsFfState:
    theta: np.ndarray
    cov: np.ndarray
    forgetting: float
    normalizer: float = 1.0

    def __post_init__(self):
        if not 0 < self.forgetting <= 1:
            raise ValueError(f"forgetting factor must lie in (0, 1], got {self.forgetting}")


def rlsff_step(state: RlsFfState, phi, y: float) -> tuple[RlsFfState, float]:
    phi = _vec(phi)
    P = state.cov
    lb = state.forgetting
    Pphi = P @ phi
    denom = _finite(lb + float(phi @ Pphi), "normalizer")
    e_y = float(phi @ state.theta) - y
    theta = _finite(state.theta - Pphi * e_y / denom, "theta update")
    cov = _symmetrize(P / lb - np.outer(Pphi, Pphi) / denom)
    _finite(cov, "covariance update P_k")
    _check_pd(cov)
    return RlsFfState(theta, cov, lb, denom), e_y


# -- normalized gradient descent and constant heavy ball -----------------------


@dataclass
class NgdState:
    theta: np.ndarray
    rate: float
    normalizer: float = 1.0

    def __post_init__(self):
        if not 0 < self.rate < 2:
            raise ValueError(f"NGD rate must lie in (0, 2), got {self.rate}")


def ngd_step(state: NgdState, phi, y: float) -> tuple[NgdState, float]:
    phi = _vec(phi)
    N = 1.0 + float(phi @ phi)
    e_y = float(phi @ state.theta) - y
    theta = _finite(state.theta - state.rate * phi * e_y / N, "theta update")
    return NgdState(theta, state.rate, N), e_y


@dataclass
class HbConstState:
    theta: np.ndarray
    theta_prev: np.ndarray
    rate: float
    momentum: float
    normalizer: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"heavy-ball rate must be > 0, got {self.rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"heavy-ball momentum must lie in [0, 1), got {self.momentum}")


def hb_const_step(state: HbConstState, phi, y: float) -> tuple[HbConstState, float]:
    phi = _vec(phi)
    N = 1.0 + float(phi @ phi)
    e_y = float(phi @ state.theta) - y
    theta = state.theta - state.rate * phi * e_y / N + state.momentum * (state.theta - state.theta_prev)
    _finite(theta, "theta update")
    return HbConstState(theta, state.theta.copy(), state.rate, state.momentum, N), e_y


# -- uniform interface ---------------------------------------------------------


@dataclass(frozen=True)
class StepDiagnostics:
    e_y: float
    normalizer: float
    gain_max: float
    gain_min: float


class OnlineEstimator:
    """Mutable wrapper around one update law.

    ``theta`` is the reported estimate, ``vartheta`` the companion state
    (equal to ``theta`` for laws without one) and ``gain`` the matrix
    learning rate.  Together they define a Lyapunov-style value
    (vartheta - theta*)' G^-1 (vartheta - theta*) + (theta - vartheta)' G^-1 (theta - vartheta).
    """

    kind = ""

    def __init__(self, name: str, state):
        self.name = name
        self.state = state
        self.steps = 0

    def _advance(self, phi, y):
        raise NotImplementedError

    def step(self, phi, y: float) -> tuple[float, StepDiagnostics]:
        # the update laws check for non-finite values themselves
        with np.errstate(over="ignore", invalid="ignore"):
            self.state, e_y = self._advance(phi, float(y))
        self.steps += 1
        eig = np.linalg.eigvalsh(self.gain)
        return e_y, StepDiagnostics(e_y, float(self.state.normalizer), float(eig[-1]), float(eig[0]))

    @property
    def theta(self) -> np.ndarray:
        return self.state.theta

    @property
    def vartheta(self) -> np.ndarray:
        return self.state.theta

    @property
    def gain(self) -> np.ndarray:
        raise NotImplementedError


class HbTvEstimator(OnlineEstimator):
    kind = "hbtv"

    def __init__(self, name: str, dim: int, hyper: HbTvHyper, gain0=100.0, theta0=None, vartheta0=None):
        super().__init__(name, HbTvState.initial(dim, gain0, theta0, vartheta0))
        self.hyper = hyper

    def _advance(self, phi, y):
        return hbtv_step(self.state, self.hyper, phi, y)

    @property
    def vartheta(self):
        return self.state.vartheta

    @property
    def gain(self):
        return self.state.gain


class RlsFfEstimator(OnlineEstimator):
    kind = "rlsff"

    def __init__(self, name: str, dim: int, forgetting: float, cov0=100.0, theta0=None):
        theta = np.zeros(dim) if theta0 is None else _vec(theta0).copy()
        super().__init__(name, RlsFfState(theta, initial_gain(dim, cov0), forgetting))

    def _advance(self, phi, y):
        return rlsff_step(self.state, phi, y)

    @property
    def gain(self):
        return self.state.cov


class NgdEstimator(OnlineEstimator):
    kind = "ngd"

    def __init__(self, name: str, dim: int, rate: float, theta0=None):
        theta = np.zeros(dim) if theta0 is None else _vec(theta0).copy()
        super().__init__(name, NgdState(theta, rate))
        self._eye = np.eye(dim)

    def _advance(self, phi, y):
        return ngd_step(self.state, phi, y)

    @property
    def gain(self):
        return self.state.rate * self._eye


class HbConstEstimator(OnlineEstimator):
    kind = "hb"

    def __init__(self, name: str, dim: int, rate: float, momentum: float, theta0=None, theta_prev0=None):
        theta = np.zeros(dim) if theta0 is None else _vec(theta0).copy()
        prev = theta.copy() if theta_prev0 is None else _vec(theta_prev0).copy()
        super().__init__(name, HbConstState(theta, prev, rate, momentum))
        self._eye = np.eye(dim)

    def _advance(self, phi, y):
        return hb_const_step(self.state, phi, y)

    @property
    def vartheta(self):
        return self.state.theta_prev

    @property
    def gain(self):
        return self.state.rate * self._eye


ESTIMATORS: dict[str, type[OnlineEstimator]] = {
    cls.kind: cls for cls in (HbTvEstimator, RlsFfEstimator, NgdEstimator, HbConstEstimator)
}
