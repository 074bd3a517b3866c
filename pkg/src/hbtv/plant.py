"""Discrete-time nonlinear ARMA plants and their linear-regression form.

The plant is

    y_k = -sum_i a_i y_{k-i} + sum_j b_j u_{k-j-d} + sum_l c_l f_l(z_{k-1}, v_{k-d-1})

with z_{k-1} = [y_{k-1}, ..., y_{k-n}] and v_{k-d-1} = [u_{k-1-d}, ..., u_{k-m-d}].
The minus sign of the AR sum is folded into the parameter vector, so
``y_k = phi_k @ theta_star`` with ``theta_star = [-a, b, c]``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

Basis = Callable[[np.ndarray, np.ndarray], float]


class SimulationDivergence(ArithmeticError):
    """Plant output became non-finite (the input broke the BIBO assumption)."""

    def __init__(self, k: int, value: float):
        super().__init__(f"plant output diverged at step {k}: y = {value!r}")
        self.k = k
        self.value = value


# -- nonlinear bases ---------------------------------------------------------
#
# Each basis receives the output window z = [y_{k-1}, ..., y_{k-n}] and the
# input window v = [u_{k-1-d}, ..., u_{k-m-d}].  ``lag`` is 1-based.


def _pick(z: np.ndarray, v: np.ndarray, source: str, lag: int) -> float:
    window = z if source == "y" else v
    if not 1 <= lag <= len(window):
        raise ValueError(f"lag {lag} outside the {source} window of length {len(window)}")
    return float(window[lag - 1])


@dataclass(frozen=True)
class Square:
    source: str = "y"
    lag: int = 1

    def __call__(self, z: np.ndarray, v: np.ndarray) -> float:
        x = _pick(z, v, self.source, self.lag)
        return x * x


@dataclass(frozen=True)
class Product:
    first: tuple[str, int] = ("y", 1)
    second: tuple[str, int] = ("u", 1)

    def __call__(self, z: np.ndarray, v: np.ndarray) -> float:
        return _pick(z, v, *self.first) * _pick(z, v, *self.second)


@dataclass(frozen=True)
class Sine:
    source: str = "y"
    lag: int = 1

    def __call__(self, z: np.ndarray, v: np.ndarray) -> float:
        return math.sin(_pick(z, v, self.source, self.lag))


BASES: dict[str, type] = {"square": Square, "product": Product, "sine": Sine}


# -- model types ---------------------------------------------------------------


@dataclass
class PlantModel:
    ar_coeffs: np.ndarray
    input_coeffs: np.ndarray
    nonlin_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nonlin_basis: Sequence[Basis] = ()
    delay: int = 0

    def __post_init__(self):
        self.ar_coeffs = np.atleast_1d(np.asarray(self.ar_coeffs, dtype=float))
        self.input_coeffs = np.atleast_1d(np.asarray(self.input_coeffs, dtype=float))
        self.nonlin_coeffs = np.atleast_1d(np.asarray(self.nonlin_coeffs, dtype=float))
        self.nonlin_basis = tuple(self.nonlin_basis)
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if len(self.nonlin_basis) != len(self.nonlin_coeffs):
            raise ValueError(
                f"{len(self.nonlin_coeffs)} nonlinear coefficients but "
                f"{len(self.nonlin_basis)} basis functions"
            )
        if self.n + self.m + self.p < 1:
            raise ValueError("plant must have at least one regressor entry (n + m + p >= 1)")

    @property
    def n(self) -> int:
        return len(self.ar_coeffs)

    @property
    def m(self) -> int:
        return len(self.input_coeffs)

    @property
    def p(self) -> int:
        return len(self.nonlin_coeffs)


@dataclass
class LagWindow:
    """Past outputs and inputs, most recent first: y = [y_{k-1}, ...], u = [u_{k-1}, ...]."""

    y: np.ndarray
    u: np.ndarray

    @classmethod
    def zeros(cls, n_y: int, n_u: int) -> LagWindow:
        return cls(np.zeros(n_y), np.zeros(n_u))

    @classmethod
    def for_model(cls, model: PlantModel) -> LagWindow:
        return cls.zeros(model.n, model.m + model.delay)

    def push_output(self, y: float) -> None:
        if len(self.y):
            self.y = np.roll(self.y, 1)
            self.y[0] = y

    def push_input(self, u: float) -> None:
        if len(self.u):
            self.u = np.roll(self.u, 1)
            self.u[0] = u


@dataclass
class RegressionProblem:
    true_theta: np.ndarray
    n: int
    m: int
    delay: int = 0
    nonlin_basis: Sequence[Basis] = ()

    @classmethod
    def from_plant(cls, model: PlantModel) -> RegressionProblem:
        theta = np.concatenate([-model.ar_coeffs, model.input_coeffs, model.nonlin_coeffs])
        return cls(theta, model.n, model.m, model.delay, model.nonlin_basis)

    @property
    def dim(self) -> int:
        return self.n + self.m + len(self.nonlin_basis)


@dataclass(frozen=True)
class Sample:
    k: int
    phi: np.ndarray
    y: float
    u: float


# -- operations ---------------------------------------------------------------


def _windows(n: int, m: int, delay: int, history: LagWindow) -> tuple[np.ndarray, np.ndarray]:
    z = np.zeros(n)
    v = np.zeros(m)
    ny = min(n, len(history.y))
    z[:ny] = history.y[:ny]
    u_tail = np.asarray(history.u[delay : delay + m], dtype=float)
    v[: len(u_tail)] = u_tail
    return z, v


def build_regressor(problem: RegressionProblem, history: LagWindow) -> np.ndarray:
    """phi_k = [past outputs | delayed past inputs | nonlinear features]."""
    z, v = _windows(problem.n, problem.m, problem.delay, history)
    feats = [f(z, v) for f in problem.nonlin_basis]
    return np.concatenate([z, v, np.asarray(feats, dtype=float)])


def plant_output(model: PlantModel, history: LagWindow) -> float:
    """Evaluate the difference equation on the current lag window."""
    z, v = _windows(model.n, model.m, model.delay, history)
    # overflow surfaces as a non-finite y, which callers turn into SimulationDivergence
    with np.errstate(over="ignore", invalid="ignore"):
        y = -float(model.ar_coeffs @ z) + float(model.input_coeffs @ v)
        for c, f in zip(model.nonlin_coeffs, model.nonlin_basis):
            y += c * f(z, v)
    return y


def plant_step(model: PlantModel, history: LagWindow, u: float, k: int = -1) -> float:
    """Feed input ``u`` as the newest input sample and return the next output.

    ``history`` is updated in place.  Raises SimulationDivergence if the
    output is not finite.
    """
    history.push_input(u)
    y = plant_output(model, history)
    if not math.isfinite(y):
        raise SimulationDivergence(k, y)
    history.push_output(y)
    return y


def from_transfer_function(num: Sequence[float], den: Sequence[float]) -> PlantModel:
    """Difference-equation model of ``G(q) = num(q) / den(q)``.

    Coefficients are in descending powers of the shift operator q.  The
    denominator is normalized to be monic.  The plant form has no direct
    feedthrough, so the transfer function must be strictly proper.
    """
    num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), "f")
    den = np.trim_zeros(np.atleast_1d(np.asarray(den, dtype=float)), "f")
    if len(den) == 0:
        raise ValueError("denominator is zero")
    if len(num) == 0:
        raise ValueError("numerator is zero")
    n = len(den) - 1
    deg_num = len(num) - 1
    if deg_num > n:
        raise ValueError(f"improper transfer function: deg num {deg_num} > deg den {n}")
    if deg_num == n:
        raise ValueError("transfer function has direct feedthrough; only strictly proper G(q) fit the plant form")
    lead = den[0]
    return PlantModel(
        ar_coeffs=den[1:] / lead,
        input_coeffs=num / lead,
        delay=n - deg_num - 1,
    )


def simulate(model: PlantModel, inputs: Callable[[int], float], horizon: int) -> list[Sample]:
    """Run the plant from a zero lag window and emit regression samples.

    Sample k carries phi_k (built from data before k), y_k, and the input u_k
    applied after y_k is measured.
    """
    problem = RegressionProblem.from_plant(model)
    history = LagWindow.for_model(model)
    samples = []
    for k in range(horizon):
        phi = build_regressor(problem, history)
        y = plant_output(model, history)
        if not math.isfinite(y):
            raise SimulationDivergence(k, y)
        u = float(inputs(k))
        samples.append(Sample(k, phi, y, u))
        history.push_output(y)
        history.push_input(u)
    return samples


def benchmark_plant() -> PlantModel:
    """The second-order test system (-0.6213 q + 0.5839) / (q^2 - 1.8403 q + 0.8591)."""
    return from_transfer_function([-0.6213, 0.5839], [1.0, -1.8403, 0.8591])
