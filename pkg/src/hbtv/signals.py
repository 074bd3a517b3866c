"""Deterministic excitation signals indexed by step number."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

KINDS = ("multisine", "decaying-multisine", "constant", "impulse", "custom")


@dataclass(frozen=True)
class Signal:
    """u(k) as a pure function of k.

    ``components`` holds (amplitude, angular frequency in rad/step, phase)
    triples.  The multisine is ``offset + sum amp*sin(omega*k + phase)``; the
    decaying variant scales the sinusoid sum by ``exp(-decay_rate*k)``.
    ``constant`` returns ``offset`` and ``impulse`` returns ``amplitude`` at
    k = 0 and zero afterwards.
    """

    kind: str = "multisine"
    components: tuple[tuple[float, float, float], ...] = ()
    offset: float = 0.0
    decay_rate: float = 0.0
    amplitude: float = 1.0
    custom: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {KINDS}")
        if self.decay_rate < 0:
            raise ValueError("decay_rate must be >= 0")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom signal needs a callable")
        object.__setattr__(self, "components", tuple(tuple(map(float, c)) for c in self.components))

    def __call__(self, k: int) -> float:
        return evaluate(self, k)


def evaluate(signal: Signal, k: int) -> float:
    if k < 0:
        raise ValueError("step index must be >= 0")
    if signal.kind == "constant":
        return float(signal.offset)
    if signal.kind == "impulse":
        return float(signal.amplitude) if k == 0 else 0.0
    if signal.kind == "custom":
        return float(signal.custom(k))
    total = math.fsum(a * math.sin(w * k + ph) for a, w, ph in signal.components)
    if signal.kind == "decaying-multisine":
        total *= math.exp(-signal.decay_rate * k)
    return signal.offset + total


_BENCH_FREQS = (3 * math.pi / 4, 2 * math.pi / 5, math.pi / 5)


def pe_multisine() -> Signal:
    """1 + sin(3*pi*k/4) + sin(2*pi*k/5) + sin(pi*k/5); period 40 steps."""
    return Signal("multisine", tuple((1.0, w, 0.0) for w in _BENCH_FREQS), offset=1.0)


def decaying_multisine(rate: float = 0.03) -> Signal:
    """The same three tones fading as exp(-rate*k) around the unit offset."""
    return Signal(
        "decaying-multisine",
        tuple((1.0, w, 0.0) for w in _BENCH_FREQS),
        offset=1.0,
        decay_rate=rate,
    )
