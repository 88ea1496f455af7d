"""Event-triggered sampling: trigger policies, dwell timers, flow/jump tests.

A sampler is described by a state function ``V``, an error function ``W``
and a minimum sampling interval ``tau``.  It samples once its timer has run
for at least ``tau`` and ``V <= W``; in between it flows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import UndefinedResult
from .hybrid import HybridArc

PLANT = "plant"
CONTROLLER = "controller"


@dataclass(frozen=True)
class TriggerPolicy:
    V: Callable[[Any], float]
    W: Callable[[np.ndarray], float]
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"minimum sampling interval must be positive, got {self.tau}")


@dataclass(frozen=True)
class SamplerState:
    e: np.ndarray
    eta: float


def in_flow_set(p: TriggerPolicy, q, s: SamplerState) -> bool:
    # V > W flows regardless of the timer; otherwise flow until the dwell ends
    v, w = p.V(q), p.W(s.e)
    return bool(v > w or s.eta < p.tau)


def in_jump_set(p: TriggerPolicy, q, s: SamplerState) -> bool:
    # eta >= tau rather than eta == tau: once V > W lets the timer overrun,
    # equality would never fire again
    return bool(s.eta >= p.tau and p.V(q) <= p.W(s.e))


def sampler_reset(s: SamplerState) -> SamplerState:
    return SamplerState(np.zeros_like(np.asarray(s.e, dtype=float)), 0.0)


def set_distance(x, e) -> float:
    """Distance to ``{x = 0, e = 0, timer free}``; the timer never enters."""
    return float(np.linalg.norm(np.concatenate([np.ravel(x), np.ravel(e)])))


def min_interjump_interval(arc: HybridArc | np.ndarray, which: str | None = None) -> float:
    """Smallest continuous-time gap between consecutive jumps of one sampler.

    ``arc`` may also be a plain array of jump times.  ``which=None`` takes
    every jump of the arc.
    """
    times = np.asarray(arc.jump_times(which) if isinstance(arc, HybridArc) else arc, dtype=float)
    if times.size < 2:
        raise UndefinedResult(f"need at least two jumps of sampler {which!r}, found {times.size}")
    return float(np.min(np.diff(np.sort(times))))
