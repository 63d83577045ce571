"""Weighted moving average over recent control outputs.

The filter keeps the K most recent controller outputs and returns their
recency-weighted mean: entry t (1 = oldest, k = newest) gets weight
t / sum(1..k).  Before the window fills, weights are renormalized over the
k entries actually present, so the very first output passes through
unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import ControlVector


@dataclass(frozen=True)
class WmaState:
    window: tuple[ControlVector, ...] = ()
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"window length must be >= 1, got {self.k}")
        if len(self.window) > self.k:
            raise ValueError("history longer than window length")


def wma_weights(k: int) -> list[float]:
    """Weights for k entries, oldest first; positive, increasing, sum 1."""
    total = k * (k + 1) / 2.0
    return [t / total for t in range(1, k + 1)]


def wma_update(state: WmaState, new: ControlVector) -> tuple[WmaState, ControlVector]:
    """Append a new output (evicting the oldest past K) and filter."""
    history = (state.window + (new,))[-state.k :]
    weights = wma_weights(len(history))
    mx = sum(w * c.mx for w, c in zip(weights, history))
    my = sum(w * c.my for w, c in zip(weights, history))
    return WmaState(history, state.k), ControlVector(mx, my)
