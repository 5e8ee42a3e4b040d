"""Time series of run diagnostics and run outcomes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import GridField

REACHED_HORIZON = "ReachedHorizon"
BLOW_UP = "BlowUp"
TOUCH_DOWN = "TouchDown"
STEP_FAILURE = "StepFailure"

DIAGNOSTIC_COLUMNS = ("t", "min_field", "max_field", "mass", "L_or_L1", "Lq",
                      "sigma", "Sigma", "dt")


@dataclass
class RunRecord:
    t: list = field(default_factory=list)
    min_field: list = field(default_factory=list)
    max_field: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    L_or_L1: list = field(default_factory=list)
    Lq: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    Sigma: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    status: str = REACHED_HORIZON
    snapshots: list = field(default_factory=list)   # (t, GridField) pairs

    def append(self, **row) -> None:
        if self.t and not row["t"] > self.t[-1]:
            raise ValueError("sample times must be strictly increasing")
        for name in DIAGNOSTIC_COLUMNS:
            getattr(self, name).append(float(row.get(name, math.nan)))

    def __len__(self) -> int:
        return len(self.t)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        cols = [getattr(self, name) for name in DIAGNOSTIC_COLUMNS]
        return zip(*cols)


@dataclass
class Outcome:
    """Terminal state of a primal or transformed run."""

    status: str
    t_end: float
    series: RunRecord
    final: GridField
    t_event: Optional[float] = None
    message: str = ""

    @property
    def singular(self) -> bool:
        return self.status in (BLOW_UP, TOUCH_DOWN)


def envelope(t: float, m0: float, M: float, sup_u0: float):
    """Lower barrier ``sigma(t)`` and, for ``t < 1/sup_u0``, upper barrier ``Sigma(t)``."""
    sigma = M * m0 / (m0 + math.exp(M * t) * (M - m0))
    if t * sup_u0 < 1.0:
        Sigma = sup_u0 / (1.0 - sup_u0 * t)
    else:
        Sigma = None
    return sigma, Sigma


class SampleClock:
    """Sampling lattice ``k * interval``; an interval of 0 samples every step."""

    def __init__(self, interval: float):
        self.interval = float(interval)
        self.k = 1

    @property
    def next(self) -> float:
        return self.k * self.interval if self.interval > 0 else math.inf

    def snap(self, t: float) -> float:
        if self.interval <= 0:
            return t
        nxt = self.next
        if abs(t - nxt) <= 1e-12 * max(1.0, nxt):
            return nxt
        return t

    def due(self, t: float) -> bool:
        return self.interval <= 0 or t >= self.next

    def advance(self, t: float) -> None:
        if self.interval > 0:
            while self.k * self.interval <= t:
                self.k += 1
