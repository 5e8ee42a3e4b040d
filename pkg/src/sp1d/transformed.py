"""Solver for ``f_t = (Psi(f))_yy - 1 + M f`` on [0, M] with Neumann ends.

Diffusion is linearised about the current state and treated implicitly, the
affine source explicitly; each step is one tridiagonal solve.  The matrix has
unit column sums, so the discrete mass ``h * sum(f)`` changes only through the
source term, which leaves ``int f = 1`` invariant.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveCell, SingularSystem, StepFailure
from .nonlinearity import INVERSE, DiffusionSpec
from .numerics import GridField, neumann_laplacian, tridiag_solve
from .records import (
    REACHED_HORIZON,
    STEP_FAILURE,
    TOUCH_DOWN,
    Outcome,
    RunRecord,
    SampleClock,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransformedState:
    t: float
    f: GridField

    @property
    def M(self) -> float:
        return self.f.domain_length


def transformed_rhs(state, spec: DiffusionSpec) -> np.ndarray:
    f = state.f if isinstance(state, TransformedState) else state
    if np.any(f.values <= 0):
        raise NonPositiveCell("f must be positive in every cell")
    return neumann_laplacian(spec.Psi(f.values), f.h) - 1.0 + f.domain_length * f.values


def _semi_implicit(f: np.ndarray, h: float, M: float, spec: DiffusionSpec, dt: float):
    d = spec.dPsi(f)
    rate = neumann_laplacian(spec.Psi(f), h) - 1.0 + M * f
    # (I - dt D2 diag(d)) delta = dt * rate; D2 reflects at both ends.
    k = dt * d / (h * h)
    diag = 1.0 + 2.0 * k
    diag[0] -= k[0]
    diag[-1] -= k[-1]
    delta = tridiag_solve(-k[:-1], diag, -k[1:], dt * rate)
    return f + delta


def _explicit(f, h, M, spec, dt):
    return f + dt * (neumann_laplacian(spec.Psi(f), h) - 1.0 + M * f)


def _ok(f) -> bool:
    return bool(np.all(np.isfinite(f)) and np.all(f > 0))


def transformed_step(state: TransformedState, spec: DiffusionSpec, dt: float,
                     safety: float = 0.4) -> TransformedState:
    """Advance one step; falls back to a stable explicit step if the solve loses positivity.

    The fallback step is shorter than ``dt``; the returned state carries its own time.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    f = np.asarray(state.f.values)
    h = state.f.h
    M = state.M
    try:
        new = _semi_implicit(f, h, M, spec, dt)
    except SingularSystem:
        new = None
    if new is not None and _ok(new):
        return TransformedState(state.t + dt, state.f.with_values(new))
    dt_e = min(dt, safety * h * h / (2.0 * float(np.max(spec.dPsi(f)))))
    new = _explicit(f, h, M, spec, dt_e)
    if _ok(new):
        return TransformedState(state.t + dt_e, state.f.with_values(new))
    raise StepFailure(state.t, "both semi-implicit and explicit steps lost positivity")


def _choose_dt(f, h, M, spec, safety, dt_max) -> float:
    rate = neumann_laplacian(spec.Psi(f), h) - 1.0 + M * f
    falling = rate < 0
    dt = dt_max
    if falling.any():
        dt = min(dt, safety * float(np.min(f[falling] / -rate[falling])))
    return dt


def lyapunov_value(f: np.ndarray, h: float, M: float, spec: DiffusionSpec) -> float:
    """``L`` for ``a(r) = 1/r``, ``L_1`` otherwise, with face differences."""
    if spec.family == INVERSE:
        g = np.log(f)
        return 0.5 * float(np.sum(np.diff(g) ** 2)) / h + h * float(np.sum(g))
    psi = spec.Psi(f)
    return 0.5 * float(np.sum(np.diff(psi) ** 2)) / h + h * float(np.sum(psi - M * spec.Psi1(f)))


def _Lq_transformed(f: np.ndarray, h: float, q: float) -> float:
    # int_0^1 U^q/q dx written in y: x = F(y), dx = f dy.
    y = (np.arange(f.size) + 0.5) * h
    return h * float(np.sum(y ** q * f)) / q


def transformed_run(f0: GridField, spec: DiffusionSpec, config) -> Outcome:
    """Integrate up to ``config.T`` or until ``min f < config.f_floor`` (touch-down)."""
    if np.any(f0.values <= 0):
        raise NonPositiveCell("initial data must be positive")
    h = f0.h
    M = f0.domain_length
    T = float(config.T)
    safety = float(config.safety)
    dt_max = float(config.dt_max)
    f_floor = float(config.f_floor)
    q = float(getattr(config, "q", 3.0))
    track_lyapunov = bool(getattr(config, "track_lyapunov", True))
    snapshot_every = float(getattr(config, "snapshot_interval", 0.0) or 0.0)
    state = TransformedState(0.0, f0)
    record = RunRecord()

    def log_sample(dt):
        f = state.f.values
        lyap = lyapunov_value(f, h, M, spec) if track_lyapunov else math.nan
        # Envelope columns carry the density bounds 1/max f and 1/min f.
        record.append(t=state.t, min_field=f.min(), max_field=f.max(), mass=h * f.sum(),
                      L_or_L1=lyap, Lq=_Lq_transformed(f, h, q),
                      sigma=1.0 / f.max(), Sigma=1.0 / f.min(), dt=dt)

    log_sample(0.0)
    record.snapshots.append((0.0, state.f))
    clock = SampleClock(float(config.sample_interval))
    snaps = SampleClock(snapshot_every) if snapshot_every > 0 else None
    status = REACHED_HORIZON
    t_event = None
    message = ""
    last_dt = 0.0
    while state.t < T:
        f = state.f.values
        if f.min() < f_floor:
            status, t_event = TOUCH_DOWN, state.t
            message = f"min f = {f.min():.3e} below floor {f_floor:g}"
            break
        dt = _choose_dt(f, h, M, spec, safety, dt_max)
        dt = min(dt, T - state.t, clock.next - state.t)
        if snaps is not None:
            dt = min(dt, snaps.next - state.t)
        if dt < float(getattr(config, "dt_min", 0.0)):
            status, t_event = TOUCH_DOWN, state.t
            message = f"dt = {dt:.3g} fell below dt_min"
            break
        try:
            new = transformed_step(state, spec, dt, safety)
        except StepFailure as exc:
            status, t_event, message = STEP_FAILURE, state.t, str(exc)
            logger.warning("transformed step failure: %s", exc)
            break
        t_new = clock.snap(new.t)
        if snaps is not None:
            t_new = snaps.snap(t_new)
        if abs(t_new - T) <= 1e-12 * max(1.0, T):
            t_new = T
        last_dt = new.t - state.t
        state = TransformedState(t_new, new.f)
        if clock.due(state.t) or state.t >= T:
            log_sample(last_dt)
            clock.advance(state.t)
        if snaps is not None and snaps.due(state.t):
            record.snapshots.append((state.t, state.f))
            snaps.advance(state.t)
    if status != REACHED_HORIZON and record.t[-1] < state.t:
        log_sample(last_dt)
    record.status = status
    if record.snapshots[-1][0] < state.t:
        record.snapshots.append((state.t, state.f))
    return Outcome(status, state.t, record, state.f, t_event, message)
