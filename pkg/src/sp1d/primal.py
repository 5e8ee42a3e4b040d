"""Finite-volume solver for the density/potential system on [0, 1].

The drift uses the exact identity ``dv/dx = M x - U`` at the faces, so no
Poisson solve is needed while stepping.  Fluxes vanish at both ends, hence the
discrete mass ``h * sum(u)`` is conserved up to round-off.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveCell
from .nonlinearity import DiffusionSpec
from .numerics import GridField, cumsum_midpoint, tridiag_solve
from .records import (
    BLOW_UP,
    REACHED_HORIZON,
    STEP_FAILURE,
    Outcome,
    RunRecord,
    SampleClock,
    envelope,
)

logger = logging.getLogger(__name__)

SCHEMES = ("explicit", "imex")


@dataclass(frozen=True)
class PrimalState:
    t: float
    u: GridField
    M: float
    m0: float


def grad_v_faces(u: GridField, M: float) -> np.ndarray:
    """``dv/dx`` at the N+1 faces; both ends are exactly zero."""
    U = cumsum_midpoint(u)
    g = M * u.faces - U
    g[0] = 0.0
    g[-1] = 0.0
    return g


def reconstruct_v(u: GridField, M: float) -> GridField:
    """Potential at cell centres with zero mean."""
    g = grad_v_faces(u, M)
    v = np.concatenate(([0.0], np.cumsum(g[1:-1] * u.h)))
    return GridField(v - v.mean(), u.domain_length)


def _face_terms(u: np.ndarray, h: float, M: float, spec: DiffusionSpec):
    """Interior-face diffusivity, transport velocity and upwinded density."""
    U = np.concatenate(([0.0], np.cumsum(u) * h))
    x = np.arange(u.size + 1) * h
    vel = (M * x - U)[1:-1]
    abar = spec.a(0.5 * (u[:-1] + u[1:]))
    upw = np.where(vel > 0.0, u[:-1], u[1:])
    return abar, vel, upw


def _divergence(face_flux: np.ndarray, h: float) -> np.ndarray:
    padded = np.concatenate(([0.0], face_flux, [0.0]))
    return (padded[1:] - padded[:-1]) / h


def primal_rhs(u, spec: DiffusionSpec, M: float | None = None) -> np.ndarray:
    """Semi-discrete time derivative in flux form (``u`` a GridField or PrimalState)."""
    if isinstance(u, PrimalState):
        u, M = u.u, u.M
    if np.any(u.values <= 0):
        raise NonPositiveCell("u must be positive in every cell")
    if M is None:
        M = u.mean()
    h = u.h
    vals = u.values
    abar, vel, upw = _face_terms(vals, h, M, spec)
    flux = abar * np.diff(vals) / h - upw * vel
    return _divergence(flux, h)


def _explicit_dt(u, h, M, spec, safety, dt_max):
    abar, vel, _ = _face_terms(u, h, M, spec)
    vmax = float(np.max(np.abs(vel))) if vel.size else 0.0
    return safety * min(h * h / (2.0 * float(np.max(abar)) + h * vmax), dt_max)


def _imex_dt(u, h, M, spec, safety, dt_max):
    _, vel, _ = _face_terms(u, h, M, spec)
    vmax = float(np.max(np.abs(vel)))
    limits = [dt_max, 1.0 / float(np.max(u))]
    if vmax > 0:
        limits.append(h / vmax)
    return safety * min(limits)


def _explicit_step(u, h, M, spec, dt):
    return u + dt * primal_rhs(GridField(u, 1.0), spec, M)


def _imex_step(u, h, M, spec, dt):
    # Upwind drift explicitly, diffusion implicitly with diffusivities frozen.
    abar, vel, upw = _face_terms(u, h, M, spec)
    drift = _divergence(-upw * vel, h)
    rhs = u + dt * drift
    k = dt * abar / (h * h)
    diag = np.ones_like(u)
    diag[:-1] += k
    diag[1:] += k
    return tridiag_solve(-k, diag, -k, rhs)


def _healthy(u) -> bool:
    return bool(np.all(np.isfinite(u)) and np.all(u > 0))


def _Lq_primal(u: np.ndarray, h: float, q: float) -> float:
    U = np.concatenate(([0.0], np.cumsum(u) * h))
    Uc = 0.5 * (U[:-1] + U[1:])
    return h * float(np.sum(Uc ** q)) / q


def primal_run(u0: GridField, spec: DiffusionSpec, config) -> Outcome:
    """Integrate from ``u0`` up to ``config.T`` or until blow-up is flagged.

    Blow-up is declared when ``max u`` exceeds ``config.u_cap`` or the grid
    saturation level ``config.u_cap_grid * M / h``, or when the step size
    drops below ``config.dt_min``.
    """
    if np.any(u0.values <= 0):
        raise NonPositiveCell("initial data must be positive")
    if u0.domain_length != 1.0:
        raise ValueError("primal data lives on [0, 1]")
    scheme = getattr(config, "primal_scheme", "imex")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown primal scheme {scheme!r}")
    step = _explicit_step if scheme == "explicit" else _imex_step
    choose_dt = _explicit_dt if scheme == "explicit" else _imex_dt

    h = u0.h
    u = np.array(u0.values)
    M = float(np.mean(u))
    m0 = float(np.min(u))
    sup0 = float(np.max(u))
    T = float(config.T)
    cap = min(float(config.u_cap), float(getattr(config, "u_cap_grid", math.inf)) * M / h)
    if sup0 > cap:
        logger.warning("initial peak %.6g is above the blow-up cap %.6g; the run ends at t = 0", sup0, cap)
    sample = float(config.sample_interval)
    q = float(getattr(config, "q", 3.0))
    snapshot_every = float(getattr(config, "snapshot_interval", 0.0) or 0.0)

    record = RunRecord()
    t = 0.0
    last_dt = 0.0

    def log_sample(dt):
        sig, Sig = envelope(t, m0, M, sup0)
        record.append(t=t, min_field=u.min(), max_field=u.max(), mass=h * u.sum(),
                      Lq=_Lq_primal(u, h, q), sigma=sig,
                      Sigma=math.nan if Sig is None else Sig, dt=dt)

    log_sample(0.0)
    record.snapshots.append((0.0, GridField(u.copy(), 1.0)))
    clock = SampleClock(sample)
    snaps = SampleClock(snapshot_every) if snapshot_every > 0 else None
    status = REACHED_HORIZON
    t_event = None
    message = ""
    while t < T:
        if u.max() > cap:
            status, t_event = BLOW_UP, t
            message = f"max u = {u.max():.6g} exceeded cap {cap:.6g}"
            break
        dt = choose_dt(u, h, M, spec, float(config.safety), float(config.dt_max))
        if dt < float(config.dt_min):
            status, t_event = BLOW_UP, t
            message = f"dt = {dt:.3g} fell below dt_min"
            break
        dt = min(dt, T - t, clock.next - t)
        if snaps is not None:
            dt = min(dt, snaps.next - t)
        new = step(u, h, M, spec, dt)
        if not _healthy(new):
            dt *= 0.5
            new = step(u, h, M, spec, dt)
            if not _healthy(new):
                status, t_event = STEP_FAILURE, t
                message = "non-finite or non-positive cell after retry"
                logger.warning("primal step failure at t=%.6g", t)
                break
        u = new
        t_new = t + dt
        # Snap onto the sampling lattice so sample times are reproducible.
        t_new = clock.snap(t_new)
        if snaps is not None:
            t_new = snaps.snap(t_new)
        if abs(t_new - T) <= 1e-12 * max(1.0, T):
            t_new = T
        t = t_new
        last_dt = dt
        if clock.due(t) or t >= T:
            log_sample(dt)
            clock.advance(t)
        if snaps is not None and snaps.due(t):
            record.snapshots.append((t, GridField(u.copy(), 1.0)))
            snaps.advance(t)
    if status != REACHED_HORIZON and record.t[-1] < t:
        log_sample(last_dt)
    record.status = status
    if not record.snapshots or record.snapshots[-1][0] < t:
        record.snapshots.append((t, GridField(u.copy(), 1.0)))
    return Outcome(status, t, record, GridField(u, 1.0), t_event, message)
