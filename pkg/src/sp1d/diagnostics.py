"""Functionals, functional inequalities and blow-up thresholds.

Every discrete functional uses cell averages with face differences for the
gradient terms, the same stencil the transformed solver's Laplacian is built
from, so summation by parts holds exactly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BadExponent,
    GridMismatch,
    NoDefaultMajorant,
    NoMajorant,
    NoRoot,
    OutOfRange,
    WrongFamily,
)
from .nonlinearity import INVERSE, DiffusionSpec, B_default
from .numerics import GridField, cumsum_midpoint, find_root_bracketed
from .records import Outcome, RunRecord, envelope
from .transformed import lyapunov_value

logger = logging.getLogger(__name__)

__all__ = [
    "InequalityReport", "lyapunov_L", "lyapunov_L1", "energy_E", "check_prop23",
    "energy_E1", "check_lab1", "envelope", "stability_L1", "virial_Lq", "Lambda_M",
    "theta_M", "virial_monotonicity", "bump_initial_data", "random_knot_field",
    "prop23_suite", "lab1_suite", "envelope_check",
]


@dataclass
class InequalityReport:
    checked: int = 0
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def add(self, index, lhs: float, rhs: float, ok: bool, label: str | None = None) -> None:
        self.checked += 1
        if not ok:
            item = {"index": index, "lhs": float(lhs), "rhs": float(rhs)}
            if label:
                item["inequality"] = label
            self.violations.append(item)

    def merge(self, other: "InequalityReport") -> None:
        self.checked += other.checked
        self.violations.extend(other.violations)

    def to_dict(self) -> dict:
        return {"checked": self.checked, "violations": list(self.violations)}


def _tol(rhs: float) -> float:
    return 1e-8 * (1.0 + abs(rhs))


def _dirichlet(values: np.ndarray, h: float) -> float:
    """Discrete ``||d/dy g||_2^2`` from face differences."""
    return float(np.sum(np.diff(values) ** 2)) / h


# -- Lyapunov functionals -------------------------------------------------

def lyapunov_L(f: GridField, spec: Optional[DiffusionSpec] = None) -> float:
    if spec is not None and spec.family != INVERSE:
        raise WrongFamily(f"L is defined for a(r) = 1/r only, got {spec.label()}")
    if np.any(f.values <= 0):
        raise ValueError("f must be positive")
    return lyapunov_value(f.values, f.h, f.domain_length, DiffusionSpec.inverse())


def lyapunov_L1(f: GridField, spec: DiffusionSpec) -> float:
    if np.any(f.values <= 0):
        raise ValueError("f must be positive")
    psi = spec.Psi(f.values)
    M = f.domain_length
    return 0.5 * _dirichlet(psi, f.h) + f.h * float(np.sum(psi - M * spec.Psi1(f.values)))


# -- energy inequalities ----------------------------------------------------

def energy_E(g: GridField) -> float:
    return 0.5 * _dirichlet(g.values, g.h) + g.integral()


def check_prop23(g: GridField, M: float | None = None) -> InequalityReport:
    """Both energy bounds for ``g`` after shifting it onto ``<e^g> = 1/M``."""
    M = g.domain_length if M is None else M
    vals = np.asarray(g.values)
    shift = math.log(M * float(np.mean(np.exp(vals))))
    g = g.with_values(vals - shift)
    grad2 = _dirichlet(g.values, g.h)
    E = energy_E(g)
    rhs12 = 0.25 * grad2 - M * math.log(M) - M ** 3
    l1 = g.h * float(np.sum(np.abs(g.values)))
    rhs13 = 2.0 + M * math.log(M) + M ** 1.5 * math.sqrt(grad2)
    report = InequalityReport()
    report.add(0, E, rhs12, E >= rhs12 - _tol(rhs12), "energy_lower")
    report.add(0, l1, rhs13, l1 <= rhs13 + _tol(rhs13), "l1_upper")
    report.details = {"shift": shift, "E": E, "rhs_energy": rhs12, "l1": l1, "rhs_l1": rhs13}
    return report


def energy_E1(h: GridField, spec: DiffusionSpec | None = None) -> float:
    vals = np.asarray(h.values)
    return 0.5 * _dirichlet(vals, h.h) + h.h * float(np.sum(np.minimum(vals, 0.0)))


def constraint_shift(h: GridField, spec: DiffusionSpec) -> float:
    """Scalar ``c`` with ``int Psi^{-1}(h + c) = 1``."""
    vals = np.asarray(h.values)
    lo_r, hi_r = spec.Psi_range()
    vmin, vmax = float(vals.min()), float(vals.max())

    def phi(c):
        return h.h * float(np.sum(spec.Psi_inv(vals + c))) - 1.0

    # admissible shifts keep every value strictly inside range(Psi)
    c_lo_bound = lo_r - vmin
    c_hi_bound = hi_r - vmax
    if not c_lo_bound < c_hi_bound:
        raise OutOfRange("h oscillates more than the range of Psi allows")
    step = 1.0 + (vmax - vmin)
    if math.isfinite(c_hi_bound):
        hi = c_hi_bound - 1e-12 * max(1.0, abs(c_hi_bound))
    else:
        hi = -vmin + step
        while phi(hi) <= 0 and step < 1e6:
            hi += step
            step *= 2.0
    step = 1.0 + (vmax - vmin)
    if math.isfinite(c_lo_bound):
        lo = c_lo_bound + 1e-12 * max(1.0, abs(c_lo_bound))
    else:
        lo = -vmax - step
        while phi(lo) >= 0 and step < 1e6:
            lo -= step
            step *= 2.0
    if not (phi(lo) < 0 < phi(hi)):
        raise OutOfRange("no shift satisfies the mass constraint inside range(Psi)")
    return find_root_bracketed(phi, lo, hi, tol=1e-13)


def check_lab1(h: GridField, spec: DiffusionSpec, M: float | None = None) -> InequalityReport:
    """Both ``E_1`` bounds for ``h`` after shifting onto ``int Psi^{-1}(h) = 1``."""
    M = h.domain_length if M is None else M
    c = constraint_shift(h, spec)
    h = h.with_values(np.asarray(h.values) + c)
    grad2 = _dirichlet(h.values, h.h)
    psi_m = abs(float(spec.Psi(np.array(1.0 / M))))
    E1 = energy_E1(h, spec)
    rhs5 = 0.25 * grad2 - M ** 3 - M * psi_m
    l1 = h.h * float(np.sum(np.abs(h.values)))
    rhs6 = M ** 1.5 * math.sqrt(grad2) + M * psi_m
    report = InequalityReport()
    report.add(0, E1, rhs5, E1 >= rhs5 - _tol(rhs5), "energy1_lower")
    report.add(0, l1, rhs6, l1 <= rhs6 + _tol(rhs6), "l1_upper")
    report.details = {"shift": c, "E1": E1, "rhs_energy1": rhs5, "l1": l1, "rhs_l1": rhs6}
    return report


def random_knot_field(rng: np.random.Generator, M: float, n_cells: int = 256,
                      knots: int = 17, spread: float = 3.0) -> GridField:
    """Piecewise-linear function through uniform random knot values, sampled at centres."""
    ky = np.linspace(0.0, M, knots)
    kv = rng.uniform(-spread, spread, size=knots)
    y = (np.arange(n_cells) + 0.5) * (M / n_cells)
    return GridField(np.interp(y, ky, kv), M)


def _suite(check, M, n, seed, n_cells, **kw) -> InequalityReport:
    rng = np.random.default_rng(seed)
    total = InequalityReport()
    for i in range(n):
        rep = check(random_knot_field(rng, M, n_cells), M=M, **kw)
        for v in rep.violations:
            v["index"] = i
        total.merge(rep)
    return total


def prop23_suite(M: float, n: int = 1000, seed: int = 42, n_cells: int = 256) -> InequalityReport:
    return _suite(check_prop23, M, n, seed, n_cells)


def lab1_suite(spec: DiffusionSpec, M: float, n: int = 1000, seed: int = 42,
               n_cells: int = 256) -> InequalityReport:
    return _suite(check_lab1, M, n, seed, n_cells, spec=spec)


# -- envelope and stability ----------------------------------------------------

def envelope_check(record: RunRecord, h: float, m0: float, M: float, sup_u0: float) -> InequalityReport:
    """Sampled primal bounds ``sigma - 10h <= min u`` and ``max u <= Sigma + 10h``."""
    report = InequalityReport()
    slack = 10.0 * h
    for i, (t, umin, umax) in enumerate(zip(record.t, record.min_field, record.max_field)):
        if t * sup_u0 >= 1.0:
            continue
        sig, Sig = envelope(t, m0, M, sup_u0)
        report.add(i, umin, sig - slack, umin >= sig - slack, "lower")
        report.add(i, umax, Sig + slack, umax <= Sig + slack, "upper")
    return report


def _snapshots(run):
    if isinstance(run, Outcome):
        run = run.series
    return {float(t): f for t, f in run.snapshots}


def stability_L1(runA, runB, M: float | None = None) -> InequalityReport:
    """``||f1 - f2||_1 <= (1 + 50h) e^{Mt} ||f1(0) - f2(0)||_1`` at shared snapshot times."""
    sa, sb = _snapshots(runA), _snapshots(runB)
    if 0.0 not in sa or 0.0 not in sb:
        raise GridMismatch("both runs need their initial snapshot")
    f1, f2 = sa[0.0], sb[0.0]
    if f1.count != f2.count or not math.isclose(f1.domain_length, f2.domain_length, rel_tol=1e-12):
        raise GridMismatch("runs live on different grids")
    h = f1.h
    M = f1.domain_length if M is None else M
    d0 = h * float(np.sum(np.abs(f1.values - f2.values)))
    report = InequalityReport()
    for i, t in enumerate(sorted(set(sa) & set(sb))):
        a, b = sa[t], sb[t]
        if a.count != b.count:
            raise GridMismatch("snapshot grids differ")
        lhs = h * float(np.sum(np.abs(a.values - b.values)))
        rhs = (1.0 + 50.0 * h) * math.exp(M * t) * d0
        report.add(i, lhs, rhs, lhs <= rhs)
    return report


# -- virial functional and threshold ----------------------------------------

def virial_Lq(u: GridField, q: float) -> float:
    if not q > 2:
        raise BadExponent(f"q must exceed 2, got {q}")
    U = cumsum_midpoint(u)
    Uc = 0.5 * (U[:-1] + U[1:])
    return u.h * float(np.sum(Uc ** q)) / q


def _majorant(spec: DiffusionSpec):
    try:
        return B_default(spec)
    except NoDefaultMajorant as exc:
        raise NoMajorant(str(exc)) from None


def Lambda_M(r, q: float, M: float, spec: DiffusionSpec, _maj=None):
    """Right-hand side of the virial inequality, as a function of ``L_q``."""
    if not q > 2:
        raise BadExponent(f"q must exceed 2, got {q}")
    B, beta = _maj or _majorant(spec)
    r = np.asarray(r, dtype=float)
    top = M ** (q + 1.0) / (q * (q + 1.0))
    e = (q - 2.0) / q
    coef = (q - 1.0) * float(B(M)) ** (2.0 / q) * (M ** (q + 1.0) / (q + 1.0)) ** e
    out = M * r + coef * np.power(np.asarray(beta(top / r), dtype=float), e) - top
    return float(out) if out.ndim == 0 else out


def theta_M(q: float, M: float, spec: DiffusionSpec, r_start: float = 1e-12) -> float:
    """Smallest positive root of ``Lambda_M``; below it ``L_q`` must decrease."""
    maj = _majorant(spec)
    lam = lambda r: Lambda_M(r, q, M, spec, maj)
    if lam(r_start) >= 0:
        raise NoRoot(f"Lambda_M({r_start:g}) >= 0 for {spec.label()}; threshold below double range")
    lo, hi = r_start, r_start
    while lam(hi) < 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise NoRoot("Lambda_M has no sign change")
    return find_root_bracketed(lam, lo, hi, tol=1e-15)


@dataclass
class MonotonicityReport:
    samples: int
    intervals: int
    violations: list
    strictly_decreasing: bool

    @property
    def fraction_ok(self) -> float:
        return 1.0 - len(self.violations) / self.intervals if self.intervals else 1.0

    def to_dict(self) -> dict:
        return {"samples": self.samples, "checked": self.intervals,
                "violations": self.violations, "fraction_ok": self.fraction_ok,
                "strictly_decreasing": self.strictly_decreasing}


def virial_monotonicity(run, q: float, spec: DiffusionSpec, M: float | None = None,
                        h: float = 0.0, min_samples: int = 200) -> MonotonicityReport:
    """Finite-difference ``dL_q/dt`` against ``Lambda_M`` at the interval midpoint value."""
    record = run.series if isinstance(run, Outcome) else run
    maj = _majorant(spec)
    t = record.array("t")
    Lq = record.array("Lq")
    if M is None:
        M = float(record.mass[0])
    if t.size < min_samples:
        logger.info("only %d samples; monotonicity check wants %d", t.size, min_samples)
    dLdt = np.diff(Lq) / np.diff(t)
    mid = 0.5 * (Lq[:-1] + Lq[1:])
    lam = np.asarray(Lambda_M(mid, q, M, spec, maj))
    tol = 1e-3 * (1.0 + np.abs(lam)) + 10.0 * h
    bad = np.nonzero(dLdt > lam + tol)[0]
    violations = [{"index": int(i), "lhs": float(dLdt[i]), "rhs": float(lam[i])} for i in bad]
    return MonotonicityReport(int(t.size), int(dLdt.size), violations, bool(np.all(np.diff(Lq) < 0)))


def bump_initial_data(M: float, m0: float, delta: float, N: int) -> GridField:
    """``m0 + A exp(-((x-1)/delta)^2)`` with ``A`` fixing the discrete mean at ``M``."""
    if not (0 < m0 <= M) or not delta > 0:
        raise ValueError("need 0 < m0 <= M and delta > 0")
    x = (np.arange(N) + 0.5) / N
    bump = np.exp(-(((x - 1.0) / delta) ** 2))
    A = (M - m0) / float(np.mean(bump))
    return GridField(m0 + A * bump, 1.0)
