"""Diffusion families ``a(r)`` and the scalar functions derived from them.

Every built-in family has closed forms for ``a``, ``Psi``, ``Psi'`` and
``Psi^{-1}``.  ``Psi1`` and anything a custom family does not supply are
obtained from a cumulative Gauss-Legendre table in the variable ``s = log w``,
which keeps round-off level accuracy over many decades of ``r``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import (
    ConditionFails,
    MajorantViolation,
    NoDefaultMajorant,
    NonPositiveArgument,
    NotIntegrableAtInfinity,
    OutOfRange,
)

POWER = "power"
LOG = "log"
INVERSE = "inverse"
CUSTOM = "custom"
FAMILIES = (POWER, LOG, INVERSE, CUSTOM)

LOG2 = math.log(2.0)
QUAD_RTOL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class LogQuadratureTable:
    """Cumulative integral ``G(s) = int_0^s g`` of a smooth integrand ``g``.

    Panels of width ``panel`` carry exact Gauss-Legendre sums; a query adds a
    partial panel evaluated with the same rule.  The span grows on demand.
    """

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], panel: float = 0.5,
                 half_span: int = 100):
        self._g = g
        self._panel = panel
        self._lock = threading.Lock()
        self._build(half_span)

    def _panel_sum(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        mid = 0.5 * (left + right)[:, None]
        half = 0.5 * (right - left)[:, None]
        vals = self._g(mid + half * _GL_NODES[None, :])
        return (half * vals) @ _GL_WEIGHTS

    def _build(self, half_span: int) -> None:
        k = np.arange(-half_span, half_span + 1)
        edges = k * self._panel
        sums = self._panel_sum(edges[:-1], edges[1:])
        # Accumulate outward from s = 0 so huge tails never cancel near 0.
        cum = np.zeros(2 * half_span + 1)
        cum[half_span + 1:] = np.cumsum(sums[half_span:])
        cum[:half_span] = -np.cumsum(sums[:half_span][::-1])[::-1]
        self._half_span = half_span
        self._cum = cum

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        limit = np.max(np.abs(s)) if s.size else 0.0
        if limit >= self._half_span * self._panel:
            with self._lock:
                need = int(math.ceil(limit / self._panel)) + 1
                if need > self._half_span:
                    self._build(max(need, 2 * self._half_span))
        k = np.floor(s / self._panel)
        base = k * self._panel
        idx = (k + self._half_span).astype(int)
        return self._cum[idx] + self._panel_sum(base, s)


@dataclass(frozen=True)
class DiffusionSpec:
    """A diffusion coefficient family together with the majorant constant ``C``."""

    family: str
    p: float = 1.0
    alpha: float = 1.0
    C: float = 1.0
    a_func: Optional[Callable] = field(default=None, compare=False, repr=False)
    A_func: Optional[Callable] = field(default=None, compare=False, repr=False)
    B_func: Optional[Callable] = field(default=None, compare=False, repr=False)
    integrable_at_infinity: Optional[bool] = None
    integrable_at_zero: Optional[bool] = None
    _tables: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.family == CUSTOM and self.a_func is None:
            raise ValueError("custom families must supply a")
        if self.family == CUSTOM:
            if self.integrable_at_infinity is None:
                object.__setattr__(self, "integrable_at_infinity", _probe_tail(self.a_func, True))
            if self.integrable_at_zero is None:
                object.__setattr__(self, "integrable_at_zero", _probe_tail(self.a_func, False))
        # Tables are built eagerly so a spec can be shared between threads.
        if self._needs_table("psi"):
            self._tables["psi"] = LogQuadratureTable(lambda s: self.a(np.exp(s)) * np.exp(s))
        if self._needs_table("psi1"):
            self._tables["psi1"] = LogQuadratureTable(lambda s: self.a(np.exp(s)))

    # constructors
    @classmethod
    def power(cls, p: float, C: float = 1.0) -> "DiffusionSpec":
        return cls(POWER, p=float(p), C=float(C))

    @classmethod
    def log(cls, alpha: float, C: float = 1.0) -> "DiffusionSpec":
        return cls(LOG, alpha=float(alpha), C=float(C))

    @classmethod
    def inverse(cls, C: float = 1.0) -> "DiffusionSpec":
        return cls(INVERSE, C=float(C))

    @classmethod
    def custom(cls, a: Callable, A: Optional[Callable] = None, B: Optional[Callable] = None,
               C: float = 1.0, integrable_at_infinity: Optional[bool] = None,
               integrable_at_zero: Optional[bool] = None) -> "DiffusionSpec":
        return cls(CUSTOM, C=float(C), a_func=a, A_func=A, B_func=B,
                   integrable_at_infinity=integrable_at_infinity,
                   integrable_at_zero=integrable_at_zero)

    def _needs_table(self, which: str) -> bool:
        if self.family == CUSTOM:
            return True
        if which == "psi1":
            if self.family == POWER:
                return self.p not in (0.0, 1.0, 2.0)
            return self.family == LOG
        return False

    def label(self) -> str:
        if self.family == POWER:
            return f"power(p={self.p:g})"
        if self.family == LOG:
            return f"log(alpha={self.alpha:g})"
        return self.family

    def to_config(self) -> dict:
        out = {"family": self.family, "C": self.C}
        if self.family == POWER:
            out["p"] = self.p
        elif self.family == LOG:
            out["alpha"] = self.alpha
        return out

    # flags
    @property
    def a_in_L1_infinity(self) -> bool:
        if self.family == POWER:
            return self.p > 1.0
        if self.family == LOG:
            return self.alpha > 1.0
        if self.family == INVERSE:
            return False
        return bool(self.integrable_at_infinity)

    @property
    def a_in_L1_zero(self) -> bool:
        if self.family == POWER:
            return True
        if self.family == LOG:
            return self.alpha < 1.0
        if self.family == INVERSE:
            return False
        return bool(self.integrable_at_zero)

    # pointwise functions (vectorised, no argument checks)
    def a(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == POWER:
            return np.exp(-self.p * np.log1p(r))
        if self.family == LOG:
            return 1.0 / ((1.0 + r) * np.power(np.log1p(r), self.alpha))
        if self.family == INVERSE:
            return 1.0 / r
        return np.asarray(self.a_func(r), dtype=float)

    def dPsi(self, r):
        """``Psi'(r) = a(1/r) / r^2``."""
        r = np.asarray(r, dtype=float)
        if self.family == POWER:
            return np.exp((self.p - 2.0) * np.log(r) - self.p * np.log1p(r))
        if self.family == LOG:
            return 1.0 / (r * (1.0 + r) * np.power(np.log1p(1.0 / r), self.alpha))
        if self.family == INVERSE:
            return 1.0 / r
        return self.a(1.0 / r) / (r * r)

    def Psi(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == POWER:
            p = self.p
            if p == 1.0:
                return LOG2 + np.log(r) - np.log1p(r)
            lr = np.log1p(1.0 / r)
            return np.exp((1.0 - p) * lr) * np.expm1((1.0 - p) * (LOG2 - lr)) / (1.0 - p)
        if self.family == LOG:
            al = self.alpha
            ll = np.log(np.log1p(1.0 / r))
            if al == 1.0:
                return math.log(LOG2) - ll
            l2 = math.log(LOG2)
            return np.exp((1.0 - al) * ll) * np.expm1((1.0 - al) * (l2 - ll)) / (1.0 - al)
        if self.family == INVERSE:
            return np.log(r)
        return -self._tables["psi"](-np.log(r)).reshape(r.shape)

    def Psi1(self, r):
        """Antiderivative of ``r Psi'(r)`` vanishing at 1."""
        r = np.asarray(r, dtype=float)
        if self.family == INVERSE:
            return r - 1.0
        if self.family == POWER and self.p == 0.0:
            return np.log(r)
        if self.family == POWER and self.p == 1.0:
            return np.log1p(r) - LOG2
        if self.family == POWER and self.p == 2.0:
            return np.log1p(r) - LOG2 + 0.5 - r / (1.0 + r)
        return -self._tables["psi1"](-np.log(r)).reshape(r.shape)

    def Psi_range(self) -> tuple[float, float]:
        """``(Psi(0+), Psi(inf))``; infinite ends where ``a`` is not integrable."""
        lo = -math.inf
        if self.a_in_L1_infinity:
            lo = float(self.A(1.0))
        hi = math.inf
        if self.a_in_L1_zero:
            if self.family == POWER:
                hi = LOG2 if self.p == 1.0 else (2.0 ** (1.0 - self.p) - 1.0) / (1.0 - self.p)
            elif self.family == LOG:
                hi = LOG2 ** (1.0 - self.alpha) / (1.0 - self.alpha)
            else:
                hi = float(integrate.quad(self.a_func, 0.0, 1.0, epsrel=QUAD_RTOL, limit=200)[0])
        return lo, hi

    def A(self, r):
        """``-int_r^inf a``; only defined when ``a`` is integrable at infinity."""
        if not self.a_in_L1_infinity:
            raise NotIntegrableAtInfinity(f"{self.label()} is not integrable on (1, inf)")
        r = np.asarray(r, dtype=float)
        if self.family == POWER:
            return -np.exp((1.0 - self.p) * np.log1p(r)) / (self.p - 1.0)
        if self.family == LOG:
            return -np.power(np.log1p(r), 1.0 - self.alpha) / (self.alpha - 1.0)
        if self.A_func is not None:
            return np.asarray(self.A_func(r), dtype=float)
        return np.vectorize(lambda x: -tail_integral(self.a, x))(r)

    def Psi_inv(self, z):
        """Closed-form inverse where available, numeric otherwise."""
        z = np.asarray(z, dtype=float)
        lo, hi = self.Psi_range()
        if np.any((z <= lo) | (z >= hi)):
            raise OutOfRange(f"value outside the range ({lo:.6g}, {hi:.6g}) of Psi")
        if self.family == INVERSE:
            return np.exp(z)
        if self.family == POWER:
            p = self.p
            if p == 1.0:
                ez = np.exp(z)
                return ez / (2.0 - ez)
            # log1p(1/r) = log(2^{1-p} - (1-p) z) / (1-p)
            x = 2.0 ** (1.0 - p) - (1.0 - p) * z
            return 1.0 / np.expm1(np.log(x) / (1.0 - p))
        if self.family == LOG:
            al = self.alpha
            if al == 1.0:
                ell = LOG2 * np.exp(-z)
            else:
                x = LOG2 ** (1.0 - al) - (1.0 - al) * z
                ell = np.power(x, 1.0 / (1.0 - al))
            with np.errstate(over="ignore"):
                # very negative z underflows to r = 0, which is the correct limit
                return 1.0 / np.expm1(ell)
        return psi_inverse_numeric(self, z)


def _probe_tail(a: Callable, at_infinity: bool) -> bool:
    """Crude integrability probe: does the tail integral settle when the cut-off moves?"""
    if at_infinity:
        f = lambda s: float(a(np.exp(s))) * math.exp(s)
        i1 = integrate.quad(f, 0.0, 30.0, limit=400)[0]
        i2 = integrate.quad(f, 0.0, 60.0, limit=400)[0]
    else:
        f = lambda s: float(a(np.exp(-s))) * math.exp(-s)
        i1 = integrate.quad(f, 0.0, 30.0, limit=400)[0]
        i2 = integrate.quad(f, 0.0, 60.0, limit=400)[0]
    return abs(i2 - i1) <= 1e-6 * max(1.0, abs(i1))


def tail_integral(a: Callable, r: float) -> float:
    """``int_r^inf a(s) ds`` by adaptive quadrature after ``s = 1/w``."""
    g = lambda w: float(a(1.0 / w)) / (w * w)
    return float(integrate.quad(g, 0.0, 1.0 / r, epsrel=QUAD_RTOL, epsabs=0.0, limit=400)[0])


def _check_positive(r):
    arr = np.asarray(r, dtype=float)
    if np.any(~(arr > 0)):
        raise NonPositiveArgument("argument must be positive")
    return arr


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def a_eval(spec: DiffusionSpec, r):
    return _scalar(spec.a(_check_positive(r)))


def A_eval(spec: DiffusionSpec, r):
    return _scalar(spec.A(_check_positive(r)))


def Psi_eval(spec: DiffusionSpec, r):
    return _scalar(spec.Psi(_check_positive(r)))


def Psi1_eval(spec: DiffusionSpec, r):
    return _scalar(spec.Psi1(_check_positive(r)))


def Psi_inverse(spec: DiffusionSpec, z):
    return _scalar(spec.Psi_inv(z))


def psi_inverse_numeric(spec: DiffusionSpec, z, tol: float = 1e-10) -> np.ndarray:
    """Vectorised inverse of ``Psi``: bisection in ``log r`` then Newton polish."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lo_z, hi_z = spec.Psi_range()
    if np.any((z <= lo_z) | (z >= hi_z)):
        raise OutOfRange(f"value outside the range ({lo_z:.6g}, {hi_z:.6g}) of Psi")
    lo = np.full(z.shape, -1.0)
    hi = np.full(z.shape, 1.0)
    # widen brackets geometrically in log r
    for _ in range(200):
        bad = spec.Psi(np.exp(lo)) > z
        if not bad.any():
            break
        lo[bad] *= 2.0
    for _ in range(200):
        bad = spec.Psi(np.exp(hi)) < z
        if not bad.any():
            break
        hi[bad] *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = spec.Psi(np.exp(mid)) < z
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < 1e-6):
            break
    r = np.exp(0.5 * (lo + hi))
    for _ in range(20):
        resid = spec.Psi(r) - z
        step = resid / spec.dPsi(r)
        r_new = r - step
        r_new = np.where(r_new > 0, r_new, 0.5 * r)
        r = r_new
        if np.all(np.abs(resid) <= tol * np.maximum(1.0, np.abs(z))):
            break
    return r


@dataclass(frozen=True)
class DerivedFunctions:
    """The bundle of callables and flags derived from one ``DiffusionSpec``."""

    Psi: Callable
    PsiInv: Callable
    Psi1: Callable
    Aint: Optional[Callable]
    Bmaj: Optional[Callable]
    beta: Optional[Callable]
    a_in_L1_infinity: bool
    a_in_L1_zero: bool


def derive(spec: DiffusionSpec) -> DerivedFunctions:
    try:
        B, beta = B_default(spec)
    except NoDefaultMajorant:
        B = beta = None
    return DerivedFunctions(
        Psi=spec.Psi,
        PsiInv=spec.Psi_inv,
        Psi1=spec.Psi1,
        Aint=spec.A if spec.a_in_L1_infinity else None,
        Bmaj=B,
        beta=beta,
        a_in_L1_infinity=spec.a_in_L1_infinity,
        a_in_L1_zero=spec.a_in_L1_zero,
    )


def _gex1_sup(spec: DiffusionSpec, eps: float, lo_exp: float, n: int) -> float:
    r = np.logspace(lo_exp, 0.0, n + 2)[1:-1]
    vals = r * spec.a(r) * (1.0 - eps * r)
    return max(0.0, float(np.max(vals)))


def check_gex1(spec: DiffusionSpec, M: float) -> float:
    """Sampled constant ``kappa`` with ``a(r) <= r a(r)/M + kappa/r`` on (0, 1).

    The refinement doubles both the sample count and the logarithmic span
    toward 0, where any divergence of ``r a(r)`` would show.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    eps = 1.0 / M
    kappa = _gex1_sup(spec, eps, -8.0, 2048)
    refined = _gex1_sup(spec, eps, -16.0, 4096)
    if not np.isfinite(refined) or refined > 1.1 * kappa + 1e-300:
        raise ConditionFails(f"sup of r a(r)(1 - r/M) grows under refinement: {kappa:.6g} -> {refined:.6g}")
    return kappa


def B_default(spec: DiffusionSpec):
    """Concave majorant ``B`` of ``-r A(r)`` and ``beta(r) = B(r)/r``."""
    C = spec.C
    if spec.family == POWER and 1.0 < spec.p <= 2.0:
        p = spec.p
        B = lambda r: C * np.asarray(r, dtype=float) * np.exp((1.0 - p) * np.log1p(r)) / (p - 1.0)
        beta = lambda r: C * np.exp((1.0 - p) * np.log1p(r)) / (p - 1.0)
        return B, beta
    if spec.family == LOG and 1.0 < spec.alpha <= 2.0:
        al = spec.alpha
        B = lambda r: C * np.asarray(r, dtype=float) * np.power(np.log1p(r), 1.0 - al) / (al - 1.0)
        beta = lambda r: C * np.power(np.log1p(r), 1.0 - al) / (al - 1.0)
        return B, beta
    if spec.family == CUSTOM and spec.B_func is not None:
        Bf = spec.B_func
        return Bf, (lambda r: np.asarray(Bf(r), dtype=float) / np.asarray(r, dtype=float))
    raise NoDefaultMajorant(f"no majorant available for {spec.label()}")


@dataclass(frozen=True)
class MajorantReport:
    verified: bool
    r_max: float
    max_ratio: float        # max of -rA(r)/B(r) on the grid
    beta_last_decade: tuple[float, float]


def verify_majorant(spec: DiffusionSpec, r_max: float = 1e8, n: int = 2000) -> MajorantReport:
    """Check ``0 <= -rA <= B``, concavity of ``B`` and decay of ``B(r)/r``."""
    B, beta = B_default(spec)
    if not spec.a_in_L1_infinity:
        raise NoDefaultMajorant(f"{spec.label()} is not integrable at infinity")
    r = np.logspace(-8.0, math.log10(r_max), n)
    rA = -r * np.asarray(spec.A(r))
    Bv = np.asarray(B(r), dtype=float)
    tol = 1e-10
    neg = np.nonzero(rA < -tol * np.abs(Bv))[0]
    if neg.size:
        raise MajorantViolation(float(r[neg[0]]), "-rA(r) < 0")
    over = np.nonzero(rA > Bv * (1.0 + tol))[0]
    if over.size:
        raise MajorantViolation(float(r[over[0]]), "-rA(r) exceeds B(r)")
    # Slopes of B between consecutive nodes must not increase.
    dr = np.diff(r)
    slopes = np.diff(Bv) / dr
    rise = np.diff(slopes)
    # allow for cancellation in the differences of nearly equal B values
    noise = 8.0 * np.finfo(float).eps * (np.abs(Bv[:-2]) + np.abs(Bv[1:-1]) + np.abs(Bv[2:])) / dr[:-1]
    bad = np.nonzero(rise > 1e-9 * np.abs(slopes[:-1]) + noise)[0]
    if bad.size:
        raise MajorantViolation(float(r[bad[0] + 1]), "B is not concave")
    last = r >= r_max / 10.0
    bl = np.asarray(beta(r[last]), dtype=float)
    if np.any(np.diff(bl) > 0) or not bl[-1] < bl[0]:
        raise MajorantViolation(float(r_max), "B(r)/r does not decay over the last decade")
    ratio = float(np.max(rA / Bv))
    return MajorantReport(True, float(r_max), ratio, (float(bl[0]), float(bl[-1])))
