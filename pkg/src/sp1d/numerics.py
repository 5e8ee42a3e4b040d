"""Low-level kernels on uniform cell-centred grids."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg, optimize

from .errors import NoSignChange, SingularSystem

MIN_CELLS = 8


@dataclass(frozen=True)
class GridField:
    """Cell averages of a scalar field on ``[0, domain_length]``."""

    values: np.ndarray
    domain_length: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < MIN_CELLS:
            raise ValueError(f"GridField needs a 1-D array with at least {MIN_CELLS} cells")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridField values must be finite")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "domain_length", float(self.domain_length))

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.domain_length / self.count

    @property
    def centers(self) -> np.ndarray:
        return cell_centers(self.count, self.domain_length)

    @property
    def faces(self) -> np.ndarray:
        return face_points(self.count, self.domain_length)

    def integral(self) -> float:
        return self.h * float(np.sum(self.values))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def with_values(self, values) -> "GridField":
        return GridField(values, self.domain_length)


def cell_centers(n: int, length: float) -> np.ndarray:
    return (np.arange(n) + 0.5) * (length / n)


def face_points(n: int, length: float) -> np.ndarray:
    return np.arange(n + 1) * (length / n)


def cumsum_midpoint(field: GridField) -> np.ndarray:
    """Running integral at the faces; entry 0 is 0 and entry N is the total."""
    out = np.empty(field.count + 1)
    out[0] = 0.0
    np.cumsum(field.values, out=out[1:])
    out[1:] *= field.h
    return out


def face_gradient(values: np.ndarray, h: float) -> np.ndarray:
    """Differences across the N-1 interior faces (Neumann faces carry zero)."""
    return np.diff(values) / h


def norm_l1(values: np.ndarray, h: float) -> float:
    return h * float(np.sum(np.abs(values)))


def norm_l2(values: np.ndarray, h: float) -> float:
    return float(np.sqrt(h * np.sum(np.square(values))))


def grad_norm_l2(values: np.ndarray, h: float) -> float:
    # Compact face differences, consistent with the three-point Laplacian.
    return float(np.sqrt(h * np.sum(np.square(face_gradient(values, h)))))


def neumann_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Three-point Laplacian with ghost reflection at both ends."""
    padded = np.concatenate(([values[0]], values, [values[-1]]))
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / (h * h)


def tridiag_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Solve a tridiagonal system; ``lower``/``upper`` have length n-1."""
    diag = np.asarray(diag, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = diag.size
    if lower.size != n - 1 or upper.size != n - 1 or rhs.shape[0] != n:
        raise ValueError("inconsistent tridiagonal band sizes")
    if np.any(diag == 0.0):
        raise SingularSystem(f"zero diagonal entry at row {int(np.argmax(diag == 0.0))}")
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    try:
        x = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    return x


def find_root_bracketed(phi: Callable[[float], float], lo: float, hi: float,
                        tol: float = 1e-12, maxiter: int = 500) -> float:
    """Root of ``phi`` inside ``[lo, hi]`` (Brent: bisection with secant/IQI steps)."""
    flo, fhi = phi(lo), phi(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0.0:
        raise NoSignChange(f"phi({lo:.6g})={flo:.6g}, phi({hi:.6g})={fhi:.6g}")
    return float(optimize.brentq(phi, lo, hi, xtol=tol * 1e-3, rtol=max(tol, 4.5e-16),
                                 maxiter=maxiter))
