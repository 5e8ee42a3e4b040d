"""Change of variables between a density ``u`` on [0, 1] and ``f`` on [0, M].

``U`` is the running integral of ``u``; ``F`` is its inverse and ``f = dF/dy``.
Both directions work with piecewise-linear running integrals of
piecewise-constant data, which are inverted exactly segment by segment.  Each
output cell receives the exact average of the derivative of the inverted
profile, i.e. the cell average of ``1/u(F(y))`` (resp. ``1/f(Y(x))``), so the
mass identities hold to round-off.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import MassDefect, NonPositiveInput
from .numerics import GridField, cumsum_midpoint, face_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonotoneProfile:
    """Strictly increasing piecewise-linear map given by its values at grid faces."""

    grid: np.ndarray    # faces of the source variable
    faces: np.ndarray   # running integral at those faces

    @classmethod
    def from_field(cls, field: GridField) -> "MonotoneProfile":
        if np.any(field.values <= 0):
            raise NonPositiveInput("profile requires strictly positive cell values")
        return cls(field.faces, cumsum_midpoint(field))

    @property
    def total(self) -> float:
        return float(self.faces[-1])

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.faces)

    def inverse(self, targets) -> np.ndarray:
        """Exact inverse of the piecewise-linear map (linear extrapolation past the ends)."""
        targets = np.asarray(targets, dtype=float)
        n = self.grid.size - 1
        idx = np.clip(np.searchsorted(self.faces, targets, side="right") - 1, 0, n - 1)
        x0 = self.grid[idx]
        y0 = self.faces[idx]
        slope = (self.faces[idx + 1] - y0) / (self.grid[idx + 1] - x0)
        return x0 + (targets - y0) / slope


def u_to_f(u: GridField, Nf: int) -> GridField:
    """Map a positive density on [0, 1] to ``f`` on [0, M] with ``M = int u``."""
    if np.any(u.values <= 0):
        raise NonPositiveInput("u must be strictly positive")
    M = u.integral()
    profile = MonotoneProfile.from_field(u)
    targets = face_points(Nf, M)
    F = profile.inverse(targets)
    F[0] = 0.0
    F[-1] = u.domain_length
    return GridField(np.diff(F) / (M / Nf), M)


def f_to_u(f: GridField, Nu: int, *, mass_tol: float = 1e-6, return_defect: bool = False):
    """Map ``f`` on [0, M] back to a density on [0, 1].

    The result is not rescaled; ``mean(u) - M`` is the reported defect.
    """
    if np.any(f.values <= 0):
        raise NonPositiveInput("f must be strictly positive")
    mass = f.integral()
    if abs(mass - 1.0) > mass_tol:
        raise MassDefect(f"int f = {mass:.12g} differs from 1 by more than {mass_tol:g}")
    M = f.domain_length
    profile = MonotoneProfile.from_field(f)
    Y = profile.inverse(face_points(Nu, 1.0))
    Y[0] = 0.0
    u = GridField(np.diff(Y) * Nu, 1.0)
    defect = u.mean() - M
    logger.debug("f_to_u mean defect %.3e", defect)
    if return_defect:
        return u, defect
    return u


def odw_residual(f: GridField, u: GridField) -> float:
    """``max_y |f(y) u(F(y)) - 1|`` at the centres of the ``f`` cells."""
    F = MonotoneProfile.from_field(f)
    x = F(f.centers)
    idx = np.clip((x * u.count).astype(int), 0, u.count - 1)
    return float(np.max(np.abs(f.values * u.values[idx] - 1.0)))
