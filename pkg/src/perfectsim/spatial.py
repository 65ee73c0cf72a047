"""Planar patterns and the (multiscale) area-interaction family.

Coverage m(X + G) of a union of discs is measured on a square grid anchored at
the origin.  A point covers the grid cells whose centres lie within ``r`` of the
centre of the cell containing that point, so every disc has exactly the same
cell count and the bounds handed to the CFTP engine are exact for the
discretised density.  Grains are never clipped to the window.
"""
from __future__ import annotations

import math
from functools import partial
from dataclasses import dataclass, field

import numpy as np

from .cftp import Factor, FactorModel, InvalidModelError, RateFactor, RectangleSpace

__all__ = [
    "SpatialPattern",
    "Grain",
    "CoverageField",
    "PatternState",
    "MultiscaleParams",
    "coverage_measure",
    "incremental_coverage",
    "RateFactor",
    "AreaInteractionFactor",
    "area_interaction_factor",
    "area_interaction_model",
    "multiscale_model",
    "log_density",
]

UNIT_SQUARE = (0.0, 0.0, 1.0, 1.0)


@dataclass
class SpatialPattern:
    points: np.ndarray
    window: tuple = UNIT_SQUARE

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        x0, y0, x1, y1 = self.window
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"window {self.window} has zero area")
        inside = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        if not inside.all():
            raise ValueError(f"{(~inside).sum()} points fall outside the window")
        self.points = pts
        self.window = tuple(map(float, self.window))

    def __len__(self):
        return len(self.points)

    @property
    def area(self):
        x0, y0, x1, y1 = self.window
        return (x1 - x0) * (y1 - y0)

    def shifted(self, dx, dy):
        x0, y0, x1, y1 = self.window
        return SpatialPattern(self.points + [dx, dy], (x0 + dx, y0 + dy, x1 + dx, y1 + dy))


@dataclass(frozen=True)
class Grain:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidModelError(f"grain radius must be positive, got {self.radius}")


class CoverageField:
    """Grid discretisation of one disc grain.

    ``h`` defaults to radius/20.  ``stencil`` is the boolean disc mask of
    shape (2R+1, 2R+1) and ``disc_area`` its area, the grid version of m(G).
    """

    def __init__(self, grain, h=None):
        if not isinstance(grain, Grain):
            grain = Grain(float(grain))
        self.grain = grain
        r = grain.radius
        self.h = r / 20.0 if h is None else float(h)
        if not self.h > 0:
            raise ValueError("grid resolution must be positive")
        R = int(math.floor(r / self.h + 1e-9))
        self.reach = R
        o = np.arange(-R, R + 1)
        dx, dy = np.meshgrid(o, o, indexing="ij")
        self.stencil = (dx**2 + dy**2) * self.h**2 <= r * r * (1 + 1e-12)
        self.offsets = np.column_stack([dx[self.stencil], dy[self.stencil]])
        self.disc_cells = int(self.stencil.sum())
        self.cell_area = self.h**2
        self.disc_area = self.disc_cells * self.cell_area

    def cells(self, xy):
        return np.floor(np.asarray(xy, dtype=float) / self.h).astype(np.int64)

    def uncovered_cells(self, cell, others):
        """Cells of the disc at ``cell`` not covered by discs at ``others`` (cell indices)."""
        R = self.reach
        S = self.stencil
        if len(others) == 0:
            return self.disc_cells
        d = np.asarray(others) - cell
        near = np.abs(d).max(axis=1) <= 2 * R
        if not near.any():
            return self.disc_cells
        n = 2 * R + 1
        covered = np.zeros_like(S)
        for dx, dy in d[near].tolist():
            # neighbour stencil in our frame covers S[o - d]
            xs, xe = max(0, dx), min(n, n + dx)
            ys, ye = max(0, dy), min(n, n + dy)
            covered[xs:xe, ys:ye] |= S[xs - dx:xe - dx, ys - dy:ye - dy]
        return int(np.count_nonzero(S & ~covered))


def coverage_measure(pattern, grain, field=None):
    """Grid area of the union of discs of radius ``grain`` around the pattern points."""
    field = field if field is not None else CoverageField(grain)
    pts = pattern.points if isinstance(pattern, SpatialPattern) else np.asarray(pattern, float).reshape(-1, 2)
    if len(pts) == 0:
        return 0.0
    cells = np.unique(field.cells(pts), axis=0)
    all_cells = (cells[:, None, :] + field.offsets[None, :, :]).reshape(-1, 2)
    return len(np.unique(all_cells, axis=0)) * field.cell_area


def incremental_coverage(u, pattern, grain, field=None):
    """m((u + G) minus (X + G)): the area added to the dilation by a new point at ``u``."""
    field = field if field is not None else CoverageField(grain)
    pts = pattern.points if isinstance(pattern, SpatialPattern) else np.asarray(pattern, float).reshape(-1, 2)
    return field.uncovered_cells(field.cells(u), field.cells(pts)) * field.cell_area


class PatternState:
    """Mutable point configuration used as an upper or lower CFTP process."""

    def __init__(self, fields=(), scale=1.0):
        self.fields = list(fields)
        self.scale = scale
        self._pts = {}
        self._arr = None
        self._cells = None

    @property
    def ids(self):
        return self._pts.keys()

    def __len__(self):
        return len(self._pts)

    def add(self, pid, loc):
        self._pts[pid] = loc
        self._arr = None

    def discard(self, pid):
        if self._pts.pop(pid, None) is not None:
            self._arr = None

    def items(self):
        return self._pts.items()

    def points(self):
        if self._arr is None:
            self._arr = np.array(list(self._pts.values()), dtype=float).reshape(-1, 2)
            self._cells = [f.cells(self._arr) for f in self.fields]
        return self._arr

    def uncovered_area(self, loc, k):
        self.points()
        f = self.fields[k]
        return f.uncovered_cells(f.cells(loc), self._cells[k]) * f.cell_area

    def pattern(self, window):
        """The configuration in caller units (model coordinates divided by ``scale``)."""
        return SpatialPattern(self.points() / self.scale, window)


class AreaInteractionFactor(Factor):
    """gamma^(-m(X + G)); attractive for gamma > 1, repulsive for gamma < 1.

    ``slot`` indexes the CoverageField inside the PatternState.
    """

    def __init__(self, log_gamma, field, slot):
        if not np.isfinite(log_gamma):
            raise InvalidModelError("gamma must be positive and finite")
        self.log_gamma = float(log_gamma)
        self.field = field
        self.slot = slot
        self.increasing = self.log_gamma >= 0
        extreme = -self.log_gamma * field.disc_area
        self._upper = max(0.0, extreme)
        self._lower = min(0.0, extreme)

    def log_ratio(self, loc, config):
        if self.log_gamma == 0.0:
            return 0.0
        return -self.log_gamma * config.uncovered_area(loc, self.slot)

    def log_upper(self, locs):
        return self._upper

    def log_lower(self, locs):
        return self._lower


def area_interaction_factor(lam, gamma, grain, field=None):
    """Factors for lambda^N gamma^(-m(X+G)); the interaction factor uses slot 0."""
    if not gamma > 0:
        raise InvalidModelError(f"gamma must be positive, got {gamma}")
    field = field if field is not None else CoverageField(grain)
    return [RateFactor(lam), AreaInteractionFactor(math.log(gamma), field, 0)]


def _model(factors, fields, window, name, scale=1.0):
    log_rate = sum(f.log_upper(None) for f in factors)
    space = RectangleSpace(tuple(scale * v for v in window), math.exp(log_rate))
    return FactorModel(factors, space, partial(PatternState, fields, scale), name=name, window=tuple(window))


def area_interaction_model(lam, gamma, radius, window=UNIT_SQUARE, h=None):
    field = CoverageField(Grain(radius), h)
    return _model(area_interaction_factor(lam, gamma, None, field), [field], window, "area-interaction")


@dataclass
class MultiscaleParams:
    """Multiscale area-interaction parameters, interaction strengths on a log10 scale.

    ``extra`` holds further (log10_gamma, radius) scales, e.g. the third scale
    of a three-scale model.
    """

    lam: float
    log10_gamma1: float
    log10_gamma2: float
    r1: float
    r2: float
    extra: list = field(default_factory=list)

    @classmethod
    def from_gammas(cls, lam, gamma1, gamma2, r1, r2, extra=()):
        return cls(lam, math.log10(gamma1), math.log10(gamma2), r1, r2,
                   [(math.log10(g), r) for g, r in extra])

    def validate(self):
        if not self.lam > 0:
            raise InvalidModelError("lambda must be positive")
        if self.log10_gamma1 < 0:
            raise InvalidModelError("gamma1 must be >= 1")
        if self.log10_gamma2 > 0:
            raise InvalidModelError("gamma2 must be in (0, 1]")
        for g, r in [(self.log10_gamma1, self.r1), (self.log10_gamma2, self.r2), *self.extra]:
            if not np.isfinite(g):
                raise InvalidModelError("gammas must be positive and finite")
            Grain(r)

    def scales(self):
        return [(self.log10_gamma1, self.r1), (self.log10_gamma2, self.r2), *self.extra]


def multiscale_model(params, window=UNIT_SQUARE, h=None, length_scale=1.0):
    """FactorModel for lambda^N prod_i gamma_i^(-m(X + G_i)).

    Dominating rate is lambda times the product of gamma_i^(-m(G_i)) over the
    repulsive scales; the lower thinning probability is the product of
    gamma_i^(-m(G_i)) over attractive scales divided by the same repulsive
    product.

    ``length_scale`` s measures lengths in units of 1/s of the window: the
    process runs on s*window with radii s*r (so areas, and hence lambda and
    the gammas, are per (1/s)^2), and patterns come back in window units.
    ``h`` is in model units.
    """
    params.validate()
    if not length_scale > 0:
        raise InvalidModelError("length_scale must be positive")
    fields, factors = [], [RateFactor(params.lam)]
    for slot, (lg10, r) in enumerate(params.scales()):
        field_ = CoverageField(Grain(r * length_scale), h)
        fields.append(field_)
        factors.append(AreaInteractionFactor(lg10 * math.log(10.0), field_, slot))
    return _model(factors, fields, window, "multiscale area-interaction", length_scale)


def log_density(points, model, length_scale=1.0):
    """Unnormalised log density of a pattern (caller units) under a spatial factor model."""
    pts = np.asarray(points, float).reshape(-1, 2) * length_scale
    total = 0.0
    for f in model.factors:
        if isinstance(f, RateFactor):
            total += len(pts) * f._log
        else:
            total += -f.log_gamma * coverage_measure(pts, None, f.field)
    return total
