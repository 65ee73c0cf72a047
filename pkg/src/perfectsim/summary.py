"""K, L and T summary functions with translation edge correction, plus envelopes."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .cftp import run_cftp
from .spatial import SpatialPattern

__all__ = [
    "InsufficientDataError",
    "SummaryFunction",
    "Envelope",
    "default_r_grid",
    "estimate_K",
    "estimate_L",
    "estimate_T",
    "triple_counts",
    "transform_T",
    "poisson_T_constant",
    "calibrate_T",
    "envelope",
    "draw_seeds",
]


class InsufficientDataError(ValueError):
    pass


@dataclass
class SummaryFunction:
    r: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, float)
        self.values = np.asarray(self.values, float)
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("r grid must be strictly increasing")


@dataclass
class Envelope:
    r: np.ndarray
    lo: np.ndarray
    mean: np.ndarray
    hi: np.ndarray
    n: int
    curves: np.ndarray = field(repr=False, default=None)

    def contains(self, values):
        values = np.asarray(values)
        return (values >= self.lo) & (values <= self.hi)


def default_r_grid(window, n=512):
    x0, y0, x1, y1 = window
    return np.linspace(0.0, min(x1 - x0, y1 - y0) / 4.0, n)


def _pattern(pattern):
    if not isinstance(pattern, SpatialPattern):
        pattern = SpatialPattern(pattern)
    return pattern


def _prepare(pattern, r, min_points):
    pattern = _pattern(pattern)
    n = len(pattern)
    if n < min_points:
        raise InsufficientDataError(f"need at least {min_points} points, got {n}")
    r = default_r_grid(pattern.window) if r is None else np.asarray(r, float)
    x0, y0, x1, y1 = pattern.window
    if r.max() >= min(x1 - x0, y1 - y0) / 2:
        raise ValueError("largest distance must be below half the shorter window side")
    return pattern, r


def _pair_terms(pattern, edge):
    """Pair distances and per-pair edge weights |W| / |W n (W + h)| (i < j)."""
    x0, y0, x1, y1 = pattern.window
    a, b = x1 - x0, y1 - y0
    pts = pattern.points
    i, j = np.triu_indices(len(pts), 1)
    dx = np.abs(pts[i, 0] - pts[j, 0])
    dy = np.abs(pts[i, 1] - pts[j, 1])
    if edge == "periodic":
        dx = np.minimum(dx, a - dx)
        dy = np.minimum(dy, b - dy)
        w = np.ones_like(dx)
    elif edge == "translation":
        w = a * b / ((a - dx) * (b - dy))
    else:
        raise ValueError(f"unknown edge correction {edge!r}")
    return np.hypot(dx, dy), w


def _cumulative(d, w, r):
    order = np.argsort(d)
    cum = np.concatenate([[0.0], np.cumsum(w[order])])
    return cum[np.searchsorted(d[order], r, side="right")]


def estimate_K(pattern, r=None, edge="translation"):
    """Translation-corrected Ripley K: |W| / (n(n-1)) * sum_{i != j} e_ij 1{d_ij <= r}."""
    pattern, r = _prepare(pattern, r, 2)
    n = len(pattern)
    d, w = _pair_terms(pattern, edge)
    K = 2.0 * pattern.area * _cumulative(d, w, r) / (n * (n - 1))
    return SummaryFunction(r, K, "K", {"n": n, "edge": edge})


def estimate_L(pattern, r=None, edge="translation"):
    K = estimate_K(pattern, r, edge)
    return SummaryFunction(K.r, np.sqrt(K.values / np.pi), "L", K.meta)


def triple_counts(pattern, r, edge="translation"):
    """Weighted count of unordered triples whose three pairwise distances are all <= r.

    Each triple is weighted by |W| / |W n (W - a) n (W - b)| with a, b the
    offsets from one vertex to the other two.  Only triples whose largest side
    is at most max(r) are enumerated.
    """
    pattern = _pattern(pattern)
    r = np.atleast_1d(np.asarray(r, float))
    pts = pattern.points
    n = len(pts)
    x0, y0, x1, y1 = pattern.window
    a, b = x1 - x0, y1 - y0
    if n < 3:
        return np.zeros_like(r)
    D = squareform(pdist(pts))
    adj = D <= r.max()
    sides, weights = [], []
    for i in range(n - 2):
        nb = np.flatnonzero(adj[i, i + 1:]) + i + 1
        if len(nb) < 2:
            continue
        jj, kk = np.triu_indices(len(nb), 1)
        j, k = nb[jj], nb[kk]
        ok = adj[j, k]
        if not ok.any():
            continue
        j, k = j[ok], k[ok]
        sides.append(np.maximum(np.maximum(D[i, j], D[i, k]), D[j, k]))
        if edge == "translation":
            xs = np.stack([np.full(len(j), pts[i, 0]), pts[j, 0], pts[k, 0]])
            ys = np.stack([np.full(len(j), pts[i, 1]), pts[j, 1], pts[k, 1]])
            wx = a - (xs.max(0) - xs.min(0))
            wy = b - (ys.max(0) - ys.min(0))
            weights.append(a * b / (wx * wy))
        else:
            weights.append(np.ones(len(j)))
    if not sides:
        return np.zeros_like(r)
    return _cumulative(np.concatenate(sides), np.concatenate(weights), r)


def estimate_T(pattern, r=None, edge="translation"):
    """Third-order T function: |W|^2 / (n(n-1)(n-2)) * sum over ordered triples.

    Poisson value is c0 * r^4 with c0 = pi * (pi - 3*sqrt(3)/4).
    """
    pattern, r = _prepare(pattern, r, 3)
    n = len(pattern)
    counts = triple_counts(pattern, r, edge)
    T = 6.0 * pattern.area**2 * counts / (n * (n - 1) * (n - 2))
    return SummaryFunction(r, T, "T", {"n": n, "edge": edge})


def poisson_T_constant():
    """Area of {(a, b): |a|, |b|, |a - b| <= 1} in R^2 x R^2."""
    return np.pi * (np.pi - 3 * np.sqrt(3) / 4)


def transform_T(T_estimate, calibration):
    """(c * T(r))^(1/4) - r, which is zero for a Poisson process when c * T(r) = r^4."""
    if not calibration > 0:
        raise ValueError("calibration constant must be positive")
    vals = (calibration * np.clip(T_estimate.values, 0, None)) ** 0.25 - T_estimate.r
    meta = dict(T_estimate.meta, calibration=calibration)
    return SummaryFunction(T_estimate.r, vals, "T-transformed", meta)


def calibrate_T(intensity, window=(0.0, 0.0, 1.0, 1.0), r=None, n_sims=200, seed=0):
    """Monte Carlo calibration constant c with c * T(r) ~ r^4 under Poisson.

    Fits T = s * r^4 by least squares to the mean of simulated Poisson patterns and
    returns 1/s.
    """
    x0, y0, x1, y1 = window
    area = (x1 - x0) * (y1 - y0)
    r = default_r_grid(window, 64)[1:] if r is None else np.asarray(r, float)
    rng = np.random.default_rng(seed)
    sums = np.zeros_like(r)
    done = 0
    while done < n_sims:
        n = rng.poisson(intensity * area)
        if n < 3:
            continue
        pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
        sums += estimate_T(SpatialPattern(pts, window), r).values
        done += 1
    mean_T = sums / n_sims
    r4 = r**4
    slope = float(r4 @ mean_T / (r4 @ r4))
    return 1.0 / slope


def draw_seeds(seed, n):
    """Per-draw integer seeds; draw i depends only on (seed, i)."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(n)]


def _curve(args):
    model, statistic, s, window, r, cftp_kw = args
    res = run_cftp(model, s, **cftp_kw)
    return statistic(res.config.pattern(window), r).values


def envelope(model, statistic, n_sims=19, seed=0, r=None, window=None, workers=1, **cftp_kw):
    """Pointwise min / mean / max of ``statistic`` over independent exact draws.

    ``statistic(pattern, r)`` returns a SummaryFunction.  Draw ``i`` uses seed
    ``(seed, i)``, so envelopes are reproducible and independent of ``workers``
    (which needs a picklable statistic).
    """
    if n_sims < 2:
        raise ValueError("need at least two simulations")
    window = window or model.window or model.space.window
    r = default_r_grid(window) if r is None else np.asarray(r, float)
    jobs = [(model, statistic, s, window, r, cftp_kw) for s in draw_seeds(seed, n_sims)]
    if workers > 1:
        with ProcessPoolExecutor(min(workers, n_sims)) as ex:
            curves = list(ex.map(_curve, jobs))
    else:
        curves = [_curve(j) for j in jobs]
    curves = np.array(curves)
    return Envelope(r, curves.min(0), curves.mean(0), curves.max(0), n_sims, curves)
