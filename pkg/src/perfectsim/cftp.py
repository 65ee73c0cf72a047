"""Dominated coupling from the past for locally stable point processes.

The target density is a product of monotone factors.  Each factor reports the
log of its Papangelou conditional intensity together with location-wise upper
and lower bounds.  At a birth the upper process accepts when the mark falls
below the product of per-factor maxima over {upper, lower}, and the lower
process when it falls below the product of minima, so every factor is
evaluated exactly twice per birth regardless of how far apart the two
processes are.

The dominating process is generated backwards from time 0 (it is reversible),
in fixed-length time blocks whose random streams are keyed by
``(seed, block index)``.  Extending the horizon therefore only ever appends
blocks and never touches marks or times that were already drawn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "InvalidModelError",
    "NonCoalescenceError",
    "ConsistencyError",
    "MarkedPoint",
    "RectangleSpace",
    "LatticeSpace",
    "Trajectory",
    "Factor",
    "RateFactor",
    "FactorModel",
    "UpperLowerPair",
    "CFTPResult",
    "simulate_dominating",
    "extend_backward",
    "init_pair",
    "evolve_pair",
    "run_cftp",
]

# slack on the "acceptance probability <= 1" check, in log space
_LOG_TOL = 1e-9


class InvalidModelError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """A declared factor bound was violated during a run."""


class NonCoalescenceError(RuntimeError):
    def __init__(self, horizon, upper_size, lower_size):
        self.horizon = horizon
        self.upper_size = upper_size
        self.lower_size = lower_size
        super().__init__(
            f"no coalescence by T={horizon:g}: |upper|={upper_size}, |lower|={lower_size}"
        )


@dataclass(frozen=True)
class MarkedPoint:
    id: int
    location: object
    mark: float
    birth_time: float
    # 0.0 means the point is still alive at time 0
    death_time: float


# ---------------------------------------------------------------------------
# dominating rate specifications


class RectangleSpace:
    """Constant dominating rate on an axis-aligned rectangle."""

    def __init__(self, window, rate):
        x0, y0, x1, y1 = map(float, window)
        if not (x1 > x0 and y1 > y0):
            raise InvalidModelError(f"window {window} has zero area")
        if not (np.isfinite(rate) and rate > 0):
            raise InvalidModelError(f"dominating rate must be finite and positive, got {rate}")
        self.window = (x0, y0, x1, y1)
        self.rate = float(rate)
        self.area = (x1 - x0) * (y1 - y0)
        self.total_rate = self.rate * self.area
        self._log_rate = math.log(self.rate)

    def sample(self, rng, n):
        x0, y0, x1, y1 = self.window
        u = rng.random((n, 2))
        return np.column_stack([x0 + u[:, 0] * (x1 - x0), y0 + u[:, 1] * (y1 - y0)])

    def log_rate(self, loc):
        return self._log_rate

    def log_rates(self, locs):
        return np.full(len(locs), self._log_rate)


class LatticeSpace:
    """Per-site dominating rates on a finite set of labelled sites."""

    def __init__(self, rates, labels=None):
        rates = np.asarray(rates, dtype=float)
        if rates.ndim != 1 or rates.size == 0:
            raise InvalidModelError("need a non-empty 1-d array of site rates")
        if not np.all(np.isfinite(rates)) or np.any(rates <= 0):
            raise InvalidModelError("site rates must be finite and positive")
        self.rates = rates
        self.labels = np.arange(rates.size) if labels is None else np.asarray(labels, dtype=np.int64)
        if self.labels.shape != rates.shape:
            raise InvalidModelError("labels and rates differ in length")
        self.total_rate = float(rates.sum())
        self._p = rates / self.total_rate
        self._log = dict(zip(self.labels.tolist(), np.log(rates).tolist()))

    def sample(self, rng, n):
        return self.labels[rng.choice(self.rates.size, size=n, p=self._p)]

    def log_rate(self, loc):
        return self._log[int(loc)]

    def log_rates(self, locs):
        return np.array([self._log[int(s)] for s in locs], dtype=float)


# ---------------------------------------------------------------------------
# dominating trajectory


def _stream(seed, key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


@dataclass
class _Block:
    ids: np.ndarray
    locs: np.ndarray
    marks: np.ndarray
    births: np.ndarray
    deaths: np.ndarray


class Trajectory:
    """Backward-extended dominating birth-death process with persisted randomness.

    Block ``b >= 0`` holds the points whose death time lies in
    ``[-(b+1)*block, -b*block)``; the points alive at time 0 come from a
    separate stream.  Each point gets an Exp(1) lifetime, which realises death
    rate 1 forwards in time.
    """

    def __init__(self, space, seed, horizon=0.0, block=1.0, _blocks=None):
        if block <= 0:
            raise ValueError("block length must be positive")
        self.space = space
        self.seed = int(seed)
        self.block = float(block)
        self.horizon = 0.0
        self._blocks = dict(_blocks or {})
        self._cache = None
        if -1 not in self._blocks:
            self._blocks[-1] = self._make_survivors()
        self._grow(horizon)

    # generation ---------------------------------------------------------

    def _make_survivors(self):
        rng = _stream(self.seed, 0)
        n = rng.poisson(self.space.total_rate)
        lifetimes = rng.exponential(1.0, n)
        locs = self.space.sample(rng, n)
        marks = rng.random(n)
        ids = np.arange(n, dtype=np.int64)
        return _Block(ids, locs, marks, -lifetimes, np.zeros(n))

    def _make_block(self, b):
        rng = _stream(self.seed, b + 1)
        n = rng.poisson(self.space.total_rate * self.block)
        deaths = -(b + rng.random(n)) * self.block
        lifetimes = rng.exponential(1.0, n)
        locs = self.space.sample(rng, n)
        marks = rng.random(n)
        ids = ((b + 1) << 32) + np.arange(n, dtype=np.int64)
        return _Block(ids, locs, marks, deaths - lifetimes, deaths)

    def _grow(self, horizon):
        need = math.ceil(horizon / self.block - 1e-12)
        for b in range(need):
            if b not in self._blocks:
                self._blocks[b] = self._make_block(b)
                self._cache = None
        self.horizon = max(self.horizon, float(horizon))

    # access -------------------------------------------------------------

    def _arrays(self):
        if self._cache is None:
            blocks = [self._blocks[k] for k in sorted(self._blocks)]
            self._cache = tuple(
                np.concatenate([getattr(bl, name) for bl in blocks])
                for name in ("ids", "locs", "marks", "births", "deaths")
            )
        return self._cache

    def arrays(self, T=None):
        """(ids, locs, marks, births, deaths) of every point alive somewhere in [-T, 0]."""
        T = self.horizon if T is None else T
        if T > self.horizon + 1e-12:
            raise ValueError(f"trajectory only covers [-{self.horizon}, 0]")
        ids, locs, marks, births, deaths = self._arrays()
        keep = (births < 0) & ((deaths == 0) | (deaths > -T))
        return ids[keep], locs[keep], marks[keep], births[keep], deaths[keep]

    def events(self, T=None):
        ids, locs, marks, births, deaths = self.arrays(T)
        return [
            MarkedPoint(int(i), _as_loc(l), float(m), float(b), float(d))
            for i, l, m, b, d in zip(ids, locs, marks, births, deaths)
        ]

    def state_at(self, t):
        """Ids of the dominating points alive at time ``t`` (``-horizon <= t <= 0``)."""
        ids, _, _, births, deaths = self.arrays()
        alive = (births <= t) & ((deaths == 0) | (deaths > t))
        return set(ids[alive].tolist())


def _as_loc(loc):
    return tuple(loc.tolist()) if np.ndim(loc) else int(loc)


def simulate_dominating(space, T, seed, block=1.0):
    """Dominating process on ``[-T, 0]``; its time-0 section is the Poisson equilibrium."""
    if not T > 0:
        raise ValueError("T must be positive")
    return Trajectory(space, seed, horizon=T, block=block)


def extend_backward(trajectory, additional_S):
    """Return the trajectory extended back to ``-(T + additional_S)``, reusing all existing draws."""
    if not additional_S > 0:
        raise ValueError("additional_S must be positive")
    return Trajectory(
        trajectory.space,
        trajectory.seed,
        horizon=trajectory.horizon + additional_S,
        block=trajectory.block,
        _blocks=trajectory._blocks,
    )


# ---------------------------------------------------------------------------
# factor models


class Factor:
    """One monotone factor of the target density.

    Subclasses implement ``log_ratio(loc, config)``, the log Papangelou
    conditional intensity of adding a point at ``loc`` to ``config``, and the
    vectorised bounds ``log_upper(locs)`` / ``log_lower(locs)``.  A lower bound
    of zero is expressed as ``-inf``.
    """

    increasing = True

    def log_ratio(self, loc, config):
        raise NotImplementedError

    def log_upper(self, locs):
        raise NotImplementedError

    def log_lower(self, locs):
        raise NotImplementedError


class RateFactor(Factor):
    """lambda^N(X): constant conditional intensity."""

    increasing = True

    def __init__(self, lam):
        if not lam > 0:
            raise InvalidModelError(f"rate must be positive, got {lam}")
        self.lam = float(lam)
        self._log = math.log(lam)

    def log_ratio(self, loc, config):
        return self._log

    def log_upper(self, locs):
        return self._log

    def log_lower(self, locs):
        return self._log


@dataclass
class FactorModel:
    factors: Sequence[Factor]
    space: object
    new_config: Callable[[], object]
    name: str = "model"
    # window that configurations are reported in, when it differs from the space
    window: tuple = None

    def log_dominating_rates(self, locs):
        return self.space.log_rates(locs)

    def log_lower_init(self, locs):
        """Log keep-probability used to thin D(-T) into the initial lower process."""
        total = -self.space.log_rates(locs)
        for f in self.factors:
            total = total + f.log_lower(locs)
        return total

    def check_bounds(self, locs):
        """The dominating rate must cover the product of factor upper bounds."""
        bound = sum(np.broadcast_to(f.log_upper(locs), (len(locs),)) for f in self.factors)
        excess = bound - self.space.log_rates(locs)
        if np.any(excess > _LOG_TOL):
            raise InvalidModelError(
                f"dominating rate is below the product of factor bounds (excess {excess.max():.3g} in log)"
            )


# ---------------------------------------------------------------------------
# upper / lower processes


@dataclass
class UpperLowerPair:
    upper: object
    lower: object
    clock: float
    ratio_evaluations: int = 0
    births: int = 0

    def coalesced(self):
        return self.upper.ids == self.lower.ids


def init_pair(trajectory, model, T=None):
    """Upper = D(-T); lower = D(-T) thinned by the product of per-factor minima."""
    T = trajectory.horizon if T is None else T
    ids, locs, marks, births, deaths = trajectory.arrays(T)
    alive = births <= -T
    upper, lower = model.new_config(), model.new_config()
    if alive.any():
        a_ids, a_locs, a_marks = ids[alive], locs[alive], marks[alive]
        keep = np.log(a_marks) <= model.log_lower_init(a_locs)
        for pid, loc, k in zip(a_ids.tolist(), a_locs, keep):
            loc = _as_loc(loc)
            upper.add(pid, loc)
            if k:
                lower.add(pid, loc)
    return UpperLowerPair(upper, lower, -float(T))


def _schedule(trajectory, T):
    ids, locs, marks, births, deaths = trajectory.arrays(T)
    born = births > -T
    dies = (deaths < 0) & (deaths > -T)
    times = np.concatenate([births[born], deaths[dies]])
    kind = np.concatenate([np.ones(born.sum(), bool), np.zeros(dies.sum(), bool)])
    idx = np.concatenate([np.flatnonzero(born), np.flatnonzero(dies)])
    order = np.argsort(times, kind="stable")
    return times[order], kind[order], idx[order], ids, locs, marks


def evolve_pair(pair, trajectory, model, observer=None):
    """Run the coupled upper and lower processes forward from ``pair.clock`` to 0.

    ``observer(time, pair)`` is called after every event when given.
    """
    T = -pair.clock
    times, kind, idx, ids, locs, marks = _schedule(trajectory, T)
    upper, lower = pair.upper, pair.lower
    factors = list(model.factors)
    space = model.space
    log_marks = np.log(marks)
    id_list = ids.tolist()
    n_evals = 0
    n_births = 0
    for t, is_birth, i in zip(times.tolist(), kind.tolist(), idx.tolist()):
        pid = id_list[i]
        if is_birth:
            loc = _as_loc(locs[i])
            log_up = log_lo = -space.log_rate(loc)
            for f in factors:
                a = f.log_ratio(loc, upper)
                b = f.log_ratio(loc, lower)
                if a >= b:
                    log_up += a
                    log_lo += b
                else:
                    log_up += b
                    log_lo += a
            n_evals += 2 * len(factors)
            n_births += 1
            if log_up > _LOG_TOL:
                raise ConsistencyError(
                    f"upper acceptance probability exp({log_up:.3g}) > 1 at {loc}; factor bounds are wrong"
                )
            lm = log_marks[i]
            if lm < log_up:
                upper.add(pid, loc)
                if lm < log_lo:
                    lower.add(pid, loc)
        else:
            upper.discard(pid)
            lower.discard(pid)
        pair.clock = t
        if observer is not None:
            observer(t, pair)
    pair.clock = 0.0
    pair.ratio_evaluations += n_evals
    pair.births += n_births
    return pair


@dataclass
class CFTPResult:
    config: object
    horizon: float
    doublings: int
    dominating_size: int
    ratio_evaluations: int = 0
    history: list = field(default_factory=list, repr=False)


def run_cftp(model, seed, T0=1.0, max_doublings=30, block=1.0, observer=None):
    """Exact draw from the target of ``model``.

    The horizon runs T0, 2*T0, 4*T0, ... on one persisted trajectory until the
    upper and lower processes agree at time 0.  ``observer(T, time, pair)`` sees
    every event of every pass.
    """
    if not T0 > 0:
        raise ValueError("T0 must be positive")
    traj = simulate_dominating(model.space, T0, seed, block=block)
    T = float(T0)
    evals = 0
    for k in range(max_doublings + 1):
        if k:
            traj = extend_backward(traj, T)
            T *= 2
        pair = init_pair(traj, model, T)
        obs = None if observer is None else (lambda t, p, _T=T: observer(_T, t, p))
        evolve_pair(pair, traj, model, observer=obs)
        evals += pair.ratio_evaluations
        if pair.coalesced():
            return CFTPResult(pair.upper, T, k, len(traj.state_at(0.0)), evals)
    raise NonCoalescenceError(T, len(pair.upper), len(pair.lower))

