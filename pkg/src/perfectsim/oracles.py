"""Independent reference samplers and invariant checks for the CFTP engine.

The rejection samplers propose from the dominating Poisson law and accept
with probability p(X) / (p(empty) * prod lambda_dom), which is at most one
for a locally stable density.  They share nothing with the coupled
upper/lower machinery, so agreement in law is a real check of exactness.
"""
from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .cftp import run_cftp
from .denoise import (
    TIER_EXACT,
    HyperParams,
    lattice_factor_model,
    large_rate_policy,
    log_dominating_rates,
    log_posterior_xi,
    neighbourhood_sites,
)
from .spatial import log_density

__all__ = [
    "empirical",
    "tv_distance",
    "lattice_rejection_sample",
    "spatial_rejection_counts",
    "check_invariants",
    "selftest",
]


def empirical(samples):
    c = Counter(samples)
    n = sum(c.values())
    return {k: v / n for k, v in c.items()}


def tv_distance(p, q):
    """Total variation between two distributions given as {outcome: probability}."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _batch_log_posterior(xi, dhat, hyper, nbhd_mask):
    """log p(xi | dhat) up to a constant for a batch of configurations (rows)."""
    s2, t2 = hyper.sigma**2, hyper.tau**2
    covered = ((xi > 0).astype(np.int64) @ nbhd_mask) > 0
    v = s2 + t2 * xi
    return (xi.sum(1) * math.log(hyper.lam) - math.log(hyper.gamma) * covered.sum(1)
            + np.sum(-dhat**2 / (2 * v) - 0.5 * np.log(2 * np.pi * v), axis=1))


def lattice_rejection_sample(dhat, hyper, n, seed, batch=65536):
    """n exact draws of xi (as tuples) from the integrated posterior on an all-exact lattice.

    The batch density is cross-checked against ``log_posterior_xi`` on the
    first proposals so the two formulations cannot drift apart.
    """
    dhat = np.asarray(dhat, float)
    log_rates = log_dominating_rates(dhat, hyper)
    if np.any(large_rate_policy(log_rates, hyper) != TIER_EXACT):
        raise ValueError("oracle needs every site in the exact tier")
    J = int(round(math.log2(dhat.size + 1)))
    mask = np.zeros((dhat.size, dhat.size), np.int64)
    for s, b in enumerate(neighbourhood_sites(J)):
        mask[s, b] = 1
    rates = np.exp(log_rates)
    log0 = log_posterior_xi(np.zeros(dhat.size, np.int64), dhat, hyper)
    rng = np.random.default_rng(seed)
    out = []
    checked = False
    while len(out) < n:
        props = rng.poisson(rates, size=(batch, dhat.size))
        lp = _batch_log_posterior(props, dhat, hyper, mask)
        if not checked:
            ref = [log_posterior_xi(x, dhat, hyper) for x in props[:50]]
            if not np.allclose(lp[:50], ref, rtol=0, atol=1e-9):
                raise AssertionError("batch posterior disagrees with log_posterior_xi")
            checked = True
        log_acc = lp - log0 - props @ log_rates
        if np.any(log_acc > 1e-9):
            raise AssertionError("rejection bound violated; local stability fails")
        keep = np.log(rng.random(batch)) < log_acc
        out.extend(tuple(x) for x in props[keep].tolist())
    return out[:n]


def spatial_rejection_counts(model, n, seed, length_scale=1.0):
    """Point counts of n exact draws from a spatial factor model, by rejection from its dominating Poisson."""
    space = model.space
    rng = np.random.default_rng(seed)
    log_rate = math.log(space.rate)
    log0 = log_density(np.zeros((0, 2)), model)
    counts = []
    while len(counts) < n:
        k = rng.poisson(space.total_rate)
        pts = space.sample(rng, k) / length_scale
        log_acc = log_density(pts, model, length_scale) - log0 - k * log_rate
        if log_acc > 1e-9:
            raise AssertionError("rejection bound violated; local stability fails")
        if math.log(rng.random()) < log_acc:
            counts.append(k)
    return counts


# ---------------------------------------------------------------------------
# instrumented runs


def _ids(cfg):
    return frozenset(cfg.ids)


def _rebuild(model, items):
    cfg = model.new_config()
    for pid, loc in items:
        cfg.add(pid, loc)
    return cfg


def check_invariants(model, seed, rng=None, brackets=20, **cftp_kw):
    """Run CFTP with an observer and count violations of the coupling invariants.

    Checks, at every event of every pass: lower within upper within the
    dominating state (sandwiching); equality persists once reached
    (absorption); and for each pair of successive horizons T < 2T the nesting
    L_T within L_2T within U_2T within U_T at shared event times (funnelling).
    At ``brackets`` random events a configuration X strictly between lower and
    upper is built and min-product <= full ratio at X <= max-product <= 1 is
    checked at a random new location.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    violations = Counter()
    passes = {}

    def observer(T, t, pair):
        snaps = passes.setdefault(T, [])
        up, lo = _ids(pair.upper), _ids(pair.lower)
        if not lo <= up:
            violations["sandwich"] += 1
        if snaps and snaps[-1][1] == snaps[-1][2] and up != lo:
            violations["absorption"] += 1
        snaps.append((t, up, lo))
        if rng.random() < brackets / 200.0:
            _bracket(model, pair, rng, violations)

    res = run_cftp(model, seed, observer=observer, **cftp_kw)
    # dominating containment and funnelling, against the final trajectory
    from .cftp import simulate_dominating

    traj = simulate_dominating(model.space, res.horizon, seed, block=cftp_kw.get("block", 1.0))
    ids, _, _, births, deaths = traj.arrays()
    horizons = sorted(passes)
    for T in horizons:
        for t, up, lo in passes[T]:
            alive = (births <= t) & ((deaths == 0) | (deaths > t))
            if not up <= set(ids[alive].tolist()):
                violations["dominating"] += 1
    for T, T2 in zip(horizons, horizons[1:]):
        later = {t: (u, l) for t, u, l in passes[T2]}
        for t, up, lo in passes[T]:
            if t in later:
                u2, l2 = later[t]
                if not (lo <= l2 <= u2 <= up):
                    violations["funnel"] += 1
    return res, violations


def _bracket(model, pair, rng, violations):
    up_items = dict(pair.upper.items())
    lo_ids = set(pair.lower.ids)
    extra = [pid for pid in up_items if pid not in lo_ids]
    chosen = [pid for pid in extra if rng.random() < 0.5]
    X = _rebuild(model, [(pid, up_items[pid]) for pid in list(lo_ids) + chosen])
    loc = model.space.sample(rng, 1)[0]
    loc = tuple(loc.tolist()) if np.ndim(loc) else int(loc)
    base = -model.space.log_rate(loc)
    hi = lo = full = base
    for f in model.factors:
        a, b = f.log_ratio(loc, pair.upper), f.log_ratio(loc, pair.lower)
        hi += max(a, b)
        lo += min(a, b)
        full += f.log_ratio(loc, X)
    tol = 1e-9
    if not (lo <= full + tol and full <= hi + tol and hi <= tol):
        violations["bracket"] += 1


# ---------------------------------------------------------------------------
# selftest


def _lattice_case():
    dhat = np.array([1.5, -2.0, 0.5, 3.0, -1.0, 0.2, 2.5])
    return dhat, HyperParams(sigma=1.0, tau=1.0, lam=0.3, gamma=3.0)


def selftest(n_draws=2000, seed=0):
    """Quick oracle-equivalence suites; returns a list of (name, passed, detail)."""
    from .spatial import MultiscaleParams, multiscale_model
    from .wavelets import dwt, idwt

    out = []
    rng = np.random.default_rng(seed)

    x = rng.standard_normal((20, 256))
    err = max(np.max(np.abs(idwt(dwt(v, w), w) - v)) for v in x for w in ("haar", "la10"))
    out.append(("dwt round trip", err < 1e-10, f"max error {err:.2e}"))

    dhat, hyper = _lattice_case()
    model = lattice_factor_model(dhat, hyper)
    cftp = [tuple(run_cftp(model, s).config.xi().tolist()) for s in range(seed, seed + n_draws)]
    oracle = lattice_rejection_sample(dhat, hyper, 10 * n_draws, seed + 10**6)
    tv = tv_distance(empirical(cftp), empirical(oracle))
    out.append(("lattice vs rejection", tv < 0.06, f"TV {tv:.4f} over {n_draws} draws"))

    params = MultiscaleParams(1.0, 1.0, -0.5, 0.4, 0.2)
    smodel = multiscale_model(params, h=0.2)
    c1 = [len(run_cftp(smodel, s).config) for s in range(seed, seed + n_draws)]
    c2 = spatial_rejection_counts(smodel, 10 * n_draws, seed + 10**6)
    tv = tv_distance(empirical(c1), empirical(c2))
    out.append(("spatial vs rejection", tv < 0.06, f"TV {tv:.4f} over {n_draws} draws"))

    bad = Counter()
    for s in range(10):
        _, v = check_invariants(smodel, seed + s)
        bad.update(v)
        _, v = check_invariants(model, seed + s)
        bad.update(v)
    total = sum(bad.values())
    out.append(("coupling invariants", total == 0, f"violations {dict(bad) or 0}"))
    return out
