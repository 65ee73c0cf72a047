# %% [markdown]
# Redwood-type clustering with a two-scale area-interaction model.
# Exact draws by dominated CFTP, then L and transformed-T envelopes.
#
#     python3 demos/redwood.py [n_draws]

# %%
import sys
import time
from pathlib import Path

import numpy as np

from perfectsim import REDWOOD, REDWOOD_LENGTH_SCALE, MultiscaleParams, multiscale_model, run_cftp
from perfectsim.io import write_envelope, write_pattern, write_summary
from perfectsim.summary import calibrate_T, envelope, estimate_L, estimate_T, transform_T
from perfectsim.svg import line_svg, scatter_svg

out = Path(__file__).with_name("out") / "redwood"
out.mkdir(parents=True, exist_ok=True)
n_draws = int(sys.argv[1]) if len(sys.argv) > 1 else 19

params = MultiscaleParams(REDWOOD["lam"], REDWOOD["log10_gamma1"], REDWOOD["log10_gamma2"],
                          REDWOOD["r1"], REDWOOD["r2"])

# %% [markdown]
# Taken literally on the unit square the published parameters give almost
# empty patterns: lambda = 0.118 is a rate per unit area.  Running the model
# on a window of side 4.18 (radii scaled with it) gives about 62 points.

# %%
literal = multiscale_model(params)
print("dominating rate, unit square:", literal.space.rate)
print("mean count, unit square:", np.mean([len(run_cftp(literal, s).config) for s in range(50)]))

model = multiscale_model(params, length_scale=REDWOOD_LENGTH_SCALE)
print("dominating rate at length scale", REDWOOD_LENGTH_SCALE, ":", model.space.rate)

# %%
t0 = time.perf_counter()
res = run_cftp(model, seed=1)
pattern = res.config.pattern(model.window)
print(f"{len(pattern)} points, coalesced from T={res.horizon:g} in {time.perf_counter() - t0:.1f}s")
write_pattern(out / "pattern.csv", pattern)
scatter_svg(out / "pattern.svg", pattern.points, model.window, f"{len(pattern)} points")

# %% [markdown]
# Envelopes of the model against one of its own draws.  The data curve should
# sit inside the min/max band over most of the r range.

# %%
r = np.linspace(0, 0.25, 101)
env_L = envelope(model, estimate_L, n_sims=n_draws, seed=2, r=r)
data_L = estimate_L(pattern, r)
write_envelope(out / "envelope_L.csv", env_L)
write_summary(out / "data_L.csv", data_L)
line_svg(out / "envelope_L.svg", [
    (r, data_L.values - r, "solid", "black", "data"),
    (r, env_L.mean - r, "dashed", "black", "mean"),
    (r, env_L.lo - r, "dotted", "black", f"envelope ({n_draws})"),
    (r, env_L.hi - r, "dotted", "black", ""),
], xlabel="r", ylabel="L(r) - r")
print("L curve inside envelope at", f"{100 * env_L.contains(data_L.values).mean():.0f}% of r")

# %%
c = calibrate_T(len(pattern), r=r[1:], n_sims=100, seed=3)
fn = lambda p, rr: transform_T(estimate_T(p, rr), c)
env_T = envelope(model, fn, n_sims=n_draws, seed=2, r=r)
data_T = fn(pattern, r)
line_svg(out / "envelope_T.svg", [
    (r, data_T.values, "solid", "black", "data"),
    (r, env_T.mean, "dashed", "black", "mean"),
    (r, env_T.lo, "dotted", "black", f"envelope ({n_draws})"),
    (r, env_T.hi, "dotted", "black", ""),
], xlabel="r", ylabel="transformed T(r)")
print("T calibration constant", c)
