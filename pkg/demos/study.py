# %% [markdown]
# AMSE study on Blocks, Bumps, Doppler and Heavisine at RSNR 10, 7 and 3.
# The full grid (300 denoising runs) takes a few minutes on one core;
# pass a cell spec to run less, e.g. ``python3 demos/study.py rsnr=10``.

# %%
import sys
import time
from pathlib import Path

from perfectsim import StudyConfig, run_simulation_study
from perfectsim.io import write_columns
from perfectsim.study import FUNCTIONS, format_table, parse_cells, table_rows, worker_count

out = Path(__file__).with_name("out") / "study"
out.mkdir(parents=True, exist_ok=True)
cells = sys.argv[1] if len(sys.argv) > 1 else "all"

# %%
cfg = StudyConfig(cells=parse_cells(cells))
t0 = time.perf_counter()
results = run_simulation_study(cfg, seed=0, workers=worker_count())
print(format_table(results))
print(f"{time.perf_counter() - t0:.0f}s")

# %%
for c in results:
    pub, pse = c.published
    gap = (c.amse - pub) / (c.se**2 + pse**2) ** 0.5
    print(f"{c.name:>10} rsnr {c.rsnr:>4g}: {c.amse:7.1f} ({c.se:4.1f})  published {pub:5d} ({pse:2d})  "
          f"gap {gap:+.1f} s.e.")

header = ["rsnr", "method"] + [h for f in FUNCTIONS for h in (f, f"{f}_se")]
write_columns(out / "study.csv", header, list(zip(*table_rows(results))))
