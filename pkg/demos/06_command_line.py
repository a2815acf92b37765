# %% [markdown]
# # The bdfp command line
#
# Every stage is also reachable from the shell.  Results go to stdout as JSON;
# `--out` writes the command's file format.  Here the entry point is called
# in-process with a temporary cache directory.

# %%
import json
import os
import tempfile
from pathlib import Path

from bdfpos.cli import main

tmp = Path(tempfile.mkdtemp())
os.environ["BDFP_CACHE_DIR"] = str(tmp / "cache")

# %%
main(["dispersion", "--alpha", "0.05", "--cutoff", "30", "--out", str(tmp / "disp.csv")])
print((tmp / "disp.csv").read_text().splitlines()[0])

# %%
main(["pekar", "--out", str(tmp / "pekar.csv")])

# %% A key = value file, with flags taking precedence.
cfg = tmp / "run.cfg"
cfg.write_text("alpha = 0.05\ngrid = 16\nscan_points = 7\n")
main(["energy", "--config", str(cfg), "--grid", "24", "--out", str(tmp / "scan.json")])
print(len(json.loads((tmp / "scan.json").read_text())), "scan records")

# %%
main(["structure-check", "--seed", "4", "--out", str(tmp / "structure.json")])
