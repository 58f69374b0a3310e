"""Exporting a model to Matrix Market and driving the command-line tool."""

# %%
import json
import tempfile
from pathlib import Path

from krylovperf.cli import main

work = Path(tempfile.mkdtemp())
main(["model", "export", "--model", "attack", "--param", "N=3", "--out", str(work / "attack3")])
meta = json.loads((work / "attack3.json").read_text())
print(sorted(meta))
print((work / "attack3.mtx").read_text().splitlines()[:4])

# %%
# the exported pair evaluates like the built-in model
main(["eval", "--model", str(work / "attack3.mtx"), "--measure", "mttf"])
main(["eval", "--model", "attack", "--param", "N=3", "--measure",
      '{"kind": "InstReliability", "partition": "failed"}', "--t", "10", "--method", "both"])

# %%
# sweeps: comma-separated values give one row each
main(["eval", "--model", "telecom", "--param", "n=256,512,1024", "--measure", "D", "--t", "20"])
main(["sensitivity", "--model", "queue", "--param", "n=1024", "--direction", "rho2",
      "--measure", "average-clients", "--t", "1", "--with-ratio"])
