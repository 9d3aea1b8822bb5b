"""The file-based pipeline, driven from Python.

Each call is equivalent to a shell command, for example
``tusp gen --config scenario.json --n 12 --seed 0 --out work/instances``.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from tusp.cli import main

work = Path(tempfile.mkdtemp(prefix="tusp-demo-"))
(work / "scenario.json").write_text(json.dumps({"n_units": 5}))
(work / "arch.json").write_text(json.dumps({"conv_channels": [16, 16, 1], "dense_units": 32}))

main(["gen", "--config", str(work / "scenario.json"), "--n", "12", "--seed", "0", "--out", str(work / "instances")])
instances = sorted(str(p) for p in (work / "instances").glob("*.json"))
main(["solve", *instances, "--iterations", "400", "--seed", "0", "--out", str(work / "traces")])
traces = sorted(str(p) for p in (work / "traces").glob("trace_*.json"))
main(["build-dataset", *traces, "--W", "30", "--cap", "10", "--seed", "0", "--out", str(work / "manifest.json")])
main(["train", str(work / "manifest.json"), "--config", str(work / "arch.json"), "--lr", "1e-4",
      "--epochs", "10", "--out", str(work / "model.json")])
main(["eval", str(work / "model.json"), str(work / "manifest.json"), "--out", str(work / "metrics.json")])
main(["policy-sim", *instances[:4], "--model", str(work / "model.json"), "--K", "20", "--iterations", "400",
      "--out", str(work / "policy.json")])
main(["estimate", "--metrics", str(work / "metrics.json"), "--part", "test"])
print("artifacts in", work)
