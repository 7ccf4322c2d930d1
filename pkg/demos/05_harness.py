"""Configuring, running and reporting an experiment from Python.

The same JSON document drives the command line:

    fpaccel run --config demos/configs/dirichlet16.json --out results --format csv
    fpaccel table --config demos/configs/dirichlet16.json --sweep m=0,1,2,3,5,10
"""

import json
import pathlib
import tempfile

from fpaccel.harness import aggregate, emit_report, parse_config, rate_table, parse_sweep, run_experiment

here = pathlib.Path(__file__).parent
doc = json.loads((here / "configs" / "dirichlet16.json").read_text())
config = parse_config(doc)

reports = run_experiment(config, threads=2)
agg = aggregate(reports, config.label())
print(f"{agg.label}: {agg.converged}/{agg.trials} converged")
print(f"iterations per seed {agg.iterations}, mean rate {agg.mean_rate:.4f}")

out = pathlib.Path(tempfile.mkdtemp())
emit_report(reports, "csv", out / "history.csv")
print("first CSV lines:")
print("\n".join((out / "history.csv").read_text().splitlines()[:3]))

for cfg, a in rate_table(config, [parse_sweep("m=0,10")]):
    print(f"{a.label:<28} mean iterations {a.mean_iterations:7.1f}  mean rate {a.mean_rate:.4f}")
