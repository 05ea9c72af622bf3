"""The full pipeline on a reduced configuration.

Runs every method over two seeds of a smaller ladder, prints the
aggregated metric table, and lists the artifacts persisted on disk
(prediction CSVs, report tables, plot data). Re-running with the same
config reproduces every file byte for byte. The default-size experiment
is the same call with ExperimentConfig().
"""

import sys
import time
from pathlib import Path

from uqlab.data import LadderSpec
from uqlab.experiment import ExperimentConfig, run_experiment
from uqlab.report import format_metrics_table

outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-output/experiment")

cfg = ExperimentConfig(
    seeds=(0, 1),
    epochs=40,
    mc_passes=16,
    ensemble_replicates=2,
    sngp_rff_dim=512,
    ladder=LadderSpec(n_train=600, n_val=400, n_ood=400, n_novel=320),
)

start = time.perf_counter()
result = run_experiment(cfg, outdir=outdir)
print(f"pipeline finished in {time.perf_counter() - start:.1f}s\n")

print(format_metrics_table(result.report))

print("\n== artifacts ==")
for path in sorted(outdir.rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(outdir)}")

print("\nFeed the persisted prediction CSVs back through the CLI, e.g.:")
print(f"  uqlab eval {outdir}/predictions/*.csv --format table")
print(f"  uqlab threshold {outdir}/predictions/*.csv")
