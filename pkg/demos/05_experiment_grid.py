"""A reduced experiment grid: best model per season and the report files.

Run: python demos/05_experiment_grid.py [out_dir]
"""
import sys

from meteonn.dataset import generate_synthetic
from meteonn.harness import GridConfig, best_per_cell, emit_report, make_manifest, persistence_report, run_grid

out_dir = sys.argv[1] if len(sys.argv) > 1 else "demo_results"
city = generate_synthetic(seed=7, years=7)
config = GridConfig(testings=(3,), epoch_scale=0.02, base_seed=7)

rows = run_grid([city.city], {city.city: city}, config)
print(f"{len(rows)} cells")
for b in best_per_cell(rows, "rmse"):
    spec = b.row.spec
    base = persistence_report(city, b.season, b.testing_id, config).rmse
    print(f"{b.season.name:7s} best RMSE {b.value:.3f} ({spec.model_kind.value}, lr={spec.learning_rate}, "
          f"epochs={spec.epochs}); persistence {base:.3f}")

for path in emit_report(rows, out_dir, make_manifest(config, {city.city: city}, rows)):
    print("wrote", path)
