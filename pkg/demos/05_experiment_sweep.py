"""A miniature noise sweep through the experiment harness.

Runs a desk-scale version of the safe-policy-improvement noise sweep (fewer
replications than the full protocol) and writes the aggregate CSV that the
report-plots frontend consumes.
"""

from abstainlearn import DgpSpec, ExperimentConfig, run_experiment
from abstainlearn.harness import aggregate_results

config = ExperimentConfig(
    scenario="spi_noise_sweep",
    dgp=DgpSpec(family="spi", baseline_gap=0.15, seed=123),
    n_grid=(1000,),
    sweep_values=(0.1, 0.3, 0.6),
    replications=20,
    methods=("algo2", "safe_ewm", "hcpi_t"),
    eval_draws=50_000,
    output_path="noise_sweep.csv",
)
results = run_experiment(config)
print(f"ran {len(results)} replications; aggregate written to {config.output_path}\n")

print(f"{'method':10s} {'sigma':>6s} {'mean gain':>10s} {'mistakes':>9s} {'improves':>9s}")
for row in aggregate_results(config, results):
    print(f"{row['method']:10s} {row['sweep_value']:6.2f} {row['mean_gain']:10.4f} "
          f"{row['mistake_rate']:9.2f} {row['improvement_rate']:9.2f}")

print("\nrender the figure with the frontend, e.g.:")
print("  node frontend/dist/cli.js render --spec plotspec.json")
print('  (plotspec: {"input_csv": "noise_sweep.csv", "figure": "noise_sweep",')
print('              "output": "noise_sweep.svg"})')
