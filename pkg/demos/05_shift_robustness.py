"""How guidance methods cope as the reward moves away from the prior.

Sweeps the reward mean outward along the centroid-to-reward ray and tracks
each method's mean reward and output variance.  Plain best-of-n collapses
once the reward is far away; starting from a partially noised reference
point keeps the reward high; per-step selection keeps reward high but its
output variance collapses by orders of magnitude.
"""

import os

from diffguide import GaussianReward, TrainConfig, build_linear_schedule, init_model, train
from diffguide.config import GuidancePoint, ShiftStudyConfig
from diffguide.experiments import SHIFT_COLUMNS, run_shift_study, write_csv
from diffguide.plots import plot_csv
from diffguide.training import paper_prior, pooled_input_stats

OUT = os.path.join(os.path.dirname(__file__), "out_shift")
os.makedirs(OUT, exist_ok=True)

prior = paper_prior()
sched = build_linear_schedule(T=100, beta_start=1e-3, beta_end=0.2)
shift, scale = pooled_input_stats(prior, sched)
model = init_model(64, 16, seed=0, in_shift=shift, in_scale=scale)
model, _ = train(model, prior, sched, TrainConfig(epochs=20, dataset_size=4096, batch_size=128, lr=2e-3, seed=0))

reward = GaussianReward(mu=[14.0, 3.0], sigma=2.0)
study = ShiftStudyConfig(
    displacements=(0.0, 4.0, 8.0, 12.0),
    cells=(
        GuidancePoint(method="best_of_n", n_streams=16),
        GuidancePoint(method="stepwise", n_streams=16),
        GuidancePoint(method="blockwise_ref", n_streams=16, block_size=8, eta=0.6),
    ),
    runs_per_cell=150,
)
rows = run_shift_study(model, sched, reward, prior, study, seed=0)

print(f"{'d':>4} {'method':<14} {'mean_reward':>12} {'total_var':>10}")
for r in rows:
    print(f"{r.displacement:>4.0f} {r.method:<14} {r.mean_reward:>12.5f} {r.variance_x + r.variance_y:>10.2e}")

csv_path = os.path.join(OUT, "shift.csv")
write_csv(csv_path, SHIFT_COLUMNS, rows)
for fig in plot_csv(csv_path, OUT):
    print("wrote", fig)
