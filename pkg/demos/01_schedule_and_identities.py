"""Walk through the forward-noising math on a small schedule.

Shows how the variance schedule controls signal retention and why the
clean-sample prediction inverts the forward map exactly when the true noise
is known.
"""

import numpy as np

from diffguide import build_linear_schedule, forward_noising, posterior_mean, tweedie_x0

sched = build_linear_schedule(T=1000, beta_start=1e-4, beta_end=0.02)
print(f"T = {sched.T}")
for t in (1, 250, 500, 750, 1000):
    print(f"  t={t:4d}  beta={sched.beta[t]:.5f}  alpha_bar={sched.alpha_bar[t]:.3e}")

# Noising a point: by t=1000 nearly all signal is gone.
rng = np.random.default_rng(0)
x0 = np.array([5.0, 3.0])
eps = rng.standard_normal(2)
for t in (100, 500, 1000):
    x_t = forward_noising(x0, t, eps, sched)
    print(f"t={t:4d}: x_t = {x_t.round(3)}  (signal weight {np.sqrt(sched.alpha_bar[t]):.3f})")

# Knowing the injected noise, the endpoint prediction is an exact inverse.
t = 600
x_t = forward_noising(x0, t, eps, sched)
back = tweedie_x0(x_t, eps, t, sched)
print(f"round trip at t={t}: {back}  (error {np.abs(back - x0).max():.2e})")

# The reverse-step mean pulls the state toward the predicted endpoint.
mu = posterior_mean(x_t, eps, t, sched)
print(f"reverse-step mean at t={t}: {mu.round(4)} (between x_t and x0)")
