"""Tour of the optimizer family on a toy quadratic.

Shows the shared step interface, what the per-step report carries, how the
delayed methods decouple their rates from the current sample, and the
normalisation that makes the avagrad update insensitive to rate rescaling.
"""

import numpy as np

from avagrad_lab import (
    HyperParams,
    Method,
    Schedule,
    eta_bounds,
    init_state,
    normalized_eta,
    step,
)

rng = np.random.default_rng(0)
d = 4
w_start = np.array([2.0, -1.5, 0.5, 3.0])
curvatures = np.array([1.0, 4.0, 0.5, 2.0])

hp = HyperParams(
    alpha=Schedule.constant(0.05),
    epsilon=1e-8,
    beta1=Schedule.constant(0.9),
    beta2=Schedule.constant(0.999),
)

print("== ten steps of each method on f(w) = sum c_i w_i^2 / 2 ==")
for method in Method:
    state = init_state(method, d)
    w = w_start.copy()
    for _ in range(10):
        g = curvatures * w + 0.1 * rng.normal(size=d)
        w, state, rep = step(state, hp, w, g)
    print(f"{method.value:13s} |w|={np.linalg.norm(w):8.4f}  "
          f"eta_min={rep.eta_min:10.4g}  alpha_eff={rep.alpha_eff:10.4g}")

print("\n== the delayed rate ignores the current draw ==")
state = init_state(Method.DELAYED_ADAM, d)
w = w_start.copy()
for _ in range(5):
    w, state, rep = step(state, hp, w, curvatures * w)
_, _, rep_small = step(state, hp, w, np.full(d, 1e-6))
_, _, rep_large = step(state, hp, w, np.full(d, 1e6))
print("eta with a tiny gradient :", rep_small.eta)
print("eta with a huge gradient :", rep_large.eta, "(identical)")

print("\n== deterministic rate window for the delayed methods ==")
lo, hi = eta_bounds(hp, g2=10.0)
print(f"with gradient norms bounded by 10: {lo:.4g} <= eta_i <= {hi:.4g}")

print("\n== rate normalisation is scale invariant ==")
eta = np.array([0.5, 2.0, 8.0])
print("normalized(eta)        :", normalized_eta(eta))
print("normalized(1e6 * eta)  :", normalized_eta(1e6 * eta))
print("normalized(1e-6 * eta) :", normalized_eta(1e-6 * eta))
