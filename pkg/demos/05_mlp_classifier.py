"""Training the small tanh classifier, plus the gradient self-check.

Builds a three-cluster dataset, trains the two-layer tanh network with two
optimizers, and reports held-out cross-entropy and error. Also writes the
dataset as CSV (the format the command-line `mlp` problem loads) and runs
the central-difference gradient check.
"""

import numpy as np

from avagrad_lab import (
    HyperParams,
    Method,
    RngStream,
    Schedule,
    TrialConfig,
    fd_check,
    gaussian_blobs,
    mlp_make,
    run_trial,
)

train = gaussian_blobs(60, 3, 2, 2.0, RngStream(1))
holdout = gaussian_blobs(30, 3, 2, 2.0, RngStream(2))
problem = mlp_make(2, 12, 3, train, batch_size=16)
print(f"dataset: {len(train)} train / {len(holdout)} holdout, {problem.dim} parameters")

with open("blobs_train.csv", "w", encoding="utf-8") as fh:
    for row, label in zip(train.features, train.labels):
        fh.write(f"{row[0]!r},{row[1]!r},{label}\n")
print("wrote blobs_train.csv (loadable by the CLI's [problem] kind = mlp)")

print("\n== gradient check (central differences) ==")
rng = RngStream(9)
w_probe = 0.3 * rng.normal(problem.dim)
err = fd_check(problem, w_probe, problem.sample(rng), h=1e-5)
print(f"max relative mismatch: {err:.2e}")

print("\n== training ==")
for method, alpha, epsilon in ((Method.ADAM, 0.01, 1e-8), (Method.AVAGRAD, 0.1, 0.1)):
    hp = HyperParams(
        alpha=Schedule.constant(alpha),
        epsilon=epsilon,
        beta1=Schedule.constant(0.9),
        beta2=Schedule.constant(0.999),
    )
    cfg = TrialConfig(
        method=method, hp=hp, problem=problem, T=1500,
        w1=0.1 * RngStream(7).normal(problem.dim), seed=123,
        record_every=1500, grad_metric="none",
    )
    record = run_trial(cfg)
    ce = problem.dataset_loss(record.w_final, holdout)
    err = problem.dataset_error(record.w_final, holdout)
    print(f"{method.value:9s} alpha={alpha:<5g} epsilon={epsilon:<5g} "
          f"holdout CE={ce:.4f}  holdout error={err:.1%}")
