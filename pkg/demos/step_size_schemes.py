"""Certified scale-step bounds: what re-evaluating the new policy buys.

Each stabilizing sweep may grow the scale factor by a bounded step.  The
cheap bounds reuse the solution already in hand; the expensive ones run
one extra regression to evaluate the *improved* policy at the current
scale, and are provably never smaller.  This script runs both pipelines
on the same data and prints the bounds side by side, plus what the
choice costs in sweeps.
"""

import numpy as np

from coot import (
    build_basis,
    build_q_regression,
    build_regression_bundle,
    load_bundled_config,
    scheme1_alpha_bound,
    schemeB_alpha_bound,
    schemeC_alpha_bound,
    simulate_behavior,
    stabilizing_phase,
    stabilizing_phase_q,
)

config = load_bundled_config()
mas = config.mas
t0 = config.params.t0

K0 = [np.zeros((f.m, f.n)) for f in mas.followers]
log = simulate_behavior(mas, K0, config.params.noise_terms, t_end=145)

bundles, qregs = [], []
for i, f in enumerate(mas.followers):
    basis = build_basis(f.C, f.S, log.F_est[i][t0])
    bundles.append(build_regression_bundle(log, basis, t0, 100, i, mas.Q[i], mas.R[i]))
    qregs.append(build_q_regression(log, basis, t0, 94, i, mas.Q[i], mas.R[i]))

# Value-based pipeline: scheme 2 reuses the current value matrix, scheme 1
# pays one extra solve per sweep.
run2 = stabilizing_phase(bundles, K0, scheme="2")
run1 = stabilizing_phase(bundles, K0, scheme="1")

print("value-based bounds, agent 1 (along the scheme-2 run):")
print(f"  {'k':>2}  {'gamma':>8}  {'scheme 1':>9}  {'scheme 2':>9}  {'gap':>8}")
for rec in run2.histories[0]:
    b1 = scheme1_alpha_bound(bundles[0], rec.K, rec.gamma)
    print(f"  {rec.k:>2}  {rec.gamma:>8.4f}  {b1:>9.4f}  {rec.alpha_bar:>9.4f}  "
          f"{b1 - rec.alpha_bar:>8.4f}")
print(f"  sweeps to reach scale 1: {len(run1.histories[0])} with scheme 1, "
      f"{len(run2.histories[0])} with scheme 2\n")

# Action-value pipeline: scheme C reuses H, scheme B re-evaluates, and
# scheme A folds H down to the value matrix first.
runA = stabilizing_phase_q(qregs, K0, scheme="A")

print("action-value bounds, agent 1 (along the scheme-A run):")
print(f"  {'k':>2}  {'gamma':>8}  {'scheme A':>9}  {'scheme B':>9}  {'scheme C':>9}")
for rec in runA.histories[0]:
    bB = schemeB_alpha_bound(qregs[0], rec.K, rec.gamma)
    bC = schemeC_alpha_bound(rec.H, qregs[0].cost_block, rec.gamma)
    print(f"  {rec.k:>2}  {rec.gamma:>8.4f}  {rec.alpha_bar:>9.4f}  {bB:>9.4f}  {bC:>9.4f}")

print()
print("stabilizing-phase endpoints (max gain difference):")
for i in range(mas.n_followers):
    d12 = np.max(np.abs(run1.K[i] - run2.K[i]))
    dA2 = np.max(np.abs(runA.K[i] - run2.K[i]))
    print(f"  agent {i + 1}: scheme 1 vs 2 = {d12:.2e}, scheme A vs 2 = {dA2:.2e}")
print("schemes 2 and A bound the same quantity, so those runs coincide to")
print("solver accuracy; scheme 1 walks a different (faster) path to an")
print("equally stabilizing gain, and the optimal phase erases the difference")
