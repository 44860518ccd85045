"""How much data each pipeline needs before its regressions are unique.

The value-based pipeline estimates 15 unknowns per solve (a symmetric
2x2 value matrix plus five cross-term blocks), so it needs the data rank
to reach 15.  The action-value pipeline solves for a symmetric 3x3
matrix (6 unknowns) but pays a second regression for the regulator right
sides (9 unknowns); its window is set by the larger of the two.  One new
time step contributes one regression row, so the minimal windows land at
t0 + 15 and t0 + 9 exactly.
"""

import numpy as np

from coot import (
    build_basis,
    build_q_regression,
    build_regression_bundle,
    check_excitation,
    check_excitation_regulator,
    check_excitation_z,
    load_bundled_config,
    simulate_behavior,
)

config = load_bundled_config()
mas = config.mas
t0 = config.params.t0

K0 = [np.zeros((f.m, f.n)) for f in mas.followers]
log = simulate_behavior(mas, K0, config.params.noise_terms, t_end=145)

f = mas.followers[0]
basis = build_basis(f.C, f.S, log.F_est[0][t0])

print(f"{'t_f':>4} {'samples':>8} | {'value rank':>10} | {'action rank':>11} {'regulator rank':>14}")
first_v = first_q = None
for t_f in range(t0 + 1, t0 + 20):
    bundle = build_regression_bundle(log, basis, t0, t_f, 0, mas.Q[0], mas.R[0])
    qreg = build_q_regression(log, basis, t0, t_f, 0, mas.Q[0], mas.R[0])
    rv = check_excitation(bundle)
    rz = check_excitation_z(qreg)
    rr = check_excitation_regulator(qreg)
    mark_v = "ok" if rv.ok else "  "
    mark_q = "ok" if (rz.ok and rr.ok) else "  "
    print(f"{t_f:>4} {t_f - t0:>8} | {rv.achieved:>7}/{rv.required} {mark_v} | "
          f"{rz.achieved:>8}/{rz.required} {rr.achieved:>11}/{rr.required} {mark_q}")
    if first_v is None and rv.ok:
        first_v = t_f
    if first_q is None and rz.ok and rr.ok:
        first_q = t_f

print()
print(f"value-based pipeline:  minimal t_f = {first_v} (t0 + {first_v - t0})")
print(f"action-value pipeline: minimal t_f = {first_q} (t0 + {first_q - t0})")
print("every logged step is one regression row, so neither window wastes a sample")
