"""Designing a marker-target gate and translating it to LiCs units.

Run: python3 demos/03_gate_design.py
"""
# %% Gate figures of merit on the default chain
from dipolar_gates import coupling
from dipolar_gates.params import BINDINGS, ModelParams, tweezer_constraints

print(f"{'b/a':>5} {'eps':>6} {'U0':>10} {'U_res':>10} {'ratio':>8} {'side':>6}")
for b in (0.6, 0.8):
    setup = coupling.marker_chain_setup(ModelParams(b_over_a=b))
    side = coupling.matched_side(setup.table)
    for eps in (0.05, 0.1):
        m, _ = coupling.gate_point(setup, eps, 0.1)
        print(f"{b:5.2f} {eps:6.3f} {m.U0:+10.5f} {m.U_res:10.2e} {m.ratio:8.1f} {side:>6}")

# %% Closed-form estimates for comparison.
# U0 agrees to about twenty percent. The residual estimate assumes a mobile
# marker and is far off for the frozen one used here.
for b in (0.6, 0.8):
    est = coupling.analytic_gate_estimates(ModelParams(b_over_a=b, epsilon=0.05))["+"]
    print(f"b = {b}: U0 ~ {est['U0_analytic']:.4f}, U_res ~ {est['U_res_analytic']:.2e}")

# %% LiCs: lattice spacing, frequency unit and the gate in physical units.
lics = BINDINGS["LiCs"]
p = ModelParams(b_over_a=0.6)
u = lics.units(p.r_d)
m, _ = coupling.gate_point(coupling.marker_chain_setup(p), 0.05, 0.1)
print(f"a = {u.length * 1e9:.1f} nm, unit frequency {u.frequency:.4g} rad/s")
print(f"U0 = {abs(m.U0) * u.frequency:.4g} rad/s, pi/4 phase in {m.gate_time(0.7853981633974483) / u.frequency * 1e3:.3g} ms")

# %% Which tweezer frequencies can hold the marker without disturbing the crystal.
win = tweezer_constraints(p, 1e-6 / u.length, lics)
print(f"tweezer window [{win.omega_min:.4g}, {win.omega_max:.4g}] rad/s, empty: {win.empty}")
