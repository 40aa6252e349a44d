"""The dressed-state qubit: switching and modulating the dipole with a Lambda drive.

Run: python3 demos/04_dressed_qubit.py
"""
# %% Mixing angles as the drive detuning grows
import math

import numpy as np

from dipolar_gates.dressed import (
    LambdaDrive,
    dressed_dipole,
    leakage_budget,
    mixing_angles,
    modulation_schedule,
    pauli_axis,
)

for x in (0.0, 1.0, 3.0, 10.0):
    xa, _ = mixing_angles(x)
    print(f"delta/Omega_eff = {x:5.1f}: sin^2(xi_alpha) = {math.sin(xa) ** 2:.4f}")

# %% Balanced drive: the dressed dipole splits into identity and sigma_x parts.
drive = LambdaDrive(1.0, 1.0, delta=2.0)
dip = dressed_dipole(1.0, 5.0, drive)
print(f"mu1 = {dip.mu1:.4f}, identity {dip.identity_coefficient:.4f}, sigma axis {pauli_axis(dip.nu, dip.eta)}")
flip = dressed_dipole(1.0, 5.0, drive.flipped())
part = dip.operator() - dip.identity_coefficient * np.eye(2)
part_f = flip.operator() - flip.identity_coefficient * np.eye(2)
print("flipped drive reverses the state-dependent part:", np.allclose(part_f, -part))

# %% A cosine modulation mu1(t) built from slow detuning ramps.
sch = modulation_schedule(0.3, 2 * math.pi, 1.0, delta=100.0, delta_mu=2.0, n_points=9)
for t, mu, f in zip(sch.t, sch.mu1, sch.flipped):
    print(f"t = {t:.3f}  mu1 = {mu:+.4f}  flipped = {bool(f)}")
print(f"first harmonic {sch.first_harmonic:.4f}, ramp margin {sch.ramp_margin:.1f}")

# %% Leakage out of the dressed manifold for a weak drive.
lb = leakage_budget(1.0, 1.0, 0.01, 10.0, 10.0, 1000.0)
print({k: (round(v, 4) if isinstance(v, float) else v) for k, v in lb.as_dict().items() if k != "flags"})
print("flags:", lb.as_dict()["flags"])
print(f"mean mu1 over one period: {np.mean(sch.mu1[:-1]):.1e}")
