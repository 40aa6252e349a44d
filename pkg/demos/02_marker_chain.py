"""A chain with one marker molecule above it: local modes appear.

Run: python3 demos/02_marker_chain.py   (about ten seconds)
"""
# %% Bare ring of 50 molecules: three phonon bands and no local modes
import math

from dipolar_gates import coupling
from dipolar_gates.phonons import local_modes, marker_target_weight
from dipolar_gates.params import ModelParams

bare = coupling.marker_chain_setup(ModelParams(), with_marker=False)
scale = math.sqrt(bare.spectrum.mass)
for axis, (lo, hi) in sorted(bare.labels.band_edges.items()):
    print(f"band {'xyz'[axis]}: [{lo * scale:8.4f}, {hi * scale:8.4f}] x 1/sqrt(r_d)")
print("local modes:", int(bare.spectrum.local.sum()))

# %% Add a marker at height b above the middle site.
# As b shrinks the marker pulls three modes out of the bands and onto
# the marker-target pair.
print(f"{'b/a':>5} {'axis':>4} {'omega*sqrt(r_d)':>16} {'participation':>14} {'weight':>8}")
for b in (0.9, 0.8, 0.7, 0.6):
    s = coupling.marker_chain_setup(ModelParams(b_over_a=b))
    spec, geo = s.spectrum, s.equilibrium.geometry
    for axis, k in sorted(local_modes(spec).items()):
        w = marker_target_weight(spec, geo, k)
        print(f"{b:5.2f} {axis:>4} {spec.frequencies[k] * scale:16.6f} {spec.participation[k]:14.4f} {w:8.4f}")

# %% Where the target sits: it is lifted towards the marker and the neighbours follow a little.
s = coupling.marker_chain_setup(ModelParams(b_over_a=0.8))
geo = s.equilibrium.geometry
t = geo.target
for i in (t - 1, t, t + 1):
    print(f"site {i}: x - i = {s.equilibrium.positions[i, 0] - i:+.6f}, z = {s.equilibrium.positions[i, 2]:+.6f}")
