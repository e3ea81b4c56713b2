"""From a random sourceless current to cycles and a height function.

Draw a current on a small box, place Poisson times on its edges, peel it into
cycles and check that summing the clockwise winding numbers of the cycles
gives back the height function integrated from the current.
"""

import numpy as np

from xylab.cycles import decompose, is_proper_partition, resample_orientations
from xylab.graphs import LatticeBox
from xylab.heights import cycle_windings, height_from_current
from xylab.oracle import RadiusField
from xylab.sampler import McmcConfig, assign_times, make_rng, mcmc_chain

L = LatticeBox(3)
beta = 1.2
T = RadiusField.constant(L, beta).local_time
rng = make_rng(2024)
n = mcmc_chain(L, T, McmcConfig(sweeps=600, burnin=500, seed=2024), rng=rng)[-1]
pes = assign_times(L, T, n, rng)
part = decompose(L, pes)
print(f"{len(pes)} Poisson edges, {len(part)} cycles, layers {part.layers.tolist()}")
print("proper partition:", is_proper_partition(L, pes, part))

h = height_from_current(L, n)
W = cycle_windings(L, part)
print("height = sum of windings:", np.array_equal(W.sum(axis=0), h[: L.n_faces]))

grid = L.face_grid(h[: L.n_faces])
print("height field (top row first):")
for row in grid[::-1]:
    print(" ".join(f"{v:+d}" for v in row))

# flipping cycle orientations at random leaves the law of the current unchanged,
# while the height field of this particular sample moves
flipped = resample_orientations(L, pes, rng, part)
h2 = height_from_current(L, flipped.counts(L))
print("after orientation resampling, h changed on", int(np.sum(h2 != h)), "faces")
