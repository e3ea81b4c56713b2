"""Sign covariance of the height field and its FK-Ising representation.

Given |h|, the signs of the height function form a ferromagnetic Ising model
on the nonzero faces.  Opening bonds with probability 1 - exp(-2K) gives a
random cluster picture where sign correlations become connection probabilities.
"""

import numpy as np

from xylab.estimators import batch_means, lattice_samples
from xylab.graphs import LatticeBox
from xylab.sampler import McmcConfig, make_rng

L = LatticeBox(2)
beta = 0.8
a = L.face(0, -1)
pairs = [(a, L.face(0, -1 + k)) for k in (1, 2)]
d = lattice_samples(L, beta, pairs, McmcConfig(sweeps=20_500, burnin=500, seed=7), make_rng(7))
for i, (x, y) in enumerate(pairs):
    s, s_se = batch_means(d["ss"][:, i])
    f, f_se = batch_means(d["fk"][:, i])
    any_s = d["any_surround"][:, i].mean()
    print(f"faces {x},{y}: sign product {s:.4f} +- {s_se:.4f}, "
          f"FK connection {f:.4f} +- {f_se:.4f}, P[surrounding cycle] {any_s:.4f}")
