"""Exact two-point functions on tiny graphs, computed two independent ways.

The current expansion sums weights of integer flows; the Haar route integrates
the spins directly.  On a single edge both collapse to I1(beta)/I0(beta).
"""

from scipy import special

from xylab.graphs import complete_graph, cycle_graph, single_edge
from xylab.oracle import RadiusField, current_measure, haar_two_point, phi_potential, two_point_current

G = single_edge()
for beta in (0.25, 0.5, 1.0, 2.0):
    r = RadiusField.constant(G, beta)
    cur = two_point_current(G, r, 0, 1)
    haar = haar_two_point(G, r, 0, 1)
    print(f"edge beta={beta:4}: currents {cur:.10f}  haar {haar:.10f}  "
          f"I1/I0 {special.i1(beta) / special.i0(beta):.10f}")

# the sourceless measure on one edge is I0(2t) with t = beta/2
r = RadiusField.constant(G, 1.0)
print("sourceless mass on the edge:", current_measure(G, r.local_time).value, special.i0(1.0))

for G in (cycle_graph(4), complete_graph(4)):
    r = RadiusField.constant(G, 0.8)
    print(f"{G!r}: <s0 s2> = {two_point_current(G, r, 0, 2):.8f} vs {haar_two_point(G, r, 0, 2):.8f}")

# the edge potential of the dual height model
print("Phi_1(0..3) =", [round(float(phi_potential(1.0, a)), 10) for a in range(4)])
