import numpy as np
import pytest
from hypothesis import given, strategies as st

from xylab import cycles as cy
from xylab.graphs import LatticeBox, complete_graph, cycle_graph, single_edge
from xylab.oracle import RadiusField
from xylab.sampler import PoissonEdgeSet, assign_times, make_rng, sample_sourceless_counts


def _points(G, spec):
    """``[(u, v, time), ...]`` to a point set."""
    return PoissonEdgeSet([G.directed_index(u, v) for u, v, _ in spec], [t for *_, t in spec])


def _competing():
    """Two cycle covers of the same points on the 4-cycle, only one of them proper."""
    G = cycle_graph(4)
    pes = _points(G, [(0, 1, 0.9), (0, 1, 0.3), (1, 0, 0.5), (1, 2, 0.7), (2, 3, 0.2), (3, 0, 0.8)])
    return G, pes


def _as_edge_time_sets(G, pes, covers):
    return {frozenset((int(pes.edges[p]), float(pes.times[p])) for p in c.points) for c in covers}


def test_single_cycle_is_its_own_partition():
    G = cycle_graph(3)
    pes = _points(G, [(0, 1, 0.1), (1, 2, 0.4), (2, 0, 0.2)])
    part = cy.decompose(G, pes)
    assert len(part) == 1 and sorted(part.cycles[0].points) == [0, 1, 2]
    assert len(cy.brute_force_proper_partitions(G, pes)) == 1


def test_competing_covers_only_one_proper():
    G, pes = _competing()
    covers = cy._all_cycle_covers(G, pes)
    assert len(covers) == 2
    proper = cy.brute_force_proper_partitions(G, pes)
    assert len(proper) == 1
    part = cy.decompose(G, pes)
    assert _as_edge_time_sets(G, pes, proper[0]) == part.as_sets()
    d = G.directed_index
    expected = {frozenset({(d(0, 1), 0.3), (d(1, 0), 0.5)}),
                frozenset({(d(0, 1), 0.9), (d(1, 2), 0.7), (d(2, 3), 0.2), (d(3, 0), 0.8)})}
    assert part.as_sets() == expected
    assert part.layers.tolist() == [1, 2]


def test_order_relation_and_up_set():
    G, pes = _competing()
    part = cy.decompose(G, pes)
    rel = cy.order_relation(G, pes, part.cycles)
    # the two-edge cycle is activated lower at both shared vertices
    assert rel == {(1, 0)}
    assert cy.up_set(G, part, 1) == {0, 1}
    assert cy.up_set(G, part, 0) == {0}


def test_improper_inputs_are_rejected():
    G, pes = _competing()
    with pytest.raises(cy.ImproperInput):
        cy.is_proper_partition(G, pes, [cy.Cycle((0, 1))])
    with pytest.raises(cy.ImproperInput):
        cy.is_proper_partition(G, pes, [cy.Cycle((0, 2)), cy.Cycle((0, 2))])
    with pytest.raises(ValueError):
        cy.decompose(G, _points(G, [(0, 1, 0.2)]))
    with pytest.raises(ValueError):
        cy.brute_force_proper_partitions(G, pes, max_points=3)


def _random_sets(G, beta, count, seed, max_points=10):
    rng = make_rng(seed)
    T = RadiusField.constant(G, beta).local_time
    counts, _ = sample_sourceless_counts(G, T, rng, count * 3)
    keep = [c for c in counts if 0 < c.sum() <= max_points][:count]
    return T, [assign_times(G, T, c, rng) for c in keep]


@pytest.mark.parametrize("G", [complete_graph(4), LatticeBox(1)], ids=["K4", "box1"])
def test_decompose_is_the_unique_proper_partition(G):
    _, sets = _random_sets(G, 1.2, 25, 11)
    for pes in sets:
        part = cy.decompose(G, pes)
        assert cy.is_proper_partition(G, pes, part)
        found = cy.brute_force_proper_partitions(G, pes)
        assert len(found) == 1
        assert _as_edge_time_sets(G, pes, found[0]) == part.as_sets()


def test_cycle_labels_agree_with_decompose(box2):
    T, sets = _random_sets(LatticeBox(1), 1.5, 30, 12, max_points=30)
    L = LatticeBox(1)
    for pes in sets:
        lab, nc = cy.cycle_labels(L, pes)
        part = cy.decompose(L, pes)
        assert nc == len(part) and np.array_equal(lab, part.labels())


def test_time_inversion_is_an_involution():
    G, pes = _competing()
    T = np.ones(4)
    inv = cy.time_invert(G, pes, T)
    back = cy.time_invert(G, inv, T)
    assert np.array_equal(back.edges, pes.edges) and np.allclose(back.times, pes.times)
    assert len(cy.time_invert(G, PoissonEdgeSet.empty(), T)) == 0
    # inverted times: 0->1 at 0.1 and 0.7, 1->0 at 0.5, 1->2 at 0.3, 2->3 at 0.8, 3->0 at 0.2
    d = G.directed_index
    ipart = cy.decompose(G, inv)
    got = {frozenset((e, round(t, 12)) for e, t in c) for c in ipart.as_sets()}
    assert got == {frozenset({(d(0, 1), 0.7), (d(1, 0), 0.5)}),
                   frozenset({(d(0, 1), 0.1), (d(1, 2), 0.3), (d(2, 3), 0.8), (d(3, 0), 0.2)})}
    assert ipart.layers.tolist() == [1, 2]


def test_direction_inverse_keeps_activation_times():
    G = cycle_graph(4)
    pes = _points(G, [(0, 1, 0.1), (1, 2, 0.2), (2, 3, 0.3), (3, 0, 0.4)])
    part = cy.decompose(G, pes)
    cyc = part.cycles[0]
    inv = cy.direction_invert(pes, cyc)
    act = cyc.activation(G, pes)
    inv_part = cy.decompose(G, inv)
    assert inv_part.cycles[0].activation(G, inv) == act
    assert set(G.tail[inv.edges].tolist()) == set(act)
    twice = cy.direction_invert(inv, inv_part.cycles[0])
    assert twice.key() == pes.key()


def test_two_point_cycles_are_self_inverse():
    G = single_edge()
    pes = _points(G, [(0, 1, 0.3), (1, 0, 0.6)])
    part = cy.decompose(G, pes)
    assert cy._self_inverse(pes, part.cycles[0])
    assert cy.direction_invert(pes, part.cycles[0]).key() == pes.key()


def test_orientation_resampling_is_a_fair_coin():
    G = cycle_graph(4)
    pes = _points(G, [(0, 1, 0.1), (1, 2, 0.2), (2, 3, 0.3), (3, 0, 0.4)])
    rng = make_rng(6)
    flips = [cy.resample_orientations(G, pes, rng).key() != pes.key() for _ in range(4000)]
    assert abs(np.mean(flips) - 0.5) < 3 * 0.5 / np.sqrt(4000)
    assert len(cy.resample_orientations(G, PoissonEdgeSet.empty(), rng)) == 0


def test_explore_single_cycle_and_stop_rules():
    G = cycle_graph(4)
    pes = _points(G, [(0, 1, 0.1), (1, 2, 0.2), (2, 3, 0.3), (3, 0, 0.4)])
    T = np.ones(4)
    trace = cy.explore(G, pes, 0, T=T, budget=0.95)
    assert trace.hit and sorted(trace.used.tolist()) == [0, 1, 2, 3] and trace.walk[-1] == 0
    trace = cy.explore(G, pes, 0, T=T, budget=0.5)
    assert trace.used.size == 0
    trace = cy.explore(G, pes, 0, target=2)
    assert trace.hit and trace.walk == [0, 1, 2]
    miss = cy.explore(G, _points(G, [(1, 2, 0.1), (2, 1, 0.2)]), 0, target=2)
    assert not miss.hit
    with pytest.raises(ValueError):
        cy.explore(G, pes, 0)
    with pytest.raises(ValueError):
        cy.explore(G, pes, 0, T=T, target=1, budget=0.1)


def test_explore_uses_the_up_set_of_the_lower_cycle():
    G, pes = _competing()
    part = cy.decompose(G, pes)
    trace = cy.explore(G, pes, 0, T=np.ones(4), budget=0.8)
    assert set(trace.used.tolist()) == {p for c in part.cycles for p in c.points}


@given(st.integers(0, 2 ** 31))
def test_direction_flip_commutes(seed):
    G = complete_graph(4)
    T, sets = _random_sets(G, 1.0, 3, seed, max_points=14)
    rng = make_rng(seed, 1)
    for pes in sets:
        part = cy.decompose(G, pes)
        which = [c for c in range(len(part)) if rng.random() < 0.5]
        flipped = cy.decompose(G, cy.flip_cycles(part, which))
        expected = set()
        for c, cyc in enumerate(part.cycles):
            if c in which:
                s, t = cy._inverse_points(pes, cyc)
                expected.add(frozenset(zip(s.tolist(), t.tolist())))
            else:
                expected.add(frozenset((int(pes.edges[p]), float(pes.times[p])) for p in cyc.points))
        assert flipped.as_sets() == expected


def test_partition_json(box1):
    G, pes = _competing()
    import json
    doc = json.loads(cy.decompose(G, pes).to_json())
    assert [c["layer"] for c in doc["cycles"]] == [1, 2]


def _figure_eight():
    """Two triangles sharing vertex 0; cycle A leaves 0 at 0.9, cycle B at 0.4."""
    from xylab.graphs import FiniteGraph
    G = FiniteGraph(5, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])
    pes = _points(G, [(0, 1, 0.9), (1, 2, 0.5), (2, 0, 0.6), (0, 3, 0.4), (3, 4, 0.2), (4, 0, 0.7)])
    return G, pes


def test_figure_eight_layers_and_their_swap_under_time_inversion():
    G, pes = _figure_eight()
    part = cy.decompose(G, pes)
    a = next(i for i, c in enumerate(part.cycles) if 1 in c.vertices(G, pes))
    b = 1 - a
    assert part.layers[a] == 1 and part.layers[b] == 2
    assert cy.order_relation(G, pes, part.cycles) == {(b, a)}
    # a cycle visits each vertex once, so the figure-eight has a single cover
    assert len(cy._all_cycle_covers(G, pes)) == 1
    inv = cy.decompose(G, cy.time_invert(G, pes, np.ones(5)))
    ib = next(i for i, c in enumerate(inv.cycles) if 3 in c.vertices(G, inv.pes))
    assert inv.layers[ib] == 1
