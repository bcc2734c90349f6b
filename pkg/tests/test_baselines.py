import pytest
from schema import SchemaError
from deltacom.baselines import *
from deltacom.engine import PartitionState, check_bookkeeping, modularity
from deltacom.graph import Graph
from deltacom.synth import SynthSpec, generate
from .utils import clique_ring, community_sets, complete_graph, make_graph, two_cliques, two_triangles


def test_detector_config_validation() -> None:
    assert DetectorConfig(method="louvain").max_sweeps == settings.DEFAULT_MAX_SWEEPS
    with pytest.raises(SchemaError):
        DetectorConfig(method="infomap")
    with pytest.raises(SchemaError):
        DetectorConfig(method="lpm", max_sweeps=0)


def test_detectors_reject_empty_graph() -> None:
    empty = Graph([], [])
    with pytest.raises(DeltacomError):
        lpm(empty, DetectorConfig(method="lpm"))
    with pytest.raises(DeltacomError):
        louvain(empty, DetectorConfig(method="louvain"))


def test_lpm_complete_graph() -> None:
    for seed in range(10):
        p = lpm(complete_graph(4), DetectorConfig(method="lpm", seed=seed))
        assert len(p) == 1


def test_lpm_two_cliques() -> None:
    g = two_cliques(5)
    split = [frozenset(range(5)), frozenset(range(5, 10))]
    for seed in range(50):
        p = lpm(g, DetectorConfig(method="lpm", seed=seed))
        communities = community_sets(p.labels())
        assert communities == split, seed


def test_lpm_is_deterministic() -> None:
    g = generate(SynthSpec(sizes=[10, 10, 10], p_in=0.6, p_out=0.05, seed=1)).graph
    cfg = DetectorConfig(method="lpm", seed=3)
    assert lpm(g, cfg).labels() == lpm(g, cfg).labels()


def test_lpm_isolated_node_keeps_label() -> None:
    g = Graph([[1], [0], []], ["a", "b", "c"])
    p = lpm(g, DetectorConfig(method="lpm"))
    labels = p.labels()
    assert labels[0] == labels[1]
    assert labels[2] == 2
    check_bookkeeping(p, g)


def test_louvain_two_triangles() -> None:
    for seed in range(5):
        p = louvain(two_triangles(), DetectorConfig(method="louvain", seed=seed))
        assert modularity(p) == pytest.approx(5 / 14, abs=1e-12)
        assert community_sets(p.labels()) == [frozenset({0, 1, 2}), frozenset({3, 4, 5})]


def test_louvain_single_edge() -> None:
    p = louvain(make_graph([(0, 1)]), DetectorConfig(method="louvain"))
    assert len(p) == 1
    assert modularity(p) == pytest.approx(0, abs=1e-12)


def test_louvain_clique_ring_merges_whole_cliques() -> None:
    g = clique_ring(30, 5)
    p = louvain(g, DetectorConfig(method="louvain", seed=0))
    assert len(p) < 30
    for community in community_sets(p.labels()):
        assert len(community) % 5 == 0
        assert all(set(range(5 * (i // 5), 5 * (i // 5) + 5)) <= community for i in community)


def test_louvain_never_lowers_modularity() -> None:
    for seed in range(10):
        synth = generate(SynthSpec(sizes=[10, 10, 10, 10], p_in=0.7, p_out=0.03, seed=seed))
        g = synth.graph
        p = louvain(g, DetectorConfig(method="louvain", seed=seed))
        check_bookkeeping(p, g)
        planted = PartitionState.from_labels(g, [i // 10 for i in range(g.n)])
        assert modularity(p) >= modularity(PartitionState.singletons(g))
        assert modularity(p) >= 0.9 * modularity(planted)


def test_detect_dispatch() -> None:
    g = two_triangles()
    assert detect(g, DetectorConfig(method="louvain")).labels() == louvain(
        g, DetectorConfig(method="louvain")
    ).labels()
    assert detect(g, DetectorConfig(method="lpm", seed=4)).labels() == lpm(
        g, DetectorConfig(method="lpm", seed=4)
    ).labels()
