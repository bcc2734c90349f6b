import math
import pytest
import networkx as nx
from typing import Any
from deltacom.preprocess import *
from deltacom.graph import AffiliationMap
from deltacom.synth import SynthSpec, generate
from .utils import complete_graph, make_graph, path_graph, random_graph, to_networkx


def test_k_core_of_path_is_empty() -> None:
    result = clean_graph(path_graph(5), AffiliationMap.empty(path_graph(5)))
    assert result.report.nodes_removed_2core == 5
    assert result.graph.n == 0
    assert k_core(path_graph(5), 2).n == 0


def test_k_core_matches_networkx() -> None:
    for seed in range(5):
        g = random_graph(seed, 40, 0.08)
        for k in (1, 2, 3):
            expected = {str(i) for i in nx.k_core(to_networkx(g), k).nodes}
            core = k_core(g, k)
            assert set(core.node_ids) == expected
            core.check_invariants()


def test_k_core_rejects_nonpositive_k() -> None:
    with pytest.raises(DeltacomError):
        k_core(path_graph(3), 0)


def test_find_chains() -> None:
    # triangles 0-1-2 and 5-6-7 joined by the path 2-3-4-5
    g = make_graph([(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (5, 7), (6, 7)])
    chains = find_chains(g)
    interiors = sorted(c.interior for c in chains)
    assert (3, 4) in interiors
    chain = next(c for c in chains if c.interior == (3, 4))
    assert {chain.endpoint_a, chain.endpoint_b} == {2, 5}
    assert not chain.is_loop
    # 0 and 1 are degree-2 nodes between the degree-3 node 2 and itself
    loop = next(c for c in chains if 0 in c.interior)
    assert loop.is_loop
    assert find_degree2_cycles(g) == []


def test_chain_without_interior() -> None:
    with pytest.raises(DeltacomError):
        Chain(0, 1, ())


def test_degree2_cycle() -> None:
    g = make_graph([(i, (i + 1) % 5) for i in range(5)])
    assert find_chains(g) == []
    cycles = find_degree2_cycles(g)
    assert len(cycles) == 1
    assert sorted(cycles[0]) == [0, 1, 2, 3, 4]

    collapsed, report = collapse_chains(g, [])
    assert collapsed.n == 0
    assert report.cycles_removed == 1
    assert report.cycle_nodes_removed == 5


def test_classify_chain() -> None:
    g = path_graph(4)
    chain = Chain(0, 3, (1, 2))

    def classify(groups: dict) -> ChainKind:
        return classify_chain(chain, AffiliationMap(g.node_ids, groups))

    assert classify({"0": "x", "1": "x", "2": "x", "3": "x"}) == ChainKind.INTERNAL_CONNECTION
    assert classify({"0": "x", "1": "x", "3": "x"}) == ChainKind.INTERNAL_TUNNEL
    assert classify({"0": "x", "3": "x"}) == ChainKind.INTERNAL_TUNNEL
    assert classify({"0": "x", "1": "x", "2": "x", "3": "y"}) == ChainKind.INTER_AS_TUNNEL
    assert classify({"0": "x", "1": "y", "3": "x"}) == ChainKind.OTHER
    assert classify({"0": "x", "1": "x", "2": "x"}) == ChainKind.OTHER


def test_collapse_chains_parallel_and_loop() -> None:
    # K4 on 0..3, a chain 0-4-1 parallel to the edge 0-1, a loop 2-5-6-2
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    edges += [(0, 4), (4, 1), (2, 5), (5, 6), (6, 2)]
    g = make_graph(edges)
    chains = find_chains(g)
    collapsed, report = collapse_chains(g, chains)

    assert report.chains_found == 2
    assert report.parallel_chains_merged == 1
    assert report.self_loops_suppressed == 1
    assert report.chain_nodes_removed == 3
    assert collapsed.n == 4
    assert collapsed.m == 6
    collapsed.check_invariants()


def test_collapse_chains_new_edge() -> None:
    g = make_graph([(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (5, 7), (6, 7)])
    collapsed, report = collapse_chains(g, [c for c in find_chains(g) if c.interior == (3, 4)])
    assert collapsed.n == 6
    assert collapsed.has_edge(collapsed.index_of["2"], collapsed.index_of["5"])
    assert report.parallel_chains_merged == 0


def test_contingency() -> None:
    # a 28-cycle with 12 affiliated nodes and 36 disjoint edges with 70 affiliated nodes
    edges = [(i, (i + 1) % 28) for i in range(28)]
    edges += [(28 + 2 * e, 29 + 2 * e) for e in range(36)]
    g = make_graph(edges, 100)
    affiliated = list(range(12)) + list(range(28, 98))
    aff = AffiliationMap(g.node_ids, {str(i): "x" for i in affiliated})

    c = degree2_affiliation_contingency(g, aff)
    assert c.nodes == 100
    assert c.degree2_affiliated == pytest.approx(0.12)
    assert c.degree2_unaffiliated == pytest.approx(0.16)
    assert c.other_affiliated == pytest.approx(0.70)
    assert c.other_unaffiliated == pytest.approx(0.02)
    assert sum(c.cells().values()) == pytest.approx(1.0)
    expected_phi = (12 * 2 - 16 * 70) / math.sqrt(28 * 72 * 82 * 18)
    assert c.phi == pytest.approx(expected_phi, abs=1e-12)
    assert c.phi == pytest.approx(-0.7, abs=0.1)


def test_contingency_undefined_correlation(caplog: Any) -> None:
    g = make_graph([(i, (i + 1) % 6) for i in range(6)])
    c = degree2_affiliation_contingency(g, AffiliationMap.empty(g))
    assert c.phi is None
    assert c.degree2_unaffiliated == 1.0
    assert "undefined" in caplog.text


def test_clean_graph_iterates_to_fixpoint() -> None:
    # K4 on 0..3, node 4 hangs off 0 and carries the loop 4-5-6-4
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    edges += [(0, 4), (4, 5), (5, 6), (6, 4)]
    g = make_graph(edges)
    aff = AffiliationMap.empty(g)

    single = clean_graph(g, aff, iterate=False)
    assert single.report.iterations == 1
    assert single.graph.n == 5
    assert single.report.self_loops_suppressed == 1

    full = clean_graph(g, aff)
    assert full.report.iterations == 3
    assert full.report.nodes_removed_2core == 1
    assert sorted(full.graph.node_ids) == ["0", "1", "2", "3"]
    assert full.graph.m == 6
    assert k_core(full.graph, 2).n == full.graph.n
    assert find_chains(full.graph) == []


def decorated_cliques(kind: ChainKind, chain_count: int, seed: int) -> Any:
    spec = SynthSpec(
        sizes=[6, 6, 6],
        p_in=1.0,
        chain_count=chain_count,
        chain_kind=kind,
        tendril_count=5,
        seed=seed,
    )
    return generate(spec)


def test_clean_graph_recovers_planted_chains() -> None:
    for seed in range(5):
        synth = decorated_cliques(ChainKind.INTERNAL_TUNNEL, 10, seed)
        g = synth.graph
        tendril_nodes = sum(len(t) for t in synth.tendrils)
        chain_nodes = sum(len(c.interior) for c in synth.chains)

        result = clean_graph(g, synth.affiliations)
        report = result.report
        assert report.nodes_removed_2core == tendril_nodes
        assert report.chains_found == 10
        assert report.chains_by_taxonomy == {"internal-tunnel": 10}
        assert report.chain_nodes_removed == chain_nodes
        assert report.parallel_chains_merged == 10
        assert report.iterations == 2
        assert result.graph.n == 18
        assert result.graph.m == 45
        assert report.affiliation_coverage_after == 1.0
        assert {frozenset(c.interior) for c in result.chains} == {
            frozenset(c.interior) for c in synth.chains
        }


def test_clean_graph_inter_group_chains() -> None:
    synth = decorated_cliques(ChainKind.INTER_AS_TUNNEL, 8, 3)
    result = clean_graph(synth.graph, synth.affiliations)
    new_pairs = {frozenset((c.endpoint_a, c.endpoint_b)) for c in synth.chains}

    assert result.report.chains_by_taxonomy == {"inter-as-tunnel": 8}
    assert result.graph.m == 45 + len(new_pairs)
    assert result.report.parallel_chains_merged == 8 - len(new_pairs)


def test_clean_graph_taxonomy_kinds() -> None:
    for kind in ChainKind:
        synth = decorated_cliques(kind, 4, 11)
        result = clean_graph(synth.graph, synth.affiliations)
        assert result.report.chains_by_taxonomy == {kind.value: 4}
        assert all(c.taxonomy == kind for c in result.chains)


def test_cleaning_report_pairs() -> None:
    g = complete_graph(4)
    result = clean_graph(g, AffiliationMap(g.node_ids, {"0": "x"}))
    pairs = dict(result.report.as_pairs())
    assert pairs["nodes_after"] == "4"
    assert pairs["chains_found"] == "0"
    assert pairs["affiliation_coverage_after"] == "0.250000"
    assert pairs["contingency_phi"] == "undefined"
