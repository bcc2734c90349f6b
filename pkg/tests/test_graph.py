import gzip
import pytest
import networkx as nx
import numpy as np
from pathlib import Path
from typing import Any
from deltacom.graph import *
from deltacom.errors import DeltacomError, GraphParseError, UndefinedValueError
from .utils import fixture_dir, make_graph, path_graph, random_graph, to_networkx, triangle


def test_load_edge_list(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    edges_path = tmpdir / "graph.edges"
    edges_path.write_text("# comment\na b\nb c  # trailing\n\nc a\n")

    loaded = load_edge_list(edges_path)
    g = loaded.graph
    assert g.n == 3
    assert g.m == 3
    assert g.node_ids == ["a", "b", "c"]
    assert g.index_of["c"] == 2
    assert g.has_edge(0, 2)
    assert loaded.duplicates_dropped == 0
    assert loaded.affiliations.coverage == 0.0
    g.check_invariants()


def test_load_edge_list_drops_duplicates_and_self_loops(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    edges_path = tmpdir / "graph.edges"
    edges_path.write_text("a b\nb a\na a\nb c\n")

    loaded = load_edge_list(edges_path)
    assert loaded.graph.m == 2
    assert loaded.duplicates_dropped == 1
    assert loaded.self_loops_dropped == 1
    assert loaded.graph.edge_id_set() == {frozenset(("a", "b")), frozenset(("b", "c"))}


def test_load_edge_list_parse_error(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    edges_path = tmpdir / "graph.edges"
    edges_path.write_text("a b\na b c\n")

    with pytest.raises(GraphParseError) as info:
        load_edge_list(edges_path)
    assert info.value.line_number == 2
    assert "line 2" in str(info.value)


def test_load_edge_list_rejects_invalid_utf8(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    edges_path = tmpdir / "graph.edges"
    edges_path.write_bytes(b"a b\n\xff\xfe c\n")

    with pytest.raises(GraphParseError) as info:
        load_edge_list(edges_path)
    assert info.value.line_number == 2
    assert "UTF-8" in str(info.value)

    gz_path = tmpdir / "graph.edges.gz"
    with gzip.open(gz_path, "wb") as f:
        f.write(b"a b\nb c\n\xc3 d\n")
    with pytest.raises(GraphParseError) as info:
        load_edge_list(gz_path)
    assert info.value.line_number == 3

    edges_path.write_bytes("é b\nb ü\n".encode("utf-8"))
    assert load_edge_list(edges_path).graph.node_ids == ["é", "b", "ü"]


def test_load_empty_edge_list(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    edges_path = tmpdir / "graph.edges"
    edges_path.write_text("# nothing\n")

    g = load_edge_list(edges_path).graph
    assert g.n == 0
    assert g.m == 0


def test_load_affiliations(tmpdir: Any, caplog: Any) -> None:
    tmpdir = Path(tmpdir)
    aff_path = tmpdir / "graph.affiliations"
    aff_path.write_text("a x\nb x\nz y\n")

    loaded = load_edge_list(fixture_dir / "two_triangles.edges", aff_path)
    assert loaded.unknown_affiliations == 1
    assert "unknown node" in caplog.text
    aff = loaded.affiliations
    assert aff.group_of(loaded.graph.index_of["a"]) == "x"
    assert not aff.has_group(loaded.graph.index_of["c"])
    assert aff.coverage == pytest.approx(2 / 6)
    assert aff.groups() == {"x": [0, 1]}


def test_conflicting_affiliation_keeps_first(tmpdir: Any, caplog: Any) -> None:
    tmpdir = Path(tmpdir)
    aff_path = tmpdir / "graph.affiliations"
    aff_path.write_text("a x\na x\nb x\na y\n")

    loaded = load_edge_list(fixture_dir / "two_triangles.edges", aff_path)
    assert loaded.affiliations.group_of(loaded.graph.index_of["a"]) == "x"
    assert loaded.affiliations.groups() == {"x": [0, 1]}
    assert "Conflicting affiliation for a skipped at line 4: y, keeping x" in caplog.text
    assert caplog.text.count("Conflicting") == 1


def test_gzip_round_trip(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    g = load_edge_list(fixture_dir / "two_triangles.edges").graph
    gz_path = tmpdir / "graph.edges.gz"
    write_edge_list(g, gz_path)

    with open(gz_path, "rb") as f:
        assert f.read(2) == b"\x1f\x8b"
    assert load_edge_list(gz_path).graph.edge_id_set() == g.edge_id_set()


def test_gzip_detected_by_content(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    path = tmpdir / "graph.edges"
    with gzip.open(path, "wt", encoding="utf-8") as f:
        f.write("a b\n")
    assert load_edge_list(path).graph.m == 1


def test_write_affiliations(tmpdir: Any) -> None:
    tmpdir = Path(tmpdir)
    loaded = load_edge_list(
        fixture_dir / "two_triangles.edges", fixture_dir / "two_triangles.affiliations"
    )
    target = tmpdir / "out.affiliations"
    write_affiliations(loaded.graph, loaded.affiliations, target)
    assert target.read_text().splitlines()[0] == "a left"
    assert len(target.read_text().splitlines()) == 6


def test_graph_rejects_duplicated_ids() -> None:
    with pytest.raises(DeltacomError):
        Graph([[], []], ["a", "a"])


def test_subgraph() -> None:
    g = make_graph([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    sub = g.subgraph([0, 2, 3])
    assert sub.node_ids == ["0", "2", "3"]
    assert sub.m == 3
    sub.check_invariants()


def test_check_invariants_detects_asymmetry() -> None:
    g = Graph([[1], []], ["a", "b"])
    with pytest.raises(DeltacomError):
        g.check_invariants()


def test_affiliation_map_for_graph() -> None:
    g = make_graph([(0, 1), (1, 2)])
    aff = AffiliationMap(g.node_ids, {"0": "x", "2": "y"})
    sub = g.subgraph([1, 2])
    sub_aff = aff.for_graph(sub)
    assert sub_aff.labels() == [None, "y"]
    assert sub_aff.coverage == 0.5
    assert AffiliationMap.empty(g).coverage == 0.0


def test_clustering_coefficient() -> None:
    assert clustering_coefficient(triangle(), 0) == 1.0
    assert clustering_coefficient(path_graph(3), 1) == 0.0
    with pytest.raises(UndefinedValueError):
        clustering_coefficient(path_graph(3), 0)


def test_avg_neighbor_degree() -> None:
    star = make_graph([(0, 1), (0, 2), (0, 3)])
    assert avg_neighbor_degree(star, 0) == 1.0
    assert avg_neighbor_degree(star, 1) == 3.0
    isolated = Graph([[]], ["x"])
    with pytest.raises(UndefinedValueError):
        avg_neighbor_degree(isolated, 0)


def test_local_statistics_match_networkx() -> None:
    for seed in range(5):
        g = random_graph(seed, 40, 0.15)
        graph = to_networkx(g)
        clustering = nx.clustering(graph)
        knn = nx.average_neighbor_degree(graph)
        for i in range(g.n):
            if g.degree(i) >= 2:
                assert clustering_coefficient(g, i) == pytest.approx(clustering[i])
            if g.degree(i) >= 1:
                assert avg_neighbor_degree(g, i) == pytest.approx(knn[i])


def test_connected_components_match_networkx() -> None:
    for seed in range(5):
        g = random_graph(seed, 30, 0.06)
        expected = sorted(sorted(c) for c in nx.connected_components(to_networkx(g)))
        assert sorted(connected_components(g)) == expected


def test_fit_power_law() -> None:
    rng = np.random.default_rng(1)
    alpha = 2.5
    k_min = 20
    x = (k_min - 0.5) * (1 - rng.random(100000)) ** (-1 / (alpha - 1))
    degrees = np.rint(x).astype(int).tolist()

    assert fit_power_law(degrees, k_min) == pytest.approx(alpha, abs=0.05)


def test_fit_power_law_errors() -> None:
    with pytest.raises(DeltacomError):
        fit_power_law([], 1)
    with pytest.raises(DeltacomError):
        fit_power_law([3, 4, 5], 1)
    with pytest.raises(DeltacomError):
        fit_power_law([4] * 50, 1)
    with pytest.raises(DeltacomError):
        fit_power_law([4, 5] * 50, 0)


def test_degree_stats() -> None:
    g = make_graph([(0, 1), (0, 2), (1, 2), (2, 3)])
    stats = degree_stats(g, k_min=1)
    assert stats.degree_histogram == {1: 1, 2: 2, 3: 1}
    assert stats.clustering_by_degree == {2: 1.0, 3: pytest.approx(1 / 3)}
    assert stats.neighbor_degree_by_degree[1] == 3.0
    assert stats.nodes_considered == 3
    assert sum(count for _, _, count in stats.clustering_histogram) == 3
    assert stats.clustering_histogram[-1][2] == 2
    # too few samples for a tail fit
    assert stats.alpha is None
