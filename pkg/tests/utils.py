from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import networkx as nx
import numpy as np
from deltacom.engine import Dendrogram
from deltacom.evaluation import GroundTruth, jaccard
from deltacom.graph import Graph

fixture_dir = Path(__file__).parent / "fixtures"


def make_graph(edges: Sequence[Tuple[int, int]], n: Optional[int] = None) -> Graph:
    if n is None:
        n = 1 + max(max(i, j) for i, j in edges)
    return Graph.from_edges([str(i) for i in range(n)], edges)


def triangle() -> Graph:
    return make_graph([(0, 1), (0, 2), (1, 2)])


def two_triangles() -> Graph:
    return make_graph([(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)])


def complete_graph(n: int) -> Graph:
    return make_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def path_graph(n: int) -> Graph:
    return make_graph([(i, i + 1) for i in range(n - 1)], n)


def two_cliques(size: int) -> Graph:
    """Two cliques joined by one edge between node 0 and node size."""
    edges = [(i, j) for i in range(size) for j in range(i + 1, size)]
    edges += [(size + i, size + j) for i, j in edges]
    return make_graph(edges + [(0, size)], 2 * size)


def clique_ring(cliques: int, size: int) -> Graph:
    """Cliques 0..cliques-1 on nodes size*c .. size*c+size-1, neighbors in a ring."""
    edges = []
    for c in range(cliques):
        base = size * c
        edges += [(base + i, base + j) for i in range(size) for j in range(i + 1, size)]
        edges.append((base, size * ((c + 1) % cliques) + 1))
    return make_graph(edges, cliques * size)


def clique_ring_truth(cliques: int, size: int) -> GroundTruth:
    return GroundTruth(
        {f"c{c}": list(range(size * c, size * (c + 1))) for c in range(cliques)},
        cliques * size,
    )


def random_graph(seed: int, n: int, p: float) -> Graph:
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return make_graph(edges, n)


def to_networkx(g: Graph) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(g.n))
    graph.add_edges_from(g.edges())
    return graph


def set_partitions(n: int) -> Iterator[List[int]]:
    """Every partition of range(n) as restricted growth label lists."""
    labels = [0] * n

    def extend(i: int, used: int) -> Iterator[List[int]]:
        if i == n:
            yield list(labels)
            return
        for label in range(used + 1):
            labels[i] = label
            yield from extend(i + 1, max(used, label + 1))

    if n == 0:
        yield []
    else:
        yield from extend(0, 0)


def naive_modularity(g: Graph, labels: Sequence[int], t: float = 1.0) -> float:
    two_m = 2 * g.m
    degrees = g.degrees()
    total = 0.0
    for i in range(g.n):
        for j in range(g.n):
            if labels[i] == labels[j]:
                a = 1 if g.has_edge(i, j) else 0
                total += a - t * degrees[i] * degrees[j] / two_m
    return total / two_m


def naive_agglomeration(g: Graph) -> List[Tuple[Fraction, int, int, int]]:
    """Merge sequence recomputed from scratch after every merge."""
    members: Dict[int, set] = {i: {i} for i in range(g.n)}
    degrees = g.degrees()
    two_m = 2 * g.m
    merges = []
    next_id = g.n
    while True:
        best = None
        for a in sorted(members):
            for b in sorted(members):
                if a >= b:
                    continue
                e = 2 * sum(1 for i in members[a] for j in members[b] if g.has_edge(i, j))
                if e == 0:
                    continue
                k_a = sum(degrees[i] for i in members[a])
                k_b = sum(degrees[i] for i in members[b])
                ratio = Fraction(e * two_m, k_a * k_b)
                if best is None or ratio > best[0]:
                    best = (ratio, a, b)
        if best is None:
            return merges
        ratio, a, b = best
        members[next_id] = members.pop(a) | members.pop(b)
        merges.append((ratio, a, b, next_id))
        next_id += 1


def naive_r2(d: Dendrogram, gt: GroundTruth) -> Dict[str, Tuple[float, int, Fraction]]:
    """Best Jaccard per group by scanning every community of every breakpoint partition."""
    best: Dict[str, Tuple[float, int, Fraction]] = {}
    for t, labels in d.breakpoint_partitions():
        communities: Dict[int, List[int]] = {}
        for i, c in enumerate(labels):
            communities.setdefault(c, []).append(i)
        for name, nodes in gt.groups.items():
            for c in sorted(communities):
                score = jaccard(communities[c], nodes)
                if name not in best or score > best[name][0]:
                    best[name] = (score, c, t)
    return best


def community_sets(labels: Sequence[int]) -> List[frozenset]:
    communities: Dict[int, set] = {}
    for i, c in enumerate(labels):
        communities.setdefault(c, set()).add(i)
    return sorted((frozenset(s) for s in communities.values()), key=min)
