import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple
from typeguard import typechecked
from deltacom import settings
from deltacom.errors import DeltacomError
from deltacom.graph import AffiliationMap, Graph

logger = logging.getLogger(__name__)


class ChainKind(str, Enum):
    INTERNAL_CONNECTION = "internal-connection"
    INTERNAL_TUNNEL = "internal-tunnel"
    INTER_AS_TUNNEL = "inter-as-tunnel"
    OTHER = "other"


@typechecked
@dataclass(frozen=True)
class Chain:
    endpoint_a: int
    endpoint_b: int
    interior: Tuple[int, ...]
    taxonomy: Optional[ChainKind] = None

    def __post_init__(self) -> None:
        if len(self.interior) == 0:
            raise DeltacomError(f"Chain without interior nodes: {self}")

    @property
    def is_loop(self) -> bool:
        return self.endpoint_a == self.endpoint_b


@typechecked
@dataclass
class Contingency:
    """Joint distribution of (degree == 2, has affiliation) over all nodes."""

    degree2_affiliated: float
    degree2_unaffiliated: float
    other_affiliated: float
    other_unaffiliated: float
    phi: Optional[float]
    nodes: int

    def cells(self) -> Dict[Tuple[bool, bool], float]:
        return {
            (True, True): self.degree2_affiliated,
            (True, False): self.degree2_unaffiliated,
            (False, True): self.other_affiliated,
            (False, False): self.other_unaffiliated,
        }


@typechecked
@dataclass
class CleaningReport:
    nodes_removed_2core: int = 0
    chains_found: int = 0
    chains_by_taxonomy: Dict[str, int] = field(default_factory=dict)
    nodes_after: int = 0
    edges_after: int = 0
    affiliation_coverage_after: Optional[float] = None
    contingency: Optional[Contingency] = None
    cycles_removed: int = 0
    cycle_nodes_removed: int = 0
    chain_nodes_removed: int = 0
    self_loops_suppressed: int = 0
    parallel_chains_merged: int = 0
    iterations: int = 0

    def absorb(self, other: "CleaningReport") -> None:
        self.nodes_removed_2core += other.nodes_removed_2core
        self.chains_found += other.chains_found
        for kind, count in other.chains_by_taxonomy.items():
            self.chains_by_taxonomy[kind] = self.chains_by_taxonomy.get(kind, 0) + count
        self.cycles_removed += other.cycles_removed
        self.cycle_nodes_removed += other.cycle_nodes_removed
        self.chain_nodes_removed += other.chain_nodes_removed
        self.self_loops_suppressed += other.self_loops_suppressed
        self.parallel_chains_merged += other.parallel_chains_merged
        self.nodes_after = other.nodes_after
        self.edges_after = other.edges_after

    def as_pairs(self) -> List[Tuple[str, str]]:
        pairs = [
            ("nodes_removed_2core", str(self.nodes_removed_2core)),
            ("chains_found", str(self.chains_found)),
            ("cycles_removed", str(self.cycles_removed)),
            ("cycle_nodes_removed", str(self.cycle_nodes_removed)),
            ("chain_nodes_removed", str(self.chain_nodes_removed)),
            ("self_loops_suppressed", str(self.self_loops_suppressed)),
            ("parallel_chains_merged", str(self.parallel_chains_merged)),
            ("iterations", str(self.iterations)),
            ("nodes_after", str(self.nodes_after)),
            ("edges_after", str(self.edges_after)),
        ]
        if self.affiliation_coverage_after is not None:
            pairs.append(
                ("affiliation_coverage_after", f"{self.affiliation_coverage_after:.6f}")
            )
        if self.contingency is not None:
            c = self.contingency
            pairs.extend(
                [
                    ("contingency_degree2_affiliated", f"{c.degree2_affiliated:.6f}"),
                    ("contingency_degree2_unaffiliated", f"{c.degree2_unaffiliated:.6f}"),
                    ("contingency_other_affiliated", f"{c.other_affiliated:.6f}"),
                    ("contingency_other_unaffiliated", f"{c.other_unaffiliated:.6f}"),
                    ("contingency_phi", "undefined" if c.phi is None else f"{c.phi:.6f}"),
                ]
            )
        return pairs


@typechecked
@dataclass
class CleaningResult:
    graph: Graph
    affiliations: AffiliationMap
    report: CleaningReport
    chains: List[Chain]


@typechecked
def k_core(g: Graph, k: int) -> Graph:
    if k < 1:
        raise DeltacomError(f"k must be positive: {k}")
    adjacency = g.adjacency
    degree = [len(neighbors) for neighbors in adjacency]
    removed = [d < k for d in degree]
    queue = deque(i for i, flag in enumerate(removed) if flag)
    while queue:
        i = queue.popleft()
        for j in adjacency[i]:
            if not removed[j]:
                degree[j] -= 1
                if degree[j] < k:
                    removed[j] = True
                    queue.append(j)
    core = g.subgraph(i for i, flag in enumerate(removed) if not flag)
    logger.debug(f"{k}-core: {g.n} -> {core.n} nodes, {g.m} -> {core.m} edges")
    return core


def _scan_degree2(g: Graph) -> Tuple[List[Chain], List[List[int]]]:
    adjacency = g.adjacency
    visited = [False] * g.n
    chains: List[Chain] = []

    for u in range(g.n):
        if len(adjacency[u]) == 2:
            continue
        for v in adjacency[u]:
            if len(adjacency[v]) != 2 or visited[v]:
                continue
            interior = []
            prev, cur = u, v
            while len(adjacency[cur]) == 2:
                interior.append(cur)
                visited[cur] = True
                first, second = adjacency[cur]
                prev, cur = cur, (second if first == prev else first)
            chains.append(Chain(u, cur, tuple(interior)))

    cycles: List[List[int]] = []
    for s in range(g.n):
        if visited[s] or len(adjacency[s]) != 2:
            continue
        cycle = [s]
        visited[s] = True
        prev, cur = s, adjacency[s][0]
        while cur != s:
            cycle.append(cur)
            visited[cur] = True
            first, second = adjacency[cur]
            prev, cur = cur, (second if first == prev else first)
        cycles.append(cycle)

    return chains, cycles


@typechecked
def find_chains(g: Graph) -> List[Chain]:
    chains, cycles = _scan_degree2(g)
    if cycles:
        logger.debug(f"{len(cycles)} degree-2 cycles flagged")
    return chains


@typechecked
def find_degree2_cycles(g: Graph) -> List[List[int]]:
    chains, cycles = _scan_degree2(g)
    return cycles


@typechecked
def classify_chain(c: Chain, aff: AffiliationMap) -> ChainKind:
    group_a = aff.group_of(c.endpoint_a)
    group_b = aff.group_of(c.endpoint_b)
    if group_a is None or group_b is None:
        return ChainKind.OTHER
    if group_a != group_b:
        return ChainKind.INTER_AS_TUNNEL

    interior_groups = [aff.group_of(i) for i in c.interior]
    if all(group == group_a for group in interior_groups):
        return ChainKind.INTERNAL_CONNECTION
    if all(group in (group_a, None) for group in interior_groups):
        return ChainKind.INTERNAL_TUNNEL
    return ChainKind.OTHER


@typechecked
def collapse_chains(
    g: Graph, chains: List[Chain], cycles: Optional[List[List[int]]] = None
) -> Tuple[Graph, CleaningReport]:
    if cycles is None:
        cycles = find_degree2_cycles(g)

    removed: Set[int] = set()
    for chain in chains:
        removed.update(chain.interior)
    chain_nodes = len(removed)
    for cycle in cycles:
        removed.update(cycle)

    edges = {(i, j) for i, j in g.edges() if i not in removed and j not in removed}
    self_loops = 0
    parallel = 0
    for chain in chains:
        a, b = chain.endpoint_a, chain.endpoint_b
        if a == b:
            self_loops += 1
            continue
        key = (a, b) if a < b else (b, a)
        if key in edges:
            parallel += 1
        else:
            edges.add(key)

    kept = [i for i in range(g.n) if i not in removed]
    new_index = {old: new for new, old in enumerate(kept)}
    collapsed = Graph.from_edges(
        [g.node_ids[i] for i in kept],
        ((new_index[i], new_index[j]) for i, j in edges),
    )

    taxonomy: Dict[str, int] = {}
    for chain in chains:
        kind = "unclassified" if chain.taxonomy is None else chain.taxonomy.value
        taxonomy[kind] = taxonomy.get(kind, 0) + 1

    report = CleaningReport(
        chains_found=len(chains),
        chains_by_taxonomy=taxonomy,
        nodes_after=collapsed.n,
        edges_after=collapsed.m,
        cycles_removed=len(cycles),
        cycle_nodes_removed=len(removed) - chain_nodes,
        chain_nodes_removed=chain_nodes,
        self_loops_suppressed=self_loops,
        parallel_chains_merged=parallel,
    )
    logger.debug(
        f"Collapsed {len(chains)} chains and {len(cycles)} cycles: "
        f"{g.n} -> {collapsed.n} nodes, {g.m} -> {collapsed.m} edges"
    )
    return collapsed, report


@typechecked
def degree2_affiliation_contingency(g: Graph, aff: AffiliationMap) -> Contingency:
    counts = {(d2, has): 0 for d2 in (True, False) for has in (True, False)}
    for i in range(g.n):
        counts[(g.degree(i) == 2, aff.has_group(i))] += 1

    n = g.n
    if n == 0:
        logger.warning("Contingency of an empty graph, correlation undefined")
        return Contingency(0.0, 0.0, 0.0, 0.0, None, 0)

    n11, n10 = counts[(True, True)], counts[(True, False)]
    n01, n00 = counts[(False, True)], counts[(False, False)]
    marginals = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)
    if marginals == 0:
        logger.warning(
            "Correlation between degree 2 and affiliation undefined (empty margin)"
        )
        phi: Optional[float] = None
    else:
        phi = (n11 * n00 - n10 * n01) / math.sqrt(marginals)

    return Contingency(n11 / n, n10 / n, n01 / n, n00 / n, phi, n)


@typechecked
def clean_graph(
    g: Graph,
    aff: AffiliationMap,
    k: int = settings.DEFAULT_CORE_K,
    iterate: bool = True,
) -> CleaningResult:
    report = CleaningReport(contingency=degree2_affiliation_contingency(g, aff))
    all_chains: List[Chain] = []
    current = g

    while True:
        report.iterations += 1
        core = k_core(current, k)
        core_aff = aff.for_graph(core)
        chains = [
            replace(chain, taxonomy=classify_chain(chain, core_aff))
            for chain in find_chains(core)
        ]
        cycles = find_degree2_cycles(core)
        collapsed, step = collapse_chains(core, chains, cycles)
        step.nodes_removed_2core = current.n - core.n
        report.absorb(step)
        # chains are reported against the original graph's ids
        all_chains.extend(
            Chain(
                g.index_of[core.node_ids[chain.endpoint_a]],
                g.index_of[core.node_ids[chain.endpoint_b]],
                tuple(g.index_of[core.node_ids[i]] for i in chain.interior),
                chain.taxonomy,
            )
            for chain in chains
        )
        changed = step.nodes_removed_2core > 0 or len(chains) > 0 or len(cycles) > 0
        current = collapsed
        if not iterate or not changed:
            break
        if report.iterations >= settings.MAX_CLEANING_ITERATIONS:
            logger.warning(
                f"Cleaning stopped after {report.iterations} iterations without fixpoint"
            )
            break

    cleaned_aff = aff.for_graph(current)
    report.nodes_after = current.n
    report.edges_after = current.m
    report.affiliation_coverage_after = cleaned_aff.coverage
    logger.info(
        f"Cleaned graph: {g.n} -> {current.n} nodes, {g.m} -> {current.m} edges, "
        f"{report.chains_found} chains in {report.iterations} iterations, "
        f"coverage {cleaned_aff.coverage:.4f}"
    )
    return CleaningResult(current, cleaned_aff, report, all_chains)
