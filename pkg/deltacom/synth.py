"""Planted-partition graphs with known groups, plus chain and tendril decorations."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple
import numpy as np
from typeguard import typechecked
from deltacom import settings
from deltacom.errors import SynthesisError
from deltacom.graph import AffiliationMap, Graph, connected_components
from deltacom.preprocess import Chain, ChainKind

logger = logging.getLogger(__name__)


@typechecked
@dataclass
class SynthSpec:
    """Parameters of one synthetic benchmark.

    p_in is the edge probability inside a block; mean_internal_degree, when
    set, replaces it per block with min(1, degree / (size - 1)). External
    edges are drawn with probability p_out, or to reach external_degree per
    node on average.
    """

    sizes: List[int]
    p_in: float = 1.0
    p_out: float = 0.0
    external_degree: Optional[float] = None
    mean_internal_degree: Optional[float] = None
    chain_count: int = 0
    chain_kind: ChainKind = ChainKind.INTERNAL_TUNNEL
    chain_length: Tuple[int, int] = (1, 3)
    tendril_count: int = 0
    tendril_length: Tuple[int, int] = (1, 3)
    seed: int = 0

    def block_probability(self, size: int) -> float:
        if self.mean_internal_degree is None:
            return self.p_in
        return min(1.0, self.mean_internal_degree / (size - 1))

    def external_probability(self) -> float:
        if self.external_degree is None:
            return self.p_out
        n = sum(self.sizes)
        pairs = (n * n - sum(s * s for s in self.sizes)) // 2
        if pairs == 0:
            return 0.0
        return min(1.0, n * self.external_degree / (2 * pairs))


@typechecked
@dataclass
class SynthResult:
    graph: Graph
    affiliations: AffiliationMap
    ground_truth: Dict[str, List[str]]
    chains: List[Chain] = field(default_factory=list)
    tendrils: List[List[int]] = field(default_factory=list)


@typechecked
def heterogeneous_sizes(levels: int, base: int = 10) -> List[int]:
    """Block sizes base * 2^j, with 2^(levels-1-j) blocks of each size."""
    sizes: List[int] = []
    for j in range(levels):
        sizes.extend([base * 2**j] * 2 ** (levels - 1 - j))
    return sizes


def _connected_block(rng: np.random.Generator, size: int, p: float) -> List[Tuple[int, int]]:
    rows, cols = np.triu_indices(size, 1)
    for attempt in range(1, settings.SYNTH_MAX_RETRIES + 1):
        keep = rng.random(len(rows)) < p
        edges = list(zip(rows[keep].tolist(), cols[keep].tolist()))
        block = Graph.from_edges([str(i) for i in range(size)], edges)
        if len(connected_components(block)) == 1:
            if attempt > 1:
                logger.debug(f"Block of {size} nodes connected after {attempt} draws")
            return edges
    raise SynthesisError(
        f"Block of {size} nodes still disconnected after {settings.SYNTH_MAX_RETRIES} draws "
        f"with p_in={p}, use a larger p_in"
    )


def _external_edges(
    rng: np.random.Generator, block_of: np.ndarray, p: float
) -> Set[Tuple[int, int]]:
    n = len(block_of)
    sizes = np.bincount(block_of)
    pairs = (n * n - int(np.sum(sizes * sizes))) // 2
    if p <= 0 or pairs == 0:
        return set()
    count = int(rng.binomial(pairs, p))
    edges: Set[Tuple[int, int]] = set()
    while len(edges) < count:
        i, j = rng.integers(n, size=2).tolist()
        if block_of[i] == block_of[j]:
            continue
        edges.add((i, j) if i < j else (j, i))
    return edges


@typechecked
def generate(spec: SynthSpec) -> SynthResult:
    if any(size < 3 for size in spec.sizes):
        raise SynthesisError(f"Block sizes must be at least 3: {spec.sizes}")
    p_out = spec.external_probability()
    if not (0 <= p_out < spec.p_in <= 1):
        raise SynthesisError(f"Need 0 <= p_out < p_in <= 1, got p_out={p_out} p_in={spec.p_in}")

    rng = np.random.default_rng(spec.seed)
    n = sum(spec.sizes)
    node_ids = [str(i) for i in range(n)]
    block_of = np.repeat(np.arange(len(spec.sizes)), spec.sizes)

    edges: Set[Tuple[int, int]] = set()
    ground_truth: Dict[str, List[str]] = {}
    offset = 0
    for b, size in enumerate(spec.sizes):
        for i, j in _connected_block(rng, size, spec.block_probability(size)):
            edges.add((offset + i, offset + j))
        ground_truth[f"g{b}"] = node_ids[offset : offset + size]
        offset += size
    internal = len(edges)
    edges |= _external_edges(rng, block_of, p_out)

    g = Graph.from_edges(node_ids, edges)
    aff = AffiliationMap(
        node_ids, {node_id: f"g{block_of[i]}" for i, node_id in enumerate(node_ids)}
    )
    logger.info(
        f"Planted {len(spec.sizes)} groups: n={g.n}, {internal} internal and "
        f"{g.m - internal} external edges"
    )
    result = SynthResult(g, aff, ground_truth)

    if spec.chain_count > 0:
        result = decorate_chains(
            result, spec.chain_count, spec.chain_length, spec.chain_kind, rng
        )
    if spec.tendril_count > 0:
        result = decorate_tendrils(result, spec.tendril_count, spec.tendril_length, rng)
    return result


def _draw_length(rng: np.random.Generator, length: Tuple[int, int]) -> int:
    low, high = length
    if low < 1 or high < low:
        raise SynthesisError(f"Invalid length range: {length}")
    return int(rng.integers(low, high + 1))


def _core_nodes_by_group(result: SynthResult) -> Dict[str, List[int]]:
    g = result.graph
    core = {g.index_of[node_id] for nodes in result.ground_truth.values() for node_id in nodes}
    by_group: Dict[str, List[int]] = {}
    for i in sorted(core):
        group = result.affiliations.group_of(i)
        if group is not None and g.degree(i) >= 2:
            by_group.setdefault(group, []).append(i)
    return by_group


def _extended(
    result: SynthResult,
    new_ids: List[str],
    new_edges: List[Tuple[int, int]],
    new_groups: Dict[str, str],
) -> Tuple[Graph, AffiliationMap]:
    g = result.graph
    node_ids = g.node_ids + new_ids
    graph = Graph.from_edges(node_ids, list(g.edges()) + new_edges)
    group_by_id = dict(result.affiliations.group_by_id)
    group_by_id.update(new_groups)
    return graph, AffiliationMap(node_ids, group_by_id)


@typechecked
def decorate_chains(
    result: SynthResult,
    count: int,
    length: Tuple[int, int],
    kind: ChainKind,
    rng: np.random.Generator,
) -> SynthResult:
    """Insert paths of fresh degree-2 nodes between core nodes.

    Endpoints are distinct core nodes of degree >= 2. Interior affiliation
    follows the kind: the endpoints' group for internal connections, none
    for tunnels, a third group for other.
    """
    if count == 0:
        return result
    by_group = _core_nodes_by_group(result)
    names = sorted(by_group)
    pair_groups = [name for name in names if len(by_group[name]) >= 2]
    if kind == ChainKind.INTER_AS_TUNNEL and len(names) < 2:
        raise SynthesisError("Inter-group chains need at least two groups with core nodes")
    if kind != ChainKind.INTER_AS_TUNNEL and not pair_groups:
        raise SynthesisError("No group has two core nodes to join with a chain")
    if kind == ChainKind.OTHER and len(names) < 2:
        raise SynthesisError("Chains through a foreign group need at least two groups")

    g = result.graph
    new_ids: List[str] = []
    new_edges: List[Tuple[int, int]] = []
    new_groups: Dict[str, str] = {}
    chains: List[Chain] = []
    next_index = g.n

    for c in range(count):
        if kind == ChainKind.INTER_AS_TUNNEL:
            first, second = rng.choice(len(names), size=2, replace=False).tolist()
            a = by_group[names[first]][int(rng.integers(len(by_group[names[first]])))]
            b = by_group[names[second]][int(rng.integers(len(by_group[names[second]])))]
            interior_group = None
        else:
            group = pair_groups[int(rng.integers(len(pair_groups)))]
            a, b = (by_group[group][x] for x in rng.choice(len(by_group[group]), size=2, replace=False).tolist())
            if kind == ChainKind.INTERNAL_CONNECTION:
                interior_group = group
            elif kind == ChainKind.INTERNAL_TUNNEL:
                interior_group = None
            else:
                foreign = [name for name in names if name != group]
                interior_group = foreign[int(rng.integers(len(foreign)))]

        interior = []
        previous = a
        for position in range(_draw_length(rng, length)):
            node_id = f"c{c}_{position}"
            new_ids.append(node_id)
            if interior_group is not None:
                new_groups[node_id] = interior_group
            new_edges.append((previous, next_index))
            interior.append(next_index)
            previous = next_index
            next_index += 1
        new_edges.append((previous, b))
        chains.append(Chain(a, b, tuple(interior), kind))

    graph, aff = _extended(result, new_ids, new_edges, new_groups)
    logger.info(f"Planted {count} {kind.value} chains ({len(new_ids)} nodes)")
    return SynthResult(graph, aff, result.ground_truth, result.chains + chains, result.tendrils)


@typechecked
def decorate_tendrils(
    result: SynthResult,
    count: int,
    length: Tuple[int, int],
    rng: np.random.Generator,
) -> SynthResult:
    """Hang paths off core nodes; the nodes take their anchor's group."""
    if count == 0:
        return result
    by_group = _core_nodes_by_group(result)
    anchors = [i for name in sorted(by_group) for i in by_group[name]]
    if not anchors:
        raise SynthesisError("No core node to hang tendrils from")

    g = result.graph
    new_ids: List[str] = []
    new_edges: List[Tuple[int, int]] = []
    new_groups: Dict[str, str] = {}
    tendrils: List[List[int]] = []
    next_index = g.n

    for t in range(count):
        anchor = anchors[int(rng.integers(len(anchors)))]
        group = result.affiliations.group_of(anchor)
        previous = anchor
        nodes = []
        for position in range(_draw_length(rng, length)):
            node_id = f"t{t}_{position}"
            new_ids.append(node_id)
            if group is not None:
                new_groups[node_id] = group
            new_edges.append((previous, next_index))
            nodes.append(next_index)
            previous = next_index
            next_index += 1
        tendrils.append(nodes)

    graph, aff = _extended(result, new_ids, new_edges, new_groups)
    logger.info(f"Planted {count} tendrils ({len(new_ids)} nodes)")
    return SynthResult(graph, aff, result.ground_truth, result.chains, result.tendrils + tendrils)
