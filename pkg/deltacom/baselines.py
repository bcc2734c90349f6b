import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Tuple
import numpy as np
from schema import And, Schema, Use
from typeguard import typechecked
from deltacom import settings
from deltacom.engine import PartitionState, modularity
from deltacom.errors import DeltacomError
from deltacom.graph import Graph

logger = logging.getLogger(__name__)

METHODS = ["lpm", "louvain"]

detector_config_schema = Schema(
    {
        "method": And(str, lambda method: method in METHODS),
        "seed": And(Use(int), lambda seed: seed >= 0),
        "max_sweeps": And(Use(int), lambda sweeps: sweeps >= 1),
    }
)


@typechecked
@dataclass(frozen=True)
class DetectorConfig:
    method: str
    seed: int = 0
    max_sweeps: int = settings.DEFAULT_MAX_SWEEPS

    def __post_init__(self) -> None:
        detector_config_schema.validate(
            {"method": self.method, "seed": self.seed, "max_sweeps": self.max_sweeps}
        )


@typechecked
def _require_nonempty(g: Graph) -> None:
    if g.n == 0:
        raise DeltacomError("Cannot detect communities in an empty graph")


@typechecked
def lpm(g: Graph, cfg: DetectorConfig) -> PartitionState:
    """Asynchronous label propagation.

    Each sweep visits the nodes in a fresh random order. A node keeps its
    label while that label is among its most frequent neighbor labels,
    otherwise it takes one of the most frequent ones. Ties go to the labels
    carried over the most embedded edges (counted by common neighbors) and
    then uniformly at random, so a label does not cross a lone bridge on a tie.
    """
    _require_nonempty(g)
    rng = np.random.default_rng(cfg.seed)
    adjacency = g.adjacency
    neighbor_sets = [set(row) for row in adjacency]
    labels = list(range(g.n))

    def embedded_ties(i: int, tied: List[int]) -> List[int]:
        support: Dict[int, int] = {label: 0 for label in tied}
        candidates = set(tied)
        for j in adjacency[i]:
            if labels[j] in candidates:
                support[labels[j]] += len(neighbor_sets[i] & neighbor_sets[j])
        top = max(support.values())
        return [label for label in tied if support[label] == top]

    for sweep in range(1, cfg.max_sweeps + 1):
        changed = 0
        for i in rng.permutation(g.n).tolist():
            neighbors = adjacency[i]
            if not neighbors:
                continue
            counts = Counter(labels[j] for j in neighbors)
            top = max(counts.values())
            if counts.get(labels[i], 0) == top:
                continue
            tied = sorted(label for label, count in counts.items() if count == top)
            if len(tied) > 1:
                tied = embedded_ties(i, tied)
            labels[i] = tied[int(rng.integers(len(tied)))]
            changed += 1
        logger.debug(f"LPM sweep {sweep}: {changed} labels changed")
        if changed == 0:
            break
    else:
        logger.warning(f"LPM stopped after {cfg.max_sweeps} sweeps without convergence")

    partition = PartitionState.from_labels(g, labels)
    logger.info(f"LPM found {len(partition)} communities in {sweep} sweeps")
    return partition


@typechecked
class _LouvainLevel:
    """Weighted graph of one aggregation level.

    loops[i] counts twice the edges collapsed inside node i, so that
    degree[i] = sum(adjacency[i].values()) + loops[i].
    """

    def __init__(self, adjacency: List[Dict[int, int]], loops: List[int]) -> None:
        self.adjacency = adjacency
        self.loops = loops
        self.degree = [sum(row.values()) + loop for row, loop in zip(adjacency, loops)]

    @classmethod
    def from_graph(cls, g: Graph) -> "_LouvainLevel":
        return cls([{j: 1 for j in row} for row in g.adjacency], [0] * g.n)

    def move_nodes(self, rng: np.random.Generator, two_m: int, max_sweeps: int) -> Tuple[List[int], int]:
        n = len(self.adjacency)
        community = list(range(n))
        total = list(self.degree)
        moves = 0

        for _ in range(max_sweeps):
            moved = 0
            for i in rng.permutation(n).tolist():
                k_i = self.degree[i]
                current = community[i]
                links: Dict[int, int] = {}
                for j, w in self.adjacency[i].items():
                    c = community[j]
                    links[c] = links.get(c, 0) + w
                total[current] -= k_i

                # gain of inserting i into c, scaled by 2m: 2m * k_i,in - tot_c * k_i
                best = current
                best_gain = links.get(current, 0) * two_m - total[current] * k_i
                for c in sorted(links):
                    gain = links[c] * two_m - total[c] * k_i
                    if gain > best_gain:
                        best, best_gain = c, gain

                total[best] += k_i
                if best != current:
                    community[i] = best
                    moved += 1
            moves += moved
            if moved == 0:
                break
        return community, moves

    def aggregate(self, community: List[int]) -> Tuple["_LouvainLevel", List[int]]:
        renumber: Dict[int, int] = {}
        for c in community:
            renumber.setdefault(c, len(renumber))
        node_of = [renumber[c] for c in community]

        adjacency: List[Dict[int, int]] = [{} for _ in renumber]
        loops = [0] * len(renumber)
        for i, row in enumerate(self.adjacency):
            ci = node_of[i]
            loops[ci] += self.loops[i]
            for j, w in row.items():
                cj = node_of[j]
                if ci == cj:
                    loops[ci] += w
                else:
                    adjacency[ci][cj] = adjacency[ci].get(cj, 0) + w
        return _LouvainLevel(adjacency, loops), node_of


@typechecked
def louvain(g: Graph, cfg: DetectorConfig) -> PartitionState:
    """Local moving plus aggregation until no node changes community.

    Nodes are visited in seeded random order and only move on a strictly
    positive modularity gain, so Q never decreases.
    """
    _require_nonempty(g)
    rng = np.random.default_rng(cfg.seed)
    two_m = 2 * g.m
    labels = list(range(g.n))
    level = _LouvainLevel.from_graph(g)
    depth = 0

    while two_m > 0:
        community, moves = level.move_nodes(rng, two_m, cfg.max_sweeps)
        depth += 1
        logger.debug(f"Louvain level {depth}: {moves} moves, {len(level.adjacency)} nodes")
        if moves == 0:
            break
        level, node_of = level.aggregate(community)
        labels = [node_of[label] for label in labels]

    partition = PartitionState.from_labels(g, labels)
    logger.info(
        f"Louvain found {len(partition)} communities in {depth} levels, "
        f"Q={modularity(partition) if g.m > 0 else 0.0:.6f}"
    )
    return partition


@typechecked
def detect(g: Graph, cfg: DetectorConfig) -> PartitionState:
    if cfg.method == "lpm":
        return lpm(g, cfg)
    return louvain(g, cfg)
