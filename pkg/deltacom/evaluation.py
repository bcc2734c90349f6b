"""Scoring detected communities against ground-truth groups.

A group is matched to the community with the highest Jaccard similarity
(its recall score), either in one partition (R1), across every partition of
a dendrogram (R2), or at a predicted resolution from a node sample (R3).
"""
import logging
import math
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import (
    Callable,
    Collection,
    Dict,
    Hashable,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    TypeVar,
)
import numpy as np
from typeguard import typechecked
from deltacom import settings
from deltacom.engine import Dendrogram, PartitionState, Resolution
from deltacom.errors import DeltacomError, RegressionError
from deltacom.graph import AffiliationMap, Graph

logger = logging.getLogger(__name__)

T = TypeVar("T")


@typechecked
class GroundTruth:
    """Disjoint node groups over the node indices of one graph or dendrogram."""

    def __init__(self, groups: Dict[str, List[int]], n: int) -> None:
        self.n = n
        self.groups: Dict[str, List[int]] = {}
        seen: Set[int] = set()
        for name in sorted(groups):
            nodes = sorted(groups[name])
            if len(nodes) == 0:
                logger.warning(f"Group {name} has no nodes in the graph, skipped")
                continue
            if seen.intersection(nodes) or nodes[0] < 0 or nodes[-1] >= n:
                raise DeltacomError(f"Group {name} overlaps another group or is out of range")
            seen.update(nodes)
            self.groups[name] = nodes

    @classmethod
    def from_affiliations(cls, aff: AffiliationMap, n: int) -> "GroundTruth":
        return cls(aff.groups(), n)

    def filtered(self, min_size: int) -> "GroundTruth":
        return GroundTruth(
            {name: nodes for name, nodes in self.groups.items() if len(nodes) >= min_size},
            self.n,
        )

    def __len__(self) -> int:
        return len(self.groups)


@typechecked
@dataclass
class MatchResult:
    group: str
    size: int
    community: int
    score: float
    t: Optional[Fraction]
    method: str

    @property
    def small(self) -> bool:
        return self.size < settings.SMALL_GROUP_SIZE


MatchResults = List[MatchResult]


@typechecked
@dataclass
class RegressionFit:
    slope: float
    intercept: float
    r2: float
    correlation: float
    points: int


@typechecked
def jaccard(a: Collection[Hashable], b: Collection[Hashable]) -> float:
    set_a, set_b = set(a), set(b)
    if len(set_a) == 0 and len(set_b) == 0:
        raise DeltacomError("Jaccard similarity of two empty sets is undefined")
    intersection = len(set_a & set_b)
    return intersection / (len(set_a) + len(set_b) - intersection)


def _best_community(
    labels: Sequence[int],
    sizes: Dict[int, int],
    nodes: Sequence[int],
    group_size: Optional[int] = None,
) -> Tuple[int, int]:
    """Community with the highest Jaccard similarity to nodes, smallest id on ties.

    When nodes is a sample of a group of group_size nodes, each overlap is
    scaled up to the whole group before scoring, so that communities are
    compared against the group rather than against the sample.
    """
    overlap = Counter(labels[i] for i in nodes)
    size = len(nodes) if group_size is None else group_size
    scale = size / len(nodes)
    best_c, best_j = -1, -1.0
    for c in sorted(overlap):
        inter = min(overlap[c] * scale, sizes[c], size)
        j = inter / (sizes[c] + size - inter)
        if j > best_j:
            best_c, best_j = c, j
    return best_c, overlap[best_c]


def _parallel_map(fn: Callable[[str], T], names: List[str], threads: int) -> List[T]:
    if threads <= 1 or len(names) <= 1:
        return [fn(name) for name in names]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, names))


@typechecked
def recall_r1(
    p: PartitionState, gt: GroundTruth, method: str = "r1", threads: int = 1
) -> MatchResults:
    return recall_labels(p.labels(), gt, method, threads)


@typechecked
def recall_labels(
    labels: Sequence[int], gt: GroundTruth, method: str = "r1", threads: int = 1
) -> MatchResults:
    """Single-partition recall from community labels alone."""
    if len(labels) != gt.n:
        raise DeltacomError(f"Partition over {len(labels)} nodes, ground truth over {gt.n}")
    sizes = dict(Counter(labels))

    def match(name: str) -> MatchResult:
        nodes = gt.groups[name]
        c, inter = _best_community(labels, sizes, nodes)
        score = inter / (sizes[c] + len(nodes) - inter)
        return MatchResult(name, len(nodes), c, score, None, method)

    results = _parallel_map(match, sorted(gt.groups), threads)
    logger.info(f"R1 mean recall {mean_recall(results):.4f} over {len(results)} groups")
    return results


def _r2_pass(d: Dendrogram, gt: GroundTruth, names: List[str]) -> Dict[str, MatchResult]:
    """Best Jaccard over all breakpoint partitions for the named groups.

    Only communities alive at the end of a resolution batch are candidates.
    A community needs to be scored for a group only when the batch joined
    parts of that group coming from different earlier communities; otherwise
    its score is below the score of the earlier community it grew from.
    Reported resolutions come from Dendrogram.batch_resolutions, so
    labels_at(result.t) rebuilds the partition the match was found in.
    """
    group_size = {name: len(gt.groups[name]) for name in names}
    community_groups: Dict[int, Dict[str, int]] = {}
    for name in names:
        for i in gt.groups[name]:
            community_groups[i] = {name: 1}
    size: Dict[int, int] = {}

    best: Dict[str, Tuple[float, int, Fraction]] = {
        name: (1 / group_size[name], gt.groups[name][0], d.singleton_resolution) for name in names
    }

    for t, (_, events) in zip(d.batch_resolutions(), d.batches()):
        mixed: Dict[int, Set[str]] = {}
        for event in events:
            size[event.result] = size.pop(event.a, 1) + size.pop(event.b, 1)
            groups_a = community_groups.pop(event.a, None)
            groups_b = community_groups.pop(event.b, None)
            flags = mixed.pop(event.a, set()) | mixed.pop(event.b, set())
            if groups_a is not None and groups_b is not None:
                if len(groups_a) < len(groups_b):
                    groups_a, groups_b = groups_b, groups_a
                for name, count in groups_b.items():
                    if name in groups_a:
                        flags.add(name)
                    groups_a[name] = groups_a.get(name, 0) + count
            merged = groups_a if groups_a is not None else groups_b
            if merged is not None:
                community_groups[event.result] = merged
            if flags:
                mixed[event.result] = flags

        for c in sorted(mixed):
            groups_c = community_groups[c]
            for name in sorted(mixed[c]):
                inter = groups_c[name]
                score = inter / (size[c] + group_size[name] - inter)
                if score > best[name][0]:
                    best[name] = (score, c, t)

    return {
        name: MatchResult(name, group_size[name], c, score, t, "r2")
        for name, (score, c, t) in best.items()
    }


@typechecked
def recall_r2(d: Dendrogram, gt: GroundTruth, threads: int = 1) -> MatchResults:
    if d.n != gt.n:
        raise DeltacomError(f"Dendrogram over {d.n} nodes, ground truth over {gt.n}")
    if len(d.events) == 0:
        raise DeltacomError("Empty dendrogram")
    names = sorted(gt.groups)
    step = max(threads, 1)
    chunks = [names[offset::step] for offset in range(step)]
    chunks = [chunk for chunk in chunks if chunk]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(lambda chunk: _r2_pass(d, gt, chunk), chunks))
    else:
        parts = [_r2_pass(d, gt, names)]
    by_name: Dict[str, MatchResult] = {}
    for part in parts:
        by_name.update(part)
    results = [by_name[name] for name in names]
    logger.info(f"R2 mean recall {mean_recall(results):.4f} over {len(results)} groups")
    return results


def _sample_size(fraction: float, size: int) -> int:
    return min(size, max(1, math.ceil(fraction * size)))


@typechecked
def recall_at_resolutions(
    d: Dendrogram,
    gt: GroundTruth,
    resolutions: Mapping[str, Resolution],
    sample_fraction: float = 1.0,
    seed: int = 0,
    method: str = "r3",
    threads: int = 1,
) -> MatchResults:
    """Match each group in the partition at its own resolution.

    The community is chosen with a uniform node sample of the group, whose
    overlaps are scaled up by the known group size, and then scored against
    the whole group. Samples hold ceil(fraction * size) nodes, at least one.
    """
    if not 0 < sample_fraction <= 1:
        raise DeltacomError(f"Sample fraction must be in (0, 1]: {sample_fraction}")
    if d.n != gt.n:
        raise DeltacomError(f"Dendrogram over {d.n} nodes, ground truth over {gt.n}")

    # partitions are built up front so workers only read shared state
    partitions: Dict[int, Tuple[List[int], Dict[int, int]]] = {}
    merges_of: Dict[str, int] = {}
    for name in gt.groups:
        if name not in resolutions:
            raise DeltacomError(f"No resolution for group {name}")
        count = d.merges_above(resolutions[name])
        if count not in partitions:
            labels = d.labels_at(resolutions[name])
            partitions[count] = (labels, dict(Counter(labels)))
        merges_of[name] = count

    def match(name: str) -> MatchResult:
        nodes = gt.groups[name]
        t = resolutions[name]
        labels, sizes = partitions[merges_of[name]]
        if sample_fraction < 1:
            rng = np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])
            sample = sorted(
                rng.choice(nodes, size=_sample_size(sample_fraction, len(nodes)), replace=False).tolist()
            )
        else:
            sample = nodes
        c, _ = _best_community(labels, sizes, sample, len(nodes))
        inter = sum(1 for i in nodes if labels[i] == c)
        score = inter / (sizes[c] + len(nodes) - inter)
        return MatchResult(name, len(nodes), c, score, Fraction(t), method)

    results = _parallel_map(match, sorted(gt.groups), threads)
    logger.info(
        f"{method.upper()} mean recall {mean_recall(results):.4f} over {len(results)} groups "
        f"(sample fraction {sample_fraction})"
    )
    return results


@typechecked
def predict_resolution(
    fit: RegressionFit, size: int, t_range: Optional[Tuple[Resolution, Resolution]] = None
) -> float:
    if size < 1:
        raise DeltacomError(f"Group size must be positive: {size}")
    t = 10 ** (fit.intercept + fit.slope * math.log10(size))
    if t_range is not None:
        t_min, t_max = float(t_range[0]), float(t_range[1])
        if t > t_max or t < t_min:
            logger.warning(
                f"Predicted resolution {t:.6g} for size {size} outside [{t_min:.6g}, {t_max:.6g}], clamped"
            )
            t = min(max(t, t_min), t_max)
    return t


@typechecked
def recall_r3(
    d: Dendrogram,
    gt: GroundTruth,
    sample_fraction: float,
    fit: RegressionFit,
    seed: int = 0,
    threads: int = 1,
) -> MatchResults:
    resolutions: Dict[str, Resolution] = {
        name: predict_resolution(fit, len(nodes), (d.t_min, d.t_max))
        for name, nodes in gt.groups.items()
    }
    return recall_at_resolutions(d, gt, resolutions, sample_fraction, seed, "r3", threads)


@typechecked
def size_resolution_regression(
    results: MatchResults, min_size: int = 1
) -> RegressionFit:
    """Least squares of log10(best t) on log10(group size)."""
    points = [
        (math.log10(r.size), math.log10(r.t))
        for r in results
        if r.t is not None and r.t > 0 and r.size >= min_size
    ]
    if len(points) < settings.MIN_REGRESSION_POINTS:
        raise RegressionError(
            f"Regression needs at least {settings.MIN_REGRESSION_POINTS} groups "
            f"of size >= {min_size}, got {len(points)}"
        )
    x = np.array([point[0] for point in points])
    y = np.array([point[1] for point in points])
    if np.ptp(x) == 0:
        raise RegressionError("All groups have the same size, regression undefined")

    slope, intercept = np.polyfit(x, y, 1)
    if np.ptp(y) == 0:
        correlation = 0.0
    else:
        correlation = float(np.corrcoef(x, y)[0, 1])
    fit = RegressionFit(
        slope=float(slope),
        intercept=float(intercept),
        r2=correlation**2,
        correlation=correlation,
        points=len(points),
    )
    logger.info(
        f"log10(t) = {fit.intercept:.4f} + {fit.slope:.4f} log10(size), "
        f"r2={fit.r2:.4f}, correlation={fit.correlation:.4f}, {fit.points} groups"
    )
    return fit


@typechecked
def mean_recall(results: MatchResults) -> float:
    """Mean score, equal to the area above the cumulative distribution curve."""
    if len(results) == 0:
        raise DeltacomError("Mean recall of no results")
    return float(np.mean([r.score for r in results]))


@typechecked
def cumulative_distribution(scores: Sequence[float]) -> List[Tuple[float, float]]:
    if len(scores) == 0:
        raise DeltacomError("Cumulative distribution of no scores")
    counts = Counter(scores)
    total = len(scores)
    points = []
    cumulative = 0
    for score in sorted(counts):
        cumulative += counts[score]
        points.append((score, cumulative / total))
    return points


@typechecked
@dataclass
class NodeDiagnostic:
    node: int
    group: str
    k: int
    k_in: int
    strong: bool
    hu: bool


@typechecked
@dataclass
class CommunityNotionReport:
    nodes: List[NodeDiagnostic]
    strong_fraction_by_group: Dict[str, float]
    hu_fraction_by_group: Dict[str, float]
    strong_fraction: float
    hu_fraction: float
    groups_with_hu_violation: float


@typechecked
def community_notion_diagnostics(
    g: Graph, groups: Sequence[Optional[str]]
) -> CommunityNotionReport:
    """Per-node check of the strong and relaxed community conditions.

    strong: more links inside the node's group than outside it.
    hu: more links inside than towards any single other group. Unaffiliated
    neighbors count towards k only; unaffiliated nodes are not flagged.
    """
    if len(groups) != g.n:
        raise DeltacomError(f"Group labels for {len(groups)} nodes, graph has {g.n}")
    diagnostics = []
    for i, neighbors in enumerate(g.adjacency):
        own = groups[i]
        if own is None:
            continue
        foreign: Dict[str, int] = {}
        k_in = 0
        for j in neighbors:
            other = groups[j]
            if other == own:
                k_in += 1
            elif other is not None:
                foreign[other] = foreign.get(other, 0) + 1
        k = len(neighbors)
        diagnostics.append(
            NodeDiagnostic(i, own, k, k_in, 2 * k_in > k, k_in > max(foreign.values(), default=0))
        )

    strong_by_group: Dict[str, List[bool]] = {}
    hu_by_group: Dict[str, List[bool]] = {}
    for node in diagnostics:
        strong_by_group.setdefault(node.group, []).append(node.strong)
        hu_by_group.setdefault(node.group, []).append(node.hu)

    def fraction(flags: List[bool]) -> float:
        return sum(flags) / len(flags) if flags else 0.0

    report = CommunityNotionReport(
        nodes=diagnostics,
        strong_fraction_by_group={name: fraction(f) for name, f in sorted(strong_by_group.items())},
        hu_fraction_by_group={name: fraction(f) for name, f in sorted(hu_by_group.items())},
        strong_fraction=fraction([node.strong for node in diagnostics]),
        hu_fraction=fraction([node.hu for node in diagnostics]),
        groups_with_hu_violation=fraction([not all(f) for f in hu_by_group.values()]),
    )
    logger.info(
        f"Strong condition holds for {report.strong_fraction:.4f} of nodes, "
        f"relaxed for {report.hu_fraction:.4f}; "
        f"{report.groups_with_hu_violation:.4f} of groups have a violating node"
    )
    return report


@typechecked
def jaccard_profile(d: Dendrogram, nodes: Sequence[int]) -> List[Tuple[Fraction, float]]:
    """Best Jaccard similarity of one group at every breakpoint partition."""
    if len(nodes) == 0:
        raise DeltacomError("Jaccard profile of an empty group")
    profile = []
    for t, labels in d.breakpoint_partitions():
        sizes = dict(Counter(labels))
        c, inter = _best_community(labels, sizes, nodes)
        profile.append((t, inter / (sizes[c] + len(nodes) - inter)))
    return profile


@typechecked
@dataclass
class GroupSizeSummary:
    groups: int
    small_groups: int
    single_node_groups: int
    nodes_covered: int
    largest: int


@typechecked
def group_size_summary(gt: GroundTruth) -> GroupSizeSummary:
    sizes = [len(nodes) for nodes in gt.groups.values()]
    return GroupSizeSummary(
        groups=len(sizes),
        small_groups=sum(1 for s in sizes if s < settings.SMALL_GROUP_SIZE),
        single_node_groups=sum(1 for s in sizes if s == 1),
        nodes_covered=sum(sizes),
        largest=max(sizes, default=0),
    )
