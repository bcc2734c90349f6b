import gzip
from bisect import bisect_left
import logging
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import (
    Dict,
    IO,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
    cast,
)
import numpy as np
from typeguard import typechecked
from deltacom import settings
from deltacom.errors import DeltacomError, GraphParseError, UndefinedValueError

logger = logging.getLogger(__name__)

Source = Union[str, Path, IO[str]]


@typechecked
class Graph:
    """Simple undirected graph over dense indices 0..n-1.

    External node ids are kept in a side table in first-seen order. Adjacency
    lists are sorted and symmetric; there are no self-loops or parallel edges.
    """

    adjacency: List[List[int]]
    node_ids: List[str]

    def __init__(self, adjacency: List[List[int]], node_ids: List[str]) -> None:
        assert len(adjacency) == len(node_ids)
        self.adjacency = adjacency
        self.node_ids = node_ids
        self.index_of: Dict[str, int] = {
            node_id: index for index, node_id in enumerate(node_ids)
        }
        if len(self.index_of) != len(node_ids):
            raise DeltacomError("Duplicated node ids in graph")
        self.m = sum(len(neighbors) for neighbors in adjacency) // 2

    @classmethod
    def from_edges(
        cls, node_ids: Sequence[str], edges: Iterable[Tuple[int, int]]
    ) -> "Graph":
        neighbor_sets: List[set] = [set() for _ in node_ids]
        for i, j in edges:
            if i == j:
                continue
            neighbor_sets[i].add(j)
            neighbor_sets[j].add(i)
        return cls([sorted(s) for s in neighbor_sets], list(node_ids))

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def degrees(self) -> List[int]:
        return [len(neighbors) for neighbors in self.adjacency]

    def neighbors(self, i: int) -> List[int]:
        return self.adjacency[i]

    def has_edge(self, i: int, j: int) -> bool:
        neighbors = self.adjacency[i]
        pos = bisect_left(neighbors, j)
        return pos < len(neighbors) and neighbors[pos] == j

    def edges(self) -> Iterator[Tuple[int, int]]:
        for i, neighbors in enumerate(self.adjacency):
            for j in neighbors:
                if i < j:
                    yield (i, j)

    def edge_id_set(self) -> set:
        ids = self.node_ids
        return {frozenset((ids[i], ids[j])) for i, j in self.edges()}

    def subgraph(self, nodes: Iterable[int]) -> "Graph":
        kept = sorted(set(nodes))
        new_index = {old: new for new, old in enumerate(kept)}
        adjacency = [
            [new_index[j] for j in self.adjacency[i] if j in new_index] for i in kept
        ]
        return Graph(adjacency, [self.node_ids[i] for i in kept])

    def check_invariants(self) -> None:
        degree_sum = 0
        for i, neighbors in enumerate(self.adjacency):
            degree_sum += len(neighbors)
            if neighbors != sorted(set(neighbors)):
                raise DeltacomError(f"Unsorted or repeated neighbors at node {i}")
            for j in neighbors:
                if j == i:
                    raise DeltacomError(f"Self-loop at node {i}")
                if not self.has_edge(j, i):
                    raise DeltacomError(f"Asymmetric edge {i} -> {j}")
        if degree_sum != 2 * self.m:
            raise DeltacomError(f"Degree sum {degree_sum} != 2m = {2 * self.m}")

    def __repr__(self) -> str:
        return f"<Graph n={self.n} m={self.m}>"


@typechecked
class AffiliationMap:
    """Optional group (AS) per node, aligned to one graph's indices."""

    def __init__(self, node_ids: Sequence[str], group_by_id: Dict[str, str]) -> None:
        self.group_by_id = dict(group_by_id)
        self._groups: List[Optional[str]] = [
            self.group_by_id.get(node_id) for node_id in node_ids
        ]

    @classmethod
    def empty(cls, g: Graph) -> "AffiliationMap":
        return cls(g.node_ids, {})

    def group_of(self, i: int) -> Optional[str]:
        return self._groups[i]

    def has_group(self, i: int) -> bool:
        return self._groups[i] is not None

    @property
    def coverage(self) -> float:
        if len(self._groups) == 0:
            return 0.0
        affiliated = sum(1 for group in self._groups if group is not None)
        return affiliated / len(self._groups)

    def for_graph(self, g: Graph) -> "AffiliationMap":
        return AffiliationMap(
            g.node_ids,
            {i: self.group_by_id[i] for i in g.node_ids if i in self.group_by_id},
        )

    def groups(self) -> Dict[str, List[int]]:
        result: Dict[str, List[int]] = {}
        for i, group in enumerate(self._groups):
            if group is not None:
                result.setdefault(group, []).append(i)
        return result

    def labels(self) -> List[Optional[str]]:
        return list(self._groups)


@typechecked
@dataclass
class LoadResult:
    graph: Graph
    affiliations: AffiliationMap
    duplicates_dropped: int = 0
    self_loops_dropped: int = 0
    unknown_affiliations: int = 0


@typechecked
def open_text(source: Source, mode: str = "r") -> IO[str]:
    """Open a path as UTF-8 text, gzip-compressed or not; streams pass through.

    Undecodable bytes are kept as surrogates on read so that numbered_lines
    can report the line they are on.
    """
    if not isinstance(source, (str, Path)):
        return source
    path = Path(source)
    errors = "strict"
    if "r" in mode:
        errors = "surrogateescape"
        with open(path, "rb") as f:
            is_gzip = f.read(2) == b"\x1f\x8b"
    else:
        is_gzip = path.suffix == ".gz"
    if is_gzip:
        return cast(IO[str], gzip.open(path, mode + "t", encoding="utf-8", errors=errors))
    return open(path, mode, encoding="utf-8", errors=errors)


def numbered_lines(stream: IO[str]) -> Iterator[Tuple[int, str]]:
    for line_number, line in enumerate(stream, start=1):
        if not line.isascii():
            try:
                line.encode("utf-8")
            except UnicodeEncodeError as err:
                raise GraphParseError("invalid UTF-8 text", line_number) from err
        yield line_number, line


def _data_lines(stream: IO[str]) -> Iterator[Tuple[int, List[str]]]:
    for line_number, line in numbered_lines(stream):
        content = line.split("#", 1)[0].strip()
        if content:
            yield line_number, content.split()


@typechecked
def load_edge_list(
    source: Source, affiliations: Optional[Source] = None
) -> LoadResult:
    index_of: Dict[str, int] = {}
    node_ids: List[str] = []
    edges: set = set()
    duplicates = 0
    self_loops = 0

    def intern(token: str) -> int:
        index = index_of.get(token)
        if index is None:
            index = len(node_ids)
            index_of[token] = index
            node_ids.append(token)
        return index

    stream = open_text(source)
    try:
        for line_number, tokens in _data_lines(stream):
            if len(tokens) != 2:
                raise GraphParseError(
                    f"expected two node tokens, got {len(tokens)}", line_number
                )
            i, j = intern(tokens[0]), intern(tokens[1])
            if i == j:
                self_loops += 1
                continue
            key = (i, j) if i < j else (j, i)
            if key in edges:
                duplicates += 1
                continue
            edges.add(key)
    finally:
        if stream is not source:
            stream.close()

    g = Graph.from_edges(node_ids, edges)
    logger.info(
        f"Loaded graph: n={g.n} m={g.m} "
        f"(duplicates dropped: {duplicates}, self-loops dropped: {self_loops})"
    )

    unknown = 0
    group_by_id: Dict[str, str] = {}
    if affiliations is not None:
        stream = open_text(affiliations)
        try:
            for line_number, tokens in _data_lines(stream):
                if len(tokens) != 2:
                    raise GraphParseError(
                        f"expected node and group tokens, got {len(tokens)}",
                        line_number,
                    )
                node_token, group_token = tokens
                if node_token not in g.index_of:
                    unknown += 1
                    logger.warning(
                        f"Affiliation for unknown node skipped at line {line_number}: {node_token}"
                    )
                    continue
                known = group_by_id.setdefault(node_token, group_token)
                if known != group_token:
                    logger.warning(
                        f"Conflicting affiliation for {node_token} skipped at line {line_number}: "
                        f"{group_token}, keeping {known}"
                    )
        finally:
            if stream is not affiliations:
                stream.close()

    aff = AffiliationMap(g.node_ids, group_by_id)
    if affiliations is not None:
        logger.info(f"Affiliation coverage: {aff.coverage:.4f}")
    return LoadResult(g, aff, duplicates, self_loops, unknown)


@typechecked
def write_edge_list(g: Graph, target: Source) -> None:
    stream = open_text(target, "w")
    try:
        ids = g.node_ids
        for i, j in g.edges():
            stream.write(f"{ids[i]} {ids[j]}\n")
    finally:
        if stream is not target:
            stream.close()


@typechecked
def write_affiliations(g: Graph, aff: AffiliationMap, target: Source) -> None:
    stream = open_text(target, "w")
    try:
        for i, node_id in enumerate(g.node_ids):
            group = aff.group_of(i)
            if group is not None:
                stream.write(f"{node_id} {group}\n")
    finally:
        if stream is not target:
            stream.close()


@typechecked
def triangles(g: Graph, i: int) -> int:
    neighbors = g.adjacency[i]
    neighbor_set = set(neighbors)
    count = 0
    for j in neighbors:
        count += sum(1 for k in g.adjacency[j] if k in neighbor_set)
    return count // 2


@typechecked
def clustering_coefficient(g: Graph, i: int) -> float:
    k = g.degree(i)
    if k < 2:
        raise UndefinedValueError(f"Clustering undefined for node of degree {k}: {i}")
    return triangles(g, i) / (k * (k - 1) / 2)


@typechecked
def avg_neighbor_degree(g: Graph, i: int) -> float:
    k = g.degree(i)
    if k == 0:
        raise UndefinedValueError(f"Average neighbor degree undefined for isolated node: {i}")
    return sum(g.degree(j) for j in g.adjacency[i]) / k


@typechecked
def fit_power_law(degrees: Iterable[int], k_min: int = 1) -> float:
    """Maximum-likelihood exponent of the degree tail k >= k_min.

    Uses the continuous estimator with the usual half-unit offset for integer
    data: alpha = 1 + N / sum(ln(k / (k_min - 1/2))).
    """
    if k_min < 1:
        raise DeltacomError(f"k_min must be positive: {k_min}")
    tail = np.array([k for k in degrees if k >= k_min], dtype=float)
    if len(tail) == 0:
        raise DeltacomError("Empty degree sample for power-law fit")
    if len(tail) < settings.MIN_POWER_LAW_SAMPLES:
        raise DeltacomError(
            f"Too few degrees for power-law fit: {len(tail)} < {settings.MIN_POWER_LAW_SAMPLES}"
        )
    if np.all(tail == tail[0]):
        raise DeltacomError(
            f"Degenerate degree sample (all equal to {int(tail[0])}), exponent unbounded"
        )
    log_sum = float(np.sum(np.log(tail / (k_min - 0.5))))
    if log_sum <= 0:
        raise DeltacomError("Non-positive log-sum in power-law fit")
    return 1.0 + len(tail) / log_sum


@typechecked
@dataclass
class DegreeStats:
    degree_histogram: Dict[int, int]
    clustering_histogram: List[Tuple[float, float, int]]
    clustering_by_degree: Dict[int, float]
    neighbor_degree_by_degree: Dict[int, float]
    alpha: Optional[float]
    k_min: int = 1
    nodes_considered: int = 0


@typechecked
def degree_stats(
    g: Graph,
    k_min: int = settings.DEFAULT_POWER_LAW_K_MIN,
    bins: int = settings.CLUSTERING_HISTOGRAM_BINS,
) -> DegreeStats:
    degrees = g.degrees()
    degree_histogram = dict(sorted(Counter(degrees).items()))

    clustering: Dict[int, List[float]] = {}
    knn: Dict[int, List[float]] = {}
    coefficients: List[float] = []
    for i, k in enumerate(degrees):
        if k >= 2:
            c = clustering_coefficient(g, i)
            coefficients.append(c)
            clustering.setdefault(k, []).append(c)
        if k >= 1:
            knn.setdefault(k, []).append(avg_neighbor_degree(g, i))

    counts, edges = np.histogram(np.array(coefficients), bins=bins, range=(0.0, 1.0))
    clustering_histogram = [
        (float(edges[b]), float(edges[b + 1]), int(counts[b])) for b in range(bins)
    ]

    try:
        alpha: Optional[float] = fit_power_law(degrees, k_min)
    except DeltacomError as err:
        logger.warning(f"Power-law fit skipped: {err}")
        alpha = None
    else:
        logger.info(f"Power-law exponent alpha={alpha:.4f} (k_min={k_min})")

    return DegreeStats(
        degree_histogram=degree_histogram,
        clustering_histogram=clustering_histogram,
        clustering_by_degree={k: float(np.mean(v)) for k, v in sorted(clustering.items())},
        neighbor_degree_by_degree={k: float(np.mean(v)) for k, v in sorted(knn.items())},
        alpha=alpha,
        k_min=k_min,
        nodes_considered=len(coefficients),
    )


@typechecked
def connected_components(g: Graph) -> List[List[int]]:
    seen = [False] * g.n
    components: List[List[int]] = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        component = [start]
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in g.adjacency[i]:
                if not seen[j]:
                    seen[j] = True
                    component.append(j)
                    queue.append(j)
        components.append(sorted(component))
    return components
