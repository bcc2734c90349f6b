"""Multiresolution modularity optimization.

Communities are agglomerated greedily while the resolution t decreases. At
every step the resolution is the largest ratio e(C,C')*2m / (k_C*k_C') over
connected community pairs, which is exactly the t at which joining that pair
leaves the generalized modularity Q_t unchanged. All pairs at that ratio are
joined before t is lowered again, so one run yields a nested family of
partitions, each weakly optimal on its resolution interval.

Resolutions live on the scale of that ratio. Joining two communities changes
generalized_modularity at resolution t by delta_q_t(p, a, b, 2t), so a join
at dendrogram resolution t is neutral for generalized_modularity at t/2, and
classical modularity is maximal on the partition at
settings.MODULARITY_PEAK_RESOLUTION.

Ratios are compared exactly with integer cross products; floating point is
only used for reported modularity values.
"""
import bisect
import heapq
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import groupby
from typing import (
    Callable,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)
from typeguard import typechecked
from deltacom import settings
from deltacom.errors import (
    DeltacomError,
    FrontierExhaustedError,
    UnknownCommunityError,
)
from deltacom.graph import Graph

logger = logging.getLogger(__name__)

Resolution = Union[Fraction, float, int]


@typechecked
class PartitionState:
    """Community aggregates of a partition of one graph.

    k[C] is the total degree of C, e_in[C] twice its internal edge count and
    cut[C][C'] twice the number of edges between C and C'.
    """

    def __init__(
        self,
        k: Dict[int, int],
        e_in: Dict[int, int],
        cut: Dict[int, Dict[int, int]],
        members: Dict[int, List[int]],
        m: int,
        n: int,
    ) -> None:
        self.k = k
        self.e_in = e_in
        self.cut = cut
        self.members = members
        self.m = m
        self.n = n

    @classmethod
    def singletons(cls, g: Graph) -> "PartitionState":
        return cls(
            k={i: len(neighbors) for i, neighbors in enumerate(g.adjacency)},
            e_in={i: 0 for i in range(g.n)},
            cut={i: {j: 2 for j in neighbors} for i, neighbors in enumerate(g.adjacency)},
            members={i: [i] for i in range(g.n)},
            m=g.m,
            n=g.n,
        )

    @classmethod
    def from_labels(cls, g: Graph, labels: Sequence[int]) -> "PartitionState":
        if len(labels) != g.n:
            raise DeltacomError(f"Labels for {len(labels)} nodes, graph has {g.n}")
        k: Dict[int, int] = {}
        e_in: Dict[int, int] = {}
        cut: Dict[int, Dict[int, int]] = {}
        members: Dict[int, List[int]] = {}
        for i, c in enumerate(labels):
            members.setdefault(c, []).append(i)
            k[c] = k.get(c, 0) + len(g.adjacency[i])
            e_in.setdefault(c, 0)
            cut.setdefault(c, {})
        for i, j in g.edges():
            ci, cj = labels[i], labels[j]
            if ci == cj:
                e_in[ci] += 2
            else:
                cut[ci][cj] = cut[ci].get(cj, 0) + 2
                cut[cj][ci] = cut[cj].get(ci, 0) + 2
        return cls(k, e_in, cut, members, g.m, g.n)

    @property
    def communities(self) -> List[int]:
        return sorted(self.k)

    def __len__(self) -> int:
        return len(self.k)

    def __contains__(self, c: int) -> bool:
        return c in self.k

    def neighbors(self, c: int) -> List[int]:
        self._ensure(c)
        return sorted(self.cut[c])

    def between(self, c1: int, c2: int) -> int:
        self._ensure(c1)
        self._ensure(c2)
        return self.cut[c1].get(c2, 0)

    def labels(self) -> List[int]:
        labels = [0] * self.n
        for c, nodes in self.members.items():
            for i in nodes:
                labels[i] = c
        return labels

    def connected_pairs(self) -> Iterator[Tuple[int, int]]:
        for c in sorted(self.cut):
            for d in sorted(self.cut[c]):
                if c < d:
                    yield (c, d)

    def merge(self, a: int, b: int, result: int) -> Dict[int, int]:
        cut = self.cut
        cut_a = cut.pop(a)
        cut_b = cut.pop(b)
        e_ab = cut_a.pop(b, 0)
        cut_b.pop(a, None)
        if len(cut_a) < len(cut_b):
            cut_a, cut_b = cut_b, cut_a
        for d, w in cut_b.items():
            cut_a[d] = cut_a.get(d, 0) + w
        for d, w in cut_a.items():
            neighbor_cut = cut[d]
            neighbor_cut.pop(a, None)
            neighbor_cut.pop(b, None)
            neighbor_cut[result] = w
        cut[result] = cut_a

        self.k[result] = self.k.pop(a) + self.k.pop(b)
        self.e_in[result] = self.e_in.pop(a) + self.e_in.pop(b) + e_ab

        members_a = self.members.pop(a)
        members_b = self.members.pop(b)
        if len(members_a) < len(members_b):
            members_a, members_b = members_b, members_a
        members_a.extend(members_b)
        self.members[result] = members_a
        return cut_a

    def _ensure(self, c: int) -> None:
        if c not in self.k:
            raise UnknownCommunityError(f"Unknown community: {c}")


class RatioKey:
    """Exact e/kk ratio ordered from largest to smallest."""

    __slots__ = ("e", "kk")

    def __init__(self, e: int, kk: int) -> None:
        self.e = e
        self.kk = kk

    def __eq__(self, other: object) -> bool:
        assert isinstance(other, RatioKey)
        return self.e * other.kk == other.e * self.kk

    def __lt__(self, other: "RatioKey") -> bool:
        return self.e * other.kk > other.e * self.kk


class MergeFrontier:
    """Connected community pairs ordered by ratio, highest first.

    Ties are broken by the smaller (min id, max id) pair. Removed pairs stay in
    the heap until they surface or the heap is compacted.
    """

    # not typechecked: called for every neighbor of every merge

    def __init__(self) -> None:
        self._heap: List[Tuple[float, RatioKey, int, int]] = []
        self._live: Dict[Tuple[int, int], RatioKey] = {}

    @classmethod
    def from_state(cls, state: PartitionState) -> "MergeFrontier":
        frontier = cls()
        k = state.k
        for a, b in state.connected_pairs():
            frontier._push_unordered(a, b, state.cut[a][b], k[a] * k[b])
        heapq.heapify(frontier._heap)
        return frontier

    def __len__(self) -> int:
        return len(self._live)

    def __contains__(self, pair: Tuple[int, int]) -> bool:
        return pair in self._live

    def _push_unordered(self, a: int, b: int, e: int, kk: int) -> None:
        key = RatioKey(e, kk)
        self._live[(a, b)] = key
        self._heap.append((-e / kk, key, a, b))

    def push(self, a: int, b: int, e: int, kk: int) -> None:
        assert a < b
        key = RatioKey(e, kk)
        self._live[(a, b)] = key
        heapq.heappush(self._heap, (-e / kk, key, a, b))

    def discard(self, a: int, b: int) -> None:
        pair = (a, b) if a < b else (b, a)
        self._live.pop(pair, None)

    def head(self) -> Optional[Tuple[int, int, RatioKey]]:
        heap = self._heap
        live = self._live
        while heap:
            _, key, a, b = heap[0]
            if (a, b) in live:
                return a, b, key
            heapq.heappop(heap)
        return None

    def compact(self) -> None:
        if len(self._heap) > settings.FRONTIER_COMPACTION_FACTOR * (len(self._live) + 1024):
            live = self._live
            self._heap = [entry for entry in self._heap if (entry[2], entry[3]) in live]
            heapq.heapify(self._heap)


@typechecked
@dataclass(frozen=True)
class MergeEvent:
    ordinal: int
    t: Fraction
    a: int
    b: int
    result: int


@typechecked
class Dendrogram:
    def __init__(
        self,
        n: int,
        m: int,
        events: List[MergeEvent],
        t_max: Fraction,
        t_min: Fraction,
        node_ids: List[str],
    ) -> None:
        assert len(node_ids) == n
        self.n = n
        self.m = m
        self.events = events
        self.t_max = t_max
        self.t_min = t_min
        self.node_ids = node_ids
        self._negated_breakpoints: List[Fraction] = []
        self._batch_ends: List[int] = []
        for t, batch in self.batches():
            self._negated_breakpoints.append(-t)
            self._batch_ends.append((self._batch_ends[-1] if self._batch_ends else 0) + len(batch))

    @property
    def breakpoints(self) -> List[Fraction]:
        return [-t for t in self._negated_breakpoints]

    def batches(self) -> Iterator[Tuple[Fraction, List[MergeEvent]]]:
        for t, events in groupby(self.events, key=lambda event: event.t):
            yield t, list(events)

    @property
    def singleton_resolution(self) -> Fraction:
        """A resolution whose partition is all singletons.

        labels_at(t_min) is the terminal partition, so when the whole run is a
        single batch the singletons are only reached above t_max.
        """
        if self.t_max > self.t_min:
            return self.t_max
        return self.t_max + 1

    def batch_resolutions(self) -> List[Fraction]:
        """One resolution per batch at which labels_at returns exactly that batch's partition.

        Every batch is addressed by its own breakpoint except the first: its
        breakpoint is t_max, which belongs to the singletons, so it gets the
        midpoint of its interval instead.
        """
        breakpoints = self.breakpoints
        if len(breakpoints) < 2:
            return breakpoints
        return [(breakpoints[0] + breakpoints[1]) / 2] + breakpoints[1:]

    def check_events(self) -> None:
        for previous, event in zip(self.events, self.events[1:]):
            if event.ordinal <= previous.ordinal:
                raise DeltacomError(f"Merge ordinals not increasing at {event}")
            if event.t > previous.t:
                raise DeltacomError(f"Resolution increases at {event}")

    def _require_events(self) -> None:
        if len(self.events) == 0:
            raise DeltacomError("Empty dendrogram")

    def merges_above(self, t: Resolution) -> int:
        """Number of leading merges that shape the partition at resolution t."""
        self._require_events()
        if t > self.t_max or t < self.t_min:
            logger.warning(
                f"Resolution {float(t)} outside [{float(self.t_min)}, {float(self.t_max)}], clamped"
            )
        if t <= self.t_min:
            return len(self.events)
        if t >= self.t_max:
            return 0
        batches = bisect.bisect_right(self._negated_breakpoints, -t)
        return self._batch_ends[batches - 1] if batches > 0 else 0

    def _replay(self, count: int) -> List[int]:
        members: Dict[int, List[int]] = {i: [i] for i in range(self.n)}
        for event in self.events[:count]:
            members_a = members.pop(event.a)
            members_b = members.pop(event.b)
            if len(members_a) < len(members_b):
                members_a, members_b = members_b, members_a
            members_a.extend(members_b)
            members[event.result] = members_a
        labels = [0] * self.n
        for c, nodes in members.items():
            for i in nodes:
                labels[i] = c
        return labels

    def labels_at(self, t: Resolution) -> List[int]:
        return self._replay(self.merges_above(t))

    def final_labels(self) -> List[int]:
        return self._replay(len(self.events))

    def partition_at(self, t: Resolution, g: Graph) -> PartitionState:
        if g.n != self.n or g.m != self.m:
            raise DeltacomError(f"Graph {g} does not match dendrogram (n={self.n}, m={self.m})")
        return PartitionState.from_labels(g, self.labels_at(t))

    def breakpoint_partitions(self) -> Iterator[Tuple[Fraction, List[int]]]:
        """Every distinct partition, labelled with a resolution that reproduces it.

        The singleton partition comes first; the last one is the terminal
        partition at t_min.
        """
        self._require_events()
        yield self.singleton_resolution, list(range(self.n))
        for t, count in zip(self.batch_resolutions(), self._batch_ends):
            yield t, self._replay(count)


OnMerge = Callable[[PartitionState, MergeEvent], None]


@typechecked
def _require_edges(p: PartitionState) -> None:
    if p.m == 0:
        raise DeltacomError("Modularity undefined for a graph without edges")


@typechecked
def modularity(p: PartitionState) -> float:
    return generalized_modularity(p, 1)


@typechecked
def generalized_modularity(p: PartitionState, t: Resolution) -> float:
    _require_edges(p)
    two_m = 2 * p.m
    e_sum = sum(p.e_in.values())
    k2_sum = sum(k * k for k in p.k.values())
    return float((e_sum * two_m - Fraction(t) * k2_sum) / (two_m * two_m))


@typechecked
def delta_q_t(p: PartitionState, c1: int, c2: int, t: Resolution) -> float:
    _require_edges(p)
    if c1 == c2:
        raise DeltacomError(f"Cannot join community {c1} with itself")
    e = p.between(c1, c2)
    two_m = 2 * p.m
    return float((e - Fraction(t) * p.k[c1] * p.k[c2] / two_m) / two_m)


@typechecked
def pair_resolution(p: PartitionState, c1: int, c2: int) -> Fraction:
    """Resolution at which joining c1 and c2 leaves Q_t unchanged."""
    return Fraction(p.between(c1, c2) * 2 * p.m, p.k[c1] * p.k[c2])


@typechecked
def next_resolution(p: PartitionState) -> Fraction:
    best: Optional[Fraction] = None
    for a, b in p.connected_pairs():
        t = pair_resolution(p, a, b)
        if best is None or t > best:
            best = t
    if best is None:
        raise FrontierExhaustedError("No connected community pairs left")
    return best


@typechecked
def run(g: Graph, on_merge: Optional[OnMerge] = None) -> Dendrogram:
    if g.n == 0 or g.m == 0:
        raise DeltacomError(f"Cannot run on a graph without edges: {g}")

    state = PartitionState.singletons(g)
    frontier = MergeFrontier.from_state(state)
    two_m = 2 * g.m
    k = state.k

    head = frontier.head()
    assert head is not None
    t_e, t_kk = head[2].e, head[2].kk
    t = Fraction(t_e * two_m, t_kk)
    t_max = t
    events: List[MergeEvent] = []
    next_id = g.n
    logger.debug(f"Initial resolution t_max={float(t_max)}")

    while True:
        head = frontier.head()
        if head is None:
            break
        a, b, key = head
        if key.e * t_kk != t_e * key.kk:
            # no pair at the current resolution is left, lower t
            assert key.e * t_kk < t_e * key.kk
            t_e, t_kk = key.e, key.kk
            t = Fraction(t_e * two_m, t_kk)
            logger.debug(f"Resolution lowered to t={float(t)}, {len(k)} communities")

        frontier.discard(a, b)
        merged = state.merge(a, b, next_id)
        k_result = k[next_id]
        for d, w in merged.items():
            frontier.discard(a, d)
            frontier.discard(b, d)
            frontier.push(d, next_id, w, k_result * k[d])
        frontier.compact()

        event = MergeEvent(len(events), t, a, b, next_id)
        events.append(event)
        if on_merge is not None:
            on_merge(state, event)
        next_id += 1

    dendrogram = Dendrogram(g.n, g.m, events, t_max, t, list(g.node_ids))
    logger.info(
        f"Deltacom finished: {len(events)} merges, {len(dendrogram.breakpoints)} resolutions, "
        f"t in [{float(t)}, {float(t_max)}], {len(k)} final communities"
    )
    return dendrogram


@typechecked
def partition_at(d: Dendrogram, t: Resolution, g: Graph) -> PartitionState:
    return d.partition_at(t, g)


@typechecked
def peak_modularity_partition(d: Dendrogram, g: Graph) -> PartitionState:
    """The dendrogram partition with the highest classical modularity."""
    return d.partition_at(settings.MODULARITY_PEAK_RESOLUTION, g)


@typechecked
@dataclass
class WeakOptimalityResult:
    passed: bool
    witness: Optional[Tuple[int, int]] = None
    witness_resolution: Optional[Fraction] = None


@typechecked
def weak_optimality_check(
    g: Graph, p: PartitionState, t_interval: Tuple[Resolution, Resolution]
) -> WeakOptimalityResult:
    """Check that no join of two connected communities helps anywhere on (t_lo, t_hi].

    The gain of a join decreases with t, so the binding point is the lower end:
    every pair must satisfy ratio <= t_lo. For the degenerate interval
    (t, t] of the terminal partition this is the plain check at t.
    """
    t_lo, t_hi = (Fraction(t_interval[0]), Fraction(t_interval[1]))
    if t_lo > t_hi:
        raise DeltacomError(f"Invalid resolution interval: ({float(t_lo)}, {float(t_hi)}]")
    if p.m != g.m or p.n != g.n:
        raise DeltacomError("Partition does not belong to graph")

    worst: Optional[Tuple[int, int]] = None
    worst_t: Optional[Fraction] = None
    for a, b in p.connected_pairs():
        t = pair_resolution(p, a, b)
        if t > t_lo and (worst_t is None or t > worst_t):
            worst, worst_t = (a, b), t
    if worst is not None:
        logger.debug(f"Weak optimality violated by {worst} up to t={float(worst_t)}")  # type: ignore[arg-type]
        return WeakOptimalityResult(False, worst, worst_t)
    return WeakOptimalityResult(True)


@typechecked
def check_bookkeeping(p: PartitionState, g: Graph) -> None:
    expected = PartitionState.from_labels(g, p.labels())
    if expected.k != p.k:
        raise DeltacomError("Community degrees differ from recount")
    if expected.e_in != p.e_in:
        raise DeltacomError("Internal edge counts differ from recount")
    if expected.cut != p.cut:
        raise DeltacomError("Inter-community edge counts differ from recount")
    two_m = 2 * g.m
    if sum(p.k.values()) != two_m:
        raise DeltacomError("Community degrees do not sum to 2m")
    cut_total = sum(sum(row.values()) for row in p.cut.values()) // 2
    if sum(p.e_in.values()) + cut_total != two_m:
        raise DeltacomError("Internal and cut edges do not sum to 2m")


@typechecked
@dataclass
class ProfileRow:
    t: Fraction
    communities: int
    modularity: float
    modularity_t: float


@typechecked
def modularity_profile(d: Dendrogram, g: Graph) -> List[ProfileRow]:
    """Q and Q_t of every breakpoint partition, labelled as in Dendrogram.breakpoint_partitions."""
    if g.m == 0:
        raise DeltacomError("Modularity undefined for a graph without edges")
    state = PartitionState.singletons(g)
    two_m = 2 * g.m
    denominator = two_m * two_m
    e_sum = 0
    k2_sum = sum(k * k for k in state.k.values())

    def row(t: Fraction) -> ProfileRow:
        q = (e_sum * two_m - k2_sum) / denominator
        q_t = float((e_sum * two_m - t * k2_sum) / denominator)
        return ProfileRow(t, len(state), q, q_t)

    rows = [row(d.singleton_resolution)]
    for t, (_, events) in zip(d.batch_resolutions(), d.batches()):
        for event in events:
            k_a, k_b = state.k[event.a], state.k[event.b]
            e_sum += state.cut[event.a].get(event.b, 0)
            k2_sum += 2 * k_a * k_b
            state.merge(event.a, event.b, event.result)
        rows.append(row(t))
    return rows
