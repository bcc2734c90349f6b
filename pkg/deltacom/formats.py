"""Text file formats read and written by the pipeline stages.

Dendrogram file::

    dendrogram <n> <m> <t_max> <t_min>
    node <index> <id>                      (n lines, index order)
    merge <ordinal> <t> <t_decimal> <a> <b> <result>

Resolutions are exact rationals written as p/q. Partition files hold one
``<node id> <community>`` pair per line. Key-value files hold one
``key = value`` pair per line. ``#`` starts a comment everywhere.
"""
import csv
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, IO, Iterable, Iterator, List, Sequence, Tuple
from typeguard import typechecked
from deltacom import settings
from deltacom.engine import Dendrogram, MergeEvent, ProfileRow
from deltacom.errors import FormatError, GraphParseError
from deltacom.evaluation import MatchResult, MatchResults, RegressionFit
from deltacom.graph import DegreeStats, Source, numbered_lines, open_text
from deltacom.preprocess import Chain

logger = logging.getLogger(__name__)


@typechecked
def format_fraction(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


@typechecked
def parse_fraction(token: str, line_number: int = 0) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as err:
        raise FormatError(f"line {line_number}: invalid rational: {token}") from err


def _parse_int(token: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError as err:
        raise FormatError(f"line {line_number}: invalid integer: {token}") from err


def _lines(stream: IO[str]) -> Iterator[Tuple[int, str]]:
    try:
        yield from numbered_lines(stream)
    except GraphParseError as err:
        raise FormatError(str(err)) from err


def _records(stream: IO[str]) -> Iterable[Tuple[int, List[str]]]:
    for line_number, line in _lines(stream):
        content = line.split("#", 1)[0].strip()
        if content:
            yield line_number, content.split()


@typechecked
def write_dendrogram(d: Dendrogram, target: Source) -> None:
    stream = open_text(target, "w")
    try:
        stream.write(
            f"dendrogram {d.n} {d.m} {format_fraction(d.t_max)} {format_fraction(d.t_min)}\n"
        )
        for index, node_id in enumerate(d.node_ids):
            stream.write(f"node {index} {node_id}\n")
        for event in d.events:
            stream.write(
                f"merge {event.ordinal} {format_fraction(event.t)} {float(event.t):.12g} "
                f"{event.a} {event.b} {event.result}\n"
            )
    finally:
        if stream is not target:
            stream.close()


@typechecked
def read_dendrogram(source: Source) -> Dendrogram:
    stream = open_text(source)
    try:
        records = iter(_records(stream))
        first = next(records, None)
        if first is None or first[1][0] != "dendrogram" or len(first[1]) != 5:
            raise FormatError("Dendrogram file must start with 'dendrogram n m t_max t_min'")
        line_number, tokens = first
        n = _parse_int(tokens[1], line_number)
        m = _parse_int(tokens[2], line_number)
        t_max = parse_fraction(tokens[3], line_number)
        t_min = parse_fraction(tokens[4], line_number)

        node_ids: List[str] = []
        events: List[MergeEvent] = []
        for line_number, tokens in records:
            if tokens[0] == "node" and len(tokens) == 3:
                if events or _parse_int(tokens[1], line_number) != len(node_ids):
                    raise FormatError(f"line {line_number}: node records out of order")
                node_ids.append(tokens[2])
            elif tokens[0] == "merge" and len(tokens) == 7:
                ordinal = _parse_int(tokens[1], line_number)
                if ordinal != len(events):
                    raise FormatError(f"line {line_number}: expected merge {len(events)}")
                a, b, result = (_parse_int(token, line_number) for token in tokens[4:7])
                if result != n + ordinal:
                    raise FormatError(f"line {line_number}: merge result must be {n + ordinal}")
                events.append(
                    MergeEvent(ordinal, parse_fraction(tokens[2], line_number), a, b, result)
                )
            else:
                raise FormatError(f"line {line_number}: unknown record: {' '.join(tokens)}")
    finally:
        if stream is not source:
            stream.close()

    if len(node_ids) != n:
        raise FormatError(f"Dendrogram declares {n} nodes, lists {len(node_ids)}")
    d = Dendrogram(n, m, events, t_max, t_min, node_ids)
    d.check_events()
    logger.debug(f"Read dendrogram: n={n} m={m}, {len(events)} merges")
    return d


@typechecked
def write_partition(node_ids: Sequence[str], labels: Sequence[int], target: Source) -> None:
    stream = open_text(target, "w")
    try:
        for node_id, label in zip(node_ids, labels):
            stream.write(f"{node_id} {label}\n")
    finally:
        if stream is not target:
            stream.close()


@typechecked
def read_partition(source: Source) -> Tuple[List[str], List[int]]:
    node_ids: List[str] = []
    labels: List[int] = []
    seen = set()
    stream = open_text(source)
    try:
        for line_number, tokens in _records(stream):
            if len(tokens) != 2:
                raise FormatError(f"line {line_number}: expected node and community")
            if tokens[0] in seen:
                raise FormatError(f"line {line_number}: node listed twice: {tokens[0]}")
            seen.add(tokens[0])
            node_ids.append(tokens[0])
            labels.append(_parse_int(tokens[1], line_number))
    finally:
        if stream is not source:
            stream.close()
    return node_ids, labels


@typechecked
def read_affiliation_pairs(source: Source) -> Dict[str, str]:
    group_by_id: Dict[str, str] = {}
    stream = open_text(source)
    try:
        for line_number, tokens in _records(stream):
            if len(tokens) != 2:
                raise FormatError(f"line {line_number}: expected node and group")
            known = group_by_id.setdefault(tokens[0], tokens[1])
            if known != tokens[1]:
                logger.warning(
                    f"Conflicting affiliation for {tokens[0]} skipped at line {line_number}: "
                    f"{tokens[1]}, keeping {known}"
                )
    finally:
        if stream is not source:
            stream.close()
    return group_by_id


@typechecked
def write_key_values(pairs: Iterable[Tuple[str, Any]], target: Source) -> None:
    stream = open_text(target, "w")
    try:
        for key, value in pairs:
            stream.write(f"{key} = {value}\n")
    finally:
        if stream is not target:
            stream.close()


@typechecked
def read_key_values(source: Source) -> Dict[str, str]:
    values: Dict[str, str] = {}
    stream = open_text(source)
    try:
        for line_number, line in _lines(stream):
            content = line.split("#", 1)[0].strip()
            if not content:
                continue
            key, separator, value = content.partition("=")
            if not separator or not key.strip():
                raise FormatError(f"line {line_number}: expected 'key = value': {content}")
            key = key.strip()
            if key in values:
                raise FormatError(f"line {line_number}: duplicated key: {key}")
            values[key] = value.strip()
    finally:
        if stream is not source:
            stream.close()
    return values


@typechecked
def write_rows(target: Path, header: List[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(target, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


@typechecked
def read_rows(source: Path, header: List[str]) -> List[Dict[str, str]]:
    with open(source, newline="", encoding="utf-8") as f:
        try:
            reader = csv.DictReader(f)
            if reader.fieldnames != header:
                raise FormatError(f"{source}: expected header {','.join(header)}")
            return list(reader)
        except UnicodeDecodeError as err:
            raise FormatError(f"{source}: invalid UTF-8 text") from err


@typechecked
def write_match_results(results: MatchResults, target: Path) -> None:
    write_rows(
        target,
        settings.MATCH_RESULTS_HEADER,
        (
            [
                r.group,
                r.size,
                r.community,
                f"{r.score:.12g}",
                "" if r.t is None else format_fraction(r.t),
                r.method,
                int(r.small),
            ]
            for r in results
        ),
    )


@typechecked
def read_match_results(source: Path) -> MatchResults:
    results = []
    for line_number, row in enumerate(read_rows(source, settings.MATCH_RESULTS_HEADER), start=2):
        try:
            results.append(
                MatchResult(
                    group=row["group"],
                    size=int(row["size"]),
                    community=int(row["community"]),
                    score=float(row["score"]),
                    t=parse_fraction(row["t"], line_number) if row["t"] else None,
                    method=row["method"],
                )
            )
        except ValueError as err:
            raise FormatError(f"{source} line {line_number}: {err}") from err
    return results


@typechecked
def write_cdf(points: List[Tuple[float, float]], target: Path) -> None:
    write_rows(
        target,
        settings.CDF_HEADER,
        ([f"{score:.12g}", f"{fraction:.12g}"] for score, fraction in points),
    )


@typechecked
def write_regression_fit(fit: RegressionFit, target: Source) -> None:
    write_key_values(
        [
            ("slope", repr(fit.slope)),
            ("intercept", repr(fit.intercept)),
            ("r2", repr(fit.r2)),
            ("correlation", repr(fit.correlation)),
            ("points", fit.points),
        ],
        target,
    )


@typechecked
def read_regression_fit(source: Source) -> RegressionFit:
    values = read_key_values(source)
    try:
        return RegressionFit(
            slope=float(values["slope"]),
            intercept=float(values["intercept"]),
            r2=float(values["r2"]),
            correlation=float(values["correlation"]),
            points=int(values["points"]),
        )
    except (KeyError, ValueError) as err:
        raise FormatError(f"Invalid regression fit file: {err}") from err


@typechecked
def write_degree_stats(stats: DegreeStats, paths: List[Path]) -> None:
    """Degree histogram, clustering histogram, clustering by degree and knn by degree."""
    if len(paths) != 4:
        raise FormatError(f"Degree statistics need 4 output paths, got {len(paths)}")
    write_rows(paths[0], settings.DEGREE_HISTOGRAM_HEADER, stats.degree_histogram.items())
    write_rows(
        paths[1],
        settings.CLUSTERING_HISTOGRAM_HEADER,
        ([f"{low:.6g}", f"{high:.6g}", count] for low, high, count in stats.clustering_histogram),
    )
    write_rows(
        paths[2],
        settings.CLUSTERING_BY_DEGREE_HEADER,
        ([k, f"{c:.12g}"] for k, c in stats.clustering_by_degree.items()),
    )
    write_rows(
        paths[3],
        settings.KNN_BY_DEGREE_HEADER,
        ([k, f"{knn:.12g}"] for k, knn in stats.neighbor_degree_by_degree.items()),
    )


@typechecked
def write_profile(rows: List[ProfileRow], target: Path) -> None:
    write_rows(
        target,
        settings.PROFILE_HEADER,
        (
            [
                format_fraction(row.t),
                f"{float(row.t):.12g}",
                row.communities,
                f"{row.modularity:.12g}",
                f"{row.modularity_t:.12g}",
            ]
            for row in rows
        ),
    )


@typechecked
def write_ground_truth(ground_truth: Dict[str, List[str]], target: Source) -> None:
    stream = open_text(target, "w")
    try:
        for group, node_ids in ground_truth.items():
            stream.write(f"{group} {' '.join(node_ids)}\n")
    finally:
        if stream is not target:
            stream.close()


@typechecked
def write_decorations(
    node_ids: Sequence[str], chains: List[Chain], tendrils: List[List[int]], target: Source
) -> None:
    stream = open_text(target, "w")
    try:
        for chain in chains:
            kind = "unclassified" if chain.taxonomy is None else chain.taxonomy.value
            interior = " ".join(node_ids[i] for i in chain.interior)
            stream.write(
                f"chain {kind} {node_ids[chain.endpoint_a]} {node_ids[chain.endpoint_b]} {interior}\n"
            )
        for tendril in tendrils:
            stream.write(f"tendril {' '.join(node_ids[i] for i in tendril)}\n")
    finally:
        if stream is not target:
            stream.close()
