import logging
import os
import time
from pathlib import Path
from types import TracebackType
from typing import Any, List, Optional, Type
from typeguard import typechecked
from deltacom import settings
from deltacom.baselines import DetectorConfig, detect
from deltacom.conf import RunManifest, load_synth_spec
from deltacom.engine import modularity, modularity_profile, run
from deltacom.errors import DeltacomError, InvalidUsageError
from deltacom.evaluation import (
    GroundTruth,
    MatchResults,
    community_notion_diagnostics,
    cumulative_distribution,
    group_size_summary,
    mean_recall,
    recall_labels,
    recall_r2,
    recall_r3,
    size_resolution_regression,
)
from deltacom.formats import (
    read_affiliation_pairs,
    read_dendrogram,
    read_match_results,
    read_partition,
    read_regression_fit,
    write_cdf,
    write_decorations,
    write_degree_stats,
    write_dendrogram,
    write_ground_truth,
    write_key_values,
    write_match_results,
    write_partition,
    write_profile,
    write_regression_fit,
    write_rows,
)
from deltacom.graph import (
    AffiliationMap,
    connected_components,
    degree_stats,
    load_edge_list,
    numbered_lines,
    open_text,
    write_affiliations,
    write_edge_list,
)
from deltacom.preprocess import clean_graph
from deltacom.synth import generate

logger = logging.getLogger(__name__)


@typechecked
class OutputSession:
    """Files written by one stage.

    On success a run manifest is saved next to them; if the stage raises,
    every file it registered is removed again.
    """

    def __init__(self, output_dir: Path, subcommand: str, seed: int) -> None:
        self.output_dir = output_dir
        self.manifest = RunManifest(subcommand=subcommand, seed=seed)
        self.paths: List[Path] = []
        self._started = 0.0

    def __enter__(self) -> "OutputSession":
        os.makedirs(self.output_dir, exist_ok=True)
        self._started = time.monotonic()
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc: Optional[BaseException],
        traceback: Optional[TracebackType],
    ) -> None:
        if exc_type is None:
            self.manifest.duration_seconds = time.monotonic() - self._started
            manifest_path = self.output_dir / f"{self.manifest.subcommand}.manifest"
            self.manifest.save(manifest_path)
            logger.info(f"Wrote {len(self.paths)} outputs, manifest {manifest_path}")
            return
        for path in self.paths:
            if path.exists():
                path.unlink()
                logger.debug(f"Removed partial output: {path}")

    def path(self, name: str) -> Path:
        path = self.output_dir / name
        self.paths.append(path)
        self.manifest.outputs.append(str(path))
        return path

    def input(self, name: str, path: Optional[Path]) -> None:
        if path is not None:
            self.manifest.inputs[name] = str(path)

    def parameters(self, **parameters: Any) -> None:
        self.manifest.parameters.update(parameters)


@typechecked
def run_stats(
    session: OutputSession,
    graph_path: Path,
    affiliations_path: Optional[Path],
    k_min: int = settings.DEFAULT_POWER_LAW_K_MIN,
) -> None:
    session.input("graph", graph_path)
    session.input("affiliations", affiliations_path)
    session.parameters(k_min=k_min)
    loaded = load_edge_list(graph_path, affiliations_path)
    g = loaded.graph

    stats = degree_stats(g, k_min)
    write_degree_stats(
        stats,
        [
            session.path("stats.degree_histogram.csv"),
            session.path("stats.clustering_histogram.csv"),
            session.path("stats.clustering_by_degree.csv"),
            session.path("stats.knn_by_degree.csv"),
        ],
    )

    report: List[Any] = [
        ("nodes", g.n),
        ("edges", g.m),
        ("components", len(connected_components(g))),
        ("duplicates_dropped", loaded.duplicates_dropped),
        ("self_loops_dropped", loaded.self_loops_dropped),
        ("alpha", "undefined" if stats.alpha is None else f"{stats.alpha:.6f}"),
        ("k_min", stats.k_min),
    ]
    if affiliations_path is not None:
        aff = loaded.affiliations
        summary = group_size_summary(GroundTruth.from_affiliations(aff, g.n))
        diagnostics = community_notion_diagnostics(g, aff.labels())
        write_rows(
            session.path("stats.diagnostics.csv"),
            settings.DIAGNOSTICS_HEADER,
            (
                [g.node_ids[d.node], d.group, d.k, d.k_in, int(d.strong), int(d.hu)]
                for d in diagnostics.nodes
            ),
        )
        report.extend(
            [
                ("affiliation_coverage", f"{aff.coverage:.6f}"),
                ("groups", summary.groups),
                ("small_groups", summary.small_groups),
                ("single_node_groups", summary.single_node_groups),
                ("strong_fraction", f"{diagnostics.strong_fraction:.6f}"),
                ("hu_fraction", f"{diagnostics.hu_fraction:.6f}"),
                ("groups_with_hu_violation", f"{diagnostics.groups_with_hu_violation:.6f}"),
            ]
        )
    write_key_values(report, session.path("stats.report"))


@typechecked
def run_preprocess(
    session: OutputSession,
    graph_path: Path,
    affiliations_path: Optional[Path],
    k: int = settings.DEFAULT_CORE_K,
    iterate: bool = True,
) -> None:
    session.input("graph", graph_path)
    session.input("affiliations", affiliations_path)
    session.parameters(k=k, iterate=iterate)
    loaded = load_edge_list(graph_path, affiliations_path)

    cleaned = clean_graph(loaded.graph, loaded.affiliations, k, iterate)
    write_edge_list(cleaned.graph, session.path("cleaned.edges"))
    if affiliations_path is not None:
        write_affiliations(cleaned.graph, cleaned.affiliations, session.path("cleaned.affiliations"))
    write_key_values(cleaned.report.as_pairs(), session.path("preprocess.report"))
    write_rows(
        session.path("preprocess.taxonomy.csv"),
        settings.TAXONOMY_HEADER,
        sorted(cleaned.report.chains_by_taxonomy.items()),
    )


@typechecked
def run_detect(
    session: OutputSession,
    graph_path: Path,
    method: str,
    seed: int,
    resolution: float = 1.0,
    max_sweeps: int = settings.DEFAULT_MAX_SWEEPS,
) -> None:
    session.input("graph", graph_path)
    session.parameters(method=method, resolution=resolution)
    g = load_edge_list(graph_path).graph

    if method == "deltacom":
        d = run(g)
        write_dendrogram(d, session.path("deltacom.dendrogram"))
        p = d.partition_at(resolution, g)
        write_partition(g.node_ids, p.labels(), session.path("deltacom.partition"))
        write_profile(modularity_profile(d, g), session.path("deltacom.profile.csv"))
        report: List[Any] = [
            ("t_max", f"{float(d.t_max):.12g}"),
            ("t_min", f"{float(d.t_min):.12g}"),
            ("merges", len(d.events)),
            ("resolutions", len(d.breakpoints)),
        ]
    else:
        session.parameters(max_sweeps=max_sweeps)
        p = detect(g, DetectorConfig(method=method, seed=seed, max_sweeps=max_sweeps))
        write_partition(g.node_ids, p.labels(), session.path(f"{method}.partition"))
        report = []

    report.extend(
        [
            ("communities", len(p)),
            ("modularity", f"{modularity(p):.12g}" if g.m > 0 else "undefined"),
        ]
    )
    write_key_values(report, session.path(f"{method}.report"))


@typechecked
def _is_dendrogram(path: Path) -> bool:
    with open_text(path) as stream:
        for _, line in numbered_lines(stream):
            content = line.split("#", 1)[0].strip()
            if content:
                return content.split()[0] == "dendrogram"
    return False


@typechecked
def _ground_truth(node_ids: List[str], affiliations_path: Path, min_size: int) -> GroundTruth:
    pairs = read_affiliation_pairs(affiliations_path)
    known = set(node_ids)
    unknown = [node_id for node_id in pairs if node_id not in known]
    if unknown:
        logger.warning(f"{len(unknown)} affiliated nodes are not in the partition, skipped")
    aff = AffiliationMap(node_ids, {k: v for k, v in pairs.items() if k in known})
    gt = GroundTruth.from_affiliations(aff, len(node_ids)).filtered(min_size)
    if len(gt) == 0:
        raise DeltacomError(f"No ground-truth group with at least {min_size} nodes")
    return gt


@typechecked
def run_match(
    session: OutputSession,
    source_path: Path,
    affiliations_path: Path,
    mode: str,
    seed: int,
    threads: int = 1,
    min_size: int = 1,
    resolution: float = 1.0,
    sample_fraction: float = settings.DEFAULT_SAMPLE_FRACTION,
    fit_path: Optional[Path] = None,
    fit_from_path: Optional[Path] = None,
) -> MatchResults:
    session.input("source", source_path)
    session.input("affiliations", affiliations_path)
    session.input("fit", fit_path)
    session.input("fit_from", fit_from_path)
    session.parameters(mode=mode, min_size=min_size)

    if _is_dendrogram(source_path):
        d = read_dendrogram(source_path)
        gt = _ground_truth(d.node_ids, affiliations_path, min_size)
        if mode == "r1":
            session.parameters(resolution=resolution)
            results = recall_labels(d.labels_at(resolution), gt, "r1", threads)
        elif mode == "r2":
            results = recall_r2(d, gt, threads)
        else:
            if (fit_path is None) == (fit_from_path is None):
                raise InvalidUsageError("Mode r3 needs exactly one of --fit and --fit-from")
            if fit_path is not None:
                fit = read_regression_fit(fit_path)
            else:
                assert fit_from_path is not None
                fit = size_resolution_regression(read_match_results(fit_from_path), min_size)
            session.parameters(sample_fraction=sample_fraction)
            results = recall_r3(d, gt, sample_fraction, fit, seed, threads)
    else:
        if mode != "r1":
            raise InvalidUsageError(f"Mode {mode} needs a dendrogram, got a partition: {source_path}")
        node_ids, labels = read_partition(source_path)
        gt = _ground_truth(node_ids, affiliations_path, min_size)
        results = recall_labels(labels, gt, "r1", threads)

    write_match_results(results, session.path(f"match.{mode}.csv"))
    write_cdf(
        cumulative_distribution([r.score for r in results]),
        session.path(f"match.{mode}.cdf.csv"),
    )
    small = [r for r in results if r.small]
    summary: List[Any] = [
        ("mode", mode),
        ("groups", len(results)),
        ("mean_recall", f"{mean_recall(results):.12g}"),
        ("small_groups", len(small)),
    ]
    if len(small) < len(results):
        summary.append(
            ("mean_recall_without_small", f"{mean_recall([r for r in results if not r.small]):.12g}")
        )
    write_key_values(summary, session.path(f"match.{mode}.summary"))
    return results


@typechecked
def run_regress(session: OutputSession, results_path: Path, min_size: int = 1) -> None:
    session.input("results", results_path)
    session.parameters(min_size=min_size)
    fit = size_resolution_regression(read_match_results(results_path), min_size)
    write_regression_fit(fit, session.path("regression.fit"))


@typechecked
def run_synth(session: OutputSession, spec_path: Path, seed: Optional[int]) -> None:
    session.input("spec", spec_path)
    spec = load_synth_spec(spec_path, seed)
    session.manifest.seed = spec.seed
    result = generate(spec)
    g = result.graph
    write_edge_list(g, session.path("synth.edges"))
    write_affiliations(g, result.affiliations, session.path("synth.affiliations"))
    write_ground_truth(result.ground_truth, session.path("synth.groundtruth"))
    write_decorations(g.node_ids, result.chains, result.tendrils, session.path("synth.decorations"))
