import functools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar, cast
import click
from schema import SchemaError
from typeguard import typechecked
from deltacom import pipelines, settings
from deltacom.errors import DeltacomError, InvalidUsageError
from deltacom.logformatters import configure_logging
from deltacom.pipelines import OutputSession

logger = logging.getLogger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


@typechecked
@dataclass
class GlobalOptions:
    seed: int
    threads: int
    output_dir: Path
    verbose: bool


def reports_errors(fn: F) -> F:
    """Turn library errors into click errors so they exit nonzero with a message."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except InvalidUsageError as err:
            raise click.UsageError(str(err)) from err
        except (DeltacomError, SchemaError, OSError) as err:
            logger.debug("Command failed", exc_info=True)
            raise click.ClickException(str(err)) from err

    return cast(F, wrapper)


existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


@click.group()
@click.option("--seed", "-s", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--threads", "-j", type=click.IntRange(min=1), default=1, show_default=True)
@click.option(
    "--output-dir", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path(".")
)
@click.option("--verbose", "-v", is_flag=True)
@click.version_option(settings.TOOL_VERSION, prog_name=settings.TOOL_NAME)
@click.pass_context
def main_command(
    ctx: click.Context, seed: int, threads: int, output_dir: Path, verbose: bool
) -> None:
    configure_logging(verbose)
    ctx.obj = GlobalOptions(seed, threads, output_dir, verbose)


@main_command.command()
@click.argument("graph", type=existing_file)
@click.option("--affiliations", "-a", type=existing_file)
@click.option("--k-min", type=click.IntRange(min=1), default=settings.DEFAULT_POWER_LAW_K_MIN)
@click.pass_obj
@reports_errors
def stats(options: GlobalOptions, graph: Path, affiliations: Optional[Path], k_min: int) -> None:
    """Degree, clustering and neighbor-degree statistics of a graph."""
    with OutputSession(options.output_dir, "stats", options.seed) as session:
        pipelines.run_stats(session, graph, affiliations, k_min)


@main_command.command()
@click.argument("graph", type=existing_file)
@click.option("--affiliations", "-a", type=existing_file)
@click.option("--k", "k", type=click.IntRange(min=1), default=settings.DEFAULT_CORE_K, show_default=True)
@click.option("--iterate/--single-pass", default=True, show_default=True)
@click.pass_obj
@reports_errors
def preprocess(
    options: GlobalOptions, graph: Path, affiliations: Optional[Path], k: int, iterate: bool
) -> None:
    """Restrict to the k-core and collapse degree-2 chains."""
    with OutputSession(options.output_dir, "preprocess", options.seed) as session:
        pipelines.run_preprocess(session, graph, affiliations, k, iterate)


@main_command.command()
@click.argument("graph", type=existing_file)
@click.option(
    "--method",
    "-m",
    type=click.Choice(["deltacom", "louvain", "lpm"]),
    default="deltacom",
    show_default=True,
)
@click.option("--resolution", "-t", type=float, default=1.0, show_default=True)
@click.option("--max-sweeps", type=click.IntRange(min=1), default=settings.DEFAULT_MAX_SWEEPS)
@click.pass_obj
@reports_errors
def detect(
    options: GlobalOptions, graph: Path, method: str, resolution: float, max_sweeps: int
) -> None:
    """Detect communities; deltacom writes the whole dendrogram."""
    with OutputSession(options.output_dir, "detect", options.seed) as session:
        pipelines.run_detect(session, graph, method, options.seed, resolution, max_sweeps)


@main_command.command()
@click.argument("source", type=existing_file)
@click.argument("affiliations", type=existing_file)
@click.option("--mode", type=click.Choice(["r1", "r2", "r3"]), default="r2", show_default=True)
@click.option(
    "--sample-fraction",
    type=click.FloatRange(min=0, max=1, min_open=True),
    default=settings.DEFAULT_SAMPLE_FRACTION,
    show_default=True,
)
@click.option("--fit", "fit_path", type=existing_file)
@click.option("--fit-from", "fit_from_path", type=existing_file)
@click.option("--min-size", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--resolution", "-t", type=float, default=1.0, show_default=True)
@click.pass_obj
@reports_errors
def match(
    options: GlobalOptions,
    source: Path,
    affiliations: Path,
    mode: str,
    sample_fraction: float,
    fit_path: Optional[Path],
    fit_from_path: Optional[Path],
    min_size: int,
    resolution: float,
) -> None:
    """Score a dendrogram or partition against ground-truth groups."""
    if mode != "r3" and (fit_path is not None or fit_from_path is not None):
        raise click.UsageError("--fit and --fit-from only apply to --mode r3")
    with OutputSession(options.output_dir, "match", options.seed) as session:
        pipelines.run_match(
            session,
            source,
            affiliations,
            mode,
            options.seed,
            threads=options.threads,
            min_size=min_size,
            resolution=resolution,
            sample_fraction=sample_fraction,
            fit_path=fit_path,
            fit_from_path=fit_from_path,
        )


@main_command.command()
@click.argument("results", type=existing_file)
@click.option("--min-size", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_obj
@reports_errors
def regress(options: GlobalOptions, results: Path, min_size: int) -> None:
    """Fit log10(best t) against log10(group size) from r2 results."""
    with OutputSession(options.output_dir, "regress", options.seed) as session:
        pipelines.run_regress(session, results, min_size)


@main_command.command()
@click.argument("spec", type=existing_file)
@click.pass_context
@reports_errors
def synth(ctx: click.Context, spec: Path) -> None:
    """Generate a planted-partition benchmark from a key=value spec file."""
    options = cast(GlobalOptions, ctx.obj)
    source = ctx.find_root().get_parameter_source("seed")
    seed = None if source == click.core.ParameterSource.DEFAULT else options.seed
    with OutputSession(options.output_dir, "synth", options.seed) as session:
        pipelines.run_synth(session, spec, seed)


if __name__ == "__main__":
    main_command()
