import logging
import sys
import pytest
from pathlib import Path
from typing import Any, Iterator, List, cast
from unittest.mock import Mock
from click.testing import CliRunner
from pytest_mock.plugin import MockerFixture
from deltacom import pipelines, settings
from deltacom.__main__ import main_command
from deltacom.errors import DeltacomError
from deltacom.logformatters import LogFormatter, configure_logging
from .utils import fixture_dir

graph_path = str(fixture_dir / "two_triangles.edges")
affiliations_path = str(fixture_dir / "two_triangles.affiliations")


def formatter_handlers() -> List[logging.Handler]:
    logger = logging.getLogger(settings.TOOL_NAME)
    return [h for h in logger.handlers if isinstance(h.formatter, LogFormatter)]


@pytest.fixture(autouse=True)
def restore_logging() -> Iterator[None]:
    yield
    logger = logging.getLogger(settings.TOOL_NAME)
    for handler in formatter_handlers():
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)


def test_version() -> None:
    result = CliRunner().invoke(main_command, ["--version"])
    assert result.exit_code == 0
    assert f"{settings.TOOL_NAME}, version {settings.TOOL_VERSION}" in result.output


def test_help() -> None:
    result = CliRunner().invoke(main_command, ["--help"])
    assert result.exit_code == 0
    for command in ("detect", "match", "preprocess", "regress", "stats", "synth"):
        assert command in result.output


def test_library_error_exits_nonzero(mocker: MockerFixture, tmpdir: Any) -> None:
    mocker.patch("deltacom.pipelines.run_detect", side_effect=DeltacomError("broken graph"))
    result = CliRunner().invoke(main_command, ["-o", str(tmpdir), "detect", graph_path])
    assert result.exit_code == 1
    assert "broken graph" in result.output
    mock = cast(Mock, pipelines.run_detect)
    mock.assert_called_once()
    assert mock.call_args.args[2] == "deltacom"
    assert not Path(tmpdir).joinpath("detect.manifest").exists()


def test_usage_error_exits_with_two(tmpdir: Any) -> None:
    runner = CliRunner()
    result = runner.invoke(main_command, ["-o", str(tmpdir), "detect", graph_path])
    assert result.exit_code == 0
    dendrogram = str(Path(tmpdir) / "deltacom.dendrogram")
    result = runner.invoke(
        main_command, ["-o", str(tmpdir), "match", dendrogram, affiliations_path, "--mode", "r3"]
    )
    assert result.exit_code == 2
    assert "exactly one of --fit and --fit-from" in result.output


def test_global_options_reach_pipelines(mocker: MockerFixture, tmpdir: Any) -> None:
    mocker.patch("deltacom.pipelines.run_match")
    CliRunner().invoke(
        main_command,
        ["-o", str(tmpdir), "-s", "5", "-j", "3", "match", graph_path, affiliations_path],
    )
    mock = cast(Mock, pipelines.run_match)
    mock.assert_called_once()
    assert mock.call_args.args[3:5] == ("r2", 5)
    assert mock.call_args.kwargs["threads"] == 3
    assert mock.call_args.kwargs["sample_fraction"] == settings.DEFAULT_SAMPLE_FRACTION


def test_configure_logging() -> None:
    configure_logging()
    handler = configure_logging(verbose=True)
    assert formatter_handlers() == [handler]
    assert logging.getLogger(settings.TOOL_NAME).level == logging.DEBUG
    configure_logging()
    assert logging.getLogger(settings.TOOL_NAME).level == logging.INFO


def test_log_formatter_hides_tracebacks_unless_verbose() -> None:
    try:
        raise DeltacomError("boom")
    except DeltacomError:
        exc_info = sys.exc_info()
    record = logging.LogRecord("deltacom.engine", logging.WARNING, __file__, 1, "failed", None, exc_info)

    quiet = LogFormatter(False).format(record)
    assert quiet.endswith("[deltacom.engine] WARNING: failed")
    assert "Traceback" not in quiet

    record.exc_text = None
    verbose = LogFormatter(True).format(record)
    assert "Traceback" in verbose
    assert "DeltacomError: boom" in verbose
