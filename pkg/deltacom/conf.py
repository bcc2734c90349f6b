import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from textwrap import indent
from typing import Any, Dict, List, Optional, Tuple
from schema import And, Schema, SchemaError, Use, Optional as SchemaOptional
from typeguard import typechecked
from deltacom import settings
from deltacom.formats import read_key_values, write_key_values
from deltacom.graph import Source
from deltacom.preprocess import ChainKind
from deltacom.synth import SynthSpec


@typechecked
def error_message(message: str, source_obj: Any) -> str:
    if isinstance(source_obj, dict):
        source_string = "\n".join(f"{key} = {value}" for key, value in source_obj.items())
    else:
        source_string = str(source_obj)
    return message + ":\n" + indent(source_string, "    ")


@typechecked
def parse_sizes(text: str) -> List[int]:
    """Block sizes as a comma list; ``count*size`` repeats a size."""
    sizes: List[int] = []
    for token in text.split(","):
        token = token.strip()
        match = re.fullmatch(r"(\d+)\s*\*\s*(\d+)", token)
        if match is not None:
            sizes.extend([int(match.group(2))] * int(match.group(1)))
        elif re.fullmatch(r"\d+", token):
            sizes.append(int(token))
        else:
            raise SchemaError(error_message("Invalid block size", token))
    return sizes


@typechecked
def parse_range(text: str) -> Tuple[int, int]:
    """``low-high`` or a single length."""
    low, separator, high = text.partition("-")
    if not separator:
        high = low
    return int(low), int(high)


def _probability(value: float) -> bool:
    return 0.0 <= value <= 1.0


synth_spec_schema = Schema(
    {
        "version": And(Use(int), lambda version: version == settings.SCHEMA_VERSION),
        "sizes": And(Use(parse_sizes), lambda sizes: len(sizes) > 0 and min(sizes) >= 3),
        SchemaOptional("p_in"): And(Use(float), _probability),
        SchemaOptional("p_out"): And(Use(float), _probability),
        SchemaOptional("external_degree"): And(Use(float), lambda degree: degree >= 0),
        SchemaOptional("mean_internal_degree"): And(Use(float), lambda degree: degree > 0),
        SchemaOptional("chain_count"): And(Use(int), lambda count: count >= 0),
        SchemaOptional("chain_kind"): Use(ChainKind),
        SchemaOptional("chain_length"): And(Use(parse_range), lambda r: 1 <= r[0] <= r[1]),
        SchemaOptional("tendril_count"): And(Use(int), lambda count: count >= 0),
        SchemaOptional("tendril_length"): And(Use(parse_range), lambda r: 1 <= r[0] <= r[1]),
        SchemaOptional("seed"): And(Use(int), lambda seed: seed >= 0),
    }
)


@typechecked
def synth_spec_from_values(values: Dict[str, str], seed: Optional[int] = None) -> SynthSpec:
    validated = synth_spec_schema.validate(values)
    validated.pop("version")
    if "p_out" in validated and "external_degree" in validated:
        raise SchemaError(
            error_message("Give either p_out or external_degree, not both", values)
        )
    if seed is not None:
        validated["seed"] = seed
    spec = SynthSpec(**validated)
    p_out = spec.external_probability()
    if not p_out < spec.p_in:
        raise SchemaError(
            error_message(f"External probability {p_out} must be below p_in", values)
        )
    return spec


@typechecked
def load_synth_spec(source: Source, seed: Optional[int] = None) -> SynthSpec:
    return synth_spec_from_values(read_key_values(source), seed)


@typechecked
@dataclass
class RunManifest:
    """Record written next to the outputs of one CLI run."""

    subcommand: str
    seed: int
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    parameters: Dict[str, Any] = field(default_factory=dict)
    duration_seconds: float = 0.0

    def pairs(self) -> List[Tuple[str, Any]]:
        pairs: List[Tuple[str, Any]] = [
            ("schema_version", settings.SCHEMA_VERSION),
            ("tool", settings.TOOL_NAME),
            ("tool_version", settings.TOOL_VERSION),
            ("subcommand", self.subcommand),
            ("seed", self.seed),
        ]
        pairs.extend((f"input.{name}", path) for name, path in sorted(self.inputs.items()))
        pairs.extend((f"output.{index}", path) for index, path in enumerate(self.outputs))
        pairs.extend(
            (f"param.{name}", json.dumps(value, default=str))
            for name, value in sorted(self.parameters.items())
        )
        pairs.append(("duration_seconds", f"{self.duration_seconds:.3f}"))
        return pairs

    def save(self, target: Path) -> None:
        write_key_values(self.pairs(), target)

    @classmethod
    def load(cls, source: Path) -> "RunManifest":
        values = read_key_values(source)
        Schema(
            {
                "schema_version": And(Use(int), lambda v: v == settings.SCHEMA_VERSION),
                "tool": settings.TOOL_NAME,
                "tool_version": str,
                "subcommand": str,
                "seed": Use(int),
                "duration_seconds": Use(float),
                str: str,
            }
        ).validate(values)
        return cls(
            subcommand=values["subcommand"],
            seed=int(values["seed"]),
            inputs={k[len("input.") :]: v for k, v in values.items() if k.startswith("input.")},
            outputs=[
                v
                for k, v in sorted(
                    ((k, v) for k, v in values.items() if k.startswith("output.")),
                    key=lambda item: int(item[0][len("output.") :]),
                )
            ],
            parameters={
                k[len("param.") :]: json.loads(v) for k, v in values.items() if k.startswith("param.")
            },
            duration_seconds=float(values["duration_seconds"]),
        )
