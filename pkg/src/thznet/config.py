"""Flat ``key = value`` experiment configuration with one section per module.

Every recognised key is listed in :data:`SCHEMA`; anything else is rejected
with the offending ``section.key`` named, so a typo can never be silently
ignored.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

KINDS = ("linkbudget", "initial-access", "coverage", "e2e-udp", "e2e-tcp")


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit status 2)."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _strs(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.replace(",", " ").split())


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "experiment": {"kind": str, "seed": int, "out": str, "trials": int, "parallel": int},
    "propagation": {"absorption_file": str, "tx_power": float, "noise_figure": float},
    "linkbudget": {"distances": _floats, "mmwave_frequencies_ghz": _floats,
                   "thz_frequencies_ghz": _floats, "mmwave_bandwidth": float,
                   "thz_bandwidth": float},
    "access": {"mmwave_pairs": int, "thz_pairs": int, "per_signal_time": float,
               "fixed_overhead": float},
    "coverage": {"curves": _strs, "densities": _floats, "trials": int, "snr_threshold": float,
                 "region_area": float, "conditioning": str, "calibrate": _bool,
                 "anchors": _floats, "chunk_size": int},
    "linkstack": {"queue_capacity": int, "thz_stack": str, "mmwave_stack": str},
    "e2e_udp": {"distances": _floats, "rates_gbps": _floats, "mmwave_rate_gbps": float,
                "duration": float},
    "e2e_tcp": {"stacks": _strs, "distance": float, "duration": float, "min_rto": float,
                "core_delay": float},
}


@dataclass
class ExperimentSpec:
    kind: str
    params: dict[str, dict[str, Any]] = field(default_factory=dict)
    seed: int = 1
    out: Path = Path("results")
    trials: int | None = None
    parallel: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        self.out = Path(self.out)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.params.get(section, {}).get(key, default)


def parse_config(text: str, source: str = "<config>") -> dict[str, dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    out: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            try:
                out.setdefault(section, {})[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {section}.{key}: {exc}") from None
    return out


def load_spec(path: str | Path | None = None, kind: str | None = None, seed: int | None = None,
              out: str | Path | None = None, trials: int | None = None,
              parallel: int | None = None) -> ExperimentSpec:
    """Build a spec from an optional config file; explicit arguments win."""
    params = parse_config(Path(path).read_text(), str(path)) if path else {}
    exp = params.get("experiment", {})
    if kind and exp.get("kind") and exp["kind"] != kind:
        raise ConfigError(f"{path}: experiment.kind is {exp['kind']!r}, expected {kind!r}")
    kind = kind or exp.get("kind")
    if kind is None:
        raise ConfigError("experiment kind missing (experiment.kind or the subcommand)")
    return ExperimentSpec(
        kind=kind,
        params=params,
        seed=seed if seed is not None else exp.get("seed", 1),
        out=Path(out if out is not None else exp.get("out", "results")),
        trials=trials if trials is not None else exp.get("trials"),
        parallel=parallel if parallel is not None else exp.get("parallel", 1),
    )
