"""Run configuration: YAML file, flag overrides, config hash.

Every key in the config file can be overridden by a command-line flag of the
same (dotted) name. The effective configuration is hashed canonically and the
hash is embedded in every output file, so artifacts can be traced to the
exact configuration that produced them. The seed is mandatory: there is no
wall-clock fallback anywhere in the engine.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from brainenc.comparison import ComparisonConfig
from brainenc.encoder import RidgeConfig
from brainenc.errors import ConfigurationError
from brainenc.events import Alignment, WindowSpec
from brainenc.multimodality import ContrastPair
from brainenc.synth import SynthConfig

# key -> (type, default); None default means the key has no default and is
# only set when the file or a flag provides it.
SCHEMA: dict[str, tuple[type, object]] = {
    "seed": (int, None),
    "output_dir": (str, None),
    "threads": (int, 1),
    "alpha": (float, 0.05),
    "min_bins": (int, 10),
    "region_lookup": (str, None),
    "electrodes": (str, None),
    "window.window_ms": (float, 4000.0),
    "window.sub_window_ms": (float, 200.0),
    "window.stride_ms": (float, 25.0),
    "ridge.lambda_min_exp": (float, -1.0),
    "ridge.lambda_max_exp": (float, 6.0),
    "ridge.lambda_count": (int, 8),
    "ridge.k_folds": (int, 5),
    "projection.epsilon": (float, 0.1),
    "bootstrap.n_event_resamples": (int, 1000),
    "bootstrap.n_bin_resamples": (int, 1000),
    "bootstrap.sort": (bool, True),
    "contrast_pair.multimodal": (str, None),
    "contrast_pair.unimodal": (str, None),
    "alignments.language.events": (str, None),
    "alignments.language.responses": (str, None),
    "alignments.language.manifest": (str, None),
    "alignments.vision.events": (str, None),
    "alignments.vision.responses": (str, None),
    "alignments.vision.manifest": (str, None),
    "synth.n_events": (int, 1000),
    "synth.n_multimodal_linear": (int, 10),
    "synth.n_multimodal_nonlinear": (int, 10),
    "synth.n_unimodal_language": (int, 10),
    "synth.n_unimodal_vision": (int, 10),
    "synth.n_noise": (int, 10),
    "synth.dim_language": (int, 30),
    "synth.dim_vision": (int, 30),
    "synth.dim_multimodal": (int, 40),
    "synth.dim_linear_proj": (int, 24),
    "synth.n_bins": (int, 20),
    "synth.noise_sigma": (float, 0.3),
}

REQUIRED = ("seed", "output_dir")


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate mapping keys, naming both."""


def _strict_mapping(loader: _StrictLoader, node: yaml.MappingNode, deep: bool = False):
    seen = {}
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ConfigurationError(
                f"duplicate config key {key!r} at line {key_node.start_mark.line + 1} "
                f"(first defined at line {seen[key] + 1})"
            )
        seen[key] = key_node.start_mark.line
    return yaml.SafeLoader.construct_mapping(loader, node, deep)


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _strict_mapping
)


def _flatten(tree: dict, prefix: str = "") -> dict[str, object]:
    flat: dict[str, object] = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _coerce(key: str, value: object) -> object:
    typ, _ = SCHEMA[key]
    if value is None:
        return None
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
            return value.lower() in ("true", "1")
        raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")
    try:
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{key}: expected {typ.__name__}, got {value!r}") from exc


@dataclass
class RunConfig:
    """The effective (file + flags) configuration of one run."""

    values: dict[str, object]

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        value = self.values.get(key)
        return default if value is None else value

    # -- derived objects ----------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def output_dir(self) -> Path:
        return Path(str(self.values["output_dir"]))

    @property
    def threads(self) -> int:
        return int(self.values["threads"])

    def window_spec(self) -> WindowSpec:
        return WindowSpec(
            window_ms=float(self.values["window.window_ms"]),
            sub_window_ms=float(self.values["window.sub_window_ms"]),
            stride_ms=float(self.values["window.stride_ms"]),
        )

    def ridge_config(self) -> RidgeConfig:
        grid = np.logspace(
            float(self.values["ridge.lambda_min_exp"]),
            float(self.values["ridge.lambda_max_exp"]),
            int(self.values["ridge.lambda_count"]),
        )
        return RidgeConfig(
            lambda_grid=tuple(float(v) for v in grid),
            k_folds=int(self.values["ridge.k_folds"]),
        )

    def comparison_config(self) -> ComparisonConfig:
        return ComparisonConfig(
            alpha=float(self.values["alpha"]),
            min_bins=int(self.values["min_bins"]),
            n_bin_resamples=int(self.values["bootstrap.n_bin_resamples"]),
            seed=self.seed,
        )

    def contrast_pair(self) -> ContrastPair | None:
        mm = self.values.get("contrast_pair.multimodal")
        uni = self.values.get("contrast_pair.unimodal")
        if mm is None and uni is None:
            return None
        if mm is None or uni is None:
            raise ConfigurationError(
                "contrast_pair requires both 'multimodal' and 'unimodal' members"
            )
        return ContrastPair(multimodal_id=str(mm), unimodal_id=str(uni))

    def synth_config(self) -> SynthConfig:
        v = self.values
        return SynthConfig(
            n_events=int(v["synth.n_events"]),
            n_multimodal_linear=int(v["synth.n_multimodal_linear"]),
            n_multimodal_nonlinear=int(v["synth.n_multimodal_nonlinear"]),
            n_unimodal_language=int(v["synth.n_unimodal_language"]),
            n_unimodal_vision=int(v["synth.n_unimodal_vision"]),
            n_noise=int(v["synth.n_noise"]),
            dim_language=int(v["synth.dim_language"]),
            dim_vision=int(v["synth.dim_vision"]),
            dim_multimodal=int(v["synth.dim_multimodal"]),
            dim_linear_proj=int(v["synth.dim_linear_proj"]),
            n_bins=int(v["synth.n_bins"]),
            noise_sigma=float(v["synth.noise_sigma"]),
            seed=self.seed,
        )

    def alignment_paths(self, alignment: Alignment) -> dict[str, Path] | None:
        """Configured input paths for one alignment, or None if unset."""
        keys = {
            part: self.values.get(f"alignments.{alignment.value}.{part}")
            for part in ("events", "responses", "manifest")
        }
        if all(v is None for v in keys.values()):
            return None
        missing = [k for k, v in keys.items() if v is None]
        if missing:
            raise ConfigurationError(
                f"alignments.{alignment.value} is missing {missing}"
            )
        return {k: Path(str(v)) for k, v in keys.items()}

    def config_hash(self) -> str:
        """Hash of the analysis-relevant configuration.

        Execution-environment keys (thread count, output location) do not
        change results and are excluded, so reruns with different parallelism
        produce byte-identical artifacts.
        """
        semantic = {
            k: v for k, v in self.values.items() if k not in ("threads", "output_dir")
        }
        canonical = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_config(
    config_path: str | Path | None,
    overrides: dict[str, object] | None = None,
) -> RunConfig:
    """Merge defaults, the config file, and flag overrides, then validate."""
    values: dict[str, object] = {key: default for key, (_, default) in SCHEMA.items()}

    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            tree = yaml.load(path.read_text("utf-8"), Loader=_StrictLoader)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML: {exc}") from exc
        if tree is None:
            tree = {}
        if not isinstance(tree, dict):
            raise ConfigurationError(f"{path}: top level must be a mapping")
        flat = _flatten(tree)
        unknown = sorted(set(flat) - set(SCHEMA))
        if unknown:
            raise ConfigurationError(f"{path}: unknown config keys {unknown}")
        for key, value in flat.items():
            values[key] = _coerce(key, value)

    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown config key {key!r}")
        if value is not None:
            values[key] = _coerce(key, value)

    missing = [key for key in REQUIRED if values.get(key) is None]
    if missing:
        raise ConfigurationError(
            f"missing required config keys {missing} (set them in the file or by flag)"
        )
    return RunConfig(values=values)
