"""Run configuration: a flat key = value text format with strict key checking.

A minimal config names only the dataset index; everything else resolves to
the defaults below (7x3 blocks, W=9, M=8, R=3, T=25, improved projections,
selection off). `format_config` emits the resolved form; re-parsing it yields
an equal RunConfig.
"""

from dataclasses import dataclass, fields, replace

from .classify import DEFAULT_C_GRID
from .dataset import SynthSpec
from .descriptor import DescriptorConfig
from .errors import ConfigError
from .rpca import RpcaConfig

SELECTION_MODES = ("off", "on")


@dataclass(frozen=True)
class RunConfig:
    index: str = ""
    blocks_m: int = 7
    blocks_n: int = 3
    mask_w: int = 9
    lbp_samples: int = 8
    lbp_radius: int = 3
    temporal_length: int = 25
    projection: str = "improved"
    selection: str = "off"
    selection_p: int = 0  # 0 = sweep a P grid by inner cross validation
    c_grid: tuple = DEFAULT_C_GRID
    gamma: float | None = None  # None = mean pairwise-distance heuristic
    seed: int = 0
    jobs: int = 1
    cache_dir: str = ""
    rpca_weight: float | None = None  # None = 1/sqrt(max(D, n))
    rpca_tol: float = 1e-7
    rpca_max_iter: int = 500
    rpca_mu0_scale: float = 1.25
    rpca_rho: float = 1.1

    def descriptor_config(self) -> DescriptorConfig:
        return DescriptorConfig(
            blocks_m=self.blocks_m,
            blocks_n=self.blocks_n,
            mask_w=self.mask_w,
            lbp_samples=self.lbp_samples,
            lbp_radius=self.lbp_radius,
            temporal_length=self.temporal_length,
            source=self.projection,
        )

    def rpca_config(self) -> RpcaConfig:
        return RpcaConfig(
            sparse_weight=self.rpca_weight,
            tol=self.rpca_tol,
            max_iter=self.rpca_max_iter,
            mu0_scale=self.rpca_mu0_scale,
            rho=self.rpca_rho,
        )

    def validate(self):
        try:
            self.descriptor_config()
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e)) from e
        try:
            self.rpca_config()
        except ValueError as e:
            raise ConfigError(f"rpca settings: {e}") from e
        if self.selection not in SELECTION_MODES:
            raise ConfigError(f"selection must be one of {SELECTION_MODES}")
        if self.selection_p < 0:
            raise ConfigError("selection_p must be >= 0 (0 sweeps a grid)")
        if self.selection_p > self.n_groups:
            raise ConfigError(
                f"selection_p {self.selection_p} exceeds the {self.n_groups} groups"
            )
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ConfigError("c_grid must be a nonempty list of positive values")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError("gamma must be positive or 'mean'")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    @property
    def n_groups(self) -> int:
        return self.blocks_m * self.blocks_n * 4

    def fingerprint(self) -> str:
        return self.descriptor_config().fingerprint()


_INT_KEYS = (
    "blocks_m", "blocks_n", "mask_w", "lbp_samples", "lbp_radius",
    "temporal_length", "selection_p", "seed", "jobs", "rpca_max_iter",
)
_FLOAT_KEYS = ("rpca_tol", "rpca_mu0_scale", "rpca_rho")
_STR_KEYS = ("index", "projection", "selection", "cache_dir")
_KEY_ORDER = (
    "index", "blocks_m", "blocks_n", "mask_w", "lbp_samples", "lbp_radius",
    "temporal_length", "projection", "selection", "selection_p", "c_grid",
    "gamma", "seed", "jobs", "cache_dir", "rpca_weight", "rpca_tol",
    "rpca_max_iter", "rpca_mu0_scale", "rpca_rho",
)


def _parse_value(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _STR_KEYS:
            return raw
        if key == "c_grid":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key == "gamma":
            return None if raw == "mean" else float(raw)
        if key == "rpca_weight":
            return None if raw in ("auto", "0") else float(raw)
    except ValueError as e:
        raise ConfigError(f"key {key}: cannot parse value {raw!r}") from e
    raise ConfigError(f"unknown key {key!r}")


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _KEY_ORDER:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    cfg = replace(RunConfig(), **values)
    return cfg.validate()


def parse_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text, source=str(path))


def _format_value(key: str, value) -> str:
    if key == "c_grid":
        return ",".join(repr(float(v)) for v in value)
    if key == "gamma":
        return "mean" if value is None else repr(float(value))
    if key == "rpca_weight":
        return "auto" if value is None else repr(float(value))
    if key in _FLOAT_KEYS:
        return repr(float(value))
    return str(value)


def format_config(cfg: RunConfig) -> str:
    lines = [f"{k} = {_format_value(k, getattr(cfg, k))}" for k in _KEY_ORDER]
    return "\n".join(lines) + "\n"


def parse_synth_spec(path) -> SynthSpec:
    """Parse a synthesis config: the SynthSpec fields as key = value lines."""
    spec_fields = {f.name: f.type for f in fields(SynthSpec)}
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read synthesis spec {path}: {e}") from e
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in spec_fields:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = (
                float(raw) if key.endswith("_amplitude") else int(raw)
            )
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: cannot parse value {raw!r}") from e
    try:
        return SynthSpec(**values)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e

