"""Pipeline configuration: defaults, TOML-style file loading, overrides.

The config file is a flat TOML-style key/value document (strings, ints,
floats, booleans, and [a, b] integer pairs; # comments). A seed must be
given explicitly so every run is reproducible on purpose rather than by
accident.
"""

from dataclasses import asdict, dataclass, fields

from .errors import UodkitError


class ConfigError(UodkitError):
    pass


@dataclass
class PipelineConfig:
    archive_dir: str = ""
    output_dir: str = ""
    seed: int = None  # required in files; no silent default
    n_eigenvectors: int = 3
    thresh: float = 1.02
    k_max: int = 10
    alpha: float = 0.7
    iou_threshold: float = 0.1
    top_p: int = 20
    bottom_q: int = 10
    t_bg: float = 0.8
    k_range: tuple = (2, 30)
    temperature: float = 0.07
    dilation_radius: int = 2
    min_part_area: int = 4
    min_instance_frac: float = 0.001
    upsample: int = 1
    affinity_floor: float = 1e-5
    binarize_affinity: bool = False
    binarize_tau: float = 0.2
    max_considered: int = 500
    aggregate: str = "sum"
    workers: int = 0  # 0 = all available cores

    def validate(self):
        if self.seed is None:
            raise ConfigError("seed is required")
        if not self.archive_dir:
            raise ConfigError("archive_dir is required")
        if not self.output_dir:
            raise ConfigError("output_dir is required")
        if self.thresh <= 1.0:
            raise ConfigError("thresh must be > 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0.0 < self.iou_threshold < 1.0:
            raise ConfigError("iou_threshold must lie in (0, 1)")
        if self.n_eigenvectors < 2:
            raise ConfigError("n_eigenvectors must be >= 2")
        if self.top_p < 1 or self.bottom_q < 1:
            raise ConfigError("top_p and bottom_q must be >= 1")
        if len(self.k_range) != 2 or self.k_range[0] < 2 or self.k_range[0] > self.k_range[1]:
            raise ConfigError("k_range must be [lo, hi] with 2 <= lo <= hi")
        return self

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["k_range"] = list(self.k_range)
        return doc


_BOOL = {"true": True, "false": False}


def _parse_value(raw: str, lineno: int):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw in _BOOL:
        return _BOOL[raw]
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(item, lineno) for item in inner.split(",")]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse value {raw!r}")


def parse_config_text(text: str) -> dict:
    """Flat key = value TOML subset; sections are not supported."""
    doc = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            raise ConfigError(f"line {lineno}: sections are not supported")
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        # strip trailing comment outside of strings
        if "#" in raw and '"' not in raw:
            raw = raw.split("#", 1)[0]
        doc[key.strip()] = _parse_value(raw, lineno)
    return doc


def load_config(path, overrides: dict = None) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        doc = parse_config_text(fh.read())
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "k_range" in doc:
        doc["k_range"] = tuple(doc["k_range"])
    return PipelineConfig(**doc).validate()
