"""Run configuration: a flat, typed key=value text format.

Schema (all keys optional; defaults below):

    family        spatial-mlp | dense-mlp | spatial-snn | dense-snn
    layers        comma-separated layer sizes, e.g. 784,2048,10
    dim           embedding dimensionality d (spatial families)
    z_policy      fixed-unit | learnable-gap | free-z
    inhibition_steepness   sigmoid steepness of the inhibition mask
    activation    leaky-relu | relu | tanh | sigmoid (hidden layers, MLP families)
    learning_rate, epochs, batch_size, seed
    dtype         float64 | float32
    standardize   true/false: standardize pixels instead of plain /255
    limit_train, limit_test   use only the first N samples (0 = all)
    prune_protocol   none | post-training | during-training
    prune_fraction   fraction of connections dropped, in [0, 1)
    prune_scope      global | per-block
    snn_steps, snn_beta, snn_threshold, snn_surrogate_slope
    snn_loss      membrane | spike-count
    snn_encoding  constant | poisson
    data_dir      directory holding the four IDX files (optionally .gz)
    out_dir       artifact directory; runs write to <out_dir>/seed<seed>/

Lines are `key = value`; blank lines and lines starting with # are
ignored. CLI flags override file values. Every artifact a run writes
embeds the fully resolved configuration, including the seed.
"""

from dataclasses import asdict, dataclass, fields, replace

from spatialnn.errors import ConfigError

FAMILIES = ("spatial-mlp", "dense-mlp", "spatial-snn", "dense-snn")


@dataclass(frozen=True)
class RunConfig:
    family: str = "spatial-mlp"
    layers: tuple = (784, 2048, 10)
    dim: int = 3
    z_policy: str = "learnable-gap"
    inhibition_steepness: float = 25.0
    activation: str = "leaky-relu"
    learning_rate: float = 0.005
    epochs: int = 300
    batch_size: int = 600
    seed: int = 0
    dtype: str = "float64"
    standardize: bool = False
    limit_train: int = 0
    limit_test: int = 0
    prune_protocol: str = "none"
    prune_fraction: float = 0.0
    prune_scope: str = "global"
    snn_steps: int = 25
    snn_beta: float = 0.95
    snn_threshold: float = 1.0
    snn_surrogate_slope: float = 2.0
    snn_loss: str = "membrane"
    snn_encoding: str = "constant"
    data_dir: str = "data/mnist"
    out_dir: str = "runs/run"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(n) for n in self.layers))
        if self.family not in FAMILIES:
            raise ConfigError("unknown family %r (expected one of %s)" % (self.family, ", ".join(FAMILIES)))
        if len(self.layers) < 2 or any(n < 1 for n in self.layers):
            raise ConfigError("layers must be >= 2 positive sizes, got %r" % (self.layers,))
        if self.z_policy not in ("fixed-unit", "learnable-gap", "free-z"):
            raise ConfigError("unknown z_policy %r" % self.z_policy)
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.prune_protocol not in ("none", "post-training", "during-training"):
            raise ConfigError("unknown prune_protocol %r" % self.prune_protocol)
        if not 0.0 <= self.prune_fraction < 1.0:
            raise ConfigError("prune_fraction must lie in [0, 1)")
        if self.prune_scope not in ("global", "per-block"):
            raise ConfigError("unknown prune_scope %r" % self.prune_scope)

    @property
    def is_spatial(self):
        return self.family.startswith("spatial")

    @property
    def is_snn(self):
        return self.family.endswith("snn")


def _parse_value(name, ftype, text):
    text = text.strip()
    try:
        if ftype is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if ftype is int:
            return int(text)
        if ftype is float:
            return float(text)
        if ftype is tuple:
            return tuple(int(part) for part in text.replace(" ", "").split(",") if part)
        return text
    except ValueError:
        raise ConfigError("bad value %r for key %r" % (text, name)) from None


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_TYPE_MAP = {"str": str, "int": int, "float": float, "bool": bool, "tuple": tuple}


def _field_type(name):
    t = _FIELD_TYPES[name]
    return _TYPE_MAP[t] if isinstance(t, str) else t


def parse_config_text(text, base=None):
    """Parse key=value lines into a RunConfig, starting from `base` or defaults."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("line %d is not `key = value`: %r" % (lineno, raw))
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown config key %r (line %d)" % (key, lineno))
        values[key] = _parse_value(key, _field_type(key), value)
    base_values = asdict(base) if base is not None else {}
    base_values.update(values)
    return RunConfig(**base_values)


def load_config(path, base=None):
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), base=base)


def apply_overrides(cfg, assignments):
    """Apply `key=value` override strings (CLI flags) on top of a config."""
    updates = {}
    for item in assignments:
        if "=" not in item:
            raise ConfigError("override must be key=value, got %r" % item)
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown config key %r" % key)
        updates[key] = _parse_value(key, _field_type(key), value)
    return replace(cfg, **updates) if updates else cfg


def dump_config(cfg):
    """Serialize a config to the key=value text format (parse round-trips)."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append("%s = %s" % (f.name, value))
    return "\n".join(lines) + "\n"


def resolved_dict(cfg):
    """Plain-JSON-able dict of the fully resolved configuration."""
    out = asdict(cfg)
    out["layers"] = list(cfg.layers)
    return out


# Keys that do not change what is learned; excluded from the aggregation cell.
_CELL_EXCLUDE = ("seed", "out_dir", "data_dir")


def cell_key(cfg_dict):
    """Canonical identity of an experiment cell (everything except the seed
    and file locations). Runs in one aggregation cell must share this."""
    items = sorted((k, v) for k, v in cfg_dict.items() if k not in _CELL_EXCLUDE)
    return ";".join("%s=%r" % kv for kv in items)


def cell_label(cfg_dict):
    """Short human-readable cell name for tables and bar charts."""
    bits = [cfg_dict["family"], "x".join(str(n) for n in cfg_dict["layers"])]
    if cfg_dict["family"].startswith("spatial"):
        bits.append("d%d" % cfg_dict["dim"])
        bits.append(cfg_dict["z_policy"])
    bits.append("lr%g" % cfg_dict["learning_rate"])
    if cfg_dict["prune_protocol"] != "none":
        bits.append("prune-%s-%g" % (cfg_dict["prune_protocol"], cfg_dict["prune_fraction"]))
    return " ".join(bits)
