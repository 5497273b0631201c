"""Flat ``key = value`` experiment configuration.

Unknown keys are rejected. The effective configuration of every run is echoed
into its output directory in canonical form, and its hash is stamped on every
CSV the run writes.
"""

from dataclasses import dataclass, fields, replace
import hashlib

from .errors import ConfigError


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _strs(text):
    if isinstance(text, (tuple, list)):
        return tuple(str(s) for s in text)
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return int(text)


@dataclass(frozen=True)
class ExperimentConfig:
    # data source: cqgle | ingest | synthetic
    source: str = "cqgle"
    regimes: tuple = ("b1", "b3", "b5")
    n: int = 1024
    t_final: float = 40.0
    snapshots: int = 201
    discard_transient: bool = True
    ingest_paths: tuple = ()
    ingest_labels: tuple = ()
    synthetic_regimes: int = 4
    synthetic_n: int = 256
    synthetic_snapshots: int = 120
    synthetic_seed: int = 0
    # library and sampling
    energy: float = 0.999
    max_rank: object = None
    m: int = 3
    holdout: int = 10
    candidate_start: object = None
    candidate_stride: int = 2
    window_size: int = 33
    # noise gate
    noise_sigma: float = 0.03
    noise_rounds: int = 400
    noise_seed: int = 7
    accuracy: float = 0.95
    error_reference: str = "projection"
    # genetic search
    population: int = 100
    elite: int = 10
    generations: int = 10
    mutation_prob: float = 0.5
    mutation_radius: int = 3
    seed: int = 7
    # outputs
    brute: bool = True
    compare: bool = True
    figures: bool = True
    cache_dir: str = ""

    def __post_init__(self):
        if self.source not in ("cqgle", "ingest", "synthetic"):
            raise ConfigError(f"unknown source {self.source!r}")
        if self.error_reference not in ("state", "projection"):
            raise ConfigError(f"unknown error_reference {self.error_reference!r}")
        if self.m < 1 or self.window_size < self.m:
            raise ConfigError("need 1 <= m <= window_size")
        if not 0 < self.energy <= 1:
            raise ConfigError("energy must lie in (0, 1]")
        if self.noise_sigma < 0 or not 0 <= self.accuracy <= 1:
            raise ConfigError("noise_sigma must be >= 0 and accuracy in [0, 1]")
        if self.source == "ingest" and len(self.ingest_paths) != len(self.ingest_labels):
            raise ConfigError("ingest_paths and ingest_labels must have equal length")

    @property
    def library_max_rank(self):
        """Per-regime rank cap; by default ``m - 1`` so every regime stays identifiable."""
        return self.m - 1 if self.max_rank is None else self.max_rank

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif v is None:
                v = "auto"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


_PARSERS = {
    "source": str, "regimes": _strs, "n": int, "t_final": float, "snapshots": int,
    "discard_transient": _bool, "ingest_paths": _strs, "ingest_labels": _strs,
    "synthetic_regimes": int, "synthetic_n": int, "synthetic_snapshots": int,
    "synthetic_seed": int, "energy": float, "max_rank": _opt_int, "m": int, "holdout": int,
    "candidate_start": _opt_int, "candidate_stride": int, "window_size": int,
    "noise_sigma": float, "noise_rounds": int, "noise_seed": int, "accuracy": float,
    "error_reference": str, "population": int, "elite": int, "generations": int,
    "mutation_prob": float, "mutation_radius": int, "seed": int, "brute": _bool,
    "compare": _bool, "figures": _bool, "cache_dir": str,
}

KEYS = tuple(f.name for f in fields(ExperimentConfig))
assert set(KEYS) == set(_PARSERS)


def parse_pairs(pairs):
    """Typed values from a mapping of raw key/value strings; unknown keys raise."""
    out = {}
    for key, raw in pairs.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _PARSERS[key](raw) if isinstance(raw, str) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    return out


def read_config_text(text, source="<config>"):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return parse_pairs(pairs)


def load_config(path=None, overrides=None):
    """Config from an optional file, with ``overrides`` (already typed or raw) on top."""
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(read_config_text(fh.read(), str(path)))
    if overrides:
        values.update(parse_pairs({k: v for k, v in overrides.items() if v is not None}))
    return ExperimentConfig(**values)


def with_overrides(cfg, **kw):
    return replace(cfg, **parse_pairs(kw))
