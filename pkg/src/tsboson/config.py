"""Experiment configuration files and the shipped presets."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError

# reference 3-photon run rate: 83455 heralded events in 50000 s
REFERENCE_RATE_HZ = 83455 / 50000


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    # matrix
    matrix_source: str = "haar"
    m: int = 4
    amplitudes_file: str | None = None
    phases_file: str | None = None
    inputs: list = field(default_factory=lambda: [0, 1])
    # source
    rate_hz: float = 1000.0
    duration_s: float = 1.0
    efficiency: float | list | None = None
    # time-tag stage
    tofs: bool = True
    window_ps: int = 2000
    window_anchor: str = "trigger"
    delays_ps: dict = field(default_factory=dict)
    jitter_ps: float = 0.0
    dark_rate_hz: float = 0.0
    calibrate: bool = True
    calibration_fallback: str = "error"
    scan_range_ps: int = 1000
    scan_step_ps: int = 50
    # reconstruction
    n_o: int = 5
    n_o_scan: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    filter: bool = True
    band_factor: float = 2.0
    timestamp_mode: str = "mean-interval"
    bins: int = 100
    fixed_outcome: list | None = None
    # validation
    validation: list = field(default_factory=lambda: ["row-norm", "likelihood-ratio"])
    # resource estimate
    advantage_n: list = field(default_factory=lambda: [15, 25])
    advantage_eta: list = field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    pump_rate_hz: float = 76e6
    speedup: float = 100.0
    output_dir: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def n(self):
        return len(self.inputs)

    @property
    def duration_ps(self):
        return int(round(self.duration_s * 1e12))

    def validate(self):
        if self.matrix_source not in ("haar", "characterization"):
            raise ConfigError(f"matrix_source must be 'haar' or 'characterization', got {self.matrix_source!r}")
        if self.matrix_source == "characterization" and not (self.amplitudes_file and self.phases_file):
            raise ConfigError("characterization source needs amplitudes_file and phases_file")
        if not self.inputs or len(set(self.inputs)) != len(self.inputs):
            raise ConfigError("inputs must be a non-empty list of distinct modes")
        if self.matrix_source == "haar" and not self.n <= self.m:
            raise ConfigError(f"{self.n} inputs do not fit in m={self.m} modes")
        if self.matrix_source == "haar" and max(self.inputs) >= self.m:
            raise ConfigError("input mode out of range")
        if not self.rate_hz > 0 or not self.duration_s > 0:
            raise ConfigError("rate_hz and duration_s must be positive")
        if self.n_o is not None and self.n_o < 1:
            raise ConfigError("n_o must be >= 1")
        if self.window_anchor not in ("trigger", "centered"):
            raise ConfigError("window_anchor must be 'trigger' or 'centered'")
        if self.calibration_fallback not in ("error", "declared"):
            raise ConfigError("calibration_fallback must be 'error' or 'declared'")
        unknown = set(self.validation) - {"row-norm", "likelihood-ratio"}
        if unknown:
            raise ConfigError(f"unknown validation test(s) {sorted(unknown)}")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")

    def to_dict(self):
        d = asdict(self)
        d["delays_ps"] = {int(k): int(v) for k, v in self.delays_ps.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config key(s): {sorted(extra)}")
        d = copy.deepcopy(d)
        if "delays_ps" in d and d["delays_ps"] is not None:
            d["delays_ps"] = {int(k): int(v) for k, v in d["delays_ps"].items()}
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def dump(self, path=None):
        text = yaml.safe_dump(self.to_dict(), sort_keys=False)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def load(cls, path):
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data)

    def digest(self):
        """SHA-256 of the canonical JSON form (output_dir excluded)."""
        d = self.to_dict()
        d.pop("output_dir", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _reference_scale(**kw):
    base = dict(m=30, inputs=[0, 1, 2], rate_hz=REFERENCE_RATE_HZ, tofs=False, n_o=5)
    base.update(kw)
    return base


PRESETS = {
    "minimal": dict(name="minimal", m=4, inputs=[0, 1], rate_hz=1000.0, duration_s=1.0,
                    n_o=1, n_o_scan=[1, 2, 3], bins=10, tofs=True,
                    delays_ps={1: 100, 2: 250, 3: 400, 4: 150}, advantage_n=[15, 20]),
    "fig3b": _reference_scale(name="fig3b", duration_s=50000.0, bins=6000),
    "fig3c": _reference_scale(name="fig3c", duration_s=1.2e6 / REFERENCE_RATE_HZ, bins=6000),
    "fig3de": _reference_scale(name="fig3de", rate_hz=358 / 360000.0, duration_s=360000.0,
                           n_o=1, n_o_scan=[1], bins=100, tofs=True,
                           calibration_fallback="declared",
                           delays_ps={k: 100 + 50 * (k % 8) for k in range(1, 31)}),
    "fig4": _reference_scale(name="fig4", duration_s=50000.0, n_o_scan=list(range(1, 11)),
                         bins=6000),
    "fig5": dict(name="fig5", m=4, inputs=[0, 1], rate_hz=1000.0, duration_s=1.0, n_o=1,
                 n_o_scan=[1], tofs=False, advantage_n=[15, 30]),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[name])
    d.update(overrides)
    return ExperimentConfig.from_dict(d)
