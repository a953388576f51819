"""Shared domain types, pipeline configuration and the SplitMix64 generator."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class ConfigError(ValueError):
    """Raised when a PipelineConfig field is out of range."""


@dataclass
class ImageBuffer:
    """8-bit image stored as a (height, width, channels) uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"image must have 1 or 3 channels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got {arr.shape[1]}x{arr.shape[0]}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values must lie in 0..255")
            arr = arr.astype(np.uint8)
        self.data = np.ascontiguousarray(arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    @classmethod
    def from_bytes(cls, width: int, height: int, channels: int, payload: bytes) -> "ImageBuffer":
        expected = width * height * channels
        if len(payload) != expected:
            raise ValueError(f"expected {expected} bytes of pixel data, got {len(payload)}")
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
        return cls(arr.copy())

    def to_bytes(self) -> bytes:
        return self.data.tobytes()


@dataclass
class LabelMap:
    """Row-major region labels; 0 means unlabeled."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
        if arr.size and arr.min() < 0:
            raise ValueError("labels must be non-negative")
        self.labels = np.ascontiguousarray(arr, dtype=np.int64)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_regions(self) -> int:
        nz = self.labels[self.labels > 0]
        return int(np.unique(nz).size)

    def is_complete(self) -> bool:
        return bool(np.all(self.labels > 0))

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.labels.shape == other.labels.shape and np.array_equal(self.labels, other.labels)


# Fields constrained to [0, 1].
_UNIT_FIELDS = ("lambda_L", "lambda_U", "xi_c", "delta_t", "alpha", "chi_0", "shrink", "rate_min")
_POSITIVE_FIELDS = ("r", "theta_p", "sigma_w")
_COUNT_FIELDS = {"n_stall": 1, "m_max": 1, "ga_iters": 0}


@dataclass
class PipelineConfig:
    r: float = 9.0
    theta_p: float = 17.0
    sigma_w: float = 0.02
    lambda_U: float = 0.98
    lambda_L: float = 0.02
    xi_c: float = 0.6
    delta_t: float = 0.03
    alpha: float = 0.9
    chi_0: float = 0.5
    shrink: float = 0.98
    n_stall: int = 20
    m_max: int = 50
    rate_min: float = 0.01
    ga_iters: int = 10
    seed: int = 0
    d_max: float = 2.0
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> "PipelineConfig":
        for name in _POSITIVE_FIELDS:
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ConfigError(f"{name} must be > 0, got {v}")
        for name in _UNIT_FIELDS:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not self.lambda_L < self.lambda_U:
            raise ConfigError(
                f"lambda_L must be < lambda_U, got lambda_L={self.lambda_L}, lambda_U={self.lambda_U}"
            )
        for name, lo in _COUNT_FIELDS.items():
            v = getattr(self, name)
            if int(v) != v or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v}")
            setattr(self, name, int(v))
        if int(self.seed) != self.seed or not (0 <= self.seed <= MASK64):
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed}")
        self.seed = int(self.seed)
        if self.d_max < 0:
            raise ConfigError(f"d_max must be >= 0, got {self.d_max}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be an integer >= 1, got {self.workers}")
        self.workers = int(self.workers)
        return self

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def field_types(cls) -> Dict[str, type]:
        return {f.name: (int if f.type in ("int", int) else float) for f in dataclasses.fields(cls)}

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        types = cls.field_types()
        by_lower = {name.lower(): name for name in types}
        kwargs = {}
        for key, raw in values.items():
            name = by_lower.get(str(key).lower().replace("-", "_"))
            if name is None:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                kwargs[name] = _coerce(raw, types[name])
            except ValueError:
                raise ConfigError(f"{name} expects a {types[name].__name__}, got {raw!r}") from None
        return cls(**kwargs)


def _coerce(raw, typ):
    if typ is int:
        if isinstance(raw, str):
            return int(raw, 0)
        return int(raw)
    return float(raw)


@dataclass
class Rng:
    """SplitMix64 generator. Streams are bit-identical on every platform."""

    state: int = 0
    draws: int = field(default=0, compare=False)

    def __post_init__(self):
        self.state &= MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        self.draws += 1
        return z ^ (z >> 31)

    def next_unit(self) -> float:
        # 2^64 is a power of two, so the division is exact up to float rounding;
        # values within 2^-53 of 1 would round up, hence the clamp.
        u = self.next_u64() / 18446744073709551616.0
        return u if u < 1.0 else 0.9999999999999999


def rng_next_unit(rng: Rng) -> float:
    return rng.next_unit()
