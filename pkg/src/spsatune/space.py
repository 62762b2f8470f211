"""Tunable parameter spaces and the unit-cube mapping.

The optimizer works on a normalized point ``theta`` in ``[0, 1]^n``.  Each
coordinate is mapped to a raw system value by scaling it onto the
parameter's ``[min, max]`` range; integers are floored afterwards.

Booleans and categoricals are integer indices underneath (``{0, 1}`` and
category positions) but split the unit interval into ``k`` equal bins,
``index = floor(k * theta)``.  Flooring ``(k - 1) * theta`` instead would
reach the last value only at ``theta == 1`` exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError, NumericError, StructuralError

REAL = "real"
INTEGER = "integer"
BOOLEAN = "boolean"
CATEGORICAL = "categorical"
KINDS = (REAL, INTEGER, BOOLEAN, CATEGORICAL)

# relative slack when flooring, so that span * (v - min) / span + min lands on v
_FLOOR_EPS = 1e-9

AlgoPoint = np.ndarray


@dataclass(frozen=True)
class ParameterSpec:
    """One tunable knob.

    ``min``/``max``/``default`` are raw system units.  For booleans they are
    fixed to 0/1, for categoricals ``default`` is an index into
    ``categories``.  ``resolution`` is the smallest meaningful raw change;
    it is 1 for every integer-valued kind and defaults to a hundredth of
    the range for reals.
    """

    name: str
    kind: str
    min: float
    max: float
    default: float
    categories: tuple[str, ...] = ()
    resolution: float | None = None

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise StructuralError("parameter name must be a non-empty string")
        if self.kind not in KINDS:
            raise DomainError(f"{self.name}: unknown kind {self.kind!r}")
        for attr in ("min", "max", "default"):
            value = getattr(self, attr)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
                raise DomainError(f"{self.name}: {attr} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise NumericError(f"{self.name}: {attr} is not finite")
        if self.kind == BOOLEAN and (self.min, self.max) != (0, 1):
            raise DomainError(f"{self.name}: boolean bounds are fixed to [0, 1]")
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2:
                raise DomainError(f"{self.name}: categorical needs at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise DomainError(f"{self.name}: duplicate categories")
            if (self.min, self.max) != (0, len(self.categories) - 1):
                raise DomainError(f"{self.name}: categorical bounds must be [0, {len(self.categories) - 1}]")
        elif self.categories:
            raise DomainError(f"{self.name}: categories only apply to categorical kind")
        if not self.min < self.max:
            raise DomainError(f"{self.name}: min ({self.min}) must be strictly below max ({self.max})")
        if not self.min <= self.default <= self.max:
            raise DomainError(f"{self.name}: default {self.default} outside [{self.min}, {self.max}]")
        if self.is_integral:
            if float(self.min) != int(self.min) or float(self.max) != int(self.max):
                raise DomainError(f"{self.name}: integer bounds must be integral")
            if float(self.default) != int(self.default):
                raise DomainError(f"{self.name}: integer default must be integral")
            if self.resolution not in (None, 1, 1.0):
                raise DomainError(f"{self.name}: resolution of integer kinds is fixed to 1")
            object.__setattr__(self, "min", int(self.min))
            object.__setattr__(self, "max", int(self.max))
            object.__setattr__(self, "default", int(self.default))
            object.__setattr__(self, "resolution", 1.0)
        else:
            object.__setattr__(self, "min", float(self.min))
            object.__setattr__(self, "max", float(self.max))
            object.__setattr__(self, "default", float(self.default))
            if self.resolution is None:
                object.__setattr__(self, "resolution", self.span / 100.0)
            if not (0 < self.resolution <= self.span):
                raise DomainError(f"{self.name}: resolution must be in (0, max - min]")
            object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "categories", tuple(self.categories))

    # constructors -----------------------------------------------------------

    @classmethod
    def real(cls, name, min, max, default, resolution=None) -> "ParameterSpec":
        return cls(name, REAL, min, max, default, resolution=resolution)

    @classmethod
    def integer(cls, name, min, max, default) -> "ParameterSpec":
        return cls(name, INTEGER, min, max, default)

    @classmethod
    def boolean(cls, name, default=False) -> "ParameterSpec":
        return cls(name, BOOLEAN, 0, 1, int(bool(default)))

    @classmethod
    def categorical(cls, name, categories: Sequence[str], default: str | int = 0) -> "ParameterSpec":
        categories = tuple(categories)
        if isinstance(default, str):
            if default not in categories:
                raise DomainError(f"{name}: default {default!r} is not a category")
            default = categories.index(default)
        return cls(name, CATEGORICAL, 0, len(categories) - 1, default, categories=categories)

    # properties -------------------------------------------------------------

    @property
    def span(self) -> float:
        return self.max - self.min

    @property
    def is_integral(self) -> bool:
        return self.kind != REAL

    @property
    def is_binned(self) -> bool:
        return self.kind in (BOOLEAN, CATEGORICAL)

    @property
    def unit_step(self) -> float:
        """Normalized distance that moves the raw value by one unit."""
        return 1.0 / (self.span + 1) if self.is_binned else 1.0 / self.span

    def to_system(self, coord: float) -> int | float:
        """Map one normalized coordinate in [0, 1] to a raw value."""
        if self.is_binned:
            raw = (self.span + 1) * coord + self.min
        else:
            raw = self.span * coord + self.min
        if not self.is_integral:
            return min(max(raw, self.min), self.max)
        value = math.floor(raw + _FLOOR_EPS * max(1.0, abs(raw)))
        return int(min(max(value, self.min), self.max))

    def normalize(self, value: float) -> float:
        """Inverse of :meth:`to_system` on representable raw values.

        Binned kinds land at the start of their bin, so the last value
        sits at ``(k - 1) / k`` rather than at the cube boundary.
        """
        if self.is_binned:
            return (value - self.min) / (self.span + 1)
        return (value - self.min) / self.span

    def format_value(self, value) -> str:
        """Render a raw value the way external commands expect it."""
        if self.kind == BOOLEAN:
            return "true" if int(value) else "false"
        if self.kind == CATEGORICAL:
            return self.categories[int(value)]
        if self.kind == INTEGER:
            return str(int(value))
        return f"{float(value):.6g}"

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            d["categories"] = list(self.categories)
            d["default"] = self.categories[self.default]
            return d
        if self.kind == BOOLEAN:
            d["default"] = bool(self.default)
            return d
        d.update(min=self.min, max=self.max, default=self.default)
        if self.kind == REAL:
            d["resolution"] = self.resolution
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ParameterSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        name = d.pop("name", None)
        if kind == BOOLEAN:
            default = d.pop("default", False)
            _reject_extra(name, d)
            return cls.boolean(name, default)
        if kind == CATEGORICAL:
            categories = d.pop("categories", ())
            default = d.pop("default", 0)
            _reject_extra(name, d)
            return cls.categorical(name, categories, default)
        try:
            lo, hi, default = d.pop("min"), d.pop("max"), d.pop("default")
        except KeyError as exc:
            raise StructuralError(f"{name}: missing field {exc.args[0]!r}") from None
        resolution = d.pop("resolution", None)
        _reject_extra(name, d)
        return cls(name, kind, lo, hi, default, resolution=resolution)


def _reject_extra(name, d):
    if d:
        raise StructuralError(f"{name}: unknown field(s) {sorted(d)}")


@dataclass(frozen=True)
class SystemConfig:
    """Raw parameter values aligned with a :class:`ParameterSpace`."""

    names: tuple[str, ...]
    values: tuple

    def __getitem__(self, name: str):
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def get(self, name: str, default=None):
        return self.values[self.names.index(name)] if name in self.names else default

    def as_dict(self) -> dict[str, Any]:
        return dict(zip(self.names, self.values))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ParameterSpace:
    specs: tuple[ParameterSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __init__(self, specs: Iterable[ParameterSpec]):
        specs = tuple(specs)
        if not specs:
            raise StructuralError("a parameter space needs at least one parameter")
        names = [s.name for s in specs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise StructuralError(f"duplicate parameter names: {dupes}")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def n(self) -> int:
        return len(self.specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def __len__(self):
        return len(self.specs)

    def __iter__(self) -> Iterator[ParameterSpec]:
        return iter(self.specs)

    def __getitem__(self, key: int | str) -> ParameterSpec:
        if isinstance(key, str):
            return self.specs[self._index[key]]
        return self.specs[key]

    def index(self, name: str) -> int:
        return self._index[name]

    def replace(self, name: str, spec: ParameterSpec) -> "ParameterSpace":
        specs = list(self.specs)
        specs[self._index[name]] = spec
        return ParameterSpace(specs)

    def to_list(self) -> list[dict[str, Any]]:
        return [s.to_dict() for s in self.specs]

    @classmethod
    def from_list(cls, items: Sequence[dict[str, Any]]) -> "ParameterSpace":
        return cls(ParameterSpec.from_dict(d) for d in items)

    def fingerprint(self) -> str:
        """Stable hash of the declaration, used to match checkpoints to configs."""
        blob = json.dumps(self.to_list(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def config(self, values: Sequence) -> SystemConfig:
        if len(values) != self.n:
            raise StructuralError(f"expected {self.n} values, got {len(values)}")
        return SystemConfig(self.names, tuple(values))

    def default_config(self) -> SystemConfig:
        return self.config([s.default for s in self.specs])

    def validate_config(self, config: SystemConfig) -> None:
        if config.names != self.names:
            raise StructuralError("configuration does not match the parameter space")
        for spec, value in zip(self.specs, config.values):
            if not spec.min <= value <= spec.max:
                raise DomainError(f"{spec.name}: {value} outside [{spec.min}, {spec.max}]")
            if spec.is_integral and value != int(value):
                raise DomainError(f"{spec.name}: {value} is not integral")


def _as_point(point, n: int) -> np.ndarray:
    arr = np.asarray(point, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise StructuralError(f"expected a point of dimension {n}, got shape {arr.shape}")
    return arr


def map_to_system(point, space: ParameterSpace) -> SystemConfig:
    """Map a normalized point in the unit cube to raw system values."""
    theta = _as_point(point, space.n)
    if not np.all(np.isfinite(theta)):
        raise NumericError("point has non-finite coordinates")
    if np.any(theta < 0.0) or np.any(theta > 1.0):
        raise DomainError("point lies outside [0, 1]^n; project it first")
    return space.config([spec.to_system(float(c)) for spec, c in zip(space.specs, theta)])


def normalize(config: SystemConfig | Sequence, space: ParameterSpace) -> np.ndarray:
    """Normalized coordinates of raw values (no flooring involved)."""
    values = config.values if isinstance(config, SystemConfig) else tuple(config)
    if len(values) != space.n:
        raise StructuralError(f"expected {space.n} values, got {len(values)}")
    return np.array([spec.normalize(v) for spec, v in zip(space.specs, values)], dtype=float)


def map_default(space: ParameterSpace) -> np.ndarray:
    """Normalized coordinates of the space's default configuration."""
    return normalize(space.default_config(), space)


def project(point) -> np.ndarray:
    """Component-wise clamp onto the unit cube."""
    theta = np.asarray(point, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise NumericError("cannot project a point with non-finite coordinates")
    return np.clip(theta, 0.0, 1.0)
