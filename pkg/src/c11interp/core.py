"""Core domain types: points, jets, 1-fields, and validated problem data.

All types are immutable after construction (numpy arrays are stored with
``writeable=False``), so instances are safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Base class for input validation failures."""


class DuplicateSiteError(ValidationError):
    def __init__(self, i: int, j: int):
        super().__init__(f"sites {i} and {j} have identical coordinates")
        self.pair = (i, j)


class DimensionMismatchError(ValidationError):
    pass


class NonFiniteEntryError(ValidationError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Jet:
    """A first-order polynomial attached to a base site: value and gradient."""

    value: float
    gradient: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gradient", _frozen(np.atleast_1d(self.gradient)))


def jet_eval(jet: Jet, base: np.ndarray, x: np.ndarray) -> float:
    """Evaluate the first-order polynomial of ``jet`` based at ``base``."""
    base = np.asarray(base, dtype=float)
    x = np.asarray(x, dtype=float)
    if base.shape != x.shape or jet.gradient.shape != base.shape:
        raise DimensionMismatchError(
            f"jet/base/x dimensions disagree: {jet.gradient.shape}, {base.shape}, {x.shape}"
        )
    return float(jet.value + jet.gradient @ (x - base))


@dataclass(frozen=True)
class OneField:
    """Finite collection of sites with a first-order jet at every site."""

    sites: np.ndarray      # (N, d)
    values: np.ndarray     # (N,)
    gradients: np.ndarray  # (N, d)

    def __post_init__(self):
        object.__setattr__(self, "sites", _frozen(np.atleast_2d(self.sites)))
        object.__setattr__(self, "values", _frozen(np.atleast_1d(self.values)))
        object.__setattr__(self, "gradients", _frozen(np.atleast_2d(self.gradients)))

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    @property
    def num_sites(self) -> int:
        return self.sites.shape[0]

    def jet(self, k: int) -> Jet:
        return Jet(float(self.values[k]), self.gradients[k])


@dataclass(frozen=True)
class FunctionData:
    """Sites with function values only (gradients to be solved for)."""

    sites: np.ndarray   # (N, d)
    values: np.ndarray  # (N,)

    def __post_init__(self):
        object.__setattr__(self, "sites", _frozen(np.atleast_2d(self.sites)))
        object.__setattr__(self, "values", _frozen(np.atleast_1d(self.values)))

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    @property
    def num_sites(self) -> int:
        return self.sites.shape[0]


def _check_sites(sites: np.ndarray) -> None:
    if sites.ndim != 2 or sites.shape[0] < 1:
        raise DimensionMismatchError("sites must be a non-empty (N, d) array")
    if not np.all(np.isfinite(sites)):
        raise NonFiniteEntryError("site coordinates must be finite")
    # Exact coordinate equality only: near-duplicates are legal input.
    seen: dict[bytes, int] = {}
    for i, row in enumerate(sites):
        key = row.tobytes()
        if key in seen:
            raise DuplicateSiteError(seen[key], i)
        seen[key] = i


def validate(field: OneField | FunctionData) -> None:
    """Check invariants; raises the first violation found."""
    sites = field.sites
    _check_sites(sites)
    n, d = sites.shape
    if field.values.shape != (n,):
        raise DimensionMismatchError(f"expected {n} values, got {field.values.shape}")
    if not np.all(np.isfinite(field.values)):
        raise NonFiniteEntryError("values must be finite")
    if isinstance(field, OneField):
        if field.gradients.shape != (n, d):
            raise DimensionMismatchError(
                f"expected gradients of shape {(n, d)}, got {field.gradients.shape}"
            )
        if not np.all(np.isfinite(field.gradients)):
            raise NonFiniteEntryError("gradients must be finite")
