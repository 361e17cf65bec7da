"""Shared base for immutable pydantic models that carry numpy arrays."""

from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


class ArrayModel(BaseModel):
    """Frozen model allowing ``numpy.ndarray`` fields.

    Arrays are copied to float64 and marked read-only on validation, so
    instances behave as values and can be shared between threads.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def frozen_array(value: Any, *, ndim: int, name: str) -> np.ndarray:
    """Validate ``value`` as a finite float array of rank ``ndim``."""
    arr = np.array(value, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def frozen_index_array(value: Any, *, ndim: int, name: str) -> np.ndarray:
    """Validate ``value`` as a nonnegative integer array of rank ``ndim``."""
    arr = np.array(value, dtype=np.int64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got {arr.ndim}")
    if arr.size and arr.min() < 0:
        raise ValueError(f"{name} must be nonnegative")
    arr.setflags(write=False)
    return arr
