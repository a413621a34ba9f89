"""Exception hierarchy and process-wide resource limits."""

from __future__ import annotations

import os

DEFAULT_DIM_CAP = 4096
DEFAULT_STATE_CAP = 2**22


class MpuForgeError(Exception):
    """Base class; ``exit_code`` is the CLI status reported for the error."""

    exit_code = 1


class ValidationError(MpuForgeError, ValueError):
    exit_code = 2


class ResourceError(MpuForgeError):
    exit_code = 3


class UnsupportedMpuError(MpuForgeError):
    """The uniform compiler path cannot handle this MPU (Assumption 1 fails)."""

    exit_code = 4


def dim_cap() -> int:
    """Dense-dimension cap, overridable through ``MPUFORGE_DIM_CAP``."""
    raw = os.environ.get("MPUFORGE_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"MPUFORGE_DIM_CAP must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise ValidationError("MPUFORGE_DIM_CAP must be positive")
    return value


class PreconditionError(ValidationError):
    """An operation was called on inputs violating its documented precondition."""
