"""Deterministic log-depth circuits for matrix-product unitaries."""

from .compiler import CompileOptions, CompileResult, compile_mpu, compile_nonuniform, compile_uniform
from .errors import MpuForgeError, PreconditionError, ResourceError, UnsupportedMpuError, ValidationError
from .mpu import MpoChain, UniformMpu

__all__ = [
    "CompileOptions",
    "CompileResult",
    "MpoChain",
    "MpuForgeError",
    "PreconditionError",
    "ResourceError",
    "UniformMpu",
    "UnsupportedMpuError",
    "ValidationError",
    "compile_mpu",
    "compile_nonuniform",
    "compile_uniform",
]

__version__ = "0.1.0"
