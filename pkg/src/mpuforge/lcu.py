"""Linear combinations of unitaries for the merge operator, and rotation padding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import PreconditionError
from .isometry import CapPair, cap_inverse

SCHEMES = ("reflection", "fourier")


@dataclass(frozen=True)
class LcuDecomposition:
    unitaries: tuple[np.ndarray, ...]
    coefficients: np.ndarray

    @property
    def C(self) -> float:
        return float(np.sum(self.coefficients))

    @property
    def n_terms(self) -> int:
        return len(self.unitaries)

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    def reconstruct(self) -> np.ndarray:
        return sum(c * w for c, w in zip(self.coefficients, self.unitaries))


@dataclass(frozen=True)
class PaddingPlan:
    phases: tuple[float, ...]
    padded_C: float
    rotations: int

    @property
    def theta(self) -> float:
        return math.asin(1.0 / self.padded_C)

    @property
    def n_pads(self) -> int:
        return len(self.phases)


def merge_operator(caps: CapPair, tol: float = linalg.DEFAULT_TOL) -> np.ndarray:
    """``|00><w|`` on (right leg of the left block, left leg of the right block)."""
    return merge_operator_from(caps.R, caps.L, tol)


def merge_operator_from(R, L, tol: float = linalg.DEFAULT_TOL) -> np.ndarray:
    ri = cap_inverse(R, tol)
    li = cap_inverse(L, tol)
    # <w|a, b> = sum_m (R^-1)_{m a} (L^-1)_{m b}
    w = np.einsum("ma,mb->ab", ri, li).reshape(-1)
    m = np.zeros((w.size, w.size), dtype=complex)
    m[0] = w
    return m


def _proportional_to_unitary(m: np.ndarray, tol: float) -> float | None:
    g = m.conj().T @ m
    c2 = g[0, 0].real
    if c2 <= 0:
        return None
    if np.abs(g - c2 * np.eye(m.shape[0])).max() <= tol * c2:
        return math.sqrt(c2)
    return None


def lcu_decompose(m, scheme: str = "reflection", tol: float = 1e-12) -> LcuDecomposition:
    """Exact ``m = sum_i c_i W_i`` with ``sum_i c_i = ||m||_1``.

    Each SVD term ``s |u><v|`` is written ``s W_u |0><0| W_v^dagger``.  The projector
    ``|0><0|`` is expanded either as ``(1 + Z_0)/2`` with ``Z_0 = 2|0><0| - 1``
    (``reflection``, two terms) or as the average of the ``dim`` diagonal Fourier
    unitaries (``fourier``, ``dim`` terms).
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    a = linalg.as_cmatrix(m)
    n = a.shape[0]
    if a.shape[1] != n:
        raise linalg.ShapeError("LCU target must be square")
    if not np.any(a):
        raise PreconditionError("cannot decompose the zero matrix")
    c = _proportional_to_unitary(a, tol)
    if c is not None:
        return LcuDecomposition((a / c,), np.array([c]))

    res = linalg.svd(a)
    s = res.singular_values
    keep = s > tol * s[0]
    if scheme == "reflection":
        z0 = -np.eye(n, dtype=complex)
        z0[0, 0] = 1.0
        diags, weights = [np.eye(n, dtype=complex), z0], [0.5, 0.5]
    else:
        omega = np.exp(2j * np.pi * np.arange(n) / n)
        diags = [np.diag(omega**k) for k in range(n)]
        weights = [1.0 / n] * n
    units, coeffs = [], []
    for k in np.nonzero(keep)[0]:
        wu = linalg.complete_unitary(res.u[:, k])
        wv = linalg.complete_unitary(res.v[:, k])
        for dmat, wt in zip(diags, weights):
            units.append(wu @ dmat @ wv.conj().T)
            coeffs.append(s[k] * wt)
    return LcuDecomposition(tuple(units), np.array(coeffs))


def rotation_target(rotations: int) -> float:
    """Normalization ``C`` for which ``(2l+1) arcsin(1/C) = pi/2`` holds exactly."""
    return 1.0 / math.sin(math.pi / (2 * (2 * rotations + 1)))


def plan_padding(C: float, tol: float = 1e-12) -> PaddingPlan:
    """Smallest ``l``, then fewest pad qubits, lifting ``C`` onto an exact rotation target."""
    if C < 1 - tol:
        raise PreconditionError(f"LCU normalization {C} < 1")
    rotations = 0
    while rotation_target(rotations) < C * (1 - tol):
        rotations += 1
    target = rotation_target(rotations)
    ratio = target / C
    if ratio <= 1 + tol:
        return PaddingPlan((), target, rotations)
    # each pad contributes cos(phi) + sin(phi) = sqrt(2) sin(phi + pi/4) in [1, sqrt(2)]
    k = max(1, math.ceil(math.log(ratio) / math.log(math.sqrt(2)) - 1e-12))
    f = ratio ** (1.0 / k)
    phi = math.asin(min(f / math.sqrt(2), 1.0)) - math.pi / 4
    return PaddingPlan((phi,) * k, target, rotations)


def pad_factor(phi: float) -> np.ndarray:
    """``cos(phi) 1 + i sin(phi) Z``."""
    return np.diag([complex(math.cos(phi), math.sin(phi)), complex(math.cos(phi), -math.sin(phi))])
