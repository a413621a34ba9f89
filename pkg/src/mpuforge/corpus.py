"""Generator MPUs with known dense targets.

Lee-Yang physical levels ``0..4``: levels ``0, 1`` carry the 2x2 matrix block of the
algebra and levels ``2, 3, 4`` the 3x3 block.  Bond ``0`` of the bulk tensor is the
identity sector, bonds ``1, 2`` the ``e`` sector and bonds ``3, 4, 5`` the ``sigma``
sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ValidationError
from .mpu import MpoChain, UniformMpu, boundary_to_open, traced_contract

ZETA = math.sqrt((math.sqrt(5.0) - 1.0) / 2.0)


# -- simple generators ---------------------------------------------------------------


def mpu_identity(d: int = 2) -> UniformMpu:
    if d < 2:
        raise ValidationError("physical dimension must be at least 2")
    a = np.eye(d, dtype=complex).reshape(d, d, 1, 1)
    return UniformMpu(a, [1.0], [1.0], name="identity")


def _require_unitary(u, tol: float = 1e-10) -> np.ndarray:
    m = linalg.as_cmatrix(u)
    if m.shape[0] != m.shape[1] or linalg.unitarity_residual(m) > tol:
        raise ValidationError("input matrix is not unitary")
    return m


def mpu_product(units) -> MpoChain:
    tensors = [_require_unitary(u)[:, :, None, None] for u in units]
    return MpoChain(tensors, [1.0], [1.0])


def mpu_multicontrol_z() -> UniformMpu:
    """``A^{ij} = diag(delta_ij, delta_ij delta_i0)``, ``l = (1, -2)``, ``r = (1, 1)``."""
    a = np.zeros((2, 2, 2, 2), dtype=complex)
    for i in range(2):
        a[i, i, 0, 0] = 1.0
    a[0, 0, 1, 1] = 1.0
    return UniformMpu(a, [1.0, -2.0], [1.0, 1.0], name="multicontrol-z")


def multicontrol_z_target(n_sites: int) -> np.ndarray:
    u = np.eye(2**n_sites, dtype=complex)
    u[0, 0] = -1.0
    return u


def mpu_redundant_bond() -> UniformMpu:
    """Multi-control-Z with a third bond state that the boundaries never reach."""
    base = mpu_multicontrol_z()
    a = np.zeros((2, 2, 3, 3), dtype=complex)
    a[:, :, :2, :2] = base.bulk
    a[:, :, 2, 2] = np.eye(2)
    return UniformMpu(a, [1.0, -2.0, 0.0], [1.0, 1.0, 0.0], name="redundant-bond")


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def conjugate_site(chain: MpoChain, site: int, u) -> MpoChain:
    """Replace site ``site`` (0-based) tensor ``A^{ij}`` by ``(u A u^dagger)^{ij}``."""
    u = _require_unitary(u)
    tensors = list(chain.tensors)
    tensors[site] = np.einsum("ia,abmn,jb->ijmn", u, tensors[site], u.conj())
    return MpoChain(tensors, chain.left, chain.right)


def perturbed_multicontrol_z(n_sites: int, seed: int = 0, site: int | None = None) -> MpoChain:
    rng = np.random.default_rng(seed)
    chain = mpu_multicontrol_z().chain(n_sites)
    k = int(rng.integers(n_sites)) if site is None else site
    return conjugate_site(chain, k, random_unitary(2, rng))


def random_product_chain(n_sites: int, d: int = 2, seed: int = 0) -> MpoChain:
    rng = np.random.default_rng(seed)
    return mpu_product([random_unitary(d, rng) for _ in range(n_sites)])


def mpu_from_two_site_unitary(u, d: int | None = None, tol: float = 1e-12) -> MpoChain:
    """Exact two-site chain from an operator-Schmidt (SVD) split of ``u``."""
    m = _require_unitary(u)
    d = d or math.isqrt(m.shape[0])
    if d * d != m.shape[0]:
        raise ValidationError("two-site unitary must have dimension d^2")
    t = m.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    res = linalg.svd(t)
    keep = int(np.count_nonzero(res.singular_values > tol * res.singular_values[0]))
    s = np.sqrt(res.singular_values[:keep])
    a1 = (res.u[:, :keep] * s).reshape(d, d, 1, keep)
    a2 = (s[:, None] * res.v[:, :keep].conj().T).reshape(keep, d, d).transpose(1, 2, 0)[:, :, :, None]
    return MpoChain([a1, a2], [1.0], [1.0])


def random_two_site_chain(d: int = 2, seed: int = 0) -> MpoChain:
    return mpu_from_two_site_unitary(random_unitary(d * d, np.random.default_rng(seed)), d)


# -- fusion algebra ----------------------------------------------------------------------


@dataclass(frozen=True)
class FusionElement:
    """``coeff_e tau_e + coeff_sigma tau_sigma`` in the Lee-Yang fusion algebra."""

    coeff_e: complex
    coeff_sigma: complex

    def __add__(self, other: FusionElement) -> FusionElement:
        return FusionElement(self.coeff_e + other.coeff_e, self.coeff_sigma + other.coeff_sigma)

    def __sub__(self, other: FusionElement) -> FusionElement:
        return FusionElement(self.coeff_e - other.coeff_e, self.coeff_sigma - other.coeff_sigma)

    def __mul__(self, other):
        if isinstance(other, FusionElement):
            a, b = self.coeff_e, self.coeff_sigma
            c, d = other.coeff_e, other.coeff_sigma
            # tau_e is the unit; tau_sigma^2 = tau_e + tau_sigma
            return FusionElement(a * c + b * d, a * d + b * c + b * d)
        return FusionElement(self.coeff_e * other, self.coeff_sigma * other)

    __rmul__ = __mul__

    def star(self) -> FusionElement:
        return FusionElement(np.conj(self.coeff_e), np.conj(self.coeff_sigma))

    def close_to(self, other: FusionElement, tol: float = 1e-12) -> bool:
        return abs(self.coeff_e - other.coeff_e) <= tol and abs(self.coeff_sigma - other.coeff_sigma) <= tol


TAU_E = FusionElement(1.0, 0.0)
TAU_SIGMA = FusionElement(0.0, 1.0)


def lee_yang_projector() -> FusionElement:
    """``p = (zeta^2 tau_e + tau_sigma) / sqrt(5)``."""
    return FusionElement(ZETA**2 / math.sqrt(5), 1.0 / math.sqrt(5))


def lee_yang_unitary_element(alpha: float, beta: float) -> FusionElement:
    """``u = e^{i alpha} p + e^{i beta} (tau_e - p)``."""
    p = lee_yang_projector()
    return p * np.exp(1j * alpha) + (TAU_E - p) * np.exp(1j * beta)


# -- Lee-Yang tensors --------------------------------------------------------------------


def _unit(i: int, j: int) -> np.ndarray:
    m = np.zeros((5, 5), dtype=complex)
    m[i - 1, j - 1] = 1.0
    return m


def lee_yang_tensor_e() -> np.ndarray:
    a = np.zeros((5, 5, 2, 2), dtype=complex)
    a[:, :, 0, 0] = _unit(1, 1)
    a[:, :, 1, 1] = _unit(2, 2) + _unit(5, 5)
    a[:, :, 0, 1] = _unit(3, 3)
    a[:, :, 1, 0] = _unit(4, 4)
    return a


def lee_yang_tensor_sigma(c21: float = ZETA**2, c33: float = -(ZETA**2)) -> np.ndarray:
    """The ``sigma`` tensor; ``c21`` and ``c33`` are the coefficients of ``|4><3|`` at bond
    ``(2,1)`` and of ``|5><5|`` at bond ``(3,3)`` (1-based labels)."""
    a = np.zeros((5, 5, 3, 3), dtype=complex)
    z = ZETA
    a[:, :, 0, 0] = _unit(1, 2)
    a[:, :, 1, 1] = _unit(2, 1)
    a[:, :, 0, 1] = _unit(3, 4)
    a[:, :, 1, 0] = c21 * _unit(4, 3)
    a[:, :, 0, 2] = _unit(3, 5)
    a[:, :, 2, 0] = z * _unit(4, 5)
    a[:, :, 1, 2] = z * _unit(5, 3)
    a[:, :, 2, 1] = _unit(5, 4)
    a[:, :, 2, 2] = _unit(2, 2) + c33 * _unit(5, 5)
    return a


@dataclass(frozen=True)
class LeeYangMpu:
    alpha: float
    beta: float
    bulk: np.ndarray
    boundary: np.ndarray

    @property
    def element(self) -> FusionElement:
        return lee_yang_unitary_element(self.alpha, self.beta)

    def as_uniform(self) -> UniformMpu:
        return UniformMpu(self.bulk, boundary_op=self.boundary, name="lee-yang")

    def open_form(self) -> UniformMpu:
        return boundary_to_open(self.as_uniform(), block_diagonal=True)

    def contract(self, n_sites: int) -> np.ndarray:
        return traced_contract(self.bulk, self.boundary, n_sites)


def lee_yang_mpu(alpha: float, beta: float) -> LeeYangMpu:
    u = lee_yang_unitary_element(alpha, beta)
    a = np.zeros((5, 5, 6, 6), dtype=complex)
    a[:, :, 0, 0] = np.eye(5)
    a[:, :, 1:3, 1:3] = lee_yang_tensor_e()
    a[:, :, 3:6, 3:6] = lee_yang_tensor_sigma()
    b = np.diag([1.0] + [u.coeff_e - 1.0] * 2 + [u.coeff_sigma] * 3).astype(complex)
    return LeeYangMpu(float(alpha), float(beta), a, b)


def lee_yang_mpo(kind: str, n_sites: int, sigma_tensor: np.ndarray | None = None) -> np.ndarray:
    """Dense ``O_e`` or ``O_sigma`` with the identity boundary, via the open-boundary form."""
    if kind == "e":
        a = lee_yang_tensor_e()
    elif kind == "sigma":
        a = lee_yang_tensor_sigma() if sigma_tensor is None else sigma_tensor
    else:
        raise ValueError(f"unknown sector {kind!r}")
    D = a.shape[2]
    return boundary_to_open(UniformMpu(a, boundary_op=np.eye(D))).contract(n_sites)


def lee_yang_fusion_mpo_check(n_sites: int, sigma_tensor: np.ndarray | None = None) -> dict[str, float]:
    """Residuals of the fusion rules realized by the dense MPOs."""
    if n_sites > 4:
        raise ValidationError("fusion check limited to N <= 4")
    oe = lee_yang_mpo("e", n_sites)
    os_ = lee_yang_mpo("sigma", n_sites, sigma_tensor)
    return {
        "sigma_sigma": float(np.abs(os_ @ os_ - oe - os_).max()),
        "e_e": float(np.abs(oe @ oe - oe).max()),
        "e_sigma": float(np.abs(oe @ os_ - os_).max()),
    }


# -- registry ------------------------------------------------------------------------------

UNIFORM_NAMES = ("identity", "multicontrol-z", "lee-yang", "redundant-bond")
CHAIN_NAMES = ("product", "perturbed-multicontrol-z", "two-site-random")


def corpus_entry(name: str, n_sites: int = 2, seed: int = 0, alpha: float = math.pi / 2, beta: float = 0.0):
    """Corpus instance by name: a :class:`UniformMpu` or, for chain entries, an :class:`MpoChain`."""
    if name == "identity":
        return mpu_identity(2)
    if name == "multicontrol-z":
        return mpu_multicontrol_z()
    if name == "lee-yang":
        return lee_yang_mpu(alpha, beta).open_form()
    if name == "redundant-bond":
        return mpu_redundant_bond()
    if name == "product":
        return random_product_chain(n_sites, seed=seed)
    if name == "perturbed-multicontrol-z":
        return perturbed_multicontrol_z(n_sites, seed=seed)
    if name == "two-site-random":
        return random_two_site_chain(seed=seed)
    raise ValidationError(f"unknown corpus entry {name!r}; choose from {UNIFORM_NAMES + CHAIN_NAMES}")
