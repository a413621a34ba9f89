import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpuforge import corpus, linalg
from mpuforge.corpus import TAU_E, TAU_SIGMA, ZETA, FusionElement
from mpuforge.errors import ValidationError
from mpuforge.mpu import MpoChain, UniformMpu, contract
from tests.oracles import lee_yang_coproduct as oracle

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def test_zeta_identity():
    assert ZETA**4 + ZETA**2 == pytest.approx(1.0, abs=1e-15)


def test_fusion_rules():
    assert (TAU_SIGMA * TAU_SIGMA).close_to(TAU_E + TAU_SIGMA)
    assert (TAU_E * TAU_SIGMA).close_to(TAU_SIGMA)
    p = corpus.lee_yang_projector()
    assert (p * p).close_to(p)
    assert (p * (TAU_E - p)).close_to(FusionElement(0, 0))


@given(angles, angles)
def test_unitary_element_is_unitary_in_the_algebra(alpha, beta):
    u = corpus.lee_yang_unitary_element(alpha, beta)
    assert (u * u.star()).close_to(TAU_E, 1e-12)


def test_fusion_algebra_oracle_is_consistent():
    assert oracle.homomorphism_defect() < 1e-12
    assert oracle.coassociativity_defect() < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_mpo_matches_coproduct_oracle(n):
    # two routes: transfer-tensor contraction versus iterated coproduct
    assert np.allclose(corpus.lee_yang_mpo("e", n), oracle.mpo(oracle.TAU_E, n), atol=1e-12)
    assert np.allclose(corpus.lee_yang_mpo("sigma", n), oracle.mpo(oracle.TAU_SIGMA, n), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_fusion_rules_hold_for_mpos(n):
    res = corpus.lee_yang_fusion_mpo_check(n)
    assert max(res.values()) < 1e-12


def test_inverse_zeta_coefficients_break_fusion():
    bad = corpus.lee_yang_tensor_sigma(ZETA**-2, -(ZETA**-2))
    assert corpus.lee_yang_fusion_mpo_check(2, bad)["sigma_sigma"] > 1.0


def test_fusion_check_is_size_limited():
    with pytest.raises(ValidationError):
        corpus.lee_yang_fusion_mpo_check(5)
    with pytest.raises(ValueError):
        corpus.lee_yang_mpo("x", 2)


@pytest.mark.parametrize("seed", range(10))
def test_lee_yang_mpus_are_unitary(seed):
    rng = np.random.default_rng(seed)
    alpha, beta = rng.uniform(-math.pi, math.pi, 2)
    ly = corpus.lee_yang_mpu(alpha, beta)
    for n in (2, 3):
        u = ly.contract(n)
        assert linalg.unitarity_residual(u) < 1e-10
        assert np.allclose(ly.open_form().contract(n), u, atol=1e-10)


def test_lee_yang_operator_matches_projector_form():
    ly = corpus.lee_yang_mpu(0.3, -1.1)
    u = ly.element
    for n in (2, 3):
        oe, os_ = corpus.lee_yang_mpo("e", n), corpus.lee_yang_mpo("sigma", n)
        # boundary diag(1, (c_e - 1) I_2, c_s I_3) gives 1 + (c_e - 1) O_e + c_s O_sigma
        expect = np.eye(5**n) + (u.coeff_e - 1) * oe + u.coeff_sigma * os_
        assert np.allclose(ly.contract(n), expect, atol=1e-12)


def test_multicontrol_z_target():
    u = corpus.multicontrol_z_target(3)
    assert np.allclose(u, np.diag([-1, 1, 1, 1, 1, 1, 1, 1]))
    assert np.allclose(corpus.mpu_multicontrol_z().contract(3), u)


@pytest.mark.parametrize(
    ("gate", "bond"),
    [
        (np.diag([1, 1, 1, -1]), 2),
        (np.eye(4)[[0, 2, 1, 3]], 4),
        (np.eye(4), 1),
    ],
)
def test_two_site_split(gate, bond):
    chain = corpus.mpu_from_two_site_unitary(gate)
    assert chain.bond_dims[1] == bond
    assert np.allclose(contract(chain), gate)


def test_two_site_split_rejects_bad_input():
    with pytest.raises(ValidationError):
        corpus.mpu_from_two_site_unitary(np.eye(4) * 2)
    with pytest.raises(ValidationError):
        corpus.mpu_from_two_site_unitary(np.eye(3))


def test_product_chain_and_conjugation():
    chain = corpus.random_product_chain(3, 2, seed=1)
    assert linalg.unitarity_residual(contract(chain)) < 1e-12
    p = corpus.perturbed_multicontrol_z(3, seed=0, site=1)
    assert linalg.unitarity_residual(contract(p)) < 1e-12
    assert not np.allclose(contract(p), corpus.multicontrol_z_target(3))
    with pytest.raises(ValidationError):
        corpus.mpu_product([np.ones((2, 2))])


def test_identity_rejects_trivial_dimension():
    with pytest.raises(ValidationError):
        corpus.mpu_identity(1)


@pytest.mark.parametrize("name", corpus.UNIFORM_NAMES + corpus.CHAIN_NAMES)
def test_registry(name):
    obj = corpus.corpus_entry(name, 2)
    if name in corpus.UNIFORM_NAMES:
        assert isinstance(obj, UniformMpu)
    else:
        assert isinstance(obj, MpoChain) and obj.n_sites == 2


def test_registry_rejects_unknown_name():
    with pytest.raises(ValidationError):
        corpus.corpus_entry("nope")
