import math

import numpy as np
import pytest

from mpuforge import circuit as ir
from mpuforge import corpus, linalg
from mpuforge.compiler import (
    CompileOptions,
    as_uniform,
    compile_mpu,
    compile_nonuniform,
    compile_uniform,
    depth_scaling_report,
    equivalence,
    leaf_dilation,
)
from mpuforge.errors import UnsupportedMpuError, ValidationError
from mpuforge.mpu import MpoChain, UniformMpu, contract

# frozen from tests/oracles/derive_frozen.py (closed depth recurrence)
MCZ_DEPTHS = {2: 17, 4: 74, 8: 266, 16: 866, 32: 2714, 64: 8354}


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_multicontrol_z_is_exact(n):
    res = compile_uniform(corpus.mpu_multicontrol_z(), n)
    metric, leak = equivalence(res, corpus.multicontrol_z_target(n))
    assert metric < 1e-10
    assert leak < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
def test_identity_is_exact_without_rotations(n):
    res = compile_uniform(corpus.mpu_identity(2), n)
    metric, leak = equivalence(res, np.eye(2**n))
    assert metric < 1e-10 and leak < 1e-10
    assert all(rec.rotations == 0 for rec in res.merges)


def test_product_mpu_is_exact():
    u = corpus.random_unitary(2, np.random.default_rng(3))
    res = compile_mpu(corpus.mpu_product([u, u, u]), opts=CompileOptions(mode="uniform"))
    metric, _ = equivalence(res, np.kron(np.kron(u, u), u))
    assert metric < 1e-10


@pytest.mark.parametrize(
    "chain",
    [
        lambda: corpus.perturbed_multicontrol_z(3, seed=1, site=1),
        lambda: corpus.perturbed_multicontrol_z(4, seed=2, site=2),
        lambda: corpus.random_product_chain(3, 2, seed=4),
        lambda: corpus.random_two_site_chain(2, seed=5),
    ],
)
def test_nonuniform_chains_are_exact(chain):
    c = chain()
    res = compile_nonuniform(c)
    metric, leak = equivalence(res, contract(c))
    assert metric < 1e-10
    assert leak < 1e-10
    assert res.q_report["q"] <= res.q_report["bound"] + 1e-9


def test_redundant_bond_is_rejected():
    with pytest.raises(UnsupportedMpuError):
        compile_uniform(corpus.mpu_redundant_bond(), 3, CompileOptions(blocking_m=1))


def test_non_unitary_input_is_rejected():
    a = np.zeros((2, 2, 1, 1), dtype=complex)
    a[0, 0] = a[0, 1] = 1
    with pytest.raises(ValidationError):
        compile_uniform(UniformMpu(a, np.ones(1), np.ones(1)), 3)
    with pytest.raises(ValidationError):
        compile_nonuniform(MpoChain([a, a], np.ones(1), np.ones(1)))


def test_options_validate():
    with pytest.raises(ValidationError):
        CompileOptions(mode="fast")
    with pytest.raises(ValidationError):
        CompileOptions(blocking_m=0)
    with pytest.raises(ValidationError):
        compile_uniform(corpus.mpu_identity(2), 0)


def test_leaf_dilation_places_isometry_columns():
    rng = np.random.default_rng(0)
    v = corpus.random_unitary(8, rng)[:, :2]
    u = leaf_dilation(v, 2, 4)
    assert linalg.unitarity_residual(u) < 1e-12
    assert np.allclose(u[:, [0, 4]], v)
    with pytest.raises(ValidationError):
        leaf_dilation(v, 2, 3)


def test_register_layout():
    n = 4
    res = compile_uniform(corpus.mpu_multicontrol_z(), n)
    kinds = [r.kind for r in res.circuit.registers]
    assert kinds.count("physical") == n
    assert kinds.count("bond") == 2 * n
    assert kinds.count("lcu_ancilla") == n - 1
    assert kinds.count("pad") == 0
    assert len(res.depth.per_level) == math.ceil(math.log2(n)) + 1
    ids = [r.id for r in res.circuit.registers]
    assert len(ids) == len(set(ids))


@pytest.mark.parametrize("n", sorted(MCZ_DEPTHS))
def test_frozen_multicontrol_z_depths(n):
    assert compile_uniform(corpus.mpu_multicontrol_z(), n).depth.depth == MCZ_DEPTHS[n]


def test_depth_scaling_report_rows():
    rep = depth_scaling_report(corpus.mpu_multicontrol_z(), [2, 4, 8])
    assert rep.q == pytest.approx(2.0)
    assert rep.exponent == pytest.approx(2.0)
    assert [r.depth for r in rep.rows] == [MCZ_DEPTHS[n] for n in (2, 4, 8)]
    assert rep.rows[1].ratio == pytest.approx(74 / 16)
    assert rep.bounded(rep.spread)


def test_dispatch_and_uniform_recognition():
    mpu = corpus.mpu_multicontrol_z()
    chain = mpu.chain(3)
    assert isinstance(as_uniform(chain), UniformMpu) or as_uniform(chain) is None
    a = compile_mpu(mpu, 3)
    b = compile_mpu(mpu, 3, CompileOptions(mode="nonuniform"))
    assert a.circuit.metadata["mode"] == "uniform"
    assert b.circuit.metadata["mode"] == "nonuniform"
    target = corpus.multicontrol_z_target(3)
    assert equivalence(b, target)[0] < 1e-10
    perturbed = corpus.perturbed_multicontrol_z(3, seed=1, site=1)
    assert as_uniform(perturbed) is None
    with pytest.raises(ValidationError):
        compile_mpu(perturbed, opts=CompileOptions(mode="uniform"))


def test_fourier_scheme_is_also_exact():
    res = compile_uniform(corpus.mpu_multicontrol_z(), 3, CompileOptions(lcu_scheme="fourier"))
    assert equivalence(res, corpus.multicontrol_z_target(3))[0] < 1e-10


def test_circuit_inverse_undoes_compiled_block():
    res = compile_uniform(corpus.mpu_multicontrol_z(), 2)
    order = res.circuit.registers
    u = ir.to_unitary(res.circuit.root, order)
    assert linalg.unitarity_residual(u) < 1e-10


@pytest.mark.slow
def test_lee_yang_two_sites_is_exact():
    ly = corpus.lee_yang_mpu(math.pi / 2, 0.0)
    res = compile_uniform(ly.open_form(), 2)
    assert res.q_report["blocking_m"] == 2
    assert equivalence(res, ly.contract(2))[0] < 1e-10
