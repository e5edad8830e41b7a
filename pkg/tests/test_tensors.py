import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from slipflow.tensors import (
    SymTensor,
    inner,
    norm,
    packed_weights,
    random_sym_tensor,
    symmetrize,
)

square = lambda n: arrays(
    np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False)
)


def test_identity_trace():
    assert inner(SymTensor.identity(3), SymTensor.identity(3)) == 3.0
    assert norm(SymTensor.identity(2)) == pytest.approx(np.sqrt(2.0), rel=1e-15)


def test_zero_tensor():
    z = SymTensor.zero(3)
    assert inner(SymTensor.identity(3), z) == 0.0
    assert norm(z) == 0.0


def test_offdiagonal_pair_counts_twice():
    a = SymTensor(3, np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]))
    b = SymTensor(3, np.array([0.0, 2.0, 0.0, 0.0, 0.0, 0.0]))
    assert inner(a, b) == 4.0


def test_norm_single_offdiagonal_entry():
    a = SymTensor(3, np.array([0.0, 0.0, 0.5, 0.0, 0.0, 0.0]))
    assert norm(a) == pytest.approx(np.sqrt(0.5), rel=1e-14)
    assert norm(a) == pytest.approx(0.70711, abs=5e-6)


def test_symmetrize_shear_flow():
    # u = (x3, 0, 0): the only strain entries are D13 = D31 = 1/2
    j = np.zeros((3, 3))
    j[0, 2] = 1.0
    d = symmetrize(j)
    assert d[0, 2] == 0.5
    assert d[2, 0] == 0.5
    assert norm(d) == pytest.approx(np.sqrt(2.0) / 2.0, rel=1e-14)


def test_symmetrize_fixed_point_and_rotation():
    eye = np.eye(3)
    assert np.array_equal(symmetrize(eye).to_matrix(), eye)
    skew = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert norm(symmetrize(skew)) == 0.0


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        inner(SymTensor.identity(2), SymTensor.identity(3))


def test_from_matrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        SymTensor.from_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_inner_bilinear_symmetric_bulk(rng):
    # 1e4 random pairs, relative error <= 1e-12
    n = 3
    k = n * (n + 1) // 2
    w = packed_weights(n)
    a = rng.standard_normal((10_000, k))
    b = rng.standard_normal((10_000, k))
    c = rng.standard_normal((10_000, k))
    al, be = 0.73, -1.91
    lhs = np.einsum("k,nk,nk->n", w, al * a + be * c, b)
    rhs = al * np.einsum("k,nk,nk->n", w, a, b) + be * np.einsum("k,nk,nk->n", w, c, b)
    scale = np.maximum(np.abs(lhs), np.abs(rhs)) + 1e-30
    assert np.max(np.abs(lhs - rhs) / scale) <= 1e-12
    sym_gap = np.einsum("k,nk,nk->n", w, a, b) - np.einsum("k,nk,nk->n", w, b, a)
    assert np.max(np.abs(sym_gap)) == 0.0


@settings(max_examples=60, deadline=None)
@given(j=square(3))
def test_symmetrize_contractive(j):
    assert norm(symmetrize(j)) <= np.linalg.norm(j) + 1e-12


@settings(max_examples=60, deadline=None)
@given(j=square(2))
def test_symmetrize_idempotent_exactly(j):
    once = symmetrize(j)
    twice = symmetrize(once.to_matrix())
    assert np.array_equal(once.packed, twice.packed)


def test_random_sym_tensor_norm_and_spread(rng):
    mags = []
    for _ in range(50):
        t = random_sym_tensor(rng, 3, 2.5)
        mags.append(norm(t))
    assert np.allclose(mags, 2.5, rtol=1e-12)
    # directions vary
    t1 = random_sym_tensor(rng, 2, 1.0)
    t2 = random_sym_tensor(rng, 2, 1.0)
    assert not np.allclose(t1.packed, t2.packed)
