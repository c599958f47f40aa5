import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unimeas.errors import LayoutError, NotUnitaryError
from unimeas.ops import (
    BasisRotation,
    apply_imprint,
    apply_imprint_inverse,
    apply_local_unitary,
    apply_swap,
    hadamard,
    imprint_matrix,
    invert,
    replay,
    rotation_qubit,
    swap_matrix,
)
from unimeas.state import Layout, PureState, basis_state, partial_trace, qudit, random_state, tensor

from oracles import haar_unitary, imprint_dense, imprint_inverse_dense, kron_all, swap_dense

LAY = Layout.of(("a", 3), ("b", 2), ("c", 3))
DIMS = [3, 2, 3]


@pytest.mark.parametrize("src,dst", [("a", "c"), ("c", "a")])
def test_imprint_against_dense_oracle(src, dst):
    s = random_state(LAY, np.random.default_rng(0))
    i, j = LAY.axis(src), LAY.axis(dst)
    np.testing.assert_allclose(apply_imprint(s, src, dst).amplitudes, imprint_dense(DIMS, i, j) @ s.amplitudes, atol=1e-14)
    np.testing.assert_allclose(
        apply_imprint_inverse(s, src, dst).amplitudes, imprint_inverse_dense(DIMS, i, j) @ s.amplitudes, atol=1e-14
    )


def test_swap_against_dense_oracle():
    s = random_state(LAY, np.random.default_rng(1))
    np.testing.assert_allclose(apply_swap(s, "a", "c").amplitudes, swap_dense(DIMS, 0, 2) @ s.amplitudes, atol=1e-14)


def test_imprint_basis_examples():
    lay = Layout.of(("s", 2), ("e", 2))
    assert apply_imprint(basis_state(lay, [1, 0]), "s", "e").amplitude(s=1, e=1) == 1
    lay3 = Layout.of(("s", 3), ("e", 3))
    assert apply_imprint(basis_state(lay3, [2, 2]), "s", "e").amplitude(s=2, e=1) == 1


def test_dimension_mismatch_and_self_pair():
    s = random_state(LAY, np.random.default_rng(2))
    with pytest.raises(LayoutError):
        apply_imprint(s, "a", "b")
    with pytest.raises(LayoutError):
        apply_swap(s, "a", "a")


def test_matrices_are_permutations():
    for d in (2, 3, 5):
        m = imprint_matrix(d)
        assert np.allclose(m.conj().T @ m, np.eye(d * d))
        assert np.allclose(imprint_matrix(d, inverse=True) @ m, np.eye(d * d))
        assert np.allclose(swap_matrix(d) @ swap_matrix(d), np.eye(d * d))
        np.testing.assert_array_equal(m, imprint_dense([d, d], 0, 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]))
def test_imprint_inverse_round_trip(seed, d):
    lay = Layout.of(("x", d), ("y", d), ("z", 2))
    s = random_state(lay, np.random.default_rng(seed))
    back = apply_imprint_inverse(apply_imprint(s, "x", "y"), "x", "y")
    assert np.max(np.abs(back.amplitudes - s.amplitudes)) < 1e-12
    assert abs(apply_imprint(s, "y", "x").norm() - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_imprint_is_local(seed):
    s = random_state(LAY, np.random.default_rng(seed))
    before = partial_trace(s, ["b"]).matrix
    after = partial_trace(apply_imprint(s, "a", "c"), ["b"]).matrix
    assert np.max(np.abs(before - after)) < 1e-12


def test_rotated_imprint_copies_rotated_basis():
    h = hadamard().primed_basis()
    lay = Layout.of(("s", 2), ("e", 2))
    minus = PureState(lay, kron_all([h[:, 1], h[:, 0]]))
    out = apply_imprint(minus, "s", "e", h)
    np.testing.assert_allclose(out.amplitudes, kron_all([h[:, 1], h[:, 1]]), atol=1e-15)


def test_rotation_generator_consistency():
    r = rotation_qubit(0.3)
    assert r.coefficients == (0.3,)
    again = BasisRotation.from_generators([0.3], [np.array([[0, 1], [-1, 0]])])
    np.testing.assert_allclose(again.matrix, r.matrix, atol=1e-14)
    with pytest.raises(NotUnitaryError):
        BasisRotation(np.array([[1, 1], [0, 1]]))
    with pytest.raises(NotUnitaryError):
        BasisRotation(np.eye(2), (0.5,), (np.array([[0, 1], [-1, 0]]),))


def test_primed_basis_expansion():
    rng = np.random.default_rng(3)
    u = haar_unitary(3, rng)
    w = BasisRotation(u).primed_basis()
    # |i> = sum_i' U[i, i'] |i'>
    for i in range(3):
        np.testing.assert_allclose(w @ u[i], np.eye(3)[i], atol=1e-13)


def test_local_unitary_and_replay_inverse():
    rng = np.random.default_rng(4)
    s = random_state(LAY, rng)
    u = haar_unitary(3, rng)
    t = apply_local_unitary(s, "c", u)
    with pytest.raises(LayoutError):
        apply_local_unitary(s, "b", u)
    ops = [("imprint", "a", "c", None), ("swap", "a", "c"), ("matrix", "c", u), ("imprint_inverse", "c", "a", None)]
    out = replay(t, ops)
    back = replay(out, invert(ops))
    assert np.max(np.abs(back.amplitudes - t.amplitudes)) < 1e-12


def test_single_qudit_tensor_unchanged_by_disjoint_swap():
    rng = np.random.default_rng(5)
    s = tensor(random_state(LAY, rng), qudit("d", [0, 1]))
    assert apply_swap(s, "a", "c").amplitude(a=0, b=0, c=0, d=1) == s.amplitude(a=0, b=0, c=0, d=1)
