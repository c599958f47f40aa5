import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unimeas.errors import CompletenessError, LayoutError, PatternViolationError
from unimeas.generalized import (
    KrausSet,
    apply_generalized,
    dilate,
    dilated_outcomes,
    extension_exists,
    kraus_outcomes,
    prepare_zero_observer,
    realizes,
    route_gap,
)
from unimeas.ops import imprint_matrix
from unimeas.protocol import correlated_state, make_environment
from unimeas.state import Layout, basis_state, equal_up_to_phase, partial_trace, qudit, random_state, tensor

from oracles import haar_unitary, imprint_dense, random_vector

EXAMPLE = KrausSet((np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])))
PROJECTIVE = KrausSet((np.diag([1, 0]), np.diag([0, 1])))


def random_kraus(d, m, rng) -> KrausSet:
    v = haar_unitary(d * m, rng)
    return KrausSet(tuple(v[k * d : (k + 1) * d, :d] for k in range(m)))


def test_completeness_check():
    with pytest.raises(CompletenessError) as exc:
        KrausSet((np.diag([1, 0]),)).check()
    assert exc.value.residual == pytest.approx(1.0)
    with pytest.raises(LayoutError):
        KrausSet((np.eye(2), np.eye(3)))


def test_projective_dilation_is_imprint():
    dil = dilate(PROJECTIVE)
    np.testing.assert_array_equal(dil.matrix, imprint_matrix(2))
    np.testing.assert_array_equal(dil.matrix, imprint_dense([2, 2], 0, 1))


def test_example_dilation():
    dil = dilate(EXAMPLE)
    assert dil.matrix.shape == (4, 4)
    assert dil.unitarity_residual < 1e-12
    psi = random_vector(2, np.random.default_rng(0))
    assert dil.restriction_residual(EXAMPLE, psi) < 1e-12
    assert realizes(dil, EXAMPLE, [1, 0])
    assert not realizes(dil, EXAMPLE, [0, 1])
    assert not extension_exists(EXAMPLE, [[1, 0], [0, 1]])
    assert extension_exists(EXAMPLE, [[1, 0]])


@pytest.mark.parametrize("d,m", [(2, 2), (2, 3), (3, 2), (3, 4)])
def test_random_kraus_dilation(d, m):
    rng = np.random.default_rng(d * 10 + m)
    k = random_kraus(d, m, rng)
    assert k.residual < 1e-10
    dil = dilate(k)
    assert dil.unitarity_residual < 1e-10
    for _ in range(5):
        assert dil.restriction_residual(k, random_vector(d, rng)) < 1e-12
    np.testing.assert_array_equal(dilate(k).matrix, dil.matrix)


def test_example_outcomes():
    psi_amp = np.array([0.6, 0.8j])
    outs = kraus_outcomes(qudit("s", psi_amp), EXAMPLE)
    np.testing.assert_allclose([o.probability for o in outs], [0.36, 0.64], atol=1e-15)
    zero = qudit("s", [1, 0])
    # M_m psi = psi_m |0>, so posts are |0> up to the phase of psi_m
    assert all(equal_up_to_phase(o.post, zero) for o in outs)


def test_projective_on_plus():
    outs = apply_generalized(qudit("s", np.array([1, 1]) / np.sqrt(2)), PROJECTIVE)
    np.testing.assert_allclose([o.probability for o in outs], [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(outs[0].post.amplitudes, [1, 0], atol=1e-15)
    np.testing.assert_allclose(outs[1].post.amplitudes, [0, 1], atol=1e-15)


def test_zero_probability_outcome_has_no_post():
    outs = kraus_outcomes(qudit("s", [1, 0]), PROJECTIVE)
    assert outs[1].post is None and outs[1].probability == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 4))
def test_dual_routes_agree(seed, d, m):
    rng = np.random.default_rng(seed)
    k = random_kraus(d, m, rng)
    psi = random_state(Layout.of(("s", d)), rng)
    direct = kraus_outcomes(psi, k)
    assert abs(sum(o.probability for o in direct) - 1) < 1e-12
    assert route_gap(direct, dilated_outcomes(psi, k)) < 1e-12


def test_json_round_trip():
    k = random_kraus(2, 3, np.random.default_rng(4))
    back = KrausSet.from_json(k.to_json())
    for a, b in zip(k.operators, back.operators):
        np.testing.assert_array_equal(a, b)
    assert back.labels == k.labels
    with pytest.raises(LayoutError):
        KrausSet.from_json([[[1, 0], [0, 1]]])


@pytest.mark.parametrize("d,n", [(2, 2), (5, 3)])
def test_prepare_zero_observer(d, n):
    chi = random_vector(d, np.random.default_rng(d)) if d == 2 else np.ones(d) / np.sqrt(d)
    labels = [f"o{i + 1}" for i in range(n)]
    env, _ = make_environment(chi, n, d, labels)
    out = prepare_zero_observer(env, "o1", "o2")
    rho = partial_trace(out, ["o1"]).matrix
    assert abs(rho[0, 0] - 1) < 1e-12
    want = correlated_state(chi, labels[1:], d)
    np.testing.assert_allclose(out.amplitudes, np.kron(np.eye(d)[0], want.amplitudes), atol=1e-12)


def test_prepare_zero_observer_single_branch():
    s = basis_state(Layout.of(("o1", 3), ("o2", 3)), [2, 2])
    assert prepare_zero_observer(s, "o1", "o2").amplitude(o1=0, o2=2) == 1
    with pytest.raises(PatternViolationError):
        prepare_zero_observer(tensor(qudit("o1", [0.6, 0.8]), qudit("o2", [1, 0])), "o1", "o2")
