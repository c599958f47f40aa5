"""Local pairwise interactions and single-qudit basis changes.

Imprint and swap are applied as index permutations on the tensor view;
``*_matrix`` builders exist for unitarity checks only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import LayoutError, NotUnitaryError
from .state import Layout, PureState, from_tensor

UNITARY_TOL = 1e-10


def check_unitary(m, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < tol)


@dataclass(frozen=True, eq=False)
class BasisRotation:
    """A d x d unitary acting on one qudit.

    ``matrix[i, i']`` expands the computational basis in the rotated one:
    ``|i> = sum_i' matrix[i, i'] |i'>``.
    When ``coefficients``/``generators`` are given, ``matrix`` must equal
    ``expm(sum_a coefficients[a] * generators[a])``.
    """

    matrix: np.ndarray
    coefficients: tuple[float, ...] | None = None
    generators: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NotUnitaryError(f"rotation matrix must be square, got shape {m.shape}")
        if not check_unitary(m):
            raise NotUnitaryError("basis rotation is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.generators is not None:
            gen = expm(sum(c * np.asarray(g) for c, g in zip(self.coefficients, self.generators)))
            if np.max(np.abs(gen - m)) > 1e-8:
                raise NotUnitaryError("matrix does not match exp(sum eps^a J^a)")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_generators(cls, coefficients: Sequence[float], generators: Sequence[np.ndarray]):
        gens = tuple(np.asarray(g, dtype=complex) for g in generators)
        coeffs = tuple(float(c) for c in coefficients)
        return cls(expm(sum(c * g for c, g in zip(coeffs, gens))), coeffs, gens)

    @classmethod
    def identity(cls, d: int) -> BasisRotation:
        return cls(np.eye(d))

    def inverse(self) -> BasisRotation:
        return BasisRotation(self.matrix.conj().T)

    def primed_basis(self) -> np.ndarray:
        """Columns are the rotated basis vectors ``|i'>`` in computational coordinates.

        The matrix is read as ``|i> = sum_i' U[i, i'] |i'>``, so
        ``<i|i'> = conj(U[i, i'])``.
        """
        return self.matrix.conj()


def rotation_qubit(eps: float) -> BasisRotation:
    """Qubit basis change by angle ``eps``: ``|0> = cos|0'> + sin|1'>``, ``|1> = -sin|0'> + cos|1'>``.

    Stored as ``U[i, i']``. ``J = [[0, 1], [-1, 0]]`` generates it, so the
    generator decomposition is attached.
    """
    c, s = np.cos(eps), np.sin(eps)
    gen = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return BasisRotation(np.array([[c, s], [-s, c]]), (float(eps),), (gen,))


def hadamard() -> BasisRotation:
    return BasisRotation(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def _pair_axes(s: PureState, a: str, b: str) -> tuple[int, int, int]:
    if a == b:
        raise LayoutError(f"pairwise operation needs two distinct subsystems, got {a!r} twice")
    ia, ib = s.layout.axis(a), s.layout.axis(b)
    da, db = s.dims[ia], s.dims[ib]
    if da != db:
        raise LayoutError(f"dimension mismatch: {a!r} has d={da}, {b!r} has d={db}")
    return ia, ib, da


def _shift(s: PureState, src: str, dst: str, sign: int) -> PureState:
    ia, ib, d = _pair_axes(s, src, dst)
    t = np.moveaxis(s.tensor_view(), (ia, ib), (-2, -1))
    i = np.arange(d)[:, None]
    j = np.arange(d)[None, :]
    # output[i, j] = input[i, j - sign*i]
    out = t[..., i, (j - sign * i) % d]
    return from_tensor(s.layout, np.moveaxis(out, (-2, -1), (ia, ib)))


def _conjugated(op, s: PureState, a: str, b: str, basis: np.ndarray | None) -> PureState:
    if basis is None:
        return op(s)
    w = np.asarray(basis, dtype=complex)
    s = apply_matrix(apply_matrix(s, a, w.conj().T), b, w.conj().T)
    s = op(s)
    return apply_matrix(apply_matrix(s, a, w), b, w)


def apply_imprint(s: PureState, src: str, dst: str, basis=None) -> PureState:
    """``|i>_src |j>_dst -> |i>_src |j+i mod d>_dst``.

    ``basis`` (columns = basis vectors) makes the addition act on those labels
    instead of the computational ones.
    """
    return _conjugated(lambda x: _shift(x, src, dst, +1), s, src, dst, basis)


def apply_imprint_inverse(s: PureState, src: str, dst: str, basis=None) -> PureState:
    """``|i>_src |j>_dst -> |i>_src |j-i mod d>_dst``."""
    return _conjugated(lambda x: _shift(x, src, dst, -1), s, src, dst, basis)


def apply_swap(s: PureState, a: str, b: str) -> PureState:
    ia, ib, _ = _pair_axes(s, a, b)
    return from_tensor(s.layout, np.swapaxes(s.tensor_view(), ia, ib))


def apply_matrix(s: PureState, target: str, m: np.ndarray) -> PureState:
    ax = s.layout.axis(target)
    out = np.tensordot(m, s.tensor_view(), axes=([1], [ax]))
    return from_tensor(s.layout, np.moveaxis(out, 0, ax))


def apply_local_unitary(s: PureState, target: str, u) -> PureState:
    if not isinstance(u, BasisRotation):
        u = BasisRotation(u)
    if u.dimension != s.layout.dim(target):
        raise LayoutError(
            f"rotation of dimension {u.dimension} applied to {target!r} of dimension {s.layout.dim(target)}"
        )
    return apply_matrix(s, target, u.matrix)


def apply_block(s: PureState, labels: Sequence[str], m: np.ndarray) -> PureState:
    """Apply an operator on the joint space of ``labels`` (taken in the given order)."""
    axes = [s.layout.axis(l) for l in labels]
    dims = [s.dims[a] for a in axes]
    n = int(np.prod(dims))
    m = np.asarray(m, dtype=complex)
    if m.shape != (n, n):
        raise LayoutError(f"operator shape {m.shape} does not match block dimension {n}")
    t = np.moveaxis(s.tensor_view(), axes, range(len(axes)))
    rest_shape = t.shape[len(axes):]
    out = (m @ t.reshape(n, -1)).reshape(tuple(dims) + rest_shape)
    return from_tensor(s.layout, np.moveaxis(out, range(len(axes)), axes))


def imprint_matrix(d: int, inverse: bool = False) -> np.ndarray:
    """Permutation matrix of the imprint on ``|i>_a |j>_b`` (a slowest)."""
    sign = -1 if inverse else 1
    m = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            m[i * d + (j + sign * i) % d, i * d + j] = 1.0
    return m


def swap_matrix(d: int) -> np.ndarray:
    m = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            m[j * d + i, i * d + j] = 1.0
    return m


# Recorded operations, replayable and invertible. Each entry is a tuple
# ``(name, *args)``; ``basis`` for imprints is stored as the last argument.

def apply_recorded(s: PureState, op: tuple) -> PureState:
    name, *args = op
    if name == "imprint":
        return apply_imprint(s, *args)
    if name == "imprint_inverse":
        return apply_imprint_inverse(s, *args)
    if name == "swap":
        return apply_swap(s, *args)
    if name == "matrix":
        return apply_matrix(s, *args)
    raise ValueError(f"unknown recorded operation {name!r}")


def replay(s: PureState, ops: Sequence[tuple]) -> PureState:
    for op in ops:
        s = apply_recorded(s, op)
    return s


def invert(ops: Sequence[tuple]) -> list[tuple]:
    out = []
    for name, *args in reversed(ops):
        if name == "imprint":
            out.append(("imprint_inverse", *args))
        elif name == "imprint_inverse":
            out.append(("imprint", *args))
        elif name == "swap":
            out.append(("swap", *args))
        elif name == "matrix":
            target, m = args
            out.append(("matrix", target, np.asarray(m).conj().T))
        else:
            raise ValueError(f"unknown recorded operation {name!r}")
    return out
