"""Dense statevectors over labeled qudit tensor products.

Index convention is big-endian mixed radix: the first layout entry varies
slowest, so ``amplitudes.reshape(layout.dims)`` indexes subsystems in
layout order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import LayoutError, NormalizationError, ZeroProbabilityError

NORM_TOL = 1e-10
ZERO_PROB = 1e-14
MAX_AMPLITUDES = 2**22


@dataclass(frozen=True)
class Layout:
    """Ordered ``(label, dimension)`` pairs describing a tensor product."""

    entries: tuple[tuple[str, int], ...]

    def __post_init__(self):
        entries = tuple((str(lbl), int(d)) for lbl, d in self.entries)
        object.__setattr__(self, "entries", entries)
        labels = [lbl for lbl, _ in entries]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout: {labels}")
        for lbl, d in entries:
            if d < 2:
                raise LayoutError(f"subsystem {lbl!r} has dimension {d} < 2")

    @classmethod
    def of(cls, *entries: tuple[str, int]) -> Layout:
        return cls(tuple(entries))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.entries)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.entries)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.entries else 1

    def __len__(self):
        return len(self.entries)

    def __contains__(self, label):
        return label in self.labels

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown subsystem label {label!r}") from None

    def dim(self, label: str) -> int:
        return self.entries[self.axis(label)][1]

    def concat(self, other: Layout) -> Layout:
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"layout conflict, labels in both operands: {sorted(clash)}")
        return Layout(self.entries + other.entries)

    def select(self, labels: Iterable[str]) -> Layout:
        """Sub-layout with the given labels, kept in layout order."""
        wanted = set(labels)
        for lbl in wanted:
            self.axis(lbl)
        return Layout(tuple(e for e in self.entries if e[0] in wanted))

    def without(self, labels: Iterable[str]) -> Layout:
        drop = set(labels)
        for lbl in drop:
            self.axis(lbl)
        return Layout(tuple(e for e in self.entries if e[0] not in drop))


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit-norm amplitude vector over a :class:`Layout`."""

    layout: Layout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.size:
            raise LayoutError(
                f"amplitude vector has length {amps.size}, layout needs {self.layout.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"state norm {norm!r} differs from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def amplitude(self, **indices: int) -> complex:
        """Amplitude at a basis tuple given by ``label=index`` keywords."""
        idx = tuple(indices[lbl] for lbl in self.labels)
        return complex(self.tensor_view()[idx])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def reorder(self, labels: Sequence[str]) -> PureState:
        """Same state with subsystems permuted into ``labels`` order."""
        if sorted(labels) != sorted(self.labels):
            raise LayoutError(f"reorder needs a permutation of {self.labels}, got {labels}")
        axes = [self.layout.axis(lbl) for lbl in labels]
        layout = Layout(tuple(self.layout.entries[a] for a in axes))
        return PureState(layout, np.transpose(self.tensor_view(), axes).reshape(-1))

    def relabel(self, mapping: dict[str, str]) -> PureState:
        layout = Layout(tuple((mapping.get(l, l), d) for l, d in self.layout.entries))
        return PureState(layout, self.amplitudes)

    def to_json(self) -> dict:
        return {
            "layout": [[lbl, d] for lbl, d in self.layout.entries],
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> PureState:
        layout = Layout(tuple((lbl, d) for lbl, d in obj["layout"]))
        amps = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
        return cls(layout, amps)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def from_tensor(layout: Layout, tensor: np.ndarray) -> PureState:
    return PureState(layout, np.asarray(tensor).reshape(-1))


def normalized(layout: Layout, amplitudes) -> PureState:
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(amps)
    if norm < ZERO_PROB:
        raise NormalizationError("cannot normalize a null vector")
    return PureState(layout, amps / norm)


def qudit(label: str, amplitudes) -> PureState:
    """Single-subsystem state; dimension inferred from ``amplitudes``."""
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    return PureState(Layout.of((label, amps.size)), amps)


def basis_state(layout: Layout, indices: Sequence[int]) -> PureState:
    if len(indices) != len(layout):
        raise LayoutError("one index per subsystem required")
    amps = np.zeros(layout.dims, dtype=complex)
    amps[tuple(indices)] = 1.0
    return PureState(layout, amps.reshape(-1))


def random_state(layout: Layout, rng: np.random.Generator) -> PureState:
    z = rng.standard_normal(layout.size) + 1j * rng.standard_normal(layout.size)
    return PureState(layout, z / np.linalg.norm(z))


def random_amplitudes(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def check_size(layout: Layout, limit: int = MAX_AMPLITUDES) -> None:
    from .errors import StateSizeError

    if layout.size > limit:
        raise StateSizeError(f"state would need {layout.size} amplitudes (limit {limit})")


def tensor(a: PureState, b: PureState) -> PureState:
    layout = a.layout.concat(b.layout)
    check_size(layout)
    return PureState(layout, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[PureState]) -> PureState:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def inner(a: PureState, b: PureState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.layout != b.layout:
        raise LayoutError(f"layout mismatch: {a.layout.entries} vs {b.layout.entries}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def phase_aligned_distance(a: PureState, b: PureState) -> float:
    """``min_theta ||b - e^{i theta} a||`` in the Euclidean norm."""
    ov = inner(a, b)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(b.amplitudes - phase * a.amplitudes))


def equal_up_to_phase(a: PureState, b: PureState, tol: float = NORM_TOL) -> bool:
    return phase_aligned_distance(a, b) < tol


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    layout: Layout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.layout.size, self.layout.size):
            raise LayoutError(f"matrix shape {m.shape} does not match layout size {self.layout.size}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def check(self, tol: float = NORM_TOL) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise NormalizationError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > tol:
            raise NormalizationError(f"density matrix trace {np.trace(m)} != 1")
        if np.linalg.eigvalsh(m).min() < -tol:
            raise NormalizationError("density matrix has a negative eigenvalue")

    def in_basis(self, basis: np.ndarray) -> np.ndarray:
        """Matrix elements ``<b_i|rho|b_j>`` for basis vectors in the columns of ``basis``."""
        basis = np.asarray(basis, dtype=complex)
        return basis.conj().T @ self.matrix @ basis

    def probabilities(self, basis: np.ndarray | None = None) -> np.ndarray:
        m = self.matrix if basis is None else self.in_basis(basis)
        return np.real(np.diag(m)).copy()


def partial_trace(s: PureState, keep: Iterable[str]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (returned in layout order)."""
    keep = set(keep)
    if not keep:
        raise LayoutError("partial_trace needs at least one kept subsystem")
    kept = s.layout.select(keep)
    axes = [s.layout.axis(l) for l in kept.labels]
    rest = [a for a in range(len(s.layout)) if a not in axes]
    m = np.transpose(s.tensor_view(), axes + rest).reshape(kept.size, -1)
    return DensityMatrix(kept, m @ m.conj().T)


def _basis_matrix(basis, d: int) -> np.ndarray:
    if basis is None:
        return np.eye(d, dtype=complex)
    b = np.asarray(basis, dtype=complex)
    if b.shape != (d, d):
        raise LayoutError(f"basis matrix must be {d}x{d}, got {b.shape}")
    if np.max(np.abs(b.conj().T @ b - np.eye(d))) > NORM_TOL:
        raise LayoutError("basis vectors are not orthonormal")
    return b


def project(s: PureState, label: str, basis, outcome: int) -> np.ndarray:
    """Unnormalized ``(1 x |b_outcome><b_outcome|) s`` as a flat vector."""
    ax = s.layout.axis(label)
    d = s.layout.dims[ax]
    b = _basis_matrix(basis, d)[:, outcome]
    t = np.moveaxis(s.tensor_view(), ax, -1)
    coeff = t @ b.conj()
    out = coeff[..., None] * b
    return np.moveaxis(out, -1, ax).reshape(-1)


def condition(s: PureState, label: str, basis=None, outcome: int = 0) -> tuple[float, PureState]:
    """Project ``label`` onto basis vector ``outcome``; return probability and renormalized state.

    ``basis`` holds the measurement basis in its columns (``None`` for the
    computational basis).
    """
    v = project(s, label, basis, outcome)
    p = float(np.vdot(v, v).real)
    if p < ZERO_PROB:
        raise ZeroProbabilityError(f"outcome {outcome} on {label!r} has probability {p:.3e}")
    return p, PureState(s.layout, v / np.sqrt(p))


def outcome_distribution(s: PureState, labels: Sequence[str], bases: dict | None = None) -> np.ndarray:
    """Joint outcome probabilities for ``labels`` (in the given order).

    ``bases`` maps a label to a basis matrix; missing labels use the
    computational basis.
    """
    bases = bases or {}
    t = s.tensor_view()
    for lbl in labels:
        if lbl in bases and bases[lbl] is not None:
            ax = s.layout.axis(lbl)
            b = _basis_matrix(bases[lbl], s.layout.dims[ax])
            t = np.moveaxis(np.tensordot(b.conj().T, t, axes=([1], [ax])), 0, ax)
    axes = [s.layout.axis(l) for l in labels]
    rest = tuple(a for a in range(t.ndim) if a not in axes)
    probs = np.sum(np.abs(t) ** 2, axis=rest) if rest else np.abs(t) ** 2
    order = sorted(range(len(axes)), key=lambda i: axes[i])
    # sum leaves kept axes in layout order; permute to the requested order
    return np.transpose(probs, np.argsort(order))


def _canonical_phase(v: np.ndarray, tol: float = 1e-10) -> complex:
    """Phase that makes the first non-negligible component of ``v`` real positive."""
    mags = np.abs(v)
    idx = int(np.argmax(mags > tol * max(mags.max(), 1e-300)))
    return v[idx] / mags[idx]


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    """``s = sum_i c_i |left_i> |right_i>`` with ``c`` descending.

    Left vectors carry the canonical phase convention (first non-negligible
    component real positive); right vectors absorb the remaining phase.
    """

    coefficients: np.ndarray
    left: tuple[PureState, ...]
    right: tuple[PureState, ...]
    left_layout: Layout
    right_layout: Layout

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self, layout: Layout) -> PureState:
        full = sum(
            c * np.kron(l.amplitudes, r.amplitudes)
            for c, l, r in zip(self.coefficients, self.left, self.right)
        )
        joint = self.left_layout.concat(self.right_layout)
        return normalized(joint, full).reorder(layout.labels)


SCHMIDT_CUTOFF = 1e-13


def bipartition(s: PureState, partition: Iterable[str]) -> tuple[Layout, Layout, np.ndarray]:
    """Split into (partition, rest) layouts and the coefficient matrix between them."""
    partition = set(partition)
    if not partition or partition >= set(s.labels):
        raise LayoutError("partition must be a proper non-empty subset of the labels")
    left = s.layout.select(partition)
    right = s.layout.without(partition)
    axes = [s.layout.axis(l) for l in left.labels] + [s.layout.axis(l) for l in right.labels]
    m = np.transpose(s.tensor_view(), axes).reshape(left.size, right.size)
    return left, right, m


def schmidt(s: PureState, partition: Iterable[str]) -> SchmidtDecomposition:
    left, right, m = bipartition(s, partition)
    u, c, vh = np.linalg.svd(m, full_matrices=False)
    keep = c > SCHMIDT_CUTOFF
    u, c, vh = u[:, keep], c[keep], vh[keep]
    lefts, rights = [], []
    for i in range(len(c)):
        ph = _canonical_phase(u[:, i])
        lefts.append(PureState(left, u[:, i] / ph))
        rights.append(PureState(right, vh[i] * ph))
    return SchmidtDecomposition(c.copy(), tuple(lefts), tuple(rights), left, right)


def factor_out(s: PureState, labels: Iterable[str], tol: float = 1e-10) -> tuple[PureState, PureState]:
    """Split ``s`` into ``(rest, factor)`` when ``labels`` are in a product state with the rest.

    The factor's first non-negligible amplitude is made real positive, so the
    split is deterministic. Raises :class:`PatternViolationError` when the
    subsystems are entangled with the rest.
    """
    from .errors import PatternViolationError

    factor_layout, rest_layout, m = bipartition(s, labels)
    u, c, vh = np.linalg.svd(m, full_matrices=False)
    if len(c) > 1 and c[1] > tol:
        raise PatternViolationError(
            f"subsystems {sorted(set(labels))} are entangled with the rest (2nd Schmidt value {c[1]:.2e})"
        )
    f = u[:, 0]
    ph = _canonical_phase(f)
    factor = normalized(factor_layout, f / ph)
    rest = normalized(rest_layout, vh[0] * ph * c[0])
    return rest, factor


def discard(s: PureState, labels: Iterable[str]) -> PureState:
    """Drop subsystems that factor out of ``s`` (see :func:`factor_out`)."""
    return factor_out(s, labels)[0]
