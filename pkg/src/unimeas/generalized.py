"""Kraus-set measurements realized as a unitary on signal (x) observer register."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CompletenessError, LayoutError, PatternViolationError
from .ops import apply_imprint_inverse, check_unitary
from .protocol import is_correlated
from .state import Layout, PureState, ZERO_PROB, condition, factor_out, qudit, tensor

COMPLETENESS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KrausSet:
    operators: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        ops = tuple(np.array(m, dtype=complex) for m in self.operators)
        if not ops:
            raise LayoutError("empty Kraus set")
        d = ops[0].shape[0]
        for m in ops:
            if m.shape != (d, d):
                raise LayoutError(f"Kraus operators must all be {d}x{d}, got {m.shape}")
            m.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        labels = tuple(self.labels) if self.labels is not None else tuple(str(i) for i in range(len(ops)))
        if len(labels) != len(ops):
            raise LayoutError("one label per Kraus operator required")
        object.__setattr__(self, "labels", labels)

    @property
    def dimension(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self):
        return len(self.operators)

    @property
    def residual(self) -> float:
        """Spectral norm of ``sum_m M_m^dagger M_m - I``."""
        total = sum(m.conj().T @ m for m in self.operators)
        return float(np.linalg.norm(total - np.eye(self.dimension), 2))

    def check(self) -> None:
        r = self.residual
        if r > COMPLETENESS_TOL:
            raise CompletenessError(r)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "operators": [[[[float(z.real), float(z.imag)] for z in row] for row in m] for m in self.operators],
        }

    @classmethod
    def from_json(cls, obj) -> KrausSet:
        if isinstance(obj, dict):
            ops, labels = obj["operators"], obj.get("labels")
        else:
            ops, labels = obj, None
        mats = []
        for m in ops:
            arr = np.asarray(m, dtype=float)
            if arr.ndim != 3 or arr.shape[-1] != 2:
                raise LayoutError("Kraus matrices must be nested [re, im] pairs, row-major")
            mats.append(arr[..., 0] + 1j * arr[..., 1])
        return cls(tuple(mats), labels)


@dataclass(frozen=True, eq=False)
class DilationUnitary:
    """Unitary on ``s (x) o`` (signal slowest) extending ``|psi>|0> -> sum_m M_m|psi>|m>``.

    ``isometry_columns`` lists the column indices fixed by the Kraus set;
    ``completion_columns`` the ones filled by orthonormal completion.
    """

    matrix: np.ndarray
    signal_dim: int
    register_dim: int
    isometry_columns: tuple[int, ...]
    completion_columns: tuple[int, ...]

    @property
    def unitarity_residual(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))

    def restriction_residual(self, kraus: KrausSet, psi: np.ndarray) -> float:
        """Max-norm gap between ``U|psi>|0>`` and ``sum_m (M_m psi)|m>``."""
        got = self.matrix @ np.kron(psi, _e(0, self.register_dim))
        return float(np.max(np.abs(got - kraus_image(kraus, psi, self.register_dim))))

    def to_json(self) -> dict:
        return {
            "signal_dim": self.signal_dim,
            "register_dim": self.register_dim,
            "isometry_columns": list(self.isometry_columns),
            "completion_columns": list(self.completion_columns),
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }


def _e(i: int, n: int) -> np.ndarray:
    v = np.zeros(n, dtype=complex)
    v[i] = 1.0
    return v


def register_dimension(kraus: KrausSet) -> int:
    return max(len(kraus), 2)


def kraus_image(kraus: KrausSet, psi, register_dim: int | None = None) -> np.ndarray:
    """``sum_m (M_m psi) (x) |m>`` as a flat vector."""
    n = register_dim or register_dimension(kraus)
    psi = np.asarray(psi, dtype=complex)
    return sum(np.kron(m @ psi, _e(i, n)) for i, m in enumerate(kraus.operators))


def dilate(kraus: KrausSet) -> DilationUnitary:
    """Deterministic unitary extension of the Kraus isometry.

    Columns ``|a>|0>`` come from the Kraus set. The rest are filled in order
    by orthonormalizing canonical basis vectors ``e_0, e_1, ...`` against the
    columns already present (two Gram-Schmidt passes).
    """
    kraus.check()
    ds, do = kraus.dimension, register_dimension(kraus)
    n = ds * do
    u = np.zeros((n, n), dtype=complex)
    iso = tuple(a * do for a in range(ds))
    for a in iso:
        u[:, a] = kraus_image(kraus, _e(a // do, ds), do)
    rest = tuple(c for c in range(n) if c not in iso)
    basis = [u[:, a] for a in iso]
    candidates = iter(range(n))
    for col in rest:
        for cand in candidates:
            v = _e(cand, n)
            for _ in range(2):
                for b in basis:
                    v = v - np.vdot(b, v) * b
            norm = np.linalg.norm(v)
            if norm > 1e-6:
                v = v / norm
                break
        else:  # pragma: no cover - the canonical basis always spans
            raise RuntimeError("orthonormal completion ran out of candidates")
        u[:, col] = v
        basis.append(v)
    out = DilationUnitary(u, ds, do, iso, rest)
    if not check_unitary(u):
        raise RuntimeError(f"dilation is not unitary (residual {out.unitarity_residual:.2e})")
    return out


@dataclass(frozen=True, eq=False)
class Outcome:
    label: str
    probability: float
    post: PureState | None


def kraus_outcomes(psi: PureState, kraus: KrausSet) -> list[Outcome]:
    """Outcome probabilities ``<psi|M^dag M|psi>`` and post-states ``M psi / sqrt(P)``."""
    kraus.check()
    if psi.layout.size != kraus.dimension or len(psi.layout) != 1:
        raise LayoutError("signal must be a single qudit matching the Kraus dimension")
    out = []
    for lbl, m in zip(kraus.labels, kraus.operators):
        v = m @ psi.amplitudes
        p = float(np.vdot(v, v).real)
        post = PureState(psi.layout, v / np.sqrt(p)) if p > ZERO_PROB else None
        out.append(Outcome(lbl, p, post))
    return out


def dilated_outcomes(psi: PureState, kraus: KrausSet, register: str = "reg") -> list[Outcome]:
    """Same statistics obtained by evolving ``psi (x) |0>`` with the dilation and conditioning the register."""
    dil = dilate(kraus)
    joint = tensor(psi, qudit(register, _e(0, dil.register_dim)))
    joint = PureState(joint.layout, dil.matrix @ joint.amplitudes)
    out = []
    for i, lbl in enumerate(kraus.labels):
        proj = joint.tensor_view()[:, i]
        p = float(np.vdot(proj, proj).real)
        post = None
        if p > ZERO_PROB:
            _, cond = condition(joint, register, None, i)
            post = factor_out(cond, [register])[0]
        out.append(Outcome(lbl, p, post))
    return out


ROUTE_TOL = 1e-12


def apply_generalized(psi: PureState, kraus: KrausSet) -> list[Outcome]:
    """Generalized measurement outcomes, cross-checked against the dilation route."""
    direct = kraus_outcomes(psi, kraus)
    dilated = dilated_outcomes(psi, kraus)
    gap = route_gap(direct, dilated)
    if gap > ROUTE_TOL:
        raise RuntimeError(f"direct and dilated routes disagree by {gap:.2e}")
    return direct


def route_gap(a: Sequence[Outcome], b: Sequence[Outcome]) -> float:
    gap = 0.0
    for x, y in zip(a, b):
        gap = max(gap, abs(x.probability - y.probability))
        if (x.post is None) != (y.post is None):
            return float("inf")
        if x.post is not None:
            gap = max(gap, float(np.max(np.abs(x.post.amplitudes - y.post.amplitudes))))
    return gap


def realizes(dil: DilationUnitary, kraus: KrausSet, observer_state, tol: float = 1e-10) -> bool:
    """Whether ``U|a>|phi> = sum_m M_m|a>|m>`` holds for every signal basis state ``a``."""
    phi = np.asarray(observer_state, dtype=complex)
    for a in range(dil.signal_dim):
        got = dil.matrix @ np.kron(_e(a, dil.signal_dim), phi)
        if np.max(np.abs(got - kraus_image(kraus, _e(a, dil.signal_dim), dil.register_dim))) > tol:
            return False
    return True


def extension_exists(kraus: KrausSet, observer_states: Sequence, tol: float = 1e-10) -> bool:
    """Can any unitary send ``|psi>|phi_r> -> sum_m M_m|psi>|m>`` for all given ``phi_r``?

    A unitary extension exists iff the map preserves inner products on the
    inputs; the images do not depend on ``phi_r`` so this needs
    ``<phi_r|phi_s> = 1`` for every pair.
    """
    kraus.check()
    phis = [np.asarray(p, dtype=complex) for p in observer_states]
    for p in phis:
        for q in phis:
            if abs(np.vdot(p, q) - 1) > tol:
                return False
    return True


def prepare_zero_observer(s: PureState, o1: str, o2: str) -> PureState:
    """Inverse imprint ``o2 -> o1`` on a correlated pair, leaving ``o1`` exactly in ``|0>``."""
    if not is_correlated(s, (o1, o2)):
        raise PatternViolationError(f"{o1!r} and {o2!r} are not perfectly correlated")
    return apply_imprint_inverse(s, o2, o1)
