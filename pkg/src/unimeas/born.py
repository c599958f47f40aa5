"""Envariance, fine-graining and outcome probabilities by branch counting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import FineGrainingError, LayoutError
from .ops import apply_block
from .state import (
    Layout,
    PureState,
    _canonical_phase,
    bipartition,
    equal_up_to_phase,
    inner,
    SCHMIDT_CUTOFF,
    check_size,
)

DEFAULT_DENOMINATOR_BOUND = 10**4
RATIO_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BipartiteView:
    """Schmidt form ``sum_i Psi_i |S_i>|E_i>`` with complex coefficients.

    Both basis families follow the canonical phase convention (first
    non-negligible component real positive), so all phase sits in
    ``coefficients``.
    """

    system: tuple[str, ...]
    environment: tuple[str, ...]
    system_layout: Layout
    environment_layout: Layout
    coefficients: np.ndarray
    system_basis: np.ndarray  # columns |S_i>
    environment_basis: np.ndarray  # columns |E_i>

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coefficients)


def bipartite_view(s: PureState, system: Sequence[str]) -> BipartiteView:
    sl, el, m = bipartition(s, system)
    u, c, vh = np.linalg.svd(m, full_matrices=False)
    keep = c > SCHMIDT_CUTOFF
    u, c, v = u[:, keep], c[keep], vh[keep].T
    coeffs = c.astype(complex)
    for i in range(len(c)):
        pu, pv = _canonical_phase(u[:, i]), _canonical_phase(v[:, i])
        u[:, i] /= pu
        v[:, i] /= pv
        coeffs[i] *= pu * pv
    return BipartiteView(sl.labels, el.labels, sl, el, coeffs, u, v)


def _completed(vectors: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """``sum_i diag_i |v_i><v_i| + projector onto the complement``."""
    p = vectors @ vectors.conj().T
    return vectors @ np.diag(diag) @ vectors.conj().T + (np.eye(vectors.shape[0]) - p)


def phase_envariant_pair(view: BipartiteView) -> tuple[np.ndarray, np.ndarray]:
    """System unitary removing the coefficient phases and its environment counterpart."""
    ph = np.exp(1j * np.angle(view.coefficients))
    return _completed(view.system_basis, ph.conj()), _completed(view.environment_basis, ph)


def swap_envariant_pair(view: BipartiteView, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Swap ``|S_i> <-> |S_j>`` and the matching environment swap."""

    def swap(basis):
        a, b = basis[:, i], basis[:, j]
        n = basis.shape[0]
        return (
            np.outer(a, b.conj())
            + np.outer(b, a.conj())
            + np.eye(n)
            - np.outer(a, a.conj())
            - np.outer(b, b.conj())
        )

    return swap(view.system_basis), swap(view.environment_basis)


def apply_system(s: PureState, view: BipartiteView, u_s) -> PureState:
    return apply_block(s, view.system, u_s)


def apply_environment(s: PureState, view: BipartiteView, u_e) -> PureState:
    return apply_block(s, view.environment, u_e)


def phase_erase(s: PureState, view: BipartiteView | None = None, system: Sequence[str] | None = None) -> PureState:
    """Apply ``sum_i exp(-i arg Psi_i)|S_i><S_i|`` on the system side."""
    if view is None:
        view = bipartite_view(s, system)
    u_s, _ = phase_envariant_pair(view)
    return apply_system(s, view, u_s)


def check_envariance(s: PureState, system: Sequence[str], u_s, u_e, tol: float = 1e-10) -> bool:
    """True when ``(u_s (x) u_e)|s> = |s>`` up to a global phase."""
    system = tuple(system)
    env = tuple(l for l in s.labels if l not in system)
    t = apply_block(apply_block(s, system, u_s), env, u_e)
    return equal_up_to_phase(s, t, tol)


def relabel_outcomes(s: PureState, view: BipartiteView, permutation: Sequence[int]) -> PureState:
    """``sum_i Psi_i |S_perm[i]>|E_i>``: the system relabels, environment and coefficients stay."""
    perm = list(permutation)
    if sorted(perm) != list(range(view.rank)):
        raise ValueError(f"permutation must rearrange range({view.rank})")
    b = view.system_basis
    u = b[:, perm] @ b.conj().T + (np.eye(b.shape[0]) - b @ b.conj().T)
    return apply_system(s, view, u)


@dataclass(frozen=True)
class FineGrainingPlan:
    """Branch counts ``n_i`` per outcome, stored gcd-reduced."""

    counts: tuple[int, ...]
    fine_label: str = "E1"
    record_label: str = "E2"

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if not counts or min(counts) < 1:
            raise FineGrainingError(f"branch counts must be positive integers, got {counts}")
        g = reduce(math.gcd, counts)
        object.__setattr__(self, "counts", tuple(n // g for n in counts))

    @property
    def total(self) -> int:
        return sum(self.counts)


def rationalize(probabilities: Sequence[float], bound: int) -> FineGrainingPlan | None:
    """Branch counts with ``n_i / N`` approximating ``probabilities``, ``N <= bound``.

    Each probability goes through a bounded continued-fraction approximation;
    returns ``None`` when the common denominator exceeds ``bound`` or some
    outcome rounds to zero branches.
    """
    fracs = [Fraction(float(p)).limit_denominator(bound) for p in probabilities]
    if any(f <= 0 for f in fracs):
        return None
    if len(fracs) == 2:
        # keep the pair complementary so N stays the single denominator
        fracs[1] = 1 - fracs[0]
        if fracs[1] <= 0:
            return None
    n = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs))
    if n > bound:
        return None
    counts = [int(f * n) for f in fracs]
    if sum(counts) != n:
        return None
    return FineGrainingPlan(tuple(counts))


@dataclass(frozen=True, eq=False)
class FineGrainedState:
    """Fine-grained state kept as a sparse ``(S E') x E''`` amplitude matrix.

    Column ``b`` is the unnormalized branch attached to record level ``b``.
    Every column holds a single ``|S_i>|k>`` term, so storage is linear in
    the branch count; :meth:`to_state` densifies under the size guard.
    """

    layout: Layout
    matrix: sparse.csc_matrix
    system_labels: tuple[str, ...]

    @property
    def branches(self) -> int:
        return self.matrix.shape[1]

    def to_state(self) -> PureState:
        check_size(self.layout)
        return PureState(self.layout, self.matrix.toarray().reshape(-1))

    def reduced_system(self) -> np.ndarray:
        """``rho_S`` with both records traced out."""
        n_s = self.layout.select(self.system_labels).size
        dim = self.matrix.shape[0] // n_s
        m = self.matrix.tocoo()
        env = (m.row % dim) * m.shape[1] + m.col
        a = sparse.csr_matrix((m.data, (m.row // dim, env)), shape=(n_s, dim * m.shape[1]))
        return (a @ a.conj().T).toarray()


def fine_grain(s: PureState, view: BipartiteView, plan: FineGrainingPlan) -> FineGrainedState:
    """Replace the environment by a fine record ``E'`` and a coarse record ``E''``.

    Outcome ``i`` splits into ``n_i`` branches ``|S_i>|i,k>_{E'}|i,k>_{E''}``
    each with amplitude ``|Psi_i|/sqrt(n_i)``; both records have one level per
    branch.
    """
    counts = plan.counts
    if not set(view.system) <= set(s.labels):
        raise LayoutError("view does not belong to this state")
    if len(counts) != view.rank:
        raise FineGrainingError(f"plan has {len(counts)} outcomes, state has Schmidt rank {view.rank}")
    mags = view.magnitudes
    per_branch = mags / np.sqrt(counts)
    if np.max(np.abs(per_branch - per_branch[0])) > RATIO_TOL:
        raise FineGrainingError(
            f"amplitudes {mags.tolist()} are not in ratio sqrt({list(counts)}); rationalize first"
        )
    n_total = plan.total
    dim = max(n_total, 2)
    n_s = view.system_layout.size
    layout = view.system_layout.concat(Layout.of((plan.fine_label, dim), (plan.record_label, dim)))
    rows, cols, vals = [], [], []
    b = 0
    for i, n_i in enumerate(counts):
        vec = per_branch[i] * view.system_basis[:, i]
        nz = np.flatnonzero(vec)
        for _ in range(n_i):
            rows.extend(nz * dim + b)
            cols.extend([b] * len(nz))
            vals.extend(vec[nz])
            b += 1
    m = sparse.csc_matrix((vals, (rows, cols)), shape=(n_s * dim, dim), dtype=complex)
    return FineGrainedState(layout, m, tuple(view.system))


def _record_matrix(fine, record_label: str, system_labels) -> sparse.csc_matrix:
    if isinstance(fine, FineGrainedState):
        return fine.matrix
    if fine.labels[: len(system_labels)] != tuple(system_labels):
        raise LayoutError("system labels must lead the fine-grained layout")
    rest = [l for l in fine.labels if l != record_label]
    t = fine.reorder(rest + [record_label]).tensor_view()
    return sparse.csc_matrix(t.reshape(-1, fine.layout.dim(record_label)))


def count_branches(fine, view: BipartiteView, plan: FineGrainingPlan, tol: float = 1e-10) -> list[int]:
    """Count equal-amplitude record branches per system outcome.

    Each level of the coarse record ``E''`` is one branch; it is assigned to
    the system outcome carrying all of its weight. Accepts a
    :class:`FineGrainedState` or a dense state with the system labels first.
    """
    m = _record_matrix(fine, plan.record_label, view.system)
    weights = np.asarray(abs(m).power(2).sum(axis=0)).ravel()
    live = np.flatnonzero(weights > tol / max(len(weights), 1))
    if np.max(np.abs(weights[live] - weights[live[0]])) > tol:
        raise FineGrainingError("record branches do not have equal amplitude")
    n_s = view.system_layout.size
    dim_f = m.shape[0] // n_s
    overlaps = np.empty((view.rank, m.shape[1]))
    for i in range(view.rank):
        p_i = sparse.kron(sparse.csr_matrix(view.system_basis[:, i].conj()[None, :]), sparse.identity(dim_f))
        overlaps[i] = np.asarray(abs(p_i @ m).power(2).sum(axis=0)).ravel()
    overlaps = overlaps[:, live] / weights[live]
    owner = np.argmax(overlaps, axis=0)
    if np.any(overlaps[owner, np.arange(len(live))] < 1 - tol):
        raise FineGrainingError("a record branch mixes system outcomes")
    counts = np.bincount(owner, minlength=view.rank).tolist()
    return counts


@dataclass(frozen=True, eq=False)
class BornOutcome:
    index: int
    system_state: PureState
    direct: float
    counting: float | None
    branches: int | None
    error: float | None


@dataclass(frozen=True, eq=False)
class BornTable:
    outcomes: tuple[BornOutcome, ...]
    plan: FineGrainingPlan | None
    counting_skipped: bool
    bound: int

    @property
    def probabilities(self) -> np.ndarray:
        """Counting-route values, or direct values when counting was skipped."""
        return np.array([o.direct if o.counting is None else o.counting for o in self.outcomes])

    @property
    def direct(self) -> np.ndarray:
        return np.array([o.direct for o in self.outcomes])

    @property
    def max_deviation(self) -> float:
        return max((o.error for o in self.outcomes if o.error is not None), default=0.0)

    def probability_of(self, vector: PureState) -> float:
        """Probability of system state ``vector``: ``sum_i p_i |<S_i|vector>|^2``."""
        return float(sum(p * abs(inner(o.system_state, vector)) ** 2 for p, o in zip(self.probabilities, self.outcomes)))


def born_probabilities(
    s: PureState, system: Sequence[str], denominator_bound: int = DEFAULT_DENOMINATOR_BOUND
) -> BornTable:
    """Outcome probabilities for the system side, by branch counting and directly.

    Counting route: erase phases, replace the amplitudes by the nearest
    rational pattern ``sqrt(n_i/N)`` with ``N <= denominator_bound``,
    fine-grain and count record branches. When no such pattern exists the
    direct ``|Psi_i|^2`` values are returned with ``counting_skipped`` set.
    """
    view = bipartite_view(phase_erase(s, system=system), system)
    direct = view.magnitudes**2
    plan = rationalize(direct, denominator_bound)
    states = [PureState(view.system_layout, view.system_basis[:, i]) for i in range(view.rank)]
    if plan is None:
        outs = tuple(BornOutcome(i, st, float(p), None, None, None) for i, (st, p) in enumerate(zip(states, direct)))
        return BornTable(outs, None, True, denominator_bound)
    ideal_state = _rational_state(view, plan)
    ideal = bipartite_view(ideal_state, system)
    fine = fine_grain(ideal_state, ideal, plan)
    counts = count_branches(fine, ideal, plan)
    n = plan.total
    outs = tuple(
        BornOutcome(i, st, float(p), c / n, c, abs(c / n - float(p)))
        for i, (st, p, c) in enumerate(zip(states, direct, counts))
    )
    return BornTable(outs, plan, False, denominator_bound)


def _rational_state(view: BipartiteView, plan: FineGrainingPlan) -> PureState:
    """``sum_i sqrt(n_i/N) |S_i>|E_i>`` on the original layout."""
    amps = np.sqrt(np.asarray(plan.counts, dtype=float) / plan.total)
    m = view.system_basis @ np.diag(amps) @ view.environment_basis.T
    layout = view.system_layout.concat(view.environment_layout)
    return PureState(layout, m.reshape(-1))


def measured_state(amplitudes, system: str = "s", record: str = "o") -> PureState:
    """``sum_i a_i |i>_system |i>_record``: a signal after one ideal observation."""
    a = np.asarray(amplitudes, dtype=complex)
    d = a.size
    layout = Layout.of((system, d), (record, d))
    t = np.zeros((d, d), dtype=complex)
    t[np.arange(d), np.arange(d)] = a
    return PureState(layout, t.reshape(-1) / np.linalg.norm(a))
