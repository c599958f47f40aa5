"""Collapse-free measurement: imprint + swap, environment correction, and the correlation ledger."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InsufficientCorrelationError, LayoutError, NormalizationError, UncorrectedWarning
from .ops import apply_imprint, apply_imprint_inverse, apply_swap
from .state import Layout, PureState, ZERO_PROB, outcome_distribution

PATTERN_TOL = 1e-10


@dataclass(frozen=True)
class Cluster:
    members: tuple[str, ...]
    measure: int

    def to_json(self):
        return {"members": list(self.members), "measure": self.measure}


@dataclass(frozen=True)
class CorrelationLedger:
    """Classical bookkeeping of mutually correlated groups.

    A cluster of ``n`` perfectly correlated qudits carries measure ``n - 1``:
    the number of further signal-observer pairs it can correlate.
    """

    clusters: tuple[Cluster, ...] = ()

    @property
    def total(self) -> int:
        return sum(c.measure for c in self.clusters)

    def find(self, label: str) -> int | None:
        for i, c in enumerate(self.clusters):
            if label in c.members:
                return i
        return None

    def add(self, members: Sequence[str]) -> CorrelationLedger:
        members = tuple(members)
        for m in members:
            if self.find(m) is not None:
                raise LayoutError(f"{m!r} already belongs to a correlated cluster")
        return CorrelationLedger(self.clusters + (Cluster(members, len(members) - 1),))

    def _replace(self, idx: int, members: tuple[str, ...]) -> tuple[Cluster, ...]:
        clusters = list(self.clusters)
        if len(members) < 2:
            del clusters[idx]
        else:
            clusters[idx] = Cluster(members, len(members) - 1)
        return tuple(clusters)

    def swapped(self, a: str, b: str) -> CorrelationLedger:
        """Ledger after exchanging the states of ``a`` and ``b``."""
        swap = {a: b, b: a}
        return CorrelationLedger(
            tuple(Cluster(tuple(swap.get(m, m) for m in c.members), c.measure) for c in self.clusters)
        )

    def spend(self, e1: str, e2: str, signal: str, observer: str) -> CorrelationLedger:
        """Ledger after one corrected measurement using ``e1``/``e2``.

        ``e1`` leaves its cluster (one unit spent), ``e1`` inherits whatever
        correlations the observer had, and the observer joins the signal's
        cluster (one unit gained).
        """
        idx = self.find(e1)
        if idx is None or e2 not in self.clusters[idx].members or self.clusters[idx].measure < 1:
            raise InsufficientCorrelationError(
                f"{e1!r} and {e2!r} are not members of one cluster with measure >= 1"
            )
        env = self.clusters[idx]
        led = CorrelationLedger(self._replace(idx, tuple(m for m in env.members if m != e1)))
        oi = led.find(observer)
        if oi is not None:
            members = tuple(e1 if m == observer else m for m in led.clusters[oi].members)
            led = CorrelationLedger(led._replace(oi, members))
        si = led.find(signal)
        if si is None:
            return CorrelationLedger(led.clusters + (Cluster((signal, observer), 1),))
        return CorrelationLedger(led._replace(si, led.clusters[si].members + (observer,)))

    def to_json(self):
        return {"clusters": [c.to_json() for c in self.clusters], "total": self.total}


def correlated_state(chi: Sequence[complex], labels: Sequence[str], d: int, basis=None) -> PureState:
    """``sum_k chi_k |k>^{(x) n}`` on the given labels, optionally in a rotated basis."""
    chi = np.asarray(chi, dtype=complex)
    if chi.size != d:
        raise LayoutError(f"need {d} amplitudes, got {chi.size}")
    if abs(np.linalg.norm(chi) - 1) > PATTERN_TOL:
        raise NormalizationError("environment amplitudes are not normalized")
    n = len(labels)
    layout = Layout(tuple((l, d) for l in labels))
    t = np.zeros((d,) * n, dtype=complex)
    for k in range(d):
        t[(k,) * n] = chi[k]
    if basis is not None:
        w = np.asarray(basis, dtype=complex)
        for ax in range(n):
            t = np.moveaxis(np.tensordot(w, t, axes=([1], [ax])), 0, ax)
    return PureState(layout, t.reshape(-1))


def make_environment(
    chi: Sequence[complex], n: int, d: int, labels: Sequence[str] | None = None, basis=None
) -> tuple[PureState, CorrelationLedger]:
    """Correlated environment of ``n`` qudits and a ledger with one cluster of measure ``n - 1``."""
    if n < 2:
        raise InsufficientCorrelationError(f"a correlated environment needs n >= 2 qudits, got {n}")
    labels = list(labels) if labels is not None else [f"e{i + 1}" for i in range(n)]
    if len(labels) != n:
        raise LayoutError(f"{n} labels required, got {len(labels)}")
    state = correlated_state(chi, labels, d, basis)
    return state, CorrelationLedger().add(labels)


def is_correlated(s: PureState, labels: Sequence[str], basis=None, tol: float = PATTERN_TOL) -> bool:
    """True when the joint outcome distribution of ``labels`` lives on all-equal tuples."""
    dims = {s.layout.dim(l) for l in labels}
    if len(dims) != 1:
        return False
    d = dims.pop()
    probs = outcome_distribution(s, labels, {l: basis for l in labels} if basis is not None else None)
    diag = sum(probs[(k,) * len(labels)] for k in range(d))
    return bool(1.0 - diag < tol)


def verify_ledger(s: PureState, ledger: CorrelationLedger, basis=None) -> list[Cluster]:
    """Clusters whose members are present in ``s`` but not perfectly correlated."""
    bad = []
    for c in ledger.clusters:
        if all(m in s.layout for m in c.members) and not is_correlated(s, c.members, basis):
            bad.append(c)
    return bad


def measure_raw(s: PureState, signal: str, observer: str, env: str, basis=None, record=None) -> PureState:
    """Imprint the signal onto ``env``, then swap observer and ``env``."""
    s = apply_imprint(s, signal, env, basis)
    s = apply_swap(s, observer, env)
    if record is not None:
        record.extend([("imprint", signal, env, basis), ("swap", observer, env)])
    return s


@dataclass(frozen=True, eq=False)
class Branch:
    k: int
    weight: float
    component: PureState | None

    @property
    def amplitude(self) -> float:
        """Magnitude of the branch amplitude; its phase is not observable from the state alone."""
        return float(np.sqrt(self.weight))


@dataclass(frozen=True, eq=False)
class BranchDecomposition:
    branches: tuple[Branch, ...]

    @property
    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.branches])

    @property
    def agreement(self) -> float:
        return self.branches[0].weight

    @property
    def misaligned_mass(self) -> float:
        return float(sum(b.weight for b in self.branches[1:]))

    def nonzero(self, tol: float = ZERO_PROB) -> list[Branch]:
        return [b for b in self.branches if b.weight > tol]


def decompose_branches(s: PureState, signal: str, observer: str, basis=None) -> BranchDecomposition:
    """Split ``s`` by misalignment ``k``: observer index = signal index + k (mod d)."""
    i_s, i_o = s.layout.axis(signal), s.layout.axis(observer)
    d = s.dims[i_s]
    if s.dims[i_o] != d:
        raise LayoutError("signal and observer dimensions differ")
    t = s.tensor_view()
    if basis is not None:
        w = np.asarray(basis, dtype=complex).conj().T
        for ax in (i_s, i_o):
            t = np.moveaxis(np.tensordot(w, t, axes=([1], [ax])), 0, ax)
    t = np.moveaxis(t, (i_s, i_o), (-2, -1))
    idx = np.arange(d)
    branches = []
    for k in range(d):
        mask = np.zeros((d, d), dtype=bool)
        mask[idx, (idx + k) % d] = True
        part = np.where(mask, t, 0)
        weight = float(np.sum(np.abs(part) ** 2))
        comp = None
        if weight > ZERO_PROB:
            comp_t = np.moveaxis(part, (-2, -1), (i_s, i_o))
            if basis is not None:
                wb = np.asarray(basis, dtype=complex)
                for ax in (i_s, i_o):
                    comp_t = np.moveaxis(np.tensordot(wb, comp_t, axes=([1], [ax])), 0, ax)
            comp = PureState(s.layout, comp_t.reshape(-1) / np.sqrt(weight))
        branches.append(Branch(k, weight, comp))
    return BranchDecomposition(tuple(branches))


def measure_corrected(
    s: PureState,
    signal: str,
    observer: str,
    ledger: CorrelationLedger,
    e1: str | None = None,
    e2: str | None = None,
    basis=None,
    record=None,
) -> tuple[PureState, CorrelationLedger]:
    """Raw measurement through ``e1`` followed by the inverse imprint ``e2 -> observer``.

    When ``e1``/``e2`` are omitted the first two members of the first usable
    cluster in ledger order are taken. If the pair does not carry the
    correlated pattern an :class:`UncorrectedWarning` is emitted and the
    state is returned as computed.
    """
    if e1 is None or e2 is None:
        e1, e2 = pick_environment(ledger, exclude=(signal, observer))
    if len({signal, observer, e1, e2}) != 4:
        raise LayoutError("signal, observer, e1 and e2 must be distinct subsystems")
    new_ledger = ledger.spend(e1, e2, signal, observer)
    if not is_correlated(s, (e1, e2), basis):
        warnings.warn(
            f"environment pair ({e1}, {e2}) is not perfectly correlated; correction not guaranteed",
            UncorrectedWarning,
            stacklevel=2,
        )
    s = measure_raw(s, signal, observer, e1, basis, record)
    s = apply_imprint_inverse(s, e2, observer, basis)
    if record is not None:
        record.append(("imprint_inverse", e2, observer, basis))
    return s, new_ledger


def pick_environment(ledger: CorrelationLedger, exclude: Sequence[str] = ()) -> tuple[str, str]:
    for c in ledger.clusters:
        if c.measure >= 1 and not set(c.members) & set(exclude):
            return c.members[0], c.members[1]
    raise InsufficientCorrelationError("no cluster with remaining correlation is available")


def join_network(
    s: PureState, observer: str, ledger: CorrelationLedger, env: str | None = None
) -> tuple[PureState, CorrelationLedger]:
    """Observer dumps its state onto an environment qudit and takes its place in the cluster."""
    if env is None:
        env = pick_environment(ledger, exclude=(observer,))[0]
    return apply_swap(s, observer, env), ledger.swapped(observer, env)

