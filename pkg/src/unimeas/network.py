"""Observer chains, observers of observers, and measurements in mismatched bases."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LayoutError, NormalizationError
from .ops import BasisRotation, hadamard, rotation_qubit
from .protocol import (
    CorrelationLedger,
    decompose_branches,
    is_correlated,
    make_environment,
    measure_corrected,
)
from .state import (
    DensityMatrix,
    PureState,
    condition,
    discard,
    outcome_distribution,
    partial_trace,
    qudit,
    random_amplitudes,
    tensor,
)

DEFAULT_ENV_SIZE = 3


@dataclass
class ScenarioConfig:
    psi: np.ndarray
    d: int = 2
    observers: int = 1
    secondary_counts: tuple[int, ...] = ()
    rotation: BasisRotation | None = None
    eps_grid: tuple[float, ...] = ()
    seed: int = 0
    env_size: int = DEFAULT_ENV_SIZE
    condition_outcome: int = 0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        if self.psi.size != self.d:
            raise LayoutError(f"signal has {self.psi.size} amplitudes but d={self.d}")
        if abs(np.linalg.norm(self.psi) - 1) > 1e-10:
            raise NormalizationError("signal amplitudes are not normalized")
        if not all(math.isfinite(e) for e in self.eps_grid):
            raise ValueError("eps grid contains non-finite values")


@dataclass(eq=False)
class ScenarioResult:
    state: PureState
    ledger: CorrelationLedger
    density: dict[str, DensityMatrix] = field(default_factory=dict)
    tables: dict[str, np.ndarray] = field(default_factory=dict)
    probabilities: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        def cm(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]

        return {
            "state": self.state.to_json(),
            "ledger": self.ledger.to_json(),
            "density": {
                k: {"labels": list(v.layout.labels), "matrix": cm(v.matrix)} for k, v in self.density.items()
            },
            "tables": {k: np.asarray(v).tolist() for k, v in self.tables.items()},
            "probabilities": dict(self.probabilities),
        }


class Network:
    """Running state of a scenario: global statevector, ledger and operation record.

    Every observation draws a fresh correlated environment of ``env_size``
    qudits. Spent environment qudits factor out exactly after the
    correction step; unless ``keep_environment`` is set they are dropped
    from the statevector (the ledger keeps their clusters).
    """

    def __init__(self, signal: PureState, rng=None, env_size=DEFAULT_ENV_SIZE, keep_environment=False):
        self.state = signal
        self.ledger = CorrelationLedger()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.env_size = env_size
        self.keep_environment = keep_environment
        self.record: list[tuple] = []
        self._env_count = 0

    @property
    def d(self) -> int:
        return self.state.dims[0]

    def attach(self, label: str, amplitudes=None) -> None:
        if amplitudes is None:
            amplitudes = random_amplitudes(self.d, self.rng)
        self.state = tensor(self.state, qudit(label, amplitudes))

    def fresh_environment(self, basis=None) -> list[str]:
        self._env_count += 1
        labels = [f"env{self._env_count}_{i + 1}" for i in range(self.env_size)]
        chi = random_amplitudes(self.d, self.rng)
        env, led = make_environment(chi, self.env_size, self.d, labels, basis)
        self.state = tensor(self.state, env)
        self.ledger = CorrelationLedger(self.ledger.clusters + led.clusters)
        return labels

    def observe(self, signal: str, observer: str, basis=None, envs: tuple[str, str] | None = None) -> None:
        if observer not in self.state.layout:
            self.attach(observer)
        fresh = envs is None
        if fresh:
            envs = tuple(self.fresh_environment(basis)[:2])
        self.state, self.ledger = measure_corrected(
            self.state, signal, observer, self.ledger, envs[0], envs[1], basis, self.record
        )
        if fresh and not self.keep_environment:
            spent = [l for l in self.state.labels if l.startswith(f"env{self._env_count}_")]
            self.state = discard(self.state, spent)


def observe_chain(
    s: PureState,
    signal: str,
    observers: Sequence[str],
    ledger: CorrelationLedger,
    envs: Sequence[tuple[str, str]] | None = None,
    basis=None,
    record: list | None = None,
) -> tuple[PureState, CorrelationLedger]:
    """Each observer in turn performs a corrected measurement of ``signal``.

    ``envs`` gives the ``(e1, e2)`` pair consumed by each observer; by default
    pairs are taken from the ledger in order.
    """
    if envs is not None and len(envs) != len(observers):
        raise LayoutError("one environment pair per observer required")
    for m, obs in enumerate(observers):
        e1, e2 = envs[m] if envs is not None else (None, None)
        s, ledger = measure_corrected(s, signal, obs, ledger, e1, e2, basis, record)
    return s, ledger


def secondary_labels(observer: str, count: int) -> list[str]:
    return [f"{j}{observer}" for j in range(1, count + 1)]


def proliferate(
    s: PureState,
    observer: str,
    count: int,
    ledger: CorrelationLedger,
    envs: Sequence[tuple[str, str]] | None = None,
    record: list | None = None,
) -> tuple[PureState, CorrelationLedger]:
    """Secondary observers ``1<observer>``, ``2<observer>``, ... each measure ``observer``."""
    if count < 1:
        raise ValueError("proliferate needs count >= 1")
    return observe_chain(s, observer, secondary_labels(observer, count), ledger, envs, record=record)


def _rotated_two_observer_run(
    psi, rotation: BasisRotation, secondary_count: int, seed: int, env_size: int
) -> Network:
    """o1 measures s in the computational basis, optionally gets secondaries,
    then o2 measures s and o3p measures o1, both in the rotated basis."""
    psi = np.asarray(psi, dtype=complex)
    net = Network(qudit("s", psi), np.random.default_rng(seed), env_size)
    primed = rotation.primed_basis()
    net.observe("s", "o1")
    for sec in secondary_labels("o1", secondary_count):
        net.observe("o1", sec)
    net.observe("s", "o2", basis=primed)
    net.observe("o1", "o3p", basis=primed)
    return net


def scenario_qudit_two_bases(
    psi,
    u: BasisRotation,
    networked: bool = False,
    secondary_count: int = 1,
    seed: int = 0,
    env_size: int = DEFAULT_ENV_SIZE,
    condition_outcome: int = 0,
) -> ScenarioResult:
    """Two observers of a record made in the computational basis, both measuring in the rotated basis.

    ``o2`` measures the signal, ``o3p`` measures ``o1``. With ``networked``
    the first observer is itself observed by ``secondary_count`` secondary
    observers before the rotated measurements.
    """
    psi = np.asarray(psi, dtype=complex)
    if u.dimension != psi.size:
        raise LayoutError("rotation dimension does not match the signal")
    n_sec = secondary_count if networked else 0
    if networked and n_sec < 1:
        raise ValueError("networked scenario needs secondary_count >= 1")
    net = _rotated_two_observer_run(psi, u, n_sec, seed, env_size)
    final = net.state
    primed = u.primed_basis()
    joint = outcome_distribution(final, ["o2", "o3p"], {"o2": primed, "o3p": primed})
    p_dis = float(joint.sum() - np.trace(joint))

    res = ScenarioResult(final, net.ledger)
    res.tables["joint_o2_o3p"] = joint
    res.probabilities["p_disagree"] = p_dis
    res.density["rho_o2"] = partial_trace(final, ["o2"])
    try:
        p_cond, post = condition(final, "o3p", primed, condition_outcome)
        res.density["rho_o2_given_o3p"] = partial_trace(post, ["o2"])
        res.probabilities["p_o3p_outcome"] = p_cond
    except Exception as exc:  # zero-probability conditioning is reported, not fatal
        res.probabilities["p_o3p_outcome"] = 0.0
        res.tables["conditioning_error"] = np.array([str(exc)])
    if n_sec:
        secs = secondary_labels("o1", n_sec)
        res.probabilities["p_secondaries_agree"] = float(_agreement(final, secs))
    return res


def _agreement(s: PureState, labels: Sequence[str]) -> float:
    probs = outcome_distribution(s, labels)
    d = s.layout.dim(labels[0])
    return sum(probs[(k,) * len(labels)] for k in range(d))


def scenario_two_bases_isolated(psi, seed: int = 0, env_size: int = DEFAULT_ENV_SIZE, plus_first=True) -> ScenarioResult:
    """Qubit record in {|0>,|1>}; o2 and o3p use {|+>,|->}. Conditioning is on o3p = +."""
    return scenario_qudit_two_bases(psi, hadamard(), False, 0, seed, env_size, 0 if plus_first else 1)


def scenario_two_bases_networked(
    psi, secondary_count: int = 1, seed: int = 0, env_size: int = DEFAULT_ENV_SIZE
) -> ScenarioResult:
    """As the isolated scenario, but o1 is observed by secondaries first.

    Also records ``p_secondaries_agree_o1``: probability that each secondary
    agrees with o1 in {|0>,|1>} immediately after proliferation.
    """
    if secondary_count < 1:
        raise ValueError("networked scenario needs secondary_count >= 1")
    res = scenario_qudit_two_bases(psi, hadamard(), True, secondary_count, seed, env_size, 0)
    pre = Network(qudit("s", np.asarray(psi, dtype=complex)), np.random.default_rng(seed), env_size)
    pre.observe("s", "o1")
    secs = secondary_labels("o1", secondary_count)
    for sec in secs:
        pre.observe("o1", sec)
    res.probabilities["p_secondaries_agree_o1"] = min(
        decompose_branches(pre.state, "o1", sec).agreement for sec in secs
    )
    return res


def disagreement_probability(eps: float, seed: int = 0, env_size: int = DEFAULT_ENV_SIZE) -> float:
    """Disagreement between o2 and o3p for signal |0> and a qubit rotation by ``eps``."""
    return scenario_qudit_two_bases([1.0, 0.0], rotation_qubit(eps), seed=seed, env_size=env_size).probabilities[
        "p_disagree"
    ]


def theory_disagreement(eps) -> np.ndarray:
    return 2 * np.cos(eps) ** 2 * np.sin(eps) ** 2


def epsilon_sweep(grid: Sequence[float], parallel: int | None = None, seed: int = 0) -> list[tuple[float, float]]:
    """``(eps, P_disagree)`` for each grid point, in grid order."""
    grid = [float(e) for e in grid]
    if not grid:
        raise ValueError("eps grid is empty")
    if parallel and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            probs = list(pool.map(disagreement_probability, grid, [seed] * len(grid), chunksize=16))
    else:
        probs = [disagreement_probability(e, seed) for e in grid]
    return list(zip(grid, probs))
