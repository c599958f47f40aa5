"""``unimeas`` command line.

Exit codes: 0 success, 1 domain error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .born import born_probabilities, measured_state
from .errors import CompletenessError, UnimeasError
from .generalized import KrausSet, dilate, dilated_outcomes, kraus_outcomes, route_gap
from .network import (
    Network,
    epsilon_sweep,
    scenario_qudit_two_bases,
    scenario_two_bases_isolated,
    scenario_two_bases_networked,
    theory_disagreement,
    ScenarioResult,
)
from .ops import BasisRotation, rotation_qubit
from .protocol import decompose_branches, make_environment, measure_corrected, measure_raw
from .state import qudit, random_amplitudes, random_state, Layout, tensor_all

SCHEMA = "unimeas/1"
log = logging.getLogger("unimeas")


class ConfigError(Exception):
    """Invalid or unparsable config; maps to exit code 2."""


def _setup_logging():
    level = os.environ.get("UNIMEAS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def load_config(path: str | None) -> dict:
    if path is None:
        return {"schema": SCHEMA}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}") from exc
    if isinstance(cfg, dict):
        schema = cfg.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"{path}: field 'schema': unsupported value {schema!r} (expected {SCHEMA!r})")
    return cfg


def _field(cfg: dict, name: str, kind, default=None):
    if name not in cfg:
        return default
    val = cfg[name]
    try:
        return kind(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r}: {exc}") from exc


def _amplitudes(cfg: dict, name: str, d: int | None, rng) -> np.ndarray:
    """Complex vector from numbers or [re, im] pairs, 'uniform', or random when absent."""
    val = cfg.get(name)
    if val is None:
        if d is None:
            raise ConfigError(f"field {name!r} is required")
        return random_amplitudes(d, rng)
    if val == "uniform":
        return np.full(d, 1 / np.sqrt(d), dtype=complex)
    try:
        amps = np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in val])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"field {name!r}: expected numbers or [re, im] pairs") from exc
    if d is not None and amps.size != d:
        raise ConfigError(f"field {name!r}: expected {d} amplitudes, got {amps.size}")
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ConfigError(f"field {name!r}: zero vector")
    return amps / norm


def _matrix(val, name: str) -> np.ndarray:
    try:
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 3 and arr.shape[-1] == 2:
            return arr[..., 0] + 1j * arr[..., 1]
        if arr.ndim == 2:
            return arr.astype(complex)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"field {name!r}: expected a matrix of numbers or [re, im] pairs")


def _fmt(x) -> str:
    return format(float(x), ".17g")


class Output:
    def __init__(self, args, command: str):
        self.dir = Path(args.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = {
            "tool": "unimeas",
            "version": __version__,
            "command": command,
            "config": args.config,
            "seed": args.seed,
        }
        self.start = time.perf_counter()
        self.files: list[str] = []

    def json(self, name: str, payload: dict) -> Path:
        path = self.dir / name
        path.write_text(json.dumps({"manifest": self.header, **payload}, indent=2, sort_keys=True) + "\n")
        self.files.append(name)
        return path

    def csv(self, name: str, columns, rows, trailer: dict | None = None) -> Path:
        buf = io.StringIO()
        for k, v in self.header.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
        for k, v in (trailer or {}).items():
            buf.write(f"# {k}: {_fmt(v)}\n")
        path = self.dir / name
        path.write_text(buf.getvalue())
        self.files.append(name)
        return path

    def finish(self, out_dir_label: str):
        manifest = dict(self.header, out=out_dir_label, files=self.files,
                        duration_s=round(time.perf_counter() - self.start, 6))
        (self.dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def cmd_measure(args) -> int:
    cfg = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    d = _field(cfg, "d", int, 2)
    n_env = _field(cfg, "n_env", int, 3)
    mode = cfg.get("mode", "corrected")
    if mode not in ("corrected", "raw"):
        raise ConfigError(f"field 'mode': expected 'corrected' or 'raw', got {mode!r}")
    if d < 2:
        raise ConfigError("field 'd': must be >= 2")
    psi = _amplitudes(cfg, "psi", d, rng)
    phi = _amplitudes(cfg, "phi", d, rng)
    chi = _amplitudes(cfg, "chi", d, rng)
    env, ledger = make_environment(chi, n_env, d)
    state = tensor_all([qudit("s", psi), qudit("o", phi), env])
    if mode == "raw":
        final = measure_raw(state, "s", "o", "e1")
        after = None
    else:
        final, after = measure_corrected(state, "s", "o", ledger)
    dec = decompose_branches(final, "s", "o")
    rows = [(b.k, float(abs(chi[b.k]) ** 2), b.weight) for b in dec.branches if b.weight > 1e-14]
    out = Output(args, "measure")
    out.json("state.json", {"state": final.to_json()})
    if args.format == "json":
        out.json("branches.json", {"branches": [{"k": k, "chi_sq": c, "weight": w} for k, c, w in rows]})
    else:
        out.csv("branches.csv", ["k", "chi_sq", "weight"], rows)
    out.json("ledger.json", {
        "mode": mode,
        "before": ledger.to_json(),
        "after": after.to_json() if after is not None else None,
    })
    out.finish(args.out)
    for k, c, w in rows:
        print(f"k={k} |chi_k|^2={_fmt(c)} weight={_fmt(w)}")
    if after is not None:
        print(f"ledger total {ledger.total} -> {after.total}")
    return 0


def _grid(cfg: dict) -> list[float]:
    if "eps" in cfg:
        try:
            grid = [float(e) for e in cfg["eps"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'eps': {exc}") from exc
    elif "eps_grid" in cfg:
        g = cfg["eps_grid"]
        try:
            grid = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"])).tolist()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field 'eps_grid': needs start, stop, num ({exc})") from exc
    else:
        grid = np.linspace(-math.pi / 2, math.pi / 2, 1001).tolist()
    if not grid:
        raise ConfigError("field 'eps': grid is empty")
    if not all(math.isfinite(e) for e in grid):
        raise ConfigError("field 'eps': non-finite value")
    return grid


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    grid = _grid(cfg)
    table = epsilon_sweep(grid, parallel=args.parallel, seed=args.seed)
    rows = []
    for eps, p in table:
        th = float(theory_disagreement(eps))
        rows.append((eps, p, th, abs(p - th)))
    max_err = max(r[3] for r in rows)
    out = Output(args, "sweep")
    if args.format == "json":
        out.json("sweep.json", {
            "rows": [dict(zip(("eps", "p_disagree", "p_theory", "abs_err"), r)) for r in rows],
            "max_abs_err": max_err,
        })
    else:
        out.csv("sweep.csv", ["eps", "p_disagree", "p_theory", "abs_err"], rows, {"max_abs_err": max_err})
    out.finish(args.out)
    print(f"{len(rows)} points, max |P - 2cos^2 sin^2| = {max_err:.3e}")
    return 0


def cmd_born_check(args) -> int:
    cfg = load_config(args.config)
    bound = _field(cfg, "denominator_bound", int, 10**4)
    if "amplitudes" not in cfg:
        raise ConfigError("field 'amplitudes' is required")
    amps = _amplitudes(cfg, "amplitudes", None, None)
    table = born_probabilities(measured_state(amps), ["s"], bound)
    tol = 2.0 / bound
    ok = table.counting_skipped or table.max_deviation <= tol
    out = Output(args, "born-check")
    out.json("born.json", {
        "denominator_bound": bound,
        "plan": list(table.plan.counts) if table.plan else None,
        "counting_skipped": table.counting_skipped,
        "outcomes": [
            {"index": o.index, "direct": o.direct, "counting": o.counting, "branches": o.branches, "error": o.error}
            for o in table.outcomes
        ],
        "max_deviation": table.max_deviation,
        "pass": ok,
    })
    out.finish(args.out)
    if table.counting_skipped:
        print(f"rationalization failed within denominator bound {bound}; counting route skipped (fallback to |Psi_i|^2)")
    else:
        print(f"plan {table.plan.counts} (N={table.plan.total})")
    for o in table.outcomes:
        counting = "skipped" if o.counting is None else f"{o.branches}/{table.plan.total} = {o.counting:.6g}"
        print(f"outcome {o.index}: counting {counting}  direct {o.direct:.6g}")
    print(f"max deviation {table.max_deviation:.3e} (bound {tol:.1e}): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_dilate(args) -> int:
    path = args.kraus or args.config
    if path is None:
        raise ConfigError("dilate needs a Kraus file (positional or --config)")
    cfg = load_config(path)
    try:
        kraus = KrausSet.from_json(cfg)
    except UnimeasError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        dil = dilate(kraus)
    except CompletenessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"residual {exc.residual:.17g}")
        return 1
    rng = np.random.default_rng(args.seed)
    psi = random_state(Layout.of(("s", kraus.dimension)), rng)
    direct = kraus_outcomes(psi, kraus)
    gap = route_gap(direct, dilated_outcomes(psi, kraus))
    report = {
        "unitarity_residual": dil.unitarity_residual,
        "restriction_residual": dil.restriction_residual(kraus, psi.amplitudes),
        "probability_route_gap": gap,
        "probabilities": {o.label: o.probability for o in direct},
        "completeness_residual": kraus.residual,
    }
    out = Output(args, "dilate")
    out.json("dilation.json", {"dilation": dil.to_json()})
    out.json("report.json", {"report": report})
    out.finish(args.out)
    for k, v in report.items():
        print(f"{k}: {v}")
    return 0


def _scenario_rotation(cfg: dict, d: int, rng) -> BasisRotation:
    rot = cfg.get("rotation")
    if rot is None or rot == "identity":
        return BasisRotation.identity(d)
    if rot == "random":
        from scipy.stats import unitary_group

        return BasisRotation(unitary_group.rvs(d, random_state=rng))
    if isinstance(rot, dict) and "eps" in rot:
        if d != 2:
            raise ConfigError("field 'rotation.eps' only applies to qubits")
        return rotation_qubit(float(rot["eps"]))
    return BasisRotation(_matrix(rot, "rotation"))


def cmd_scenario(args) -> int:
    cfg = load_config(args.config)
    rng = np.random.default_rng(args.seed)
    env_size = _field(cfg, "env_size", int, 3)
    name = args.name
    if name == "two-bases-isolated":
        res = scenario_two_bases_isolated(_amplitudes(cfg, "psi", 2, rng), args.seed, env_size)
    elif name == "two-bases-networked":
        res = scenario_two_bases_networked(
            _amplitudes(cfg, "psi", 2, rng), _field(cfg, "secondary_count", int, 1), args.seed, env_size
        )
    elif name == "qudit-two-bases":
        d = _field(cfg, "d", int, 3)
        psi = _amplitudes(cfg, "psi", d, rng)
        res = scenario_qudit_two_bases(
            psi,
            _scenario_rotation(cfg, d, rng),
            bool(cfg.get("networked", False)),
            _field(cfg, "secondary_count", int, 1),
            args.seed,
            env_size,
        )
    elif name == "observer-chain":
        d = _field(cfg, "d", int, 2)
        psi = _amplitudes(cfg, "psi", d, rng)
        n_obs = _field(cfg, "observers", int, 3)
        net = Network(qudit("s", psi), rng, env_size)
        observers = [f"o{m + 1}" for m in range(n_obs)]
        for o in observers:
            net.observe("s", o)
        res = ScenarioResult(net.state, net.ledger)
        res.probabilities.update(
            {f"agree_s_{o}": decompose_branches(net.state, "s", o).agreement for o in observers}
        )
    else:  # argparse restricts choices
        raise ConfigError(f"unknown scenario {name!r}")
    out = Output(args, f"scenario {name}")
    out.json("result.json", {"scenario": name, "result": res.to_json()})
    out.finish(args.out)
    for k, v in res.probabilities.items():
        print(f"{k}: {v:.12g}")
    return 0


SCENARIOS = ("two-bases-isolated", "two-bases-networked", "qudit-two-bases", "observer-chain")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int, default=0, metavar="U64")
    common.add_argument("--out", default="out", metavar="DIR")
    common.add_argument("--format", choices=("json", "csv"), default="csv")
    common.add_argument("--parallel", type=int, default=None, metavar="N")

    p = argparse.ArgumentParser(prog="unimeas", description="Unitary measurement protocol simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("measure", parents=[common], help="run one signal/observer/environment measurement").set_defaults(
        func=cmd_measure
    )
    sub.add_parser("sweep", parents=[common], help="basis-mismatch disagreement sweep").set_defaults(func=cmd_sweep)
    sub.add_parser("born-check", parents=[common], help="branch-counting vs direct probabilities").set_defaults(
        func=cmd_born_check
    )
    dil = sub.add_parser("dilate", parents=[common], help="dilate a Kraus set to a unitary")
    dil.add_argument("kraus", nargs="?", help="Kraus JSON file")
    dil.set_defaults(func=cmd_dilate)
    sc = sub.add_parser("scenario", parents=[common], help="run a named observer scenario")
    sc.add_argument("name", choices=SCENARIOS)
    sc.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnimeasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
