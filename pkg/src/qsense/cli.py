"""Command-line front end: ``qsense <command> --scenario FILE``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Optional, Sequence

import numpy as np

from .hamiltonians import GeneralLocalHamiltonian, SeparableDynamics, build_orthotope, target_in_O2minus
from .hilbert import DensityMatrix, StateVector
from .noise import apply_channel, loss_scan, robustness_scan
from .privacy import ZeroInformationError, enumerate_family_specs, FamilySpec, build_family_state, \
    privacy_measure, search_max_privacy, ZERO_INFORMATION_TOL
from .qfi import (
    encoding_channel,
    qfi_mixed_eig,
    qfi_mixed_grouped,
    qfi_pure_dense,
    qfi_sld_oracle,
    qfi_structured_general,
    qfi_structured_separable,
)
from .resources import classify_zone
from .scenario import Scenario, ScenarioError, load_scenario
from .stabilizer import qfi_stabilizer

__all__ = ["main", "EXIT_OK", "EXIT_SCHEMA", "EXIT_ZERO_INFO", "EXIT_INFEASIBLE"]

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_ZERO_INFO = 3
EXIT_INFEASIBLE = 4

COMMANDS = ("qfi", "privacy", "families", "scan", "search", "orthotope", "zone")


class Infeasible(Exception):
    """The request has no solution (exit code 4)."""


class ZeroInfo(Exception):
    """The probe carries no information; the payload is still reported."""

    def __init__(self, payload):
        super().__init__("zero information: Tr Q vanishes, privacy undefined")
        self.payload = payload


def _clean(x: Any) -> Any:
    """JSON-ready copy: arrays to lists, non-finite floats to null."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        f = float(x)
        return f if math.isfinite(f) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _zone_name(sc: Scenario) -> Optional[str]:
    if sc.target is None or not isinstance(sc.dynamics, SeparableDynamics) or not sc.target.is_positive:
        return None
    return classify_zone(sc.target, sc.partition.n_vec).name


def _target_json(sc: Scenario):
    return None if sc.target is None else list(sc.target.a_vec)


def _need_target(sc: Scenario):
    if sc.target is None:
        raise ScenarioError("$.target: this command needs a target")


def _need_state(sc: Scenario):
    if sc.state is None:
        raise ScenarioError("$.state: this command needs a probe state")


def _report_json(rep) -> dict:
    return {
        "privacy": rep.privacy,
        "is_private": rep.is_private,
        "trace_qfi": rep.trace,
        "q_along_a": rep.q_along_a,
        "residual": rep.residual,
        "eigenvalues": rep.eigenvalues,
    }


def _probe(sc: Scenario):
    """State after optional pre-encoding noise, and the partition it lives on."""
    if sc.noise is None:
        return sc.state, sc.dynamics
    rho = apply_channel(sc.state, sc.noise)
    if sc.noise.kind != "loss":
        return rho, sc.dynamics
    lost = set(np.flatnonzero(sc.noise.mask).tolist())
    reduced = sc.partition.without(lost)
    if isinstance(sc.dynamics, SeparableDynamics):
        keep = [q for q in range(sc.partition.total) if q not in lost]
        dyn = SeparableDynamics(reduced, sc.dynamics.directions[keep], sc.dynamics.times)
    else:
        raise ScenarioError("$.noise: loss is only supported with separable dynamics")
    return rho, dyn


def _qfi_paths(sc: Scenario) -> tuple[dict, str]:
    state, dyn = _probe(sc)
    paths: dict[str, np.ndarray] = {}
    pure = isinstance(state, StateVector)
    if pure:
        paths["pure-dense"] = qfi_pure_dense(state, dyn).matrix
        if isinstance(dyn, SeparableDynamics):
            paths["structured-separable"] = qfi_structured_separable(state, dyn.partition, dyn).Q
        else:
            paths["structured-general"] = qfi_structured_general(state, dyn).Q
        if sc.tableau is not None and isinstance(dyn, SeparableDynamics) and dyn.pauli_axes() is not None:
            paths["stabilizer"] = qfi_stabilizer(sc.tableau, dyn.partition, dyn).matrix
        primary = "pure-dense"
    else:
        paths["mixed-eig"] = qfi_mixed_eig(state, dyn).matrix
        if sc.mixture is not None and sc.noise is None:
            paths["mixed-grouped"] = qfi_mixed_grouped(sc.mixture[0], sc.mixture[1], dyn).matrix
        primary = "mixed-eig"
    if dyn.n <= 6:
        paths["mixed-sld-oracle"] = qfi_sld_oracle(encoding_channel(state, dyn), np.zeros(dyn.k)).matrix
    return paths, primary


def cmd_qfi(sc: Scenario, args) -> dict:
    _need_state(sc)
    paths, primary = _qfi_paths(sc)
    q = paths[primary]
    out = {
        "command": "qfi",
        "partition": list(sc.partition.n_vec),
        "target": _target_json(sc),
        "zone": _zone_name(sc),
        "state": sc.state_kind,
        "noise": None if sc.noise is None else sc.noise.kind,
        "primary": primary,
        "paths": paths,
        "zero_information": bool(np.trace(q) <= ZERO_INFORMATION_TOL),
        "privacy": None,
    }
    if out["zero_information"]:
        raise ZeroInfo(out)
    if sc.target is not None:
        out["privacy"] = _report_json(privacy_measure(q, sc.target))
    return out


def cmd_privacy(sc: Scenario, args) -> dict:
    _need_target(sc)
    _need_state(sc)
    paths, primary = _qfi_paths(sc)
    q = paths[primary]
    out = {"command": "privacy", "partition": list(sc.partition.n_vec), "target": _target_json(sc),
           "zone": _zone_name(sc), "provenance": primary, "qfi": q}
    if np.trace(q) <= ZERO_INFORMATION_TOL:
        out["zero_information"] = True
        raise ZeroInfo(out)
    out.update(_report_json(privacy_measure(q, sc.target)))
    return out


def cmd_families(sc: Scenario, args) -> dict:
    _need_target(sc)
    if not sc.target.is_positive:
        raise ScenarioError("$.target: families need a positive target")
    try:
        specs = enumerate_family_specs(sc.partition, sc.target)
    except ValueError as exc:
        raise Infeasible("no private family exists in this zone") from exc
    dyn = SeparableDynamics.z(sc.partition)
    rows = []
    for d in specs:
        f = FamilySpec(sc.partition, sc.target, d)
        psi = build_family_state(f)
        rep = privacy_measure(qfi_pure_dense(psi, dyn), sc.target)
        rows.append({"d": list(d), "upper": list(f.upper), "privacy": rep.privacy, "trace_qfi": rep.trace})
    return {"command": "families", "partition": list(sc.partition.n_vec), "target": _target_json(sc),
            "zone": _zone_name(sc), "count": len(specs), "families": rows}


def _parse_grid(text: str) -> list[float]:
    text = text.strip()
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ScenarioError(f"--grid: cannot parse {text!r}; use start:stop:num or a comma list") from exc


def cmd_scan(sc: Scenario, args) -> dict:
    _need_target(sc)
    _need_state(sc)
    scan = sc.raw.get("scan")
    if scan is None:
        raise ScenarioError("$.scan: this command needs a scan section")
    if scan["kind"] == "loss":
        order = scan["order"]
        if args.grid:
            order = order[: int(_parse_grid(args.grid)[-1])]
        curve = loss_scan(sc.state, order, a=sc.target, partition=sc.partition)
    else:
        grid = _parse_grid(args.grid) if args.grid else scan.get("grid")
        if not grid:
            raise ScenarioError("$.scan.grid: give a grid here or with --grid")
        bad = [g for g in grid if not 0.0 <= g <= 1.0]
        if bad:
            raise ScenarioError(f"--grid: values {bad} outside [0, 1]")
        curve = robustness_scan(sc.state, scan["kind"], grid, sc.target, sc.dynamics,
                                convention=scan.get("convention", "keep"))
    return {"command": "scan", "kind": curve.kind, "target": _target_json(sc),
            "columns": list(curve.COLUMNS),
            "rows": [{"p": r.p, "privacy": r.privacy, "trace_qfi": r.trace_qfi,
                      "q_along_a": r.q_along_a, "qfi": r.qfi} for r in curve.rows]}


def cmd_search(sc: Scenario, args) -> dict:
    _need_target(sc)
    cfg = sc.raw.get("search", {})
    restarts = args.restarts if args.restarts is not None else cfg.get("restarts", 200)
    budget = cfg.get("budget", 5000)
    seed = args.seed if args.seed is not None else sc.seed
    res = search_max_privacy(sc.dynamics, sc.target, restarts=restarts, budget=budget, seed=seed)
    amps = res.state.amps
    return {"command": "search", "partition": list(sc.partition.n_vec), "target": _target_json(sc),
            "zone": _zone_name(sc), "seed": seed, "restarts": restarts, "budget": budget,
            "best_privacy": res.best_privacy, "converged": res.converged, "evaluations": res.evaluations,
            "state": [[float(z.real), float(z.imag)] for z in amps]}


def cmd_orthotope(sc: Scenario, args) -> dict:
    o = build_orthotope(sc.dynamics)
    out = {"command": "orthotope", "partition": list(sc.partition.n_vec), "n_points": int(o.points.shape[0]),
           "n_differences": int(o.differences.shape[0]), "points": o.points,
           "lower": o.lower, "upper": o.upper, "target": _target_json(sc), "witness": None}
    if sc.target is not None:
        w = target_in_O2minus(sc.target, o)
        if w is None:
            out["message"] = "no private state exists for this target"
            raise Infeasible(out)
        out["witness"] = {"c_i": list(w.c_i), "c_j": list(w.c_j), "alpha": w.alpha}
    return out


def cmd_zone(sc: Scenario, args) -> dict:
    _need_target(sc)
    if not sc.target.is_positive:
        raise ScenarioError("$.target: zones are defined for positive targets")
    return {"command": "zone", "partition": list(sc.partition.n_vec), "target": _target_json(sc),
            "zone": classify_zone(sc.target, sc.partition.n_vec).name}


_HANDLERS = {"qfi": cmd_qfi, "privacy": cmd_privacy, "families": cmd_families, "scan": cmd_scan,
             "search": cmd_search, "orthotope": cmd_orthotope, "zone": cmd_zone}


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return "%.17g" % float(x)


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_clean(payload), indent=2, allow_nan=False) + "\n"
    if payload.get("command") != "scan":
        raise ScenarioError("--format csv is only available for scan")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(payload["columns"])
    for r in payload["rows"]:
        w.writerow([_fmt(_clean(r[c])) for c in payload["columns"]])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsense", description="Privacy analysis for distributed quantum sensing.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", required=True, metavar="FILE", help="scenario JSON file")
    ap.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    ap.add_argument("--out", default=None, metavar="FILE", help="write output here instead of stdout")
    ap.add_argument("--format", choices=("json", "csv"), default=None,
                    help="output format (default: csv for scan, json otherwise)")
    ap.add_argument("--restarts", type=int, default=None, help="search restarts")
    ap.add_argument("--grid", default=None, help="scan grid: start:stop:num or comma list")
    return ap


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.format or ("csv" if args.command == "scan" else "json")
    try:
        if args.restarts is not None and args.restarts < 1:
            raise ScenarioError("--restarts must be positive")
        sc = load_scenario(args.scenario)
        payload = _HANDLERS[args.command](sc, args)
        _emit(render(payload, fmt), args.out)
        return EXIT_OK
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ZeroInfo as exc:
        _emit(render(exc.payload, "json"), args.out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_INFO
    except ZeroInformationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_INFO
    except Infeasible as exc:
        payload = exc.args[0] if exc.args and isinstance(exc.args[0], dict) else None
        if payload is not None:
            _emit(render(payload, "json"), args.out)
            print(f"error: {payload['message']}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
