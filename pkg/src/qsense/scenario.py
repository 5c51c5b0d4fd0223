"""
Scenario files: JSON descriptions of a partition, target, dynamics, probe
state and optional noise, search and scan settings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional

import jsonschema
import numpy as np

from .hamiltonians import Dynamics, GeneralLocalHamiltonian, SeparableDynamics
from .hilbert import DensityMatrix, StateVector, ghz
from .noise import ChannelSpec
from .privacy import FamilySpec, LogicalBlock, LogicalSpec, build_family_state, build_logical_state, logical_partition
from .resources import ResourcePartition, TargetFunction, preceq
from .stabilizer import Tableau, stabilizer_state_vector

__all__ = ["SCHEMA", "ScenarioError", "Scenario", "load_scenario", "parse_scenario"]

_complex = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_complex_list = {"type": "array", "items": _complex, "minItems": 1}
_int_vec = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}
_rational = {
    "anyOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$|^\s*-?\d*\.\d+\s*$"},
    ]
}

_state_schemas = [
    {"properties": {"type": {"const": "ghz"}, "alpha": _complex, "beta": _complex},
     "required": ["type"], "additionalProperties": False},
    {"properties": {"type": {"const": "family"}, "d": _int_vec, "alpha": _complex, "beta": _complex,
                    "low": _complex_list, "high": _complex_list},
     "required": ["type", "d"], "additionalProperties": False},
    {"properties": {"type": {"const": "logical"},
                    "blocks": {"type": "array", "minItems": 1, "items": {
                        "type": "object",
                        "properties": {"n": _int_vec, "d": _int_vec, "low": _complex_list, "high": _complex_list},
                        "required": ["n", "d"], "additionalProperties": False}},
                    "amplitudes": _complex_list},
     "required": ["type", "blocks", "amplitudes"], "additionalProperties": False},
    {"properties": {"type": {"const": "amplitudes"}, "amplitudes": _complex_list},
     "required": ["type", "amplitudes"], "additionalProperties": False},
    {"properties": {"type": {"const": "stabilizer"},
                    "generators": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
     "required": ["type", "generators"], "additionalProperties": False},
    {"properties": {"type": {"const": "mixture"},
                    "weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                    "states": {"type": "array", "items": {"$ref": "#/$defs/pure_state"}, "minItems": 1}},
     "required": ["type", "weights", "states"], "additionalProperties": False},
]

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "$defs": {
        "pure_state": {"type": "object", "oneOf": _state_schemas[:5]},
    },
    "properties": {
        "partition": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "target": {"type": "array", "items": _rational, "minItems": 1},
        "dynamics": {
            "type": "object",
            "oneOf": [
                {"properties": {"type": {"const": "z"},
                                "times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}},
                 "required": ["type"], "additionalProperties": False},
                {"properties": {"type": {"const": "separable"},
                                "letters": {"type": "string", "pattern": "^[XYZxyz]+$"},
                                "directions": {"type": "array", "items": {
                                    "type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
                                "times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}},
                 "required": ["type"], "additionalProperties": False},
                {"properties": {"type": {"const": "general"},
                                "nodes": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
                 "required": ["type", "nodes"], "additionalProperties": False},
            ],
        },
        "state": {"type": "object", "oneOf": _state_schemas},
        "noise": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["dephasing", "bitflip", "depolarizing", "amplitude-damping", "loss"]},
                "p": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1},
                                {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}}]},
                "lost": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "convention": {"enum": ["keep", "error-rate"]},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "search": {
            "type": "object",
            "properties": {"restarts": {"type": "integer", "minimum": 1},
                           "budget": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "scan": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["dephasing", "bitflip", "depolarizing", "amplitude-damping", "loss"]},
                "grid": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                "order": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "convention": {"enum": ["keep", "error-rate"]},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["partition"],
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """Schema violation or inconsistent scenario."""


def _path(err: jsonschema.ValidationError) -> str:
    out = "$"
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def _cplx(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _cplx_arr(vs) -> np.ndarray:
    return np.array([_cplx(v) for v in vs], dtype=complex)


@dataclass(frozen=True, eq=False)
class Scenario:
    raw: dict
    partition: ResourcePartition
    target: Optional[TargetFunction]
    dynamics: Dynamics
    state: Any
    tableau: Optional[Tableau]
    mixture: Optional[tuple[np.ndarray, list[np.ndarray]]]
    noise: Optional[ChannelSpec]
    seed: int

    @property
    def state_kind(self) -> Optional[str]:
        s = self.raw.get("state")
        return None if s is None else s["type"]


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(data)


def _dynamics(spec: Optional[dict], p: ResourcePartition) -> Dynamics:
    if spec is None or spec["type"] == "z":
        times = None if spec is None else spec.get("times")
        return SeparableDynamics.z(p, times)
    if spec["type"] == "separable":
        if ("letters" in spec) == ("directions" in spec):
            raise ScenarioError("$.dynamics: give exactly one of letters or directions")
        if "letters" in spec:
            if len(spec["letters"]) != p.total:
                raise ScenarioError(f"$.dynamics.letters: {len(spec['letters'])} letters for {p.total} qubits")
            return SeparableDynamics.from_letters(p, spec["letters"], spec.get("times"))
        return SeparableDynamics(p, np.asarray(spec["directions"], dtype=float), spec.get("times"))
    if len(spec["nodes"]) != p.k:
        raise ScenarioError(f"$.dynamics.nodes: {len(spec['nodes'])} node Hamiltonians for {p.k} nodes")
    return GeneralLocalHamiltonian.from_texts(p, spec["nodes"])


def _pure_state(spec: dict, p: ResourcePartition, a: Optional[TargetFunction], where: str):
    kind = spec["type"]
    if kind == "ghz":
        return ghz(p, _cplx(spec.get("alpha", 2 ** -0.5)), _cplx(spec.get("beta", 2 ** -0.5))), None
    if kind in ("family", "logical") and a is None:
        raise ScenarioError(f"{where}: a {kind} state needs a target")
    if kind == "family":
        low = _cplx_arr(spec["low"]) if "low" in spec else None
        high = _cplx_arr(spec["high"]) if "high" in spec else None
        f = FamilySpec(p, a, tuple(spec["d"]), _cplx(spec.get("alpha", 2 ** -0.5)),
                       _cplx(spec.get("beta", 2 ** -0.5)), low, high)
        return build_family_state(f), None
    if kind == "logical":
        blocks = tuple(LogicalBlock(tuple(b["n"]), tuple(b["d"]),
                                    _cplx_arr(b["low"]) if "low" in b else None,
                                    _cplx_arr(b["high"]) if "high" in b else None) for b in spec["blocks"])
        ls = LogicalSpec(a, blocks, _cplx_arr(spec["amplitudes"]))
        if logical_partition(ls) != p:
            raise ScenarioError(f"{where}.blocks: block sizes sum to {logical_partition(ls).n_vec}, "
                                f"partition is {p.n_vec}")
        return build_logical_state(ls), None
    if kind == "amplitudes":
        amps = _cplx_arr(spec["amplitudes"])
        if amps.size != 1 << p.total:
            raise ScenarioError(f"{where}.amplitudes: {amps.size} amplitudes for {p.total} qubits")
        return StateVector(amps), None
    t = Tableau.from_paulis(spec["generators"])
    if t.n != p.total:
        raise ScenarioError(f"{where}.generators: tableau on {t.n} qubits, partition has {p.total}")
    return stabilizer_state_vector(t), t


def parse_scenario(data: Any) -> Scenario:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ScenarioError(f"schema error at {_path(err)}: {err.message}")
    try:
        return _build(data)
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _build(data: dict) -> Scenario:
    p = ResourcePartition(tuple(data["partition"]))
    if p.total == 0:
        raise ScenarioError("$.partition: at least one qubit is needed")
    if p.total > 12:
        raise ScenarioError(f"$.partition: {p.total} qubits exceeds the 12-qubit limit")
    a = None
    if "target" in data:
        if len(data["target"]) != p.k:
            raise ScenarioError(f"$.target: {len(data['target'])} entries for {p.k} nodes")
        a = TargetFunction.from_values(data["target"])
    dyn = _dynamics(data.get("dynamics"), p)
    state = tableau = mixture = None
    if "state" in data:
        spec = data["state"]
        if spec["type"] == "mixture":
            if len(spec["weights"]) != len(spec["states"]):
                raise ScenarioError("$.state: weights and states differ in length")
            w = np.asarray(spec["weights"], dtype=float)
            if abs(w.sum() - 1.0) > 1e-10:
                raise ScenarioError(f"$.state.weights: sum to {w.sum()}, expected 1")
            vecs = [np.asarray(_pure_state(s, p, a, f"$.state.states[{i}]")[0].amps)
                    for i, s in enumerate(spec["states"])]
            mixture = (w, vecs)
            state = DensityMatrix.from_mixture(w, vecs)
        else:
            state, tableau = _pure_state(spec, p, a, "$.state")
    noise = None
    if "noise" in data:
        nz = data["noise"]
        if nz["kind"] == "loss":
            lost = nz.get("lost", [])
            if any(q >= p.total for q in lost):
                raise ScenarioError(f"$.noise.lost: qubits {lost} outside 0..{p.total - 1}")
            noise = ChannelSpec.loss(lost, p.total)
        else:
            if "p" not in nz:
                raise ScenarioError("$.noise: missing p")
            probs = np.broadcast_to(np.asarray(nz["p"], dtype=float), (p.total,)) \
                if np.ndim(nz["p"]) == 0 else np.asarray(nz["p"], dtype=float)
            if probs.size != p.total:
                raise ScenarioError(f"$.noise.p: {probs.size} probabilities for {p.total} qubits")
            noise = ChannelSpec(nz["kind"], probs=probs, convention=nz.get("convention", "keep"))
    scan = data.get("scan")
    if scan is not None:
        if scan["kind"] == "loss" and "order" not in scan:
            raise ScenarioError("$.scan: a loss scan needs an order")
        if any(q >= p.total for q in scan.get("order", [])):
            raise ScenarioError(f"$.scan.order: qubits outside 0..{p.total - 1}")
    return Scenario(data, p, a, dyn, state, tableau, mixture, noise, int(data.get("seed", 0)))
