"""Symmetry-constrained parameterized circuits for the collision models.

A circuit is an ordered gate list with *shared* parameter slots: every gate
occurrence in a rotation or Ising layer points at the same parameter index,
which is what makes the layer commute with the dihedral group action.  Two
edge sets are closed under that action on the register qubits:

    E_axial = {(0,1), (1,2), (2,3), (3,0)}
    E_diag  = {(0,2), (1,3)}

The single-register layer template is an Euler triplet Rx-Rz-Rx on all four
qubits followed by XX and ZZ Ising layers on both edge sets (7 parameters per
layer).  The dual-register variant adds a parameter-free CNOT cascade whose
controls sit on the second register, which therefore only informs the first:
no parameterized gate ever touches it.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import qsim
from .symmetry import (
    basis_permutation,
    dual_basis_permutation,
    permute_state,
    qubit_permutations,
)

E_AXIAL = ((0, 1), (1, 2), (2, 3), (3, 0))
E_DIAG = ((0, 2), (1, 3))

ROTATION_KINDS = ("rx", "ry", "rz")
ISING_KINDS = ("xx", "yy", "zz")


@dataclass(frozen=True)
class GateOp:
    kind: str                  # 'rx'|'ry'|'rz'|'xx'|'yy'|'zz'|'cnot'
    targets: tuple[int, ...]   # 1 qubit for rotations, 2 for Ising/CNOT
    param: int | None = None   # shared parameter slot; None for CNOT


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    n_params: int
    gates: tuple[GateOp, ...]

    def __post_init__(self):
        for g in self.gates:
            if g.param is not None and not (0 <= g.param < self.n_params):
                raise ValueError(f"parameter index {g.param} out of range")


def build_collision_circuit(layers: int, kind: str = "single",
                            include_y: bool = False) -> CircuitSpec:
    """Build the equivariant ansatz with the given number of layers.

    ``kind`` selects the 4-qubit single-register model or the 8-qubit
    dual-register model.  ``include_y`` appends Ry rotations and YY Ising
    layers for ablation studies (off by default; 7 parameters per layer
    without it).
    """
    if layers < 1:
        raise ValueError("need at least one layer")
    if kind not in ("single", "dual"):
        raise ValueError(f"unknown model kind {kind!r}")
    gates: list[GateOp] = []
    register = tuple(range(4))
    p = 0

    def rotation_layer(axis):
        nonlocal p
        for q in register:
            gates.append(GateOp(axis, (q,), p))
        p += 1

    def ising_layer(axis, edges):
        nonlocal p
        for (i, j) in edges:
            gates.append(GateOp(axis, (i, j), p))
        p += 1

    for _ in range(layers):
        rotation_layer("rx")
        rotation_layer("rz")
        rotation_layer("rx")
        if include_y:
            rotation_layer("ry")
        ising_layer("xx", E_AXIAL)
        ising_layer("xx", E_DIAG)
        ising_layer("zz", E_AXIAL)
        ising_layer("zz", E_DIAG)
        if include_y:
            ising_layer("yy", E_AXIAL)
            ising_layer("yy", E_DIAG)
        if kind == "dual":
            for q in register:
                gates.append(GateOp("cnot", (4 + q, q), None))

    return CircuitSpec(n_qubits=4 if kind == "single" else 8,
                       n_params=p, gates=tuple(gates))


def init_params(circuit: CircuitSpec, seed: int, scale: float = 0.01) -> np.ndarray:
    """Near-identity start: uniform angles in [-scale, scale].

    The collision correction being learned is close to the identity at low
    velocity, so small random angles avoid a large initial loss.
    """
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=circuit.n_params)


def apply_circuit(circuit: CircuitSpec, params: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Apply the circuit to a state (batched on leading axes); pure function."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got {params.shape}")
    out = np.array(state, dtype=np.complex128, copy=True)
    for g in circuit.gates:
        _apply_gate(out, g, params)
    return out


def _apply_gate(state: np.ndarray, g: GateOp, params: np.ndarray, invert: bool = False) -> None:
    if g.kind == "cnot":
        qsim.apply_cnot(state, g.targets[0], g.targets[1])
        return
    theta = float(params[g.param])
    if invert:
        theta = -theta
    if g.kind in ROTATION_KINDS:
        qsim.apply_rotation(state, g.kind[1], g.targets, theta)
    elif g.kind in ISING_KINDS:
        qsim.apply_ising(state, g.kind, [g.targets], theta)
    else:
        raise ValueError(f"unknown gate kind {g.kind!r}")


def circuit_unitary(circuit: CircuitSpec, params: np.ndarray) -> np.ndarray:
    """Dense unitary of the circuit (16x16 or 256x256)."""
    dim = 1 << circuit.n_qubits
    basis = np.eye(dim, dtype=np.complex128)  # rows are basis states
    return apply_circuit(circuit, params, basis).T


def check_d8_equivariance(circuit: CircuitSpec, params: np.ndarray) -> float:
    """Largest entry of |U_sigma U - U U_sigma| over the eight group elements.

    For the dual-register circuit the group acts simultaneously on both
    registers.  Zero (to rounding) certifies that the circuit commutes with
    the full dihedral action.
    """
    u = circuit_unitary(circuit, params)
    dev = 0.0
    for qp in qubit_permutations():
        perm = (basis_permutation(qp) if circuit.n_qubits == 4
                else dual_basis_permutation(qp))
        pu = np.empty_like(u)
        pu[perm, :] = u      # permutation after the circuit: rows move
        up = u[:, perm]      # permutation before the circuit: columns move
        dev = max(dev, float(np.abs(pu - up).max()))
    return dev


def unshare_rotation(circuit: CircuitSpec, params: np.ndarray,
                     seed: int = 0) -> tuple[CircuitSpec, np.ndarray]:
    """Negative control: give each first-layer Rx occurrence its own angle.

    The first occurrence keeps parameter slot 0; the remaining three get
    fresh independent slots seeded with distinct O(1) values, which breaks
    the shared-angle constraint and therefore the group equivariance.
    """
    rng = np.random.default_rng(seed)
    new_gates = []
    extra = 0
    seen_first = False
    for g in circuit.gates:
        if g.kind == "rx" and g.param == 0:
            if seen_first:
                new_gates.append(GateOp(g.kind, g.targets, circuit.n_params + extra))
                extra += 1
                continue
            seen_first = True
        new_gates.append(g)
    broken = CircuitSpec(circuit.n_qubits, circuit.n_params + extra, tuple(new_gates))
    broken_params = np.concatenate([params, rng.uniform(0.5, 1.5, size=extra)])
    return broken, broken_params


# ---------------------------------------------------------------------------
# model artifacts
# ---------------------------------------------------------------------------

def circuit_to_dict(circuit: CircuitSpec) -> dict:
    return {
        "n_qubits": circuit.n_qubits,
        "n_params": circuit.n_params,
        "gates": [
            {"kind": g.kind, "targets": list(g.targets), "param_index": g.param}
            for g in circuit.gates
        ],
    }


def circuit_from_dict(doc: dict) -> CircuitSpec:
    gates = tuple(
        GateOp(g["kind"], tuple(g["targets"]), g["param_index"]) for g in doc["gates"]
    )
    return CircuitSpec(doc["n_qubits"], doc["n_params"], gates)


def save_model(directory, circuit: CircuitSpec, params: np.ndarray, meta: dict) -> None:
    """Persist a trained model: circuit JSON, parameter CSV and metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "circuit.json", "w") as fh:
        json.dump(circuit_to_dict(circuit), fh, indent=1)
    with open(directory / "params.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(params, dtype=np.float64)):
            writer.writerow([i, repr(float(v))])
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)


def load_model(directory) -> tuple[CircuitSpec, np.ndarray, dict]:
    directory = Path(directory)
    with open(directory / "circuit.json") as fh:
        circuit = circuit_from_dict(json.load(fh))
    values = {}
    with open(directory / "params.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            values[int(row["index"])] = float(row["value"])
    params = np.array([values[i] for i in range(circuit.n_params)])
    with open(directory / "meta.json") as fh:
        meta = json.load(fh)
    return circuit, params, meta
