"""Experiment configuration: schema validation, hashing and run manifests.

One JSON document drives every command.  Each section is optional so small
jobs stay small, but whatever is present is validated before any work
starts, and every run directory receives the resolved configuration plus a
manifest of produced files keyed by the configuration hash.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

from .dataset import ArtificialSpec
from .lattice import (
    Boundary,
    Case,
    ConfigurationError,
    EqOrder,
    GaussianJets,
    KolmogorovInit,
    LatticeConfig,
)
from .training import LossSpec, TrainConfig

_NUM = {"type": "number"}
_INT = {"type": "integer"}

FORCE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["none", "gaussian_jets", "kolmogorov_init"]},
        "g0": _NUM, "width": _NUM,
        "yh1": _NUM, "yh2": _NUM, "xv1": _NUM, "xv2": _NUM,
        "ax": _NUM, "ay": _NUM, "kx": _INT, "ky": _INT,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

LATTICE_SCHEMA = {
    "type": "object",
    "properties": {
        "nx": _INT, "ny": _INT, "tau": _NUM,
        "order": {"enum": ["linear", "quadratic"]},
        "boundary": {"enum": ["periodic", "inlet_outlet"]},
        "u_max": _NUM,
        "plate_x": _INT, "plate_len": _INT,
        "force": FORCE_SCHEMA,
    },
    "required": ["nx", "ny"],
    "additionalProperties": False,
}

DATASET_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["artificial", "harvest"]},
        "n": _INT,
        "u0_max": _NUM,
        "sigma_min": {"type": ["number", "array"]},
        "sigma_max": {"type": ["number", "array"]},
        "correlation": {"enum": ["tgv_angle", "independent"]},
        "seed": _INT,
        "tau": _NUM,
        "case": {"enum": [c.value for c in Case]},
        "steps": _INT,
        "lattice": LATTICE_SCHEMA,
        "limit": _INT,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

LOSS_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["amp_phase", "amp", "rho", "rho_reduced"]},
        "phase_weight": _NUM,
        "macro_weight": _NUM,
        "macro_mode": {"enum": ["mse_vel", "rel_vel", "full_m"]},
        "nonunitary_target": {"type": "boolean"},
        "phase_ref_weighted": {"type": "boolean"},
    },
    "additionalProperties": False,
}

TRAIN_SCHEMA = {
    "type": "object",
    "properties": {
        "model": {"enum": ["single", "dual"]},
        "layers": _INT, "epochs": _INT, "batch_size": _INT,
        "learning_rate": _NUM, "seed": _INT, "init_scale": _NUM,
        "input_field": {"enum": ["lin", "str"]},
        "target_field": {"enum": ["ref", "lin"]},
        "grad_method": {"enum": ["adjoint", "param_shift"]},
        "validate_every": _INT,
        "loss": LOSS_SCHEMA,
    },
    "additionalProperties": False,
}

HYBRID_SCHEMA = {
    "type": "object",
    "properties": {
        "mode": {"enum": ["measured", "coherent", "postselect"]},
        "force_scale": _NUM,
        "handoff": _INT,
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "seed": _INT,
        "case": {"enum": [c.value for c in Case]},
        "steps": _INT,
        "output_dir": {"type": "string"},
        "lattice": LATTICE_SCHEMA,
        "dataset": DATASET_SCHEMA,
        "train": TRAIN_SCHEMA,
        "hybrid": HYBRID_SCHEMA,
    },
    "additionalProperties": False,
}


def validate_config(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"invalid configuration: {exc.message}") from exc
    return doc


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"configuration is not valid JSON: {exc}") from exc
    return validate_config(doc)


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# section resolvers
# ---------------------------------------------------------------------------

def build_force(doc: dict | None):
    if doc is None or doc.get("kind", "none") == "none":
        return None
    if doc["kind"] == "gaussian_jets":
        return GaussianJets(doc["g0"], doc["width"], doc["yh1"], doc["yh2"],
                            doc["xv1"], doc["xv2"])
    return KolmogorovInit(doc["ax"], doc["ay"], doc.get("kx", 1), doc.get("ky", 1))


def build_lattice(doc: dict) -> LatticeConfig:
    return LatticeConfig(
        nx=doc["nx"], ny=doc["ny"], tau=doc.get("tau", 1.0),
        order=EqOrder(doc.get("order", "quadratic")),
        boundary=Boundary(doc.get("boundary", "periodic")),
        force=build_force(doc.get("force")),
        u_max=doc.get("u_max", 0.05),
        plate_x=doc.get("plate_x"), plate_len=doc.get("plate_len"),
    )


def build_artificial_spec(doc: dict) -> ArtificialSpec:
    return ArtificialSpec(
        u0_max=doc.get("u0_max", 0.05),
        sigma_min=doc.get("sigma_min", 0.0),
        sigma_max=doc.get("sigma_max", 1e-4),
        correlation=doc.get("correlation", "tgv_angle"),
        n=doc.get("n", 1000),
        seed=doc.get("seed", 0),
        tau=doc.get("tau", 1.0),
    )


def build_loss(doc: dict | None) -> LossSpec:
    doc = doc or {}
    return LossSpec(
        kind=doc.get("kind", "rho"),
        phase_weight=doc.get("phase_weight", 1e-4),
        macro_weight=doc.get("macro_weight", 0.0),
        macro_mode=doc.get("macro_mode", "mse_vel"),
        nonunitary_target=doc.get("nonunitary_target", False),
        phase_ref_weighted=doc.get("phase_ref_weighted", False),
    )


def build_train(doc: dict) -> TrainConfig:
    return TrainConfig(
        epochs=doc.get("epochs", 20),
        layers=doc.get("layers", 20),
        batch_size=doc.get("batch_size", 32),
        learning_rate=doc.get("learning_rate", 1e-4),
        seed=doc.get("seed", 0),
        loss=build_loss(doc.get("loss")),
        model=doc.get("model", "single"),
        input_field=doc.get("input_field", "lin"),
        target_field=doc.get("target_field", "ref"),
        init_scale=doc.get("init_scale", 0.01),
        grad_method=doc.get("grad_method", "adjoint"),
        validate_every=doc.get("validate_every", 0),
    )


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------

def prepare_run_dir(root: Path, name: str, doc: dict, force: bool) -> Path:
    """Create the content-addressed run directory and drop the resolved config."""
    run = Path(root) / f"{name}-{config_hash(doc)}"
    if run.exists() and any(run.iterdir()) and not force:
        raise ConfigurationError(
            f"output directory {run} already has results; pass --force to overwrite")
    run.mkdir(parents=True, exist_ok=True)
    with open(run / "resolved_config.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return run


def write_manifest(run_dir: Path, command: str, doc: dict, files) -> Path:
    entries = []
    for f in sorted(Path(p) for p in files):
        data = f.read_bytes()
        entries.append({
            "path": f.name,
            "bytes": len(data),
            "sha256": hashlib.sha256(data).hexdigest()[:16],
        })
    manifest = {
        "command": command,
        "config_hash": config_hash(doc),
        "files": entries,
    }
    path = Path(run_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return path
