"""Classical/quantum co-simulation of the lattice Boltzmann update.

Each step replaces the quadratic collision by the analytic linear collision
followed by the trained circuit, per site.  Three execution modes exist:

- ``measured``: physical-state probabilities are read out each step,
  renormalized to the site mass, and phases discarded;
- ``coherent``: complex channel amplitudes survive between steps (the seven
  non-physical amplitudes of the register are projected out after each
  collision and the residual is logged as leakage);
- ``postselect``: like ``measured`` but for deliberately non-unitary models,
  where the renormalization is a post-selection whose acceptance probability
  (1 - leakage) is tracked.

The reference (quadratic), baseline (linear) and circuit runs advance in
lockstep from the same initial state; every metric compares states at equal
time.  Forces and solid-boundary reflections are always applied classically
on the decoded field.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import ansatz, lattice, qsim
from .lattice import (
    Boundary,
    Case,
    EqOrder,
    InstabilityError,
    LatticeConfig,
    MOMENT_MATRIX,
    bgk_collide,
    init_case,
    jet_force_field,
    macroscopic,
    plate_mask,
)
from .qsim import CHANNEL_BASIS

log = logging.getLogger(__name__)

MODE_MEASURED = "measured"
MODE_COHERENT = "coherent"
MODE_POSTSELECT = "postselect"
MODES = (MODE_MEASURED, MODE_COHERENT, MODE_POSTSELECT)

LEAKAGE_ABORT = 0.9


class ModeError(ValueError):
    """Model and execution mode are incompatible."""


@dataclass
class HybridModel:
    """A trained collision circuit plus the context it was trained in."""

    circuit: ansatz.CircuitSpec
    params: np.ndarray
    tau: float
    kind: str = "single"          # 'single' | 'dual'
    loss_kind: str = "rho"
    nonunitary: bool = False
    meta: dict = field(default_factory=dict)

    @classmethod
    def identity(cls, tau: float = 1.0) -> "HybridModel":
        """Circuit that acts as the identity: the run reduces to linear LBM."""
        circuit = ansatz.build_collision_circuit(1, "single")
        return cls(circuit=circuit, params=np.zeros(circuit.n_params), tau=tau,
                   loss_kind="rho")

    @classmethod
    def from_artifact(cls, directory) -> "HybridModel":
        circuit, params, meta = ansatz.load_model(directory)
        return cls(
            circuit=circuit,
            params=params,
            tau=float(meta["tau"]),
            kind=meta.get("model", "single"),
            loss_kind=meta.get("loss", {}).get("kind", "rho"),
            nonunitary=bool(meta.get("loss", {}).get("nonunitary_target", False)),
            meta=meta,
        )

    def unitary(self) -> np.ndarray:
        return ansatz.circuit_unitary(self.circuit, self.params)


def validate_mode(model: HybridModel, mode: str) -> None:
    if mode not in MODES:
        raise ModeError(f"unknown mode {mode!r}; expected one of {MODES}")
    if model.kind == "dual" and mode != MODE_MEASURED:
        raise ModeError("the dual-register model must be measured every step")
    if mode == MODE_COHERENT:
        if model.nonunitary:
            raise ModeError("coherent evolution needs a unitary (phase-trained) model")
        if model.loss_kind not in ("amp_phase", "rho"):
            raise ModeError(
                f"coherent evolution needs a phase-aware loss, not {model.loss_kind!r}"
            )


# ---------------------------------------------------------------------------
# one hybrid step
# ---------------------------------------------------------------------------

def _collide_sites_measured(f_sites: np.ndarray, u_mat: np.ndarray, dual: bool,
                            tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear collision + circuit + per-step readout for (n, 9) site batch."""
    f_lin = bgk_collide(f_sites.T, tau, EqOrder.LINEAR).T
    mass = f_lin.sum(axis=1)
    psi = qsim.encode_dual(f_lin) if dual else qsim.encode_channels(f_lin)
    out = psi @ u_mat.T
    if dual:
        m = np.abs(out.reshape(-1, 16, 16)) ** 2
        probs = m.sum(axis=1)[:, CHANNEL_BASIS]  # register-1 marginal
    else:
        probs = np.abs(out[:, CHANNEL_BASIS]) ** 2
    kept = probs.sum(axis=1)
    leakage = 1.0 - kept
    f_new = probs / kept[:, None] * mass[:, None]
    return f_new, leakage


def _collide_sites_coherent(amp_sites: np.ndarray, u_mat: np.ndarray,
                            tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Coherent collision on (n, 9) complex channel amplitudes.

    Population magnitudes pass through the analytic linear collision; the
    incoming per-channel phases are retained on the re-encoded state so the
    circuit sees (and can exploit) the phase information it was trained to
    control.  Output leakage is projected out and logged.
    """
    f_str = np.abs(amp_sites) ** 2
    phases = np.angle(amp_sites)
    f_lin = bgk_collide(f_str.T, tau, EqOrder.LINEAR).T
    mass = f_lin.sum(axis=1)
    psi = np.zeros(amp_sites.shape[:-1] + (16,), dtype=np.complex128)
    psi[:, CHANNEL_BASIS] = np.sqrt(np.maximum(f_lin, 0.0) / mass[:, None]) * np.exp(1j * phases)
    out = psi @ u_mat.T
    phys = out[:, CHANNEL_BASIS]
    kept = (np.abs(phys) ** 2).sum(axis=1)
    leakage = 1.0 - kept
    amp_new = phys / np.sqrt(kept)[:, None] * np.sqrt(mass)[:, None]
    return amp_new, leakage


def step_hybrid(state, model: HybridModel, mode: str, config: LatticeConfig,
                u_mat: np.ndarray | None = None,
                force: np.ndarray | None = None,
                mask: np.ndarray | None = None):
    """Advance the hybrid field one step; returns (state, max_leakage).

    ``state`` is a real population field (9, nx, ny) in the measured modes or
    a complex channel-amplitude field in coherent mode (entry squared
    magnitudes are the populations).  Collision runs per site through the
    circuit; force, streaming, bounce-back and open boundaries are classical.
    """
    validate_mode(model, mode)
    if u_mat is None:
        u_mat = model.unitary()
    nx, ny = state.shape[1], state.shape[2]
    sites = state.reshape(9, -1).T
    fluid = None
    if mask is not None and mask.any():
        fluid = ~mask.ravel()  # solid sites carry no mass and skip the circuit
        sites = sites[fluid]
    if mode == MODE_COHERENT:
        new_fluid, leakage = _collide_sites_coherent(sites, u_mat, model.tau)
    else:
        new_fluid, leakage = _collide_sites_measured(
            sites.real, u_mat, model.kind == "dual", model.tau)
    if fluid is None:
        new_sites = new_fluid
    else:
        new_sites = np.zeros((nx * ny, 9), dtype=new_fluid.dtype)
        new_sites[fluid] = new_fluid
    max_leak = float(leakage.max()) if leakage.size else 0.0
    if mode == MODE_POSTSELECT and max_leak > LEAKAGE_ABORT:
        raise InstabilityError(
            f"leakage {max_leak:.3f} exceeds the post-selection budget", step=-1)
    f = new_sites.T.reshape(9, nx, ny)

    if mode == MODE_COHERENT:
        if (mask is not None and mask.any()) or config.boundary is Boundary.INLET_OUTLET:
            raise ModeError("coherent evolution supports periodic domains only")
        # classical sub-steps act on populations; phases ride along per channel
        phases = np.angle(f)
        pops = np.abs(f) ** 2
        if force is not None:
            pops = lattice.apply_force(pops, force)
        pops = np.maximum(pops, 0.0)
        f = np.sqrt(pops) * np.exp(1j * phases)
        f = lattice.stream(f)
    else:
        if force is not None:
            f = lattice.apply_force(f, force)
        f = lattice.stream(f)
        if mask is not None and mask.any():
            f = lattice.apply_bounce_back(f, mask)
        if config.boundary is Boundary.INLET_OUTLET:
            lattice._apply_inlet_outlet(f, config)
    return f, max_leak


# ---------------------------------------------------------------------------
# lockstep runs and metrics
# ---------------------------------------------------------------------------

REL_FLOOR = 1e-15


def velocity_error(u_model: np.ndarray, u_ref: np.ndarray) -> tuple[float, float]:
    """(max, mean) pointwise relative velocity error over the domain.

    Per site the error is |u_model - u_ref| / |u_ref|; sites where both
    vanish contribute zero.
    """
    num = np.sqrt(((u_model - u_ref) ** 2).sum(axis=0))
    den = np.sqrt((u_ref ** 2).sum(axis=0))
    rel = np.where(num == 0.0, 0.0, num / np.maximum(den, REL_FLOOR))
    return float(rel.max()), float(rel.mean())


@dataclass
class RunMetrics:
    """Per-step error record of a lockstep hybrid run."""

    steps: np.ndarray
    max_rel_u: np.ndarray        # circuit vs reference
    mean_rel_u: np.ndarray
    max_rel_u_lin: np.ndarray    # linear baseline vs reference
    mean_rel_u_lin: np.ndarray
    f_mse: np.ndarray            # circuit vs reference, per channel entry
    f_mse_lin: np.ndarray
    eta: np.ndarray              # ratio of summed squared errors
    leakage: np.ndarray
    moment_mse: np.ndarray       # (T, 3): pxx-pyy, pxy, energy

    @property
    def eps_final(self) -> float:
        return float(self.max_rel_u[-1]) if len(self.max_rel_u) else np.nan

    @property
    def eps_final_lin(self) -> float:
        return float(self.max_rel_u_lin[-1]) if len(self.max_rel_u_lin) else np.nan

    @property
    def eta_eps(self) -> float:
        """Improvement of the circuit over the linear baseline at the end."""
        return self.eps_final_lin / self.eps_final

    def to_csv(self, path) -> None:
        cols = ["step", "max_rel_u", "mean_rel_u", "max_rel_u_lin", "mean_rel_u_lin",
                "f_mse", "f_mse_lin", "eta", "leakage",
                "pxx_pyy_mse", "pxy_mse", "energy_mse"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for k in range(len(self.steps)):
                writer.writerow([int(self.steps[k])] + [
                    repr(float(v)) for v in (
                        self.max_rel_u[k], self.mean_rel_u[k],
                        self.max_rel_u_lin[k], self.mean_rel_u_lin[k],
                        self.f_mse[k], self.f_mse_lin[k], self.eta[k],
                        self.leakage[k], *self.moment_mse[k])
                ])


@dataclass
class HybridRun:
    config: LatticeConfig
    case: Case
    mode: str
    metrics: RunMetrics
    f_ref: np.ndarray            # final reference field
    f_lin: np.ndarray            # final linear-baseline field
    f_vqc: np.ndarray            # final circuit field (populations)
    u_max_history: np.ndarray    # (3, T+1): reference, linear, circuit


def _populations(state: np.ndarray) -> np.ndarray:
    return np.abs(state) ** 2 if np.iscomplexobj(state) else state


def run_hybrid(config: LatticeConfig, model: HybridModel, mode: str, T: int,
               case: Case = Case.TGV, force_scale: float = 1.0) -> HybridRun:
    """Advance reference, linear baseline and circuit runs ``T`` steps.

    ``force_scale`` rescales the body force of the circuit run only (the
    published jet comparisons drive the circuit run 20-25% harder/softer);
    it is always an explicit override, never a default.
    """
    validate_mode(model, mode)
    if abs(model.tau - config.tau) > 1e-12:
        raise ModeError(f"model was trained at tau={model.tau}, config has {config.tau}")
    f0 = init_case(case, config)
    mask = plate_mask(config) if case is Case.PLATE else None
    force = None
    if isinstance(config.force, lattice.GaussianJets):
        force = jet_force_field(config.force, config.nx, config.ny)

    u_mat = model.unitary()
    cfg_ref = config
    cfg_lin = LatticeConfig(**{**config.__dict__, "order": EqOrder.LINEAR})
    f_ref = f0.copy()
    f_lin = f0.copy()
    vqc = f0.astype(np.complex128) ** 0.5 if mode == MODE_COHERENT else f0.copy()

    rows = {k: [] for k in ("max", "mean", "max_lin", "mean_lin", "fmse",
                            "fmse_lin", "eta", "leak")}
    mom_rows = []
    umax_hist = [[], [], []]

    def record_umax(*fields):
        for j, fld in enumerate(fields):
            _, u = macroscopic(lattice.fluid_view(_populations(fld), mask))
            umax_hist[j].append(float(np.sqrt((u ** 2).sum(axis=0)).max()))

    record_umax(f_ref, f_lin, vqc)
    for t in range(1, T + 1):
        f_ref = lattice.step_field(f_ref, cfg_ref, force=force, mask=mask)
        f_lin = lattice.step_field(f_lin, cfg_lin, force=force, mask=mask)
        vqc_force = force * force_scale if force is not None else None
        vqc, leak = step_hybrid(vqc, model, mode, config, u_mat=u_mat,
                                force=vqc_force, mask=mask)
        if np.any(np.isnan(f_ref)) or np.any(np.isnan(_populations(vqc))):
            raise InstabilityError(f"NaN at step {t}", step=t)

        fv = _populations(vqc)
        _, u_ref = macroscopic(lattice.fluid_view(f_ref, mask))
        _, u_lin = macroscopic(lattice.fluid_view(f_lin, mask))
        _, u_vqc = macroscopic(lattice.fluid_view(fv, mask))
        mx, mn = velocity_error(u_vqc, u_ref)
        mxl, mnl = velocity_error(u_lin, u_ref)
        rows["max"].append(mx); rows["mean"].append(mn)
        rows["max_lin"].append(mxl); rows["mean_lin"].append(mnl)
        err_v = ((fv - f_ref) ** 2)
        err_l = ((f_lin - f_ref) ** 2)
        rows["fmse"].append(float(err_v.mean()))
        rows["fmse_lin"].append(float(err_l.mean()))
        denom = float(err_l.sum())
        rows["eta"].append(float(err_v.sum()) / denom if denom > 0 else np.nan)
        rows["leak"].append(leak)
        m_v = np.tensordot(MOMENT_MATRIX[2:], fv, axes=(1, 0))
        m_r = np.tensordot(MOMENT_MATRIX[2:], f_ref, axes=(1, 0))
        mom_rows.append(((m_v - m_r) ** 2).mean(axis=(1, 2)))
        record_umax(f_ref, f_lin, vqc)

    metrics = RunMetrics(
        steps=np.arange(1, T + 1),
        max_rel_u=np.array(rows["max"]), mean_rel_u=np.array(rows["mean"]),
        max_rel_u_lin=np.array(rows["max_lin"]), mean_rel_u_lin=np.array(rows["mean_lin"]),
        f_mse=np.array(rows["fmse"]), f_mse_lin=np.array(rows["fmse_lin"]),
        eta=np.array(rows["eta"]), leakage=np.array(rows["leak"]),
        moment_mse=np.array(mom_rows) if mom_rows else np.zeros((0, 3)),
    )
    return HybridRun(config=config, case=case, mode=mode, metrics=metrics,
                     f_ref=f_ref, f_lin=f_lin, f_vqc=_populations(vqc),
                     u_max_history=np.array(umax_hist))


# ---------------------------------------------------------------------------
# benchmark case suite
# ---------------------------------------------------------------------------

def vorticity(u: np.ndarray) -> np.ndarray:
    """du_y/dx - du_x/dy via central differences."""
    return np.gradient(u[1], axis=0) - np.gradient(u[0], axis=1)


def speed(f: np.ndarray) -> np.ndarray:
    _, u = macroscopic(f)
    return np.sqrt((u ** 2).sum(axis=0))


@dataclass
class CaseReport:
    case: Case
    config: LatticeConfig
    tables: dict                 # name -> dict of column arrays
    fields: dict                 # name -> 2d array (for plotting)
    summary: dict

    def write_tables(self, directory) -> list:
        from pathlib import Path

        written = []
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, cols in self.tables.items():
            path = directory / f"{name}.csv"
            keys = list(cols)
            n = len(next(iter(cols.values())))
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(keys)
                for i in range(n):
                    writer.writerow([repr(float(cols[k][i])) for k in keys])
            written.append(path)
        return written


def run_case_suite(case: Case, model: HybridModel, mode: str = MODE_COHERENT,
                   config: LatticeConfig | None = None, T: int | None = None,
                   force_scale: float = 1.0, handoff: int = 10) -> CaseReport:
    """Produce the comparison artifacts for one benchmark flow."""
    if isinstance(case, str):
        case = Case(case)
    if case is Case.KOLMOGOROV:
        cfg = config or LatticeConfig(256, 256, tau=model.tau,
                                      force=lattice.KolmogorovInit(0.18, 0.09, 1, 1))
        steps = T if T is not None else 100
        run = run_hybrid(cfg, model, mode, steps, case=case)
        u0 = run.u_max_history[:, 0]
        decay = {f"decay_{k}": run.u_max_history[j] / u0[j]
                 for j, k in enumerate(("ref", "lin", "vqc"))}
        table = {"step": np.arange(steps + 1), **decay,
                 "abs_err_vqc": np.abs(decay["decay_vqc"] - decay["decay_ref"]),
                 "abs_err_lin": np.abs(decay["decay_lin"] - decay["decay_ref"])}
        summary = {
            "decay_mae_vqc": float(np.abs(decay["decay_vqc"] - decay["decay_ref"]).mean()),
            "decay_mae_lin": float(np.abs(decay["decay_lin"] - decay["decay_ref"]).mean()),
            "eps_final": run.metrics.eps_final,
            "eps_final_lin": run.metrics.eps_final_lin,
        }
        fields = {"speed_ref": speed(run.f_ref), "speed_vqc": speed(run.f_vqc),
                  "speed_lin": speed(run.f_lin),
                  "err_vqc": speed(run.f_vqc) - speed(run.f_ref),
                  "err_lin": speed(run.f_lin) - speed(run.f_ref)}
        metrics_table = _metrics_table(run.metrics)
        return CaseReport(case, cfg, {"decay": table, "metrics": metrics_table},
                          fields, summary)

    if case is Case.PLATE:
        cfg = config or LatticeConfig(400, 600, tau=model.tau, u_max=0.025,
                                      boundary=Boundary.INLET_OUTLET)
        steps = T if T is not None else 10000
        warm = steps - handoff
        mask = plate_mask(cfg)
        f_warm = init_case(case, cfg)
        for _ in range(warm):
            f_warm = lattice.step_field(f_warm, cfg, mask=mask)
        f_ref = f_warm.copy()
        f_lin = f_warm.copy()
        vqc = f_warm.copy()
        cfg_lin = LatticeConfig(**{**cfg.__dict__, "order": EqOrder.LINEAR})
        u_mat = model.unitary()
        for _ in range(handoff):
            f_ref = lattice.step_field(f_ref, cfg, mask=mask)
            f_lin = lattice.step_field(f_lin, cfg_lin, mask=mask)
            vqc, _ = step_hybrid(vqc, model, MODE_MEASURED, cfg, u_mat=u_mat,
                                 mask=mask)
        _, u_ref = macroscopic(lattice.fluid_view(f_ref, mask))
        _, u_lin = macroscopic(lattice.fluid_view(f_lin, mask))
        _, u_vqc = macroscopic(lattice.fluid_view(vqc, mask))
        w_ref, w_lin, w_vqc = vorticity(u_ref), vorticity(u_lin), vorticity(u_vqc)
        summary = {
            "vorticity_mae_vqc": float(np.abs(w_vqc - w_ref).mean()),
            "vorticity_mae_lin": float(np.abs(w_lin - w_ref).mean()),
            "handoff": handoff,
            "warmup_steps": warm,
        }
        fields = {"vorticity_ref": w_ref,
                  "vorticity_err_vqc": np.abs(w_vqc - w_ref),
                  "vorticity_err_lin": np.abs(w_lin - w_ref)}
        table = {"name": np.arange(1), "vorticity_mae_vqc": [summary["vorticity_mae_vqc"]],
                 "vorticity_mae_lin": [summary["vorticity_mae_lin"]]}
        return CaseReport(case, cfg, {"summary": table}, fields, summary)

    if case is Case.JETS:
        cfg = config or LatticeConfig(
            100, 100, tau=model.tau,
            force=lattice.GaussianJets(4e-4, 10.0, 100 / 3, 200 / 3, 100 / 3, 200 / 3))
        steps = T if T is not None else 225
        run = run_hybrid(cfg, model, mode, steps, case=case, force_scale=force_scale)
        s_ref, s_vqc, s_lin = speed(run.f_ref), speed(run.f_vqc), speed(run.f_lin)
        corr = float(np.corrcoef(s_ref.ravel(), s_vqc.ravel())[0, 1])
        summary = {
            "shape_correlation": corr,
            "eps_final": run.metrics.eps_final,
            "eps_final_lin": run.metrics.eps_final_lin,
            "mean_rel_final": float(run.metrics.mean_rel_u[-1]),
            "force_scale": force_scale,
        }
        fields = {"speed_ref": s_ref, "speed_vqc": s_vqc, "speed_lin": s_lin,
                  "rel_err_vqc": np.abs(s_vqc - s_ref) / max(s_ref.max(), 1e-12),
                  "rel_err_lin": np.abs(s_lin - s_ref) / max(s_ref.max(), 1e-12)}
        return CaseReport(case, cfg, {"metrics": _metrics_table(run.metrics)},
                          fields, summary)

    raise lattice.ConfigurationError(f"unknown case {case!r}")


def _metrics_table(m: RunMetrics) -> dict:
    return {
        "step": m.steps, "max_rel_u": m.max_rel_u, "mean_rel_u": m.mean_rel_u,
        "max_rel_u_lin": m.max_rel_u_lin, "mean_rel_u_lin": m.mean_rel_u_lin,
        "f_mse": m.f_mse, "f_mse_lin": m.f_mse_lin, "eta": m.eta,
        "leakage": m.leakage,
    }


# ---------------------------------------------------------------------------
# fixed-precision study
# ---------------------------------------------------------------------------

def quantize(x: np.ndarray, digits: float) -> np.ndarray:
    """Quantize to a decimal precision; fractional settings blend the two
    neighbouring integer-digit grids.

    Integer ``digits`` rounds at scale 10^digits (idempotent); a fractional
    precision d = n + w returns the (1-w, w) weighted average of the n- and
    (n+1)-digit roundings, which emulates register widths between two sizes.
    """
    d0 = int(np.floor(digits))
    w = float(digits) - d0
    s0 = 10.0 ** d0
    q0 = np.round(np.asarray(x) * s0) / s0
    if w == 0.0:
        return q0
    s1 = 10.0 ** (d0 + 1)
    q1 = np.round(np.asarray(x) * s1) / s1
    return (1.0 - w) * q0 + w * q1


def _quantized_collide(f: np.ndarray, tau: float, digits_u: float,
                       digits_f: float) -> np.ndarray:
    rho, u = macroscopic(f)
    f_lin = bgk_collide(f, tau, EqOrder.LINEAR)
    u_q = quantize(u, digits_u)
    nonlinear = (lattice.equilibrium(rho, u_q, EqOrder.QUADRATIC)
                 - lattice.equilibrium(rho, u_q, EqOrder.LINEAR)) / tau
    return quantize(f_lin + quantize(nonlinear, digits_f), digits_f)


@dataclass
class PrecisionReport:
    digits_u: float
    digits_f: float
    max_rel_u: float
    mean_rel_u: float
    rel_err_field: np.ndarray


def fixed_precision_study(config: LatticeConfig, digits_u: float, digits_f: float,
                          T: int = 100, case: Case = Case.JETS) -> PrecisionReport:
    """Jets run with quantized velocity/nonlinear registers vs full precision."""
    if digits_u < 1 or digits_f < 1:
        raise lattice.ConfigurationError("need at least one decimal digit")
    force = None
    if isinstance(config.force, lattice.GaussianJets):
        force = jet_force_field(config.force, config.nx, config.ny)
    f_full = init_case(case, config)
    f_q = f_full.copy()
    for _ in range(T):
        f_full = lattice.step_field(f_full, config, force=force)
        f_q = _quantized_collide(f_q, config.tau, digits_u, digits_f)
        if force is not None:
            f_q = lattice.apply_force(f_q, force)
        f_q = lattice.stream(f_q)
    _, u_full = macroscopic(f_full)
    _, u_q = macroscopic(f_q)
    mx, mn = velocity_error(u_q, u_full)
    num = np.sqrt(((u_q - u_full) ** 2).sum(axis=0))
    den = np.sqrt((u_full ** 2).sum(axis=0))
    rel = np.where(num == 0, 0.0, num / np.maximum(den, REL_FLOOR))
    return PrecisionReport(digits_u=digits_u, digits_f=digits_f,
                           max_rel_u=mx, mean_rel_u=mn, rel_err_field=rel)
