"""Losses, gradients and optimization for the collision-circuit models.

Every loss is a real function of the emulated output state (amplitudes and
phases, not sampled expectation values).  Gradients come in two exact forms:

- ``grad_param_shift`` follows the shift rule occurrence by occurrence: all
  parameterized gates here are generated by Pauli words P with P^2 = I, so
  d/dt U(t) = [U(t + pi/2) - U(t - pi/2)] / (2 sqrt(2)) holds on the state
  itself.  For a plain density-matrix loss (an expectation value of the
  target projector) the textbook loss-level two-point formula is used; for
  every other loss the shifted *states* are combined with the analytic
  cogradient of the loss (chain rule).
- ``grad_adjoint`` computes the identical vector in two sweeps through the
  circuit (reverse mode), which is what the training loop uses: it costs two
  state applications per gate instead of two full circuit evaluations per
  occurrence.

Both paths agree to rounding; the test suite enforces this and checks each
against central finite differences.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import qsim
from .ansatz import CircuitSpec, _apply_gate, apply_circuit, build_collision_circuit, init_params
from .dataset import Dataset, shuffle_batches
from .lattice import MOMENT_MATRIX
from .qsim import CHANNEL_BASIS, PHASE_ALIGN_GUARD

log = logging.getLogger(__name__)

_SHIFT = np.pi / 2.0
_PHYS = CHANNEL_BASIS


class TrainingAbort(RuntimeError):
    """Loss became non-finite; carries diagnostics for the failing batch."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class LossSpec:
    """Which objective to optimize.

    kind: 'amp_phase' (convex amplitude/phase combination weighted by
    ``phase_weight``), 'amp' (amplitudes only), 'rho' (squared Frobenius
    distance of pure density matrices), or 'rho_reduced' (same on the first
    register's reduced density matrix; dual-register model only).

    ``macro_weight`` adds a velocity/moment penalty; ``nonunitary_target``
    renormalizes the amplitude target over the nine physical states and
    leaves leakage amplitudes unconstrained.
    """

    kind: str = "rho"
    phase_weight: float = 1e-4
    macro_weight: float = 0.0
    macro_mode: str = "mse_vel"  # 'mse_vel' | 'rel_vel' | 'full_m'
    nonunitary_target: bool = False
    phase_ref_weighted: bool = False

    def __post_init__(self):
        if self.kind not in ("amp_phase", "amp", "rho", "rho_reduced"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not 0.0 <= self.phase_weight <= 1.0:
            raise ValueError("phase weight must lie in [0, 1]")
        if self.macro_weight < 0:
            raise ValueError("macro weight must be non-negative")


@dataclass
class TrainConfig:
    epochs: int = 20
    layers: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-4
    seed: int = 0
    loss: LossSpec = field(default_factory=LossSpec)
    model: str = "single"        # 'single' | 'dual'
    input_field: str = "lin"     # encode f_lin ('str' to learn the linear map)
    target_field: str = "ref"    # or 'lin'
    init_scale: float = 0.01
    grad_method: str = "adjoint"  # 'adjoint' | 'param_shift'
    validate_every: int = 0       # epochs between validator calls; 0 disables


# ---------------------------------------------------------------------------
# batched losses with analytic cogradients
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    """Encoded training mini-batch."""

    psi_in: np.ndarray           # (b, dim) input states
    psi_ref: np.ndarray          # (b, 16) target register encodings
    mass: np.ndarray             # (b,) site mass of each sample
    f_ref: np.ndarray            # (b, 9) target populations
    indices: np.ndarray          # dataset rows (diagnostics)

    @property
    def p_ref(self) -> np.ndarray:
        return np.abs(self.psi_ref) ** 2


def make_batch(ds: Dataset, idx: np.ndarray, config: TrainConfig) -> Batch:
    f_in = {"lin": ds.f_lin, "str": ds.f_str}[config.input_field][idx]
    f_ref = {"ref": ds.f_ref, "lin": ds.f_lin}[config.target_field][idx]
    psi16 = qsim.encode_channels(f_in)
    psi_in = qsim.encode_dual(f_in) if config.model == "dual" else psi16
    return Batch(
        psi_in=psi_in,
        psi_ref=qsim.encode_channels(f_ref),
        mass=f_in.sum(axis=-1),
        f_ref=f_ref,
        indices=idx,
    )


def _alignment_index(psi_ref: np.ndarray) -> np.ndarray:
    """Phase-alignment basis index per sample: 0, or the largest physical
    reference amplitude when |ref_0| sits under the guard (logged)."""
    ref0 = np.abs(psi_ref[..., 0])
    guard = ref0 < PHASE_ALIGN_GUARD
    align = np.zeros(psi_ref.shape[0], dtype=np.int64)
    if np.any(guard):
        log.info("phase alignment fallback for %d samples", int(guard.sum()))
        best = _PHYS[np.argmax(np.abs(psi_ref[..., _PHYS]), axis=-1)]
        align = np.where(guard, best, align)
    return align


def _wrap(delta: np.ndarray) -> np.ndarray:
    return np.mod(delta + np.pi, 2.0 * np.pi) - np.pi


def loss_terms(psi_out: np.ndarray, batch: Batch, spec: LossSpec):
    """Per-sample loss and cogradient dL/d(conj(psi)) for the output state.

    Returns ``(loss, cograd, aux)`` where ``aux`` carries the monitoring
    metrics (amplitude MSE, phase penalty, success probability).
    """
    b = psi_out.shape[0]
    aux = {}
    p = np.abs(psi_out) ** 2
    if psi_out.shape[-1] == 16:
        succ = p[:, _PHYS].sum(axis=-1)
    else:
        succ = np.ones(b)
    aux["success"] = succ

    if spec.kind == "rho":
        # || |ref><ref| - |out><out| ||_F^2 = 2 - 2 |<ref|out>|^2
        z = np.einsum("bi,bi->b", batch.psi_ref.conj(), psi_out)
        loss = 2.0 - 2.0 * np.abs(z) ** 2
        cograd = -2.0 * z[:, None] * batch.psi_ref
        aux["amp_mse"] = ((p - batch.p_ref) ** 2).sum(axis=-1)
        aux["phase_mse"] = np.zeros(b)
    elif spec.kind == "rho_reduced":
        rho1 = qsim.partial_trace(psi_out, keep=1)
        diff = rho1 - qsim.density(batch.psi_ref)
        loss = (np.abs(diff) ** 2).sum(axis=(-2, -1)).real
        m = psi_out.reshape(b, 16, 16)  # [reg2, reg1]
        cograd = 2.0 * np.einsum("baj,bcj->bca", diff, m).reshape(b, 256)
        p1 = np.einsum("bii->bi", rho1).real
        aux["amp_mse"] = ((p1[:, _PHYS] - batch.p_ref[:, _PHYS]) ** 2).sum(axis=-1)
        aux["phase_mse"] = np.zeros(b)
    else:
        if psi_out.shape[-1] != 16:
            raise ValueError("amplitude/phase losses apply to the 16-dim register")
        lam = spec.phase_weight if spec.kind == "amp_phase" else 0.0
        loss = np.zeros(b)
        cograd = np.zeros_like(psi_out)

        if spec.nonunitary_target:
            # physical-state probabilities renormalized by the success
            # probability, compared against the normalized target populations
            pp = p[:, _PHYS]
            s = pp.sum(axis=-1)
            r = pp / s[:, None]
            t = batch.p_ref[:, _PHYS]
            diff = r - t
            amp = (diff ** 2).sum(axis=-1)
            dldp = (2.0 * diff - 2.0 * (diff * r).sum(axis=-1)[:, None]) / s[:, None]
            g_amp = np.zeros_like(psi_out)
            g_amp[:, _PHYS] = dldp * psi_out[:, _PHYS]
        else:
            diff = p - batch.p_ref
            amp = (diff ** 2).sum(axis=-1)
            g_amp = 2.0 * diff * psi_out
        loss += (1.0 - lam) * amp
        cograd += (1.0 - lam) * g_amp
        aux["amp_mse"] = amp

        # phase penalty, aligned per sample to the reference-determined index
        align = _alignment_index(batch.psi_ref)
        rows = np.arange(b)
        phase_out = np.angle(psi_out) - np.angle(psi_out[rows, align])[:, None]
        phase_ref = np.angle(batch.psi_ref) - np.angle(batch.psi_ref[rows, align])[:, None]
        w = _wrap(phase_out - phase_ref)
        w[rows, align] = 0.0
        kappa = 1.0 / (4.0 * np.pi ** 2)
        mask = np.ones(16)
        if spec.nonunitary_target:
            mask = np.zeros(16)
            mask[_PHYS] = 1.0
        weights = (batch.p_ref if spec.phase_ref_weighted else p) * mask
        phase_pen = kappa * (weights * w ** 2).sum(axis=-1)
        aux["phase_mse"] = phase_pen
        if lam > 0.0:
            loss += lam * phase_pen
            # d arg(psi_j)/d conj(psi_j) = i / (2 conj(psi_j)); the alignment
            # column collects the -d(phase_align) of every other term
            g_ph = np.zeros_like(psi_out)
            if spec.phase_ref_weighted:
                denom = psi_out.conj()
                ok = np.abs(denom) > 1e-12
                inv = np.where(ok, 1.0, 0.0) / np.where(ok, denom, 1.0)
                g_ph += kappa * 1j * weights * w * inv
            else:
                # predicted weights: p_j / conj(psi_j) = psi_j, so both the
                # probability and phase derivatives stay finite
                g_ph += kappa * (mask * w ** 2 + 1j * mask * w) * psi_out
            tot = (weights * w).sum(axis=-1)
            denom_a = psi_out[rows, align].conj()
            ok_a = np.abs(denom_a) > 1e-12
            inv_a = np.where(ok_a, 1.0, 0.0) / np.where(ok_a, denom_a, 1.0)
            g_ph[rows, align] = -kappa * 1j * tot * inv_a
            cograd += lam * g_ph
        if spec.macro_weight > 0.0:
            mloss, mgrad = _macro_terms(psi_out, p, batch, spec)
            loss += spec.macro_weight * mloss
            cograd += spec.macro_weight * mgrad
    return loss, cograd, aux


def _macro_terms(psi_out, p, batch: Batch, spec: LossSpec):
    f_pred = p[:, _PHYS] * batch.mass[:, None]
    m_pred = f_pred @ MOMENT_MATRIX.T
    m_ref = batch.f_ref @ MOMENT_MATRIX.T
    diff = m_pred - m_ref
    if spec.macro_mode == "mse_vel":
        sel = slice(0, 2)
        scale = np.ones(p.shape[0])
    elif spec.macro_mode == "rel_vel":
        sel = slice(0, 2)
        scale = 1.0 / ((m_ref[:, 0] ** 2 + m_ref[:, 1] ** 2) + 1e-12)
    elif spec.macro_mode == "full_m":
        sel = slice(0, 5)
        scale = np.ones(p.shape[0])
    else:
        raise ValueError(f"unknown macro mode {spec.macro_mode!r}")
    d = diff[:, sel]
    loss = scale * (d ** 2).sum(axis=-1)
    dldf = 2.0 * scale[:, None] * (d @ MOMENT_MATRIX[sel])
    grad = np.zeros_like(psi_out)
    grad[:, _PHYS] = dldf * batch.mass[:, None] * psi_out[:, _PHYS]
    return loss, grad


# ---------------------------------------------------------------------------
# standalone loss entry points (single samples / explicit states)
# ---------------------------------------------------------------------------

def loss_amp_phase(psi_vqc: np.ndarray, psi_ref: np.ndarray, lam: float,
                   ref_weighted: bool = False) -> float:
    """Convex amplitude/phase loss between two 16-dim states."""
    batch = Batch(
        psi_in=psi_ref[None], psi_ref=psi_ref[None],
        mass=np.ones(1), f_ref=np.zeros((1, 9)), indices=np.zeros(1, dtype=int),
    )
    spec = LossSpec(kind="amp_phase", phase_weight=lam, phase_ref_weighted=ref_weighted)
    loss, _, _ = loss_terms(psi_vqc[None], batch, spec)
    return float(loss[0])


def loss_rho(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Frobenius distance of two density matrices.

    Accepts state vectors or density matrices; states are promoted to their
    pure projectors, so the value is invariant under global phases.
    """
    ra = qsim.density(a) if a.ndim == 1 else a
    rb = qsim.density(b) if b.ndim == 1 else b
    return float((np.abs(ra - rb) ** 2).sum())


def loss_macro(f_vqc: np.ndarray, f_ref: np.ndarray, lambda_u: float,
               mode: str = "mse_vel") -> float:
    """Macroscopic penalty between two population vectors."""
    m_pred = MOMENT_MATRIX @ f_vqc
    m_ref = MOMENT_MATRIX @ f_ref
    d = m_pred - m_ref
    if mode == "mse_vel":
        val = d[0] ** 2 + d[1] ** 2
    elif mode == "rel_vel":
        val = (d[0] ** 2 + d[1] ** 2) / (m_ref[0] ** 2 + m_ref[1] ** 2 + 1e-12)
    elif mode == "full_m":
        val = (d ** 2).sum()
    else:
        raise ValueError(f"unknown macro mode {mode!r}")
    return float(lambda_u * val)


def nonunitary_target(f_ref: np.ndarray) -> np.ndarray:
    """Target amplitudes over the 16-dim basis with leakage unconstrained.

    The nine physical indices carry sqrt(f_i / sum f); the remaining seven
    are free (they are masked out of the amplitude loss and only show up as
    1 - success probability).
    """
    f_ref = np.asarray(f_ref, dtype=np.float64)
    if np.any(f_ref < 0):
        raise ValueError("populations must be non-negative")
    target = np.zeros(16)
    target[_PHYS] = np.sqrt(f_ref / f_ref.sum())
    return target


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def _loss_closure(batch: Batch, spec: LossSpec):
    def closure(psi_out):
        return loss_terms(psi_out, batch, spec)
    return closure


def grad_adjoint(circuit: CircuitSpec, params: np.ndarray, batch: Batch,
                 spec: LossSpec):
    """Reverse-mode gradient of the mean batch loss; exact.

    Forward applies the circuit once; the backward sweep un-applies each gate
    from both the running state and the cogradient, accumulating
    Im <lambda | P | phi> for every parameterized occurrence (P the Pauli
    word generating the gate).
    """
    params = np.asarray(params, dtype=np.float64)
    psi = apply_circuit(circuit, params, batch.psi_in)
    loss, cograd, aux = loss_terms(psi, batch, spec)
    grad = np.zeros(circuit.n_params)
    # stacked [phi, lambda] so each backward gate is one kernel call
    pack = np.stack([psi, cograd.astype(np.complex128)])
    for g in reversed(circuit.gates):
        if g.param is not None:
            t = qsim.apply_pauli_word(pack[0], g.kind, g.targets)
            grad[g.param] += np.einsum("bi,bi->b", pack[1].conj(), t).imag.mean()
        _apply_gate(pack, g, params, invert=True)
    return grad, float(loss.mean()), aux


def _shifted_state(circuit, params, psi_in, occurrence, delta):
    out = np.array(psi_in, dtype=np.complex128, copy=True)
    for k, g in enumerate(circuit.gates):
        if k == occurrence:
            shifted = params.copy()
            shifted[g.param] += delta
            _apply_gate(out, g, shifted)
        else:
            _apply_gate(out, g, params)
    return out


def grad_param_shift(circuit: CircuitSpec, params: np.ndarray, batch: Batch,
                     spec: LossSpec):
    """Parameter-shift gradient of the mean batch loss.

    Plain density-matrix losses are expectation values of the target
    projector, so the occurrence-level two-point loss formula applies
    directly; all other losses use the shifted states with the chain rule on
    the loss's explicit amplitude/phase dependence.
    """
    params = np.asarray(params, dtype=np.float64)
    psi = apply_circuit(circuit, params, batch.psi_in)
    loss, cograd, aux = loss_terms(psi, batch, spec)
    grad = np.zeros(circuit.n_params)
    pure_expectation = spec.kind == "rho" and spec.macro_weight == 0.0
    closure = _loss_closure(batch, spec)
    for k, g in enumerate(circuit.gates):
        if g.param is None:
            continue
        plus = _shifted_state(circuit, params, batch.psi_in, k, _SHIFT)
        minus = _shifted_state(circuit, params, batch.psi_in, k, -_SHIFT)
        if pure_expectation:
            lp, _, _ = closure(plus)
            lm, _, _ = closure(minus)
            grad[g.param] += float((lp - lm).mean()) / 2.0
        else:
            dpsi = plus - minus
            contrib = np.einsum("bi,bi->b", cograd.conj(), dpsi).real / np.sqrt(2.0)
            grad[g.param] += float(contrib.mean())
    return grad, float(loss.mean()), aux


def batch_loss(circuit, params, batch, spec) -> float:
    psi = apply_circuit(circuit, params, batch.psi_in)
    loss, _, _ = loss_terms(psi, batch, spec)
    return float(loss.mean())


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; pure (returns fresh arrays/state)."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("parameter/gradient/state shapes disagree")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad ** 2
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2,
                          eps=state.eps)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    circuit: CircuitSpec
    params: np.ndarray
    history: list[dict]
    best_params: np.ndarray | None = None
    best_val: float = np.inf


def train(ds: Dataset, config: TrainConfig, validator=None) -> TrainResult:
    """Run the epoch/batch optimization loop.

    ``validator`` (optional) maps a parameter vector to a scalar validation
    error; it is invoked every ``config.validate_every`` epochs and the best
    checkpoint is kept separately from the final parameters.  Shuffling is
    reseeded per epoch from (seed, epoch) so reruns are bit-identical.
    """
    circuit = build_collision_circuit(config.layers, config.model)
    params = init_params(circuit, config.seed, config.init_scale)
    adam = AdamState.init(circuit.n_params)
    gradient = {"adjoint": grad_adjoint, "param_shift": grad_param_shift}[config.grad_method]
    if config.model == "dual" and config.loss.kind != "rho_reduced":
        raise ValueError("the dual-register model trains on the reduced density loss")

    history: list[dict] = []
    best_params, best_val = None, np.inf
    for epoch in range(config.epochs):
        sums = {"loss": 0.0, "amp_mse": 0.0, "phase_mse": 0.0, "success": 0.0}
        count = 0
        for idx in shuffle_batches(len(ds), config.batch_size, (config.seed, epoch)):
            batch = make_batch(ds, idx, config)
            grad, loss, aux = gradient(circuit, params, batch, config.loss)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingAbort(
                    f"non-finite loss at epoch {epoch}",
                    {
                        "epoch": epoch,
                        "param_norm": float(np.linalg.norm(params)),
                        "sample_indices": batch.indices.tolist(),
                    },
                )
            params, adam = adam_step(params, grad, adam, config.learning_rate)
            n = len(idx)
            sums["loss"] += loss * n
            for k in ("amp_mse", "phase_mse", "success"):
                sums[k] += float(aux[k].sum())
            count += n
        row = {
            "epoch": epoch,
            "loss": sums["loss"] / count,
            "amp_mse": sums["amp_mse"] / count,
            "phase_mse": sums["phase_mse"] / count,
            "success": sums["success"] / count,
            "val_error": np.nan,
        }
        if validator is not None and config.validate_every > 0 and (
            (epoch + 1) % config.validate_every == 0 or epoch + 1 == config.epochs
        ):
            val = float(validator(params))
            row["val_error"] = val
            if val < best_val:
                best_val, best_params = val, params.copy()
        history.append(row)
        log.info("epoch %d: loss=%.3e val=%s", epoch, row["loss"], row["val_error"])
    return TrainResult(circuit=circuit, params=params, history=history,
                       best_params=best_params, best_val=best_val)


def history_to_csv(path, history: list[dict]) -> None:
    import csv as _csv

    cols = ["epoch", "loss", "amp_mse", "phase_mse", "success", "val_error"]
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(cols)
        for row in history:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in cols])
