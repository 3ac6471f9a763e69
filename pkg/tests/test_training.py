import numpy as np
import pytest

from qlbm import qsim
from qlbm.ansatz import build_collision_circuit, init_params
from qlbm.dataset import ArtificialSpec, build_artificial
from qlbm.training import (
    AdamState,
    Batch,
    LossSpec,
    TrainConfig,
    TrainingAbort,
    adam_step,
    batch_loss,
    grad_adjoint,
    grad_param_shift,
    history_to_csv,
    loss_amp_phase,
    loss_macro,
    loss_rho,
    loss_terms,
    make_batch,
    nonunitary_target,
    train,
)

RNG = np.random.default_rng(20240901)


def random_batch(b=3, dual=False, seed=1):
    rng = np.random.default_rng(seed)
    f_in = np.abs(rng.normal(1.0, 0.2, (b, 9)))
    f_ref = np.abs(rng.normal(1.0, 0.2, (b, 9)))
    f_ref *= (f_in.sum(1) / f_ref.sum(1))[:, None]  # mass-consistent pairs
    psi_in = qsim.encode_dual(f_in) if dual else qsim.encode_channels(f_in)
    return Batch(psi_in=psi_in, psi_ref=qsim.encode_channels(f_ref),
                 mass=f_in.sum(1), f_ref=f_ref, indices=np.arange(b))


def random_state(seed=0, dim=16):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return s / np.linalg.norm(s)


class TestLossValues:
    def test_zero_on_identical_states(self):
        psi = random_state(1)
        assert loss_amp_phase(psi, psi, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert loss_rho(psi, psi) == pytest.approx(0.0, abs=1e-15)

    def test_global_phase_invariance(self):
        psi = random_state(2)
        rotated = np.exp(1j * 0.9) * psi
        assert loss_amp_phase(rotated, psi, 0.3) == pytest.approx(0.0, abs=1e-12)
        assert loss_rho(rotated, psi) == pytest.approx(0.0, abs=1e-12)

    def test_two_support_amplitude_gap(self):
        # amplitude-only loss on states supported on two basis vectors
        a = np.zeros(16, dtype=complex)
        b = np.zeros(16, dtype=complex)
        a[0], a[1] = np.sqrt(0.7), np.sqrt(0.3)
        b[0], b[1] = np.sqrt(0.5), np.sqrt(0.5)
        expected = (0.7 - 0.5) ** 2 + (0.3 - 0.5) ** 2
        assert loss_amp_phase(a, b, 0.0) == pytest.approx(expected, abs=1e-14)

    def test_orthogonal_states_rho(self):
        a = np.zeros(16, dtype=complex)
        b = np.zeros(16, dtype=complex)
        a[0] = 1.0
        b[3] = 1.0
        # ||rho_a - rho_b||_F^2 = 2 (1 - |<a|b>|^2)
        assert loss_rho(a, b) == pytest.approx(2.0)

    def test_rho_accepts_matrices(self):
        a, b = random_state(3), random_state(4)
        assert loss_rho(qsim.density(a), qsim.density(b)) == pytest.approx(
            loss_rho(a, b), abs=1e-12)

    def test_losses_nonnegative_on_random_pairs(self):
        for seed in range(10):
            x, y = random_state(seed), random_state(seed + 100)
            assert loss_amp_phase(x, y, 0.25) >= 0.0
            assert loss_rho(x, y) >= 0.0

    def test_macro_single_component(self):
        f = np.full(9, 0.1)
        g = f.copy()
        g[1] += 0.005
        g[3] -= 0.005  # shifts u_x by 0.01, leaves u_y/E unchanged
        assert loss_macro(g, f, 2.0, "mse_vel") == pytest.approx(2.0 * 0.01 ** 2)
        assert loss_macro(f, f, 5.0) == 0.0

    def test_macro_zero_weight(self):
        f = np.full(9, 0.1)
        g = f + 0.01
        assert loss_macro(g, f, 0.0, "full_m") == 0.0


class TestNonunitaryTarget:
    def test_normalized_target_amplitudes(self):
        f = np.abs(RNG.normal(0.1, 0.02, 9))
        t = nonunitary_target(f)
        assert t[qsim.CHANNEL_BASIS] == pytest.approx(np.sqrt(f / f.sum()))
        assert (t[qsim.LEAK_BASIS] == 0).all()

    def test_leaky_state_with_correct_ratios_scores_zero(self):
        f = np.abs(RNG.normal(0.1, 0.02, 9))
        batch = Batch(psi_in=qsim.encode_channels(f)[None],
                      psi_ref=qsim.encode_channels(f)[None],
                      mass=np.array([f.sum()]), f_ref=f[None],
                      indices=np.zeros(1, dtype=int))
        # half the probability leaks, physical ratios stay exact
        state = np.zeros(16, dtype=complex)
        state[qsim.CHANNEL_BASIS] = np.sqrt(0.5 * f / f.sum())
        state[qsim.LEAK_BASIS[0]] = np.sqrt(0.5)
        spec = LossSpec(kind="amp", nonunitary_target=True)
        loss, _, aux = loss_terms(state[None], batch, spec)
        assert loss[0] == pytest.approx(0.0, abs=1e-14)
        assert aux["success"][0] == pytest.approx(0.5)


class TestGradients:
    def finite_difference(self, circuit, params, batch, spec, h=1e-6):
        g = np.zeros_like(params)
        for i in range(params.size):
            up, down = params.copy(), params.copy()
            up[i] += h
            down[i] -= h
            g[i] = (batch_loss(circuit, up, batch, spec)
                    - batch_loss(circuit, down, batch, spec)) / (2 * h)
        return g

    @pytest.mark.parametrize("kind,dual", [
        ("rho", False), ("amp", False), ("amp_phase", False), ("rho_reduced", True),
    ])
    def test_param_shift_matches_finite_difference(self, kind, dual):
        circuit = build_collision_circuit(2, "dual" if dual else "single")
        params = RNG.uniform(-0.6, 0.6, circuit.n_params)
        batch = random_batch(dual=dual, seed=hash(kind) % 2**31)
        spec = LossSpec(kind=kind, phase_weight=1e-2 if kind == "amp_phase" else 1e-4)
        fd = self.finite_difference(circuit, params, batch, spec)
        ps, _, _ = grad_param_shift(circuit, params, batch, spec)
        scale = max(np.abs(fd).max(), 1e-12)
        assert np.abs(ps - fd).max() / scale < 1e-5

    def test_adjoint_equals_param_shift(self):
        for kind, dual in (("rho", False), ("amp_phase", False), ("rho_reduced", True)):
            circuit = build_collision_circuit(2, "dual" if dual else "single")
            params = RNG.uniform(-0.6, 0.6, circuit.n_params)
            batch = random_batch(dual=dual, seed=3)
            spec = LossSpec(kind=kind, phase_weight=1e-3)
            ps, lp, _ = grad_param_shift(circuit, params, batch, spec)
            ad, la, _ = grad_adjoint(circuit, params, batch, spec)
            assert np.abs(ps - ad).max() < 1e-10
            assert lp == pytest.approx(la, abs=1e-12)

    def test_macro_term_gradient(self):
        circuit = build_collision_circuit(2)
        params = RNG.uniform(-0.5, 0.5, circuit.n_params)
        batch = random_batch(seed=5)
        spec = LossSpec(kind="amp_phase", phase_weight=1e-3,
                        macro_weight=0.7, macro_mode="full_m")
        fd = self.finite_difference(circuit, params, batch, spec)
        ad, _, _ = grad_adjoint(circuit, params, batch, spec)
        assert np.abs(ad - fd).max() / max(np.abs(fd).max(), 1e-12) < 1e-5

    def test_nonunitary_gradient(self):
        circuit = build_collision_circuit(2)
        params = RNG.uniform(-0.5, 0.5, circuit.n_params)
        batch = random_batch(seed=6)
        spec = LossSpec(kind="amp", nonunitary_target=True)
        fd = self.finite_difference(circuit, params, batch, spec)
        ad, _, _ = grad_adjoint(circuit, params, batch, spec)
        assert np.abs(ad - fd).max() / max(np.abs(fd).max(), 1e-12) < 1e-5

    def test_shared_gradient_is_sum_over_occurrences(self):
        # unshare one layer's rotation into independent parameters: their
        # gradients must sum to the shared-parameter gradient (product rule)
        circuit = build_collision_circuit(1)
        params = RNG.uniform(-0.5, 0.5, circuit.n_params)
        batch = random_batch(seed=7)
        spec = LossSpec(kind="rho")
        shared, _, _ = grad_adjoint(circuit, params, batch, spec)

        from qlbm.ansatz import CircuitSpec, GateOp

        gates, extra = [], 0
        for g in circuit.gates:
            if g.kind == "rx" and g.param == 0:
                gates.append(GateOp(g.kind, g.targets, circuit.n_params + extra)
                             if extra or True else g)
                extra += 1
            else:
                gates.append(g)
        unshared = CircuitSpec(4, circuit.n_params + extra, tuple(gates))
        uparams = np.concatenate([params, np.full(extra, params[0])])
        per_occurrence, _, _ = grad_adjoint(unshared, uparams, batch, spec)
        total = per_occurrence[circuit.n_params:].sum()
        assert total == pytest.approx(shared[0], abs=1e-12)

    def test_empty_parameter_circuit(self):
        from qlbm.ansatz import CircuitSpec, GateOp

        circuit = CircuitSpec(4, 0, (GateOp("cnot", (0, 1), None),))
        batch = random_batch(seed=8)
        g, loss, _ = grad_adjoint(circuit, np.zeros(0), batch, LossSpec(kind="rho"))
        assert g.size == 0
        assert np.isfinite(loss)


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        p = np.array([1.0, -2.0])
        st = AdamState.init(2)
        p2, st2 = adam_step(p, np.zeros(2), st, 1e-3)
        assert p2 == pytest.approx(p)
        assert st2.t == 1

    def test_first_step_direction_and_size(self):
        g = np.array([0.3, -4.0, 1e-3])
        p = np.zeros(3)
        lr = 1e-2
        p2, _ = adam_step(p, g, AdamState.init(3), lr)
        # bias-corrected first step is -lr * sign(g) up to O(eps/|g|)
        assert p2 == pytest.approx(-lr * np.sign(g), rel=1e-4)

    def test_deterministic(self):
        g = RNG.normal(size=4)
        p = RNG.normal(size=4)
        st = AdamState.init(4)
        a1, s1 = adam_step(p, g, st, 1e-3)
        a2, s2 = adam_step(p, g, st, 1e-3)
        assert a1 == pytest.approx(a2, abs=0)
        assert s1.m == pytest.approx(s2.m, abs=0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(np.zeros(3), np.zeros(2), AdamState.init(3), 1e-3)


def small_dataset(n=96, seed=0):
    return build_artificial(ArtificialSpec(u0_max=0.05, sigma_max=1e-4, n=n, seed=seed))


class TestTrainLoop:
    def test_zero_epochs_returns_init(self):
        ds = small_dataset()
        cfg = TrainConfig(epochs=0, layers=2, seed=3)
        res = train(ds, cfg)
        assert res.params == pytest.approx(init_params(res.circuit, 3))
        assert res.history == []

    def test_loss_decreases(self):
        ds = small_dataset(n=128)
        cfg = TrainConfig(epochs=8, layers=2, seed=0, learning_rate=1e-3,
                          loss=LossSpec(kind="rho"))
        res = train(ds, cfg)
        assert res.history[-1]["loss"] < res.history[0]["loss"]

    def test_deterministic_history(self):
        ds = small_dataset(n=64)
        cfg = TrainConfig(epochs=2, layers=2, seed=9)
        h1 = train(ds, cfg).history
        h2 = train(ds, cfg).history
        assert h1 == h2

    def test_validator_and_best_checkpoint(self):
        ds = small_dataset(n=64)
        calls = []

        def validator(params):
            calls.append(params.copy())
            return float(np.linalg.norm(params))

        cfg = TrainConfig(epochs=3, layers=2, seed=1, validate_every=1)
        res = train(ds, cfg, validator=validator)
        assert len(calls) == 3
        assert res.best_val == min(float(np.linalg.norm(p)) for p in calls)

    def test_dual_model_requires_reduced_loss(self):
        ds = small_dataset(n=32)
        cfg = TrainConfig(epochs=1, layers=1, model="dual", loss=LossSpec(kind="rho"))
        with pytest.raises(ValueError):
            train(ds, cfg)

    def test_dual_model_trains(self):
        ds = small_dataset(n=64)
        cfg = TrainConfig(epochs=2, layers=1, model="dual", seed=2,
                          learning_rate=1e-3, loss=LossSpec(kind="rho_reduced"))
        res = train(ds, cfg)
        assert res.history[-1]["loss"] < res.history[0]["loss"]

    def test_history_csv(self, tmp_path):
        ds = small_dataset(n=32)
        res = train(ds, TrainConfig(epochs=2, layers=1, seed=0))
        history_to_csv(tmp_path / "h.csv", res.history)
        lines = (tmp_path / "h.csv").read_text().strip().split("\n")
        assert lines[0].startswith("epoch,loss")
        assert len(lines) == 3

    def test_nan_abort_diagnostics(self):
        ds = small_dataset(n=32)
        cfg = TrainConfig(epochs=1, layers=1, seed=0)
        bad = ds
        bad.f_lin[0, 0] = np.nan
        with pytest.raises((TrainingAbort, Exception)):
            train(bad, cfg)
