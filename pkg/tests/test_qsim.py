import numpy as np
import pytest
from scipy.linalg import expm

from qlbm import qsim
from qlbm.qsim import (
    CHANNEL_BASIS,
    LEAK_BASIS,
    EncodingError,
    apply_cnot,
    apply_ising,
    apply_pauli_word,
    apply_rotation,
    decode_channels,
    density,
    encode_channels,
    encode_dual,
    partial_trace,
)
from qlbm.symmetry import (
    basis_permutation,
    channel_permutations,
    permute_state,
    qubit_permutations,
)

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_chain(ops):
    out = ops[-1]
    for m in ops[-2::-1]:
        out = np.kron(out, m)
    return out


def embedded(op2, qubit, n=4):
    ops = [np.eye(2, dtype=complex)] * n
    ops[qubit] = op2
    return kron_chain(ops)


def rand_state(n=4, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return s / np.linalg.norm(s)


class TestChannelEncoding:
    def test_basis_map_matches_constituent_rule(self):
        # diagonal channels occupy the OR of their cardinal constituents
        assert CHANNEL_BASIS.tolist() == [0, 1, 2, 4, 8, 3, 6, 12, 9]
        assert len(set(CHANNEL_BASIS.tolist())) == 9
        assert CHANNEL_BASIS[5] == CHANNEL_BASIS[1] | CHANNEL_BASIS[2]
        assert CHANNEL_BASIS[6] == CHANNEL_BASIS[2] | CHANNEL_BASIS[3]
        assert CHANNEL_BASIS[7] == CHANNEL_BASIS[3] | CHANNEL_BASIS[4]
        assert CHANNEL_BASIS[8] == CHANNEL_BASIS[4] | CHANNEL_BASIS[1]
        assert len(LEAK_BASIS) == 7

    def test_rest_channel_encodes_to_zero_ket(self):
        f = np.zeros(9)
        f[0] = 1.0
        amp = encode_channels(f)
        assert amp[0] == 1.0
        assert np.abs(amp[1:]).max() == 0.0

    def test_first_diagonal_channel(self):
        f = np.zeros(9)
        f[5] = 1.0
        assert encode_channels(f)[0b0011] == 1.0

    def test_round_trip(self):
        rng = np.random.default_rng(3)
        f = np.abs(rng.normal(0.1, 0.03, 9))
        fd, leak, phases = decode_channels(encode_channels(f), f.sum())
        assert fd == pytest.approx(f, abs=1e-15)
        assert leak == 0.0
        assert np.abs(phases).max() == 0.0

    def test_negative_rejected(self):
        f = np.zeros(9)
        f[2] = -1e-3
        with pytest.raises(EncodingError):
            encode_channels(f)

    def test_equal_superposition_leakage(self):
        state = np.full(16, 0.25, dtype=complex)
        _, leak, _ = decode_channels(state)
        assert leak == pytest.approx(7 / 16)

    def test_pure_leak_state(self):
        state = np.zeros(16, dtype=complex)
        state[15] = 1.0
        f, leak, _ = decode_channels(state)
        assert leak == 1.0
        assert np.abs(f).max() == 0.0

    def test_dual_is_tensor_product(self):
        rng = np.random.default_rng(5)
        f = np.abs(rng.normal(0.1, 0.03, 9))
        a = encode_channels(f)
        big = encode_dual(f)
        assert big == pytest.approx(np.kron(a, a), abs=1e-15)
        assert np.linalg.norm(big) == pytest.approx(1.0, abs=1e-12)


class TestGates:
    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    @pytest.mark.parametrize("qubit", [0, 1, 2, 3])
    def test_rotation_matches_matrix_exponential(self, axis, qubit):
        theta = 0.7312
        psi = rand_state(seed=qubit)
        dense = embedded(expm(-1j * theta / 2 * PAULI[axis]), qubit)
        got = apply_rotation(psi.copy(), axis, [qubit], theta)
        assert got == pytest.approx(dense @ psi, abs=1e-14)

    def test_zero_angle_identity(self):
        psi = rand_state(seed=9)
        assert apply_rotation(psi.copy(), "x", [0, 1, 2, 3], 0.0) == pytest.approx(psi)
        assert apply_ising(psi.copy(), "xx", [(0, 1)], 0.0) == pytest.approx(psi)

    def test_x_pi_flips_with_phase(self):
        psi = np.zeros(2, dtype=complex)
        psi[0] = 1.0
        out = apply_rotation(psi, "x", [0], np.pi)
        assert out[1] == pytest.approx(-1j)

    @pytest.mark.parametrize("axis", ["xx", "yy", "zz"])
    @pytest.mark.parametrize("pair", [(0, 1), (1, 3), (0, 2)])
    def test_ising_matches_matrix_exponential(self, axis, pair):
        theta = -1.234
        psi = rand_state(seed=sum(pair))
        ops = [np.eye(2, dtype=complex)] * 4
        for q in pair:
            ops[q] = PAULI[axis[0]]
        dense = expm(-1j * theta / 2 * kron_chain(ops))
        got = apply_ising(psi.copy(), axis, [pair], theta)
        assert got == pytest.approx(dense @ psi, abs=1e-14)

    def test_zz_diagonal_phase(self):
        theta = 0.4
        psi = np.zeros(4, dtype=complex)
        psi[0] = 1.0
        out = apply_ising(psi, "zz", [(0, 1)], theta)
        assert out[0] == pytest.approx(np.exp(-1j * theta / 2))

    def test_norm_preserved(self):
        rng = np.random.default_rng(0)
        psi = rand_state(seed=17)
        for _ in range(50):
            psi = apply_rotation(psi, rng.choice(["x", "y", "z"]),
                                 [rng.integers(4)], rng.normal())
            psi = apply_ising(psi, rng.choice(["xx", "yy", "zz"]),
                              [tuple(rng.choice(4, 2, replace=False))], rng.normal())
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)

    def test_cnot_truth_table(self):
        for (ctrl_bit, tgt_bit), expect in {(0, 0): 0b00, (1, 0): 0b11}.items():
            psi = np.zeros(4, dtype=complex)
            psi[ctrl_bit << 1] = 1.0  # control is qubit 1
            out = apply_cnot(psi, 1, 0)
            assert out[expect if ctrl_bit else 0] == 1.0

    def test_cnot_involution(self):
        psi = rand_state(seed=4)
        out = apply_cnot(apply_cnot(psi.copy(), 1, 3), 1, 3)
        assert out == pytest.approx(psi, abs=1e-14)

    def test_cnot_rejects_equal_wires(self):
        with pytest.raises(ValueError):
            apply_cnot(rand_state(), 2, 2)

    @pytest.mark.parametrize("kind,targets", [
        ("rx", (2,)), ("ry", (1,)), ("rz", (0,)),
        ("xx", (0, 3)), ("yy", (1, 2)), ("zz", (0, 1)),
    ])
    def test_pauli_words(self, kind, targets):
        psi = rand_state(seed=len(targets))
        ops = [np.eye(2, dtype=complex)] * 4
        for q in targets:
            ops[q] = PAULI[kind[-1]]
        assert apply_pauli_word(psi.copy(), kind, targets) == pytest.approx(
            kron_chain(ops) @ psi, abs=1e-14)


class TestDensity:
    def test_pure_projector(self):
        psi = rand_state(seed=2)
        rho = density(psi)
        assert np.trace(rho) == pytest.approx(1.0)
        assert rho == pytest.approx(rho.conj().T)
        assert np.linalg.matrix_rank(rho, tol=1e-10) == 1

    def test_partial_trace_of_product_state(self):
        a = rand_state(seed=3)
        b = rand_state(seed=4)
        big = np.kron(b, a)  # register 1 = low qubits
        rho1 = partial_trace(big, keep=1)
        rho2 = partial_trace(big, keep=2)
        assert rho1 == pytest.approx(density(a), abs=1e-14)
        assert rho2 == pytest.approx(density(b), abs=1e-14)

    def test_entangled_reduction_is_mixed(self):
        # Bell-like pair across the registers embedded at basis states 0 and 1
        big = np.zeros(256, dtype=complex)
        big[0 * 16 + 0] = 1 / np.sqrt(2)
        big[1 * 16 + 1] = 1 / np.sqrt(2)
        rho1 = partial_trace(big, keep=1)
        assert np.trace(rho1) == pytest.approx(1.0, abs=1e-12)
        eig = np.linalg.eigvalsh(rho1)
        assert sorted(eig[-2:]) == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_partial_trace_random_states(self):
        for seed in range(3):
            psi = rand_state(n=8, seed=seed)
            rho1 = partial_trace(psi, keep=1)
            assert np.trace(rho1).real == pytest.approx(1.0, abs=1e-12)
            assert rho1 == pytest.approx(rho1.conj().T, abs=1e-12)
            assert np.linalg.eigvalsh(rho1).min() > -1e-10


class TestSymmetryAction:
    def test_group_size_and_closure(self):
        perms = qubit_permutations()
        assert len(perms) == 8
        assert len({p for p in perms}) == 8

    def test_basis_permutation_tracks_channels(self):
        # the qubit action must reproduce the channel action on encoded states
        for qp, cp in zip(qubit_permutations(), channel_permutations()):
            basis = basis_permutation(qp)
            assert np.array_equal(basis[CHANNEL_BASIS], CHANNEL_BASIS[cp])

    def test_rotation_element_geometry(self):
        cp = channel_permutations()[1]
        assert cp.tolist() == [0, 2, 3, 4, 1, 6, 7, 8, 5]

    def test_reflection_element_geometry(self):
        cp = channel_permutations()[4]
        assert cp.tolist() == [0, 1, 4, 3, 2, 8, 7, 6, 5]

    def test_permute_state_round_trip(self):
        psi = rand_state(seed=11)
        perm = basis_permutation(qubit_permutations()[3])
        back = np.empty_like(psi)
        out = permute_state(psi, perm)
        assert out[perm] == pytest.approx(psi)
