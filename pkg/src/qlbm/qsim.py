"""Dense statevector and density-matrix emulator for 4- and 8-qubit registers.

States are complex128 arrays whose *last* axis is the computational basis
(dimension 16 or 256); any leading axes are treated as a batch, so the same
gate kernels serve single states, site fields and training batches.  Basis
index bit q corresponds to qubit q (qubit 0 = least significant bit).

Channel encoding: qubit k is the indicator of cardinal channel k+1, and each
diagonal channel occupies the basis state given by the bitwise OR of its two
cardinal constituents:

    f0 -> |0000>  f1 -> |0001>  f2 -> |0010>  f3 -> |0100>  f4 -> |1000>
    f5 -> |0011>  f6 -> |0110>  f7 -> |1100>  f8 -> |1001>

The remaining 7 basis states carry no physical content; amplitude residing
there is reported as leakage.
"""
from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

# basis index of each channel, and the 7 non-physical indices
CHANNEL_BASIS = np.array([0b0000, 0b0001, 0b0010, 0b0100, 0b1000,
                          0b0011, 0b0110, 0b1100, 0b1001])
LEAK_BASIS = np.array(sorted(set(range(16)) - set(CHANNEL_BASIS.tolist())))

# |amp| below which phase alignment to basis state 0 falls back to the
# largest-amplitude physical state
PHASE_ALIGN_GUARD = 1e-9

NORM_TOL = 1e-10


class EncodingError(ValueError):
    """Populations unsuitable for amplitude encoding."""


def num_qubits(state: np.ndarray) -> int:
    n = int(np.log2(state.shape[-1]))
    if 1 << n != state.shape[-1]:
        raise ValueError("state dimension is not a power of two")
    return n


def zero_state(n_qubits: int, batch: tuple[int, ...] = ()) -> np.ndarray:
    state = np.zeros(batch + (1 << n_qubits,), dtype=np.complex128)
    state[..., 0] = 1.0
    return state


# ---------------------------------------------------------------------------
# channel encoding / decoding
# ---------------------------------------------------------------------------

def encode_channels(f: np.ndarray) -> np.ndarray:
    """Amplitude-encode populations: amp[basis(i)] = sqrt(f_i / sum f).

    ``f`` has shape (..., 9); the result has shape (..., 16) with zero phases
    and zero amplitude on the non-physical states.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != 9:
        raise EncodingError("expected 9 channels on the last axis")
    if np.any(f < 0):
        raise EncodingError("negative populations cannot be amplitude-encoded")
    mass = f.sum(axis=-1, keepdims=True)
    if np.any(mass <= 0):
        raise EncodingError("zero total mass")
    amp = np.zeros(f.shape[:-1] + (16,), dtype=np.complex128)
    amp[..., CHANNEL_BASIS] = np.sqrt(f / mass)
    return amp


def decode_channels(state: np.ndarray, mass=1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read populations, leakage and relative phases from a 16-dim state.

    Returns ``(f, leakage, phases)`` where f_i = |amp[basis(i)]|^2 * mass,
    leakage is the probability on the 7 non-physical states and phases are
    measured relative to the channel-0 basis state.  If that amplitude is
    below the alignment guard, the reference switches to the largest physical
    amplitude (logged).
    """
    amps = state[..., CHANNEL_BASIS]
    probs = np.abs(amps) ** 2
    f = probs * np.asarray(mass)[..., None] if np.ndim(mass) else probs * mass
    leakage = (np.abs(state[..., LEAK_BASIS]) ** 2).sum(axis=-1)

    ref = amps[..., 0]
    guard = np.abs(ref) < PHASE_ALIGN_GUARD
    if np.any(guard):
        log.info("phase alignment fallback at %d states", int(np.count_nonzero(guard)))
        largest = np.argmax(np.abs(amps), axis=-1)
        fallback = np.take_along_axis(amps, largest[..., None], axis=-1)[..., 0]
        ref = np.where(guard, fallback, ref)
    phases = np.angle(amps * np.exp(-1j * np.angle(ref))[..., None])
    return f, leakage, phases


def encode_dual(f: np.ndarray) -> np.ndarray:
    """Tensor product of two identical channel encodings (8 qubits).

    Register 1 occupies qubits 0-3 (low bits), register 2 qubits 4-7.
    """
    a = encode_channels(f)
    return (a[..., :, None] * a[..., None, :]).reshape(f.shape[:-1] + (256,))


# ---------------------------------------------------------------------------
# gate kernels
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _pair_indices(n_qubits: int, qubit: int) -> tuple[np.ndarray, np.ndarray]:
    # basis indices with the qubit bit clear, and the same with it set
    k = np.arange(1 << n_qubits)
    i0 = k[(k >> qubit) & 1 == 0]
    return i0, i0 | (1 << qubit)


@lru_cache(maxsize=None)
def _xor_permutation(n_qubits: int, mask: int) -> np.ndarray:
    return np.arange(1 << n_qubits) ^ mask


@lru_cache(maxsize=None)
def _parity_sign(n_qubits: int, i: int, j: int) -> np.ndarray:
    # (-1)^(bit_i XOR bit_j): +1 on aligned pairs, -1 on anti-aligned
    k = np.arange(1 << n_qubits)
    return 1.0 - 2.0 * (((k >> i) ^ (k >> j)) & 1).astype(np.float64)


@lru_cache(maxsize=None)
def _bit_sign(n_qubits: int, qubit: int) -> np.ndarray:
    k = np.arange(1 << n_qubits)
    return 1.0 - 2.0 * ((k >> qubit) & 1).astype(np.float64)


@lru_cache(maxsize=None)
def _cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    k = np.arange(1 << n_qubits)
    return np.where((k >> control) & 1 == 1, k ^ (1 << target), k)


def apply_rotation(state: np.ndarray, axis: str, qubits, theta: float) -> np.ndarray:
    """Apply exp(-i theta/2 sigma_axis) to each listed qubit (in place).

    Every kernel is one basis gather plus one vector combine: X acts as the
    XOR permutation of the qubit bit, Y adds the bit-sign, Z is diagonal.
    The caller owns ``state``; ``apply_circuit`` copies once per circuit.
    """
    n = num_qubits(state)
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    for q in np.atleast_1d(qubits):
        q = int(q)
        if axis == "z":
            state *= c - 1j * s * _bit_sign(n, q)
        elif axis == "x":
            state[...] = c * state - 1j * s * state[..., _xor_permutation(n, 1 << q)]
        elif axis == "y":
            sign = _bit_sign(n, q)
            state[...] = c * state - s * sign * state[..., _xor_permutation(n, 1 << q)]
        else:
            raise ValueError(f"unknown rotation axis {axis!r}")
    return state


def apply_ising(state: np.ndarray, axis: str, pairs, theta: float) -> np.ndarray:
    """Apply exp(-i theta/2 sigma_a x sigma_a) to every pair with a shared angle."""
    n = num_qubits(state)
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    for (i, j) in pairs:
        i, j = int(i), int(j)
        if axis == "zz":
            state *= c - 1j * s * _parity_sign(n, i, j)
        elif axis == "xx":
            perm = _xor_permutation(n, (1 << i) | (1 << j))
            state[...] = c * state - 1j * s * state[..., perm]
        elif axis == "yy":
            perm = _xor_permutation(n, (1 << i) | (1 << j))
            state[...] = c * state + 1j * s * _parity_sign(n, i, j) * state[..., perm]
        else:
            raise ValueError(f"unknown Ising axis {axis!r}")
    return state


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    if control == target:
        raise ValueError("control and target must differ")
    n = num_qubits(state)
    state[...] = state[..., _cnot_permutation(n, control, target)]
    return state


def apply_pauli_word(state: np.ndarray, kind: str, targets) -> np.ndarray:
    """Apply the Pauli word generating a gate family (X, Z, XX, ZZ, ...).

    Used by gradient code: the generator of ``rx`` on qubit q is X_q, of an
    ``xx`` pair is X_i X_j, etc.  Returns a new array.
    """
    n = num_qubits(state)
    if kind == "rx":
        return state[..., _xor_permutation(n, 1 << int(targets[0]))]
    if kind == "rz":
        return state * _bit_sign(n, int(targets[0]))
    if kind == "ry":
        q = int(targets[0])
        return -1j * _bit_sign(n, q) * state[..., _xor_permutation(n, 1 << q)]
    i, j = int(targets[0]), int(targets[1])
    if kind == "xx":
        return state[..., _xor_permutation(n, (1 << i) | (1 << j))]
    if kind == "zz":
        return state * _parity_sign(n, i, j)
    if kind == "yy":
        return -_parity_sign(n, i, j) * state[..., _xor_permutation(n, (1 << i) | (1 << j))]
    raise ValueError(f"no Pauli word for gate kind {kind!r}")


# ---------------------------------------------------------------------------
# density matrices
# ---------------------------------------------------------------------------

def density(state: np.ndarray) -> np.ndarray:
    """Pure-state density matrix |psi><psi| (batched on leading axes)."""
    return state[..., :, None] * state[..., None, :].conj()


def partial_trace(state: np.ndarray, keep: int = 1) -> np.ndarray:
    """Reduced density matrix of one 4-qubit register of an 8-qubit state.

    ``keep=1`` keeps qubits 0-3, ``keep=2`` keeps qubits 4-7.
    """
    if state.shape[-1] != 256:
        raise ValueError("partial_trace expects an 8-qubit state")
    m = state.reshape(state.shape[:-1] + (16, 16))  # [reg2, reg1]
    if keep == 1:
        return np.einsum("...ca,...cb->...ab", m, m.conj())
    if keep == 2:
        return np.einsum("...ac,...bc->...ab", m, m.conj())
    raise ValueError("keep must be 1 or 2")


def check_norm(state: np.ndarray, tol: float = NORM_TOL) -> None:
    norms = np.abs(state) ** 2
    dev = np.abs(norms.sum(axis=-1) - 1.0).max()
    if dev > tol:
        raise ValueError(f"state norm drifted by {dev:.2e}")


def state_csv_rows(state: np.ndarray):
    """Debug dump rows (index, re, im) for a single state vector."""
    for k, a in enumerate(np.asarray(state)):
        yield k, float(a.real), float(a.imag)
