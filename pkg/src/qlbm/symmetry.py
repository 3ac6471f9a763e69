"""Dihedral symmetry group of the square lattice.

The 8-element group is generated by r (90-degree rotation) and s (reflection
about the x axis).  Its action exists in three coupled representations used
across the package:

- on the 9 lattice channels (permutations of f_i),
- on the 4 register qubits (qubit k indicates cardinal channel k+1, so r is
  the qubit cycle 0->1->2->3->0 and s swaps qubits 1 and 3),
- on the 16 computational basis states (induced by the qubit permutation).

The qubit action reproduces the channel action on the encoded basis states;
``channel_permutations`` and ``qubit_permutations`` return aligned lists.
"""
from __future__ import annotations

import numpy as np

from .lattice import C

N_REGISTER_QUBITS = 4

# generators as qubit maps: PERM[q] = image of qubit q
_R_QUBITS = (1, 2, 3, 0)   # rotation: channel c1->c2->c3->c4
_S_QUBITS = (0, 3, 2, 1)   # x-axis reflection: channels c2<->c4


def _compose(p: tuple[int, ...], q: tuple[int, ...]) -> tuple[int, ...]:
    # apply q first, then p
    return tuple(p[q[i]] for i in range(len(q)))


def qubit_permutations() -> list[tuple[int, ...]]:
    """The eight group elements as qubit permutations (identity first)."""
    e = tuple(range(N_REGISTER_QUBITS))
    rots = [e]
    for _ in range(3):
        rots.append(_compose(_R_QUBITS, rots[-1]))
    return rots + [_compose(rot, _S_QUBITS) for rot in rots]


def basis_permutation(qubit_perm: tuple[int, ...], n_qubits: int | None = None) -> np.ndarray:
    """Basis-index image array: state |k> maps to |perm[k]>.

    Bit q of the input index becomes bit qubit_perm[q] of the output index.
    """
    n = len(qubit_perm) if n_qubits is None else n_qubits
    dim = 1 << n
    out = np.zeros(dim, dtype=np.int64)
    for k in range(dim):
        img = 0
        for q in range(n):
            if (k >> q) & 1:
                img |= 1 << qubit_perm[q]
        out[k] = img
    return out


def dual_basis_permutation(qubit_perm: tuple[int, ...]) -> np.ndarray:
    """Simultaneous action on two 4-qubit registers (8-qubit basis indices)."""
    both = tuple(qubit_perm) + tuple(4 + p for p in qubit_perm)
    return basis_permutation(both, n_qubits=8)


def permute_state(state: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Apply a basis permutation to a state vector (batched on leading axes)."""
    out = np.empty_like(state)
    out[..., perm] = state
    return out


def channel_permutations() -> list[np.ndarray]:
    """Channel permutations aligned element-by-element with qubit_permutations().

    Derived geometrically: each group element acts on the velocity vectors;
    perm[i] is the channel whose velocity is the image of channel i's.
    """
    mats = []
    rot = np.array([[0, -1], [1, 0]])      # 90-degree rotation
    refl = np.array([[1, 0], [0, -1]])     # x-axis reflection (y -> -y)
    eye = np.eye(2, dtype=int)
    rots = [eye]
    for _ in range(3):
        rots.append(rot @ rots[-1])
    mats = rots + [r @ refl for r in rots]

    lookup = {tuple(c): i for i, c in enumerate(C)}
    perms = []
    for m in mats:
        perms.append(np.array([lookup[tuple(m @ c)] for c in C], dtype=np.int64))
    return perms


def permute_channels(f: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Relabel channels: channel i of the input becomes channel perm[i]."""
    out = np.empty_like(f)
    out[perm] = f
    return out


def rotate_field(f: np.ndarray) -> np.ndarray:
    """Rotate a square population field by 90 degrees, channels included.

    Site (x, y) maps to (-y mod n, x); channels are permuted by the rotation
    element so the physical flow is rigidly rotated.
    """
    if f.shape[1] != f.shape[2]:
        raise ValueError("rotation covariance requires a square lattice")
    perm = channel_permutations()[1]  # the single-rotation element
    n = f.shape[1]
    x = np.arange(n)
    src_x = x[None, :].repeat(n, axis=0)      # new (x', y') pulls from old (y', -x')
    out = np.empty_like(f)
    # new coordinates: x' = -y mod n, y' = x  =>  old (x, y) = (y', (-x') mod n)
    xp = np.arange(n)[:, None]
    yp = np.arange(n)[None, :]
    old_x = yp
    old_y = (-xp) % n
    rotated = f[:, old_x, old_y]
    out[perm] = rotated
    return out
