"""Classical D2Q9 BGK lattice Boltzmann solver.

Fields are stored channel-major as ``f[9, nx, ny]`` (structure-of-arrays, so
streaming is an ``np.roll`` per channel).  All collision/moment operations
broadcast over trailing axes and therefore work on a single site ``f[9]``, a
full field ``f[9, nx, ny]``, or a sample batch ``f[9, n]``.

Channel layout (index: velocity):

    0:( 0, 0)  1:( 1, 0)  2:( 0, 1)  3:(-1, 0)  4:( 0,-1)
    5:( 1, 1)  6:(-1, 1)  7:(-1,-1)  8:( 1,-1)

with weights 4/9, 1/9 (cardinal), 1/36 (diagonal) and c_s^2 = 1/3 — the
unique constants satisfying the isotropy conditions sum(w)=1, sum(w c)=0,
sum(w c_a c_b) = c_s^2 delta_ab.
"""
from __future__ import annotations

import csv
import enum
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

# Channel velocities, weights, squared sound speed, opposite-channel pairs.
C = np.array(
    [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]],
    dtype=np.int64,
)
W = np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4)
CS2 = 1.0 / 3.0
OPPOSITE = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6])

# Signed channel sums for the conserved/stress/energy moments:
# rows are u_x, u_y, p_xx - p_yy, p_xy, E.
MOMENT_MATRIX = np.array(
    [
        [0, 1, 0, -1, 0, 1, -1, -1, 1],   # u_x
        [0, 0, 1, 0, -1, 1, 1, -1, -1],   # u_y
        [0, 1, -1, 1, -1, 0, 0, 0, 0],    # p_xx - p_yy
        [0, 0, 0, 0, 0, 1, -1, 1, -1],    # p_xy
        [-4, -1, -1, -1, -1, 2, 2, 2, 2], # E
    ],
    dtype=np.float64,
)


class InvalidInputError(ValueError):
    """Non-finite or out-of-domain numerical input."""


class DegenerateDensityError(ValueError):
    """Local density is zero or negative."""


class ConfigurationError(ValueError):
    """Inconsistent lattice/case configuration."""


class InstabilityError(RuntimeError):
    """NaN detected during time stepping; ``step`` holds the failing index."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class EqOrder(enum.Enum):
    LINEAR = "linear"        # equilibrium truncated after the u.c term
    QUADRATIC = "quadratic"  # full second-order equilibrium


class Boundary(enum.Enum):
    PERIODIC = "periodic"
    INLET_OUTLET = "inlet_outlet"  # equilibrium inlet at x=0, extrapolation outlet, solid mask


class Case(enum.Enum):
    TGV = "tgv"
    KOLMOGOROV = "kolmogorov"
    PLATE = "plate"
    JETS = "jets"


@dataclass(frozen=True)
class GaussianJets:
    """Two pairs of counter-propagating Gaussian jet forces.

    ``g0`` is the force amplitude, ``width`` the jet width in lattice units,
    and the remaining fields the jet center coordinates.
    """

    g0: float
    width: float
    yh1: float
    yh2: float
    xv1: float
    xv2: float

    def __post_init__(self):
        if self.g0 <= 0 or self.width <= 0:
            raise ConfigurationError("jet amplitude and width must be positive")


@dataclass(frozen=True)
class KolmogorovInit:
    """Initial shear velocity field with cosine profiles along both axes."""

    ax: float
    ay: float
    kx: int = 1
    ky: int = 1

    def __post_init__(self):
        if max(abs(self.ax), abs(self.ay)) >= np.sqrt(CS2):
            raise ConfigurationError("initial amplitudes must be subsonic")


@dataclass
class LatticeConfig:
    """Square-lattice run configuration.

    ``tau`` must exceed 0.5 so the viscosity nu = c_s^2 (tau - 0.5) stays
    positive.  Case-specific parameters (``u_max`` for the vortex/plate cases,
    plate geometry, force spec) are carried here so a single object describes
    a reproducible run.
    """

    nx: int
    ny: int
    tau: float = 1.0
    order: EqOrder = EqOrder.QUADRATIC
    boundary: Boundary = Boundary.PERIODIC
    force: GaussianJets | KolmogorovInit | None = None
    u_max: float = 0.05
    # flat-plate geometry: a 1-cell-thick vertical plate at x=plate_x spanning
    # plate_len sites centered at y=ny/2 (length/offset are exposed because
    # they are otherwise under-determined by the target flow alone)
    plate_x: int | None = None
    plate_len: int | None = None

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ConfigurationError("lattice must be at least 4x4")
        if not self.tau > 0.5:
            raise ConfigurationError("tau must exceed 0.5 (positive viscosity)")
        if isinstance(self.order, str):
            self.order = EqOrder(self.order)
        if isinstance(self.boundary, str):
            self.boundary = Boundary(self.boundary)

    @property
    def viscosity(self) -> float:
        return CS2 * (self.tau - 0.5)


@dataclass
class MacroVector:
    """Signed channel sums: velocities, stress differences and energy.

    Components are the raw moment sums of the source field (momentum rather
    than momentum/density for the velocity rows); entries may be scalars or
    arrays matching the trailing shape of the input field.
    """

    ux: np.ndarray
    uy: np.ndarray
    pxx_minus_pyy: np.ndarray
    pxy: np.ndarray
    energy: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.ux, self.uy, self.pxx_minus_pyy, self.pxy, self.energy])


def _bcast(v: np.ndarray, ndim: int) -> np.ndarray:
    # reshape a per-channel vector (9,) so it broadcasts over trailing axes
    return v.reshape((9,) + (1,) * (ndim - 1)) if ndim > 1 else v


def equilibrium(rho, u, order: EqOrder = EqOrder.QUADRATIC) -> np.ndarray:
    """Equilibrium populations for density ``rho`` and velocity ``u``.

    ``u`` has shape ``(2, ...)``; the result has shape ``(9, ...)``.  The
    quadratic order is w_i rho (1 + cu/cs2 + cu^2/(2 cs2^2) - u.u/(2 cs2));
    the linear order drops both quadratic terms.  Both orders carry exactly
    the same density and momentum.
    """
    rho = np.asarray(rho, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(u))):
        raise InvalidInputError("non-finite density or velocity")
    cu = np.tensordot(C.astype(np.float64), u, axes=(1, 0))  # (9, ...)
    w = _bcast(W, cu.ndim)
    feq = w * rho * (1.0 + cu / CS2)
    if order is EqOrder.QUADRATIC:
        usq = (u ** 2).sum(axis=0)
        feq = feq + w * rho * (cu ** 2 / (2.0 * CS2 ** 2) - usq / (2.0 * CS2))
    return feq


def macroscopic(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Density and velocity (momentum/density) of a population array."""
    f = np.asarray(f, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise InvalidInputError("non-finite populations")
    rho = f.sum(axis=0)
    if np.any(rho <= 0):
        raise DegenerateDensityError("non-positive local density")
    j = np.tensordot(C.astype(np.float64).T, f, axes=(1, 0))  # (2, ...)
    return rho, j / rho


def moments(f: np.ndarray) -> MacroVector:
    """Velocity, stress-difference and energy moments as signed channel sums."""
    f = np.asarray(f, dtype=np.float64)
    m = np.tensordot(MOMENT_MATRIX, f, axes=(1, 0))
    return MacroVector(ux=m[0], uy=m[1], pxx_minus_pyy=m[2], pxy=m[3], energy=m[4])


def bgk_collide(f: np.ndarray, tau: float, order: EqOrder = EqOrder.QUADRATIC) -> np.ndarray:
    """Single-relaxation-time collision f + (f_eq - f)/tau.

    Mass and momentum are conserved to machine precision for any tau and
    either equilibrium order.
    """
    if not tau > 0.5:
        raise InvalidInputError("tau must exceed 0.5")
    rho, u = macroscopic(f)
    return f + (equilibrium(rho, u, order) - f) / tau


def stream(f: np.ndarray) -> np.ndarray:
    """Shift every channel by its lattice velocity with periodic wrap."""
    out = np.empty_like(f)
    for i in range(9):
        out[i] = np.roll(f[i], (C[i, 0], C[i, 1]), axis=(0, 1))
    return out


def apply_bounce_back(f: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Return post-stream populations that entered solid sites to their origin.

    Populations found on a masked site are removed and re-emitted at the
    neighbouring fluid site they streamed from, in the opposite channel.
    Total mass is conserved exactly.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        raise ConfigurationError("solid mask covers the whole domain")
    if not mask.any():
        return f
    out = f.copy()
    for i in range(1, 9):
        blocked = np.where(mask, out[i], 0.0)
        out[i] -= blocked
        # roll back along -c_i: the blocked mass returns to its source site
        out[OPPOSITE[i]] += np.roll(blocked, (-C[i, 0], -C[i, 1]), axis=(0, 1))
    return out


def jet_force_field(spec: GaussianJets, nx: int, ny: int) -> np.ndarray:
    """Force field (2, nx, ny) of two orthogonal counter-propagating jet pairs.

    G_x depends on y only, G_y on x only; each component is the difference of
    two Gaussians so the total injected momentum is (approximately) zero.
    """
    x = np.arange(nx, dtype=np.float64)
    y = np.arange(ny, dtype=np.float64)
    gx = spec.g0 * (
        np.exp(-((y - spec.yh1) ** 2) / spec.width ** 2)
        - np.exp(-((y - spec.yh2) ** 2) / spec.width ** 2)
    )
    gy = spec.g0 * (
        np.exp(-((x - spec.xv1) ** 2) / spec.width ** 2)
        - np.exp(-((x - spec.xv2) ** 2) / spec.width ** 2)
    )
    g = np.zeros((2, nx, ny))
    g[0] = gx[None, :]
    g[1] = gy[:, None]
    return g


def apply_force(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Add the first-order forcing increment w_i (c_i . G)/cs2 per site.

    ``g`` has shape (2,) or (2, nx, ny).  The increment shifts the momentum
    density by exactly G and leaves the mass unchanged; at the force
    magnitudes used here (<= 1e-3) second-order corrections are negligible.
    """
    cg = np.tensordot(C.astype(np.float64), np.asarray(g, dtype=np.float64), axes=(1, 0))
    cg = cg.reshape(cg.shape + (1,) * (f.ndim - cg.ndim))  # broadcast over sites
    return f + _bcast(W, f.ndim) * cg / CS2


def tgv_velocity(nx: int, ny: int, u_max: float) -> np.ndarray:
    """Single-vortex velocity field with wavenumbers pi/nx, pi/ny.

    Stream function psi ~ sin(kx x) sin(ky y): one vortex centered in the
    box, with vanishing normal velocity at the periodic seam (the seam then
    carries only a viscously decaying slip layer and max|u| decays
    monotonically).
    """
    kx = np.pi / nx
    ky = np.pi / ny
    x = np.arange(nx)[:, None]
    y = np.arange(ny)[None, :]
    ux = u_max * np.sin(kx * x) * np.cos(ky * y)
    uy = -u_max * np.cos(kx * x) * np.sin(ky * y)
    return np.stack([np.broadcast_to(ux, (nx, ny)), np.broadcast_to(uy, (nx, ny))])


def plate_mask(config: LatticeConfig) -> np.ndarray:
    """Solid mask for a 1-cell-thick vertical plate centered in y."""
    nx, ny = config.nx, config.ny
    px = config.plate_x if config.plate_x is not None else nx // 4
    plen = config.plate_len if config.plate_len is not None else ny // 3
    if not (0 < px < nx - 1) or not (0 < plen < ny):
        raise ConfigurationError("plate does not fit in the domain")
    y0 = (ny - plen) // 2
    mask = np.zeros((nx, ny), dtype=bool)
    mask[px, y0 : y0 + plen] = True
    return mask


def init_case(case: Case, config: LatticeConfig) -> np.ndarray:
    """Initial population field for one of the benchmark flows.

    TGV starts at the quadratic equilibrium of a single decaying vortex;
    the Kolmogorov case initializes the populations directly from the cosine
    shear profiles; the plate and jet cases start at rest (f = w).
    """
    nx, ny = config.nx, config.ny
    if isinstance(case, str):
        try:
            case = Case(case)
        except ValueError as exc:
            raise ConfigurationError(f"unknown case {case!r}") from exc
    if case is Case.TGV:
        u = tgv_velocity(nx, ny, config.u_max)
        return equilibrium(np.ones((nx, ny)), u, EqOrder.QUADRATIC)
    if case is Case.KOLMOGOROV:
        spec = config.force
        if not isinstance(spec, KolmogorovInit):
            raise ConfigurationError("Kolmogorov case needs a KolmogorovInit force spec")
        x = np.arange(nx)[:, None]
        y = np.arange(ny)[None, :]
        # both cosine arguments are scaled by the y-extent
        px = spec.ax * np.cos(2.0 * np.pi * spec.kx * y / ny)
        py = spec.ay * np.cos(2.0 * np.pi * spec.ky * x / ny)
        px = np.broadcast_to(px, (nx, ny))
        py = np.broadcast_to(py, (nx, ny))
        f = np.empty((9, nx, ny))
        for i in range(9):
            f[i] = W[i] * (1.0 + px * C[i, 0] + py * C[i, 1])
        return f
    if case is Case.PLATE:
        f = np.broadcast_to(W[:, None, None], (9, nx, ny)).copy()
        f[:, plate_mask(config)] = 0.0  # solid sites hold no mass
        return f
    if case is Case.JETS:
        return np.broadcast_to(W[:, None, None], (9, nx, ny)).copy()
    raise ConfigurationError(f"unknown case {case!r}")


def _apply_inlet_outlet(f: np.ndarray, config: LatticeConfig) -> None:
    # equilibrium inflow at fixed u on the first column, zeroth-order
    # extrapolation on the last; chosen for robustness at low Reynolds number
    u_in = np.zeros((2, f.shape[2]))
    u_in[0] = config.u_max
    f[:, 0, :] = equilibrium(np.ones(f.shape[2]), u_in, EqOrder.QUADRATIC)
    f[:, -1, :] = f[:, -2, :]


@dataclass
class Trajectory:
    """Recorded run: optional full fields plus per-step macroscopic extrema.

    ``fields[t]`` is the population field after t full steps (so ``fields[0]``
    is the initial condition and ``fields[:-1]`` are the collide inputs of the
    performed steps).
    """

    config: LatticeConfig
    fields: np.ndarray | None            # (n_snap, 9, nx, ny) or None
    snapshot_steps: np.ndarray           # step index of each stored field
    u_max_history: np.ndarray            # (T+1,) max |u| per step
    mass_history: np.ndarray             # (T+1,) total mass per step
    rho: np.ndarray | None = None        # final density (nx, ny)
    u: np.ndarray | None = None          # final velocity (2, nx, ny)
    mask: np.ndarray | None = None


def fluid_view(f: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Replace solid-site populations by the rest weights for diagnostics.

    Solid sites carry no mass during a masked run; moments evaluated there
    would divide by zero, so diagnostic code reads them as quiescent fluid.
    """
    if mask is None or not mask.any():
        return f
    return np.where(mask[None, :, :], W[:, None, None], f)


def step_field(
    f: np.ndarray,
    config: LatticeConfig,
    force: np.ndarray | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """One full update: collide, force, stream, bounce-back, open boundaries.

    Solid sites take no part in the collision and hold no mass; everything
    that streams into them is reflected back out by the bounce-back pass.
    """
    if mask is not None and mask.any():
        collided = bgk_collide(fluid_view(f, mask), config.tau, config.order)
        f = np.where(mask[None, :, :], 0.0, collided)
    else:
        f = bgk_collide(f, config.tau, config.order)
    if force is not None:
        f = apply_force(f, force)
    f = stream(f)
    if mask is not None and mask.any():
        f = apply_bounce_back(f, mask)
    if config.boundary is Boundary.INLET_OUTLET:
        _apply_inlet_outlet(f, config)
    return f


def run_reference(
    config: LatticeConfig,
    T: int,
    case: Case = Case.TGV,
    record: str = "fields",
    every: int = 1,
    f0: np.ndarray | None = None,
) -> Trajectory:
    """Run ``T`` steps of the classical solver from a case initial condition.

    ``record`` selects "fields" (store the population field every ``every``
    steps) or "macro" (store only extrema histories plus the final state).
    Raises :class:`InstabilityError` with the failing step index if the field
    develops NaNs.
    """
    f = init_case(case, config) if f0 is None else f0.copy()
    mask = plate_mask(config) if case is Case.PLATE else None
    force = None
    if isinstance(config.force, GaussianJets):
        force = jet_force_field(config.force, config.nx, config.ny)

    neg = int((f <= 0).sum())
    if neg:
        log.warning("initial field has %d non-positive populations", neg)

    snaps, snap_steps = [], []
    umaxs, masses = [], []

    def observe(t, f):
        rho, u = macroscopic(fluid_view(f, mask))
        umaxs.append(float(np.sqrt((u ** 2).sum(axis=0)).max()))
        masses.append(float(f.sum()))
        if record == "fields" and t % every == 0:
            snaps.append(f.copy())
            snap_steps.append(t)

    observe(0, f)
    for t in range(1, T + 1):
        f = step_field(f, config, force=force, mask=mask)
        if np.any(np.isnan(f)):
            raise InstabilityError(f"NaN populations at step {t}", step=t)
        if np.any(f < 0):
            bad = np.argwhere((f < 0).any(axis=0))
            log.warning(
                "negative populations at step %d (%d sites, first at %s)",
                t, len(bad), tuple(bad[0]),
            )
        observe(t, f)

    rho, u = macroscopic(fluid_view(f, mask))
    return Trajectory(
        config=config,
        fields=np.array(snaps) if record == "fields" else None,
        snapshot_steps=np.array(snap_steps, dtype=np.int64),
        u_max_history=np.array(umaxs),
        mass_history=np.array(masses),
        rho=rho,
        u=u,
        mask=mask,
    )


# ---------------------------------------------------------------------------
# Trajectory / field I/O
# ---------------------------------------------------------------------------

_MAGIC = b"QLBM"
_HEADER = struct.Struct("<4sHII2x")  # magic, version, nx, ny; padded to 16 bytes
FORMAT_VERSION = 1


def save_fields(path, fields: np.ndarray) -> None:
    """Write one or more population fields as the compact binary container.

    Layout: 16-byte header (magic ``QLBM``, version u16, nx u32, ny u32),
    followed by little-endian float64 frames in channel-major order.
    """
    fields = np.asarray(fields, dtype=np.float64)
    if fields.ndim == 3:
        fields = fields[None]
    _, nch, nx, ny = fields.shape
    if nch != 9:
        raise InvalidInputError("expected 9 channels")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, FORMAT_VERSION, nx, ny))
        fh.write(np.ascontiguousarray(fields, dtype="<f8").tobytes())


def load_fields(path) -> np.ndarray:
    """Read a binary field container; returns (n_frames, 9, nx, ny)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, nx, ny = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise InvalidInputError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise InvalidInputError(f"unsupported container version {version}")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    frame = 9 * nx * ny
    if payload.size % frame:
        raise InvalidInputError("truncated field payload")
    return payload.reshape(-1, 9, nx, ny).astype(np.float64)


def save_field_csv(path, f: np.ndarray) -> None:
    """Write one field as CSV rows x, y, f0..f8."""
    _, nx, ny = f.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"] + [f"f{i}" for i in range(9)])
        for x in range(nx):
            for y in range(ny):
                writer.writerow([x, y] + [repr(float(v)) for v in f[:, x, y]])


def save_macro_csv(path, f: np.ndarray) -> None:
    """Write the macroscopic snapshot of a field as CSV rows x, y, rho, ux, uy."""
    rho, u = macroscopic(f)
    nx, ny = rho.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "rho", "ux", "uy"])
        for x in range(nx):
            for y in range(ny):
                writer.writerow(
                    [x, y, repr(float(rho[x, y])), repr(float(u[0, x, y])), repr(float(u[1, x, y]))]
                )
