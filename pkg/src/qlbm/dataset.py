"""Collision-sample corpora for training and evaluation.

A sample is a triple (f_str, f_lin, f_ref): the pre-collision populations,
their image under the linear-order collision and their image under the full
quadratic collision, together with the density, velocity and relaxation time
they were generated at.  Corpora are stored column-wise (one array per field)
because everything downstream consumes them in vectorized batches.

Two construction routes exist: harvesting every site of a recorded
trajectory, and drawing synthetic samples that mimic a target flow's
velocity correlation and near-equilibrium perturbation statistics.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .lattice import CS2, EqOrder, InvalidInputError, Trajectory, bgk_collide, equilibrium

_MAGIC = b"QLBM"
_HEADER = struct.Struct("<4sHII2x")  # magic, version, n_samples, record length
_RECORD_LEN = 32  # f_str[9] f_lin[9] f_ref[9] rho ux uy tau source
FORMAT_VERSION = 1

SOURCE_HARVESTED = "harvested"
SOURCE_ARTIFICIAL = "artificial"
_SOURCE_CODE = {SOURCE_HARVESTED: 0.0, SOURCE_ARTIFICIAL: 1.0}


@dataclass(frozen=True)
class CollisionSample:
    """One training record; fields mirror the columnar :class:`Dataset`."""

    f_str: np.ndarray
    f_lin: np.ndarray
    f_ref: np.ndarray
    rho: float
    u: np.ndarray
    tau: float
    source: str


@dataclass
class Dataset:
    f_str: np.ndarray   # (n, 9)
    f_lin: np.ndarray   # (n, 9)
    f_ref: np.ndarray   # (n, 9)
    rho: np.ndarray     # (n,)
    u: np.ndarray       # (n, 2)
    tau: float
    source: str

    def __len__(self) -> int:
        return self.f_str.shape[0]

    def __getitem__(self, i: int) -> CollisionSample:
        return CollisionSample(self.f_str[i], self.f_lin[i], self.f_ref[i],
                               float(self.rho[i]), self.u[i], self.tau, self.source)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.f_str[idx], self.f_lin[idx], self.f_ref[idx],
                       self.rho[idx], self.u[idx], self.tau, self.source)

    def validate(self, tol: float = 1e-12) -> float:
        """Recompute both collision images; returns the largest deviation."""
        lin = bgk_collide(self.f_str.T, self.tau, EqOrder.LINEAR).T
        ref = bgk_collide(self.f_str.T, self.tau, EqOrder.QUADRATIC).T
        dev = max(float(np.abs(lin - self.f_lin).max()),
                  float(np.abs(ref - self.f_ref).max()))
        if dev > tol:
            raise InvalidInputError(f"inconsistent collision images (dev {dev:.2e})")
        return dev

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        """Binary container: the 16-byte header (count, record length) plus
        one 32-double record per sample."""
        n = len(self)
        rec = np.empty((n, _RECORD_LEN))
        rec[:, 0:9] = self.f_str
        rec[:, 9:18] = self.f_lin
        rec[:, 18:27] = self.f_ref
        rec[:, 27] = self.rho
        rec[:, 28:30] = self.u
        rec[:, 30] = self.tau
        rec[:, 31] = _SOURCE_CODE[self.source]
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, FORMAT_VERSION, n, _RECORD_LEN))
            fh.write(np.ascontiguousarray(rec, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path, "rb") as fh:
            magic, version, n, rec_len = _HEADER.unpack(fh.read(_HEADER.size))
            if magic != _MAGIC or version != FORMAT_VERSION or rec_len != _RECORD_LEN:
                raise InvalidInputError("not a collision dataset container")
            rec = np.frombuffer(fh.read(), dtype="<f8").reshape(n, rec_len).astype(np.float64)
        source = SOURCE_ARTIFICIAL if (n and rec[0, 31] == 1.0) else SOURCE_HARVESTED
        tau = float(rec[0, 30]) if n else 1.0
        return cls(rec[:, 0:9].copy(), rec[:, 9:18].copy(), rec[:, 18:27].copy(),
                   rec[:, 27].copy(), rec[:, 28:30].copy(), tau, source)

    def to_csv(self, path) -> None:
        cols = ([f"f_str{i}" for i in range(9)] + [f"f_lin{i}" for i in range(9)]
                + [f"f_ref{i}" for i in range(9)] + ["rho", "ux", "uy", "tau", "source"])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for i in range(len(self)):
                row = ([repr(float(v)) for v in self.f_str[i]]
                       + [repr(float(v)) for v in self.f_lin[i]]
                       + [repr(float(v)) for v in self.f_ref[i]]
                       + [repr(float(self.rho[i])), repr(float(self.u[i, 0])),
                          repr(float(self.u[i, 1])), repr(self.tau), self.source])
                writer.writerow(row)


@dataclass(frozen=True)
class ArtificialSpec:
    """Recipe for a synthetic corpus.

    Velocities are drawn either with the vortex-like angle correlation
    (u_x0, u_y0 ~ U(0, u0_max), theta ~ U(-pi, pi), u = (u_x0 cos, u_y0 sin))
    or as independent uniform components.  Per-channel noise levels sigma_i
    are themselves uniform in [sigma_min_i, sigma_max_i] and the
    non-equilibrium perturbation is N(0, sigma_i^2).  Density is fixed at 1.
    """

    u0_max: float
    sigma_min: np.ndarray | float = 0.0
    sigma_max: np.ndarray | float = 1e-4
    correlation: str = "tgv_angle"  # 'tgv_angle' | 'independent'
    n: int = 1
    seed: int = 0
    tau: float = 1.0

    def __post_init__(self):
        smin = np.broadcast_to(np.asarray(self.sigma_min, dtype=np.float64), (9,))
        smax = np.broadcast_to(np.asarray(self.sigma_max, dtype=np.float64), (9,))
        if np.any(smin < 0) or np.any(smax < smin):
            raise InvalidInputError("need 0 <= sigma_min <= sigma_max")
        if not 0.0 <= self.u0_max < np.sqrt(CS2):
            raise InvalidInputError("u0_max must be subsonic")
        if self.correlation not in ("tgv_angle", "independent"):
            raise InvalidInputError(f"unknown correlation {self.correlation!r}")
        object.__setattr__(self, "sigma_min", smin.copy())
        object.__setattr__(self, "sigma_max", smax.copy())


def _draw_block(spec: ArtificialSpec, rng: np.random.Generator, n: int):
    if spec.correlation == "tgv_angle":
        ux0 = rng.uniform(0.0, spec.u0_max, n)
        uy0 = rng.uniform(0.0, spec.u0_max, n)
        theta = rng.uniform(-np.pi, np.pi, n)
        u = np.stack([ux0 * np.cos(theta), uy0 * np.sin(theta)], axis=1)
    else:
        u = rng.uniform(-spec.u0_max, spec.u0_max, (n, 2))
    sigma = rng.uniform(spec.sigma_min, spec.sigma_max, (n, 9))
    noise = rng.normal(0.0, 1.0, (n, 9)) * sigma
    feq = equilibrium(np.ones(n), u.T, EqOrder.QUADRATIC).T
    return feq + noise, u


def sample_artificial(spec: ArtificialSpec, rng: np.random.Generator,
                      max_retries: int = 100) -> CollisionSample:
    """Draw one synthetic sample; redraws on non-positive populations."""
    for _ in range(max_retries):
        f_str, u = _draw_block(spec, rng, 1)
        if np.all(f_str > 0):
            f_lin = bgk_collide(f_str[0], spec.tau, EqOrder.LINEAR)
            f_ref = bgk_collide(f_str[0], spec.tau, EqOrder.QUADRATIC)
            return CollisionSample(f_str[0], f_lin, f_ref, 1.0, u[0], spec.tau,
                                   SOURCE_ARTIFICIAL)
    raise InvalidInputError("could not draw positive populations; sigma too large?")


def build_artificial(spec: ArtificialSpec, max_rounds: int = 100) -> Dataset:
    """Draw a full synthetic corpus (vectorized rejection sampling)."""
    rng = np.random.default_rng(spec.seed)
    blocks_f, blocks_u = [], []
    remaining = spec.n
    for _ in range(max_rounds):
        if remaining == 0:
            break
        f_str, u = _draw_block(spec, rng, remaining)
        ok = np.all(f_str > 0, axis=1)
        blocks_f.append(f_str[ok])
        blocks_u.append(u[ok])
        remaining -= int(ok.sum())
    if remaining:
        raise InvalidInputError("rejection sampling failed to converge; sigma too large?")
    f_str = np.concatenate(blocks_f)[: spec.n]
    u = np.concatenate(blocks_u)[: spec.n]
    f_lin = bgk_collide(f_str.T, spec.tau, EqOrder.LINEAR).T
    f_ref = bgk_collide(f_str.T, spec.tau, EqOrder.QUADRATIC).T
    # rho records the generation density (fixed at 1); the noise rides on top
    return Dataset(f_str, f_lin, f_ref, np.ones(spec.n), u, spec.tau,
                   SOURCE_ARTIFICIAL)


def harvest(trajectory: Trajectory, tau: float | None = None) -> Dataset:
    """Turn every recorded pre-collision site state into a sample.

    Uses the collide-input snapshots (the initial field plus each post-stream
    state except the last), so a T-step trajectory over an nx-by-ny lattice
    yields exactly nx*ny*T samples.
    """
    if trajectory.fields is None:
        raise InvalidInputError("harvest needs a trajectory recorded with fields")
    if trajectory.config.order is not EqOrder.QUADRATIC:
        raise InvalidInputError("harvest expects a quadratic-order reference trajectory")
    tau = trajectory.config.tau if tau is None else tau
    frames = trajectory.fields[:-1]  # inputs of the performed collisions
    f_str = frames.transpose(0, 2, 3, 1).reshape(-1, 9)
    f_str = f_str[f_str.sum(axis=1) > 0]  # solid sites of masked runs are empty
    f_lin = bgk_collide(f_str.T, tau, EqOrder.LINEAR).T
    f_ref = bgk_collide(f_str.T, tau, EqOrder.QUADRATIC).T
    rho = f_str.sum(axis=1)
    j = f_str @ lattice.C.astype(np.float64)
    return Dataset(f_str, f_lin, f_ref, rho, j / rho[:, None], tau, SOURCE_HARVESTED)


def shuffle_batches(n: int, batch_size: int, seed) -> list[np.ndarray]:
    """Deterministic shuffled batches; the final partial batch is retained."""
    if batch_size < 1:
        raise InvalidInputError("batch size must be at least 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def stratify_by_speed(ds: Dataset, n_bins: int = 8, seed: int = 0,
                      per_bin: int | None = None) -> Dataset:
    """Resample so each log-spaced speed bin holds the same sample count.

    Off by default everywhere; offered for sweeps that want velocity
    magnitudes equally represented across orders of magnitude.
    """
    speed = np.sqrt((ds.u ** 2).sum(axis=1))
    lo = max(speed[speed > 0].min(), 1e-12)
    edges = np.geomspace(lo, speed.max() * (1 + 1e-12), n_bins + 1)
    which = np.clip(np.digitize(speed, edges) - 1, 0, n_bins - 1)
    rng = np.random.default_rng(seed)
    groups = [np.where(which == b)[0] for b in range(n_bins)]
    groups = [g for g in groups if len(g)]
    size = per_bin or min(len(g) for g in groups)
    idx = np.concatenate([rng.choice(g, size, replace=len(g) < size) for g in groups])
    return ds.subset(np.sort(idx))


# ---------------------------------------------------------------------------
# dataset statistics
# ---------------------------------------------------------------------------

@dataclass
class DatasetReport:
    """Non-equilibrium histograms and a velocity scatter summary."""

    neq_edges: np.ndarray        # (n_bins+1,)
    neq_hist: np.ndarray         # (9, n_bins)
    neq_std: np.ndarray          # (9,)
    u_quantiles: dict            # quantile -> |u| value
    u_cov: np.ndarray            # (2, 2) velocity covariance
    n: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "key"] + [f"v{i}" for i in range(9)])
            centers = 0.5 * (self.neq_edges[:-1] + self.neq_edges[1:])
            for b, c in enumerate(centers):
                writer.writerow(["neq_hist", repr(float(c))]
                                + [int(self.neq_hist[i, b]) for i in range(9)])
            writer.writerow(["neq_std", ""] + [repr(float(s)) for s in self.neq_std])
            for q, v in self.u_quantiles.items():
                writer.writerow(["u_quantile", q, repr(float(v))])
            writer.writerow(["u_cov", "", repr(float(self.u_cov[0, 0])),
                             repr(float(self.u_cov[0, 1])), repr(float(self.u_cov[1, 1]))])


def stats(ds: Dataset, n_bins: int = 61) -> DatasetReport:
    """Per-channel non-equilibrium distribution and velocity summary."""
    if len(ds) == 0:
        raise InvalidInputError("empty dataset")
    feq = equilibrium(ds.rho, ds.u.T, EqOrder.QUADRATIC).T
    neq = ds.f_str - feq
    spread = max(float(np.abs(neq).max()), 1e-30)
    edges = np.linspace(-spread, spread, n_bins + 1)
    hist = np.stack([np.histogram(neq[:, i], bins=edges)[0] for i in range(9)])
    speed = np.sqrt((ds.u ** 2).sum(axis=1))
    qs = {f"q{int(100*q)}": float(np.quantile(speed, q))
          for q in (0.0, 0.25, 0.5, 0.75, 1.0)}
    cov = np.cov(ds.u.T) if len(ds) > 1 else np.zeros((2, 2))
    return DatasetReport(neq_edges=edges, neq_hist=hist, neq_std=neq.std(axis=0),
                         u_quantiles=qs, u_cov=np.atleast_2d(cov), n=len(ds))
