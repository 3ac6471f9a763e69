"""Operator-level diagnostics, sweep experiments and diffusive-scaling math.

The collision step is linear in the populations once the velocity entering
the quadratic equilibrium terms is frozen: each (c_i . u)^2 rho term is a
bilinear form in (momentum, velocity), and fixing one velocity factor at a
probe value u0 leaves a 9x9 matrix whose action reproduces the exact
nonlinear collision on any state whose own velocity equals u0.  The map from
the post-linear-collision populations to the full quadratic result is then
I + B(u0) A^{-1}, and because B reads only collision-invariant moments
(density and momentum) it satisfies B A^{-1} = B identically, which keeps
the construction well defined even at tau = 1 where A itself is singular.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .lattice import C, CS2, EqOrder, W, bgk_collide


# ---------------------------------------------------------------------------
# frozen collision maps and non-unitarity
# ---------------------------------------------------------------------------

MAP_KINDS = ("linear", "quadratic", "effective", "effective_omega")


@dataclass(frozen=True)
class FrozenCollisionMap:
    matrix: np.ndarray   # (9, 9)
    u_frozen: np.ndarray
    tau: float
    kind: str


def linear_collision_matrix(tau: float) -> np.ndarray:
    """The exact matrix of the linear-order collision (probed column-wise)."""
    return bgk_collide(np.eye(9), tau, EqOrder.LINEAR)


def frozen_quadratic_correction(u, tau: float) -> np.ndarray:
    """B(u): the quadratic-term correction with one velocity factor frozen.

    B[i, j] = (1/tau) w_i [ (c_i . c_j)(c_i . u) / (2 cs^4) - (c_j . u) / (2 cs^2) ],
    i.e. the difference between the quadratic and linear equilibria with
    rho(f) and the momentum j(f) kept as linear functionals of f and the
    remaining velocity factor evaluated at u.
    """
    u = np.asarray(u, dtype=np.float64)
    ciu = C.astype(np.float64) @ u
    cicj = C.astype(np.float64) @ C.astype(np.float64).T
    cju = C.astype(np.float64) @ u
    return (W[:, None] / tau) * (cicj * ciu[:, None] / (2.0 * CS2 ** 2)
                                 - cju[None, :] / (2.0 * CS2))


def build_frozen_map(u, tau: float, kind: str) -> FrozenCollisionMap:
    """Construct one of the frozen collision maps.

    'linear':     populations -> linear collision image (exactly linear).
    'quadratic':  frozen-velocity full collision, A + B(u).
    'effective':  post-linear -> post-quadratic map I + B(u) A^{-1} = I + B(u).
    'effective_omega': the same operator written through omega = 1/tau as
                  I + omega B_eq (I + omega(A_eq - I))^{-1}; the two forms
                  coincide because B annihilates the non-conserved moments A
                  acts on, so both are exposed and kept equal by construction.
    """
    u = np.asarray(u, dtype=np.float64)
    if not tau > 0.5:
        raise ValueError("tau must exceed 0.5")
    if np.linalg.norm(u) >= np.sqrt(CS2):
        raise ValueError("probe velocity must be subsonic")
    if kind == "linear":
        m = linear_collision_matrix(tau)
    elif kind == "quadratic":
        m = linear_collision_matrix(tau) + frozen_quadratic_correction(u, tau)
    elif kind in ("effective", "effective_omega"):
        m = np.eye(9) + frozen_quadratic_correction(u, tau)
    else:
        raise ValueError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")
    if not np.all(np.isfinite(m)):
        raise FloatingPointError("frozen map construction produced non-finite entries")
    return FrozenCollisionMap(matrix=m, u_frozen=u, tau=tau, kind=kind)


@dataclass(frozen=True)
class NonUnitarity:
    metric: float        # sum over singular values of (1 - sigma)^2
    sigma_max: float
    sigmas: np.ndarray


def nonunitarity(fmap: FrozenCollisionMap | np.ndarray) -> NonUnitarity:
    """Distance of the map from the unitary manifold via its singular values."""
    m = fmap.matrix if isinstance(fmap, FrozenCollisionMap) else np.asarray(fmap)
    sigmas = np.linalg.svd(m, compute_uv=False)
    return NonUnitarity(metric=float(((1.0 - sigmas) ** 2).sum()),
                        sigma_max=float(sigmas.max()), sigmas=sigmas)


# ---------------------------------------------------------------------------
# sweep orchestration
# ---------------------------------------------------------------------------

def _write_rows(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no sweep rows to write")
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row[c] if isinstance(row[c], str) else repr(float(row[c]))
                             for c in cols])


def velocity_sweep(run_point, u_values, target: str = "ref",
                   csv_path=None) -> list[dict]:
    """Train/evaluate one model per velocity and tabulate MSEs and their ratio.

    ``run_point(u, target)`` returns a dict with at least ``pred_mse`` (model
    vs target populations) and ``base_mse`` (input vs target populations);
    optional extra keys (training MSE extrema, velocity errors) pass through.
    eta is the ratio of the summed squared errors and is left out at u = 0
    where the baseline error vanishes.
    """
    rows = []
    for u in u_values:
        point = dict(run_point(float(u), target))
        point["u"] = float(u)
        base = point.get("base_mse", 0.0)
        point["eta"] = point["pred_mse"] / base if base > 0 else np.nan
        rows.append(point)
    rows = [{k: row[k] for k in sorted(row, key=lambda c: (c != "u", c))}
            for row in rows]
    if csv_path:
        _write_rows(csv_path, rows)
    return rows


def tau_sweep(run_point, taus, u: float = 0.05, csv_path=None) -> list[dict]:
    """Per-tau model quality plus the non-unitarity of the effective operator."""
    rows = []
    for tau in taus:
        point = dict(run_point(float(tau)))
        point["tau"] = float(tau)
        point["viscosity"] = CS2 * (tau - 0.5)
        point["omega_nonunitarity"] = nonunitarity(
            build_frozen_map([u, 0.0], tau, "effective_omega")).metric
        rows.append(point)
    rows = [{k: row[k] for k in sorted(row, key=lambda c: (c != "tau", c))}
            for row in rows]
    if csv_path:
        _write_rows(csv_path, rows)
    return rows


def lambda_u_sweep(run_point, lambdas, csv_path=None) -> list[dict]:
    """Sweep the macroscopic-penalty weight; rows report the accuracy trade-off."""
    rows = []
    for lam in lambdas:
        point = dict(run_point(float(lam)))
        point["lambda_u"] = float(lam)
        rows.append(point)
    rows = [{k: row[k] for k in sorted(row, key=lambda c: (c != "lambda_u", c))}
            for row in rows]
    if csv_path:
        _write_rows(csv_path, rows)
    return rows


@dataclass(frozen=True)
class ExpQuadraticFit:
    a: float
    b: float
    c: float
    r2: float

    def predict(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        return self.c * np.exp(self.a * u + self.b * u ** 2)


def fit_exp_quadratic(u, mse) -> ExpQuadraticFit:
    """Least squares of log(mse) = log c + a u + b u^2.

    R^2 is reported in log space (the space the fit minimizes).  Constant
    data has zero residual and zero variance; that degenerate ratio is
    defined as a perfect fit (R^2 = 1).
    """
    u = np.asarray(u, dtype=np.float64)
    mse = np.asarray(mse, dtype=np.float64)
    if u.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(mse <= 0):
        raise ValueError("mse values must be positive for the log fit")
    logm = np.log(mse)
    coeff = np.polyfit(u, logm, 2)  # [b, a, log c]
    pred = np.polyval(coeff, u)
    ss_res = float(((logm - pred) ** 2).sum())
    ss_tot = float(((logm - logm.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 and ss_res < 1e-24 else 1.0 - ss_res / ss_tot
    return ExpQuadraticFit(a=float(coeff[1]), b=float(coeff[0]),
                           c=float(np.exp(coeff[2])), r2=r2)


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of an ordinary least-squares line."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coeff = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeff, x)
    return 1.0 - float((resid ** 2).sum()) / float(((y - y.mean()) ** 2).sum())


# ---------------------------------------------------------------------------
# diffusive scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingReport:
    """Derived quantities of the diffusive refinement dx -> beta dx, dt -> beta^2 dt.

    Physical sound speed scales by 1/beta, the lattice velocity (and with it
    the Mach number) by beta, pressure by 1/beta^2; the site count grows by
    beta^-D and the step count by beta^-2 at constant viscosity.
    """

    beta: float
    n_base: float
    t_base: float
    dimensions: int
    cs_scale: float
    u_scale: float
    pressure_scale: float
    n_scaled: float
    t_scaled: float
    cost_classical_base: float
    cost_classical_scaled: float
    cost_quantum_base: float
    cost_quantum_scaled: float
    eta: float
    beta0: float
    beta1: float
    beta_crossover: float


def scaling_eta(n_base: float, beta: float, dimensions: int = 2) -> float:
    """Classical-base to quantum-scaled cost ratio N beta^2 / log^2(N / beta^D)."""
    return n_base * beta ** 2 / np.log(n_base / beta ** dimensions) ** 2


def scaling_beta0(n_base: float) -> float:
    return np.log(n_base) / np.sqrt(n_base)


def scaling_beta1(n_base: float) -> float:
    """Smallest refinement factor that keeps the quantum cost competitive.

    Second iterate of beta sqrt(N) = log(N) - 2 log(beta):
    beta1 = 2 (log N - log log N) / sqrt(N), natural logarithms.
    """
    if n_base <= np.e:
        raise ValueError("need n_base > e for the iterated logarithm")
    return 2.0 * (np.log(n_base) - np.log(np.log(n_base))) / np.sqrt(n_base)


def crossover_beta(n_base: float, dimensions: int = 2) -> float:
    """The beta at which the cost ratio eta crosses 1 (quantum advantage edge)."""
    lo, hi = 1e-9, 1.0
    if scaling_eta(n_base, hi, dimensions) < 1.0:
        return np.nan  # no advantage anywhere in (0, 1]
    return float(brentq(lambda b: scaling_eta(n_base, b, dimensions) - 1.0, lo, hi))


def crossover_sites(beta1_target: float) -> float:
    """Invert beta1(N): the base site count at which the given refinement
    factor still preserves the advantage."""
    if not 0 < beta1_target < 1:
        raise ValueError("target must lie in (0, 1)")
    return float(brentq(lambda n: scaling_beta1(n) - beta1_target, 10.0, 1e16))


def diffusive_scaling(beta: float, n_base: float, t_base: float,
                      dimensions: int = 2) -> ScalingReport:
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    if n_base <= np.e:
        raise ValueError("need more than e lattice sites")
    n_scaled = n_base / beta ** dimensions
    t_scaled = t_base / beta ** 2
    return ScalingReport(
        beta=beta,
        n_base=n_base,
        t_base=t_base,
        dimensions=dimensions,
        cs_scale=1.0 / beta,
        u_scale=beta,
        pressure_scale=1.0 / beta ** 2,
        n_scaled=n_scaled,
        t_scaled=t_scaled,
        cost_classical_base=t_base * n_base,
        cost_classical_scaled=t_base * n_base / beta ** (dimensions + 2),
        cost_quantum_base=np.log(n_base) ** 2 * t_base,
        cost_quantum_scaled=np.log(n_scaled) ** 2 * t_scaled,
        eta=scaling_eta(n_base, beta, dimensions),
        beta0=scaling_beta0(n_base),
        beta1=scaling_beta1(n_base),
        beta_crossover=crossover_beta(n_base, dimensions),
    )


def scaling_report_rows(report: ScalingReport) -> list[tuple[str, float]]:
    return [(k, getattr(report, k)) for k in (
        "beta", "n_base", "t_base", "dimensions", "cs_scale", "u_scale",
        "pressure_scale", "n_scaled", "t_scaled", "cost_classical_base",
        "cost_classical_scaled", "cost_quantum_base", "cost_quantum_scaled",
        "eta", "beta0", "beta1", "beta_crossover")]
