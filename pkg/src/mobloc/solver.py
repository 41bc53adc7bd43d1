"""Convex position estimation from annulus constraints.

The lifted problem

    minimize t  s.t.  ||v|| <= t,  Y = [[y, x^T], [x, I2]] PSD,
                      A_i . Y - v_i1 = r_i^2,  A_i . Y - v_i2 = R_i^2

is solved in its Schur-reduced form: with the identity block fixed, Y is PSD
exactly when y >= ||x||^2, and every v_ij is the affine function
y - 2 a_i.x + ||a_i||^2 - rho_ij^2 of (y, x). What remains is a least-norm
problem in (y, x) under one convex quadratic constraint, handled here by a
primal-dual interior-point method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .beaconing import AnnulusConstraint
from .geometry import Point2D

STATUSES = ("optimal", "max_iterations", "degenerate")

# scaled units (centered, lengths divided by the problem scale)
TIGHT_TOL = 1e-6
DEGENERATE_GAP = 1e-6


class NotLocalizable(ValueError):
    """Raised when a sensor has no constraints to solve."""


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


class RelaxedProblem:
    """Affine maps v(y, x) = B @ (y, x1, x2) - c, one row per radius.

    Each constraint contributes a row for its lower radius (0 if unset) and,
    when two-sided, a row for its upper radius.
    """

    def __init__(self, constraints: Sequence[AnnulusConstraint]):
        if not constraints:
            raise NotLocalizable("no constraints")
        self.constraints = list(constraints)
        centers, rho, owner = [], [], []
        for i, c in enumerate(self.constraints):
            radii = [c.lower] if c.upper is None else [c.lower, c.upper]
            for r in radii:
                centers.append((c.center.x, c.center.y))
                rho.append(r)
                owner.append(i)
        self.centers = np.array(centers, dtype=float)
        self.rho2 = np.array(rho, dtype=float) ** 2
        self.owner = np.array(owner)

    @property
    def B(self) -> np.ndarray:
        return np.column_stack([np.ones(len(self.centers)), -2.0 * self.centers])

    @property
    def c(self) -> np.ndarray:
        return self.rho2 - np.einsum("ij,ij->i", self.centers, self.centers)

    def v(self, y: float, x: Sequence[float]) -> np.ndarray:
        return self.B @ np.array([y, x[0], x[1]], dtype=float) - self.c

    @staticmethod
    def lifted_matrix(y: float, x: Sequence[float]) -> np.ndarray:
        return np.array([[y, x[0], x[1]], [x[0], 1.0, 0.0], [x[1], 0.0, 1.0]])

    def A(self, k: int) -> np.ndarray:
        """Rank-one matrix with A_k . Y = ||x - a_k||^2 when y = ||x||^2."""
        u = np.array([1.0, -self.centers[k, 0], -self.centers[k, 1]])
        return np.outer(u, u)


@dataclass(frozen=True)
class SolveResult:
    x_hat: Point2D
    y: float
    t: float
    status: str
    kkt_residual: float
    relaxation_tight: bool
    iterations: int = 0

    @property
    def gap(self) -> float:
        """Lifting slack y - ||x_hat||^2 (zero when the relaxation is tight)."""
        return self.y - (self.x_hat.x ** 2 + self.x_hat.y ** 2)


def _distances(x: Point2D, constraints):
    a = np.array([[c.center.x, c.center.y] for c in constraints], dtype=float)
    return np.hypot(x.x - a[:, 0], x.y - a[:, 1])


def objective_eq4(x: Point2D, constraints: Sequence[AnnulusConstraint]) -> float:
    """Sum over constraints of (d - r)^2 + (d - R)^2; lower-only constraints drop the second term."""
    if not constraints:
        raise ValueError("constraints must not be empty")
    d = _distances(x, constraints)
    total = 0.0
    for di, c in zip(d, constraints):
        total += (di - c.lower) ** 2
        if c.upper is not None:
            total += (di - c.upper) ** 2
    return float(total)


def objective_eq5(x: Point2D, constraints: Sequence[AnnulusConstraint]) -> float:
    """Root of the summed squared residuals in squared distance."""
    if not constraints:
        raise ValueError("constraints must not be empty")
    d2 = _distances(x, constraints) ** 2
    total = 0.0
    for di2, c in zip(d2, constraints):
        total += (di2 - c.lower ** 2) ** 2
        if c.upper is not None:
            total += (di2 - c.upper ** 2) ** 2
    return math.sqrt(total)


def relaxed_value(x: Point2D, y: float, constraints: Sequence[AnnulusConstraint]) -> float:
    """||v(y, x)|| for an explicit lifted point."""
    return float(np.linalg.norm(RelaxedProblem(constraints).v(y, (x.x, x.y))))


def _interior_point(B, c, tol, max_iter):
    """min 1/2 ||B z - c||^2  s.t.  ||z[1:]||^2 - z[0] <= 0, with B of full column rank.

    Returns (z, lam, kkt_residual, iterations, converged).
    """
    n = B.shape[1]
    H = B.T @ B
    b = B.T @ c
    bscale = 1.0 + np.abs(b).max()
    D = np.zeros((n, n))
    D[1:, 1:] = 2.0 * np.eye(n - 1)

    z = np.zeros(n)
    s, lam = 1.0, 1.0

    def pieces(z, s, lam):
        grad_g = np.concatenate(([-1.0], 2.0 * z[1:]))
        g = float(z[1:] @ z[1:] - z[0])
        r_d = H @ z - b + lam * grad_g
        return grad_g, g, r_d, g + s

    def residual(z, s, lam, target):
        _, _, r_d, r_p = pieces(z, s, lam)
        return math.sqrt(float(r_d @ r_d) + r_p * r_p + (s * lam - target) ** 2)

    def kkt(z, s, lam):
        _, _, r_d, r_p = pieces(z, s, lam)
        r = B @ z - c
        f = 0.5 * float(r @ r)
        return max(np.abs(r_d).max() / bscale, abs(r_p), s * lam / (f + 1.0)), f

    best = (math.inf, z.copy(), lam)
    sigma = 0.1
    for it in range(1, max_iter + 1):
        res, f = kkt(z, s, lam)
        if res < best[0]:
            best = (res, z.copy(), lam)
        # complementarity is held to the objective's own scale so t is accurate relatively
        if (res <= tol and s * lam <= tol * (f + tol)):
            return z, lam, res, it - 1, True
        grad_g, g, r_d, r_p = pieces(z, s, lam)
        mu = s * lam
        target = sigma * mu
        M = H + lam * D + (lam / s) * np.outer(grad_g, grad_g)
        rhs = -r_d - grad_g * (target - s * lam + lam * r_p) / s
        dz = np.linalg.solve(M, rhs)
        ds = -r_p - grad_g @ dz
        dlam = (target - s * lam + lam * r_p + lam * (grad_g @ dz)) / s
        step = 1.0
        if ds < 0:
            step = min(step, -0.995 * s / ds)
        if dlam < 0:
            step = min(step, -0.995 * lam / dlam)
        r0 = residual(z, s, lam, target)
        while step > 1e-12:
            zn, sn, ln = z + step * dz, s + step * ds, lam + step * dlam
            if residual(zn, sn, ln, target) <= (1.0 - 0.01 * step) * r0:
                break
            step *= 0.5
        z, s, lam = zn, sn, ln
        sigma = 0.01 if step > 0.9 else 0.1
    res, f = kkt(z, s, lam)
    if res < best[0]:
        best = (res, z.copy(), lam)
    return best[1], best[2], best[0], max_iter, False


def _polish(B, c, z, lam, tol):
    """Refine an interior-point iterate to a KKT point by active-set Newton.

    Returns (z, lam, kkt_residual) or None if refinement fails. Handles the
    case where the least-squares optimum sits exactly on y = ||x||^2 with a
    zero multiplier, where interior-point iterates converge only slowly.
    """
    n = B.shape[1]
    H = B.T @ B
    b = B.T @ c
    bscale = 1.0 + np.abs(b).max()
    D = np.zeros((n, n))
    D[1:, 1:] = 2.0 * np.eye(n - 1)

    def g_of(z):
        return float(z[1:] @ z[1:] - z[0])

    def kkt(z, lam):
        grad_g = np.concatenate(([-1.0], 2.0 * z[1:]))
        r_d = H @ z - b + lam * grad_g
        return max(np.abs(r_d).max() / bscale, max(g_of(z), 0.0), abs(lam * g_of(z)))

    z_ls = np.linalg.solve(H, b)
    if g_of(z_ls) <= 0.0:
        return z_ls, 0.0, kkt(z_ls, 0.0)
    z, lam = z.copy(), max(lam, 0.0)
    for _ in range(30):
        grad_g = np.concatenate(([-1.0], 2.0 * z[1:]))
        F = np.concatenate((H @ z - b + lam * grad_g, [g_of(z)]))
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = H + lam * D
        J[:n, n] = grad_g
        J[n, :n] = grad_g
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        z, lam = z + delta[:n], lam + delta[n]
        if np.abs(delta).max() <= 1e-15 * (1.0 + np.abs(z).max()):
            break
    if lam < -tol:
        return None
    lam = max(lam, 0.0)
    res = kkt(z, lam)
    return (z, lam, res) if res <= tol else None


def solve_relaxation(problem: RelaxedProblem, tol: float = 1e-8, max_iter: int = 200) -> SolveResult:
    centers, rho2 = problem.centers, problem.rho2
    # centre on the centroid of the constraint centres and rescale for conditioning
    uniq = np.array([[c.center.x, c.center.y] for c in problem.constraints])
    shift = uniq.mean(axis=0)
    ac = centers - shift
    scale = float(max(np.abs(ac).max(initial=0.0), math.sqrt(rho2.max(initial=0.0)), 1e-12))
    a = ac / scale
    r2 = rho2 / scale ** 2

    # directions of x the objective cannot see; the optimum with no component
    # there has the smallest norm, so solve in the visible subspace only
    _, sv, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv.max(initial=0.0)))) if sv.size else 0
    Q = vt[:rank].T  # 2 x rank
    B = np.column_stack([np.ones(len(a)), -2.0 * a @ Q])
    c = r2 - np.einsum("ij,ij->i", a, a)

    z, lam, kkt_res, iters, converged = _interior_point(B, c, tol, max_iter)
    if converged:
        polished = _polish(B, c, z, lam, tol)
        if polished is not None and polished[2] <= kkt_res:
            z, lam, kkt_res = polished
    xi = z[1:]
    x_c = Q @ xi if rank else np.zeros(2)
    gap = max(float(z[0] - xi @ xi), 0.0)
    t = float(np.linalg.norm(B @ z - c)) * scale ** 2

    x_hat = x_c * scale + shift
    y = float(x_hat @ x_hat + gap * scale ** 2)
    if not converged:
        status = "max_iterations"
    elif rank < 2 and gap > DEGENERATE_GAP:
        status = "degenerate"
    else:
        status = "optimal"
    return SolveResult(
        x_hat=Point2D(float(x_hat[0]), float(x_hat[1])),
        y=y,
        t=t,
        status=status,
        kkt_residual=float(kkt_res),
        relaxation_tight=gap <= TIGHT_TOL,
        iterations=iters,
    )


def estimate_position(
    constraints: Sequence[AnnulusConstraint], solver_config: SolverConfig | None = None
) -> SolveResult:
    cfg = solver_config or SolverConfig()
    if not constraints:
        raise NotLocalizable("sensor has no constraints")
    return solve_relaxation(RelaxedProblem(constraints), cfg.tol, cfg.max_iter)


def _grid_values(xs, ys, centers, rho2):
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.column_stack([X.ravel(), Y.ravel()])
    beta = -2.0 * P @ centers.T + np.einsum("ij,ij->i", centers, centers)[None, :] - rho2[None, :]
    y_ls = -beta.mean(axis=1)
    y = np.maximum(y_ls, np.einsum("ij,ij->i", P, P))
    vals = np.sqrt(((y[:, None] + beta) ** 2).sum(axis=1))
    return P, vals


def oracle_grid(
    constraints: Sequence[AnnulusConstraint],
    bbox: tuple[float, float, float, float],
    coarse_step: float = 1.0,
    refine_levels: int = 3,
    window: int = 2,
) -> tuple[Point2D, float]:
    """Brute-force minimum of the relaxed objective over x.

    For each grid point the best lifted y has a closed form (least squares,
    clamped up to ||x||^2). The search then zooms ``refine_levels`` times
    around the best point, each time with a step ten times finer.
    """
    x0, y0, x1, y1 = bbox
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate bounding box")
    prob = RelaxedProblem(constraints)
    centers, rho2 = prob.centers, prob.rho2
    step = coarse_step
    xs = np.arange(x0, x1 + 0.5 * step, step)
    ys = np.arange(y0, y1 + 0.5 * step, step)
    P, vals = _grid_values(xs, ys, centers, rho2)
    k = int(np.argmin(vals))
    best, best_val = P[k], float(vals[k])
    for _ in range(refine_levels):
        half = window * step
        step /= 10.0
        offs = np.arange(-half, half + 0.5 * step, step)
        P, vals = _grid_values(best[0] + offs, best[1] + offs, centers, rho2)
        k = int(np.argmin(vals))
        if vals[k] <= best_val:
            best, best_val = P[k], float(vals[k])
    return Point2D(float(best[0]), float(best[1])), best_val


def constraints_bbox(constraints: Sequence[AnnulusConstraint], pad: float | None = None):
    """Box around all centres, padded by the largest radius."""
    xs = [c.center.x for c in constraints]
    ys = [c.center.y for c in constraints]
    if pad is None:
        pad = max(max(c.lower, c.upper or 0.0) for c in constraints) or 1.0
    return min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad
