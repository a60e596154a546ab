"""Minimum-energy weight synthesis by single shooting on the costate.

The synthesis problem minimizes the integrated squared Frobenius norm of
W(t) subject to Xdot = W X, X(t0) = I, X(tf) = T, W sparse. Stationarity of
the Hamiltonian gives w_ij = -sum_k lam_ik X_jk on the edges, which closes
the state/costate system. Shooting then searches over the costate initial
condition lambda0 until the terminal transition matrix hits the target.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import WeightSchedule, determinant, solve_linear
from .graph import Graph, SparsityMask, mask
from .lie_algebra import check_feasible

DIVERGENCE_LIMIT = 1e12


class OptimalControlError(ValueError):
    """Infeasible problem or invalid solver input."""


def worker_count() -> int:
    """Parallelism cap: NETXFORM_THREADS if set, else machine parallelism."""
    env = os.environ.get("NETXFORM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BvpProblem:
    graph: Graph
    target: np.ndarray
    t0: float = 0.0
    tf: float = 1.0
    steps: int = 200
    newton_tol: float = 1e-8
    max_iter: int = 50
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        if not self.tf > self.t0:
            raise OptimalControlError(f"need tf > t0, got [{self.t0}, {self.tf}]")
        report = check_feasible(self.graph, self.target)
        if not report.feasible:
            raise OptimalControlError(f"infeasible problem: {report.reason}")


@dataclass
class ExtremalSolution:
    lambda0: np.ndarray
    grid: np.ndarray
    X_seq: np.ndarray
    lambda_seq: np.ndarray
    schedule: WeightSchedule
    cost: float
    residual_norm: float
    converged: bool
    iterations: int
    restart_used: int

    @property
    def final(self) -> np.ndarray:
        return self.X_seq[-1]

    def segments(self) -> list:
        return [self]

    def to_json_dict(self) -> dict:
        return {
            "converged": self.converged,
            "residual": self.residual_norm,
            "cost": self.cost,
            "iterations": self.iterations,
            "restart_used": self.restart_used,
            "lambda0": [[float(v) for v in row] for row in self.lambda0],
        }


@dataclass
class WaypointSolution:
    """Sequence of segment extremals whose composed transition hits the target."""

    segment_solutions: list
    composed_final: np.ndarray
    residual_norm: float
    cost: float
    converged: bool
    iterations: int

    def segments(self) -> list:
        return self.segment_solutions

    @property
    def lambda0(self) -> np.ndarray:
        return self.segment_solutions[0].lambda0

    @property
    def restart_used(self) -> int:
        return max(s.restart_used for s in self.segment_solutions)

    def to_json_dict(self) -> dict:
        d = {
            "converged": self.converged,
            "residual": self.residual_norm,
            "cost": self.cost,
            "iterations": self.iterations,
            "restart_used": self.restart_used,
            "lambda0": [[float(v) for v in row] for row in self.lambda0],
            "segments": [s.to_json_dict() for s in self.segment_solutions],
        }
        return d


def hamiltonian(X: np.ndarray, lam: np.ndarray, W: np.ndarray) -> float:
    """Control Hamiltonian: <lam, W X> plus half the squared weight norm."""
    return float(np.sum(lam * (W @ X)) + 0.5 * np.sum(W * W))


def weights_from_costate(lam: np.ndarray, X: np.ndarray, msk: SparsityMask) -> np.ndarray:
    """Stationarity condition: W = -(lam X^T) restricted to the edge pattern."""
    lam = np.asarray(lam, dtype=float)
    X = np.asarray(X, dtype=float)
    n = msk.n
    if lam.shape != (n, n) or X.shape != (n, n):
        raise OptimalControlError("weights_from_costate: dimension mismatch")
    return msk.apply(-(lam @ X.T))


def extremal_rhs(X: np.ndarray, lam: np.ndarray, msk: SparsityMask):
    """State and costate rates along an extremal: (W X, -W^T lam)."""
    W = weights_from_costate(lam, X, msk)
    return W @ X, -W.T @ lam


def _shoot_batch(prob: BvpProblem, lam0s: np.ndarray, record: bool = False):
    """RK4 over a batch of costate initial conditions at once.

    lam0s has shape (B, n, n). Returns (X_tf, diverged, trajectories) where
    trajectories is None unless record=True (then a pair of (B, K+1, n, n)
    arrays). Batching keeps the finite-difference Jacobian to a single
    integration pass.
    """
    B, n, _ = lam0s.shape
    off = ~mask(prob.graph).entries
    steps = prob.steps
    h = (prob.tf - prob.t0) / steps
    X = np.broadcast_to(np.eye(n), (B, n, n)).copy()
    lam = np.array(lam0s, dtype=float)
    alive = np.ones(B, dtype=bool)
    if record:
        X_seq = np.full((B, steps + 1, n, n), np.nan)
        lam_seq = np.full((B, steps + 1, n, n), np.nan)
        X_seq[:, 0], lam_seq[:, 0] = X, lam
    else:
        X_seq = lam_seq = None

    def rhs(X, lam):
        W = -(lam @ X.transpose(0, 2, 1))
        W[:, off] = 0.0
        return W @ X, -W.transpose(0, 2, 1) @ lam

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            k1x, k1l = rhs(X, lam)
            k2x, k2l = rhs(X + h / 2 * k1x, lam + h / 2 * k1l)
            k3x, k3l = rhs(X + h / 2 * k2x, lam + h / 2 * k2l)
            k4x, k4l = rhs(X + h * k3x, lam + h * k3l)
            Xn = X + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            ln = lam + h / 6 * (k1l + 2 * k2l + 2 * k3l + k4l)
            ok = (np.isfinite(Xn).all(axis=(1, 2)) & np.isfinite(ln).all(axis=(1, 2)))
            with np.errstate(invalid="ignore"):
                mag = np.maximum(np.abs(np.where(np.isfinite(Xn), Xn, np.inf)).max(axis=(1, 2)),
                                 np.abs(np.where(np.isfinite(ln), ln, np.inf)).max(axis=(1, 2)))
            ok &= mag <= DIVERGENCE_LIMIT
            upd = alive & ok
            X[upd] = Xn[upd]
            lam[upd] = ln[upd]
            alive &= ok
            if record:
                X_seq[upd, k + 1] = Xn[upd]
                lam_seq[upd, k + 1] = ln[upd]
            if not alive.any():
                break
    return X, ~alive, (X_seq, lam_seq)


def shoot(prob: BvpProblem, lambda0: np.ndarray):
    """Integrate the coupled extremal system from (I, lambda0).

    Returns (X_tf, info) where info carries the gridded trajectories and a
    `diverged` flag; divergence (any entry beyond the blow-up limit) is
    reported, not raised.
    """
    n = prob.graph.n
    lam0 = np.asarray(lambda0, dtype=float)
    if lam0.shape != (n, n):
        raise OptimalControlError(f"lambda0 has shape {lam0.shape}, expected ({n},{n})")
    X_tf, diverged, (X_seq, lam_seq) = _shoot_batch(prob, lam0[None], record=True)
    h = (prob.tf - prob.t0) / prob.steps
    grid = prob.t0 + h * np.arange(prob.steps + 1)
    info = {"grid": grid, "X_seq": X_seq[0], "lambda_seq": lam_seq[0],
            "diverged": bool(diverged[0])}
    return X_tf[0], info


def cost(sched: WeightSchedule) -> float:
    """Trapezoid quadrature of half the squared Frobenius norm of W(t)."""
    vals = 0.5 * np.sum(sched.W_seq * sched.W_seq, axis=(1, 2))
    h = np.diff(sched.grid)
    return float(np.sum(h * (vals[:-1] + vals[1:]) / 2.0))


def _residual(prob: BvpProblem, lam0: np.ndarray):
    X_tf, info = shoot(prob, lam0)
    if info["diverged"]:
        return None, info
    return (X_tf - prob.target).ravel(), info


def _jacobian(prob: BvpProblem, lam0: np.ndarray, workers: int) -> np.ndarray | None:
    """Central finite-difference Jacobian of the terminal residual w.r.t.
    the costate initial condition.

    All 2 m perturbed shoots are integrated as one batch; with more than one
    worker the batch is split into contiguous chunks evaluated concurrently.
    Either way each column comes from the same two shoots, so the result is
    bitwise independent of the worker count.
    """
    n = prob.graph.n
    flat = lam0.ravel()
    m = flat.size
    hs = 1e-6 * (1.0 + np.abs(flat))
    pert = np.repeat(flat[None, :], 2 * m, axis=0)
    pert[np.arange(m), np.arange(m)] += hs
    pert[m + np.arange(m), np.arange(m)] -= hs
    batch = pert.reshape(2 * m, n, n)
    if workers > 1:
        chunks = np.array_split(np.arange(2 * m), min(workers, 2 * m))
        X_tf = np.empty((2 * m, n, n))
        diverged = np.empty(2 * m, dtype=bool)

        def run(idx):
            Xc, dc, _ = _shoot_batch(prob, batch[idx])
            return idx, Xc, dc

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, Xc, dc in pool.map(run, chunks):
                X_tf[idx] = Xc
                diverged[idx] = dc
    else:
        X_tf, diverged, _ = _shoot_batch(prob, batch)
    if diverged.any():
        return None
    up = X_tf[:m].reshape(m, n * n)
    dn = X_tf[m:].reshape(m, n * n)
    return ((up - dn) / (2.0 * hs[:, None])).T


def _build_solution(prob: BvpProblem, lam0: np.ndarray, info: dict,
                    iterations: int, restart_used: int, converged: bool) -> ExtremalSolution:
    msk = mask(prob.graph)
    X_seq, lam_seq, grid = info["X_seq"], info["lambda_seq"], info["grid"]
    W_seq = np.array([weights_from_costate(lam_seq[k], X_seq[k], msk)
                      for k in range(grid.size)])
    sched = WeightSchedule(grid=grid, W_seq=W_seq, mask=msk)
    res = float(np.linalg.norm(X_seq[-1] - prob.target))
    return ExtremalSolution(
        lambda0=np.asarray(lam0, dtype=float).copy(),
        grid=grid, X_seq=X_seq, lambda_seq=lam_seq, schedule=sched,
        cost=cost(sched), residual_norm=res,
        converged=converged, iterations=iterations, restart_used=restart_used)


def _newton_from(prob: BvpProblem, lam0: np.ndarray, workers: int):
    """Damped Gauss-Newton (Levenberg-style) from one starting costate.

    Each accepted step is corrected with a geodesic acceleration term (a
    second directional derivative of the residual along the step); without
    it the iteration crawls through the curved, nearly flat valleys that
    strongly contracting targets produce.

    Returns (best_lam0, best_info, best_norm, iterations, converged).
    """
    n = prob.graph.n
    lam = np.asarray(lam0, dtype=float).copy()
    r, info = _residual(prob, lam)
    if r is None:
        return lam, info, np.inf, 0, False
    rnorm = float(np.linalg.norm(r))
    best = (lam.copy(), info, rnorm)
    mu = 1e-3
    iterations = 0
    for _ in range(prob.max_iter):
        if rnorm < prob.newton_tol:
            return best[0], best[1], best[2], iterations, True
        J = _jacobian(prob, lam, workers)
        if J is None:
            break
        g = J.T @ r
        JTJ = J.T @ J
        tr = max(float(np.trace(JTJ)) / g.size, 1e-30)
        accepted = False
        for _ in range(30):
            A = JTJ + mu * tr * np.eye(g.size)
            try:
                delta = solve_linear(A, -g)
            except Exception:
                mu *= 10.0
                continue
            h = 0.1
            rp, _ = _residual(prob, lam + h * delta.reshape(n, n))
            rm, _ = _residual(prob, lam - h * delta.reshape(n, n))
            step = delta
            if rp is not None and rm is not None:
                rpp = (rp - 2.0 * r + rm) / (h * h)
                try:
                    accel = solve_linear(A, -(J.T @ rpp) / 2.0)
                except Exception:
                    accel = None
                if accel is not None and np.linalg.norm(accel) <= 0.75 * np.linalg.norm(delta):
                    step = delta + 0.5 * accel
            cand = lam + step.reshape(n, n)
            rc, infoc = _residual(prob, cand)
            if rc is not None and np.linalg.norm(rc) < rnorm:
                lam, r, info = cand, rc, infoc
                rnorm = float(np.linalg.norm(rc))
                mu = max(mu / 3.0, 1e-14)
                accepted = True
                break
            mu *= 10.0
            if mu > 1e14:
                break
        iterations += 1
        if not accepted:
            break
        if rnorm < best[2]:
            best = (lam.copy(), info, rnorm)
    converged = best[2] < prob.newton_tol
    return best[0], best[1], best[2], iterations, converged


def solve_bvp(prob: BvpProblem, initial_guess: np.ndarray | None = None) -> ExtremalSolution:
    """Shooting solve of the two-point boundary problem.

    An optional warm-start costate is tried first, then the zero costate
    (exact for T = I); on stall the solver restarts from seeded random
    costates, each restart drawing its own RNG stream from seed + restart
    index. The first converged start wins, which is independent of worker
    parallelism.
    """
    n = prob.graph.n
    workers = worker_count()
    total_iters = 0
    starts = [(0, np.zeros((n, n)))]
    if initial_guess is not None:
        guess = np.asarray(initial_guess, dtype=float)
        if guess.shape != (n, n):
            raise OptimalControlError(f"initial_guess has shape {guess.shape}, expected ({n},{n})")
        starts.insert(0, (0, guess))
    for ridx in range(1, prob.restarts + 1):
        rng = np.random.default_rng(prob.seed + ridx)
        starts.append((ridx, rng.uniform(-0.5, 0.5, size=(n, n))))
    best = None  # (residual_norm, restart_idx, lam, info, iters)
    for ridx, lam0 in starts:
        lam, info, rnorm, iters, converged = _newton_from(prob, lam0, workers)
        total_iters += iters
        if converged:
            return _build_solution(prob, lam, info, total_iters, ridx, True)
        if info is not None and not info["diverged"]:
            if best is None or rnorm < best[0]:
                best = (rnorm, ridx, lam, info)
    if best is None:
        raise OptimalControlError("all shooting restarts diverged")
    return _build_solution(prob, best[2], best[3], total_iters, best[1], False)


def homotopy_singularity_scan(T: np.ndarray, samples: int = 201):
    """Minimum |det| of the straight-line homotopy (1-s) I + s T over [0, 1].

    Returns (min_abs_det, argmin_s); a small minimum signals that direct
    shooting will be ill-conditioned and waypoints are advisable.
    """
    if samples < 2:
        raise OptimalControlError("singularity scan needs samples >= 2")
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    eye = np.eye(n)
    best_val, best_s = np.inf, 0.0
    for s in np.linspace(0.0, 1.0, samples):
        d = abs(determinant((1.0 - s) * eye + s * T))
        if d < best_val:
            best_val, best_s = d, float(s)
    return float(best_val), best_s


def solve_with_waypoints(prob: BvpProblem, waypoints) -> ExtremalSolution | WaypointSolution:
    """Sequential shooting through intermediate target matrices.

    Segment k is reformulated from the identity with target B_k B_{k-1}^{-1}
    (B_0 = I, B_last = T); the composed transition telescopes to T and each
    segment starts well-conditioned near the identity. Waypoints split
    [t0, tf] into equal sub-intervals; the dynamics are autonomous, so each
    segment's converged costate is a natural warm start for the next one.
    """
    waypoints = [np.asarray(W, dtype=float) for W in waypoints]
    if not waypoints:
        return solve_bvp(prob)
    boundaries = waypoints + [prob.target]
    for k, B in enumerate(boundaries):
        rep = check_feasible(prob.graph, B)
        if not rep.feasible:
            raise OptimalControlError(f"waypoint {k + 1} infeasible: {rep.reason}")
    times = np.linspace(prob.t0, prob.tf, len(boundaries) + 1)
    prev = np.eye(prob.graph.n)
    seg_solutions = []
    composed = np.eye(prob.graph.n)
    warm = None
    for k, B in enumerate(boundaries):
        seg_target = solve_linear(prev.T, B.T).T  # B prev^{-1}
        seg_prob = BvpProblem(
            graph=prob.graph, target=seg_target,
            t0=float(times[k]), tf=float(times[k + 1]),
            steps=prob.steps, newton_tol=prob.newton_tol, max_iter=prob.max_iter,
            restarts=prob.restarts, seed=prob.seed + 1000 * k)
        sol = solve_bvp(seg_prob, initial_guess=warm)
        seg_solutions.append(sol)
        composed = sol.final @ composed
        prev = B
        warm = sol.lambda0 if sol.converged else None
    residual = float(np.linalg.norm(composed - prob.target))
    return WaypointSolution(
        segment_solutions=seg_solutions,
        composed_final=composed,
        residual_norm=residual,
        cost=float(sum(s.cost for s in seg_solutions)),
        converged=all(s.converged for s in seg_solutions),
        iterations=sum(s.iterations for s in seg_solutions))
