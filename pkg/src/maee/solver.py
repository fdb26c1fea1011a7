"""Small interior-point solver for smooth convex programs.

Maximizes a linear objective subject to smooth convex inequality
constraints (``c_i(z) <= 0``) and box bounds, via a logarithmic barrier
with damped Newton steps and a backtracking line search.  A phase-1 pass
(minimizing the worst constraint value) produces a strictly feasible
start when the caller's start is not.  The two alternating subproblems of
the multi-user optimizer are exactly this problem class: linear and
exponential terms, log terms, and convex quadratics over a box.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BadStart

_STAGE_SHRINK = 10.0      # barrier weight decrease factor per stage
_INNER_TOL = 1e-11        # Newton decrement^2 / 2 threshold per stage
_STAGE_ITER_CAP = 80      # Newton iterations per barrier stage
_RIDGE0 = 1e-12


@dataclass(frozen=True)
class Constraint:
    """One smooth convex scalar constraint ``value(z) <= 0``.

    Affine constraints built via :func:`linear_constraint` carry their
    coefficients so the solver can evaluate them in one batched pass.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    coeffs: np.ndarray | None = None
    offset: float = 0.0


@dataclass(frozen=True)
class ConstraintBlock:
    """Family of smooth convex constraints with vectorized evaluators.

    ``values(z) -> (size,)``, ``jacobian(z) -> (size, n)``, and
    ``hess_diag(z) -> (size, n)`` holding each member's Hessian diagonal
    (every block this solver hosts has diagonal member Hessians).
    """

    size: int
    values: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    hess_diag: Callable[[np.ndarray], np.ndarray]
    name: str = ""


@dataclass(frozen=True)
class SmoothProgram:
    """Maximize ``objective_gradient @ z`` over constraints and a box."""

    num_vars: int
    objective_gradient: np.ndarray
    constraints: tuple[Constraint, ...]
    lower: np.ndarray
    upper: np.ndarray
    scales: np.ndarray | None = None   # per-variable magnitudes, for conditioning
    blocks: tuple[ConstraintBlock, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objective_gradient",
                           np.asarray(self.objective_gradient, dtype=np.float64))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.scales is not None:
            object.__setattr__(self, "scales", np.asarray(self.scales, dtype=np.float64))
        for arr in (self.objective_gradient, lower, upper):
            if arr.shape != (self.num_vars,):
                raise ValueError("vector length must equal num_vars")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def num_inequalities(self) -> int:
        return len(self.constraints) + sum(b.size for b in self.blocks)


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass
class SolveReport:
    point: np.ndarray
    objective: float
    kkt_residual: float
    feasibility_violation: float
    iterations: int
    status: SolveStatus
    stage_objectives: list = field(default_factory=list)


def _all_values(prog: SmoothProgram, z: np.ndarray) -> np.ndarray:
    parts = []
    if prog.constraints:
        parts.append(np.array([c.value(z) for c in prog.constraints]))
    parts.extend(b.values(z) for b in prog.blocks)
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def _finite_diff_hess(grad, z, n):
    h = 1e-6
    cols = []
    for j in range(n):
        step = h * max(1.0, abs(z[j]))
        zp = z.copy(); zp[j] += step
        zm = z.copy(); zm[j] -= step
        cols.append((np.asarray(grad(zp)) - np.asarray(grad(zm))) / (2.0 * step))
    hmat = np.column_stack(cols)
    return 0.5 * (hmat + hmat.T)


class _Barrier:
    """Barrier-function machinery for one program instance."""

    def __init__(self, prog: SmoothProgram):
        self.prog = prog
        self.n = prog.num_vars
        self.neg_obj = -prog.objective_gradient
        self.lo_idx = np.flatnonzero(np.isfinite(prog.lower))
        self.hi_idx = np.flatnonzero(np.isfinite(prog.upper))
        self.num_terms = prog.num_inequalities + self.lo_idx.size + self.hi_idx.size
        s = prog.scales if prog.scales is not None else np.ones(self.n)
        self.scale = np.where(s > 0, s, 1.0)
        # affine constraints evaluate in one matrix pass
        self.general = [c for c in prog.constraints if c.coeffs is None]
        linear = [c for c in prog.constraints if c.coeffs is not None]
        self.lin_a = np.array([c.coeffs for c in linear]).reshape(len(linear), self.n)
        self.lin_b = np.array([c.offset for c in linear])
        self.blocks = prog.blocks

    def cons_values(self, z):
        parts = [self.lin_a @ z + self.lin_b]
        parts.extend(b.values(z) for b in self.blocks)
        if self.general:
            parts.append(np.array([c.value(z) for c in self.general]))
        return np.concatenate(parts) if len(parts) > 1 else parts[0]

    def in_domain(self, z):
        p = self.prog
        if np.any(z[self.lo_idx] <= p.lower[self.lo_idx]):
            return False
        if np.any(z[self.hi_idx] >= p.upper[self.hi_idx]):
            return False
        vals = self.cons_values(z)
        return bool(np.all(np.isfinite(vals)) and np.all(vals < 0.0))

    def value(self, z, w):
        """Barrier value; +inf outside the strict domain (box checked first)."""
        p = self.prog
        slack_lo = z[self.lo_idx] - p.lower[self.lo_idx]
        slack_hi = p.upper[self.hi_idx] - z[self.hi_idx]
        if np.any(slack_lo <= 0.0) or np.any(slack_hi <= 0.0):
            return np.inf
        vals = self.cons_values(z)
        if np.any(vals >= 0.0) or not np.all(np.isfinite(vals)):
            return np.inf
        total = float(self.neg_obj @ z) - w * float(np.sum(np.log(-vals)))
        total -= w * (float(np.sum(np.log(slack_lo))) + float(np.sum(np.log(slack_hi))))
        return total

    def step_to_boundary(self, z, dz):
        """Largest step keeping affine constraints and the box strictly slack.

        Nonlinear constraints are handled by the backtracking loop; cutting
        the affine crossings up front removes most of its halvings.
        """
        t = np.inf
        if self.lin_a.size:
            rate = self.lin_a @ dz
            slack = -(self.lin_a @ z + self.lin_b)
            pos = rate > 0.0
            if np.any(pos):
                t = min(t, float(np.min(slack[pos] / rate[pos])))
        p = self.prog
        lo, hi = self.lo_idx, self.hi_idx
        neg = dz[lo] < 0.0
        if np.any(neg):
            t = min(t, float(np.min((z[lo][neg] - p.lower[lo][neg]) / -dz[lo][neg])))
        pos = dz[hi] > 0.0
        if np.any(pos):
            t = min(t, float(np.min((p.upper[hi][pos] - z[hi][pos]) / dz[hi][pos])))
        return 0.995 * t

    def grad_hess(self, z, w):
        p = self.prog
        g = self.neg_obj.copy()
        h = np.zeros((self.n, self.n))
        if self.lin_a.size:
            inv = 1.0 / -(self.lin_a @ z + self.lin_b)
            g += w * (self.lin_a.T @ inv)
            h += w * (self.lin_a.T * inv**2) @ self.lin_a
        for blk in self.blocks:
            inv = 1.0 / -blk.values(z)
            jac = blk.jacobian(z)
            g += w * (jac.T @ inv)
            h += w * (jac.T * inv**2) @ jac
            h[np.diag_indices(self.n)] += w * (blk.hess_diag(z).T @ inv)
        for c in self.general:
            cv = c.value(z)
            cg = np.asarray(c.grad(z), dtype=np.float64)
            ch = c.hess(z) if c.hess is not None else _finite_diff_hess(c.grad, z, self.n)
            inv = 1.0 / (-cv)
            g += w * inv * cg
            h += w * (inv * inv) * np.outer(cg, cg) + w * inv * np.asarray(ch)
        slack_lo = z[self.lo_idx] - p.lower[self.lo_idx]
        slack_hi = p.upper[self.hi_idx] - z[self.hi_idx]
        g[self.lo_idx] -= w / slack_lo
        g[self.hi_idx] += w / slack_hi
        diag = np.zeros(self.n)
        np.add.at(diag, self.lo_idx, w / slack_lo ** 2)
        np.add.at(diag, self.hi_idx, w / slack_hi ** 2)
        h[np.diag_indices(self.n)] += diag
        return g, h

    def newton_stage(self, z, w, iter_budget, early_exit=None):
        """Minimize the barrier function at weight w; returns (z, iterations)."""
        used = 0
        for _ in range(min(_STAGE_ITER_CAP, iter_budget)):
            if early_exit is not None and early_exit(z):
                break
            g, h = self.grad_hess(z, w)
            gs = self.scale * g
            hs = self.scale[:, None] * h * self.scale[None, :]
            ridge = _RIDGE0
            while True:
                try:
                    chol = np.linalg.cholesky(hs + ridge * np.eye(self.n))
                    break
                except np.linalg.LinAlgError:
                    ridge = max(ridge * 100.0, 1e-10)
                    if ridge > 1e8:
                        return z, used
            dy = -np.linalg.solve(chol.T, np.linalg.solve(chol, gs))
            dz = self.scale * dy
            used += 1
            decrement2 = float(-gs @ dy)
            if decrement2 / 2.0 <= _INNER_TOL:
                break
            fz = self.value(z, w)
            t = min(1.0, self.step_to_boundary(z, dz))
            accepted = False
            while t >= 1e-14:
                cand = z + t * dz
                if self.value(cand, w) <= fz - 0.25 * t * decrement2:
                    z = cand
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
        return z, used

    def minimize(self, z, kkt_tol, iter_budget, early_exit=None):
        """Run barrier stages until the gap proxy drops below kkt_tol/2."""
        w = 1.0
        used = 0
        stage_objs = []
        while True:
            z, it = self.newton_stage(z, w, iter_budget - used,
                                      early_exit=early_exit)
            used += it
            stage_objs.append(float(self.prog.objective_gradient @ z))
            if early_exit is not None and early_exit(z):
                return z, used, w, stage_objs
            if self.num_terms * w <= 0.5 * kkt_tol:
                return z, used, w, stage_objs
            if used >= iter_budget:
                return z, used, w, stage_objs
            w /= _STAGE_SHRINK


def _interior_clip(z, lower, upper):
    z = z.copy()
    for j in range(z.size):
        lo, hi = lower[j], upper[j]
        if np.isfinite(lo) and np.isfinite(hi):
            margin = 1e-9 * max(hi - lo, 1.0)
            z[j] = min(max(z[j], lo + margin), hi - margin)
        elif np.isfinite(lo):
            z[j] = max(z[j], lo + 1e-9 * max(1.0, abs(lo)))
        elif np.isfinite(hi):
            z[j] = min(z[j], hi - 1e-9 * max(1.0, abs(hi)))
    return z


def _phase1(prog: SmoothProgram, z0: np.ndarray, feas_tol: float,
            iter_budget: int):
    """Drive the worst constraint value negative; returns (z, iters, ok)."""
    n = prog.num_vars
    vals = _all_values(prog, z0)
    s0 = float(np.max(vals)) + 1.0

    def wrap(c: Constraint) -> Constraint:
        if c.coeffs is not None:
            return linear_constraint(np.append(c.coeffs, -1.0), c.offset,
                                     name=f"phase1:{c.name}")

        def value(zs):
            return c.value(zs[:n]) - zs[n]

        def grad(zs):
            g = np.zeros(n + 1)
            g[:n] = c.grad(zs[:n])
            g[n] = -1.0
            return g

        def hess(zs):
            h = np.zeros((n + 1, n + 1))
            h[:n, :n] = c.hess(zs[:n]) if c.hess is not None \
                else _finite_diff_hess(c.grad, zs[:n], n)
            return h

        return Constraint(value, grad, hess, name=f"phase1:{c.name}")

    def wrap_block(b: ConstraintBlock) -> ConstraintBlock:
        def values(zs):
            return b.values(zs[:n]) - zs[n]

        def jacobian(zs):
            jac = np.zeros((b.size, n + 1))
            jac[:, :n] = b.jacobian(zs[:n])
            jac[:, n] = -1.0
            return jac

        def hess_diag(zs):
            hd = np.zeros((b.size, n + 1))
            hd[:, :n] = b.hess_diag(zs[:n])
            return hd

        return ConstraintBlock(b.size, values, jacobian, hess_diag,
                               name=f"phase1:{b.name}")

    scales = prog.scales if prog.scales is not None else np.ones(n)
    # clamp the search box around the start so coordinates the constraints
    # barely touch cannot drag the barrier minimization off to infinity
    lower = np.maximum(prog.lower, z0 - 1e3 * scales)
    upper = np.minimum(prog.upper, z0 + 1e3 * scales)
    aux = SmoothProgram(
        num_vars=n + 1,
        objective_gradient=np.append(np.zeros(n), -1.0),
        constraints=tuple(wrap(c) for c in prog.constraints),
        lower=np.append(lower, -np.inf),
        upper=np.append(upper, s0 + 1.0),
        scales=np.append(scales, max(1.0, abs(s0))),
        blocks=tuple(wrap_block(b) for b in prog.blocks),
    )
    barrier = _Barrier(aux)
    zs = np.append(z0, s0)

    def strictly_feasible(zs):
        return float(np.max(_all_values(prog, zs[:n]))) < -1e-6

    zs, used, _, _ = barrier.minimize(zs, kkt_tol=1e-9, iter_budget=iter_budget,
                                      early_exit=strictly_feasible)
    z = zs[:n]
    viol = float(np.max(_all_values(prog, z)))
    return z, used, viol < 0.0 or viol <= feas_tol


def solve(prog: SmoothProgram, start: Sequence[float], feas_tol: float = 1e-8,
          kkt_tol: float = 1e-7, max_iter: int = 500) -> SolveReport:
    """Maximize the program objective from the given start point.

    The returned objective never falls below a feasible start's objective;
    ``kkt_residual`` reports the duality-gap proxy (constraint count times
    final barrier weight) plus the last Newton decrement.
    """
    z0 = np.asarray(start, dtype=np.float64).copy()
    if z0.shape != (prog.num_vars,):
        raise BadStart("start vector has wrong length")
    tol_box = 1e-12
    if np.any(z0 < prog.lower - tol_box) or np.any(z0 > prog.upper + tol_box):
        raise BadStart("start point violates the variable box")
    z0 = _interior_clip(z0, prog.lower, prog.upper)

    start_vals = _all_values(prog, z0)
    start_viol = float(max(0.0, start_vals.max())) if start_vals.size else 0.0
    start_feasible = start_viol <= feas_tol
    iters = 0

    z = z0
    if start_vals.size and start_vals.max() >= 0.0:
        z, used, ok = _phase1(prog, z0, feas_tol, max_iter)
        iters += used
        viol = float(np.max(_all_values(prog, z)))
        if not ok:
            return SolveReport(point=z, objective=float(prog.objective_gradient @ z),
                               kkt_residual=np.inf,
                               feasibility_violation=max(0.0, viol),
                               iterations=iters, status=SolveStatus.INFEASIBLE)
        if viol >= 0.0:
            # feasible only to tolerance: no strict interior to run the barrier in
            return SolveReport(point=z, objective=float(prog.objective_gradient @ z),
                               kkt_residual=np.inf,
                               feasibility_violation=max(0.0, viol),
                               iterations=iters, status=SolveStatus.MAX_ITER)

    barrier = _Barrier(prog)
    z, used, w_final, stage_objs = barrier.minimize(z, kkt_tol, max_iter - iters)
    iters += used

    objective = float(prog.objective_gradient @ z)
    point = z
    if start_feasible and float(prog.objective_gradient @ z0) > objective:
        point = z0
        objective = float(prog.objective_gradient @ z0)
    cons = _all_values(prog, point)
    violation = float(max(0.0, cons.max())) if cons.size else 0.0
    box_violation = float(max(0.0, np.max(np.append(prog.lower - point,
                                                    point - prog.upper))))
    violation = max(violation, box_violation)
    gap_proxy = barrier.num_terms * w_final
    status = SolveStatus.OPTIMAL if (gap_proxy <= kkt_tol and violation <= feas_tol
                                     and iters < max_iter) else SolveStatus.MAX_ITER
    return SolveReport(point=point, objective=objective,
                       kkt_residual=float(gap_proxy),
                       feasibility_violation=violation, iterations=iters,
                       status=status, stage_objectives=stage_objs)


def check_gradients(prog: SmoothProgram, point: Sequence[float],
                    h: float = 1e-6) -> float:
    """Max mismatch between analytic and central-difference constraint gradients.

    Returns ``max_i ||fd_i - grad_i||_inf / max(1, ||grad_i||_inf)``.
    """
    z = np.asarray(point, dtype=np.float64)
    worst = 0.0
    for c in prog.constraints:
        g = np.asarray(c.grad(z), dtype=np.float64)
        fd = np.empty_like(g)
        for j in range(z.size):
            zp = z.copy(); zp[j] += h
            zm = z.copy(); zm[j] -= h
            fd[j] = (c.value(zp) - c.value(zm)) / (2.0 * h)
        denom = max(1.0, float(np.max(np.abs(g))))
        worst = max(worst, float(np.max(np.abs(fd - g))) / denom)
    for b in prog.blocks:
        jac = np.asarray(b.jacobian(z), dtype=np.float64)
        fd = np.empty_like(jac)
        for j in range(z.size):
            zp = z.copy(); zp[j] += h
            zm = z.copy(); zm[j] -= h
            fd[:, j] = (b.values(zp) - b.values(zm)) / (2.0 * h)
        denom = np.maximum(1.0, np.max(np.abs(jac), axis=1))
        worst = max(worst, float(np.max(np.max(np.abs(fd - jac), axis=1) / denom)))
    return worst


def linear_constraint(coeffs: np.ndarray, offset: float, name: str = "") -> Constraint:
    """Constraint ``coeffs @ z + offset <= 0`` with exact derivatives."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    zero = np.zeros((coeffs.size, coeffs.size))

    return Constraint(
        value=lambda z: float(coeffs @ z) + offset,
        grad=lambda z: coeffs,
        hess=lambda z: zero,
        name=name,
        coeffs=coeffs,
        offset=float(offset),
    )
