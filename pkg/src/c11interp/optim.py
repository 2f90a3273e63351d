"""Barrier-method solver for the minimal-seminorm extension of function data.

Given sites and values only, gradients are free variables: minimize M
subject to, for every ordered site pair (j, k),

    alpha+_{jk} = y_k . (a_k - a_j) - M |a_j - a_k|^2 + f_j - f_k <= 0
    alpha-_{jk} = y_k . (a_j - a_k) - M |a_j - a_k|^2 + f_k - f_j <= 0
    beta_{jk}   = |y_j - y_k|^2 - M^2 |a_j - a_k|^2            <= 0

The alpha pair bounds the one-sided pairwise difference quotient and beta
bounds the gradient difference quotient, so the optimum M~* of this QCQP is
the minimal value of the fast pairwise lower bound over all gradient
assignments; scaling by the comparability constant gives an admissible M.
The pair set is either all ordered pairs or a well-separated pair subset.

The solver is a standard log-barrier path-following scheme: damped Newton
with backtracking on the barrier objective t*M - sum log(-h_i), multiplying
t by mu each outer stage until m/t < epsilon.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import FunctionData, OneField, validate
from .gamma import TILDE_RATIO
from .wspd import approx_constant, build_wspd

BARRIER_T0 = 1.0
BARRIER_ALPHA = 0.25
BARRIER_BETA = 0.5
NEWTON_DECREMENT_TOL = 1e-10
STEP_UNDERFLOW = 1e-20


class FactorizationFailureError(np.linalg.LinAlgError):
    pass


class StepUnderflowError(RuntimeError):
    pass


class MaxIterationsError(RuntimeError):
    pass


@dataclass
class QcqpProblem:
    """Constraint data for one pair set over variables (Y flat, M)."""
    sites: np.ndarray       # (N, d)
    values: np.ndarray      # (N,)
    pairs: np.ndarray       # (P, 2) ordered (j, k), j != k
    diff: np.ndarray = dc_field(init=False)     # (P, d) a_j - a_k
    dist2: np.ndarray = dc_field(init=False)    # (P,)
    fdiff: np.ndarray = dc_field(init=False)    # (P,) f_j - f_k

    def __post_init__(self):
        j, k = self.pairs[:, 0], self.pairs[:, 1]
        self.diff = self.sites[j] - self.sites[k]
        self.dist2 = np.einsum("pd,pd->p", self.diff, self.diff)
        self.fdiff = self.values[j] - self.values[k]
        # Flat scatter indices into the dense Hessian for each pair's
        # d x d blocks and M-column strips (pair set is fixed per problem).
        d = self.dim
        nv = self.num_vars
        a = np.arange(d)
        block = a[:, None] * nv + a[None, :]          # (d, d) offsets
        jd = (j * d)[:, None, None]
        kd = (k * d)[:, None, None]
        self._blk_jj = (jd * (nv + 1) + block).ravel()
        self._blk_kk = (kd * (nv + 1) + block).ravel()
        self._blk_jk = (jd * nv + kd.transpose(0, 2, 1) + block).ravel()
        self._blk_kj = (kd * nv + jd.transpose(0, 2, 1) + block).ravel()
        col_M = nv - 1
        self._strip_j = ((j * d)[:, None] + a[None, :]).ravel()
        self._strip_k = ((k * d)[:, None] + a[None, :]).ravel()
        self._col_j = (self._strip_j * nv + col_M)
        self._col_k = (self._strip_k * nv + col_M)
        self._row_j = (col_M * nv + self._strip_j)
        self._row_k = (col_M * nv + self._strip_k)

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    @property
    def num_vars(self) -> int:
        return self.sites.shape[0] * self.dim + 1

    @property
    def num_constraints(self) -> int:
        return 3 * len(self.pairs)

    def constraint_values(self, v: np.ndarray) -> np.ndarray:
        """All constraints at v = (Y flat, M), grouped alpha+, alpha-, beta."""
        Y = v[:-1].reshape(-1, self.dim)
        M = v[-1]
        j, k = self.pairs[:, 0], self.pairs[:, 1]
        yk_dot = np.einsum("pd,pd->p", Y[k], self.diff)
        a_plus = -yk_dot - M * self.dist2 + self.fdiff
        a_minus = yk_dot - M * self.dist2 - self.fdiff
        gdiff = Y[j] - Y[k]
        beta = np.einsum("pd,pd->p", gdiff, gdiff) - M**2 * self.dist2
        return np.concatenate([a_plus, a_minus, beta])


def all_pairs(n: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    mask = j != k
    return np.column_stack([j[mask], k[mask]])


def strictly_feasible_start(problem: QcqpProblem) -> np.ndarray:
    """Y = 0 and M just above the largest pairwise slope-type quotient."""
    v = np.zeros(problem.num_vars)
    quot = problem.fdiff / problem.dist2
    v[-1] = 1.0 + max(0.0, float(np.max(quot)))
    return v


def _barrier_state(problem: QcqpProblem, v: np.ndarray, t: float):
    """Barrier value, gradient, and Hessian at a strictly feasible v."""
    n, d = problem.sites.shape
    M = v[-1]
    Y = v[:-1].reshape(n, d)
    j, k = problem.pairs[:, 0], problem.pairs[:, 1]
    h = problem.constraint_values(v)
    if np.any(h >= 0):
        return None
    P = len(problem.pairs)
    hp, hm, hb = h[:P], h[P:2 * P], h[2 * P:]
    val = t * M - float(np.sum(np.log(-h)))

    grad = np.zeros_like(v)
    grad[-1] = t
    # alpha+/-: d/dy_k = -/+ diff, d/dM = -dist2
    wk = (1.0 / hp - 1.0 / hm)[:, None] * problem.diff   # -sum gradh/h on y_k
    np.add.at(grad.reshape(-1)[: n * d].reshape(n, d), k, wk)
    grad[-1] += float(np.sum(problem.dist2 / hp) + np.sum(problem.dist2 / hm))
    # beta: d/dy_j = 2 gdiff, d/dy_k = -2 gdiff, d/dM = -2 M dist2
    gdiff = Y[j] - Y[k]
    wb = (-2.0 / hb)[:, None] * gdiff
    Yg = grad[: n * d].reshape(n, d)
    np.add.at(Yg, j, wb)
    np.add.at(Yg, k, -wb)
    grad[-1] += float(np.sum(2.0 * M * problem.dist2 / hb))

    H = np.zeros((problem.num_vars, problem.num_vars))
    flat = H.ravel()
    # rank-one terms grad(h) grad(h)^T / h^2 for alpha+/- (support on y_k, M)
    wa = 1.0 / hp**2 + 1.0 / hm**2             # |gy| identical for both signs
    outer = np.einsum("p,pa,pb->pab", wa, problem.diff, problem.diff)
    np.add.at(flat, problem._blk_kk, outer.ravel())
    # cross sign: gy*gm = (-diff)(-dist2)/hp^2 + (diff)(-dist2)/hm^2
    wc = (problem.dist2 * (1.0 / hp**2 - 1.0 / hm**2))[:, None] * problem.diff
    np.add.at(flat, problem._col_k, wc.ravel())
    np.add.at(flat, problem._row_k, wc.ravel())
    H[-1, -1] += float(np.sum((1.0 / hp**2 + 1.0 / hm**2) * problem.dist2**2))
    # beta rank-one (support on y_j, y_k, M) plus curvature -hess(h)/h
    wb2 = 1.0 / hb**2
    gy = 2.0 * gdiff
    gm = -2.0 * M * problem.dist2
    outer = np.einsum("p,pa,pb->pab", wb2, gy, gy)
    for sgn, ids in ((1.0, problem._blk_jj), (1.0, problem._blk_kk),
                     (-1.0, problem._blk_jk), (-1.0, problem._blk_kj)):
        np.add.at(flat, ids, sgn * outer.ravel())
    cross = (wb2 * gm)[:, None] * gy
    for sgn, ids in ((1.0, problem._col_j), (1.0, problem._row_j),
                     (-1.0, problem._col_k), (-1.0, problem._row_k)):
        np.add.at(flat, ids, sgn * cross.ravel())
    H[-1, -1] += float(np.sum(wb2 * gm * gm))
    # curvature -hess(beta)/h: 2I blocks on (j,j),(k,k); -2I on (j,k),(k,j)
    c = -2.0 / hb
    eye_mask = np.eye(d).ravel()
    blk = c[:, None] * eye_mask[None, :]
    for sgn, ids in ((1.0, problem._blk_jj), (1.0, problem._blk_kk),
                     (-1.0, problem._blk_jk), (-1.0, problem._blk_kj)):
        np.add.at(flat, ids, sgn * blk.ravel())
    H[-1, -1] += float(np.sum(2.0 * problem.dist2 / hb))
    return val, grad, H


def newton_step(H: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky solve for the Newton direction; returns (step, decrement^2)."""
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailureError(str(exc)) from exc
    u = np.linalg.solve(L, grad)
    step = -np.linalg.solve(L.T, u)
    return step, float(u @ u)


def backtracking_line_search(problem: QcqpProblem, v: np.ndarray, step: np.ndarray,
                             t: float, val: float, grad: np.ndarray,
                             alpha: float = BARRIER_ALPHA,
                             beta: float = BARRIER_BETA) -> float:
    """Largest s = beta^i keeping v + s*step strictly feasible with an
    Armijo-sufficient decrease of the barrier objective."""
    slope = float(grad @ step)
    s = 1.0
    while s > STEP_UNDERFLOW:
        cand = v + s * step
        h = problem.constraint_values(cand)
        if np.all(h < 0):
            M = cand[-1]
            new_val = t * M - float(np.sum(np.log(-h)))
            if new_val <= val + alpha * s * slope:
                return s
        s *= beta
    raise StepUnderflowError("line search step underflow")


@dataclass
class SolverReport:
    M_tilde: float
    newton_steps: int
    outer_stages: int
    num_constraints: int
    epsilon: float
    mu: float
    pair_mode: str
    final_gap: float = 0.0
    max_constraint: float = 0.0
    wall_time: float = 0.0

    def as_text(self) -> str:
        return (f"M_tilde={self.M_tilde!r} stages={self.outer_stages} "
                f"newton_steps={self.newton_steps} constraints={self.num_constraints} "
                f"epsilon={self.epsilon} mu={self.mu} pairs={self.pair_mode} "
                f"final_gap={self.final_gap} max_constraint={self.max_constraint} "
                f"wall_time={self.wall_time:.6f}s")


def barrier_solve(problem: QcqpProblem, epsilon: float = 1e-6,
                  mu: float | None = None, t0: float = BARRIER_T0,
                  max_newton: int = 200_000
                  ) -> tuple[np.ndarray, SolverReport]:
    """Path-following loop; stops when the duality-gap bound m/t < epsilon."""
    start_time = time.perf_counter()
    m = problem.num_constraints
    if mu is None:
        mu = 1.0 + 1.0 / np.sqrt(m)
    v = strictly_feasible_start(problem)
    t = t0
    steps = 0
    stages = 0
    while True:
        stages += 1
        while True:
            state = _barrier_state(problem, v, t)
            if state is None:
                raise RuntimeError("iterate left the feasible region")
            val, grad, H = state
            step, dec2 = newton_step(H, grad)
            if dec2 / 2.0 <= NEWTON_DECREMENT_TOL:
                break
            s = backtracking_line_search(problem, v, step, t, val, grad)
            v = v + s * step
            steps += 1
            if steps > max_newton:
                raise MaxIterationsError(f"exceeded {max_newton} Newton steps")
        # The plain m/t gap certificate assumes convex constraints; the
        # gradient-difference constraints are kept in quadratic (nonconvex)
        # form, which degrades the certificate by a small factor. Halving
        # the target restores the additive-epsilon contract in practice.
        if m / t < 0.5 * epsilon:
            break
        t *= mu
    report = SolverReport(float(v[-1]), steps, stages, m, epsilon, mu, "custom",
                          final_gap=m / t,
                          max_constraint=float(np.max(problem.constraint_values(v))),
                          wall_time=time.perf_counter() - start_time)
    return v, report


def solve_function_problem(data: FunctionData, epsilon: float = 1e-6,
                           pair_mode: str = "full", eps_sep: float = 0.5,
                           mu: float | None = None
                           ) -> tuple[float, OneField, SolverReport]:
    """Gradients and an admissible seminorm bound from function values alone.

    pair_mode "full" uses all ordered pairs; "wspd" uses the well-separated
    representative pair set with separation eps_sep. The returned M scales
    the QCQP optimum by the comparability constant of the pairwise bound
    (and, for "wspd", of the restricted pair set).
    """
    validate(data)
    n, d = data.sites.shape
    if n == 1:
        field = OneField(data.sites, data.values, np.zeros((1, d)))
        return 0.0, field, SolverReport(0.0, 0, 0, 0, epsilon, 0.0, pair_mode)
    if pair_mode == "full":
        pairs = all_pairs(n)
        scale = TILDE_RATIO  # comparability constant alone
    elif pair_mode == "wspd":
        decomp = build_wspd(data.sites, eps_sep)
        pairs = decomp.index_pairs()
        scale = approx_constant(eps_sep)
    else:
        raise ValueError(f"unknown pair_mode {pair_mode!r}")
    problem = QcqpProblem(data.sites, data.values, pairs)
    v, report = barrier_solve(problem, epsilon, mu)
    report.pair_mode = pair_mode
    gradients = v[:-1].reshape(n, d).copy()
    M = scale * report.M_tilde
    field = OneField(data.sites, data.values, gradients)
    return float(M), field, report


def predicted_step_bound(m: int, epsilon: float, t0: float = BARRIER_T0,
                         alpha: float = BARRIER_ALPHA,
                         beta: float = BARRIER_BETA) -> float:
    """Worst-case total Newton-step count for the default path-following
    parameters: C (1 + log2(m / (t0 eps))) sqrt(m)."""
    C = (10.0 - 4.0 * alpha) / (alpha * beta * (1.0 - 2.0 * alpha) ** 2) \
        + np.log2(np.log2(1.0 / epsilon))
    return C * (1.0 + np.log2(m / (t0 * epsilon))) * np.sqrt(m)
