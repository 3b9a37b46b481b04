"""Damped Gauss-Newton least squares with log-transformed positivity.

One engine backs both the peak fits and the calibration-curve fit so the
two share convergence behavior and covariance conventions:

* damping: Marquardt style, lambda * diag(JtJ) with lambda0 = 1e-3, times 10
  on a rejected step, divided by 10 on an accepted one; the diagonal is
  floored so a collapsing column cannot make the damped system singular
* convergence: relative cost decrease below cost_tol, or step norm below
  step_tol, on three successive accepted steps
* iteration cap: 500 trial steps, then NonConvergence with diagnostics
* positivity: parameters declared "log" are optimized as u = log(x - shift)
  internally, optionally clamped to an internal-space box
* pinning: a spec whose lower and upper clamps coincide freezes that
  parameter; pinned columns are excluded from the normal equations, the
  rank check, and the covariance, so a fit with frozen geometry behaves
  exactly like the smaller problem over the remaining parameters
* covariance: residual variance times inverse normal matrix, reported in
  natural parameter space via the chain rule; pinned parameters get zero
  variance

Residual callbacks receive natural-space parameters and return the residual
vector together with its natural-space Jacobian. A callback may raise one of
the exception types listed in reject_on to veto a trial point; the engine
treats that as a rejected step and increases damping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence, SingularJacobian

_RANK_TOL = 1e-10


@dataclass(frozen=True)
class ParamSpec:
    """How one parameter is represented inside the solver.

    kind "id" optimizes the value directly. Kind "log" optimizes
    u = log(value - shift), which keeps value > shift throughout.
    lower/upper clamp u (internal space) after each step.
    """

    kind: str = "id"
    shift: float = 0.0
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self):
        if self.kind not in ("id", "log"):
            raise ValueError(f"unknown parameter kind {self.kind!r}")


IDENTITY = ParamSpec("id")


def log_param(shift: float = 0.0, lower: float = -700.0, upper: float = np.inf) -> ParamSpec:
    """Positivity spec: value = shift + exp(u).

    The default lower bound on u stops exp from underflowing to zero, so
    the value stays strictly above the shift even in floating point.
    """
    return ParamSpec("log", shift=shift, lower=lower, upper=upper)


class _Transform:
    def __init__(self, specs):
        self.specs = list(specs)
        self.is_log = np.array([s.kind == "log" for s in self.specs])
        self.shift = np.array([s.shift for s in self.specs])
        self.lower = np.array([s.lower for s in self.specs])
        self.upper = np.array([s.upper for s in self.specs])
        self.free = ~(np.isfinite(self.lower) & (self.lower == self.upper))

    def to_internal(self, theta):
        theta = np.asarray(theta, dtype=float)
        u = theta.copy()
        bad = self.is_log & ~(theta > self.shift)
        if bad.any():
            raise ValueError("log-transformed parameters must exceed their shift")
        u[self.is_log] = np.log(theta[self.is_log] - self.shift[self.is_log])
        return np.clip(u, self.lower, self.upper)

    def to_natural(self, u):
        theta = u.copy()
        theta[self.is_log] = self.shift[self.is_log] + np.exp(u[self.is_log])
        return theta

    def dnat_du(self, u):
        d = np.ones_like(u)
        d[self.is_log] = np.exp(u[self.is_log])
        return d


@dataclass
class FitResult:
    """Solution of one least-squares problem, in natural parameter space."""

    params: np.ndarray
    sigmas: np.ndarray
    covariance: np.ndarray
    cost: float
    residual_variance: float
    dof: int
    iterations: int
    accepted_steps: int
    converged: bool
    message: str = ""
    diagnostics: dict = field(default_factory=dict)


def _seed_rank_check(jac_internal):
    """Reject seed points whose Jacobian is rank deficient.

    Columns are normalized first so the test measures genuine degeneracy
    (coincident peaks, duplicated parameters) rather than scale imbalance.
    """
    j = np.asarray(jac_internal, dtype=float)
    if not np.all(np.isfinite(j)):
        raise SingularJacobian("Jacobian at seed values is not finite")
    norms = np.linalg.norm(j, axis=0)
    if np.any(norms == 0.0):
        raise SingularJacobian("a parameter has no effect on the residual at the seeds")
    sv = np.linalg.svd(j / norms, compute_uv=False)
    if sv[-1] < _RANK_TOL * sv[0]:
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        raise SingularJacobian(
            f"Jacobian at seed values is rank deficient (condition {cond:.2e})"
        )


def least_squares(
    residual_jac,
    theta0,
    param_specs=None,
    *,
    max_iter: int = 500,
    cost_tol: float = 1e-10,
    step_tol: float = 1e-12,
    required_streak: int = 3,
    reject_on: tuple = (),
) -> FitResult:
    """Minimize sum(r(theta)**2) from theta0.

    residual_jac(theta) -> (r, J) with J[i, k] = dr_i/dtheta_k in natural
    space. Weighted problems fold the weights into r and J before calling.
    """
    theta0 = np.asarray(theta0, dtype=float)
    n_par = theta0.size
    if param_specs is None:
        param_specs = [IDENTITY] * n_par
    if len(param_specs) != n_par:
        raise ValueError("one ParamSpec per parameter required")
    tr = _Transform(param_specs)
    free = tr.free
    n_fit = int(free.sum())

    u = tr.to_internal(theta0)
    theta = tr.to_natural(u)
    r, jac_nat = residual_jac(theta)
    r = np.asarray(r, dtype=float)
    jac_nat = np.asarray(jac_nat, dtype=float)
    n_res = r.size
    jac_int = (jac_nat * tr.dnat_du(u)[None, :])[:, free]
    if n_fit:
        _seed_rank_check(jac_int)

    cost = float(r @ r)
    jtj = jac_int.T @ jac_int
    grad = jac_int.T @ r
    lam = 1e-3
    lam_floor = 1e-14
    lam_cap = 1e18

    def damping():
        # Marquardt scaling: damp each direction by its own curvature so a
        # single lambda serves columns of very different magnitude; the
        # relative floor keeps the damped system nonsingular when a column
        # collapses mid-fit (a peak area shrinking toward zero)
        d = np.diag(jtj)
        return np.maximum(d, 1e-12 * float(np.max(d)) + 1e-300)

    streak = 0
    accepted = 0
    iteration = 0
    converged = n_fit == 0
    message = "all parameters pinned" if converged else ""

    while not converged and iteration < max_iter:
        iteration += 1
        d = damping()
        try:
            step_free = np.linalg.solve(jtj + lam * np.diag(d), -grad)
        except np.linalg.LinAlgError:
            lam = min(max(lam * 10.0, lam_floor), lam_cap)
            continue
        step = np.zeros(n_par)
        step[free] = step_free
        # a wild trial step may overflow; that only means "reject it"
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            u_try = np.clip(u + step, tr.lower, tr.upper)
            step_act = u_try - u  # what the clamps let through
            step_norm = float(np.linalg.norm(step_act))
            theta_try = tr.to_natural(u_try)
            try:
                r_try, jac_try = residual_jac(theta_try)
            except reject_on:
                lam = min(lam * 10.0, lam_cap)
                continue
            r_try = np.asarray(r_try, dtype=float)
            cost_try = float(r_try @ r_try)
        if not np.isfinite(cost_try) or cost_try > cost:
            lam = min(lam * 10.0, lam_cap)
            continue
        # accepted (ties included, so an already-converged seed terminates)
        rel_decrease = (cost - cost_try) / cost if cost > 0 else 0.0
        u, theta, r = u_try, theta_try, r_try
        jac_nat = np.asarray(jac_try, dtype=float)
        jac_int = (jac_nat * tr.dnat_du(u)[None, :])[:, free]
        jtj = jac_int.T @ jac_int
        grad = jac_int.T @ r
        cost = cost_try
        lam = max(lam / 10.0, lam_floor)
        accepted += 1
        if rel_decrease < cost_tol or step_norm < step_tol:
            streak += 1
            if streak >= required_streak:
                converged = True
                message = (
                    f"converged after {iteration} iterations "
                    f"({accepted} accepted steps)"
                )
                break
        else:
            streak = 0

    grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    if not converged:
        raise NonConvergence(
            f"no convergence within {max_iter} iterations "
            f"(cost {cost:.6e}, max gradient {grad_norm:.3e})",
            iterations=iteration,
            cost=cost,
            gradient_norm=grad_norm,
        )

    dof = n_res - n_fit
    s2 = cost / dof if dof > 0 else float("nan")
    jn_free = jac_nat[:, free]
    jtj_nat = jn_free.T @ jn_free
    try:
        cov_unit = np.linalg.inv(jtj_nat)
    except np.linalg.LinAlgError:
        cov_unit = np.linalg.pinv(jtj_nat)
    covariance = np.zeros((n_par, n_par))
    covariance[np.ix_(free, free)] = cov_unit * (s2 if dof > 0 else 0.0)
    sigmas = np.sqrt(np.clip(np.diag(covariance), 0.0, None))

    return FitResult(
        params=theta,
        sigmas=sigmas,
        covariance=covariance,
        cost=cost,
        residual_variance=s2,
        dof=dof,
        iterations=iteration,
        accepted_steps=accepted,
        converged=True,
        message=message,
        diagnostics={"gradient_norm": grad_norm, "lambda": lam},
    )


def finite_difference_jacobian(fn, theta, rel_step: float = 1e-6):
    """Central finite-difference Jacobian of fn(theta) -> residual vector."""
    theta = np.asarray(theta, dtype=float)
    r0 = np.asarray(fn(theta), dtype=float)
    jac = np.empty((r0.size, theta.size))
    for k in range(theta.size):
        h = rel_step * max(abs(theta[k]), 1.0)
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        jac[:, k] = (np.asarray(fn(up), dtype=float) - np.asarray(fn(dn), dtype=float)) / (2.0 * h)
    return jac


def max_relative_deviation(analytic, numeric):
    """Column-wise sup-norm deviation, relative to each column's scale."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    worst = 0.0
    for k in range(analytic.shape[1]):
        scale = max(float(np.max(np.abs(analytic[:, k]))), 1e-300)
        dev = float(np.max(np.abs(analytic[:, k] - numeric[:, k]))) / scale
        worst = max(worst, dev)
    return worst
