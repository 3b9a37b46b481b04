import numpy as np
import pytest

from vbquant.errors import NonConvergence, SingularJacobian
from vbquant.solver import (
    IDENTITY,
    finite_difference_jacobian,
    least_squares,
    log_param,
    max_relative_deviation,
    ParamSpec,
)


def exp_decay_problem(true=(3.0, 0.7), n=40, noise=0.0, seed=0):
    """y = A * exp(-k * x) sampled on [0, 5]."""
    x = np.linspace(0.0, 5.0, n)
    a, k = true
    y = a * np.exp(-k * x)
    if noise:
        y = y + noise * np.random.default_rng(seed).standard_normal(n)

    def residual_jac(theta):
        a, k = theta
        model = a * np.exp(-k * x)
        r = model - y
        jac = np.column_stack([np.exp(-k * x), -a * x * np.exp(-k * x)])
        return r, jac

    return x, y, residual_jac


def test_converges_on_linear_problem():
    x = np.linspace(0.0, 1.0, 20)
    y = 2.5 * x - 1.0

    def residual_jac(theta):
        m, c = theta
        return m * x + c - y, np.column_stack([x, np.ones_like(x)])

    res = least_squares(residual_jac, np.array([0.0, 0.0]))
    assert res.converged
    assert abs(res.params[0] - 2.5) < 1e-10
    assert abs(res.params[1] + 1.0) < 1e-10
    assert res.cost < 1e-18


def test_converges_on_exponential_from_far_seed():
    _, _, residual_jac = exp_decay_problem()
    res = least_squares(residual_jac, np.array([1.0, 0.1]))
    assert res.converged
    assert abs(res.params[0] - 3.0) < 1e-8
    assert abs(res.params[1] - 0.7) < 1e-8


def test_covariance_matches_analytic_on_linear_fit():
    """For a linear model the covariance is s2 * (X^T X)^-1 exactly."""
    rng = np.random.default_rng(7)
    x = np.linspace(0.0, 4.0, 60)
    y = 1.2 * x + 0.5 + 0.1 * rng.standard_normal(x.size)
    design = np.column_stack([x, np.ones_like(x)])

    def residual_jac(theta):
        return design @ theta - y, design

    res = least_squares(residual_jac, np.array([0.0, 0.0]))
    beta = np.linalg.lstsq(design, y, rcond=None)[0]
    resid = design @ beta - y
    s2 = resid @ resid / (x.size - 2)
    cov = s2 * np.linalg.inv(design.T @ design)
    assert np.allclose(res.params, beta, rtol=0, atol=1e-10)
    assert np.allclose(res.covariance, cov, rtol=1e-6)
    assert np.allclose(res.sigmas, np.sqrt(np.diag(cov)), rtol=1e-6)
    assert res.dof == x.size - 2
    assert abs(res.residual_variance - s2) < 1e-12 * s2


def test_log_param_keeps_value_above_shift():
    # minimize (x - (-2))**2 with x constrained > 0; best feasible is x -> 0+
    def residual_jac(theta):
        return np.array([theta[0] + 2.0]), np.array([[1.0]])

    res = least_squares(
        residual_jac,
        np.array([1.0]),
        [log_param()],
        max_iter=200,
    )
    assert res.params[0] > 0.0
    assert res.params[0] < 1e-3


def test_log_param_rejects_infeasible_seed():
    def residual_jac(theta):
        return np.array([theta[0]]), np.array([[1.0]])

    with pytest.raises(ValueError):
        least_squares(residual_jac, np.array([-1.0]), [log_param()])
    with pytest.raises(ValueError):
        least_squares(residual_jac, np.array([2.0]), [log_param(shift=2.0)])


def test_log_param_shift():
    # solution x = 5, constrained x > 3
    def residual_jac(theta):
        return np.array([theta[0] - 5.0]), np.array([[1.0]])

    res = least_squares(residual_jac, np.array([3.5]), [log_param(shift=3.0)])
    assert abs(res.params[0] - 5.0) < 1e-8


def test_internal_clamp_enforces_box():
    # solution would be x = 100 but internal log(x) is capped at log(10)
    def residual_jac(theta):
        return np.array([theta[0] - 100.0]), np.array([[1.0]])

    res = least_squares(
        residual_jac,
        np.array([1.0]),
        [log_param(upper=float(np.log(10.0)))],
    )
    assert res.params[0] <= 10.0 + 1e-12


def test_singular_jacobian_on_duplicated_parameter():
    x = np.linspace(0.0, 1.0, 10)
    y = x.copy()

    def residual_jac(theta):
        # both parameters multiply the same regressor
        model = (theta[0] + theta[1]) * x
        jac = np.column_stack([x, x])
        return model - y, jac

    with pytest.raises(SingularJacobian):
        least_squares(residual_jac, np.array([0.5, 0.5]))


def test_singular_jacobian_on_dead_parameter():
    x = np.linspace(0.0, 1.0, 10)

    def residual_jac(theta):
        jac = np.column_stack([x, np.zeros_like(x)])
        return theta[0] * x - x, jac

    with pytest.raises(SingularJacobian) as exc:
        least_squares(residual_jac, np.array([0.0, 1.0]))
    assert "no effect" in str(exc.value)


def test_singular_jacobian_on_nonfinite_seed_jacobian():
    def residual_jac(theta):
        return np.array([theta[0]]), np.array([[np.nan]])

    with pytest.raises(SingularJacobian):
        least_squares(residual_jac, np.array([1.0]))


def test_nonconvergence_carries_diagnostics():
    _, _, residual_jac = exp_decay_problem()
    with pytest.raises(NonConvergence) as exc:
        least_squares(residual_jac, np.array([1.0, 0.1]), max_iter=2)
    err = exc.value
    assert err.iterations == 2
    assert err.cost is not None and np.isfinite(err.cost)
    assert err.gradient_norm is not None


def test_reject_on_treats_exception_as_rejected_step():
    """A callback may veto trial points; the fit still reaches the answer."""
    calls = {"vetoed": 0}

    class Veto(Exception):
        pass

    x = np.linspace(0.0, 5.0, 40)
    y = 3.0 * np.exp(-0.7 * x)

    def residual_jac(theta):
        a, k = theta
        if k > 5.0:
            calls["vetoed"] += 1
            raise Veto
        model = a * np.exp(-k * x)
        return model - y, np.column_stack([np.exp(-k * x), -a * x * np.exp(-k * x)])

    res = least_squares(residual_jac, np.array([1.0, 0.1]), reject_on=(Veto,))
    assert res.converged
    assert abs(res.params[1] - 0.7) < 1e-8


def test_unlisted_exception_propagates():
    class Boom(Exception):
        pass

    def residual_jac(theta):
        if theta[0] != 1.0:
            raise Boom
        return np.array([theta[0] - 2.0]), np.array([[1.0]])

    with pytest.raises(Boom):
        least_squares(residual_jac, np.array([1.0]))


def test_result_bookkeeping():
    _, _, residual_jac = exp_decay_problem()
    res = least_squares(residual_jac, np.array([2.0, 0.5]))
    assert res.iterations >= res.accepted_steps
    assert res.dof == 40 - 2
    assert "converged" in res.message
    assert "gradient_norm" in res.diagnostics
    assert res.covariance.shape == (2, 2)


def test_param_spec_validation():
    with pytest.raises(ValueError):
        ParamSpec("sqrt")
    assert IDENTITY.kind == "id"


def test_wrong_spec_count():
    def residual_jac(theta):
        return np.array([theta[0]]), np.array([[1.0]])

    with pytest.raises(ValueError):
        least_squares(residual_jac, np.array([1.0]), [IDENTITY, IDENTITY])


def test_finite_difference_matches_analytic():
    x = np.linspace(0.0, 5.0, 25)

    def fn(theta):
        a, k, c = theta
        return a * np.exp(-k * x) + c

    def analytic(theta):
        a, k, _ = theta
        return np.column_stack([np.exp(-k * x), -a * x * np.exp(-k * x), np.ones_like(x)])

    theta = np.array([3.0, 0.7, 0.2])
    num = finite_difference_jacobian(fn, theta)
    dev = max_relative_deviation(analytic(theta), num)
    assert dev < 1e-8


def test_max_relative_deviation_scales_per_column():
    a = np.array([[1.0, 1000.0], [2.0, 2000.0]])
    b = a.copy()
    b[0, 1] += 1.0  # relative to column scale 2000 this is 5e-4
    assert abs(max_relative_deviation(a, b) - 1.0 / 2000.0) < 1e-15


def test_weighted_problem_through_folded_residuals():
    """Weights folded into r and J shift the solution toward low-sigma points."""
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([0.0, 1.0, 2.0, 10.0])
    w = np.array([1.0, 1.0, 1.0, 1e-6])  # last point effectively ignored

    def residual_jac(theta):
        m = theta[0]
        return w * (m * x - y), (w * x)[:, None]

    res = least_squares(residual_jac, np.array([0.0]))
    assert abs(res.params[0] - 1.0) < 1e-5


def test_pinned_parameter_stays_fixed():
    # equal lower and upper clamps freeze the parameter at that value
    _, _, residual_jac = exp_decay_problem()
    specs = [IDENTITY, ParamSpec("id", lower=0.7, upper=0.7)]
    res = least_squares(residual_jac, np.array([1.0, 0.7]), specs)
    assert res.converged
    assert res.params[1] == 0.7
    assert abs(res.params[0] - 3.0) < 1e-10
    assert res.sigmas[1] == 0.0
    assert np.all(res.covariance[1, :] == 0.0)
    assert np.all(res.covariance[:, 1] == 0.0)
    assert res.dof == 40 - 1


def test_pinned_parameter_skips_rank_check():
    # a pinned parameter with no effect on the residual must not be rejected
    x = np.linspace(0.0, 1.0, 20)
    y = 2.0 * x

    def residual_jac(theta):
        m, dead = theta
        return m * x - y, np.column_stack([x, np.zeros_like(x)])

    specs = [IDENTITY, ParamSpec("id", lower=5.0, upper=5.0)]
    res = least_squares(residual_jac, np.array([0.0, 5.0]), specs)
    assert abs(res.params[0] - 2.0) < 1e-10
    assert res.params[1] == 5.0


def test_all_parameters_pinned_returns_seed():
    _, _, residual_jac = exp_decay_problem()
    specs = [ParamSpec("id", lower=3.0, upper=3.0), ParamSpec("id", lower=0.7, upper=0.7)]
    res = least_squares(residual_jac, np.array([3.0, 0.7]), specs)
    assert res.converged
    assert res.iterations == 0
    assert np.all(res.params == np.array([3.0, 0.7]))
    assert np.all(res.covariance == 0.0)
