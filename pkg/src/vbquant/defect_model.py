"""Defect-activation calibration curve and density arithmetic.

The measured intensity ratio (defect Raman band plus defect
photoluminescence, normalized to the host E2g phonon) is modeled with two
competing disk populations around each defect: an activated annulus of
outer radius r_a that switches the defect signal on, and a structurally
damaged core of radius r_s that switches it off. With mean inter-defect
distance L (nm) the ratio at one excitation energy is

    ratio(L) = c_a * (r_a^2 - r_s^2) / (r_a^2 - 2 r_s^2)
                   * (exp(-pi r_s^2 / L^2) - exp(-pi (r_a^2 - r_s^2) / L^2))
             + c_s * (1 - exp(-pi r_s^2 / L^2))

The geometry (r_a, r_s) and the fluence law L = alpha * fluence**(-beta)
are shared across excitation energies; the scale factors (c_a, c_s) are
per excitation. Defect density follows from one defect per sphere of
radius L: density[1/cm^3] = 1e21 / ((4/3) pi L^3).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (
    DegenerateGeometry,
    DomainError,
    InsufficientData,
    NoSolution,
    NonConvergence,
)
from .solver import least_squares, log_param

# |r_a^2 - 2 r_s^2| below this is treated as the removable singularity
GEOMETRY_GUARD = 1e-6

# one defect per sphere: 1e21 converts 1/nm^3 to 1/cm^3
_DENSITY_NUM = 1e21
_SPHERE = 4.0 * math.pi / 3.0

# inversion search bounds for the inter-defect distance, nm
L_SEARCH_MIN = 1e-3
L_SEARCH_MAX = 1e4

_EL_KEY_DECIMALS = 9


class RatioMode(str, enum.Enum):
    COMBINED = "combined"
    D1_ONLY = "d1_only"
    PL_ONLY = "pl_only"


class Branch(str, enum.Enum):
    LOW_DENSITY = "low_density"
    HIGH_DENSITY = "high_density"


@dataclass(frozen=True)
class RatioObservation:
    """One measured ratio at a known fluence and excitation energy."""

    fluence: float
    el_ev: float
    ratio: float
    ratio_sigma: float | None = None
    mode: RatioMode = RatioMode.COMBINED

    def __post_init__(self):
        if not (math.isfinite(self.fluence) and self.fluence > 0):
            raise DomainError(f"fluence must be positive, got {self.fluence}")
        if not (math.isfinite(self.el_ev) and self.el_ev > 0):
            raise DomainError(f"excitation energy must be positive, got {self.el_ev}")
        if not (math.isfinite(self.ratio) and self.ratio >= 0):
            raise DomainError(f"ratio must be non-negative, got {self.ratio}")
        if self.ratio_sigma is not None and not (
            math.isfinite(self.ratio_sigma) and self.ratio_sigma > 0
        ):
            raise DomainError("ratio_sigma must be positive when given")
        object.__setattr__(self, "mode", RatioMode(self.mode))


def _el_key(el_ev: float) -> float:
    return round(float(el_ev), _EL_KEY_DECIMALS)


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted (or hand-built) activation-curve parameters.

    per_el maps excitation energy (eV) to a (c_a, c_s) pair. covariance,
    when present, covers the fitted parameters in the order
    (r_a, alpha, beta, then c_a and c_s per excitation, ascending el).
    """

    r_s_nm: float
    r_a_nm: float
    alpha: float
    beta: float
    per_el: dict
    covariance: np.ndarray | None = None
    sigmas: dict | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("r_s_nm", "r_a_nm", "alpha", "beta"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")
            object.__setattr__(self, name, v)
        if self.r_a_nm <= self.r_s_nm:
            raise DomainError("r_a_nm must exceed r_s_nm")
        if abs(self.r_a_nm**2 - 2.0 * self.r_s_nm**2) <= GEOMETRY_GUARD:
            raise DegenerateGeometry(
                "r_a^2 too close to 2 r_s^2; the activation prefactor diverges"
            )
        cleaned = {}
        for el, pair in dict(self.per_el).items():
            c_a, c_s = float(pair[0]), float(pair[1])
            if not (math.isfinite(c_a) and c_a >= 0):
                raise DomainError(f"c_a at {el} eV must be >= 0, got {c_a}")
            if not (math.isfinite(c_s) and c_s >= 0):
                raise DomainError(f"c_s at {el} eV must be >= 0, got {c_s}")
            cleaned[_el_key(el)] = (c_a, c_s)
        if not cleaned:
            raise DomainError("per_el must hold at least one excitation energy")
        object.__setattr__(self, "per_el", cleaned)

    def coefficients(self, el_ev: float) -> tuple:
        key = _el_key(el_ev)
        try:
            return self.per_el[key]
        except KeyError:
            known = ", ".join(f"{k:g}" for k in sorted(self.per_el))
            raise DomainError(
                f"no coefficients for excitation {el_ev} eV (calibrated: {known})"
            ) from None

    def parameter_order(self) -> list:
        names = ["r_a", "alpha", "beta"]
        for el in sorted(self.per_el):
            names += [f"c_a@{el:g}", f"c_s@{el:g}"]
        return names


@dataclass(frozen=True)
class DensityEstimate:
    """Defect density with its inter-defect distance and 68% interval."""

    l_d_nm: float
    density_cm3: float
    ci_68: tuple
    branch: Branch | None
    valid: bool
    reason: str


# ---------------------------------------------------------------------------
# closed-form pieces


def _ratio_terms(l_d, r_s, r_a):
    """Activated and structural terms and their L-derivatives.

    Uses expm1 when the two exponents nearly cancel, so the large-L tail
    keeps full relative precision (the inversion tolerance relies on it).
    """
    l_d = np.asarray(l_d, dtype=float)
    a = math.pi * r_s * r_s
    b = math.pi * (r_a * r_a - r_s * r_s)
    denom = r_a * r_a - 2.0 * r_s * r_s
    if abs(denom) <= GEOMETRY_GUARD:
        raise DegenerateGeometry(
            f"r_a^2 - 2 r_s^2 = {denom:.3e} is inside the guard band"
        )
    pref = (r_a * r_a - r_s * r_s) / denom

    inv2 = 1.0 / (l_d * l_d)
    ea = np.exp(-a * inv2)
    eb = np.exp(-b * inv2)
    # exp(-a/L^2) - exp(-b/L^2) cancels badly at large L; switch to the
    # expm1 form there. The clip only feeds discarded lanes, it keeps
    # expm1 away from overflow when b < a and L is tiny.
    gap = (b - a) * inv2
    diff = np.where(
        np.abs(gap) < 0.5,
        -ea * np.expm1(-np.clip(gap, -0.5, 0.5)),
        ea - eb,
    )
    activated = pref * diff
    structural = -np.expm1(-a * inv2)

    inv3 = inv2 / l_d
    d_act_dl = pref * 2.0 * inv3 * (a * ea - b * eb)
    d_str_dl = -2.0 * a * inv3 * ea

    # derivative of the activated term wrt r_a (structural has none)
    dpref_dra = -2.0 * r_a * r_s * r_s / (denom * denom)
    ddiff_dra = eb * inv2 * 2.0 * math.pi * r_a
    d_act_dra = dpref_dra * diff + pref * ddiff_dra
    return activated, structural, d_act_dl, d_str_dl, d_act_dra


def eval_ratio(l_d_nm, model: CalibrationModel, el_ev: float):
    """Model intensity ratio at inter-defect distance l_d_nm (scalar or array)."""
    arr = np.asarray(l_d_nm, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("l_d_nm must be positive and finite")
    c_a, c_s = model.coefficients(el_ev)
    activated, structural, *_ = _ratio_terms(arr, model.r_s_nm, model.r_a_nm)
    out = c_a * activated + c_s * structural
    return float(out) if np.isscalar(l_d_nm) else out


def l_d_from_fluence(fluence, alpha: float, beta: float):
    """Mean inter-defect distance (nm) from irradiation fluence (1/nm^2)."""
    arr = np.asarray(fluence, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("fluence must be positive and finite")
    if alpha <= 0 or beta <= 0:
        raise DomainError("alpha and beta must be positive")
    out = alpha * arr ** (-beta)
    return float(out) if np.isscalar(fluence) else out


def density_from_l_d(l_d_nm):
    """Defect density (1/cm^3): one defect per sphere of radius l_d_nm."""
    arr = np.asarray(l_d_nm, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("l_d_nm must be positive and finite")
    out = _DENSITY_NUM / (_SPHERE * arr**3)
    return float(out) if np.isscalar(l_d_nm) else out


def l_d_from_density(density_cm3):
    """Inverse of density_from_l_d."""
    arr = np.asarray(density_cm3, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("density must be positive and finite")
    out = (_DENSITY_NUM / (_SPHERE * arr)) ** (1.0 / 3.0)
    return float(out) if np.isscalar(density_cm3) else out


# ---------------------------------------------------------------------------
# calibration fitting


@dataclass(frozen=True)
class CalibrationSeeds:
    r_a: float | None = None
    alpha: float | None = None
    beta: float | None = None
    per_el: dict | None = None


def _linear_c_seeds(activated, structural, ratios, sqrt_w, floor):
    """Weighted least-squares (c_a, c_s) at fixed geometry, clipped positive."""
    design = np.column_stack([activated * sqrt_w, structural * sqrt_w])
    coef, *_ = np.linalg.lstsq(design, ratios * sqrt_w, rcond=None)
    return max(float(coef[0]), floor), max(float(coef[1]), floor)


def fit_calibration(
    observations,
    r_s_nm: float = 1.0,
    seeds: CalibrationSeeds | None = None,
    *,
    max_iter: int = 500,
    cost_tol: float = 1e-10,
    step_tol: float = 1e-12,
    mode_meta: str | None = None,
) -> CalibrationModel:
    """Fit shared (r_a, alpha, beta) and per-excitation (c_a, c_s).

    Weighted least squares with weights 1/ratio_sigma**2 when every
    observation carries a sigma; unit weights otherwise. The structurally
    damaged radius r_s stays fixed.

    The curve is a sum of two exponentials in 1/L^2, so swapping their
    rates (with alpha and c_a rescaled) reproduces it exactly: every
    geometry with r_a^2 > 2 r_s^2 has a mirror twin inside that bound.
    The fit therefore constrains r_a > sqrt(2) r_s and reports the outer
    representative, which is the one where the activated area exceeds the
    damaged core and the prefactor stays positive.
    """
    obs = list(observations)
    if not (math.isfinite(r_s_nm) and r_s_nm > 0):
        raise DomainError("r_s_nm must be positive")
    groups: dict[float, list[RatioObservation]] = {}
    for o in obs:
        groups.setdefault(_el_key(o.el_ev), []).append(o)
    if not groups:
        raise InsufficientData("no observations")
    for el, members in groups.items():
        if len({o.fluence for o in members}) < 2:
            raise InsufficientData(
                f"excitation {el:g} eV needs at least 2 distinct fluences"
            )
    els = sorted(groups)
    n_params = 3 + 2 * len(els)
    if len(obs) < n_params + 1:
        raise InsufficientData(
            f"{len(obs)} observations cannot determine {n_params} parameters"
        )

    sigmas = [o.ratio_sigma for o in obs]
    if any(s is not None for s in sigmas) and not all(s is not None for s in sigmas):
        raise DomainError("either all observations carry ratio_sigma or none do")
    weighted = sigmas[0] is not None

    fluence = np.array([o.fluence for o in obs])
    ratio = np.array([o.ratio for o in obs])
    sqrt_w = 1.0 / np.array([s for s in sigmas]) if weighted else np.ones(len(obs))
    el_index = np.array([els.index(_el_key(o.el_ev)) for o in obs])
    log_f = np.log(fluence)

    max_ratio = float(ratio.max())
    c_floor = 1e-12 * max(max_ratio, 1.0)
    seeds = seeds or CalibrationSeeds()
    # keep clear of the guard band around r_a^2 = 2 r_s^2
    r_a_floor = math.sqrt(2.0 * r_s_nm**2 + 10.0 * GEOMETRY_GUARD)
    if seeds.r_a is not None and seeds.r_a <= r_a_floor:
        raise DomainError(
            f"r_a seed {seeds.r_a} is inside the mirror bound sqrt(2)*r_s;"
            f" use a value above {r_a_floor:.4g}"
        )

    def residual_jac(theta):
        r_a, alpha, beta = theta[0], theta[1], theta[2]
        l_d = alpha * fluence ** (-beta)
        act, struct, d_act_dl, d_str_dl, d_act_dra = _ratio_terms(l_d, r_s_nm, r_a)
        c_a = theta[3 + 2 * el_index]
        c_s = theta[4 + 2 * el_index]
        model = c_a * act + c_s * struct
        dm_dl = c_a * d_act_dl + c_s * d_str_dl
        jac = np.zeros((len(obs), theta.size))
        jac[:, 0] = c_a * d_act_dra
        jac[:, 1] = dm_dl * l_d / alpha
        jac[:, 2] = dm_dl * (-l_d * log_f)
        rows = np.arange(len(obs))
        jac[rows, 3 + 2 * el_index] = act
        jac[rows, 4 + 2 * el_index] = struct
        return (model - ratio) * sqrt_w, jac * sqrt_w[:, None]

    def run(theta0):
        specs = [
            log_param(shift=r_a_floor),  # r_a on the outer branch only
            log_param(),  # alpha
            log_param(),  # beta
        ] + [log_param(lower=np.log(c_floor))] * (2 * len(els))
        return least_squares(
            residual_jac,
            theta0,
            specs,
            max_iter=max_iter,
            cost_tol=cost_tol,
            step_tol=step_tol,
            reject_on=(DegenerateGeometry,),
        )

    seeded_c = {}
    if seeds.per_el:
        seeded_c = {_el_key(k): v for k, v in seeds.per_el.items()}

    def start_vector(r_a0, alpha0, beta0):
        """Full start with per-el C from a weighted linear solve; returns
        the start and its cost so candidates can be ranked cheaply."""
        l0 = alpha0 * fluence ** (-beta0)
        act0, struct0, *_ = _ratio_terms(l0, r_s_nm, r_a0)
        theta0 = [r_a0, alpha0, beta0]
        for i, el in enumerate(els):
            if el in seeded_c:
                pair = seeded_c[el]
                theta0 += [max(pair[0], c_floor), max(pair[1], c_floor)]
            else:
                sel = el_index == i
                theta0 += list(
                    _linear_c_seeds(
                        act0[sel], struct0[sel], ratio[sel], sqrt_w[sel], c_floor
                    )
                )
        theta0 = np.asarray(theta0, dtype=float)
        model = theta0[3 + 2 * el_index] * act0 + theta0[4 + 2 * el_index] * struct0
        cost = float(np.sum(((model - ratio) * sqrt_w) ** 2))
        return theta0, cost

    # the landscape has local minima, so scan geometry and fluence-law
    # candidates coarsely (linear C solve each) before any LM run
    f_med = math.exp(float(np.median(log_f)))
    r_grid = (
        [m * r_s_nm for m in (1.6, 2.0, 2.6, 3.4, 4.4)]
        if seeds.r_a is None
        else [seeds.r_a]
    )
    b_grid = (0.3, 0.45, 0.6, 0.8, 1.0) if seeds.beta is None else (seeds.beta,)
    l_med_grid = r_s_nm * np.geomspace(0.7, 120.0, 10)
    ranked = []
    for r_a0 in r_grid:
        if r_a0 <= r_a_floor:
            continue
        for b0 in b_grid:
            alphas = (
                [seeds.alpha]
                if seeds.alpha is not None
                else [float(lm) * f_med**b0 for lm in l_med_grid]
            )
            for a0 in alphas:
                theta0, cost0 = start_vector(r_a0, a0, b0)
                ranked.append((cost0, theta0))
    if not ranked:
        raise DomainError("no admissible start: r_a grid collapsed onto the bound")
    ranked.sort(key=lambda item: item[0])

    # the fit is good when the model explains most of the ratio spread
    baseline = float(np.sum((sqrt_w * (ratio - ratio.mean())) ** 2))
    best = None
    last_err = None
    for _, theta0 in ranked[:6]:
        try:
            result = run(theta0)
        except (NonConvergence, DegenerateGeometry) as err:
            last_err = err
            continue
        if best is None or result.cost < best.cost:
            best = result
        if best.cost <= 1e-6 * max(baseline, 1e-300):
            break
    if best is None:
        raise last_err if last_err is not None else NonConvergence("calibration fit failed")

    theta = best.params
    per_el = {el: (theta[3 + 2 * i], theta[4 + 2 * i]) for i, el in enumerate(els)}
    names = ["r_a", "alpha", "beta"]
    for el in els:
        names += [f"c_a@{el:g}", f"c_s@{el:g}"]
    sig = {name: float(s) for name, s in zip(names, best.sigmas)}
    meta = {
        "n_observations": len(obs),
        "weighted": weighted,
        "cost": best.cost,
        "residual_variance": best.residual_variance,
        "iterations": best.iterations,
    }
    if mode_meta:
        meta["mode"] = mode_meta
    return CalibrationModel(
        r_s_nm=r_s_nm,
        r_a_nm=float(theta[0]),
        alpha=float(theta[1]),
        beta=float(theta[2]),
        per_el=per_el,
        covariance=best.covariance,
        sigmas=sig,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# inversion


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-13) -> float:
    """Argmax of a unimodal fn over [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol * max(abs(a), 1.0):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def curve_maximum(model: CalibrationModel, el_ev: float) -> tuple:
    """(l_d, ratio) at the calibration curve's maximum for this excitation."""
    lo, hi = math.log(L_SEARCH_MIN), math.log(L_SEARCH_MAX)
    f = lambda u: eval_ratio(math.exp(u), model, el_ev)
    u_pk = _golden_max(f, lo, hi)
    l_pk = math.exp(u_pk)
    return l_pk, eval_ratio(l_pk, model, el_ev)


def _estimate(l_d, model, el_ev, branch, valid, reason):
    density = density_from_l_d(l_d)
    ci = (density, density)
    if valid and model.covariance is not None:
        ci = _inversion_ci(l_d, model, el_ev)
    return DensityEstimate(
        l_d_nm=float(l_d),
        density_cm3=float(density),
        ci_68=ci,
        branch=branch,
        valid=valid,
        reason=reason,
    )


def _inversion_ci(l_d, model, el_ev):
    """68% interval from the calibration covariance, via the implicit
    derivative dL/dtheta = -(df/dtheta)/(df/dL) and the cubic density law.
    """
    c_a, c_s = model.coefficients(el_ev)
    act, struct, d_act_dl, d_str_dl, d_act_dra = _ratio_terms(
        np.asarray(l_d), model.r_s_nm, model.r_a_nm
    )
    df_dl = float(c_a * d_act_dl + c_s * d_str_dl)
    names = model.parameter_order()
    grads = np.zeros(len(names))
    key = _el_key(el_ev)
    for i, name in enumerate(names):
        if name == "r_a":
            grads[i] = float(c_a * d_act_dra)
        elif name == f"c_a@{key:g}":
            grads[i] = float(act)
        elif name == f"c_s@{key:g}":
            grads[i] = float(struct)
    if df_dl == 0.0:
        return (density_from_l_d(l_d),) * 2
    dl_dtheta = -grads / df_dl
    dlogn_dtheta = -3.0 / float(l_d) * dl_dtheta
    var = float(dlogn_dtheta @ model.covariance @ dlogn_dtheta)
    s = math.sqrt(max(var, 0.0))
    n = density_from_l_d(l_d)
    return (n * math.exp(-s), n * math.exp(s))


def invert_ratio(
    ratio: float,
    model: CalibrationModel,
    el_ev: float,
    branch: Branch = Branch.LOW_DENSITY,
    rel_tol: float = 1e-10,
) -> DensityEstimate:
    """Density from a measured ratio, on the requested side of the curve
    maximum. Out-of-range ratios return an invalid estimate with a reason
    rather than a fabricated density.
    """
    branch = Branch(branch)
    if not math.isfinite(ratio) or ratio < 0:
        raise NoSolution(f"ratio must be non-negative, got {ratio}")
    f = lambda l: eval_ratio(l, model, el_ev)
    l_pk, f_pk = curve_maximum(model, el_ev)
    if ratio > f_pk:
        return _estimate(l_pk, model, el_ev, branch, False, "above maximum")
    if branch is Branch.LOW_DENSITY:
        lo, hi = l_pk, L_SEARCH_MAX
        f_far = f(hi)
        if ratio < f_far:
            return _estimate(hi, model, el_ev, branch, False, "below detection")
    else:
        lo, hi = L_SEARCH_MIN, l_pk
        f_far = f(lo)
        if ratio < f_far:
            return _estimate(lo, model, el_ev, branch, False, "below branch minimum")

    g_lo = f(lo) - ratio
    while (hi - lo) > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        g_mid = f(mid) - ratio
        if (g_lo <= 0.0) == (g_mid <= 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    l_sol = 0.5 * (lo + hi)
    return _estimate(l_sol, model, el_ev, branch, True, "ok")


# ---------------------------------------------------------------------------
# density vs fluence and the power law


def density_vs_fluence(fluences, model: CalibrationModel):
    """DensityEstimate per fluence, with 68% intervals propagated from the
    (alpha, beta) covariance through log density.
    """
    fluences = np.asarray(fluences, dtype=float)
    if np.any(~np.isfinite(fluences)) or np.any(fluences <= 0):
        raise DomainError("fluences must be positive and finite")
    names = model.parameter_order()
    cov_ab = None
    if model.covariance is not None:
        ia, ib = names.index("alpha"), names.index("beta")
        cov_ab = np.asarray(model.covariance)[np.ix_([ia, ib], [ia, ib])]
    out = []
    for f in fluences:
        l_d = l_d_from_fluence(float(f), model.alpha, model.beta)
        n = density_from_l_d(l_d)
        ci = (n, n)
        if cov_ab is not None:
            grad = np.array([-3.0 / model.alpha, 3.0 * math.log(f)])
            var = float(grad @ cov_ab @ grad)
            s = math.sqrt(max(var, 0.0))
            ci = (n * math.exp(-s), n * math.exp(s))
        out.append(
            DensityEstimate(
                l_d_nm=l_d,
                density_cm3=n,
                ci_68=ci,
                branch=None,
                valid=True,
                reason="ok",
            )
        )
    return out


@dataclass(frozen=True)
class PowerLawFit:
    """y = coefficient * x**exponent, fitted in log-log space."""

    coefficient: float
    exponent: float
    sigma_coefficient: float
    sigma_exponent: float


def fit_power_law(x, y) -> PowerLawFit:
    """Ordinary least squares on log y vs log x. Needs 3+ positive points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-D arrays of equal length")
    if x.size < 3:
        raise InsufficientData(f"power-law fit needs >= 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not (
        np.all(np.isfinite(x)) and np.all(np.isfinite(y))
    ):
        raise DomainError("power-law fit needs positive finite data")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    dof = x.size - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(design.T @ design)
    b0, gamma = float(coef[0]), float(coef[1])
    c = math.exp(b0)
    return PowerLawFit(
        coefficient=c,
        exponent=gamma,
        sigma_coefficient=c * math.sqrt(max(cov[0, 0], 0.0)),
        sigma_exponent=math.sqrt(max(cov[1, 1], 0.0)),
    )


# ---------------------------------------------------------------------------
# combining fitted areas into a ratio


def intensity_ratio(raman, pl=None, mode: RatioMode = RatioMode.COMBINED):
    """(ratio, sigma) from fitted standard peaks.

    raman and pl are StandardPeaks results. Peaks flagged missing
    contribute zero area; the E2g reference must be present.
    """
    mode = RatioMode(mode)
    e2g = raman.peak("E2g")
    if e2g.missing:
        raise DomainError("E2g reference peak is missing; ratio undefined")

    def area_sigma(source, identity):
        p = source.peak(identity)
        if p.missing:
            return 0.0, p.sigma_area
        return p.model.area, p.sigma_area

    num, var = 0.0, 0.0
    if mode in (RatioMode.COMBINED, RatioMode.D1_ONLY):
        a, s = area_sigma(raman, "D1")
        num += a
        var += s * s
    if mode in (RatioMode.COMBINED, RatioMode.PL_ONLY):
        if pl is None:
            raise DomainError(f"mode {mode.value} needs a photoluminescence fit")
        a, s = area_sigma(pl, "PL")
        num += a
        var += s * s
    ratio = num / e2g.model.area
    sigma = math.sqrt(
        var / e2g.model.area**2 + (ratio * e2g.sigma_area / e2g.model.area) ** 2
    )
    return ratio, sigma


# ---------------------------------------------------------------------------
# estimator-style wrapper


class CalibrationCurve(BaseEstimator):
    """Calibration fit with the scikit-learn estimator conventions.

    fit(observations) stores the CalibrationModel on model_; predict maps
    fluences to ratios at one excitation; invert maps a ratio to a
    DensityEstimate.
    """

    def __init__(
        self,
        r_s_nm: float = 1.0,
        seeds: CalibrationSeeds | None = None,
        max_iter: int = 500,
        cost_tol: float = 1e-10,
        step_tol: float = 1e-12,
    ):
        self.r_s_nm = r_s_nm
        self.seeds = seeds
        self.max_iter = max_iter
        self.cost_tol = cost_tol
        self.step_tol = step_tol

    def fit(self, X, y=None):
        self.model_ = fit_calibration(
            X,
            r_s_nm=self.r_s_nm,
            seeds=self.seeds,
            max_iter=self.max_iter,
            cost_tol=self.cost_tol,
            step_tol=self.step_tol,
        )
        return self

    def _require_fit(self):
        if not hasattr(self, "model_"):
            raise DomainError("CalibrationCurve used before fit")

    def predict(self, fluence, el_ev: float):
        self._require_fit()
        l_d = l_d_from_fluence(np.asarray(fluence, dtype=float), self.model_.alpha, self.model_.beta)
        return eval_ratio(l_d, self.model_, el_ev)

    def invert(self, ratio: float, el_ev: float, branch: Branch = Branch.LOW_DENSITY):
        self._require_fit()
        return invert_ratio(ratio, self.model_, el_ev, branch)

    def densities(self, fluences):
        self._require_fit()
        return density_vs_fluence(fluences, self.model_)
