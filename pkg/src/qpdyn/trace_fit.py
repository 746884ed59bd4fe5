"""Four-parameter fits of qubit decay-rate traces.

The measured qubit decay rate after a QP injection pulse follows

    Gamma(t) = A (1 - r') / (exp(t/tau_ss) - r') + Gamma0,

where A = C x_i is the injected density expressed as a rate, r' the shape
parameter, tau_ss the tail time constant, and Gamma0 the background rate.
fit_gamma_trace performs the nonlinear least-squares fit; extract_rates
maps the fitted parameters onto the physical rate triple with bounds;
fit_t1_vs_tau performs the steady-state linear fit

    1/T1 = C g tau_ss + Gamma_ex

whose slope reveals the stray generation rate g.

Fitting is a damped Gauss-Newton iteration in the transformed coordinates
(log A, logit r', log tau_ss, log(Gamma0 + 1e-3)) so every iterate is
strictly feasible; default weighting is relative (residuals of log Gamma)
because traces span several decades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ExtractionBounds, SolutionParams, extraction_bounds
from .errors import (DegenerateTraceError, InsufficientDataError,
                     InsufficientSpreadError, InvalidParameterError,
                     NonConvergenceError)

_GAMMA0_SHIFT = 1e-3  # 1/s, shift inside log(Gamma0 + eps)

DEFAULT_T_MIN = 200e-6  # s, early-time truncation of trace fits


@dataclass(frozen=True)
class DecayTrace:
    """A measured (or synthetic) Gamma(t) trace.

    t     : sample times, s, strictly increasing
    gamma : decay rates, 1/s, all positive
    sigma : optional per-sample uncertainties, 1/s, all positive
    """

    t: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "gamma", gamma)
        if t.ndim != 1 or gamma.shape != t.shape:
            raise InvalidParameterError("t and gamma must be 1-D and equal length")
        if t.size and np.any(np.diff(t) <= 0):
            raise InvalidParameterError("t must be strictly increasing")
        if np.any(gamma <= 0):
            raise InvalidParameterError("gamma must be positive")
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float)
            object.__setattr__(self, "sigma", sigma)
            if sigma.shape != t.shape:
                raise InvalidParameterError("sigma must match t in length")
            if np.any(sigma <= 0):
                raise InvalidParameterError("sigma must be positive")

    @property
    def n(self) -> int:
        return self.t.size

    def truncated(self, t_min: float) -> "DecayTrace":
        keep = self.t >= t_min
        return DecayTrace(t=self.t[keep], gamma=self.gamma[keep],
                          sigma=None if self.sigma is None else self.sigma[keep],
                          label=self.label)


@dataclass(frozen=True)
class FitResult:
    """Optimum of the four-parameter decay fit.

    covariance is the 4x4 matrix over (amplitude, r_prime, tau_ss, gamma0);
    residual_norm is the RMS residual in the weighting used (dimensionless).
    """

    amplitude: float
    r_prime: float
    tau_ss: float
    gamma0: float
    covariance: np.ndarray = field(
        default_factory=lambda: np.zeros((4, 4)))
    residual_norm: float = 0.0
    n_used: int = 0
    t_min_applied: float = 0.0

    def __post_init__(self):
        if not (self.tau_ss > 0):
            raise InvalidParameterError(f"tau_ss must be > 0, got {self.tau_ss}")
        if not (0 <= self.r_prime < 1):
            raise InvalidParameterError(
                f"r_prime must lie in [0, 1), got {self.r_prime}")
        if not (self.gamma0 >= 0):
            raise InvalidParameterError(
                f"gamma0 must be >= 0, got {self.gamma0}")
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "covariance", cov)
        if cov.shape != (4, 4):
            raise InvalidParameterError("covariance must be 4x4")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-300):
            raise InvalidParameterError("covariance must be symmetric")
        if np.linalg.eigvalsh(0.5 * (cov + cov.T)).min() < -1e-10 * max(
                1.0, float(np.abs(cov).max())):
            raise InvalidParameterError(
                "covariance must be positive semidefinite")

    @classmethod
    def from_params(cls, amplitude, r_prime, tau_ss, gamma0) -> "FitResult":
        return cls(amplitude=amplitude, r_prime=r_prime, tau_ss=tau_ss,
                   gamma0=gamma0)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))


@dataclass(frozen=True)
class SteadyStatePoint:
    """One (tau_ss, 1/T1) point of the steady-state linear fit."""

    tau_ss: float
    inv_t1: float
    sigma_inv_t1: float | None = None

    def __post_init__(self):
        if not (self.tau_ss > 0 and self.inv_t1 > 0):
            raise InvalidParameterError("tau_ss and inv_t1 must be positive")
        if self.sigma_inv_t1 is not None and not (self.sigma_inv_t1 > 0):
            raise InvalidParameterError("sigma_inv_t1 must be positive")


def gamma_model(t, f: FitResult):
    """Evaluate the decay model; equals amplitude + gamma0 at t = 0.

    The denominator is computed as (1 - r') + expm1(t/tau_ss), exact at
    t = 0 and stable as r' -> 1.
    """
    ts = np.asarray(t, dtype=float)
    one_minus = 1.0 - f.r_prime
    out = f.amplitude * one_minus / (one_minus + np.expm1(ts / f.tau_ss)) \
        + f.gamma0
    return float(out) if np.isscalar(t) else out


def _model_and_jac(t: np.ndarray, theta: np.ndarray):
    """Model values and 4-column Jacobian wrt (A, r', tau, Gamma0)."""
    amp, rp, tau, g0 = theta
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        expo = np.exp(t / tau)
        e = expo - 1.0  # expm1, but expo reused below
        den = (1.0 - rp) + e
        m = amp * (1.0 - rp) / den + g0
        jac = np.empty((t.size, 4))
        jac[:, 0] = (1.0 - rp) / den
        jac[:, 1] = -amp * e / den**2
        jac[:, 2] = amp * (1.0 - rp) * t * expo / (tau**2 * den**2)
        jac[:, 3] = 1.0
    return m, jac


def _sigmoid(v: float) -> float:
    # overflow-safe logistic; large |v| saturates instead of raising
    if v >= 0:
        return 1.0 / (1.0 + math.exp(-min(v, 745.0)))
    ev = math.exp(max(v, -745.0))
    return ev / (1.0 + ev)


def _to_theta(u: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.array([float(np.exp(u[0])),
                         _sigmoid(u[1]),
                         float(np.exp(u[2])),
                         float(np.exp(u[3])) - _GAMMA0_SHIFT])


def _to_u(theta) -> np.ndarray:
    amp, rp, tau, g0 = theta
    rp = min(max(rp, 1e-12), 1.0 - 1e-12)
    return np.array([math.log(amp), math.log(rp / (1.0 - rp)),
                     math.log(tau), math.log(g0 + _GAMMA0_SHIFT)])


def damped_gauss_newton(resid_jac, u0: np.ndarray, max_iter: int = 500,
                        step_tol: float = 1e-10, cost_tol: float = 1e-12):
    """Damped Gauss-Newton least-squares minimizer.

    resid_jac(u) must return (residuals, Jacobian).  The damping factor
    follows a Levenberg-Marquardt schedule on the scaled normal equations;
    iteration stops when the relative parameter step falls below step_tol
    or the relative cost decrease below cost_tol.  Returns
    (u, cost_history); the history is non-increasing by construction.
    """
    u = np.asarray(u0, dtype=float).copy()
    res, jac = resid_jac(u)
    cost = 0.5 * float(res @ res)
    history = [cost]
    lam = 1e-3
    for _ in range(max_iter):
        jtj = jac.T @ jac
        jtr = jac.T @ res
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = max(diag.max(), 1e-300)
        accepted = False
        while lam <= 1e14:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None and np.all(np.isfinite(delta)):
                u_new = u + delta
                res_new, jac_new = resid_jac(u_new)
                cost_new = 0.5 * float(res_new @ res_new)
                if math.isfinite(cost_new) and cost_new <= cost:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            # no descent direction survives heavy damping: at a minimum
            return u, history
        step_rel = float(np.max(np.abs(delta) / (1.0 + np.abs(u))))
        decrease_rel = (cost - cost_new) / max(cost, 1e-300)
        u, res, jac, cost = u_new, res_new, jac_new, cost_new
        history.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if step_rel < step_tol or decrease_rel < cost_tol:
            return u, history
    raise NonConvergenceError(
        f"fit did not converge in {max_iter} iterations",
        best_params=_to_theta(u), best_cost=cost)


def _initial_guess(t: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Default starting point: background from the floor, tail slope for tau."""
    g0 = float(gamma.min())
    amp = max(float(gamma[0] - g0), 1e-3 * g0, 1e-30)
    span = t[-1] - t[0]
    tail = slice(2 * t.size // 3, None)
    yt = gamma[tail] - g0 + max(1e-6 * g0, 1e-30)
    tt = t[tail]
    ok = yt > 0
    tau = span
    if ok.sum() >= 2:
        slope = np.polyfit(tt[ok], np.log(yt[ok]), 1)[0]
        if slope < 0:
            tau = -1.0 / slope
    tau = min(max(tau, span / t.size), 50.0 * span)
    return _to_u((amp, 0.5, tau, g0))


def fit_gamma_trace(trace: DecayTrace, t_min: float = DEFAULT_T_MIN,
                    weighting: str = "relative",
                    guess: FitResult | None = None,
                    max_iter: int = 500,
                    full_output: bool = False):
    """Least-squares fit of a decay trace to the four-parameter model.

    Samples with t < t_min are excluded (diffusion transients); at least 6
    must remain.  weighting is 'relative' (log-residuals, the default),
    'absolute', or 'sigma' (per-sample uncertainties, which the trace must
    carry).  The fit is deterministic given identical inputs and guess.

    With full_output=True returns (FitResult, info) where info carries the
    cost history and iteration count.
    """
    cut = trace.truncated(t_min)
    t, gamma = cut.t, cut.gamma
    if t.size < 6:
        raise InsufficientDataError(
            f"need >= 6 samples after t_min cut, have {t.size}")
    spread = float(gamma.max() - gamma.min())
    if cut.sigma is not None and spread <= 4.0 * float(np.median(cut.sigma)):
        raise DegenerateTraceError(
            "trace is constant within noise; only gamma0 is identifiable "
            f"(spread {spread:.3g} vs median sigma {np.median(cut.sigma):.3g})")
    if spread <= 1e-9 * float(gamma.max()):
        raise DegenerateTraceError(
            "trace is constant; only gamma0 is identifiable")
    if weighting not in ("relative", "absolute", "sigma"):
        raise InvalidParameterError(
            f"weighting must be relative|absolute|sigma, got {weighting!r}")
    if weighting == "sigma" and cut.sigma is None:
        raise InvalidParameterError("sigma weighting requires trace.sigma")

    def resid_jac(u):
        theta = _to_theta(u)
        m, jac_theta = _model_and_jac(t, theta)
        with np.errstate(all="ignore"):
            # chain rule to the transformed coordinates
            tscale = np.array([theta[0], theta[1] * (1.0 - theta[1]),
                               theta[2], theta[3] + _GAMMA0_SHIFT])
            jac_u = jac_theta * tscale
            if weighting == "relative":
                m_safe = np.maximum(m, 1e-300)
                return np.log(m_safe) - np.log(gamma), jac_u / m_safe[:, None]
            if weighting == "sigma":
                w = 1.0 / cut.sigma
                return (m - gamma) * w, jac_u * w[:, None]
            return m - gamma, jac_u

    if guess is not None and not (guess.amplitude > 0):
        raise InvalidParameterError(
            f"guess.amplitude must be > 0, got {guess.amplitude}")
    u0 = _initial_guess(t, gamma) if guess is None else _to_u(
        (guess.amplitude, guess.r_prime, guess.tau_ss, guess.gamma0))
    u, history = damped_gauss_newton(resid_jac, u0, max_iter=max_iter)
    theta = _to_theta(u)
    theta[3] = max(theta[3], 0.0)

    # covariance in original parameters from the weighted Jacobian
    m, jac_theta = _model_and_jac(t, theta)
    if weighting == "relative":
        jac_w = jac_theta / np.maximum(m, 1e-300)[:, None]
        res_w = np.log(np.maximum(m, 1e-300)) - np.log(gamma)
    elif weighting == "sigma":
        jac_w = jac_theta / cut.sigma[:, None]
        res_w = (m - gamma) / cut.sigma
    else:
        jac_w = jac_theta
        res_w = m - gamma
    rss = float(res_w @ res_w)
    dof = t.size - 4
    scale = 1.0 if weighting == "sigma" else rss / dof
    _, sv, vt = np.linalg.svd(jac_w, full_matrices=False)
    good = sv > sv[0] * 1e-13 if sv.size else sv > 0
    inv_s2 = np.zeros_like(sv)
    inv_s2[good] = 1.0 / sv[good] ** 2
    cov = (vt.T * inv_s2) @ vt * scale
    cov = 0.5 * (cov + cov.T)

    if weighting == "absolute":
        resid_norm = math.sqrt(rss / t.size) / math.sqrt(
            float(gamma @ gamma) / t.size)
    else:
        resid_norm = math.sqrt(rss / t.size)
    result = FitResult(amplitude=theta[0], r_prime=theta[1], tau_ss=theta[2],
                       gamma0=theta[3], covariance=cov,
                       residual_norm=resid_norm, n_used=int(t.size),
                       t_min_applied=float(t_min))
    if full_output:
        return result, {"cost_history": history, "n_iterations": len(history) - 1}
    return result


@dataclass(frozen=True)
class ExtractedRates:
    """Physical rates from a FitResult, with bounds from the unknown x0.

    Only an upper bound x0 <= gamma0/C exists, so s and g come as ranges:
    s in [s_min, s_max] and g in [0, g_max].  g_bound is the unconditional
    bound 1/(4 r tau_ss^2); g_max additionally respects x0 <= gamma0/C.
    """

    x_i: float
    x_i_sigma: float
    x0_max: float
    r: float
    r_sigma: float
    s_min: float
    s_max: float
    s_min_sigma: float
    s_max_sigma: float
    g_max: float
    g_bound: float
    bounds: ExtractionBounds


def extract_rates(f: FitResult, coupling: float) -> ExtractedRates:
    """Map fitted parameters to (r, s-range, g-range) with propagated errors."""
    if not (coupling > 0):
        raise InvalidParameterError(f"coupling must be > 0, got {coupling}")
    amp, rp, tau, g0 = f.amplitude, f.r_prime, f.tau_ss, f.gamma0
    cov = f.covariance
    x_i = amp / coupling
    x0_max = g0 / coupling
    p = SolutionParams(x_i=x_i, r_prime=rp, tau_ss=tau, x0=x0_max)
    bounds = extraction_bounds(p, gamma0=g0, coupling=coupling)

    ratio = rp / (1.0 - rp)
    r = ratio / (tau * x_i)
    grad_r = np.array([-r / amp, 1.0 / ((1.0 - rp) ** 2 * tau * x_i),
                       -r / tau, 0.0])
    r_sigma = math.sqrt(max(float(grad_r @ cov @ grad_r), 0.0))

    # s_max = 1/tau; s_min = (1/tau)(1 - 2 ratio g0 / amp), clamped at 0
    grad_smax = np.array([0.0, 0.0, -1.0 / tau**2, 0.0])
    s_max_sigma = math.sqrt(max(float(grad_smax @ cov @ grad_smax), 0.0))
    if rp == 0:
        s_min_sigma = s_max_sigma
    else:
        q = 2.0 * ratio * g0 / amp
        grad_smin = np.array([
            q / (amp * tau),
            -2.0 * g0 / (amp * tau * (1.0 - rp) ** 2),
            -(1.0 - q) / tau**2,
            -2.0 * ratio / (amp * tau)])
        s_min_sigma = math.sqrt(max(float(grad_smin @ cov @ grad_smin), 0.0))

    # g(x0) grows on [0, x0_peak]; the reachable maximum caps at x0_max
    if rp == 0:
        g_max = x0_max / tau
    else:
        x0_peak = (1.0 - rp) * x_i / (2.0 * rp)
        x0_at = min(x0_max, x0_peak)
        g_max = x0_at / tau * (1.0 - ratio * x0_at / x_i)
    return ExtractedRates(
        x_i=x_i, x_i_sigma=math.sqrt(max(cov[0, 0], 0.0)) / coupling,
        x0_max=x0_max, r=r, r_sigma=r_sigma,
        s_min=bounds.s_min, s_max=bounds.s_max,
        s_min_sigma=s_min_sigma, s_max_sigma=s_max_sigma,
        g_max=g_max, g_bound=bounds.g_max, bounds=bounds)


@dataclass(frozen=True)
class T1TauFit:
    """Result of the steady-state line fit 1/T1 = C g tau_ss + Gamma_ex."""

    g: float
    g_sigma: float
    gamma_ex: float
    gamma_ex_sigma: float
    n_points: int


def fit_t1_vs_tau(points, coupling: float) -> T1TauFit:
    """Weighted linear regression of 1/T1 against tau_ss.

    Needs at least 3 points whose tau_ss values span a factor >= 3.
    slope/C is the generation rate g; the intercept is Gamma_ex.
    """
    pts = list(points)
    if len(pts) < 3:
        raise InsufficientDataError(
            f"need >= 3 steady-state points, have {len(pts)}")
    tau = np.array([p.tau_ss for p in pts])
    y = np.array([p.inv_t1 for p in pts])
    if tau.max() / tau.min() < 3.0:
        raise InsufficientSpreadError(
            f"tau_ss spans only a factor {tau.max() / tau.min():.2f}; "
            "need >= 3 for a stable slope")
    sigmas = [p.sigma_inv_t1 for p in pts]
    have_sigma = all(s is not None for s in sigmas)
    w = 1.0 / np.array(sigmas, dtype=float) ** 2 if have_sigma \
        else np.ones_like(y)
    sw = w.sum()
    tbar = float(w @ tau) / sw
    ybar = float(w @ y) / sw
    stt = float(w @ (tau - tbar) ** 2)
    slope = float(w @ ((tau - tbar) * (y - ybar))) / stt
    intercept = ybar - slope * tbar
    resid = y - slope * tau - intercept
    if have_sigma:
        scale = 1.0
    else:
        dof = max(len(pts) - 2, 1)
        scale = float(w @ resid**2) / dof
    slope_sigma = math.sqrt(scale / stt)
    intercept_sigma = math.sqrt(scale * (1.0 / sw + tbar**2 / stt))
    return T1TauFit(g=slope / coupling, g_sigma=slope_sigma / coupling,
                    gamma_ex=intercept, gamma_ex_sigma=intercept_sigma,
                    n_points=len(pts))


def synth_trace(f: FitResult, t_grid, noise_rel: float,
                seed: int) -> DecayTrace:
    """Synthetic trace: model values with multiplicative Gaussian noise.

    Gamma_k = model(t_k) * (1 + eps_k), eps_k iid normal(0, noise_rel),
    drawn from a counter-based Philox generator so identical seeds give
    bit-identical traces.  sigma is set to model * noise_rel (omitted when
    noise_rel = 0).
    """
    if noise_rel < 0:
        raise InvalidParameterError(f"noise_rel must be >= 0, got {noise_rel}")
    t = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise InvalidParameterError("t_grid must be strictly increasing")
    m = gamma_model(t, f)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if noise_rel == 0:
        return DecayTrace(t=t, gamma=m.copy(), sigma=None, label="synthetic")
    rng = np.random.Generator(np.random.Philox(seed))
    gamma = m * (1.0 + noise_rel * rng.standard_normal(t.size))
    if np.any(gamma <= 0):
        raise InvalidParameterError(
            "noise realization produced non-positive Gamma; lower noise_rel")
    return DecayTrace(t=t, gamma=gamma, sigma=m * noise_rel,
                      label="synthetic")
