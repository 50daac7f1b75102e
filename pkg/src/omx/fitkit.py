"""Least-squares fitting primitives.

A damped Gauss-Newton core (step-halving line search, bound projection,
column freezing for singular Jacobians) plus the concrete fits used by the
rest of the package: Lorentzian and Fano resonance lines, vacuum coupling
from linewidth-vs-photon-number data, and the bath heating model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Device, HeatingParams, cooperativity

__all__ = [
    "FitResult",
    "FanoModel",
    "lorentzian",
    "lorentzian_area",
    "fano",
    "gauss_newton",
    "fit_lorentzian",
    "fit_fano",
    "fit_g0_from_linewidths",
    "fit_heating_params",
    "result_to_json",
]

MAX_ITER = 200
STEP_TOL = 1e-10
COST_TOL = 1e-12


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``covariance`` rows/columns follow ``names`` and are reported only when
    the fit converged; ``params`` may additionally carry derived quantities.
    """

    params: dict[str, float]
    names: tuple[str, ...]
    covariance: np.ndarray | None
    residual_norm: float
    converged: bool
    iterations: int
    stderr: dict[str, float] = field(default_factory=dict)
    message: str = ""


@dataclass(frozen=True)
class FanoModel:
    """Asymmetric resonance line with asymmetry parameter ``q_fano``."""

    center: float  # rad/s
    width: float  # rad/s
    q_fano: float
    amplitude: float
    offset: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")


# --- model functions and analytic Jacobians ---


def lorentzian(x, center, fwhm, amplitude, offset):
    """offset + amplitude*(fwhm/2)^2 / ((x-center)^2 + (fwhm/2)^2)."""
    hw = fwhm / 2.0
    return offset + amplitude * hw**2 / ((x - center) ** 2 + hw**2)


def lorentzian_area(amplitude: float, fwhm: float) -> float:
    """Integral of the amplitude-form Lorentzian over the full line."""
    return math.pi * amplitude * fwhm / 2.0


def _lorentzian_jac(x, p):
    center, fwhm, amplitude, offset = p
    hw = fwhm / 2.0
    dx = x - center
    den = dx**2 + hw**2
    J = np.empty((x.size, 4))
    J[:, 0] = amplitude * hw**2 * 2.0 * dx / den**2
    # d/d(hw) = 2*A*hw*dx^2/den^2, times d(hw)/d(fwhm) = 1/2
    J[:, 1] = amplitude * hw * dx**2 / den**2
    J[:, 2] = hw**2 / den
    J[:, 3] = 1.0
    return J


def fano(x, center, width, q_fano, amplitude, offset):
    """offset + amplitude*(q*w/2 + (x-center))^2 / ((w/2)^2 + (x-center)^2)."""
    hw = width / 2.0
    dx = x - center
    return offset + amplitude * (q_fano * hw + dx) ** 2 / (hw**2 + dx**2)


def _fano_jac(x, p):
    center, width, q_fano, amplitude, offset = p
    hw = width / 2.0
    dx = x - center
    num = q_fano * hw + dx
    den = hw**2 + dx**2
    J = np.empty((x.size, 5))
    d_dx = amplitude * (2.0 * num * den - num**2 * 2.0 * dx) / den**2
    J[:, 0] = -d_dx
    J[:, 1] = amplitude * (2.0 * num * (q_fano * 0.5) * den - num**2 * hw) / den**2
    J[:, 2] = amplitude * 2.0 * num * hw / den
    J[:, 3] = num**2 / den
    J[:, 4] = 1.0
    return J


# --- Gauss-Newton core ---


def gauss_newton(
    residual_fn,
    jacobian_fn,
    x0,
    names: tuple[str, ...],
    bounds: tuple | None = None,
    max_iter: int = MAX_ITER,
    step_tol: float = STEP_TOL,
    cost_tol: float = COST_TOL,
) -> FitResult:
    """Damped Gauss-Newton with projection onto box bounds.

    Each iteration solves the linearized normal problem by column-scaled
    least squares, then halves the step until the cost does not increase.
    Jacobian columns whose norm collapses are frozen for that iteration
    (with a warning). Convergence: relative step < ``step_tol`` or relative
    cost change < ``cost_tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    lo = np.full(n, -np.inf) if bounds is None else np.asarray(bounds[0], dtype=float)
    hi = np.full(n, np.inf) if bounds is None else np.asarray(bounds[1], dtype=float)
    x = np.clip(x, lo, hi)

    r = residual_fn(x)
    cost = float(r @ r)
    converged = False
    message = "iteration cap reached"
    iterations = 0
    warned_freeze = False

    for iterations in range(1, max_iter + 1):
        J = np.asarray(jacobian_fn(x), dtype=float)
        col = np.sqrt((J**2).sum(axis=0))
        active = col > 1e-14 * max(col.max(), 1e-300)
        if not active.any():
            message = "all parameters frozen (zero Jacobian)"
            break
        if not active.all() and not warned_freeze:
            frozen = [names[i] for i in range(n) if not active[i]]
            warnings.warn(f"singular Jacobian: freezing parameter(s) {frozen}", stacklevel=2)
            warned_freeze = True
        Ja = J[:, active] / col[active]
        dx = np.zeros(n)
        dx[active] = np.linalg.lstsq(Ja, -r, rcond=None)[0] / col[active]

        alpha = 1.0
        x_try = x
        cost_try = cost
        while alpha > 2.0**-30:
            cand = np.clip(x + alpha * dx, lo, hi)
            r_cand = residual_fn(cand)
            c_cand = float(r_cand @ r_cand)
            if np.isfinite(c_cand) and c_cand <= cost:
                x_try, r, cost_try = cand, r_cand, c_cand
                break
            alpha *= 0.5
        else:
            message = "line search failed to find a descent step"
            break

        step = np.linalg.norm(x_try - x) / max(np.linalg.norm(x), 1e-300)
        dcost = abs(cost - cost_try) / max(cost, 1e-300)
        x, cost = x_try, cost_try
        if step < step_tol or dcost < cost_tol:
            converged = True
            message = "converged"
            break

    covariance = None
    stderr: dict[str, float] = {}
    if converged:
        J = np.asarray(jacobian_fn(x), dtype=float)
        col = np.sqrt((J**2).sum(axis=0))
        active = col > 1e-14 * max(col.max(), 1e-300)
        m, p = J.shape[0], int(active.sum())
        s2 = cost / (m - p) if m > p else 0.0
        covariance = np.zeros((n, n))
        if p:
            JtJ = J[:, active].T @ J[:, active]
            cov_a = s2 * np.linalg.pinv(JtJ)
            covariance[np.ix_(active, active)] = 0.5 * (cov_a + cov_a.T)
        stderr = {
            name: math.sqrt(max(covariance[i, i], 0.0)) for i, name in enumerate(names)
        }

    return FitResult(
        params=dict(zip(names, x.tolist())),
        names=names,
        covariance=covariance,
        residual_norm=math.sqrt(cost),
        converged=converged,
        iterations=iterations,
        stderr=stderr,
        message=message,
    )


# --- auto-initialization helpers ---


def _lorentzian_init(x: np.ndarray, y: np.ndarray):
    """Initial (center, fwhm, amplitude, offset) from the extremum, the
    half-max crossings nearest to it, and the median offset."""
    offset = float(np.median(y))
    iext = int(np.argmax(np.abs(y - offset)))
    amplitude = float(y[iext] - offset)
    half = offset + amplitude / 2.0

    def crossing(direction: int) -> float | None:
        i = iext
        while 0 < i < x.size - 1:
            j = i + direction
            if (y[i] - half) * (y[j] - half) <= 0 and y[i] != y[j]:
                t = (half - y[i]) / (y[j] - y[i])
                return float(x[i] + t * (x[j] - x[i]))
            i = j
        return None

    left = crossing(-1)
    right = crossing(+1)
    span = float(x[-1] - x[0])
    if left is not None and right is not None:
        fwhm = right - left
        center = 0.5 * (left + right)
    elif left is not None:
        fwhm = 2.0 * (x[iext] - left)
        center = float(x[iext])
    elif right is not None:
        fwhm = 2.0 * (right - x[iext])
        center = float(x[iext])
    else:
        fwhm = span / 6.0
        center = float(x[iext])
    fwhm = max(fwhm, span / (len(x) * 10.0))
    return center, fwhm, amplitude, offset


def _as_trace_arrays(trace):
    x = np.asarray(trace.freq, dtype=float)
    y = np.asarray(trace.values)
    if np.iscomplexobj(y):
        raise ValueError("resonance fits expect a real-valued trace")
    return x, y.astype(float)


def fit_lorentzian(trace, initial: dict | None = None) -> FitResult:
    """Fit offset + amplitude Lorentzian to a real trace.

    Parameters are auto-initialized from the data unless ``initial``
    overrides them (keys: center, fwhm, amplitude, offset).
    """
    x, y = _as_trace_arrays(trace)
    if x.size < 5:
        raise ValueError("need at least 5 samples")
    c0, w0, a0, off0 = _lorentzian_init(x, y)
    guess = {"center": c0, "fwhm": w0, "amplitude": a0, "offset": off0}
    if initial:
        guess.update(initial)
    names = ("center", "fwhm", "amplitude", "offset")
    p0 = [guess[k] for k in names]
    lo = np.array([-np.inf, guess["fwhm"] * 1e-9, -np.inf, -np.inf])
    hi = np.full(4, np.inf)
    result = gauss_newton(
        lambda p: lorentzian(x, *p) - y,
        lambda p: _lorentzian_jac(x, p),
        p0,
        names,
        bounds=(lo, hi),
    )
    result.params["area"] = lorentzian_area(result.params["amplitude"], result.params["fwhm"])
    return result


def fit_fano(trace, initial: dict | None = None) -> FitResult:
    """Fit the asymmetric (Fano) resonance line to a real trace.

    Auto-initialization reuses the Lorentzian seed for center/width, then
    screens a few asymmetry values, solving amplitude and offset linearly
    for each, and keeps the best before the nonlinear refinement.
    """
    x, y = _as_trace_arrays(trace)
    if x.size < 5:
        raise ValueError("need at least 5 samples")
    c0, w0, a_lor, off0 = _lorentzian_init(x, y)
    best = None
    for q0 in (-10.0, -3.0, -1.0, 1.0, 3.0, 10.0):
        hw = w0 / 2.0
        dx = x - c0
        basis = np.column_stack([(q0 * hw + dx) ** 2 / (hw**2 + dx**2), np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        res = float(((basis @ coef - y) ** 2).sum())
        if best is None or res < best[0]:
            best = (res, q0, float(coef[0]), float(coef[1]))
    _, q0, a0, offq = best
    guess = {"center": c0, "width": w0, "q_fano": q0, "amplitude": a0, "offset": offq}
    if initial:
        guess.update(initial)
    names = ("center", "width", "q_fano", "amplitude", "offset")
    p0 = [guess[k] for k in names]
    lo = np.array([-np.inf, guess["width"] * 1e-9, -np.inf, -np.inf, -np.inf])
    hi = np.full(5, np.inf)
    return gauss_newton(
        lambda p: fano(x, *p) - y,
        lambda p: _fano_jac(x, p),
        p0,
        names,
        bounds=(lo, hi),
    )


def fit_g0_from_linewidths(
    n_c,
    gamma_m,
    kappa: float,
    gamma_0: float,
    branch: str,
    sigma=None,
) -> FitResult:
    """Vacuum coupling from effective-linewidth data.

    Weighted linear fit of gamma_m = gamma_0 +/- (4 g0^2/kappa) n_c with the
    intercept fixed at the supplied intrinsic linewidth; the slope sign must
    match the declared branch (red: broadening, blue: narrowing). All rates
    are angular; ``sigma`` (same units as gamma_m) sets the weights.
    """
    x = np.asarray(n_c, dtype=float)
    y = np.asarray(gamma_m, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 points")
    if branch not in ("red", "blue"):
        raise ValueError("branch must be 'red' or 'blue'")
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    yc = y - gamma_0
    sxx = float((w * x * x).sum())
    slope = float((w * x * yc).sum()) / sxx
    if branch == "red" and slope <= 0:
        raise ValueError("red branch requires a positive linewidth-vs-photon slope")
    if branch == "blue" and slope >= 0:
        raise ValueError("blue branch requires a negative linewidth-vs-photon slope")
    resid = yc - slope * x
    dof = max(x.size - 1, 1)
    s2 = float((w * resid**2).sum()) / dof
    var_slope = s2 / sxx
    g0 = math.sqrt(abs(slope) * kappa) / 2.0
    sd_slope = math.sqrt(var_slope)
    sd_g0 = sd_slope * g0 / (2.0 * abs(slope))
    return FitResult(
        params={"slope": slope, "g0": g0},
        names=("slope",),
        covariance=np.array([[var_slope]]),
        residual_norm=math.sqrt(float((w * resid**2).sum())),
        converged=True,
        iterations=1,
        stderr={"slope": sd_slope, "g0": sd_g0},
        message="closed-form weighted linear fit",
    )


def fit_heating_params(
    n_c,
    n_m,
    device: Device,
    n_th0: float | None = 7.95,
) -> FitResult:
    """Fit the bath heating coefficients to occupancy-vs-photon-number data.

    ``n_th0`` fixes the base occupancy; pass None to float it as a fourth
    parameter. Coefficients are bounded below by zero.
    """
    x = np.asarray(n_c, dtype=float)
    y = np.asarray(n_m, dtype=float)
    free_n0 = n_th0 is None
    if x.size < (5 if free_n0 else 4):
        raise ValueError("not enough points for the number of free coefficients")

    coop = np.array([cooperativity(device, n) for n in x])
    damp = 1.0 + coop
    bath = y * damp  # observed bath occupancy
    order = np.argsort(x)
    xs, bs = x[order], bath[order]
    # seeding the free baseline at the lowest bath point would zero the
    # saturable term's seed; keep a little headroom for it instead
    n00 = 0.95 * float(bs[0]) if free_n0 else float(n_th0)
    excess = bs - n00
    # slope of the linear tail and saturated plateau seed the coefficients
    a_lin0 = max((excess[-1] - excess[-2]) / (xs[-1] - xs[-2]), 0.0)
    plateau = max(excess[-1] - a_lin0 * xs[-1], 1e-6)
    a_sat0 = max(excess[0] / xs[0] - a_lin0, 1e-6)
    b_sat0 = max(a_sat0 / plateau, 1e-6)

    if free_n0:
        names: tuple[str, ...] = ("n_th0", "alpha_sat", "beta_sat", "alpha_lin")
        p0 = [n00, a_sat0, b_sat0, a_lin0]
    else:
        names = ("alpha_sat", "beta_sat", "alpha_lin")
        p0 = [a_sat0, b_sat0, a_lin0]

    def unpack(p):
        if free_n0:
            return p[0], p[1], p[2], p[3]
        return n00, p[0], p[1], p[2]

    def residual(p):
        n0, a_s, b_s, a_l = unpack(p)
        return (n0 + a_s * x / (1.0 + b_s * x) + a_l * x) / damp - y

    def jacobian(p):
        n0, a_s, b_s, a_l = unpack(p)
        sat = x / (1.0 + b_s * x)
        cols = [sat / damp, -a_s * sat**2 / damp, x / damp]
        if free_n0:
            cols.insert(0, 1.0 / damp)
        return np.column_stack(cols)

    k = len(names)
    result = gauss_newton(
        residual,
        jacobian,
        p0,
        names,
        bounds=(np.zeros(k), np.full(k, np.inf)),
    )
    if not free_n0:
        result.params["n_th0"] = n00
    return result


def heating_params_from_fit(result: FitResult) -> HeatingParams:
    p = result.params
    return HeatingParams(
        n_th0=p["n_th0"],
        alpha_sat=p["alpha_sat"],
        beta_sat=p["beta_sat"],
        alpha_lin=p["alpha_lin"],
    )


def result_to_json(result: FitResult, angular: tuple[str, ...] = ()) -> dict:
    """Parameter map ``{name: {value, stderr}}`` plus convergence metadata.

    Parameters named in ``angular`` are converted rad/s -> Hz and suffixed
    ``_hz`` so files stay in cyclic units.
    """
    out: dict = {"converged": result.converged, "iterations": result.iterations,
                 "residual_norm": result.residual_norm, "params": {}}
    two_pi = 2.0 * math.pi
    for name, value in result.params.items():
        err = result.stderr.get(name)
        if name in angular:
            out["params"][name + "_hz"] = {
                "value": value / two_pi,
                "stderr": None if err is None else err / two_pi,
            }
        else:
            out["params"][name] = {"value": value, "stderr": err}
    return out
