"""Traveling-wave pair (profile, speed): Newton solver, oracles, bounds, standing wave."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.linalg import lu_factor, lu_solve

from .discretize import Discretization, Grid
from .errors import (ConvexConcaveError, DivisionError, FrontLostError,
                     MonotonicityError, NewtonDivergence, PositivityError)
from .model import BistableSystem, GainSpec, find_fixed_points


@dataclass(frozen=True)
class WaveSolution:
    """Profile/speed pair solving c u' + d u'' + S(u, w*g(u)) = 0 with u(0) = a."""

    system: BistableSystem
    disc: Discretization
    u: np.ndarray
    c: float
    u_x: np.ndarray
    u_xx: np.ndarray
    fixed_points: tuple[float, float, float]
    residual_norm: float

    @property
    def grid(self) -> Grid:
        return self.disc.grid


def _padded(disc: Discretization, m: int) -> Discretization:
    """Same spacing, m extra nodes each side; original nodes are a subset."""
    grid = disc.grid
    pad_grid = Grid(half_width=grid.half_width + m * grid.h, n=grid.n + 2 * m)
    return Discretization.make(disc.conv.kernel, pad_grid,
                               fft_threshold=disc.conv.fft_threshold)


def _phase_row(grid: Grid) -> np.ndarray:
    """Linear-interpolation weights picking the profile value at x = 0."""
    x = grid.x
    j = int(np.searchsorted(x, 0.0)) - 1
    j = min(max(j, 0), grid.n - 2)
    t = (0.0 - x[j]) / (x[j + 1] - x[j])
    row = np.zeros(grid.n)
    row[j] = 1.0 - t
    row[j + 1] = t
    return row


def _pde_residual(system: BistableSystem, disc: Discretization, u: np.ndarray,
                  c: float, a1: float, a2: float) -> np.ndarray:
    conv = disc.conv.apply(system.g(u), tail_left=float(system.g(a1)),
                           tail_right=float(system.g(a2)))
    return c * (disc.d1 @ u) + system.d * (disc.d2 @ u) + system.phi(u) + system.r_const * conv


def solve_wave(system: BistableSystem, disc: Discretization, init=None,
               tol: float = 1e-11, max_iter: int = 50,
               pad: float | None = None) -> WaveSolution:
    """Newton iteration on the coupled (profile, speed) system.

    Interior rows carry the discrete wave equation, the end rows pin the
    profile to the stable states, and the extra phase row u(0) = a removes the
    translation degeneracy; the speed is the extra unknown.

    The pins kink the tails at the closure-error scale, so the system is
    solved on a domain padded by ``pad`` (default five kernel scales, same
    spacing) and trimmed back; inside the requested domain the kink has
    decayed below the true tail derivative and the profile stays strictly
    increasing.
    """
    if pad is None:
        pad = 5.0 * float(getattr(system.kernel, "scale", 1.0))
    m = int(np.ceil(pad / disc.grid.h)) if pad > 0.0 else 0
    disc_s = _padded(disc, m) if m else disc
    a1, a, a2 = find_fixed_points(system)
    init_s = None
    if init is not None:
        v = disc.grid.check(init)
        init_s = np.concatenate([np.full(m, v[0]), v, np.full(m, v[-1])]) if m else v
    try:
        u_s, c, res_norm = _newton(system, disc_s, (a1, a, a2), init_s, tol, max_iter)
    except NewtonDivergence:
        if init is not None:
            raise
        evolved = _evolved_init(system, disc_s, (a1, a, a2))
        u_s, c, res_norm = _newton(system, disc_s, (a1, a, a2), evolved, tol, max_iter)
    sl = slice(m, m + disc.grid.n) if m else slice(None)
    u = u_s[sl].copy()
    u_x = (disc_s.d1 @ u_s)[sl].copy()
    u_xx = (disc_s.d2 @ u_s)[sl].copy()
    if u_x.min() <= 0.0:
        raise MonotonicityError(f"profile derivative dips to {u_x.min():.3e}")
    tail_err = max(abs(u[0] - a1), abs(u[-1] - a2))
    if tail_err > 1e-4 * (a2 - a1):
        raise NewtonDivergence(f"profile ends off the stable states by {tail_err:.2e}; "
                               "domain too short for the kernel scale")
    return WaveSolution(system=system, disc=disc, u=u, c=float(c),
                        u_x=u_x, u_xx=u_xx,
                        fixed_points=(a1, a, a2), residual_norm=float(res_norm))


def _newton(system, disc, fixed_points, init, tol, max_iter):
    grid = disc.grid
    a1, a, a2 = fixed_points
    n, x = grid.n, grid.x
    if init is None:
        width = max(getattr(system.kernel, "scale", 1.0), 1e-2)
        init = a1 + (a2 - a1) / (1.0 + np.exp(-x / width))
    u = grid.check(init).copy()
    c = 0.0
    phase = _phase_row(grid)

    def full_residual(u, c):
        r = _pde_residual(system, disc, u, c, a1, a2)
        out = np.empty(n + 1)
        out[1:n - 1] = r[1:n - 1]
        out[0] = u[0] - a1
        out[n - 1] = u[n - 1] - a2
        out[n] = phase @ u - a
        return out

    res = full_residual(u, c)
    res_norm = np.abs(res).max()
    for _ in range(max_iter):
        if res_norm < tol:
            break
        jac = np.zeros((n + 1, n + 1))
        core = (c * disc.d1 + system.d * disc.d2
                + np.diag(system.phi_p(u))
                + system.r_const * disc.conv.matrix * system.g_p(u)[None, :])
        jac[1:n - 1, :n] = core[1:n - 1, :]
        jac[1:n - 1, n] = (disc.d1 @ u)[1:n - 1]
        jac[0, 0] = 1.0
        jac[n - 1, n - 1] = 1.0
        jac[n, :n] = phase
        step = lu_solve(lu_factor(jac), -res)
        # cap the profile update so steep gains cannot throw the iterate out
        # of the bistable range on early iterations
        cap = 0.5 * (a2 - a1)
        alpha = min(1.0, cap / max(np.abs(step[:n]).max(), 1e-30))
        for _ in range(40):
            u_try = u + alpha * step[:n]
            c_try = c + alpha * step[n]
            res_try = full_residual(u_try, c_try)
            if np.abs(res_try).max() < res_norm or alpha < 1e-6:
                break
            alpha *= 0.5
        u, c, res = u_try, c_try, res_try
        res_norm = np.abs(res).max()
    if res_norm >= tol:
        raise NewtonDivergence(f"residual {res_norm:.3e} after {max_iter} iterations")
    return u, float(c), float(res_norm)


def _evolved_init(system, disc, fixed_points, t_relax: float = 12.0):
    """Fallback initial guess: evolve a step, then recenter the front at 0."""
    grid = disc.grid
    a1, a, a2 = fixed_points
    x = grid.x
    u = np.where(x < 0.0, a1, a2).astype(float)
    dt = 0.25 * min(1.0, grid.h ** 2 / (2.0 * system.d + 1e-12))
    for _ in range(int(np.ceil(t_relax / dt))):
        k1 = _pde_residual(system, disc, u, 0.0, a1, a2)
        k2 = _pde_residual(system, disc, u + 0.5 * dt * k1, 0.0, a1, a2)
        k3 = _pde_residual(system, disc, u + 0.5 * dt * k2, 0.0, a1, a2)
        k4 = _pde_residual(system, disc, u + dt * k3, 0.0, a1, a2)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    shift = _level_crossing(x, u, a, np.inf)
    return np.interp(x + shift, x, u, left=a1, right=a2)


def measure_speed_by_evolution(system: BistableSystem, disc: Discretization,
                               t_end: float, dt: float | None = None,
                               return_track: bool = False):
    """Independent speed oracle: explicit RK4 evolution of a step, front tracked.

    Tracks the level-a crossing by linear interpolation and fits its position
    against time (least squares) over the second half of the run.
    """
    grid = disc.grid
    a1, a, a2 = find_fixed_points(system)
    x = grid.x
    if dt is None:
        dt = 0.25 * min(1.0, grid.h ** 2 / (2.0 * system.d + 1e-12))
    n_steps = max(int(np.ceil(t_end / dt)), 8)
    u = np.where(x < 0.0, a1, a2)

    def rhs(v):
        return _pde_residual(system, disc, v, 0.0, a1, a2)

    times = np.empty(n_steps + 1)
    pos = np.empty(n_steps + 1)
    times[0], pos[0] = 0.0, _level_crossing(x, u, a, grid.half_width)
    for k in range(n_steps):
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * dt * k1)
        k3 = rhs(u + 0.5 * dt * k2)
        k4 = rhs(u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        times[k + 1] = (k + 1) * dt
        pos[k + 1] = _level_crossing(x, u, a, grid.half_width)
    half = n_steps // 2
    slope = np.polyfit(times[half:], pos[half:], 1)[0]
    if return_track:
        return float(slope), times, pos
    return float(slope)


def _level_crossing(x, u, level, half_width) -> float:
    s = u - level
    idx = np.where((s[:-1] <= 0.0) & (s[1:] > 0.0))[0]
    if idx.size == 0:
        raise FrontLostError("no level crossing found")
    j = idx[0]
    t = -s[j] / (s[j + 1] - s[j])
    p = x[j] + t * (x[j + 1] - x[j])
    if abs(p) > 0.5 * half_width:
        raise FrontLostError(f"front at {p:.3f} left the safe window")
    return float(p)


def wave_speed_formula(sol: WaveSolution, gain: GainSpec) -> float:
    """Closed-form speed for the neural-field case: int (x - F) / int u_x^2 F'(u)."""
    a1, _, a2 = sol.fixed_points
    num = quad(lambda s: s - float(gain(s)), a1, a2, limit=200)[0]
    den = sol.grid.inner(sol.u_x, sol.u_x, density=gain.deriv(sol.u))
    if abs(den) < 1e-14:
        raise DivisionError("speed formula denominator underflow")
    return float(num / den)


def speed_bounds(gain: GainSpec, sigma: float, fixed_points=None) -> tuple[float, float]:
    """Two-sided speed bounds for the exponential-kernel neural field (c > 0 case)."""
    if fixed_points is None:
        from .model import kernel_exponential, neural_field_system
        fixed_points = find_fixed_points(neural_field_system(kernel_exponential(sigma), gain))
    a1, a, a2 = fixed_points
    _check_convex_concave(gain, a1, a2)
    total = quad(lambda s: s - float(gain(s)), a1, a2, limit=200)[0]
    left = quad(lambda s: s - float(gain(s)), a1, a, limit=200)[0]
    right = quad(lambda s: float(gain(s)) - s, a, a2, limit=200)[0]
    if total <= 0.0:
        # zero/negative numerator: bounds degenerate, flagged by (0, 0)
        return (0.0, 0.0)
    lower = sigma / (np.sqrt(2.0) * (a2 - a1)) * total / np.sqrt(left)
    upper = 0.25 * sigma * total / right
    return float(lower), float(upper)


def _check_convex_concave(gain: GainSpec, a1: float, a2: float, n: int = 512):
    s = np.linspace(a1 - 0.5, a2 + 0.5, n)
    sgn = np.sign(gain.second(s))
    sgn = sgn[sgn != 0.0]
    changes = int(np.sum(sgn[1:] != sgn[:-1]))
    if changes > 1:
        raise ConvexConcaveError(f"gain curvature changes sign {changes} times")


@dataclass(frozen=True)
class StandingWave:
    """Associated zero-speed wave u0 = w*F(u) and its effective gain F0."""

    u0: np.ndarray
    u0_x: np.ndarray
    gain0: PchipInterpolator
    residual: float

    def __call__(self, s):
        return self.gain0(s)


def standing_wave_family(sol: WaveSolution, gain: GainSpec) -> StandingWave:
    """Build (u0, F0) with u0 = u - c u_x and F0 = F o u o (u0)^{-1}."""
    u0 = sol.u - sol.c * sol.u_x
    if np.any(np.diff(u0) <= 0.0):
        raise MonotonicityError("standing-wave profile is not strictly increasing")
    vals = gain(sol.u)
    gain0 = PchipInterpolator(u0, vals, extrapolate=False)
    a1, _, a2 = sol.fixed_points
    lo, hi = float(gain(a1)), float(gain(a2))

    def f0(s):
        s = np.asarray(s, dtype=float)
        out = gain0(np.clip(s, u0[0], u0[-1]))
        return np.where(s <= u0[0], lo, np.where(s >= u0[-1], hi, out))

    conv = sol.disc.conv.apply(f0(u0), tail_left=lo, tail_right=hi)
    residual = float(np.abs(u0 - conv).max())
    sw = StandingWave(u0=u0, u0_x=sol.disc.d1 @ u0, gain0=gain0, residual=residual)
    object.__setattr__(sw, "_f0", f0)
    return sw


def reconstruct_from_standing(sol: WaveSolution, sw: StandingWave, n_quad: int = 80) -> np.ndarray:
    """Exponential average u(x) = int_0^inf e^{-s} u0(x + c s) ds (Gauss-Laguerre)."""
    if sol.c == 0.0:
        return sw.u0.copy()
    nodes, wts = np.polynomial.laguerre.laggauss(n_quad)
    x = sol.grid.x
    a1, _, a2 = sol.fixed_points
    interp = PchipInterpolator(x, sw.u0, extrapolate=False)
    pts = x[:, None] + sol.c * nodes[None, :]
    vals = interp(np.clip(pts, x[0], x[-1]))
    vals = np.where(pts <= x[0], a1, np.where(pts >= x[-1], a2, vals))
    return vals @ wts
