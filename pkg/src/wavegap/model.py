"""Kernels, gain functions, bistable systems, and the frozen-wave coefficient fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfc, expit

from .errors import PositivityError, RootCountError, ShapeError, StabilityError

_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KernelSpec:
    """Even probability-density kernel with exact first two primitives.

    ``i0p``/``i1p`` are antiderivatives of w and z*w from -inf, used for
    product-integration convolution and analytic tail masses.  ``logderiv``
    returns the a.e. value of w_x/w with the convention w_x(0) := 0, while
    ``logderiv_sq`` fills the origin by continuity (for the two-sided
    exponential that limit is 1/sigma^2), which is what the contractivity
    functional integrates.
    """

    family: str
    scale: float
    w: Callable[[np.ndarray], np.ndarray]
    w_x: Callable[[np.ndarray], np.ndarray]
    logderiv: Callable[[np.ndarray], np.ndarray]
    logderiv_sq: Callable[[np.ndarray], np.ndarray]
    i0p: Callable[[np.ndarray], np.ndarray]
    i1p: Callable[[np.ndarray], np.ndarray]
    growth_moment: Callable[[np.ndarray, float], np.ndarray]
    w_max: float
    abs_wx_mass: float
    support_radius: float       # np.inf for globally supported families
    logderiv_sup: float         # sup over the support; np.inf if unbounded
    decay_rate: float           # exponential moments exist for |eta| < decay_rate

    def tail_mass(self, r) -> np.ndarray:
        """int_r^inf w(z) dz, elementwise."""
        return 1.0 - self.i0p(np.asarray(r, dtype=float))


def kernel_exponential(sigma: float) -> KernelSpec:
    """Two-sided exponential kernel w(z) = e^{-|z|/sigma} / (2 sigma)."""
    if sigma <= 0:
        raise PositivityError("kernel scale must be positive")
    s = float(sigma)

    def w(z):
        return np.exp(-np.abs(z) / s) / (2.0 * s)

    def w_x(z):
        z = np.asarray(z, dtype=float)
        return -np.sign(z) * np.exp(-np.abs(z) / s) / (2.0 * s * s)

    def logderiv(z):
        return -np.sign(np.asarray(z, dtype=float)) / s

    def logderiv_sq(z):
        return np.full_like(np.asarray(z, dtype=float), 1.0 / (s * s))

    def i0p(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0.0, 0.5 * np.exp(np.minimum(t, 0.0) / s),
                        1.0 - 0.5 * np.exp(-np.maximum(t, 0.0) / s))

    def i1p(t):
        t = np.asarray(t, dtype=float)
        neg = 0.5 * np.exp(np.minimum(t, 0.0) / s) * (t - s)
        pos = -0.5 * np.exp(-np.maximum(t, 0.0) / s) * (t + s)
        return np.where(t <= 0.0, neg, pos)

    def growth_moment(a, eta):
        # int_0^inf w(a + u) e^{eta u} du for a >= 0; finite iff eta < 1/sigma
        a = np.asarray(a, dtype=float)
        if eta * s >= 1.0:
            return np.full_like(a, np.inf)
        return np.exp(-a / s) / (2.0 * (1.0 - eta * s))

    return KernelSpec(family="exponential", scale=s, w=w, w_x=w_x,
                      logderiv=logderiv, logderiv_sq=logderiv_sq,
                      i0p=i0p, i1p=i1p, growth_moment=growth_moment,
                      w_max=1.0 / (2.0 * s), abs_wx_mass=1.0 / s,
                      support_radius=np.inf, logderiv_sup=1.0 / s,
                      decay_rate=1.0 / s)


def kernel_gaussian(scale: float) -> KernelSpec:
    """Gaussian kernel with standard deviation ``scale``."""
    if scale <= 0:
        raise PositivityError("kernel scale must be positive")
    s = float(scale)

    def w(z):
        z = np.asarray(z, dtype=float)
        return np.exp(-0.5 * (z / s) ** 2) / (s * _SQRT2PI)

    def w_x(z):
        z = np.asarray(z, dtype=float)
        return -(z / s ** 2) * w(z)

    def logderiv(z):
        return -np.asarray(z, dtype=float) / s ** 2

    def logderiv_sq(z):
        return (np.asarray(z, dtype=float) / s ** 2) ** 2

    def i0p(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * erfc(-t / (s * np.sqrt(2.0)))

    def i1p(t):
        return -s * s * w(t)

    def growth_moment(a, eta):
        a = np.asarray(a, dtype=float)
        # int_0^inf w(a+u) e^{eta u} du = e^{-eta a + eta^2 s^2/2} * Phi_c((a - eta s^2)/s)
        arg = (a - eta * s * s) / s
        return np.exp(-eta * a + 0.5 * (eta * s) ** 2) * 0.5 * erfc(arg / np.sqrt(2.0))

    return KernelSpec(family="gaussian", scale=s, w=w, w_x=w_x,
                      logderiv=logderiv, logderiv_sq=logderiv_sq,
                      i0p=i0p, i1p=i1p, growth_moment=growth_moment,
                      w_max=1.0 / (s * _SQRT2PI), abs_wx_mass=2.0 / (s * _SQRT2PI),
                      support_radius=np.inf, logderiv_sup=np.inf,
                      decay_rate=np.inf)


def kernel_bump(half_width: float) -> KernelSpec:
    """Compact-support bump w(z) = (15/16b) (1 - (z/b)^2)^2 on [-b, b]."""
    if half_width <= 0:
        raise PositivityError("kernel half-width must be positive")
    b = float(half_width)

    def w(z):
        u = np.clip(np.asarray(z, dtype=float) / b, -1.0, 1.0)
        return (15.0 / (16.0 * b)) * (1.0 - u * u) ** 2

    def w_x(z):
        z = np.asarray(z, dtype=float)
        u = z / b
        inside = np.abs(u) < 1.0
        val = (15.0 / (16.0 * b)) * 4.0 * u * (u * u - 1.0) / b
        return np.where(inside, val, 0.0)

    def logderiv(z):
        z = np.asarray(z, dtype=float)
        u = z / b
        inside = np.abs(u) < 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -4.0 * u / (b * (1.0 - u * u))
        return np.where(inside, np.nan_to_num(val, posinf=0.0, neginf=0.0), 0.0)

    def logderiv_sq(z):
        ld = logderiv(z)
        return ld * ld

    def i0p(t):
        u = np.clip(np.asarray(t, dtype=float) / b, -1.0, 1.0)
        g = (15.0 / 16.0) * (u - 2.0 * u ** 3 / 3.0 + u ** 5 / 5.0)
        return g + 0.5

    def i1p(t):
        u = np.clip(np.asarray(t, dtype=float) / b, -1.0, 1.0)
        return -(15.0 * b / 96.0) * (1.0 - u * u) ** 3

    def growth_moment(a, eta):
        a = np.asarray(a, dtype=float)
        # finite support: integrate w(a+u) e^{eta u} over u in [0, max(0, b-a)]
        nodes, wts = np.polynomial.legendre.leggauss(48)
        upper = np.maximum(b - a, 0.0)
        u = 0.5 * upper[..., None] * (nodes + 1.0)
        vals = w(a[..., None] + u) * np.exp(eta * u)
        return 0.5 * upper * (vals @ wts)

    return KernelSpec(family="bump", scale=b, w=w, w_x=w_x,
                      logderiv=logderiv, logderiv_sq=logderiv_sq,
                      i0p=i0p, i1p=i1p, growth_moment=growth_moment,
                      w_max=15.0 / (16.0 * b), abs_wx_mass=2.0 * 15.0 / (16.0 * b),
                      support_radius=b, logderiv_sup=np.inf,
                      decay_rate=np.inf)


def kernel_tabulated(xs, ws) -> KernelSpec:
    """Piecewise-linear kernel from samples, renormalized to unit mass.

    The samples define the kernel exactly (linear between nodes, zero outside),
    so the primitives below are exact and the convolution keeps its unit-mass
    property to machine precision.
    """
    xs = np.asarray(xs, dtype=float)
    ws = np.asarray(ws, dtype=float)
    if xs.ndim != 1 or xs.shape != ws.shape or xs.size < 3:
        raise ShapeError("kernel table needs matching 1-d arrays with >= 3 samples")
    order = np.argsort(xs)
    xs, ws = xs[order], ws[order]
    if np.any(ws < 0):
        raise PositivityError("kernel table has negative samples")
    seg = np.diff(xs)
    mass = float(np.sum(0.5 * (ws[1:] + ws[:-1]) * seg))
    if mass <= 0:
        raise PositivityError("kernel table has zero mass")
    ws = ws / mass
    # cumulative exact integrals of w and z*w at the sample nodes
    c0 = np.concatenate([[0.0], np.cumsum(0.5 * (ws[1:] + ws[:-1]) * seg)])
    zw = xs * ws
    c1 = np.concatenate([[0.0], np.cumsum(0.5 * (zw[1:] + zw[:-1]) * seg)])
    slopes = np.diff(ws) / seg

    def w(z):
        return np.interp(np.asarray(z, dtype=float), xs, ws, left=0.0, right=0.0)

    def w_x(z):
        z = np.asarray(z, dtype=float)
        idx = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, len(seg) - 1)
        out = slopes[idx]
        return np.where((z <= xs[0]) | (z >= xs[-1]), 0.0, out)

    def logderiv(z):
        vals = w(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = w_x(z) / vals
        return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)

    def logderiv_sq(z):
        ld = logderiv(z)
        return ld * ld

    def _cum(z, cum, vals_fn):
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, xs[0], xs[-1])
        idx = np.clip(np.searchsorted(xs, zc, side="right") - 1, 0, len(seg) - 1)
        t = zc - xs[idx]
        w0 = ws[idx]
        sl = slopes[idx]
        if vals_fn == 0:
            part = w0 * t + 0.5 * sl * t * t
        else:
            x0 = xs[idx]
            # int (x0+t')(w0 + sl t') dt'
            part = x0 * (w0 * t + 0.5 * sl * t * t) + 0.5 * w0 * t * t + sl * t ** 3 / 3.0
        return cum[idx] + part

    def i0p(t):
        return _cum(t, c0, 0)

    def i1p(t):
        return _cum(t, c1, 1)

    def growth_moment(a, eta):
        a = np.asarray(a, dtype=float)
        nodes, wts = np.polynomial.legendre.leggauss(64)
        upper = np.maximum(xs[-1] - a, 0.0)
        u = 0.5 * upper[..., None] * (nodes + 1.0)
        vals = w(a[..., None] + u) * np.exp(eta * u)
        return 0.5 * upper * (vals @ wts)

    ld_all = logderiv(0.5 * (xs[1:] + xs[:-1]))
    return KernelSpec(family="tabulated", scale=float(xs[-1]), w=w, w_x=w_x,
                      logderiv=logderiv, logderiv_sq=logderiv_sq,
                      i0p=i0p, i1p=i1p, growth_moment=growth_moment,
                      w_max=float(ws.max()), abs_wx_mass=float(np.sum(np.abs(np.diff(ws)))),
                      support_radius=float(max(abs(xs[0]), abs(xs[-1]))),
                      logderiv_sup=float(np.max(np.abs(ld_all))),
                      decay_rate=np.inf)


def kernel_from_csv(path) -> KernelSpec:
    data = np.loadtxt(path, delimiter=",", comments="#")
    if data.ndim != 2 or data.shape[1] != 2:
        raise ShapeError("kernel CSV must have two columns (x, w)")
    return kernel_tabulated(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class GainSpec:
    """Sigmoid gain F(u) = 1 / (1 + exp(-beta (u - theta)))."""

    beta: float
    theta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise PositivityError("gain steepness must be positive")

    def __call__(self, u):
        return expit(self.beta * (np.asarray(u, dtype=float) - self.theta))

    def deriv(self, u):
        f = self(u)
        return self.beta * f * (1.0 - f)

    def second(self, u):
        f = self(u)
        return self.beta ** 2 * f * (1.0 - f) * (1.0 - 2.0 * f)

    @property
    def inflection(self) -> float:
        return self.theta

    @property
    def sup_deriv(self) -> float:
        return 0.25 * self.beta

    @property
    def sup_second(self) -> float:
        # max of f(1-f)(1-2f) over f in (0,1) is 1/(6 sqrt 3)
        return self.beta ** 2 / (6.0 * np.sqrt(3.0))


@dataclass(frozen=True)
class BistableSystem:
    """Evolution law u_t = d u_xx + S(u, w * g(u)) with S(x, g) = phi(x) + r_const * g.

    Both shipped presets are affine in the nonlocal argument, which makes the
    coefficient fields exact: f = -phi'(u), r = r_const, q = g'(u).
    """

    name: str
    kernel: KernelSpec
    d: float
    r_const: float
    phi: Callable
    phi_p: Callable
    g: Callable
    g_p: Callable
    gain: GainSpec | None = None

    def s_total(self, u):
        """x -> S(x, g(x)), whose three zeros are the spatially uniform states."""
        u = np.asarray(u, dtype=float)
        return self.phi(u) + self.r_const * self.g(u)

    def s_total_p(self, u):
        u = np.asarray(u, dtype=float)
        return self.phi_p(u) + self.r_const * self.g_p(u)


def neural_field_system(kernel: KernelSpec, gain: GainSpec, d: float = 0.0) -> BistableSystem:
    """u_t = -u + w * F(u); S(x, g) = -x + g with g = F."""
    return BistableSystem(name="neural-field", kernel=kernel, d=d, r_const=1.0,
                          phi=lambda u: -np.asarray(u, dtype=float),
                          phi_p=lambda u: np.full_like(np.asarray(u, dtype=float), -1.0),
                          g=gain, g_p=gain.deriv, gain=gain)


def phase_transition_system(kernel: KernelSpec, lam: float, f_tilde: Callable,
                            f_tilde_p: Callable, d: float = 0.0,
                            name: str = "phase-transition") -> BistableSystem:
    """u_t = lam w*u - u + f_tilde(u); S(x, g) = lam g - x + f_tilde(x), g = id."""
    if lam <= 0:
        raise PositivityError("coupling lam must be positive")
    return BistableSystem(name=name, kernel=kernel, d=d, r_const=float(lam),
                          phi=lambda u: f_tilde(np.asarray(u, dtype=float)) - np.asarray(u, dtype=float),
                          phi_p=lambda u: f_tilde_p(np.asarray(u, dtype=float)) - 1.0,
                          g=lambda u: np.asarray(u, dtype=float),
                          g_p=lambda u: np.ones_like(np.asarray(u, dtype=float)))


def cubic_phase_transition_system(kernel: KernelSpec, amplitude: float = 0.05,
                                  d: float = 0.0) -> BistableSystem:
    """Cubic bistability u_t = w*u - u + mu (u - u^3) with states -1, 0, 1.

    The amplitude sets the tail stiffness: the fronts decay at the rate where
    the kernel transform reaches 1 + 2 mu, so mild values keep the tails
    resolvable on the default domain.
    """
    mu = float(amplitude)
    if mu <= 0:
        raise PositivityError("cubic amplitude must be positive")
    return phase_transition_system(kernel, 1.0,
                                   lambda u: mu * (u - u ** 3),
                                   lambda u: mu * (1.0 - 3.0 * u ** 2),
                                   d=d, name="phase-transition-cubic")


def find_fixed_points(system: BistableSystem, bracket=(-10.0, 10.0),
                      n_scan: int = 1024) -> tuple[float, float, float]:
    """Three zeros of x -> S(x, g(x)), sorted, with bistable sign pattern checked."""
    lo, hi = float(bracket[0]), float(bracket[1])
    xs = np.linspace(lo, hi, n_scan + 1)
    vals = system.s_total(xs)
    roots = []
    for i in range(n_scan):
        a, b = xs[i], xs[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            roots.append(_polish_root(system, a, b))
    if vals[-1] == 0.0:
        roots.append(xs[-1])
    roots = _dedupe(roots, tol=1e-8 * (hi - lo))
    if len(roots) != 3:
        raise RootCountError(f"expected 3 zeros on {bracket}, found {len(roots)}")
    a1, a, a2 = sorted(roots)
    d1, dm, d2 = (float(system.s_total_p(r)) for r in (a1, a, a2))
    if not (d1 < 0.0 and dm > 0.0 and d2 < 0.0):
        raise StabilityError(f"derivative signs ({d1:.3g}, {dm:.3g}, {d2:.3g}) not bistable")
    return float(a1), float(a), float(a2)


def _polish_root(system, a: float, b: float, tol: float = 1e-14, max_iter: int = 200) -> float:
    fa = float(system.s_total(a))
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        fm = float(system.s_total(mid))
        # one guarded Newton step from the midpoint
        dm = float(system.s_total_p(mid))
        if dm != 0.0:
            cand = mid - fm / dm
            if a < cand < b:
                fc = float(system.s_total(cand))
                if abs(fc) < abs(fm):
                    mid, fm = cand, fc
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
        if b - a < tol:
            break
    return 0.5 * (a + b)


def _dedupe(roots, tol):
    out = []
    for r in sorted(roots):
        if not out or r - out[-1] > tol:
            out.append(r)
    return out


@dataclass(frozen=True)
class CoefficientFields:
    """Grid samples of f, r, q for the frozen-wave operator, with cached bounds.

    q (and the local part of f) are evaluated as ratios of the same difference
    stencil applied to g(u) and u, so that the assembled operator annihilates
    the discrete profile derivative exactly; where the profile is flat the
    ratio falls back to the pointwise derivative.  The two agree to O(h^4).
    """

    f: np.ndarray
    r: np.ndarray
    q: np.ndarray

    @property
    def f_bounds(self):
        return float(self.f.min()), float(self.f.max())

    @property
    def r_bounds(self):
        return float(self.r.min()), float(self.r.max())

    @property
    def q_bounds(self):
        return float(self.q.min()), float(self.q.max())

    @property
    def m_sym(self) -> np.ndarray:
        """Symmetrizing density q/r of the static operator."""
        return self.q / self.r


def _stencil_ratio(d1: np.ndarray, composed: np.ndarray, u: np.ndarray,
                   fallback: np.ndarray) -> np.ndarray:
    du = d1 @ u
    dg = d1 @ composed
    guard = 1e-9 * np.max(np.abs(du))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = dg / du
    return np.where(np.abs(du) > guard, np.nan_to_num(ratio), fallback)


def coefficient_fields(system: BistableSystem, u_hat: np.ndarray,
                       d1: np.ndarray) -> CoefficientFields:
    """f = -d1S, r = d2S, q = g' sampled along the profile."""
    u_hat = np.asarray(u_hat, dtype=float)
    if np.any(np.diff(u_hat) <= 0):
        raise PositivityError("profile must be strictly increasing")
    f = -_stencil_ratio(d1, system.phi(u_hat), u_hat, system.phi_p(u_hat))
    q = _stencil_ratio(d1, system.g(u_hat), u_hat, system.g_p(u_hat))
    r = np.full_like(u_hat, system.r_const)
    if q.min() <= 0.0:
        raise PositivityError(f"q must be strictly positive (min {q.min():.3g})")
    if r.min() <= 0.0:
        raise PositivityError(f"r must be strictly positive (min {r.min():.3g})")
    return CoefficientFields(f=f, r=r, q=q)
