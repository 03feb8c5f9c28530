"""Engineered counterfactual clock: spectral amplitudes, coupling, probabilities and errors.

Conventions: t1 is the tick spacing, T0 = (N_T + 1) t1 the period, and the
flag theta_hat is -1 for a single tick and +1 otherwise.  Spectral integrals
are written in the dimensionless variable y = E t1, which is why N and c0
depend only on (sigma, N_T, x0).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, linalg, optimize, special

TAIL_WEIGHT = 1e-18
PANEL_EPSREL = 1e-10
PANEL_EPSABS = 1e-14
GRID_POINTS = 721


class QuadratureError(ArithmeticError):
    """An integral failed to converge or a grid was under-resolved."""


@dataclass(frozen=True)
class EngineeredParams:
    sigma: float = 0.019
    n_ticks: int = 1
    x0: int = 1
    theta: float = math.pi / 4
    t1: float = 1.0
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.n_ticks < 1 or self.x0 < 1:
            raise ValueError("n_ticks and x0 must be positive integers")
        if not self.t1 > 0:
            raise ValueError("t1 must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def theta_flag(self) -> int:
        return -1 if self.n_ticks == 1 else 1

    @property
    def period(self) -> float:
        return (self.n_ticks + 1) * self.t1

    @property
    def comb_range(self) -> tuple[int, int]:
        """First and last copy index of the top-hat comb inside G_sigma."""
        return -(self.theta_flag + 1) // 2, self.x0 - 1

    @property
    def copies(self) -> int:
        """K = (N_T + 1)(x0 + (theta_hat + 1)/2), the Dirichlet order of the coupling kernel."""
        a, b = self.comb_range
        return (self.n_ticks + 1) * (b - a + 1)

    @property
    def ymax(self) -> float:
        """Cutoff where the Gaussian weight exp(-2 (pi N_T sigma y)^2) drops below 1e-18."""
        return math.sqrt(-math.log(TAIL_WEIGHT) / 2.0) / (math.pi * self.n_ticks * self.sigma)

    def with_theta(self, theta: float) -> "EngineeredParams":
        return replace(self, theta=theta)


@dataclass(frozen=True)
class EngineeredDerived:
    N: float
    c0: float
    A1_over_N_sq: float
    P_cf: float
    A2: float
    A3: float


# Smoothed top hat and its comb


def g0(params: EngineeredParams, t):
    """G_{0,sigma}: unit top hat of width t1 centred at 0, edges smoothed by erf."""
    u = np.asarray(t, dtype=float) / params.t1
    w = math.sqrt(2.0) * params.sigma
    return 0.5 * (special.erf((u + 0.5) / w) - special.erf((u - 0.5) / w))


def g_sigma(params: EngineeredParams, x):
    a, b = params.comb_range
    shift = params.period / params.n_ticks
    return sum(g0(params, np.asarray(x, dtype=float) - q * shift) for q in range(a, b + 1))


def _overlap_argument(params: EngineeredParams, l: int, t):
    return (np.asarray(t, dtype=float) - (params.theta_flag * l + 1) * params.t1) / params.n_ticks - params.t1 / 2


def overlap_G(params: EngineeredParams, l: int, t, N: float | None = None):
    """<x~_l | x-_l(t)> = G_sigma((t - (theta_hat l + 1) t1)/N_T - t1/2) / N."""
    if not 0 <= l <= params.n_ticks:
        raise IndexError(f"tick index {l} outside 0..{params.n_ticks}")
    if N is None:
        N = normalization_N(params)
    return g_sigma(params, _overlap_argument(params, l, t)) / N


def ideal_delta(params: EngineeredParams, l: int, t):
    """0 inside the windows [l t1 + q T0, (l+1) t1 + q T0), 1 elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    for q in range(params.x0):
        lo = l * params.t1 + q * params.period
        out = np.where((t >= lo) & (t < lo + params.t1), 0.0, out)
    return out


def _edge_times(params: EngineeredParams, l: int) -> list[float]:
    """Times where G_sigma of the l-th overlap switches, for quadrature breakpoints."""
    a, b = params.comb_range
    base = (params.theta_flag * l + 1) * params.t1 + params.n_ticks * params.t1 / 2
    out = []
    for q in range(a, b + 1):
        for sgn in (-1, 1):
            out.append(base + sgn * params.n_ticks * params.t1 / 2 + q * params.period)
    return sorted(out)


# Stable kernels


def dirichlet(k: int, d: int, y):
    """sin(pi k y) / sin(pi d y) with removable singularities filled in.

    Near zeros of the denominator the summed-cosine form is used when k/d is
    an integer n: sin(n x)/sin(x) = sum_j cos((n - 1 - 2j) x).  Otherwise the
    ratio of derivatives is used.
    """
    y = np.asarray(y, dtype=float)
    den = np.sin(math.pi * d * y)
    small = np.abs(den) < 1e-8
    safe = np.where(small, 1.0, den)
    out = np.sin(math.pi * k * y) / safe
    if np.any(small):
        ys = y[small] if y.ndim else y
        if k % d == 0:
            n = k // d
            x = math.pi * d * ys
            val = sum(np.cos((n - 1 - 2 * j) * x) for j in range(n))
        else:
            val = (k * np.cos(math.pi * k * ys)) / (d * np.cos(math.pi * d * ys))
        if y.ndim:
            out = out.copy()
            out[small] = val
        else:
            out = val
    return out


def _sinc(x):
    """sin(pi x) / (pi x)."""
    return np.sinc(x)


def _n_kernel(params: EngineeredParams, y):
    nt = params.n_ticks
    return np.exp(-2 * (math.pi * nt * params.sigma * y) ** 2) * _sinc(nt * y) * dirichlet(params.copies, nt + 1, y)


def _c0_kernel(params: EngineeredParams, y):
    nt = params.n_ticks
    return np.exp(-2 * (math.pi * nt * params.sigma * y) ** 2) * _sinc(nt * y) * dirichlet(params.copies, 1, y)


def _panel_edges(params: EngineeredParams) -> np.ndarray:
    """Breakpoints at every kernel zero; panel width at most 1/(2K)."""
    step = 1.0 / (2 * math.lcm(params.n_ticks, params.copies))
    ymax = params.ymax
    n = int(math.ceil(ymax / step))
    return np.minimum(np.arange(n + 1) * step, ymax)


def _quad_panels(f: Callable[[float], float], edges: Sequence[float], **kw) -> float:
    opts = dict(epsabs=PANEL_EPSABS, epsrel=PANEL_EPSREL, limit=200)
    opts.update(kw)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        out = integrate.quad(f, a, b, full_output=1, **opts)
        if len(out) > 3:
            raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {out[3]}")
        total += out[0]
    return total


def _gauss_panels(f: Callable[[np.ndarray], np.ndarray], edges: Sequence[float], order: int = 24) -> float:
    """Fixed-order Gauss-Legendre on each panel, vectorized."""
    x, w = np.polynomial.legendre.leggauss(order)
    e = np.asarray(edges, dtype=float)
    a, b = e[:-1], e[1:]
    half = (b - a) / 2
    nodes = (a + b)[:, None] / 2 + half[:, None] * x[None, :]
    return float(np.sum(half[:, None] * w[None, :] * f(nodes)))


# Normalization, coupling, amplitudes


def normalization_N(params: EngineeredParams) -> float:
    edges = _panel_edges(params)
    f = lambda y: float(abs(_n_kernel(params, y)))
    return 2.0 * params.n_ticks * _quad_panels(f, edges)


def normalization_N_oracle(params: EngineeredParams) -> float:
    """Same integral with Gauss-Legendre panels instead of adaptive quadrature."""
    return 2.0 * params.n_ticks * _gauss_panels(lambda y: np.abs(_n_kernel(params, y)), _panel_edges(params))


def _coupling_integral(params: EngineeredParams, gauss: bool = False) -> float:
    edges = _panel_edges(params)
    if gauss:
        return 2.0 * _gauss_panels(lambda y: np.abs(_c0_kernel(params, y)), edges)
    return 2.0 * _quad_panels(lambda y: float(abs(_c0_kernel(params, y))), edges)


def coupling_c0(params: EngineeredParams, N: float | None = None, *, gauss: bool = False) -> float:
    """c0 with 1/|c0| = (N_T/N) int |kernel| dy and the sign of c/s."""
    if N is None:
        N = normalization_N(params)
    mag = N / (params.n_ticks * _coupling_integral(params, gauss))
    c, s = math.cos(params.theta), math.sin(params.theta)
    return mag if c * s >= 0 else -mag


def amplitude_A1(params: EngineeredParams, N: float, c0: float) -> float:
    """A1^2 / N^2 from the admissible root of the quadratic a d u^2 - K (1 + a) u + 1 = 0.

    Here a = (c/s)^2 N^2, d = (N_T+1)^2 - 1/c0^2 and K = N_T + 1.  The root is
    written in rationalized form so that c = 0 (a = 0) needs no special case.
    """
    c, s = math.cos(params.theta), math.sin(params.theta)
    if abs(s) < 1e-15:
        raise ValueError("s = 0: the coupling equation divides by s")
    K = params.n_ticks + 1
    a = (c / s) ** 2 * N**2
    d = K**2 - 1.0 / c0**2
    disc = K**2 * (1 + a) ** 2 - 4 * a * d
    if disc < 0:
        raise ArithmeticError(f"negative discriminant {disc!r}")
    return 2.0 / (K * (1 + a) + math.sqrt(disc))


def coupling_from_A1(params: EngineeredParams, u: float, N: float) -> float:
    """Evaluate the defining equation of c0 at A1^2/N^2 = u."""
    c, s = math.cos(params.theta), math.sin(params.theta)
    r = c / s
    K = params.n_ticks + 1
    return r * u * N / math.sqrt((1 - K * u) * (1 - K * r * r * N * N * u))


@dataclass(frozen=True)
class _Spectral:
    N: float
    c0_abs: float


_SPECTRAL_CACHE: dict = {}


def _spectral(params: EngineeredParams) -> _Spectral:
    key = (params.sigma, params.n_ticks, params.x0)
    if key not in _SPECTRAL_CACHE:
        N = normalization_N(params)
        _SPECTRAL_CACHE[key] = _Spectral(N, abs(coupling_c0(params.with_theta(math.pi / 4), N)))
    return _SPECTRAL_CACHE[key]


def derive(params: EngineeredParams) -> EngineeredDerived:
    sp = _spectral(params)
    c, s = math.cos(params.theta), math.sin(params.theta)
    c0 = sp.c0_abs if c * s >= 0 else -sp.c0_abs
    u = amplitude_A1(params, sp.N, c0)
    K = params.n_ticks + 1
    a = 0.0 if c == 0 else (c / s) ** 2 * sp.N**2
    r2 = 1 - K * u
    r3 = 1 - K * a * u
    if r2 < -1e-12 or r3 < -1e-12:
        raise ArithmeticError("A2 or A3 would be imaginary")
    return EngineeredDerived(sp.N, c0, u, c * c * u, math.sqrt(max(r2, 0.0)), math.sqrt(max(r3, 0.0)))


def prob_cf(params: EngineeredParams) -> float:
    """Counterfactual probability per outcome, c^2 A1^2 / N^2."""
    if abs(math.sin(params.theta)) < 1e-15:
        return 0.0  # limit theta -> 0
    return derive(params).P_cf


def prob_cf_total(params: EngineeredParams) -> float:
    return (params.n_ticks + 1) * prob_cf(params)


def optimize_theta(params: EngineeredParams) -> tuple[float, float]:
    """Maximize the total counterfactual probability over theta.

    A 721-point scan of [0, 2 pi] locates the peak, golden-section search
    refines it, and the maximizer is folded into (0, pi/2] using the
    dependence on c^2 and s^2 only.
    """
    grid = np.linspace(0.0, 2 * math.pi, GRID_POINTS)
    vals = np.array([prob_cf_total(params.with_theta(float(t))) for t in grid])
    best = float(grid[int(np.argmax(vals))])
    fold = math.acos(min(1.0, abs(math.cos(best))))
    h = 2 * math.pi / (GRID_POINTS - 1)
    f = lambda t: -prob_cf_total(params.with_theta(t))
    lo, hi = max(fold - h, 1e-9), min(fold + h, math.pi - 1e-9)
    res = optimize.minimize_scalar(f, bracket=(lo, fold, hi), method="golden", tol=1e-12)
    theta = float(res.x)
    theta = math.acos(min(1.0, abs(math.cos(theta))))
    return theta, prob_cf_total(params.with_theta(theta))


# Precision of the engineered clock against the idealized one


def _window_integral(params: EngineeredParams, p: int, lo: float, hi: float, fn) -> float:
    if hi <= lo:
        return 0.0
    pts = [x for x in _edge_times(params, p) if lo < x < hi]
    arg = lambda t: float(g_sigma(params, _overlap_argument(params, p, t)))
    out = integrate.quad(
        lambda t: fn(arg(t)), lo, hi, points=pts or None, epsabs=1e-16 * params.t1, epsrel=1e-11, limit=500, full_output=1
    )
    if len(out) > 3:
        raise QuadratureError(f"error integral did not converge: {out[3]}")
    return out[0]


def dif1(params: EngineeredParams, p: int) -> float:
    """Signed time-averaged type-1 difference over the windows where p ticks occurred."""
    if not 0 <= p <= params.n_ticks:
        raise IndexError(f"tick index {p} outside 0..{params.n_ticks}")
    pref = prob_cf(params)
    tot = 0.0
    for q in range(params.x0):
        lo = p * params.t1 + q * params.period
        tot += _window_integral(params, p, lo, lo + params.t1, lambda G: G * G - 2 * G)
    return pref * tot / (params.x0 * params.t1)


def error_type1(params: EngineeredParams, p: int = 0) -> float:
    return abs(dif1(params, p))


def error_type2(params: EngineeredParams, p: int = 0) -> float:
    """Time average of |1 - G_sigma|^2 outside the p-tick windows (no probability prefactor)."""
    if not 0 <= p <= params.n_ticks:
        raise IndexError(f"tick index {p} outside 0..{params.n_ticks}")
    fn = lambda G: (1 - G) ** 2
    tot = 0.0
    for q in range(params.x0):
        start = q * params.period
        tot += _window_integral(params, p, start, start + p * params.t1, fn)
        tot += _window_integral(params, p, start + (p + 1) * params.t1, start + params.period, fn)
    return tot / (params.x0 * (params.period - params.t1))


# Fourier transform of a finite comb


def ft_top_hat(sigma: float, t1: float, y):
    """Inverse Fourier transform of G_{0,sigma}: t1 exp(-2 pi^2 sigma^2 (y t1)^2) sinc(pi y t1)."""
    y = np.asarray(y, dtype=float)
    return t1 * np.exp(-2 * (math.pi * sigma * y * t1) ** 2) * _sinc(y * t1)


def fourier_comb(sigma: float, t1: float, a: int, b: int, T: float, y, *, phase: str = "exact"):
    """Inverse Fourier transform of sum_{m=a}^{b} G_{0,sigma}(x - m T).

    ``phase="exact"`` uses exp(i pi (a + b) y T), the centre of the comb.
    ``phase="as-printed"`` uses exp(i pi y a T (2 + b - a)), which agrees only
    when a = 1 or a = b and is kept to document the discrepancy.
    """
    if a > b:
        raise ValueError("need a <= b")
    y = np.asarray(y, dtype=float)
    n = b - a + 1
    ker = dirichlet(n, 1, y * T)
    if phase == "exact":
        ph = np.exp(1j * math.pi * (a + b) * y * T)
    elif phase == "as-printed":
        ph = np.exp(1j * math.pi * y * a * T * (2 + b - a))
    else:
        raise ValueError(f"unknown phase convention {phase!r}")
    return ft_top_hat(sigma, t1, y) * ker * ph


def fourier_comb_oracle(sigma: float, t1: float, a: int, b: int, T: float, y, samples: int = 2**18):
    """Trapezoid rule for int f(x) exp(2 pi i x y) dx on a window covering the comb."""
    pad = t1 / 2 + 14 * sigma * t1 + t1
    lo, hi = min(a * T, b * T) - pad, max(a * T, b * T) + pad
    x = np.linspace(lo, hi, samples)
    dx = x[1] - x[0]
    p = EngineeredParams(sigma=sigma, t1=t1)
    f = sum(g0(p, x - m * T) for m in range(a, b + 1))
    w = np.full(samples, dx)
    w[0] = w[-1] = dx / 2
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return np.array([np.sum(w * f * np.exp(2j * math.pi * x * yy)) for yy in y])


# Spectral consistency of the trial amplitudes


@dataclass(frozen=True)
class SpectralReport:
    max_deviation: float
    overlap_deviation: float
    coupling_deviation: float
    norm_deviation: float
    cross_overlap: float
    lam: float
    details: dict = field(default_factory=dict)


def _x_weight(params: EngineeredParams, N: float, y):
    """R(y): x~*_l x-_l without phases, real and possibly negative."""
    return params.n_ticks / N * params.t1 * _n_kernel(params, y)


def _x_phase(params: EngineeredParams, l: int, y):
    a, b = params.comb_range
    nt = params.n_ticks
    k = 2 * (params.theta_flag * l + 1) + nt + (a + b) * (nt + 1)
    return np.exp(1j * math.pi * k * y)


def _coupling_product(params: EngineeredParams, N: float, c0: float, y):
    """A_off^* A_on from explicit exponential sums (no closed-form kernel)."""
    nt = params.n_ticks
    a, b = params.comb_range
    env = params.t1 * np.exp(-2 * (math.pi * nt * params.sigma * y) ** 2) * _sinc(nt * y)
    comb = sum(np.exp(2j * math.pi * q * y * (nt + 1)) for q in range(a, b + 1))
    ticks = sum(np.exp(1j * math.pi * y * (2 * (params.theta_flag * l + 1) + nt)) for l in range(nt + 1))
    return c0 * nt / N * env * comb * ticks


def _time_transform(values: np.ndarray, y: np.ndarray, h: float, t: np.ndarray, t1: float) -> np.ndarray:
    """(1/t1) int dy values(y) exp(-2 pi i y t / t1), trapezoid rule (values vanish at both ends)."""
    return np.array([np.sum(values * np.exp(-2j * math.pi * y * tt / t1)) * h / t1 for tt in t])


def cross_overlap_max(params: EngineeredParams, lam: float, N: float, y: np.ndarray, h: float, t: np.ndarray) -> float:
    R = _x_weight(params, N, y)
    worst = 0.0
    for l in range(params.n_ticks + 1):
        for r in range(params.n_ticks + 1):
            if l == r:
                continue
            prod = R * _x_phase(params, r, y) * np.exp(1j * (l - r) * lam * y)
            worst = max(worst, float(np.max(np.abs(_time_transform(prod, y, h, t, params.t1)))))
    return worst


def lambda_star(fn: Callable[[float], float], tol: float = 1e-3, lam0: float = 1.0, max_doublings: int = 60) -> float:
    """Double lambda from lam0 until fn(lambda) < tol."""
    lam = lam0
    for _ in range(max_doublings):
        if fn(lam) < tol:
            return lam
        lam *= 2
    raise QuadratureError(f"no lambda below tolerance {tol} after {max_doublings} doublings")


def spectral_overlap_check(params: EngineeredParams, n_t: int = 32, resolution: int = 16) -> SpectralReport:
    """Rebuild the overlaps from the energy amplitudes and compare with the closed forms."""
    N = normalization_N(params)
    c0 = coupling_c0(params, N)
    t = np.linspace(0.0, params.x0 * params.period, n_t, endpoint=False)

    def run(h: float):
        m = int(math.ceil(params.ymax / h))
        y = np.arange(-m, m + 1) * h
        R = _x_weight(params, N, y)
        dev = 0.0
        for l in range(params.n_ticks + 1):
            xt_conj = np.sqrt(R.astype(complex))
            xb = np.sqrt(R.astype(complex)) * _x_phase(params, l, y)
            num = _time_transform(xt_conj * xb, y, h, t, params.t1)
            dev = max(dev, float(np.max(np.abs(num - overlap_G(params, l, t, N)))))
        C = _coupling_product(params, N, c0, y)
        mag = np.sqrt(np.abs(C))
        a_off_conj = mag
        a_on = np.divide(C, mag, out=np.zeros_like(C), where=mag > 0)
        num = _time_transform(a_off_conj * a_on, y, h, t, params.t1)
        target = c0 * sum(overlap_G(params, l, t, N) for l in range(params.n_ticks + 1))
        cdev = float(np.max(np.abs(num - target)))
        return dev, cdev, y

    h = 1.0 / (resolution * (params.x0 + 1) * (params.n_ticks + 1))
    dev1, cdev1, _ = run(h)
    dev2, cdev2, y = run(h / 2)
    if abs(dev1 - dev2) > 1e-6 or abs(cdev1 - cdev2) > 1e-6:
        raise QuadratureError("energy grid under-resolved (halving the step changed the result)")

    edges = _panel_edges(params)
    x_norm = 2.0 * _gauss_panels(lambda yy: np.abs(_x_weight(params, N, yy)), edges) / params.t1
    a_norm = 2.0 * _gauss_panels(lambda yy: np.abs(_coupling_product(params, N, c0, yy)), edges) / params.t1
    norm_dev = max(abs(x_norm - 1.0), abs(a_norm - 1.0))

    h2 = h / 2
    cross = lambda lam: cross_overlap_max(params, lam, N, y, h2, t)
    lam = params.lam if params.lam > 0 else lambda_star(cross)
    cross_val = cross(lam)
    return SpectralReport(
        max(dev2, cdev2),
        dev2,
        cdev2,
        norm_dev,
        cross_val,
        lam,
        {"N": N, "c0": c0, "x_norm": x_norm, "a_norm": a_norm, "step": h2},
    )


# Phase decoupling integrals


@dataclass(frozen=True)
class DecouplingCoeffs:
    A: int = 1
    B1: int = 1
    C1: int = 2
    D1: int = 2
    B2: int = 1
    C2: int = 2
    D2: int = 1
    H1: float = 0.0
    H2: float = 0.5

    def validate(self, case: int) -> None:
        pairs = [(self.C1, self.D1)] + ([(self.C2, self.D2)] if case == 2 else [])
        for C, D in pairs:
            if C <= 0 or D <= 0 or C % D:
                raise ValueError("C and D must be positive integers with C/D integer")
        if self.H2 == 0:
            raise ValueError("H2 = 0 gives no decay mechanism")
        if 2 * self.H2 != round(2 * self.H2):
            raise ValueError("H2 must be an integer or half integer")


def _decoupling_amplitude(case: int, co: DecouplingCoeffs, x):
    k1 = _sinc(co.B1 * x) * dirichlet(co.C1, co.D1, x)
    if case == 1:
        return k1.astype(complex)
    k2 = _sinc(co.B2 * x) * dirichlet(co.C2, co.D2, x)
    return np.sqrt(k1.astype(complex)) * np.conj(np.sqrt(k2.astype(complex)))


def phase_decoupling_F(case: int, coeffs: DecouplingCoeffs, lam: float, sigma: float) -> float:
    """|int dx exp(-2 (pi A sigma x)^2) K(x) exp(i (H1 + H2 lambda) x)| for case 1 or 2.

    The amplitude K is even in x, so the integral is twice the cosine
    transform over x >= 0, done panel by panel between kernel zeros.
    """
    if case not in (1, 2):
        raise ValueError("case must be 1 or 2")
    coeffs.validate(case)
    omega = coeffs.H1 + coeffs.H2 * lam
    xmax = math.sqrt(-math.log(TAIL_WEIGHT) / 2.0) / (math.pi * coeffs.A * sigma)
    L = math.lcm(coeffs.B1, coeffs.C1, coeffs.B2, coeffs.C2) if case == 2 else math.lcm(coeffs.B1, coeffs.C1)
    step = 1.0 / (2 * L)
    edges = np.minimum(np.arange(int(math.ceil(xmax / step)) + 1) * step, xmax)
    gauss = lambda x: math.exp(-2 * (math.pi * coeffs.A * sigma * x) ** 2)
    re = lambda x: gauss(x) * float(_decoupling_amplitude(case, coeffs, x).real)
    im = lambda x: gauss(x) * float(_decoupling_amplitude(case, coeffs, x).imag)
    opts = dict(epsabs=1e-15, epsrel=1e-10)
    if omega != 0:
        opts.update(weight="cos", wvar=omega)
    total = 2.0 * complex(_quad_panels(re, edges, **opts), _quad_panels(im, edges, **opts))
    return abs(total)


def decoupling_lemma_bound(coeffs: DecouplingCoeffs, lam: float, sigma: float, samples: int = 40001) -> float:
    """Integration-by-parts bound for case 2, with v0 = 1/|H1 + H2 lambda|.

    The periodic factor f is the product of sines with the sinc
    denominators dropped, so that it has period T = 2.  Zeros and turning
    points are counted on a dense sample of one period.
    """
    omega = coeffs.H1 + coeffs.H2 * lam
    if omega == 0:
        raise ValueError("v0 is unbounded at H1 + H2 lambda = 0")
    T = 2.0
    x = np.linspace(0.0, T, samples)
    prod = (
        np.sin(math.pi * coeffs.B1 * x)
        * np.sin(math.pi * coeffs.B2 * x)
        * dirichlet(coeffs.C1, coeffs.D1, x)
        * dirichlet(coeffs.C2, coeffs.D2, x)
    )
    f = np.sqrt(np.abs(prod))
    J = float(np.max(f))
    zero_tol = 1e-6 * J
    cands = set()
    for k in (coeffs.B1, coeffs.B2, coeffs.C1, coeffs.C2):
        for j in range(0, int(round(k * T)) + 1):
            cands.add(round(j / k, 12))
    zeros = []
    for z in sorted(cands):
        v = abs(
            math.sin(math.pi * coeffs.B1 * z)
            * math.sin(math.pi * coeffs.B2 * z)
            * float(dirichlet(coeffs.C1, coeffs.D1, z))
            * float(dirichlet(coeffs.C2, coeffs.D2, z))
        )
        if math.sqrt(v) <= zero_tol:
            zeros.append(z)
    n_z = max(len(zeros), 1)
    df = np.diff(f)
    live = f[1:-1] > zero_tol
    turns = np.sum((np.sign(df[:-1]) != np.sign(df[1:])) & live & (df[:-1] != 0))
    n_tp = max(int(turns), 1)
    nmax = int(math.ceil(math.sqrt(-math.log(TAIL_WEIGHT) / 2.0) / (math.pi * coeffs.A * sigma * T))) + 1
    n = np.arange(-nmax, nmax + 1)
    gsum = float(np.sum(np.exp(-2 * (math.pi * coeffs.A * sigma * n * T) ** 2)))
    return 2 * n_z * (1 + 2 * n_tp) * J * (2.0 + gsum) / abs(omega)


# Stationary embedding of the off state


def hamiltonian_embed(H_on: np.ndarray, psi_off: np.ndarray) -> np.ndarray:
    """H = H_on - H_on |off><off| H_on / r0 with r0 = <off|H_on|off>."""
    H_on = np.asarray(H_on, dtype=complex)
    if np.max(np.abs(H_on - H_on.conj().T)) > 1e-12:
        raise ValueError("H_on is not Hermitian")
    v = np.asarray(getattr(psi_off, "amplitudes", psi_off), dtype=complex)
    v = v / np.linalg.norm(v)
    r0 = complex(np.vdot(v, H_on @ v)).real
    if abs(r0) <= 1e-12:
        raise ValueError("r0 = <off|H_on|off> vanishes")
    w = H_on @ v
    return H_on - np.outer(w, w.conj()) / r0


def embedding_residuals(H_on, psi_off, psi_on, times: Iterable[float]) -> dict[str, float]:
    """Max residuals of stationarity, on-dynamics and off/on orthogonality over a time grid."""
    H = hamiltonian_embed(H_on, psi_off)
    H_on = np.asarray(H_on, dtype=complex)
    off = np.asarray(psi_off, dtype=complex)
    on = np.asarray(psi_on, dtype=complex)
    res = {"stationarity": 0.0, "on_dynamics": 0.0, "orthogonality": 0.0}
    for t in times:
        U = linalg.expm(-1j * t * H)
        U_on = linalg.expm(-1j * t * H_on)
        on_t = U_on @ on
        res["stationarity"] = max(res["stationarity"], float(np.max(np.abs(U @ off - off))))
        res["on_dynamics"] = max(res["on_dynamics"], float(np.max(np.abs(U @ on - on_t))))
        res["orthogonality"] = max(res["orthogonality"], abs(complex(np.vdot(off, on_t))))
    return res


def random_embedding_instance(seed: int, dim: int = 6) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """H_on block-diagonal in a random frame, off and on states in different blocks."""
    if dim < 2:
        raise ValueError("need at least two dimensions")
    rng = np.random.default_rng(seed)
    k = dim // 2

    def herm(n):
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return (M + M.conj().T) / 2

    blk = np.zeros((dim, dim), dtype=complex)
    blk[:k, :k] = herm(k)
    blk[k:, k:] = herm(dim - k)
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    H_on = Q @ blk @ Q.conj().T
    H_on = (H_on + H_on.conj().T) / 2
    off = Q[:, :k] @ (rng.normal(size=k) + 1j * rng.normal(size=k))
    on = Q[:, k:] @ (rng.normal(size=dim - k) + 1j * rng.normal(size=dim - k))
    return H_on, off / np.linalg.norm(off), on / np.linalg.norm(on)


# Tabular output


CSV_COLUMNS = ("sigma", "theta_star", "P_cf_total", "Dif1", "Dif2", "N", "c0")


def engineered_row(sigma: float, n_ticks: int = 1, x0: int = 1, t1: float = 1.0) -> dict:
    base = EngineeredParams(sigma=sigma, n_ticks=n_ticks, x0=x0, t1=t1)
    theta, total = optimize_theta(base)
    p = base.with_theta(theta)
    d = derive(p)
    return {
        "sigma": sigma,
        "theta_star": theta,
        "P_cf_total": total,
        "Dif1": error_type1(p, 0),
        "Dif2": error_type2(p, 0),
        "N": d.N,
        "c0": d.c0,
    }


def write_csv(rows: Sequence[dict], path, columns: Sequence[str] = CSV_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{r[k]:.17g}" if isinstance(r[k], float) else r[k]) for k in columns})


def overlap_trace(params: EngineeredParams, l: int, n: int = 400) -> list[dict]:
    t = np.linspace(0.0, params.x0 * params.period, n, endpoint=False)
    vals = overlap_G(params, l, t)
    return [{"t": float(a), "overlap": float(b)} for a, b in zip(t, vals)]
