"""Planar Fourier toolkit.

Convention: (ℱ⁻¹f)(ζ) = (1/4π²) ∫_ℂ f(ξ)·exp(i·Re(ξ·ζ̄)) dm₂(ξ), and ‖f‖_{L̂¹} = ‖ℱ⁻¹f‖_{L¹}.
Grid transforms are midpoint Riemann sums evaluated with 2-D FFTs; every grid result carries an
error estimate from comparing against the sum on a coarser sub-lattice.
"""
import functools
import logging
import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass
from typing import NamedTuple

import mpmath
import numpy as np
import scipy.fft
import scipy.integrate
import scipy.special
from scipy.interpolate import RegularGridInterpolator

from operator_moduli.errors import ArgumentError
from operator_moduli.functions import FunctionSpec, bandlimited
from operator_moduli.utils import IndeterminateProgressBar

logger = logging.getLogger("FourierLogger")

PlanarFn = Callable[[np.ndarray], np.ndarray]

# Series are summed at this many decimal digits before rounding to float.
_SERIES_DPS = 50
# Below this argument bessel_j sums the power series; above it uses the Hankel expansion.
_SERIES_LIMIT = 30.0


@dataclass(kw_only=True)
class GridSettings:
    "Discretization of `inverse_fourier_grid`."

    # Source window [−W, W]² in ξ.
    half_width: float = 64.0
    # Samples per axis; must be a power of two.
    samples: int = 1024
    # Midpoint sub-samples per cell and axis.
    supersample: int = 4
    # Smoothly cut f off between 0.5W and 0.95W.
    taper: bool = True


DEFAULT_GRID = GridSettings()


# ----------------------------------------------------------------------------------------
# Bessel functions and Ψ
# ----------------------------------------------------------------------------------------


def _bessel_series(order: int, x: float) -> float:
    "Σ_k (−1)^k (x/2)^{2k+ν} / (k!(k+ν)!) in high precision, stopped past the peak term."
    with mpmath.workdps(_SERIES_DPS):
        half = mpmath.mpf(x) / 2
        term = half**order / mpmath.factorial(order)
        total = term
        k = 0
        while True:
            k += 1
            term = -term * half * half / (k * (k + order))
            total += term
            # Terms alternate and decrease once k > x/2, so the remainder is below |term|.
            if k > x / 2 and abs(term) < mpmath.mpf(10) ** -30:
                break
        return float(total)


def _bessel_hankel(order: int, x: float) -> float:
    "Hankel asymptotic expansion, summed while the terms decrease."
    mu = 4.0 * order * order
    chi = x - order * math.pi / 2.0 - math.pi / 4.0
    p, q = 1.0, 0.0
    term = 1.0
    previous = math.inf
    for k in range(1, 40):
        term *= (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) >= previous or abs(term) < 1e-17:
            break
        previous = abs(term)
        if k % 2 == 0:
            p += (-1) ** (k // 2) * term
        else:
            q += (-1) ** ((k - 1) // 2) * term
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j(order: int, x: float) -> float:
    """J_ν(x) for integer ν ≥ 0 and real x ≥ 0.

    Absolute error ≤ 1e-12 for x ≤ 30 (power series), ≤ 1e-8 beyond (Hankel expansion).

    Raises:
        ArgumentError: negative or non-finite x, or negative order.
    """
    if order < 0:
        raise ArgumentError(f"Bessel order must be nonnegative, got {order}")
    if not math.isfinite(x) or x < 0:
        raise ArgumentError(f"Bessel argument must be finite and nonnegative, got {x}")
    if x <= _SERIES_LIMIT:
        return _bessel_series(order, x)
    return _bessel_hankel(order, x)


def psi(z: complex | np.ndarray) -> complex | np.ndarray:
    "Ψ(z) = z̄ for |z| < 1 and 1/z for |z| ≥ 1; continuous because z̄ = 1/z on the circle."
    points = np.asarray(z, dtype=np.complex128)
    modulus = np.abs(points)
    inside = modulus < 1.0
    out = np.where(inside, np.conj(points), 1.0 / np.where(inside, 1.0, points))
    return complex(out) if out.ndim == 0 else out


class PsiConstant(NamedTuple):
    "c = ½‖Ψ‖_{L̂¹} with a bound on its quadrature error."

    c: float
    quadrature_error: float


class QuadratureValue(NamedTuple):
    value: float
    error: float


# Radial quadrature stops at this zero of J₁; the asymptotic tail takes over.
_PSI_ZEROS = 640


def psi_hat_norm() -> QuadratureValue:
    """‖Ψ‖_{L̂¹} = 2∫₀^∞ |J₁(r)|/r dr, since |ℱ⁻¹Ψ(ζ)| = |J₁(|ζ|)|/(π|ζ|²).

    The integral is split at the zeros of J₁ so every piece has a fixed sign.  Beyond the last
    zero R, |J₁(r)| ≈ √(2/πr)·|cos(r − 3π/4)| and |cos| averages 2/π, leaving a tail of
    (2/π)·√(2/π)·2/√R with error of order R^{−3/2}.
    """
    zeros = scipy.special.jn_zeros(1, _PSI_ZEROS)
    edges = np.concatenate([[0.0], zeros])
    body = 0.0
    quad_error = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = scipy.integrate.quad(
            lambda r: abs(scipy.special.j1(r)) / r if r > 0 else 0.5, a, b, epsabs=1e-13, limit=200
        )
        body += value
        quad_error += err
    radius = float(zeros[-1])
    tail = (2.0 / math.pi) * math.sqrt(2.0 / math.pi) * 2.0 / math.sqrt(radius)
    tail_error = 4.0 * radius**-1.5
    return QuadratureValue(2.0 * (body + tail), 2.0 * (quad_error + tail_error))


@functools.cache
def psi_constant() -> PsiConstant:
    "Computed once per process; immutable afterwards."
    with IndeterminateProgressBar() as p:
        p.add_task("‖Ψ‖ quadrature", total=None)
        norm = psi_hat_norm()
    logger.info(f"‖Ψ‖_L̂¹ = {norm.value:.10f} ± {norm.error:.1e}")
    return PsiConstant(norm.value / 2.0, norm.error / 2.0)


class BesselBoundCheck(NamedTuple):
    holds: bool
    max_ratio: float
    worst_x: float


def bessel_bound_check(
    c: float = 0.8, x_max: float = 400.0, samples: int = 400_001
) -> BesselBoundCheck:
    "Dense-grid check of |J₁(x)| ≤ min(x/2, c·x^{−1/2}), the tail bound used by the quadratures."
    x = np.linspace(x_max / (samples - 1), x_max, samples)
    envelope = np.minimum(x / 2.0, c / np.sqrt(x))
    ratio = np.abs(scipy.special.j1(x)) / envelope
    worst = int(np.argmax(ratio))
    return BesselBoundCheck(bool(ratio[worst] <= 1.0), float(ratio[worst]), float(x[worst]))


# ----------------------------------------------------------------------------------------
# Grid transforms
# ----------------------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanarGrid:
    """Values on the square grid (p − N/2)·spacing, p = 0..N−1, on each axis.

    The grid covers [−half_width, half_width)², spacing = 2·half_width/samples_per_axis.
    """

    half_width: float
    samples_per_axis: int
    values: np.ndarray
    error_estimate: float = math.inf

    def __post_init__(self) -> None:
        if self.samples_per_axis < 2:
            raise ArgumentError("A planar grid needs at least two samples per axis")
        if self.values.shape != (self.samples_per_axis, self.samples_per_axis):
            raise ArgumentError(f"Grid values have shape {self.values.shape}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.samples_per_axis

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(self.samples_per_axis) - self.samples_per_axis // 2) * self.spacing

    def points(self) -> np.ndarray:
        "Complex coordinates x + iy, indexed [x, y]."
        a = self.axis
        return a[:, None] + 1j * a[None, :]


def _require_power_of_two(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise ArgumentError(f"samples per axis must be a power of two ≥ 2, got {n}")


def smooth_step(t: np.ndarray) -> np.ndarray:
    "C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1, built from exp(−1/t)."
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _taper(modulus: np.ndarray, half_width: float) -> np.ndarray:
    return 1.0 - smooth_step((modulus / half_width - 0.5) / 0.45)


def inverse_fourier_grid(f: PlanarFn, settings: GridSettings = DEFAULT_GRID) -> PlanarGrid:
    """FFT approximation of ℱ⁻¹f on the dual grid.

    f is sampled at s² midpoint offsets inside each of the N² cells of [−W, W)² (s =
    supersample).  With h = 2W/N every offset lattice gives one FFT on the dual grid
    ζ_p = (p − N/2)·π/W; the offsets are then combined with their phases.  The error estimate
    is the sup difference to the sum over even offsets only (cell size doubled).

    Raises:
        ArgumentError: N not a power of two, or non-positive W / supersample.
    """
    n = settings.samples
    _require_power_of_two(n)
    if settings.half_width <= 0 or settings.supersample < 1:
        raise ArgumentError("half_width and supersample must be positive")
    w, s = settings.half_width, settings.supersample
    h = 2.0 * w / n
    dual_step = math.pi / w
    zeta = (np.arange(n) - n // 2) * dual_step
    signs = (-1.0) ** np.arange(n)
    base = (np.arange(n) - n // 2) * h

    total = np.zeros((n, n), dtype=np.complex128)
    coarse = np.zeros((n, n), dtype=np.complex128)
    for a in range(s):
        ox = (a + 0.5) * h / s
        for b in range(s):
            oy = (b + 0.5) * h / s
            xi = (base + ox)[:, None] + 1j * (base + oy)[None, :]
            samples = np.asarray(f(xi), dtype=np.complex128)
            if settings.taper:
                samples = samples * _taper(np.abs(xi), w)
            # Σ_a g_a e^{2πi(a−N/2)(p−N/2)/N} = (−1)^p · N · ifft((−1)^a g)_p for even N.
            lattice_sum = scipy.fft.ifft2(samples * signs[:, None] * signs[None, :]) * (n * n)
            lattice_sum *= signs[:, None] * signs[None, :]
            lattice_sum *= np.exp(1j * (ox * zeta[:, None] + oy * zeta[None, :]))
            total += lattice_sum
            if a % 2 == 0 and b % 2 == 0:
                coarse += lattice_sum
    cell = (h / s) ** 2
    values = cell / (4.0 * math.pi**2) * total
    if s >= 2:
        coarse_values = 4.0 * cell / (4.0 * math.pi**2) * coarse
        error = float(np.max(np.abs(values - coarse_values)))
    else:
        error = math.inf
    if not np.all(np.isfinite(values)):
        raise ArgumentError("f produced non-finite samples on the grid")
    return PlanarGrid(n * dual_step / 2.0, n, values, error)


def chi_disc(z: np.ndarray) -> np.ndarray:
    return (np.abs(z) <= 1.0).astype(float)


def psi_squared(z: np.ndarray) -> np.ndarray:
    return np.asarray(psi(z)) ** 2


def gaussian(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.abs(z) ** 2 / 2.0)


def _closed_chi_disc(zeta: np.ndarray) -> np.ndarray:
    rho = np.abs(zeta)
    safe = np.where(rho > 0, rho, 1.0)
    return np.where(rho > 0, scipy.special.j1(safe) / (2.0 * math.pi * safe), 1.0 / (4.0 * math.pi))


def _closed_psi(zeta: np.ndarray) -> np.ndarray:
    rho = np.abs(zeta)
    safe = np.where(rho > 0, zeta, 1.0)
    return 1j * scipy.special.j1(np.abs(safe)) / (math.pi * safe * np.abs(safe))


def _closed_psi_squared(zeta: np.ndarray) -> np.ndarray:
    safe = np.where(np.abs(zeta) > 0, zeta, 1.0)
    return -2.0 * scipy.special.jv(2, np.abs(safe)) / (math.pi * safe**2)


def _closed_gaussian(zeta: np.ndarray) -> np.ndarray:
    return np.exp(-np.abs(zeta) ** 2 / 2.0) / (2.0 * math.pi)


class FourierFormula(NamedTuple):
    f: PlanarFn
    closed_form: PlanarFn
    # Annulus of |ζ| on which the grid transform is compared.
    inner: float
    outer: float


# Ψ and Ψ² are not integrable; their transforms are singular or direction-dependent at 0,
# so they are compared away from the origin.
FOURIER_FORMULAS: dict[str, FourierFormula] = {
    "chi_disc": FourierFormula(chi_disc, _closed_chi_disc, 0.0, 10.0),
    "psi": FourierFormula(lambda z: np.asarray(psi(z)), _closed_psi, 1.0, 10.0),
    "psi_squared": FourierFormula(psi_squared, _closed_psi_squared, 0.5, 10.0),
    "gaussian": FourierFormula(gaussian, _closed_gaussian, 0.0, 10.0),
}


class FourierCheck(NamedTuple):
    formula_id: str
    grid_W: float
    grid_N: int
    max_abs_error: float
    grid_error_estimate: float


def fourier_check(formula_id: str, settings: GridSettings = DEFAULT_GRID) -> FourierCheck:
    """Max |grid ℱ⁻¹f − closed form| on the formula's annulus.

    Raises:
        ArgumentError: unknown formula id, or a grid too small to reach the annulus.
    """
    if formula_id not in FOURIER_FORMULAS:
        raise ArgumentError(
            f"Unknown formula {formula_id!r}; expected one of {sorted(FOURIER_FORMULAS)}"
        )
    formula = FOURIER_FORMULAS[formula_id]
    grid = inverse_fourier_grid(formula.f, settings)
    if grid.half_width < formula.outer:
        raise ArgumentError(
            f"Dual grid reaches |ζ| ≤ {grid.half_width:.3g}, "
            f"below the checked radius {formula.outer}"
        )
    zeta = grid.points()
    rho = np.abs(zeta)
    mask = (rho >= formula.inner) & (rho <= formula.outer)
    error = float(np.max(np.abs(grid.values[mask] - formula.closed_form(zeta[mask]))))
    width, samples = settings.half_width, settings.samples
    logger.info(f"fourier-check {formula_id} W={width} N={samples}: {error:.3e}")
    return FourierCheck(formula_id, width, samples, error, grid.error_estimate)


def decay_statistic(settings: GridSettings, inner: float = 1.0, outer: float = 20.0) -> float:
    "sup |ℱ⁻¹(Ψ²)(ζ)|·(1 + |ζ|^{5/2}) over inner ≤ |ζ| ≤ outer on the grid."
    grid = inverse_fourier_grid(psi_squared, settings)
    if grid.half_width < outer:
        raise ArgumentError(f"Dual grid reaches {grid.half_width:.3g} < annulus radius {outer}")
    rho = np.abs(grid.points())
    mask = (rho >= inner) & (rho <= outer)
    return float(np.max(np.abs(grid.values[mask]) * (1.0 + rho[mask] ** 2.5)))


def l1hat_norm(
    f: PlanarFn,
    decay_exponent: float,
    decay_constant: float | None = None,
    settings: GridSettings = DEFAULT_GRID,
) -> QuadratureValue:
    """‖f‖_{L̂¹} from the grid transform plus a tail bound.

    Given |ℱ⁻¹f(ζ)| ≤ C(1+|ζ|)^{−p} with p > 2, the mass outside the disc of radius R covered by
    the dual grid is at most 2πC(1+R)^{2−p}/(p−2).  Half of it is added to the value and half
    counted as error, together with the grid error estimate integrated over the disc.  When C is
    not supplied it is measured on the annulus R/2 ≤ |ζ| ≤ R.

    Raises:
        ArgumentError: p ≤ 2 (the tail cannot be bounded).
    """
    if decay_exponent <= 2.0:
        raise ArgumentError(f"decay exponent must exceed 2 to bound the tail, got {decay_exponent}")
    grid = inverse_fourier_grid(f, settings)
    rho = np.abs(grid.points())
    radius = grid.half_width
    inside = rho <= radius
    area = grid.spacing**2
    body = float(np.sum(np.abs(grid.values[inside])) * area)
    if decay_constant is None:
        band = (rho >= radius / 2.0) & inside
        decay_constant = float(
            np.max(np.abs(grid.values[band]) * (1.0 + rho[band]) ** decay_exponent)
        )
    p = decay_exponent
    tail = 2.0 * math.pi * decay_constant * (1.0 + radius) ** (2.0 - p) / (p - 2.0)
    grid_error = grid.error_estimate * math.pi * radius**2
    return QuadratureValue(body + tail / 2.0, tail / 2.0 + grid_error)


# ----------------------------------------------------------------------------------------
# Dyadic decomposition of z̄/z
# ----------------------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpSpec:
    "Even C^∞ cutoff φ: 1 on [0, inner], 0 beyond outer, smooth step in between."

    inner: float = 1.0
    outer: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.inner < self.outer:
            raise ArgumentError(f"Bump needs 0 < inner < outer, got {self.inner}, {self.outer}")

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return 1.0 - smooth_step((np.abs(r) - self.inner) / (self.outer - self.inner))

    def band(self, r: np.ndarray) -> np.ndarray:
        "g(r) = φ(r/2) − φ(r), supported in [inner, 2·outer]."
        return self(np.asarray(r) / 2.0) - self(r)


def _band_transform(bump: BumpSpec, rho: np.ndarray, nodes: int) -> np.ndarray:
    "G(ρ) = ∫ g(r)·J₂(rρ)·r dr by Gauss–Legendre on the support of g."
    x, weights = np.polynomial.legendre.leggauss(nodes)
    lo, hi = bump.inner, 2.0 * bump.outer
    r = (hi - lo) / 2.0 * x + (hi + lo) / 2.0
    weights = weights * (hi - lo) / 2.0 * bump.band(r) * r
    out = np.empty(rho.shape)
    for start in range(0, rho.size, 1024):
        chunk = rho[start : start + 1024]
        out[start : start + 1024] = scipy.special.jv(2, np.outer(chunk, r)) @ weights
    return out


@functools.cache
def dyadic_piece_norm(
    bump: BumpSpec = BumpSpec(), rho_max: float = 200.0, nodes: int = 2000
) -> QuadratureValue:
    """‖ψ‖_{L̂¹} for the band ψ(z) = (z̄/z)·g(|z|).

    ℱ⁻¹ψ(ζ) = −(ζ̄/ζ)·G(|ζ|)/(2π), so the norm is ∫₀^∞ |G(ρ)|·ρ dρ.  G decays faster than any
    power; the tail past ρ_max is bounded by C/(2ρ_max²) with C = max |G|ρ⁴ on [ρ_max/2, ρ_max].
    The error adds the difference to a half-node quadrature.
    """
    rho = np.linspace(0.0, rho_max, int(rho_max * 100) + 1)
    g = _band_transform(bump, rho, nodes)
    value = float(scipy.integrate.trapezoid(np.abs(g) * rho, rho))
    half = _band_transform(bump, rho, nodes // 2)
    coarse = float(scipy.integrate.trapezoid(np.abs(half) * rho, rho))
    band = rho >= rho_max / 2.0
    c = float(np.max(np.abs(g[band]) * rho[band] ** 4))
    tail = c / (2.0 * rho_max**2)
    # Trapezoid error on the ρ grid, estimated against every other sample.
    halved = float(scipy.integrate.trapezoid(np.abs(g[::2]) * rho[::2], rho[::2]))
    error = tail + abs(value - coarse) + abs(value - halved)
    return QuadratureValue(value + tail, error)


class DyadicH(NamedTuple):
    """h(0) = 0, h(z) = z̄/z on δ ≤ |z| ≤ r, with ‖h‖_{L̂¹} ≤ bound = bands·(‖ψ‖ + error)."""

    h: Callable[[np.ndarray], np.ndarray]
    bound: float
    bands: int
    piece_norm: float


def dyadic_band_count(delta: float, r: float) -> int:
    "Bands needed to cover δ ≤ |z| ≤ r: ceil(log₂(r/δ)) + 1."
    return int(math.ceil(math.log2(r / delta) - 1e-12)) + 1


def dyadic_h(delta: float, r: float, bump: BumpSpec = BumpSpec()) -> DyadicH:
    """h(z) = Σ_{k<n} ψ(2^{−k}·2z/δ) with n = ceil(log₂(r/δ)) + 1.

    The sum telescopes to (z̄/z)·(φ(2^{−n}·2|z|/δ) − φ(2|z|/δ)), which equals z̄/z once
    2|z|/δ ≥ 2·inner and 2^{−n}·2|z|/δ ≤ inner.  Dilations preserve the L̂¹ norm.

    Raises:
        ArgumentError: not 0 < δ < r.
    """
    if not 0.0 < delta < r:
        raise ArgumentError(f"dyadic_h needs 0 < delta < r, got delta={delta}, r={r}")
    if bump.outer != 2.0 * bump.inner:
        raise ArgumentError("dyadic bands need outer = 2·inner to telescope")
    bands = dyadic_band_count(delta, r)
    scale = 2.0 * bump.inner / delta

    def h(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        modulus = np.abs(z)
        safe = np.where(modulus > 0, z, 1.0)
        radial = bump(modulus * scale / 2.0**bands) - bump(modulus * scale)
        return np.where(modulus > 0, np.conj(safe) / safe * radial, 0.0)

    piece = dyadic_piece_norm(bump)
    return DyadicH(h, bands * (piece.value + piece.error), bands, piece.value)


# ----------------------------------------------------------------------------------------
# Band-limited approximation
# ----------------------------------------------------------------------------------------


def vallee_poussin_multiplier(t: np.ndarray) -> np.ndarray:
    "1 on [0, 1/2], 0 on [1, ∞), C^∞ in between."
    return 1.0 - smooth_step((np.asarray(t) - 0.5) / 0.5)


def measured_modulus(values: np.ndarray, spacing: float, d: float) -> float:
    "ω(d) on a grid: max |v(x + s) − v(x)| over grid shifts s with |s| ≤ d."
    reach = int(math.floor(d / spacing + 1e-12))
    best = 0.0
    n0, n1 = values.shape
    for a in range(0, reach + 1):
        for b in range(-reach, reach + 1):
            if (a == 0 and b <= 0) or math.hypot(a, b) * spacing > d * (1 + 1e-12):
                continue
            if a >= n0 or abs(b) >= n1:
                continue
            lhs = values[a:, max(b, 0) : n1 + min(b, 0)]
            rhs = values[: n0 - a, max(-b, 0) : n1 - max(b, 0)]
            best = max(best, float(np.max(np.abs(lhs - rhs))))
    return best


class BandlimitResult(NamedTuple):
    values: np.ndarray
    handle: FunctionSpec
    leakage: float
    sup_deviation: float
    modulus_at_d: float


def bandlimit_approx(grid: PlanarGrid, d: float) -> BandlimitResult:
    """f_d with ℱ⁻¹f_d supported in |ζ| ≤ 1/d, by an FFT multiplier on the periodized grid.

    Reports the spectral leakage outside the disc (relative), ‖f − f_d‖_∞ on the grid and the
    grid-measured ω_f(d).  Plane waves are reproduced exactly when their frequency lies on the
    FFT lattice with |ζ| ≤ 1/(2d).

    Raises:
        ArgumentError: d ≤ 0.
    """
    if d <= 0:
        raise ArgumentError(f"d must be positive, got {d}")
    n, h = grid.samples_per_axis, grid.spacing
    k = 2.0 * math.pi * scipy.fft.fftfreq(n, h)
    freq = np.hypot(k[:, None], k[None, :])
    spectrum = scipy.fft.fft2(grid.values)
    filtered = spectrum * vallee_poussin_multiplier(freq * d)
    values = scipy.fft.ifft2(filtered)
    outside = freq * d > 1.0
    scale = float(np.max(np.abs(filtered))) or 1.0
    leakage = float(np.max(np.abs(scipy.fft.fft2(values)[outside]), initial=0.0)) / scale
    if leakage > 1e-8:
        warnings.warn(f"Band-limited approximation leaks {leakage:.2e} outside |ζ| ≤ 1/d")
    sup_deviation = float(np.max(np.abs(grid.values - values)))
    modulus = measured_modulus(grid.values, h, d)
    axis = grid.axis
    real = RegularGridInterpolator((axis, axis), values.real, bounds_error=False, fill_value=None)
    imag = RegularGridInterpolator((axis, axis), values.imag, bounds_error=False, fill_value=None)

    def evaluator(z: np.ndarray) -> np.ndarray:
        pts = np.stack([np.real(z).ravel(), np.imag(z).ravel()], axis=-1)
        return (real(pts) + 1j * imag(pts)).reshape(np.shape(z))

    lo, hi = axis[0], axis[-1]
    handle = bandlimited(
        f"bandlimited:d={d!r}",
        evaluator,
        domain=lambda z: (
            (np.real(z) >= lo) & (np.real(z) <= hi) & (np.imag(z) >= lo) & (np.imag(z) <= hi)
        ),
    )
    return BandlimitResult(values, handle, leakage, sup_deviation, modulus)


def sample_on_grid(f: FunctionSpec, half_width: float, samples: int) -> PlanarGrid:
    "Values of a registry function on the primal grid of `PlanarGrid`."
    _require_power_of_two(samples)
    grid = PlanarGrid(half_width, samples, np.zeros((samples, samples), dtype=np.complex128))
    return PlanarGrid(half_width, samples, f.evaluate(grid.points()), 0.0)
