"""Divided differences on lattices and the two-sided log(2r/δ) bounds for D₀z̄.

Points of δℤ + iδℤ inside a disc are enumerated in a fixed order (|z|, then argument in
[0, 2π), then real part) so every matrix and certificate built from them is reproducible.
On a lattice, D₀z̄(z, w) = conj(z−w)/(z−w) only depends on z − w, and the bounds here exploit
that Toeplitz structure:
  * upper: D₀z̄ = h(z − w) for the dyadic h, so ‖D₀z̄‖_M ≤ ‖h‖_{L̂¹};
  * lower: D₀z̄ ⋆ Λ^{[2]} = Λ_r entrywise, so ‖D₀z̄‖_M ≥ ‖Λ_r‖ / ‖Λ^{[2]}‖.
"""
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
import scipy.fft
import scipy.signal
from scipy.spatial import cKDTree

from operator_moduli.errors import ArgumentError, PreconditionError, ValidationError
from operator_moduli.fourier import dyadic_h, psi, psi_constant
from operator_moduli.functions import FunctionSpec
from operator_moduli.linalg import ComplexMatrix, operator_norm
from operator_moduli.schur import MultiplierEstimate, multiplier_lower, multiplier_upper

logger = logging.getLogger("LatticeLogger")

# Dense cross-checks of Toeplitz norms are skipped above this many points.
DENSE_LIMIT = 900
# Dense multiplier searches in `lattice_bound_row` are skipped above this many points.
SEARCH_LIMIT = 400


@dataclass(frozen=True)
class LatticeSpec:
    "δℤ + iδℤ intersected with the disc of radius r (closed by default)."

    delta: float
    r: float
    closed: bool = True

    def __post_init__(self) -> None:
        if not (self.delta > 0 and self.r > 0):
            raise ArgumentError(f"delta and r must be positive, got {self.delta}, {self.r}")
        if self.delta > self.r:
            raise ArgumentError(f"delta must not exceed r, got delta={self.delta}, r={self.r}")


def lattice_indices(spec: LatticeSpec) -> np.ndarray:
    "Integer coordinates (m, n), shape (count, 2), in the canonical point order."
    k = int(math.floor(spec.r / spec.delta)) + 1
    m, n = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
    m, n = m.ravel(), n.ravel()
    square = m * m + n * n
    limit = (spec.r / spec.delta) ** 2
    if spec.closed:
        keep = square <= limit * (1 + 1e-12)
    else:
        keep = square < limit * (1 - 1e-12)
    m, n, square = m[keep], n[keep], square[keep]
    angle = np.mod(np.arctan2(n, m), 2 * math.pi)
    order = np.lexsort((m, angle, square))
    return np.stack([m[order], n[order]], axis=1)


def lattice_points(spec: LatticeSpec) -> np.ndarray:
    """δ(m + in) with |δ(m + in)| ≤ r (or < r), sorted by modulus, argument, real part.

    0 always qualifies, so the result is never empty.
    """
    idx = lattice_indices(spec)
    return spec.delta * (idx[:, 0] + 1j * idx[:, 1])


class DividedDifferenceMatrix(NamedTuple):
    points_row: np.ndarray
    points_col: np.ndarray
    matrix: ComplexMatrix


def divided_difference(
    f: FunctionSpec,
    rows: Sequence[complex] | np.ndarray,
    cols: Sequence[complex] | np.ndarray,
    diagonal: Literal["zero", "derivative"] = "zero",
    tol: float = 0.0,
) -> DividedDifferenceMatrix:
    """(D₀f)(z_j, w_k) = (f(z_j) − f(w_k))/(z_j − w_k), and 0 where z_j = w_k.

    With `diagonal="derivative"` coinciding points get f'(z) instead (holomorphic entries only).
    Points closer than `tol` count as coinciding.

    Raises:
        DomainError: f undefined at one of the points.
        ArgumentError: derivative diagonal requested for a function without one.
    """
    z = np.asarray(rows, dtype=np.complex128).reshape(-1)
    w = np.asarray(cols, dtype=np.complex128).reshape(-1)
    fz, fw = f.evaluate(z), f.evaluate(w)
    gap = z[:, None] - w[None, :]
    equal = np.abs(gap) <= tol
    safe = np.where(equal, 1.0, gap)
    matrix = np.where(equal, 0.0, (fz[:, None] - fw[None, :]) / safe)
    if diagonal == "derivative":
        if f.derivative is None:
            raise ArgumentError(f"{f.key} has no derivative on record")
        rows_idx, _ = np.nonzero(equal)
        matrix[equal] = np.asarray(f.derivative(z[rows_idx]), dtype=np.complex128)
    elif diagonal != "zero":
        raise ArgumentError(f"Unknown diagonal convention {diagonal!r}")
    return DividedDifferenceMatrix(z, w, matrix)


class LambdaKernels(NamedTuple):
    "λ(p) = 1/p, λ(0) = 0, evaluated at p = z_j − z_k."

    lambda1: ComplexMatrix  # λ/λ̄ = p̄/p, i.e. D₀z̄
    lambda2: ComplexMatrix  # λ̄²
    lambda_r: ComplexMatrix  # |λ|²


def lambda_kernel(points: Sequence[complex] | np.ndarray, power: int = 1) -> ComplexMatrix:
    "λ(z_j − z_k)^power with λ(p) = 1/p off the diagonal and 0 on it."
    z = np.asarray(points, dtype=np.complex128).reshape(-1)
    gap = z[:, None] - z[None, :]
    zero = gap == 0
    return np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, gap) ** power)


def lambda_kernels(points: Sequence[complex] | np.ndarray) -> LambdaKernels:
    lam = lambda_kernel(points)
    return LambdaKernels(
        lambda1=np.where(lam == 0, 0.0, lam / np.where(lam == 0, 1.0, np.conj(lam))),
        lambda2=np.conj(lam) ** 2,
        lambda_r=np.abs(lam) ** 2 + 0j,
    )


class SchurTestBound(NamedTuple):
    """‖D₀z̄‖_M ≥ bound = lambda_r_norm_lb / lambda2_norm_ub on a subset of ℤ + iℤ."""

    lambda_r_norm_lb: float
    lambda2_norm_ub: float
    bound: float
    ones_quotient: float
    perron_quotient: float
    count: int
    total: float


def _integer_coordinates(points: np.ndarray) -> np.ndarray:
    coords = np.stack([points.real, points.imag], axis=1)
    rounded = np.rint(coords)
    if np.any(np.abs(coords - rounded) > 1e-9):
        raise ArgumentError("schur_test_lower needs points of ℤ + iℤ")
    return rounded.astype(np.int64)


def _difference_counts(indicator: np.ndarray) -> np.ndarray:
    "A_p = #{(a, b) : a − b = p}, indexed so that p = 0 sits at the array centre."
    counts = scipy.signal.fftconvolve(indicator, indicator[::-1, ::-1], mode="full")
    return np.rint(counts)


def _inverse_square_kernel(half: int) -> np.ndarray:
    p = np.arange(-half, half + 1)
    square = p[:, None] ** 2 + p[None, :] ** 2
    return np.where(square > 0, 1.0 / np.where(square > 0, square, 1), 0.0)


def _symbol_bound(counts: np.ndarray, half: int) -> float:
    """sup over the torus of |Σ_p k(p)e^{ip·θ}|, k(p) = 1/p̄² on occurring differences p ≠ 0.

    Bounds the compression Λ^{[2]}.  The trigonometric polynomial has degree D = 2·half in each
    variable; sampled on an M×M grid its sup is at most grid max / √(1 − 8π²(D/M)²).
    """
    degree = 2 * half
    size = 64
    while size < 32 * degree:
        size *= 2
    size = min(size, 4096)
    slack = 1.0 - 8.0 * math.pi**2 * (degree / size) ** 2
    if slack <= 0:
        return math.inf
    kernel = np.zeros((size, size), dtype=np.complex128)
    pm, pn = np.nonzero(counts > 0)
    pm, pn = pm - degree, pn - degree
    nonzero = (pm != 0) | (pn != 0)
    pm, pn = pm[nonzero], pn[nonzero]
    kernel[pm % size, pn % size] = 1.0 / np.conj(pm + 1j * pn) ** 2
    symbol = scipy.fft.fft2(kernel)
    return float(np.max(np.abs(symbol))) / math.sqrt(slack)


def schur_test_lower(
    points: Sequence[complex] | np.ndarray, perron_iterations: int = 60
) -> SchurTestBound:
    """Lower bound for ‖D₀z̄‖_M on a finite subset of ℤ + iℤ without forming dense matrices.

    ‖Λ_r‖ is bounded below by the all-ones quotient Σ_jk (Λ_r)_jk / n and by Rayleigh quotients
    of power iterates (Λ_r is symmetric and nonnegative).  ‖Λ^{[2]}‖ is bounded above by the sup
    of its Toeplitz symbol and, for small sets, by a direct norm computation.

    Raises:
        ArgumentError: points not in ℤ + iℤ, or empty.
    """
    z = np.asarray(points, dtype=np.complex128).reshape(-1)
    if z.size == 0:
        raise ArgumentError("schur_test_lower needs at least one point")
    coords = _integer_coordinates(z)
    half = int(np.max(np.abs(coords)))
    shifted = coords + half
    indicator = np.zeros((2 * half + 1, 2 * half + 1))
    indicator[shifted[:, 0], shifted[:, 1]] = 1.0
    counts = _difference_counts(indicator)
    kernel = _inverse_square_kernel(2 * half)
    total = float(np.sum(counts * kernel))
    n = z.size
    ones_quotient = total / n

    def apply(v_grid: np.ndarray) -> np.ndarray:
        full = scipy.signal.fftconvolve(v_grid, kernel, mode="full")
        out = full[2 * half : 4 * half + 1, 2 * half : 4 * half + 1]
        return out * indicator

    v = indicator.copy()
    perron = ones_quotient
    for _ in range(perron_iterations):
        w = apply(v)
        norm_v = float(np.sum(v * v))
        if norm_v == 0:
            break
        perron = max(perron, float(np.sum(v * w)) / norm_v)
        norm_w = math.sqrt(float(np.sum(w * w)))
        if norm_w == 0:
            break
        v = w / norm_w
    # FFT rounding: keep the quotients honest.
    lambda_r_lb = max(ones_quotient, perron) * (1.0 - 1e-9)

    lambda2_ub = _symbol_bound(counts, half)
    if n <= DENSE_LIMIT:
        lambda2_ub = min(lambda2_ub, operator_norm(lambda_kernels(z).lambda2) * (1.0 + 1e-9))
    bound = lambda_r_lb / lambda2_ub if lambda2_ub > 0 else 0.0
    logger.debug(
        f"Schur test on {n} points: ‖Λ_r‖ ≥ {lambda_r_lb:.6g}, "
        f"‖Λ²‖ ≤ {lambda2_ub:.6g}, bound {bound:.6g}"
    )
    return SchurTestBound(lambda_r_lb, lambda2_ub, bound, ones_quotient, perron, n, total)


def niz_lower_bound(r: float) -> SchurTestBound:
    """Lower bound for ‖D₀z̄‖_M on (ℤ + iℤ) ∩ clos(rD); grows like log r.

    Raises:
        ArgumentError: r < 3.
    """
    if r < 3:
        raise ArgumentError(f"niz_lower_bound needs r ≥ 3, got {r}")
    return schur_test_lower(lattice_points(LatticeSpec(1.0, r)))


def conj_upper_bound(spec: LatticeSpec) -> float:
    """Certified upper bound for ‖D₀z̄‖_M on the lattice.

    Differences of lattice points satisfy δ ≤ |z − w| ≤ 2r, where the dyadic h equals z̄/z, and
    h(0) = 0 matches the diagonal; so D₀z̄(z, w) = h(z − w) and ‖D₀z̄‖_M ≤ ‖h‖_{L̂¹}.
    """
    return dyadic_h(spec.delta, 2.0 * spec.r).bound


class PartitionCells(NamedTuple):
    "Cell labels 0..9 per (row, col) pair, the ten indicator masks and their multiplier bounds."

    labels: np.ndarray
    masks: list[np.ndarray]
    bounds: list[float]


# Offsets between the squares containing z and w, in cell order 1..9.
CELL_OFFSETS = ((0, 0), (1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1))
_OFFSET_CELL = {offset: cell for cell, offset in enumerate(CELL_OFFSETS, start=1)}


def _square_index(points: np.ndarray, side: float) -> np.ndarray:
    "Index of the half-open square [q·s, (q+1)·s) containing each point, per coordinate."
    index = np.stack([np.floor(points.real / side), np.floor(points.imag / side)], axis=-1)
    return index.astype(np.int64)


def partition_cells(
    a: float, rows: Sequence[complex] | np.ndarray, cols: Sequence[complex] | np.ndarray
) -> PartitionCells:
    """Vectorized `partition_cell` on a grid of pairs.

    Cells 1..9 are unions of products Q_m × Q_{m+n} of disjoint squares, hence block indicators
    with multiplier norm ≤ 1; cell 0 is the complement of their union, norm ≤ 1 + 9 = 10.
    """
    if a <= 0:
        raise ArgumentError(f"partition_cell needs a > 0, got {a}")
    side = a * math.sqrt(2.0)
    qz = _square_index(np.asarray(rows, dtype=np.complex128).reshape(-1), side)
    qw = _square_index(np.asarray(cols, dtype=np.complex128).reshape(-1), side)
    dm = qw[None, :, 0] - qz[:, None, 0]
    dn = qw[None, :, 1] - qz[:, None, 1]
    labels = np.zeros(dm.shape, dtype=np.int64)
    for cell, (om, on) in enumerate(CELL_OFFSETS, start=1):
        labels[(dm == om) & (dn == on)] = cell
    masks = [labels == cell for cell in range(10)]
    return PartitionCells(labels, masks, [10.0] + [1.0] * 9)


def partition_cell(a: float, z: complex, w: complex) -> int:
    """Cell 0..9 of the pair (z, w).

    Squares of side a√2 tile ℂ half-open; with n the offset between the squares of z and w,
    cells 1..9 are the offsets of CELL_OFFSETS and every other offset is cell 0.  Pairs with
    dist((z, w), Δ) < a land in 1..9 and pairs with dist ≥ 3a in 0.
    """
    if a <= 0:
        raise ArgumentError(f"partition_cell needs a > 0, got {a}")
    side = a * math.sqrt(2.0)
    qz = _square_index(np.asarray([z], dtype=np.complex128), side)[0]
    qw = _square_index(np.asarray([w], dtype=np.complex128), side)[0]
    return _OFFSET_CELL.get((int(qw[0] - qz[0]), int(qw[1] - qz[1])), 0)


def check_separation(points: np.ndarray, delta: float) -> None:
    """Raises PreconditionError naming the first pair of points closer than delta."""
    coords = np.stack([points.real, points.imag], axis=1)
    close = cKDTree(coords).query_pairs(delta * (1.0 - 1e-12), output_type="ndarray")
    if len(close):
        j, k = sorted(close.tolist())[0]
        pair = (complex(points[j]), complex(points[k]))
        raise PreconditionError(
            f"Points {pair[0]} and {pair[1]} are closer than the separation {delta}", pair
        )


def separated_set_bound(
    f: FunctionSpec, points: Sequence[complex] | np.ndarray, delta: float
) -> float:
    """‖D₀f‖_M ≤ 2·‖Ψ‖_{L̂¹}·sup|f(λ)|/δ on a δ-separated set.

    On such a set 1/(z − w) = Ψ((z − w)/δ)/δ for z ≠ w and Ψ(0) = 0, so
    D₀f = diag(f)·Φ − Φ·diag(f) with ‖Φ‖_M ≤ ‖Ψ‖_{L̂¹}/δ.

    Raises:
        PreconditionError: two points closer than delta.
    """
    z = np.asarray(points, dtype=np.complex128).reshape(-1)
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    check_separation(z, delta)
    sup = float(np.max(np.abs(f.evaluate(z)))) if z.size else 0.0
    if sup == 0.0:
        return 0.0
    c = psi_constant()
    psi_norm = 2.0 * (c.c + c.quadrature_error)
    return 2.0 * psi_norm * sup / delta


def psi_kernel(points_row: np.ndarray, points_col: np.ndarray, delta: float) -> ComplexMatrix:
    "Φ_jk = Ψ((z_j − w_k)/δ)/δ, the separated-set factor of D₀f."
    gap = np.asarray(points_row)[:, None] - np.asarray(points_col)[None, :]
    return np.asarray(psi(gap / delta)) / delta


Kernel2 = Callable[[np.ndarray, np.ndarray], np.ndarray]


class RepresentationBound(NamedTuple):
    "f(z) − f(w) = (z − w)·g₁ + (z̄ − w̄)·g₂ on the set, so ‖f‖_OL ≤ ‖g₁‖_M + ‖g₂‖_M there."

    value: float
    g1: MultiplierEstimate
    g2: MultiplierEstimate
    residual: float


def representation_bound(
    f: FunctionSpec,
    points: Sequence[complex] | np.ndarray,
    g1: Kernel2,
    g2: Kernel2,
    iterations: int = 50,
    seed: int = 0,
) -> RepresentationBound:
    """Certified operator-Lipschitz bound on a point set from a two-term representation.

    Raises:
        ValidationError: the representation fails entrywise by more than 1e-10 (relative).
    """
    z = np.asarray(points, dtype=np.complex128).reshape(-1)
    zz, ww = np.meshgrid(z, z, indexing="ij")
    k1 = np.broadcast_to(np.asarray(g1(zz, ww), dtype=np.complex128), zz.shape)
    k2 = np.broadcast_to(np.asarray(g2(zz, ww), dtype=np.complex128), zz.shape)
    fz = f.evaluate(z)
    lhs = fz[:, None] - fz[None, :]
    residual = float(np.max(np.abs(lhs - (zz - ww) * k1 - np.conj(zz - ww) * k2)))
    scale = max(1.0, float(np.max(np.abs(lhs))))
    if residual > 1e-10 * scale:
        raise ValidationError(
            f"Representation of {f.key} fails with residual {residual:.3e}", residual
        )
    e1 = multiplier_upper(k1, iterations, seed)
    e2 = multiplier_upper(k2, iterations, seed)
    return RepresentationBound(e1.upper + e2.upper, e1, e2, residual)


class LatticeBoundRow(NamedTuple):
    f: str
    r: float
    delta: float
    lower: float
    upper: float
    ratio: float
    points: int


def lattice_bound_row(
    delta: float, r: float, f: FunctionSpec, budget: int = 64, iterations: int = 50, seed: int = 0
) -> LatticeBoundRow:
    """Two-sided bound for ‖D₀f‖_M on (δℤ + iδℤ) ∩ clos(rD).

    For z̄ the lower side is the Schur test on the rescaled integer lattice (D₀z̄ is invariant
    under dilation) and the upper side the dyadic construction.  Other functions use dense
    multiplier estimates on small sets, the max-entry bound otherwise, and the separated-set
    bound (plus twice the closed-form CL norm when known) on the upper side.
    """
    spec = LatticeSpec(delta, r)
    points = lattice_points(spec)
    if f.family == "conj":
        lower = niz_lower_bound(r / delta).bound
        upper = conj_upper_bound(spec)
    else:
        phi = divided_difference(f, points, points).matrix
        upper = separated_set_bound(f, points, delta)
        if f.cl_norm is not None:
            # Zeroing the diagonal of D₁f costs sup|f'| ≤ ‖f‖_CL.
            upper = min(upper, 2.0 * f.cl_norm)
        if points.size <= SEARCH_LIMIT:
            lower = multiplier_lower(phi, budget, seed).lower
            upper = min(upper, multiplier_upper(phi, iterations, seed).upper)
        else:
            lower = float(np.max(np.abs(phi)))
    ratio = upper / lower if lower > 0 else math.inf
    logger.info(f"lattice-bound {f.key} δ={delta} r={r}: [{lower:.6g}, {upper:.6g}]")
    return LatticeBoundRow(f.key, r, delta, lower, upper, ratio, int(points.size))
