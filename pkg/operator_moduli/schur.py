"""Finite Schur multipliers: Schur–Hadamard products and two-sided multiplier-norm estimates.

The multiplier norm of Φ is ‖Φ‖_M = sup{‖Φ ⋆ B‖ : ‖B‖ ≤ 1}.  Lower bounds come with the test
matrix B that achieves them; upper bounds come with a factorization Φ_jk = Σ_m x_jm·y_km, for
which ‖Φ‖_M ≤ max_j‖x_j‖·max_k‖y_k‖.  An upper bound without a verified factorization is +inf.
"""
import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
import scipy.linalg

from operator_moduli.errors import ArgumentError, ConsistencyError, ValidationError
from operator_moduli.linalg import (
    ComplexMatrix,
    as_matrix,
    matrix_from_json,
    matrix_to_json,
    operator_norm,
)
from operator_moduli.utils import rng, run_seeded_tasks

logger = logging.getLogger("SchurLogger")

# Certificates must reproduce Φ to this tolerance, relative to max(1, max|Φ|).
FACTORIZATION_TOL = 1e-10
# Singular values below this fraction of the largest one are dropped from the factorization.
RANK_CUTOFF = 1e-13
# Fraction of the lower-bound budget spent on random test matrices; the rest goes to ascent.
RANDOM_FRACTION = 0.6


class FactorizationCertificate(NamedTuple):
    """Rows x_j of `x` and y_k of `y` with Φ_jk = Σ_m x_jm·y_km."""

    x: np.ndarray
    y: np.ndarray

    def reproduce(self) -> ComplexMatrix:
        return self.x @ self.y.T

    @property
    def value(self) -> float:
        "max_j‖x_j‖ · max_k‖y_k‖, the certified multiplier-norm bound."
        return float(np.linalg.norm(self.x, axis=1).max() * np.linalg.norm(self.y, axis=1).max())

    def residual(self, phi: ComplexMatrix) -> float:
        return float(np.max(np.abs(self.reproduce() - phi)))

    def verify(self, phi: ComplexMatrix, tol: float = FACTORIZATION_TOL) -> bool:
        phi = as_matrix(phi, "phi")
        if self.x.shape[0] != phi.shape[0] or self.y.shape[0] != phi.shape[1]:
            return False
        return self.residual(phi) <= tol * max(1.0, float(np.max(np.abs(phi))))

    def transpose(self) -> "FactorizationCertificate":
        "Certificate of the flipped matrix Φ_♭ = Φᵀ."
        return FactorizationCertificate(self.y, self.x)

    def tensor(self, other: "FactorizationCertificate") -> "FactorizationCertificate":
        "Row-wise Kronecker products: a certificate of Φ₁ ⋆ Φ₂ with value ≤ value₁·value₂."
        x = np.einsum("jm,jn->jmn", self.x, other.x).reshape(self.x.shape[0], -1)
        y = np.einsum("km,kn->kmn", self.y, other.y).reshape(self.y.shape[0], -1)
        return FactorizationCertificate(x, y)

    def rebalanced(self) -> "FactorizationCertificate":
        "Rescale so that max_j‖x_j‖ = max_k‖y_k‖ (the product is unchanged)."
        mx = np.linalg.norm(self.x, axis=1).max()
        my = np.linalg.norm(self.y, axis=1).max()
        if mx == 0 or my == 0:
            return self
        t = math.sqrt(my / mx)
        return FactorizationCertificate(self.x * t, self.y / t)

    def to_json(self) -> dict[str, Any]:
        return {"x": matrix_to_json(self.x), "y": matrix_to_json(self.y)}

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "FactorizationCertificate":
        try:
            return cls(matrix_from_json(payload["x"]), matrix_from_json(payload["y"]))
        except KeyError as e:
            raise ValidationError(f"Malformed certificate payload: missing {e}") from e


@dataclass(frozen=True, kw_only=True)
class MultiplierEstimate:
    """Two-sided estimate of ‖Φ‖_M.

    Either side may be missing: `multiplier_lower` fills only the lower side (upper = +inf) and
    `multiplier_upper` only the upper side (lower = 0).
    """

    lower: float = 0.0
    upper: float = math.inf
    lower_certificate: ComplexMatrix | None = None
    upper_certificate: FactorizationCertificate | None = None

    @classmethod
    def combine(
        cls, lower: "MultiplierEstimate", upper: "MultiplierEstimate"
    ) -> "MultiplierEstimate":
        return cls(
            lower=lower.lower,
            upper=upper.upper,
            lower_certificate=lower.lower_certificate,
            upper_certificate=upper.upper_certificate,
        )

    @property
    def gap(self) -> float:
        return self.upper / self.lower if self.lower > 0 else math.inf

    def check(self, phi: ComplexMatrix) -> list[str]:
        "Recheck both certificates against Φ; returns the list of violated invariants."
        phi = as_matrix(phi, "phi")
        problems = []
        if self.lower > self.upper + 1e-8:
            problems.append(f"lower {self.lower:.12g} exceeds upper {self.upper:.12g}")
        if self.lower_certificate is not None:
            b = self.lower_certificate
            if operator_norm(b) > 1.0 + 1e-10:
                problems.append("lower certificate is not a contraction")
            if operator_norm(phi * b) < self.lower - 1e-8:
                problems.append("lower certificate does not achieve the lower value")
        if self.upper_certificate is not None:
            if not self.upper_certificate.verify(phi):
                problems.append("upper certificate does not reproduce phi")
            if self.upper_certificate.value > self.upper + 1e-10:
                problems.append("upper certificate value exceeds the upper bound")
        return problems


def schur_product(a: Any, b: Any) -> ComplexMatrix:
    "Entrywise (Schur–Hadamard) product."
    a, b = as_matrix(a, "a"), as_matrix(b, "b")
    if a.shape != b.shape:
        raise ArgumentError(f"Schur product needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def diagonal_indicator(n: int) -> ComplexMatrix:
    return np.eye(n, dtype=np.complex128)


def off_diagonal_indicator(n: int) -> ComplexMatrix:
    return np.ones((n, n), dtype=np.complex128) - np.eye(n)


def block_indicator(row_labels: Sequence[int], col_labels: Sequence[int]) -> ComplexMatrix:
    """Indicator of ⋃_n G_n × H_n, with G_n = {j : row_labels[j] = n}, H_n likewise.

    Negative labels belong to no block.
    """
    rows = np.asarray(row_labels)
    cols = np.asarray(col_labels)
    mask = (rows[:, None] == cols[None, :]) & (rows[:, None] >= 0)
    return mask.astype(np.complex128)


def indicator_certificate(
    row_labels: Sequence[int], col_labels: Sequence[int]
) -> FactorizationCertificate:
    "Exact factorization of `block_indicator` by coordinate vectors (value 1, or 0 if empty)."
    rows = np.asarray(row_labels)
    cols = np.asarray(col_labels)
    labels = sorted(set(rows[rows >= 0].tolist()) & set(cols[cols >= 0].tolist()))
    index = {label: m for m, label in enumerate(labels)}
    rank = max(len(labels), 1)
    x = np.zeros((rows.size, rank), dtype=np.complex128)
    y = np.zeros((cols.size, rank), dtype=np.complex128)
    for j, label in enumerate(rows.tolist()):
        if label in index:
            x[j, index[label]] = 1.0
    for k, label in enumerate(cols.tolist()):
        if label in index:
            y[k, index[label]] = 1.0
    return FactorizationCertificate(x, y)


def _canonical(phi: ComplexMatrix) -> tuple[ComplexMatrix, bool]:
    """Pick one of Φ, Φᵀ deterministically so both orientations give identical estimates.

    Wide matrices are kept, tall ones transposed; square ones are ordered lexicographically
    by (real, imaginary) entries in row-major order.
    """
    rows, cols = phi.shape
    if rows != cols:
        return (phi, False) if rows < cols else (phi.T.copy(), True)
    a = np.stack([phi.real.ravel(), phi.imag.ravel()], axis=1).ravel()
    b = np.stack([phi.T.real.ravel(), phi.T.imag.ravel()], axis=1).ravel()
    differ = np.flatnonzero(a != b)
    if differ.size and b[differ[0]] < a[differ[0]]:
        return phi.T.copy(), True
    return phi, False


def _ascent_step(phi: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """One alternating singular-vector step; never decreases ‖Φ ⋆ B‖.

    With Φ⋆B·v = σu for the top singular pair, σ = Σ_jk G_jk B_jk where G_jk = ū_j Φ_jk v_k.
    The contraction maximizing that pairing is B' = conj(U)·Vᵀ from G = U S Vᴴ, and it
    attains the nuclear norm of G, which is at least σ.
    """
    u, _, vh = scipy.linalg.svd(phi * b)
    g = np.conj(u[:, 0])[:, None] * phi * vh[0].conj()[None, :]
    gu, _, gvh = scipy.linalg.svd(g, full_matrices=False)
    return np.conj(gu) @ np.conj(gvh)


def _score(phi: ComplexMatrix, b: ComplexMatrix) -> tuple[float, ComplexMatrix]:
    norm = operator_norm(b)
    if norm == 0:
        return 0.0, b
    b = b / norm
    return operator_norm(phi * b), b


def multiplier_lower(
    phi: Any,
    budget: int = 64,
    seed: int = 0,
    candidates: Sequence[ComplexMatrix] = (),
) -> MultiplierEstimate:
    """Search-based lower bound for ‖Φ‖_M.

    The max-entry indicator, the normalized all-ones matrix and any caller `candidates` are
    scored first.  Then 60% of the budget goes to seeded complex Gaussian test matrices and 40%
    to singular-vector ascent from the three best matrices seen.  Ties keep the first found.

    Args:
        phi: the multiplier matrix.
        budget (int): number of random draws plus ascent steps, at least 1.
        seed (int): random stream.
        candidates (Sequence[ComplexMatrix]): extra structured test matrices, same shape as Φ.

    Returns:
        MultiplierEstimate: `lower` and the contraction achieving it; `upper` is +inf.
    """
    phi = as_matrix(phi, "phi")
    if budget < 1:
        raise ArgumentError(f"budget must be at least 1, got {budget}")
    for c in candidates:
        if np.shape(c) != phi.shape:
            raise ArgumentError(f"candidate shape {np.shape(c)} does not match phi {phi.shape}")
    work, flipped = _canonical(phi)
    candidates = [np.asarray(c, dtype=np.complex128) for c in candidates]
    if flipped:
        candidates = [c.T for c in candidates]
    rows, cols = work.shape

    pool: list[tuple[float, ComplexMatrix]] = []

    def consider(b: ComplexMatrix) -> None:
        pool.append(_score(work, b))

    peak = np.unravel_index(int(np.argmax(np.abs(work))), work.shape)
    indicator = np.zeros_like(work)
    indicator[peak] = 1.0
    consider(indicator)
    consider(np.ones_like(work))
    for c in candidates:
        consider(c)

    generator = rng(seed)
    n_random = max(1, round(RANDOM_FRACTION * budget))
    for _ in range(n_random):
        shape = (rows, cols)
        consider(generator.standard_normal(shape) + 1j * generator.standard_normal(shape))

    # Stable sort keeps the first-found matrix among equal scores.
    order = sorted(range(len(pool)), key=lambda i: -pool[i][0])
    starts = [pool[i] for i in order[:3]]
    for step in range(budget - n_random):
        slot = step % len(starts)
        value, b = starts[slot]
        stepped = _score(work, _ascent_step(work, b))
        if stepped[0] > value:
            starts[slot] = stepped
            pool.append(stepped)

    best_value, best_b = pool[0]
    for value, b in pool[1:]:
        if value > best_value:
            best_value, best_b = value, b
    logger.debug(f"multiplier_lower {phi.shape}: {best_value:.12g} after {budget} steps")
    return MultiplierEstimate(lower=best_value, lower_certificate=best_b.T if flipped else best_b)


def _weighted_factorization(
    phi: ComplexMatrix, d: np.ndarray, e: np.ndarray
) -> FactorizationCertificate:
    "Factor diag(d)·Φ·diag(e) = U S Vᴴ and undo the weights: X = D⁻¹U√S, Y = E⁻¹conj(V)√S."
    u, s, vh = scipy.linalg.svd(d[:, None] * phi * e[None, :], full_matrices=False)
    keep = s > RANK_CUTOFF * s[0]
    root = np.sqrt(s[keep])
    x = u[:, keep] * root / d[:, None]
    y = vh[keep].T * root / e[:, None]
    return FactorizationCertificate(x, y)


def _reweight(weights: np.ndarray, norms: np.ndarray) -> np.ndarray:
    updated = np.where(norms > 0, weights * norms, weights)
    return updated


def multiplier_upper(phi: Any, iterations: int = 50, seed: int = 0) -> MultiplierEstimate:
    """Certified upper bound for ‖Φ‖_M by reweighted SVD factorizations.

    Each sweep factors diag(d)·Φ·diag(e) at full numerical rank, then moves the row weights d
    (and after a second factorization the column weights e) towards equal row norms of the
    factors.  Two starts are run, unit weights and a seeded log-normal jitter; the smallest
    verified value wins.  Every candidate is rebalanced and must reproduce Φ to
    1e-10·max(1, max|Φ|) before it counts.

    Returns:
        MultiplierEstimate: `upper` with its certificate, or upper = +inf when nothing verified.
    """
    phi = as_matrix(phi, "phi")
    if iterations < 1:
        raise ArgumentError(f"iterations must be at least 1, got {iterations}")
    work, flipped = _canonical(phi)
    rows, cols = work.shape
    if not np.any(work):
        zero = FactorizationCertificate(
            np.zeros((phi.shape[0], 1), dtype=np.complex128),
            np.zeros((phi.shape[1], 1), dtype=np.complex128),
        )
        return MultiplierEstimate(upper=0.0, upper_certificate=zero)

    generator = rng(seed)
    starts = [
        (np.ones(rows), np.ones(cols)),
        (
            np.exp(0.5 * generator.standard_normal(rows)),
            np.exp(0.5 * generator.standard_normal(cols)),
        ),
    ]
    best: FactorizationCertificate | None = None
    residual = math.inf
    for d, e in starts:
        for _ in range(iterations):
            cert = _weighted_factorization(work, d, e)
            if cert.verify(work):
                cert = cert.rebalanced()
                if best is None or cert.value < best.value:
                    best = cert
            else:
                residual = min(residual, cert.residual(work))
            d = _reweight(d, np.linalg.norm(cert.x, axis=1))
            cert = _weighted_factorization(work, d, e)
            e = _reweight(e, np.linalg.norm(cert.y, axis=1))
            shift = math.sqrt(np.exp(np.mean(np.log(d))) / np.exp(np.mean(np.log(e))))
            d = np.clip(d / shift, 1e-6, 1e6)
            e = np.clip(e * shift, 1e-6, 1e6)
    if best is None:
        warnings.warn(
            f"No factorization of the {phi.shape} multiplier reproduced it "
            f"(best residual {residual:.3e}); reporting upper = inf"
        )
        return MultiplierEstimate(upper=math.inf)
    if flipped:
        best = best.transpose()
    logger.debug(f"multiplier_upper {phi.shape}: {best.value:.12g}")
    return MultiplierEstimate(upper=best.value, upper_certificate=best)


def multiplier_estimate(
    phi: Any,
    budget: int = 64,
    iterations: int = 50,
    seed: int = 0,
    candidates: Sequence[ComplexMatrix] = (),
) -> MultiplierEstimate:
    """Both sides of ‖Φ‖_M.

    Raises:
        ConsistencyError: the lower bound exceeds the certified upper bound.
    """
    estimate = MultiplierEstimate.combine(
        multiplier_lower(phi, budget, seed, candidates), multiplier_upper(phi, iterations, seed)
    )
    if estimate.lower > estimate.upper + 1e-8:
        raise ConsistencyError(
            f"Multiplier sandwich violated: lower {estimate.lower:.12g} "
            f"> upper {estimate.upper:.12g}"
        )
    return estimate


def multiplier_lower_parallel(
    phi: Any, budget: int, seeds: Sequence[int], num_concurrent: int = 1
) -> tuple[MultiplierEstimate, int]:
    "Lower-bound search over several seeds; merges by best value, then lowest seed."
    results = run_seeded_tasks(
        lambda s: multiplier_lower(phi, budget, s),
        seeds,
        num_concurrent,
        description="multiplier seeds",
    )
    ranked = sorted(zip(seeds, results), key=lambda pair: (-pair[1].lower, pair[0]))
    best_seed, best = ranked[0]
    return best, best_seed


class ToeplitzBound(NamedTuple):
    "‖Φ‖_M ≤ Σ|c_m| for Φ_jk = Σ_m c_m·exp(−i·Re((z_j − w_k)·conj(ζ_m)))."

    value: float
    phi: ComplexMatrix
    certificate: FactorizationCertificate


def toeplitz_upper(
    points_z: Sequence[complex],
    points_w: Sequence[complex],
    atoms: Sequence[tuple[complex, complex]],
) -> ToeplitzBound:
    """Multiplier bound for a Toeplitz kernel given by a finite Fourier sum.

    Args:
        points_z: row points z_j.
        points_w: column points w_k.
        atoms: (weight c_m, frequency ζ_m) pairs.

    Returns:
        ToeplitzBound: Σ|c_m|, the matrix Φ, and the exponential factorization certifying it.
    """
    if len(atoms) == 0:
        raise ArgumentError("toeplitz_upper needs at least one atom")
    z = np.asarray(points_z, dtype=np.complex128).reshape(-1)
    w = np.asarray(points_w, dtype=np.complex128).reshape(-1)
    weights = np.asarray([a[0] for a in atoms], dtype=np.complex128)
    freqs = np.asarray([a[1] for a in atoms], dtype=np.complex128)
    magnitude = np.abs(weights)
    phase = np.where(magnitude > 0, weights / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    root = np.sqrt(magnitude)
    x = root * phase * np.exp(-1j * np.real(z[:, None] * np.conj(freqs)[None, :]))
    y = root * np.exp(1j * np.real(w[:, None] * np.conj(freqs)[None, :]))
    certificate = FactorizationCertificate(x, y)
    return ToeplitzBound(float(magnitude.sum()), certificate.reproduce(), certificate)
