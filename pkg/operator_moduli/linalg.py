"""Dense complex linear algebra kernel.

Normal operators are kept in spectral form (eigenvalues + unitary conjugator); dense matrices
are derived from that data, so functional calculus is exact up to the final matrix products.
"""
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Any, Literal

import numpy as np
import scipy.linalg

from operator_moduli.errors import (
    ArgumentError,
    ConsistencyError,
    PreconditionError,
    ValidationError,
)

if TYPE_CHECKING:
    from operator_moduli.functions import FunctionSpec

logger = logging.getLogger("LinalgLogger")

# Membership tests (unitary, self-adjoint, projection, contraction).
MEMBERSHIP_TOL = 1e-10
# ‖NN* − N*N‖ ≤ NORMALITY_TOL·‖N‖².
NORMALITY_TOL = 1e-9
# Eigenvalues closer than this share one spectral projection.
CLUSTER_TOL = 1e-12

ComplexMatrix = np.ndarray
"Two-dimensional complex128 array. Finite entries, row-major."

Support = Literal["disc", "line", "circle", "lattice"]


@dataclass(kw_only=True)
class PowerIterationSettings:
    "Knobs of `operator_norm`."

    # Stop when the Rayleigh quotient changes by less than this (relative).
    tol: float = 1e-12
    max_iter: int = 10_000
    # The estimate is accepted once (1 + margin)·ρ·I − M*M is certified positive definite.
    certify_margin: float = 2e-10
    # Gram matrices up to this size skip power iteration and go to LAPACK directly.
    direct_size: int = 64


DEFAULT_POWER_SETTINGS = PowerIterationSettings()


def as_matrix(m: Any, name: str = "matrix") -> ComplexMatrix:
    """Coerce to a finite complex128 matrix.

    Raises:
        ArgumentError: not two-dimensional, empty, or with NaN/inf entries.
    """
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ArgumentError(f"{name} must be two-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise ArgumentError(f"{name} is empty (shape {a.shape})")
    if not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} has non-finite entries")
    return a


def jacobi_singular_values(
    m: ComplexMatrix, tol: float = 1e-15, max_sweeps: int = 80
) -> np.ndarray:
    """Singular values by one-sided (Hestenes) Jacobi rotations, largest first.

    Column pairs are rotated in round-robin order, n/2 disjoint pairs at a time, until every
    pair is orthogonal to `tol` relative to the column norms.

    Args:
        m (ComplexMatrix): input matrix.
        tol (float): relative orthogonality threshold.
        max_sweeps (int): sweep cap; a warning is issued if it is hit.

    Returns:
        np.ndarray: singular values in nonincreasing order.
    """
    a = as_matrix(m).copy()
    if a.shape[0] < a.shape[1]:
        a = a.conj().T
    rows, n = a.shape
    if n % 2:
        a = np.hstack([a, np.zeros((rows, 1), dtype=np.complex128)])
        n += 1
    order = np.arange(n)
    for sweep in range(max_sweeps):
        rotated = False
        for _ in range(n - 1):
            p = order[: n // 2]
            q = order[n // 2 :][::-1]
            ap, aq = a[:, p], a[:, q]
            alpha = np.sum(np.abs(ap) ** 2, axis=0)
            beta = np.sum(np.abs(aq) ** 2, axis=0)
            gamma = np.sum(ap.conj() * aq, axis=0)
            mod = np.abs(gamma)
            active = mod > tol * np.sqrt(alpha * beta)
            if np.any(active):
                rotated = True
                phase = np.ones_like(gamma)
                phase[active] = gamma[active] / mod[active]
                zeta = np.zeros_like(alpha)
                zeta[active] = (beta[active] - alpha[active]) / (2.0 * mod[active])
                sign = np.where(zeta >= 0.0, 1.0, -1.0)
                t = np.where(active, sign / (np.abs(zeta) + np.sqrt(1.0 + zeta**2)), 0.0)
                c = 1.0 / np.sqrt(1.0 + t**2)
                s = c * t
                aq_aligned = aq * phase.conj()
                new_p = c * ap - s * aq_aligned
                new_q = (s * ap + c * aq_aligned) * phase
                a[:, p] = new_p
                a[:, q] = new_q
            order = np.concatenate([order[:1], order[-1:], order[1:-1]])
        if not rotated:
            logger.debug(f"Jacobi SVD converged after {sweep + 1} sweeps")
            break
    else:
        warnings.warn(f"Jacobi SVD hit the sweep cap ({max_sweeps}); result may be inaccurate")
    return np.sort(np.linalg.norm(a, axis=0))[::-1]


def operator_norm(
    m: ComplexMatrix, settings: PowerIterationSettings = DEFAULT_POWER_SETTINGS
) -> float:
    """Largest singular value, relative accuracy 1e-10.

    Small matrices go to LAPACK `svdvals`.  Larger ones use power iteration on the smaller Gram
    matrix G from the normalized all-ones vector; the Rayleigh quotient ρ is accepted only after
    a Cholesky factorization certifies (1 + margin)·ρ·I − G ≻ 0, otherwise (or on
    non-convergence) the Jacobi SVD is used.

    Raises:
        ArgumentError: empty or non-finite matrix.
    """
    a = as_matrix(m)
    if not np.any(a):
        return 0.0
    if min(a.shape) <= settings.direct_size:
        return float(scipy.linalg.svdvals(a, check_finite=False)[0])
    gram = a.conj().T @ a if a.shape[1] <= a.shape[0] else a @ a.conj().T
    n = gram.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n), dtype=np.complex128)
    rho = 0.0
    converged = False
    for _ in range(settings.max_iter):
        w = gram @ v
        rho_next = float(np.real(np.vdot(v, w)))
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            break
        v = w / w_norm
        if abs(rho_next - rho) <= settings.tol * max(rho_next, np.finfo(float).tiny):
            rho = rho_next
            converged = True
            break
        rho = rho_next
    if converged and rho > 0.0:
        shift = (1.0 + settings.certify_margin) * rho
        try:
            scipy.linalg.cholesky(shift * np.eye(n) - gram, lower=True, check_finite=False)
            return float(np.sqrt(rho))
        except np.linalg.LinAlgError:
            logger.debug("Power iteration estimate failed certification")
    warnings.warn(
        f"Power iteration did not certify the norm of a {a.shape} matrix; "
        "falling back to Jacobi SVD"
    )
    return float(jacobi_singular_values(a)[0])


class OperatorClass(str, Enum):
    "Partner classes of the commutator moduli."

    SA = "SA"
    U = "U"
    USA = "USA"
    P = "P"
    CONTRACTION = "CONTRACTION"
    ANY = "ANY"


def membership_defect(m: ComplexMatrix, tag: OperatorClass | str) -> float:
    """How far `m` is from the class (0 for exact members).

    SA: ‖M − M*‖.  U: ‖M*M − I‖.  USA: max of both.  P: max(‖M − M*‖, ‖M² − M‖).
    CONTRACTION: max(0, ‖M‖ − 1).  Non-square matrices are infinitely far from the square classes.
    """
    a = as_matrix(m)
    tag = OperatorClass(tag)
    if tag is OperatorClass.ANY:
        return 0.0
    if tag is OperatorClass.CONTRACTION:
        return max(0.0, operator_norm(a) - 1.0)
    if a.shape[0] != a.shape[1]:
        return float("inf")
    eye = np.eye(a.shape[0])
    sa = operator_norm(a - a.conj().T)
    match tag:
        case OperatorClass.SA:
            return sa
        case OperatorClass.U:
            return operator_norm(a.conj().T @ a - eye)
        case OperatorClass.USA:
            return max(sa, operator_norm(a.conj().T @ a - eye))
        case OperatorClass.P:
            return max(sa, operator_norm(a @ a - a))
    raise ArgumentError(f"Unknown operator class {tag}")


def classify(m: ComplexMatrix, tag: OperatorClass | str, tol: float | None = None) -> bool:
    return membership_defect(m, tag) <= (MEMBERSHIP_TOL if tol is None else tol)


@dataclass(frozen=True)
class NormalOperator:
    """Normal matrix U·diag(eigenvalues)·U* stored in spectral form.

    Use `make_normal` to build validated instances.
    """

    eigenvalues: np.ndarray
    conjugator: ComplexMatrix = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @cached_property
    def matrix(self) -> ComplexMatrix:
        u = self.conjugator
        return (u * self.eigenvalues) @ u.conj().T

    def adjoint(self) -> "NormalOperator":
        return NormalOperator(self.eigenvalues.conj(), self.conjugator)

    def spectral_projections(self, tol: float | None = None) -> list[tuple[complex, ComplexMatrix]]:
        "Pairs (λ, E_N({λ})) over eigenvalue clusters."
        labels, representatives = eigenvalue_clusters(self.eigenvalues, tol)
        projections = []
        for label, value in enumerate(representatives):
            cols = self.conjugator[:, labels == label]
            projections.append((complex(value), cols @ cols.conj().T))
        return projections

    def normality_defect(self) -> float:
        n = self.matrix
        scale = max(operator_norm(n) ** 2, 1.0)
        return operator_norm(n @ n.conj().T - n.conj().T @ n) / scale


def make_normal(eigenvalues: Any, conjugator: Any) -> NormalOperator:
    """Normal operator with exactly the given spectral data.

    Raises:
        ArgumentError: shapes do not match.
        ValidationError: the conjugator is not unitary to MEMBERSHIP_TOL (carries the defect).
    """
    values = np.asarray(eigenvalues, dtype=np.complex128).reshape(-1)
    u = as_matrix(conjugator, "conjugator")
    if u.shape != (values.shape[0], values.shape[0]):
        raise ArgumentError(
            f"Conjugator shape {u.shape} does not match {values.shape[0]} eigenvalues"
        )
    if not np.all(np.isfinite(values)):
        raise ArgumentError("Eigenvalues must be finite")
    defect = operator_norm(u.conj().T @ u - np.eye(u.shape[0]))
    if defect > MEMBERSHIP_TOL:
        raise ValidationError(f"Conjugator is not unitary: ‖U*U − I‖ = {defect:.3e}", defect)
    values.setflags(write=False)
    u = u.copy()
    u.setflags(write=False)
    return NormalOperator(values, u)


def diagonal_normal(eigenvalues: Any) -> NormalOperator:
    values = np.asarray(eigenvalues, dtype=np.complex128).reshape(-1)
    return make_normal(values, np.eye(values.shape[0], dtype=np.complex128))


def apply_function(f: "FunctionSpec", n: NormalOperator) -> ComplexMatrix:
    """f(N) = U·diag(f(λ_j))·U*.

    Raises:
        DomainError: f is undefined at an eigenvalue; the message names the point.
    """
    values = f.evaluate(n.eigenvalues)
    u = n.conjugator
    return (u * values) @ u.conj().T


def eigenvalue_clusters(
    values: np.ndarray, tol: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Group eigenvalues lying within `tol` of a cluster representative.

    Returns:
        (labels, representatives): `labels[j]` indexes `representatives`; representatives
        are first occurrences, in input order.
    """
    tol = CLUSTER_TOL if tol is None else tol
    values = np.asarray(values, dtype=np.complex128).reshape(-1)
    labels = np.full(values.shape[0], -1, dtype=np.int64)
    representatives: list[complex] = []
    for j, value in enumerate(values):
        if representatives:
            distance = np.abs(np.asarray(representatives) - value)
            nearest = int(np.argmin(distance))
            if distance[nearest] <= tol:
                labels[j] = nearest
                continue
        labels[j] = len(representatives)
        representatives.append(complex(value))
    return labels, np.asarray(representatives, dtype=np.complex128)


def psd_sqrt(h: ComplexMatrix) -> ComplexMatrix:
    "Square root of a positive semidefinite Hermitian matrix by spectral calculus."
    h = as_matrix(h)
    w, v = scipy.linalg.eigh((h + h.conj().T) / 2.0)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


# ----------------------------------------------------------------------------------------
# Block lifts
# ----------------------------------------------------------------------------------------


def diag2(n1: NormalOperator, n2: NormalOperator) -> NormalOperator:
    "Block-diagonal normal operator N₁ ⊕ N₂; its spectrum is the multiset union."
    conjugator = scipy.linalg.block_diag(n1.conjugator, n2.conjugator)
    return NormalOperator(
        np.concatenate([n1.eigenvalues, n2.eigenvalues]), conjugator.astype(np.complex128)
    )


def antidiag_sym(r: ComplexMatrix) -> ComplexMatrix:
    "[[0, R], [R*, 0]]."
    r = as_matrix(r, "R")
    rows, cols = r.shape
    out = np.zeros((rows + cols, rows + cols), dtype=np.complex128)
    out[:rows, rows:] = r
    out[rows:, :rows] = r.conj().T
    return out


def corner(r: ComplexMatrix) -> ComplexMatrix:
    "[[0, R], [0, 0]], conformable with N₁ ⊕ N₂ when R is dim(N₁)×dim(N₂)."
    r = as_matrix(r, "R")
    rows, cols = r.shape
    out = np.zeros((rows + cols, rows + cols), dtype=np.complex128)
    out[:rows, rows:] = r
    return out


def swap(dim: int) -> ComplexMatrix:
    "[[0, I], [I, 0]] of size 2·dim."
    if dim < 1:
        raise ArgumentError(f"swap needs dim ≥ 1, got {dim}")
    eye = np.eye(dim, dtype=np.complex128)
    zero = np.zeros_like(eye)
    return np.block([[zero, eye], [eye, zero]])


def unitary_dilation(a: ComplexMatrix, tau: float) -> ComplexMatrix:
    """[[τA, S], [−S, τA]] with S = (I − τ²A²)^{1/2}; unitary for self-adjoint A with ‖τA‖ < 1.

    Raises:
        ArgumentError: A is not self-adjoint.
        PreconditionError: ‖τA‖ ≥ 1.
        ConsistencyError: the result fails the unitarity recheck.
    """
    a = as_matrix(a, "A")
    if not classify(a, OperatorClass.SA):
        raise ArgumentError("unitary_dilation needs a self-adjoint A")
    scaled = tau * operator_norm(a)
    if scaled >= 1.0:
        raise PreconditionError(f"unitary_dilation needs ‖τA‖ < 1, got {scaled:.6g}", scaled)
    t = tau * (a + a.conj().T) / 2.0
    s = psd_sqrt(np.eye(a.shape[0]) - t @ t)
    u = np.block([[t, s], [-s, t]])
    defect = membership_defect(u, OperatorClass.U)
    if defect > MEMBERSHIP_TOL:
        raise ConsistencyError(f"Dilation is not unitary (defect {defect:.3e})")
    return u


def lift(kind: str, *parts: Any, tau: float | None = None) -> NormalOperator | ComplexMatrix:
    """Dispatch to the block constructions by name.

    kinds: diag2(N₁, N₂), antidiag_sym(R), corner(R), swap(dim), unitary_dilation(A, tau=τ).
    """
    match kind:
        case "diag2":
            return diag2(*parts)
        case "antidiag_sym":
            return antidiag_sym(*parts)
        case "corner":
            return corner(*parts)
        case "swap":
            return swap(*parts)
        case "unitary_dilation":
            if tau is None:
                raise ArgumentError("unitary_dilation needs tau")
            return unitary_dilation(*parts, tau=tau)
        case _:
            raise ArgumentError(f"Unknown lift kind {kind!r}")


def sqrt_defect_check(t: ComplexMatrix, x: ComplexMatrix) -> float:
    """Slack of ‖(I−T²)^{1/2}X − X(I−T²)^{1/2}‖ ≤ ‖T‖‖XT − TX‖/(1 − ‖T‖²)^{1/2}.

    Nonnegative slack means the inequality holds.  T must be self-adjoint with ‖T‖ < 1.
    """
    t = as_matrix(t, "T")
    x = as_matrix(x, "X")
    t_norm = operator_norm(t)
    if t_norm >= 1.0 or not classify(t, OperatorClass.SA):
        raise PreconditionError(f"Need self-adjoint T with ‖T‖ < 1, got ‖T‖ = {t_norm:.6g}")
    s = psd_sqrt(np.eye(t.shape[0]) - t @ t)
    lhs = operator_norm(s @ x - x @ s)
    rhs = t_norm * operator_norm(x @ t - t @ x) / np.sqrt(1.0 - t_norm**2)
    return float(rhs - lhs)


# ----------------------------------------------------------------------------------------
# Random operators
# ----------------------------------------------------------------------------------------


def haar_unitary(dim: int, generator: np.random.Generator) -> ComplexMatrix:
    "Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of diag(R) removed."
    shape = (dim, dim)
    z = (generator.standard_normal(shape) + 1j * generator.standard_normal(shape)) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diag(r)
    phases = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return q * phases


def random_hermitian(dim: int, generator: np.random.Generator) -> ComplexMatrix:
    "GUE-type Hermitian matrix normalized to operator norm 1."
    z = generator.standard_normal((dim, dim)) + 1j * generator.standard_normal((dim, dim))
    h = (z + z.conj().T) / 2.0
    norm = operator_norm(h)
    return h / norm if norm > 0 else np.eye(dim, dtype=np.complex128)


def random_matrix(rows: int, cols: int, generator: np.random.Generator) -> ComplexMatrix:
    "Complex Gaussian matrix normalized to operator norm 1."
    z = generator.standard_normal((rows, cols)) + 1j * generator.standard_normal((rows, cols))
    return z / operator_norm(z)


def random_spectrum(
    dim: int,
    generator: np.random.Generator,
    radius: float = 1.0,
    support: Support = "disc",
    pitch: float | None = None,
) -> np.ndarray:
    """Eigenvalues drawn from the closed set F.

    disc: uniform in clos(rD).  line: uniform on [−r, r].  circle: uniform on |z| = r.
    lattice: uniform among pitch·(ℤ+iℤ) ∩ clos(rD) (pitch defaults to r/4).
    """
    match support:
        case "disc":
            rho = radius * np.sqrt(generator.uniform(0.0, 1.0, dim))
            return rho * np.exp(2j * np.pi * generator.uniform(0.0, 1.0, dim))
        case "line":
            return generator.uniform(-radius, radius, dim).astype(np.complex128)
        case "circle":
            return radius * np.exp(2j * np.pi * generator.uniform(0.0, 1.0, dim))
        case "lattice":
            step = pitch if pitch is not None else radius / 4.0
            k = int(np.floor(radius / step))
            m, n = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
            points = step * (m + 1j * n).reshape(-1)
            points = points[np.abs(points) <= radius * (1 + 1e-12)]
            return generator.choice(points, size=dim, replace=True)
    raise ArgumentError(f"Unknown support {support!r}")


def project_to_support(
    values: np.ndarray, radius: float = 1.0, support: Support = "disc"
) -> np.ndarray:
    "Nearest points of F (used after Gaussian steps on eigenvalues)."
    values = np.asarray(values, dtype=np.complex128)
    match support:
        case "disc":
            modulus = np.abs(values)
            scale = np.where(modulus > radius, radius / np.where(modulus > 0, modulus, 1.0), 1.0)
            return values * scale
        case "line":
            return np.clip(values.real, -radius, radius).astype(np.complex128)
        case "circle":
            modulus = np.abs(values)
            safe = np.where(modulus > 0, modulus, 1.0)
            return np.where(modulus > 0, radius * values / safe, radius)
        case "lattice":
            return values
    raise ArgumentError(f"Unknown support {support!r}")


def in_support(
    values: np.ndarray, radius: float, support: Support = "disc", tol: float = 1e-12
) -> bool:
    values = np.asarray(values, dtype=np.complex128)
    slack = radius * (1.0 + tol) + tol
    match support:
        case "line":
            on_line = np.all(np.abs(values.imag) <= tol * max(radius, 1.0))
            return bool(on_line and np.all(np.abs(values.real) <= slack))
        case "circle":
            return bool(np.all(np.abs(np.abs(values) - radius) <= tol * max(radius, 1.0) + tol))
        case _:
            return bool(np.all(np.abs(values) <= slack))


def random_normal(
    dim: int,
    generator: np.random.Generator,
    radius: float = 1.0,
    support: Support = "disc",
) -> NormalOperator:
    "Normal operator with Haar conjugator and spectrum drawn from F."
    if dim < 1:
        raise ArgumentError(f"dim must be ≥ 1, got {dim}")
    values = random_spectrum(dim, generator, radius, support)
    return make_normal(values, haar_unitary(dim, generator))


def unitary_step(u: ComplexMatrix, scale: float, generator: np.random.Generator) -> ComplexMatrix:
    "Geodesic step U·exp(iεH) with H a normalized random Hermitian direction."
    h = random_hermitian(u.shape[0], generator)
    return u @ scipy.linalg.expm(1j * scale * h)


# ----------------------------------------------------------------------------------------
# Interchange format
# ----------------------------------------------------------------------------------------


def matrix_to_json(m: ComplexMatrix) -> dict[str, Any]:
    "{dim, rows, cols, re[], im[]} with row-major flat arrays; dim is null for non-square."
    a = as_matrix(m)
    rows, cols = a.shape
    return {
        "dim": rows if rows == cols else None,
        "rows": rows,
        "cols": cols,
        "re": a.real.reshape(-1).tolist(),
        "im": a.imag.reshape(-1).tolist(),
    }


def matrix_from_json(payload: dict[str, Any]) -> ComplexMatrix:
    """Inverse of `matrix_to_json`.

    Raises:
        ValidationError: missing fields or rows·cols different from the entry count.
    """
    try:
        rows, cols = int(payload["rows"]), int(payload["cols"])
        re = np.asarray(payload["re"], dtype=float)
        im = np.asarray(payload["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"Malformed matrix payload: {e}") from e
    if re.shape != (rows * cols,) or im.shape != (rows * cols,):
        raise ValidationError(
            f"Matrix payload has {re.size}/{im.size} entries, expected rows·cols = {rows * cols}"
        )
    if payload.get("dim") is not None and (rows != cols or int(payload["dim"]) != rows):
        raise ValidationError("Matrix payload dim does not match rows/cols")
    a = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(a)):
        raise ValidationError("Matrix payload has non-finite entries")
    return a


def normal_to_json(n: NormalOperator) -> dict[str, Any]:
    return {
        "dim": n.dim,
        "eigenvalues": {"re": n.eigenvalues.real.tolist(), "im": n.eigenvalues.imag.tolist()},
        "conjugator": matrix_to_json(n.conjugator),
    }


def normal_from_json(payload: dict[str, Any]) -> NormalOperator:
    try:
        values = np.asarray(payload["eigenvalues"]["re"], dtype=float) + 1j * np.asarray(
            payload["eigenvalues"]["im"], dtype=float
        )
        conjugator = matrix_from_json(payload["conjugator"])
    except (KeyError, TypeError) as e:
        raise ValidationError(f"Malformed normal operator payload: {e}") from e
    try:
        return make_normal(values, conjugator)
    except ArgumentError as e:
        raise ValidationError(str(e)) from e


__all__ = [
    "CLUSTER_TOL",
    "ComplexMatrix",
    "MEMBERSHIP_TOL",
    "NORMALITY_TOL",
    "NormalOperator",
    "OperatorClass",
    "PowerIterationSettings",
    "antidiag_sym",
    "apply_function",
    "as_matrix",
    "classify",
    "corner",
    "diag2",
    "diagonal_normal",
    "eigenvalue_clusters",
    "haar_unitary",
    "in_support",
    "jacobi_singular_values",
    "lift",
    "make_normal",
    "matrix_from_json",
    "matrix_to_json",
    "membership_defect",
    "normal_from_json",
    "normal_to_json",
    "operator_norm",
    "project_to_support",
    "psd_sqrt",
    "random_hermitian",
    "random_matrix",
    "random_normal",
    "random_spectrum",
    "sqrt_defect_check",
    "swap",
    "unitary_dilation",
    "unitary_step",
]
