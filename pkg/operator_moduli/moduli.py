"""Operator and commutator moduli of continuity.

Ω_f(δ)    = sup ‖f(N₁) − f(N₂)‖           over normal N₁, N₂ with ‖N₁ − N₂‖ ≤ δ,
Ω^X_f(δ)  = sup ‖f(N)X − Xf(N)‖           over normal N and partners X of class X
                                          with ‖NX − XN‖ ≤ δ,

for X ∈ {SA, C, U, USA, P}, spectra in a closed set F (a disc, segment, circle or lattice).  At
finite dimension the suprema are approached by searches; every search result is a
`ModulusWitness` whose value is recomputed and rechecked before it is returned or loaded.
"""
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
import scipy.integrate
import scipy.linalg
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from operator_moduli.errors import (
    ArgumentError,
    ConsistencyError,
    PreconditionError,
    ValidationError,
)
from operator_moduli.fourier import psi_constant
from operator_moduli.functions import FunctionSpec, parse_function, sampled_modulus
from operator_moduli.lattice import (
    LatticeSpec,
    conj_upper_bound,
    divided_difference,
    lambda_kernel,
    lattice_points,
    psi_kernel,
    schur_test_lower,
    separated_set_bound,
)
from operator_moduli import linalg
from operator_moduli.linalg import (
    ComplexMatrix,
    NormalOperator,
    OperatorClass,
    Support,
    apply_function,
    as_matrix,
    diag2,
    diagonal_normal,
    eigenvalue_clusters,
    haar_unitary,
    in_support,
    make_normal,
    matrix_from_json,
    matrix_to_json,
    membership_defect,
    normal_from_json,
    normal_to_json,
    operator_norm,
    project_to_support,
    random_hermitian,
    random_matrix,
    random_normal,
    sqrt_defect_check,
    swap,
    unitary_dilation,
    unitary_step,
)
from operator_moduli.schur import multiplier_lower, multiplier_upper
from operator_moduli.utils import SearchProgressBar, rng, run_seeded_tasks

logger = logging.getLogger("ModuliLogger")

# Dense multiplier searches in kme_lower_bound are limited to |Λ|·|M| entries.
DENSE_PAIR_LIMIT = 160_000
# Dense multiplier factorizations in net_upper_bound are limited to this many net points.
NET_DENSE_LIMIT = 400


# ----------------------------------------------------------------------------------------
# Scalar moduli and their integral transforms
# ----------------------------------------------------------------------------------------


class ContractReport(NamedTuple):
    monotone: bool
    subadditive: bool
    worst_violation: float


@dataclass(frozen=True, kw_only=True)
class ModulusSpec:
    """A scalar modulus of continuity ω.

    kinds: `power` (scale·t^α), `bounded_power` (min(scale·t^α, cap)), `linear` (scale·t) and
    `table` (piecewise linear through (t_i, ω_i) with ω(0) = 0, continued past the last sample
    by the power law of the last segment).
    """

    kind: str
    alpha: float = 1.0
    scale: float = 1.0
    cap: float = math.inf
    t: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        match self.kind:
            case "power" | "bounded_power":
                if not 0.0 < self.alpha <= 1.0:
                    raise ArgumentError(f"power moduli need α ∈ (0, 1], got {self.alpha}")
                if self.kind == "bounded_power" and not 0 < self.cap < math.inf:
                    raise ArgumentError(
                        f"bounded_power needs a finite positive cap, got {self.cap}"
                    )
            case "linear":
                pass
            case "table":
                t = np.asarray(self.t)
                v = np.asarray(self.values)
                if t.size < 2 or t.shape != v.shape or np.any(np.diff(t) <= 0) or t[0] <= 0:
                    raise ArgumentError(
                        "table moduli need ≥ 2 increasing positive t with matching values"
                    )
                if np.any(np.diff(v) < 0) or v[0] < 0:
                    raise ArgumentError(
                        "table modulus values must be nonnegative and nondecreasing"
                    )
            case _:
                raise ArgumentError(f"Unknown modulus kind {self.kind!r}")
        if self.scale < 0:
            raise ArgumentError("modulus scale must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "ModulusSpec":
        "`power:α[,scale]`, `bounded_power:α,cap`, `linear[:scale]` or `table:t1/v1;t2/v2;...`."
        kind, _, rest = text.strip().partition(":")
        try:
            match kind:
                case "power":
                    args = [float(a) for a in rest.split(",")]
                    return cls(kind="power", alpha=args[0], scale=args[1] if len(args) > 1 else 1.0)
                case "bounded_power":
                    alpha, cap = (float(a) for a in rest.split(","))
                    return cls(kind="bounded_power", alpha=alpha, cap=cap)
                case "linear":
                    return cls(kind="linear", scale=float(rest) if rest else 1.0)
                case "table":
                    pairs = [p.split("/") for p in rest.split(";") if p]
                    return cls(
                        kind="table",
                        t=tuple(float(a) for a, _ in pairs),
                        values=tuple(float(b) for _, b in pairs),
                    )
        except (ValueError, IndexError) as e:
            raise ArgumentError(f"Malformed modulus {text!r}: {e}") from e
        raise ArgumentError(f"Unknown modulus kind in {text!r}")

    def _tail_exponent(self) -> float:
        t, v = self.t, self.values
        if v[-2] <= 0:
            return 1.0 if v[-1] > 0 else 0.0
        beta = math.log(v[-1] / v[-2]) / math.log(t[-1] / t[-2])
        return max(beta, 0.0)

    def __call__(self, t: Any) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        match self.kind:
            case "power":
                return self.scale * t**self.alpha
            case "bounded_power":
                return np.minimum(self.scale * t**self.alpha, self.cap)
            case "linear":
                return self.scale * t
        ts = np.concatenate([[0.0], self.t])
        vs = np.concatenate([[0.0], self.values])
        inside = np.interp(t, ts, vs)
        beyond = self.values[-1] * (np.maximum(t, self.t[-1]) / self.t[-1]) ** self._tail_exponent()
        return np.where(t <= self.t[-1], inside, beyond)

    def check_contract(self, grid: Sequence[float] | None = None) -> ContractReport:
        "Spot checks: ω nondecreasing and ω(x + y) ≤ ω(x) + ω(y) + 1e-10 on grid pairs."
        points = np.asarray(grid if grid is not None else np.geomspace(1e-4, 10.0, 60), dtype=float)
        w = self(points)
        monotone = bool(np.all(np.diff(w[np.argsort(points)]) >= -1e-12))
        sums = points[:, None] + points[None, :]
        excess = self(sums) - (w[:, None] + w[None, :])
        worst = float(np.max(excess))
        return ContractReport(monotone, worst <= 1e-10, max(worst, 0.0))


def _table_transform(omega: ModulusSpec, delta: float, order: int) -> float:
    last_t, last_v = omega.t[-1], omega.values[-1]
    beta = omega._tail_exponent()
    if beta >= 1.0:
        return math.inf
    start = max(delta, last_t)
    # Past the table ω(t) = last_v·(t/T)^β, integrated in closed form.
    tail_scale = last_v * (start / last_t) ** beta / start
    if order == 1:
        tail = delta * tail_scale / (1.0 - beta)
    else:
        log_term = math.log(start / delta) / (1.0 - beta)
        tail = delta * tail_scale * (1.0 / (1.0 - beta) ** 2 + log_term)
    if delta >= last_t:
        return tail
    breaks = [t for t in omega.t if delta < t < last_t]
    if order == 1:
        body, _ = scipy.integrate.quad(
            lambda t: float(omega(t)) / t**2, delta, last_t, points=breaks or None, limit=200
        )
    else:
        body, _ = scipy.integrate.quad(
            lambda t: float(omega(t)) * math.log(t / delta) / t**2,
            delta,
            last_t,
            points=breaks or None,
            limit=200,
        )
    return delta * body + tail


def omega_transform(omega: ModulusSpec, delta: float, order: int = 1) -> float:
    """ω*(δ) = δ∫_δ^∞ ω(t)/t² dt (order 1) or ω**(δ) = δ∫_δ^∞ ω(t)·log(t/δ)/t² dt (order 2).

    Closed forms for power moduli (δ^α/(1−α) and δ^α/(1−α)²); quadrature plus analytic tails
    otherwise.  Divergent integrals return +inf.

    Raises:
        ArgumentError: δ ≤ 0 or order not in {1, 2}.
    """
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    if order not in (1, 2):
        raise ArgumentError(f"order must be 1 or 2, got {order}")
    match omega.kind:
        case "linear":
            return 0.0 if omega.scale == 0 else math.inf
        case "power":
            if omega.alpha >= 1.0:
                return 0.0 if omega.scale == 0 else math.inf
            return omega.scale * delta**omega.alpha / (1.0 - omega.alpha) ** order
        case "bounded_power":
            knee = (omega.cap / omega.scale) ** (1.0 / omega.alpha) if omega.scale > 0 else 0.0
            start = max(delta, knee)
            # Past the knee ω ≡ cap.
            if order == 1:
                tail = delta * omega.cap / start
            else:
                tail = delta * omega.cap * (1.0 + math.log(start / delta)) / start
            if delta >= knee:
                return tail
            a = omega.alpha
            if order == 1:
                body, _ = scipy.integrate.quad(lambda t: omega.scale * t ** (a - 2.0), delta, knee)
            else:
                body, _ = scipy.integrate.quad(
                    lambda t: omega.scale * t ** (a - 2.0) * math.log(t / delta), delta, knee
                )
            return delta * body + tail
    return _table_transform(omega, delta, order)


def measured_modulus_spec(
    f: FunctionSpec, radius: float = 1.0, grid: Sequence[float] | None = None, seed: int = 0
) -> ModulusSpec:
    "Table modulus of f on clos(rD): the exact ω_f when on record, else sampled and monotonized."
    t = np.asarray(grid if grid is not None else np.geomspace(1e-3, 2.0 * radius, 40), dtype=float)
    if f.modulus is not None and f.modulus_exact:
        values = f.omega(t)
    else:
        values = np.array([sampled_modulus(f, float(s), radius, seed=seed) for s in t])
    values = np.maximum.accumulate(np.maximum(values, 0.0))
    return ModulusSpec(kind="table", t=tuple(t.tolist()), values=tuple(values.tolist()))


# ----------------------------------------------------------------------------------------
# Witnesses
# ----------------------------------------------------------------------------------------


class ModulusKind(str, Enum):
    PLAIN = "PLAIN"
    SA = "SA"
    C = "C"
    U = "U"
    USA = "USA"
    P = "P"


# Partners of SA and C witnesses are contractions: a scaled witness τR is still admissible.
PARTNER_CLASSES: dict[ModulusKind, tuple[OperatorClass, ...]] = {
    ModulusKind.SA: (OperatorClass.SA, OperatorClass.CONTRACTION),
    ModulusKind.C: (OperatorClass.CONTRACTION,),
    ModulusKind.U: (OperatorClass.U,),
    ModulusKind.USA: (OperatorClass.USA,),
    ModulusKind.P: (OperatorClass.P,),
}


@dataclass(frozen=True, kw_only=True)
class ModulusWitness:
    """A concrete configuration lower-bounding Ω^kind_f(delta).

    PLAIN: `n1`, `n2`, no partner.  C: `n1`, partner R, and optionally `n2` (quasicommutator
    f(N₁)R − Rf(N₂)).  SA/U/USA/P: `n1` and the partner.
    """

    kind: ModulusKind
    f: FunctionSpec
    delta: float
    value: float
    constraint: float
    n1: NormalOperator
    n2: NormalOperator | None = None
    partner: ComplexMatrix | None = field(default=None, repr=False)
    seed: int = 0
    domain_radius: float = 1.0
    support: str = "disc"

    @property
    def id(self) -> str:
        return f"{self.kind.value}:{self.f.key}:delta={self.delta!r}:seed={self.seed}"


def witness_measures(
    kind: ModulusKind,
    f: FunctionSpec,
    n1: NormalOperator,
    n2: NormalOperator | None,
    partner: ComplexMatrix | None,
) -> tuple[float, float]:
    "(value, constraint) of a configuration."
    if kind is ModulusKind.PLAIN:
        if n2 is None:
            raise ArgumentError("PLAIN configurations need two normal operators")
        return (
            operator_norm(apply_function(f, n1) - apply_function(f, n2)),
            operator_norm(n1.matrix - n2.matrix),
        )
    if partner is None:
        raise ArgumentError(f"{kind.value} configurations need a partner operator")
    f1 = apply_function(f, n1)
    f2 = f1 if n2 is None else apply_function(f, n2)
    m1 = n1.matrix
    m2 = m1 if n2 is None else n2.matrix
    return operator_norm(f1 @ partner - partner @ f2), operator_norm(m1 @ partner - partner @ m2)


def validate_witness(w: ModulusWitness) -> None:
    """Recompute and recheck a witness.

    Raises:
        ValidationError: wrong shapes, partner outside its class, constraint above δ + 1e-10,
            spectra outside F, or recorded value off by more than 1e-9·max(1, value).
    """
    kind = ModulusKind(w.kind)
    if kind is ModulusKind.PLAIN:
        if w.n2 is None or w.n2.dim != w.n1.dim or w.partner is not None:
            raise ValidationError(
                "PLAIN witnesses need two normal operators of equal size and no partner"
            )
    else:
        if w.partner is None:
            raise ValidationError(f"{kind.value} witnesses need a partner")
        if w.n2 is not None and kind is not ModulusKind.C:
            raise ValidationError(f"{kind.value} witnesses are commutators; n2 must be empty")
        cols = w.n1.dim if w.n2 is None else w.n2.dim
        if w.partner.shape != (w.n1.dim, cols):
            raise ValidationError(f"Partner shape {w.partner.shape} is not {(w.n1.dim, cols)}")
        for tag in PARTNER_CLASSES[kind]:
            defect = membership_defect(w.partner, tag)
            if defect > linalg.MEMBERSHIP_TOL:
                raise ValidationError(
                    f"{kind.value} partner fails the {tag.value} test by {defect:.3e}", defect
                )
    for n in (w.n1, w.n2):
        if n is not None and not in_support(n.eigenvalues, w.domain_radius, w.support):
            raise ValidationError(f"Spectrum leaves F = {w.support}(r={w.domain_radius})")
    value, constraint = witness_measures(kind, w.f, w.n1, w.n2, w.partner)
    if constraint > w.delta + 1e-10:
        raise ValidationError(
            f"Constraint {constraint:.12g} exceeds delta {w.delta:.12g}", constraint - w.delta
        )
    if abs(value - w.value) > 1e-9 * max(1.0, w.value):
        raise ValidationError(
            f"Recorded value {w.value:.12g} differs from recomputed {value:.12g}",
            abs(value - w.value),
        )
    if abs(constraint - w.constraint) > 1e-9 * max(1.0, w.constraint):
        raise ValidationError(
            "Recorded constraint differs from the recomputed one", abs(constraint - w.constraint)
        )


def make_witness(
    kind: ModulusKind,
    f: FunctionSpec,
    delta: float,
    n1: NormalOperator,
    n2: NormalOperator | None = None,
    partner: ComplexMatrix | None = None,
    seed: int = 0,
    domain_radius: float = 1.0,
    support: str = "disc",
) -> ModulusWitness:
    "Measure a configuration, record it and validate it."
    value, constraint = witness_measures(kind, f, n1, n2, partner)
    witness = ModulusWitness(
        kind=kind,
        f=f,
        delta=delta,
        value=value,
        constraint=constraint,
        n1=n1,
        n2=n2,
        partner=partner,
        seed=seed,
        domain_radius=domain_radius,
        support=support,
    )
    validate_witness(witness)
    return witness


def witness_to_json(w: ModulusWitness) -> dict[str, Any]:
    return {
        "kind": w.kind.value,
        "f": w.f.key,
        "delta": w.delta,
        "value": w.value,
        "constraint": w.constraint,
        "seed": w.seed,
        "domain_radius": w.domain_radius,
        "support": w.support,
        "n1": normal_to_json(w.n1),
        "n2": None if w.n2 is None else normal_to_json(w.n2),
        "partner": None if w.partner is None else matrix_to_json(w.partner),
    }


def witness_from_json(payload: dict[str, Any]) -> ModulusWitness:
    """Load and revalidate a witness.

    Raises:
        ValidationError: malformed payload, unknown function id, or failed revalidation.
    """
    try:
        witness = ModulusWitness(
            kind=ModulusKind(payload["kind"]),
            f=parse_function(payload["f"]),
            delta=float(payload["delta"]),
            value=float(payload["value"]),
            constraint=float(payload["constraint"]),
            n1=normal_from_json(payload["n1"]),
            n2=None if payload.get("n2") is None else normal_from_json(payload["n2"]),
            partner=(
                None if payload.get("partner") is None else matrix_from_json(payload["partner"])
            ),
            seed=int(payload.get("seed", 0)),
            domain_radius=float(payload.get("domain_radius", 1.0)),
            support=str(payload.get("support", "disc")),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"Malformed witness payload: {e}") from e
    validate_witness(witness)
    return witness


def _rebuild(w: ModulusWitness, **changes: Any) -> ModulusWitness:
    "Apply changes, recompute value/constraint and revalidate (failures are bugs)."
    data = {
        "kind": w.kind,
        "f": w.f,
        "delta": w.delta,
        "n1": w.n1,
        "n2": w.n2,
        "partner": w.partner,
        "seed": w.seed,
        "domain_radius": w.domain_radius,
        "support": w.support,
    }
    data.update(changes)
    try:
        return make_witness(**data)
    except ValidationError as e:
        raise ConsistencyError(f"Transformed witness failed revalidation: {e}") from e


def _expect_value(w: ModulusWitness, expected: float) -> ModulusWitness:
    if abs(w.value - expected) > 1e-9 * max(1.0, expected):
        raise ConsistencyError(
            f"Transformed witness value {w.value:.12g}, expected {expected:.12g}"
        )
    return w


def witness_scale(w: ModulusWitness, tau: float) -> ModulusWitness:
    """Partner τR: constraint, value and δ all scale by τ.

    Raises:
        ArgumentError: kind not SA/C or τ ∉ (0, 1].
        ConsistencyError: the scaled witness fails revalidation.
    """
    if w.kind not in (ModulusKind.SA, ModulusKind.C):
        raise ArgumentError(f"witness_scale applies to SA and C witnesses, not {w.kind.value}")
    if not 0.0 < tau <= 1.0:
        raise ArgumentError(f"tau must lie in (0, 1], got {tau}")
    if tau == 1.0:
        return w
    scaled = _rebuild(w, partner=tau * w.partner, delta=tau * w.delta)
    return _expect_value(scaled, tau * w.value)


def swap_lift(w: ModulusWitness) -> ModulusWitness:
    "PLAIN (N₁, N₂) ↦ USA (N₁ ⊕ N₂, [[0, I], [I, 0]]); value and constraint are unchanged."
    if w.kind is not ModulusKind.PLAIN:
        raise ArgumentError(f"swap_lift takes PLAIN witnesses, not {w.kind.value}")
    lifted = _rebuild(
        w, kind=ModulusKind.USA, n1=diag2(w.n1, w.n2), n2=None, partner=swap(w.n1.dim)
    )
    return _expect_value(lifted, w.value)


def corner_lift(w: ModulusWitness) -> ModulusWitness:
    "C quasicommutator (N₁, N₂, R) ↦ C commutator (N₁ ⊕ N₂, [[0, R], [0, 0]]), same value."
    if w.kind is not ModulusKind.C or w.n2 is None:
        raise ArgumentError("corner_lift takes C witnesses in quasicommutator form")
    rows, cols = w.partner.shape
    corner = np.zeros((rows + cols, rows + cols), dtype=np.complex128)
    corner[:rows, rows:] = w.partner
    lifted = _rebuild(w, n1=diag2(w.n1, w.n2), n2=None, partner=corner)
    return _expect_value(lifted, w.value)


def projection_to_usa(w: ModulusWitness) -> ModulusWitness:
    "P at δ ↦ USA at 2δ with Q = 2P − I; value doubles."
    if w.kind is not ModulusKind.P:
        raise ArgumentError(f"projection_to_usa takes P witnesses, not {w.kind.value}")
    q = 2.0 * w.partner - np.eye(w.n1.dim)
    lifted = _rebuild(w, kind=ModulusKind.USA, partner=q, delta=2.0 * w.delta)
    return _expect_value(lifted, 2.0 * w.value)


def usa_to_projection(w: ModulusWitness) -> ModulusWitness:
    "USA at δ ↦ P at δ/2 with P = (Q + I)/2; value halves."
    if w.kind is not ModulusKind.USA:
        raise ArgumentError(f"usa_to_projection takes USA witnesses, not {w.kind.value}")
    p = (w.partner + np.eye(w.n1.dim)) / 2.0
    lowered = _rebuild(w, kind=ModulusKind.P, partner=p, delta=w.delta / 2.0)
    return _expect_value(lowered, w.value / 2.0)


def conjugate_witness(w: ModulusWitness) -> ModulusWitness:
    """Witness for f̄ of equal value: f̄(N)X* − X*f̄(N) = −(f(N)X − Xf(N))*.

    The constraint is preserved when the partner is self-adjoint (SA, USA, P) and for PLAIN
    pairs; for C and U partners it is not.

    Raises:
        ArgumentError: kind C or U.
    """
    if w.kind in (ModulusKind.C, ModulusKind.U):
        raise ArgumentError(f"conjugate_witness does not preserve the {w.kind.value} constraint")
    partner = None if w.partner is None else w.partner.conj().T
    conjugated = _rebuild(w, f=w.f.conjugate(), partner=partner)
    return _expect_value(conjugated, w.value)


def best_witness(witnesses: Sequence[ModulusWitness]) -> ModulusWitness:
    "Deterministic merge: largest value, then smallest seed."
    if not witnesses:
        raise ArgumentError("best_witness needs at least one witness")
    return sorted(witnesses, key=lambda w: (-w.value, w.seed))[0]


# ----------------------------------------------------------------------------------------
# Envelopes
# ----------------------------------------------------------------------------------------


@dataclass(frozen=True, kw_only=True)
class ModulusEnvelope:
    """Lower envelope of Ω^kind_f on a δ grid.

    Values are nondecreasing in δ and value/δ is nonincreasing.  For SA and C the scaling
    closure max_w v_w·min(1, δ/c_w) gives both laws directly; other kinds take the monotone
    closure and are then trimmed (values only ever decrease, so they stay lower bounds).
    """

    kind: ModulusKind
    f_key: str
    deltas: np.ndarray
    lower_values: np.ndarray
    provenance: tuple[str, ...]
    scaling_law: bool

    @classmethod
    def from_witnesses(
        cls, kind: ModulusKind, witnesses: Sequence[ModulusWitness], deltas: Sequence[float]
    ) -> "ModulusEnvelope":
        grid = np.asarray(sorted(deltas), dtype=float)
        if grid.size == 0 or grid[0] <= 0:
            raise ArgumentError("Envelope deltas must be positive and nonempty")
        kinds = {w.kind for w in witnesses}
        if kinds - {kind}:
            raise ArgumentError(
                f"Envelope of kind {kind.value} got witnesses of kinds "
                f"{sorted(k.value for k in kinds)}"
            )
        keys = {w.f.key for w in witnesses}
        if len(keys) > 1:
            raise ArgumentError(f"Envelope witnesses mix functions {sorted(keys)}")
        scaling = kind in (ModulusKind.SA, ModulusKind.C)
        values = np.zeros(grid.size)
        provenance = ["none"] * grid.size
        for i, delta in enumerate(grid):
            for w in witnesses:
                if scaling:
                    candidate = w.value if w.constraint <= delta else w.value * delta / w.constraint
                else:
                    candidate = w.value if w.constraint <= delta + 1e-10 else 0.0
                if candidate > values[i]:
                    values[i], provenance[i] = candidate, w.id
        for i in range(1, grid.size):
            if values[i - 1] > values[i]:
                values[i], provenance[i] = values[i - 1], provenance[i - 1]
            cap = values[i - 1] * grid[i] / grid[i - 1]
            if values[i] > cap:
                values[i] = cap
        envelope = cls(
            kind=kind,
            f_key=next(iter(keys), ""),
            deltas=grid,
            lower_values=values,
            provenance=tuple(provenance),
            scaling_law=scaling,
        )
        envelope.verify()
        return envelope

    def verify(self) -> None:
        """Raises ValidationError unless both monotonicity laws hold (1e-12 relative slack)."""
        d, v = self.deltas, self.lower_values
        if d.shape != v.shape or np.any(np.diff(d) <= 0):
            raise ValidationError("Envelope grid must be strictly increasing and match its values")
        slack = 1e-12 * np.maximum(1.0, np.abs(v[1:]))
        if np.any(v[1:] < v[:-1] - slack):
            raise ValidationError("Envelope is not nondecreasing in delta")
        ratio = v / d
        if np.any(ratio[1:] > ratio[:-1] + 1e-12 * np.maximum(1.0, ratio[:-1])):
            raise ValidationError("Envelope value/delta is not nonincreasing")

    def value_at(self, delta: float) -> float:
        "Envelope value at the largest grid point ≤ δ (0 below the grid)."
        i = int(np.searchsorted(self.deltas, delta * (1 + 1e-12), side="right")) - 1
        return 0.0 if i < 0 else float(self.lower_values[i])

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "f": self.f_key,
            "deltas": self.deltas.tolist(),
            "lower_values": self.lower_values.tolist(),
            "provenance": list(self.provenance),
            "scaling_law": self.scaling_law,
        }

    @classmethod
    def from_json(cls, payload: dict[str, Any]) -> "ModulusEnvelope":
        try:
            envelope = cls(
                kind=ModulusKind(payload["kind"]),
                f_key=str(payload["f"]),
                deltas=np.asarray(payload["deltas"], dtype=float),
                lower_values=np.asarray(payload["lower_values"], dtype=float),
                provenance=tuple(payload["provenance"]),
                scaling_law=bool(payload["scaling_law"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed envelope payload: {e}") from e
        envelope.verify()
        return envelope


# ----------------------------------------------------------------------------------------
# Double operator integrals
# ----------------------------------------------------------------------------------------


def doi_quasicommutator(
    f: FunctionSpec, n1: NormalOperator, n2: NormalOperator, r: Any
) -> ComplexMatrix:
    """Σ_{λ,μ} (D₀f)(λ, μ)·P_λ(N₁R − RN₂)Q_μ over the spectral projections of N₁ and N₂.

    Eigenvalues of both operators within CLUSTER_TOL share a representative, so coinciding
    points get the D₀ diagonal value 0.  Equals f(N₁)R − Rf(N₂).

    Raises:
        ArgumentError: R is not dim(N₁) × dim(N₂).
    """
    r = as_matrix(r, "R")
    if r.shape != (n1.dim, n2.dim):
        raise ArgumentError(f"R has shape {r.shape}, expected {(n1.dim, n2.dim)}")
    labels, reps = eigenvalue_clusters(np.concatenate([n1.eigenvalues, n2.eigenvalues]))
    lam = reps[labels[: n1.dim]]
    mu = reps[labels[n1.dim :]]
    kernel = divided_difference(f, lam, mu).matrix
    u1, u2 = n1.conjugator, n2.conjugator
    t = u1.conj().T @ (n1.matrix @ r - r @ n2.matrix) @ u2
    return u1 @ (kernel * t) @ u2.conj().T


class DoiCheckReport(NamedTuple):
    function: str
    instances: int
    dim: int
    max_residual: float

    @property
    def ok(self) -> bool:
        return self.max_residual <= 1e-10


def _doi_instance(f: FunctionSpec, seed: int, index: int, dim: int, radius: float) -> float:
    g = rng(seed, index)
    rows, cols = (int(k) for k in g.integers(1, dim + 1, size=2))
    n1 = random_normal(rows, g, radius)
    if g.uniform() < 0.5:
        n2 = random_normal(cols, g, radius)
    else:
        # Shared eigenvalues exercise the D₀ diagonal convention.
        values = g.choice(n1.eigenvalues, size=cols)
        n2 = make_normal(values, haar_unitary(cols, g))
    r = random_matrix(rows, cols, g)
    direct = apply_function(f, n1) @ r - r @ apply_function(f, n2)
    residual = operator_norm(doi_quasicommutator(f, n1, n2, r) - direct)
    return residual / (1.0 + operator_norm(direct))


def doi_check(
    f: FunctionSpec,
    instances: int,
    dim: int,
    seed: int = 0,
    radius: float = 1.0,
    num_concurrent: int = 1,
) -> DoiCheckReport:
    "Max relative residual ‖DOI − (f(N₁)R − Rf(N₂))‖/(1 + ‖f(N₁)R − Rf(N₂)‖) over random instances."
    if instances < 1 or dim < 1:
        raise ArgumentError("instances and dim must be positive")
    residuals = run_seeded_tasks(
        lambda i: _doi_instance(f, seed, i, dim, radius),
        range(instances),
        num_concurrent,
        description="doi-check",
    )
    return DoiCheckReport(f.key, instances, dim, float(max(residuals)))


# ----------------------------------------------------------------------------------------
# Searches
# ----------------------------------------------------------------------------------------


@dataclass(kw_only=True)
class SearchSettings:
    "Knobs of `modulus_search`."

    # Chance that a budget unit draws a fresh instance instead of perturbing the incumbent.
    fresh_probability: float = 0.5
    # Gaussian eigenvalue step, relative to the domain radius.
    eigenvalue_step: float = 0.1
    unitary_step: float = 0.3
    partner_step: float = 0.3
    bisection_steps: int = 40


DEFAULT_SEARCH = SearchSettings()


class Candidate(NamedTuple):
    n1: NormalOperator
    n2: NormalOperator | None
    partner: ComplexMatrix | None
    # Eigenbasis and diagonal of USA/P partners.
    basis: ComplexMatrix | None = None
    signs: np.ndarray | None = None


def unitary_power(w: ComplexMatrix, t: float) -> ComplexMatrix:
    "W^t along the principal geodesic from I (W unitary)."
    schur, vectors = scipy.linalg.schur(w, output="complex")
    angles = np.angle(np.diag(schur))
    return (vectors * np.exp(1j * t * angles)) @ vectors.conj().T


def _bisect(feasible_at: Any, steps: int) -> float:
    "Largest t ∈ [0, 1] found by bisection with feasible_at(t) true (t = 0 must be feasible)."
    if feasible_at(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = (lo + hi) / 2.0
        if feasible_at(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _commutator_norm(n: NormalOperator, x: ComplexMatrix) -> float:
    m = n.matrix
    return operator_norm(m @ x - x @ m)


def _shift_to_unit_norm(x: ComplexMatrix, self_adjoint: bool) -> ComplexMatrix:
    "x + αI with α ≥ 0 and norm 1 (x a contraction); commutators with anything are unchanged."
    eye = np.eye(x.shape[0])
    if self_adjoint:
        top = float(scipy.linalg.eigvalsh((x + x.conj().T) / 2.0)[-1])
        return x + (1.0 - top) * eye
    target = 1.0 - 1e-12
    if operator_norm(x) >= target:
        return x
    alpha = brentq(
        lambda a: operator_norm(x + a * eye) - target, 0.0, 1.0 + operator_norm(x), xtol=1e-14
    )
    return x + alpha * eye


class SearchProblem:
    "Candidate generation and constraint enforcement for one (kind, f, δ, F) search."

    def __init__(
        self,
        kind: ModulusKind,
        f: FunctionSpec,
        delta: float,
        dim: int,
        radius: float,
        support: Support,
        settings: SearchSettings,
    ) -> None:
        self.kind, self.f, self.delta, self.dim = kind, f, delta, dim
        self.radius, self.support, self.settings = radius, support, settings

    # Fresh instances -------------------------------------------------------------------

    def fresh(self, g: np.random.Generator) -> Candidate:
        n1 = random_normal(self.dim, g, self.radius, self.support)
        match self.kind:
            case ModulusKind.PLAIN:
                return Candidate(n1, random_normal(self.dim, g, self.radius, self.support), None)
            case ModulusKind.SA:
                return Candidate(n1, None, random_hermitian(self.dim, g))
            case ModulusKind.C:
                return Candidate(n1, None, random_matrix(self.dim, self.dim, g))
            case ModulusKind.U:
                return Candidate(n1, None, haar_unitary(self.dim, g))
        basis = haar_unitary(self.dim, g)
        if self.kind is ModulusKind.USA:
            signs = g.choice([-1.0, 1.0], size=self.dim)
        else:
            signs = g.choice([0.0, 1.0], size=self.dim)
        return Candidate(n1, None, (basis * signs) @ basis.conj().T, basis, signs)

    def perturb(self, c: Candidate, g: np.random.Generator) -> Candidate:
        s = self.settings

        def step_normal(n: NormalOperator) -> NormalOperator:
            noise = g.standard_normal(n.dim) + 1j * g.standard_normal(n.dim)
            values = n.eigenvalues + s.eigenvalue_step * self.radius * noise / math.sqrt(2.0)
            if self.support == "lattice":
                values = n.eigenvalues
            values = project_to_support(values, self.radius, self.support)
            return make_normal(values, unitary_step(n.conjugator, s.unitary_step, g))

        n1 = step_normal(c.n1)
        match self.kind:
            case ModulusKind.PLAIN:
                return Candidate(n1, step_normal(c.n2), None)
            case ModulusKind.SA:
                a = c.partner + s.partner_step * random_hermitian(self.dim, g)
                return Candidate(n1, None, a / max(operator_norm(a), 1e-300))
            case ModulusKind.C:
                r = c.partner + s.partner_step * random_matrix(self.dim, self.dim, g)
                return Candidate(n1, None, r / max(operator_norm(r), 1e-300))
            case ModulusKind.U:
                return Candidate(n1, None, unitary_step(c.partner, s.partner_step, g))
        basis = unitary_step(c.basis, s.partner_step, g)
        return Candidate(n1, None, (basis * c.signs) @ basis.conj().T, basis, c.signs)

    # Constraint enforcement ------------------------------------------------------------

    def enforce(self, c: Candidate) -> Candidate | None:
        "Move the candidate onto ‖·‖ ≤ δ, ideally onto the boundary; None if that fails."
        delta, steps = self.delta, self.settings.bisection_steps
        limit = delta + 1e-12
        match self.kind:
            case ModulusKind.PLAIN:
                if self.support == "lattice":
                    return c if operator_norm(c.n1.matrix - c.n2.matrix) <= limit else None
                lam, mu = c.n1.eigenvalues, c.n2.eigenvalues
                u1 = c.n1.conjugator
                w = u1.conj().T @ c.n2.conjugator

                def at(t: float) -> NormalOperator:
                    values = project_to_support(lam + t * (mu - lam), self.radius, self.support)
                    return make_normal(values, u1 @ unitary_power(w, t))

                t = _bisect(lambda t: operator_norm(c.n1.matrix - at(t).matrix) <= limit, steps)
                return Candidate(c.n1, at(t), None)
            case ModulusKind.SA | ModulusKind.C:
                x = c.partner
                size = _commutator_norm(c.n1, x)
                if size > delta:
                    x = x * (delta / size)
                return Candidate(c.n1, None, _shift_to_unit_norm(x, self.kind is ModulusKind.SA))
            case ModulusKind.U:
                x = c.partner
                t = _bisect(lambda t: _commutator_norm(c.n1, unitary_power(x, t)) <= limit, steps)
                return Candidate(c.n1, None, unitary_power(x, t))
        eigvecs = c.n1.conjugator
        step = eigvecs.conj().T @ c.basis

        def partner_at(t: float) -> ComplexMatrix:
            basis = eigvecs @ unitary_power(step, t)
            return (basis * c.signs) @ basis.conj().T

        t = _bisect(lambda t: _commutator_norm(c.n1, partner_at(t)) <= limit, steps)
        basis = eigvecs @ unitary_power(step, t)
        partner = (basis * c.signs) @ basis.conj().T
        return Candidate(c.n1, None, (partner + partner.conj().T) / 2.0, basis, c.signs)

    # Structured starts -----------------------------------------------------------------

    def scalar_pairs(self, gap: float) -> list[tuple[complex, complex]]:
        "Pairs z, w ∈ F with |z − w| = gap (or the widest pair available)."
        r = self.radius
        gap = min(gap, 2.0 * r)
        match self.support:
            case "line":
                return [(gap / 2.0, -gap / 2.0), (r, r - gap)]
            case "circle":
                theta = 2.0 * math.asin(min(gap / (2.0 * r), 1.0))
                return [(r, r * np.exp(1j * theta)), (-r, -r * np.exp(1j * theta))]
            case "lattice":
                return []
        pairs = [(gap / 2.0, -gap / 2.0), (1j * gap / 2.0, -1j * gap / 2.0)]
        if gap <= r:
            pairs += [(0.0, gap), (r, r - gap)]
        return pairs

    def seeds(self) -> list[Candidate]:
        gap = 2.0 * self.delta if self.kind is ModulusKind.P else self.delta
        out = []
        for z, w in self.scalar_pairs(gap):
            if self.kind is ModulusKind.PLAIN:
                out.append(
                    Candidate(
                        diagonal_normal(np.full(self.dim, z)),
                        diagonal_normal(np.full(self.dim, w)),
                        None,
                    )
                )
                continue
            if self.dim < 2:
                continue
            values = np.full(self.dim, z, dtype=np.complex128)
            values[1] = w
            n = diagonal_normal(values)
            partner = np.zeros((self.dim, self.dim), dtype=np.complex128)
            eye = np.eye(self.dim, dtype=np.complex128)
            match self.kind:
                case ModulusKind.SA:
                    partner[0, 1] = partner[1, 0] = 1.0
                case ModulusKind.C:
                    partner[0, 1] = 1.0
                case ModulusKind.U | ModulusKind.USA:
                    partner = eye.copy()
                    partner[:2, :2] = [[0.0, 1.0], [1.0, 0.0]]
                case ModulusKind.P:
                    partner[:2, :2] = 0.5
            basis, signs = None, None
            if self.kind in (ModulusKind.USA, ModulusKind.P):
                signs, basis = scipy.linalg.eigh(partner)
                signs = np.rint(signs)
            out.append(Candidate(n, None, partner, basis, signs))
        return out


def modulus_search(
    kind: ModulusKind | str,
    f: FunctionSpec,
    delta: float,
    dim: int,
    budget: int,
    seed: int = 0,
    radius: float = 1.0,
    support: Support = "disc",
    settings: SearchSettings = DEFAULT_SEARCH,
) -> ModulusWitness:
    """Best witness for Ω^kind_f(δ) found in `budget` steps, spectra in F.

    Structured scalar-pair starts (and, for C, the separation construction) are scored first.
    Each budget unit then draws a fresh instance with probability 1/2 or perturbs the
    incumbent, moves it onto the constraint boundary and keeps it if it is strictly better.

    Raises:
        ArgumentError: δ < 0, δ = 0 for commutator kinds, dim < 1 or budget < 1.
    """
    kind = ModulusKind(kind)
    if delta < 0:
        raise ArgumentError(f"delta must be nonnegative, got {delta}")
    if delta == 0 and kind is not ModulusKind.PLAIN:
        raise ArgumentError(f"delta = 0 leaves no admissible {kind.value} configuration to search")
    if dim < 1 or budget < 1:
        raise ArgumentError(f"dim and budget must be positive, got {dim}, {budget}")
    problem = SearchProblem(kind, f, delta, dim, radius, support, settings)
    g = rng(seed)

    best: Candidate | None = None
    best_value = -math.inf

    def consider(c: Candidate | None) -> None:
        nonlocal best, best_value
        if c is None:
            return
        value, constraint = witness_measures(kind, f, c.n1, c.n2, c.partner)
        if constraint <= delta + 1e-12 and value > best_value:
            best, best_value = c, value

    for c in problem.seeds():
        consider(problem.enforce(c))
    if kind is ModulusKind.C and dim >= 2 and support == "disc" and delta > 0:
        seeded = _kme_commutator_seed(f, delta, dim, radius)
        if seeded is not None:
            consider(seeded)

    with SearchProgressBar() as p:
        task = p.add_task(f"search {kind.value} {f.key}", total=budget, best=None)
        for _ in range(budget):
            if best is None or g.uniform() < settings.fresh_probability:
                candidate = problem.fresh(g)
            else:
                candidate = problem.perturb(best, g)
            consider(problem.enforce(candidate))
            p.update(task, advance=1, best=best_value if best is not None else None)

    if best is None:
        raise ConsistencyError(f"No feasible {kind.value} configuration found")
    try:
        return make_witness(kind, f, delta, best.n1, best.n2, best.partner, seed, radius, support)
    except ValidationError as e:
        raise ConsistencyError(f"Search produced an invalid witness: {e}") from e


def modulus_search_parallel(
    kind: ModulusKind | str,
    f: FunctionSpec,
    delta: float,
    dim: int,
    budget: int,
    seeds: Sequence[int],
    num_concurrent: int = 1,
    radius: float = 1.0,
    support: Support = "disc",
) -> ModulusWitness:
    "Independent searches per seed, merged by largest value then smallest seed."
    witnesses = run_seeded_tasks(
        lambda s: modulus_search(kind, f, delta, dim, budget, s, radius, support),
        seeds,
        num_concurrent,
        description=f"search {ModulusKind(kind).value}",
    )
    return best_witness(witnesses)


# ----------------------------------------------------------------------------------------
# Separation construction and two-sided estimates
# ----------------------------------------------------------------------------------------


def _separation_constant() -> float:
    c = psi_constant()
    return c.c + c.quadrature_error


def check_kme_separation(lam: np.ndarray, mu: np.ndarray, delta: float) -> None:
    """(Λ − M) ∩ cδD ⊂ {0}, with c = ½‖Ψ‖_{L̂¹} (taken at its upper error bound).

    Raises:
        PreconditionError: a pair λ ≠ μ closer than cδ.
    """
    radius = _separation_constant() * delta * (1.0 - 1e-12)
    a = cKDTree(np.stack([lam.real, lam.imag], axis=1))
    b = cKDTree(np.stack([mu.real, mu.imag], axis=1))
    close = a.sparse_distance_matrix(b, radius, output_type="ndarray")
    # Exact coincidences are allowed.
    for j, k, dist in sorted(close.tolist()):
        if dist > 1e-15:
            pair = (complex(lam[int(j)]), complex(mu[int(k)]))
            raise PreconditionError(
                f"Points {pair[0]} and {pair[1]} are closer than c·δ = {radius:.6g}", pair
            )


def kme_witness(
    f: FunctionSpec,
    lam: Sequence[complex] | np.ndarray,
    mu: Sequence[complex] | np.ndarray | None,
    delta: float,
    budget: int = 32,
    seed: int = 0,
    domain_radius: float | None = None,
) -> ModulusWitness:
    """C witness from the separation construction.

    With B a Schur lower certificate for D₀f on Λ×M, R = (δ/2)·B ⋆ Φ, Φ_jk = Ψ((λ_j−μ_k)/cδ)/cδ,
    gives N₁R − RN₂ = (δ/2)·B off the coincidences and f(N₁)R − Rf(N₂) = (δ/2)·D₀f ⋆ B.
    R is then rescaled so that ‖R‖ ≤ 1 and the constraint is ≤ δ.  `mu=None` means M = Λ and a
    commutator witness.
    """
    lam = np.asarray(lam, dtype=np.complex128).reshape(-1)
    commutator = mu is None
    mu = lam if commutator else np.asarray(mu, dtype=np.complex128).reshape(-1)
    check_kme_separation(lam, mu, delta)
    c = _separation_constant()
    kernel = divided_difference(f, lam, mu).matrix
    b = multiplier_lower(kernel, max(budget, 1), seed).lower_certificate
    r = (delta / 2.0) * b * psi_kernel(lam, mu, c * delta)
    x = np.diag(lam) @ r - r @ np.diag(mu)
    norm_r, norm_x = operator_norm(r), operator_norm(x)
    scale = 1.0 if norm_r <= 1.0 else 1.0 / norm_r
    if scale * norm_x > delta:
        scale = delta / norm_x
    r = r * scale
    radius = domain_radius
    if radius is None:
        radius = float(max(np.abs(lam).max(), np.abs(mu).max()))
    n1 = diagonal_normal(lam)
    n2 = None if commutator else diagonal_normal(mu)
    return make_witness(ModulusKind.C, f, delta, n1, n2, r, seed, radius, "disc")


def _kme_commutator_seed(
    f: FunctionSpec, delta: float, dim: int, radius: float
) -> Candidate | None:
    pitch = _separation_constant() * delta
    if pitch > radius:
        return None
    points = lattice_points(LatticeSpec(pitch, radius))[:dim]
    if points.size < 2:
        return None
    try:
        w = kme_witness(f, points, None, delta, budget=8, domain_radius=radius)
    except (ValidationError, PreconditionError) as e:
        logger.debug(f"Separation seed skipped: {e}")
        return None
    n1 = diagonal_normal(np.concatenate([points, np.zeros(dim - points.size)]))
    partner = np.zeros((dim, dim), dtype=np.complex128)
    partner[: points.size, : points.size] = w.partner
    return Candidate(n1, None, partner)


class KmeLowerTerms(NamedTuple):
    omega_term: float
    multiplier_term: float
    value: float
    route: str


def _lattice_pitch(points: np.ndarray) -> float | None:
    "Pitch p with points ⊂ p(ℤ + iℤ), if the set looks like such a lattice subset."
    if points.size < 2:
        return None
    distances, _ = cKDTree(np.stack([points.real, points.imag], axis=1)).query(
        np.stack([points.real, points.imag], axis=1), k=2
    )
    pitch = float(np.min(distances[:, 1]))
    if pitch <= 0:
        return None
    scaled = points / pitch
    if np.max(np.abs(scaled - np.round(scaled.real) - 1j * np.round(scaled.imag))) > 1e-9:
        return None
    return pitch


def kme_lower_terms(
    f: FunctionSpec,
    lam: Sequence[complex] | np.ndarray,
    mu: Sequence[complex] | np.ndarray,
    delta: float,
    budget: int = 32,
    seed: int = 0,
) -> KmeLowerTerms:
    """max{ω_f(δ), (δ/2)·‖D₀f‖_M on Λ×M}, each side a certified lower bound.

    ω_f(δ) is sampled over pairs at distance δ in the disc containing Λ ∪ M.  The multiplier
    norm is bounded below by the largest of: the max-entry bound, a dense search (when
    |Λ|·|M| ≤ 160000 and budget > 0), and for z̄ on a lattice subset with Λ = M the Schur test.

    Raises:
        PreconditionError: the separation hypothesis fails.
    """
    lam = np.asarray(lam, dtype=np.complex128).reshape(-1)
    mu = np.asarray(mu, dtype=np.complex128).reshape(-1)
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    check_kme_separation(lam, mu, delta)
    radius = float(max(np.abs(lam).max(), np.abs(mu).max(), delta / 2.0))
    omega_term = sampled_modulus(f, delta, radius, seed=seed)

    same_sets = lam.shape == mu.shape and np.array_equal(lam, mu)
    kernel_norm = 0.0
    route = "max_entry"
    if f.family == "conj" and same_sets:
        pitch = _lattice_pitch(lam)
        if pitch is not None:
            kernel_norm = schur_test_lower(lam / pitch).bound
            route = "schur_test"
    if lam.size * mu.size <= DENSE_PAIR_LIMIT:
        kernel = divided_difference(f, lam, mu).matrix
        kernel_norm = max(kernel_norm, float(np.max(np.abs(kernel))))
        if budget > 0:
            candidates = []
            if same_sets:
                candidates.append(np.conj(lambda_kernel(lam)) ** 2)
            dense = multiplier_lower(kernel, budget, seed, candidates).lower
            if dense > kernel_norm:
                kernel_norm, route = dense, "dense"
    multiplier_term = delta / 2.0 * kernel_norm
    return KmeLowerTerms(omega_term, multiplier_term, max(omega_term, multiplier_term), route)


def kme_lower_bound(
    f: FunctionSpec,
    lam: Sequence[complex] | np.ndarray,
    mu: Sequence[complex] | np.ndarray,
    delta: float,
    budget: int = 32,
    seed: int = 0,
) -> float:
    "Lower bound for Ω^C_f(δ) from c·δ-separated spectra; see `kme_lower_terms`."
    return kme_lower_terms(f, lam, mu, delta, budget, seed).value


def _net_points(radius: float, delta: float) -> np.ndarray:
    "(δ/3)-pitch lattice in clos(rD): a δ/2-net of the disc contained in it."
    pitch = delta / 3.0
    if pitch > radius:
        return np.zeros(1, dtype=np.complex128)
    return lattice_points(LatticeSpec(pitch, radius))


def net_cl_bound(
    f: FunctionSpec, disc_radius: float, delta: float, iterations: int = 50, seed: int = 0
) -> float:
    """CL bound for the net estimate.

    The closed form when on record, else a certified bound for ‖D₀f‖_M on the δ/2-net.
    """
    if f.cl_norm is not None:
        return f.cl_norm
    bound = math.inf
    points = _net_points(disc_radius, delta)
    if points.size == 1:
        return 0.0
    if f.family == "conj":
        return min(bound, conj_upper_bound(LatticeSpec(delta / 3.0, disc_radius)))
    bound = min(bound, separated_set_bound(f, points, delta / 3.0))
    if points.size <= NET_DENSE_LIMIT:
        kernel = divided_difference(f, points, points).matrix
        bound = min(bound, multiplier_upper(kernel, iterations, seed).upper)
    return bound


def net_upper_bound(
    f: FunctionSpec, disc_radius: float, delta: float, iterations: int = 50, seed: int = 0
) -> float:
    """Upper bound 2ω_f(δ/2) + 2δ·‖D₀f‖_M(net) for Ω^C_f(δ) on clos(rD).

    Raises:
        ArgumentError: δ ≤ 0, or f without a scalar modulus on record.
    """
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    if f.family == "constant":
        return 0.0
    if f.modulus is None:
        raise ArgumentError(f"{f.key} has no scalar modulus on record; the net bound needs one")
    omega = float(f.omega(delta / 2.0))
    cl = net_cl_bound(f, disc_radius, delta, iterations, seed)
    return 2.0 * omega + 2.0 * delta * cl


# ----------------------------------------------------------------------------------------
# Dilation checks
# ----------------------------------------------------------------------------------------


class DilationCheck(NamedTuple):
    commutator_lhs: float
    commutator_rhs: float
    function_lhs: float
    function_rhs: float

    @property
    def commutator_ok(self) -> bool:
        return self.commutator_lhs <= self.commutator_rhs + 1e-8

    @property
    def function_ok(self) -> bool:
        return self.function_lhs >= self.function_rhs - 1e-8


def dilation_check(
    f: FunctionSpec, n: NormalOperator, a: ComplexMatrix, tau: float = 0.5
) -> DilationCheck:
    """One instance of the unitary dilation 𝒰 of a self-adjoint A with ‖A‖ ≤ 1.

    With 𝒩 = N ⊕ N: ‖𝒩𝒰 − 𝒰𝒩‖ ≤ (τ + τ²(1 − τ²)^{−1/2})·‖NA − AN‖ and
    ‖f(𝒩)𝒰 − 𝒰f(𝒩)‖ ≥ τ·‖f(N)A − Af(N)‖.
    """
    u = unitary_dilation(a, tau)
    big = diag2(n, n)
    m = n.matrix
    fm = apply_function(f, n)
    fbig = apply_function(f, big)
    base = operator_norm(m @ a - a @ m)
    return DilationCheck(
        commutator_lhs=operator_norm(big.matrix @ u - u @ big.matrix),
        commutator_rhs=(tau + tau**2 / math.sqrt(1.0 - tau**2)) * base,
        function_lhs=operator_norm(fbig @ u - u @ fbig),
        function_rhs=tau * operator_norm(fm @ a - a @ fm),
    )


class MccReport(NamedTuple):
    instances: int
    dilation_violations: int
    commutator_violations: int
    vl_violations: int
    swap_violations: int
    worst_vl_slack: float

    @property
    def violations(self) -> int:
        return (
            self.dilation_violations
            + self.commutator_violations
            + self.vl_violations
            + self.swap_violations
        )


class _MccInstance(NamedTuple):
    commutator_ok: bool
    function_ok: bool
    vl_slack: float
    swap_ok: bool


def _mcc_instance(
    f: FunctionSpec, seed: int, index: int, dim_max: int, tau: float, radius: float
) -> _MccInstance:
    g = rng(seed, index)
    dim = int(g.integers(1, dim_max + 1))
    n = random_normal(dim, g, radius)
    a = random_hermitian(dim, g)
    check = dilation_check(f, n, a, tau)
    t = 0.9 * float(g.uniform()) * random_hermitian(dim, g)
    x = g.standard_normal((dim, dim)) + 1j * g.standard_normal((dim, dim))
    slack = sqrt_defect_check(t, x)
    plain = make_witness(
        ModulusKind.PLAIN,
        f,
        math.inf,
        n,
        random_normal(dim, g, radius),
        seed=seed,
        domain_radius=radius,
    )
    lifted = swap_lift(plain)
    swap_ok = abs(lifted.value - plain.value) <= 1e-9 * max(1.0, plain.value)
    return _MccInstance(check.commutator_ok, check.function_ok, slack, swap_ok)


def mcc_sandwich_check(
    f: FunctionSpec,
    instances: int,
    seed: int = 0,
    dim_max: int = 12,
    tau: float = 0.5,
    radius: float = 1.0,
    num_concurrent: int = 1,
) -> MccReport:
    """Random checks of the dilation inequalities, the square-root commutator inequality and
    the swap lift.  Each instance draws from its own sub-stream, so results do not depend on
    the worker count."""
    if instances < 1 or dim_max < 1:
        raise ArgumentError("instances and dim_max must be positive")
    results = run_seeded_tasks(
        lambda i: _mcc_instance(f, seed, i, dim_max, tau, radius),
        range(instances),
        num_concurrent,
        description="mcc-check",
    )
    vl = [r.vl_slack for r in results]
    return MccReport(
        instances=instances,
        dilation_violations=sum(not r.function_ok for r in results),
        commutator_violations=sum(not r.commutator_ok for r in results),
        vl_violations=sum(s < -1e-8 for s in vl),
        swap_violations=sum(not r.swap_ok for r in results),
        worst_vl_slack=float(min(vl)),
    )
