"""Hölder-regime experiments.

The h_n family (h_n(ζ) = ζ^{n+1}/ζ̄^n, h_n(0) = 0) and its operator Lipschitz checks,
operator-Hölder ratio searches, the quasicommutator ratio sweeps and lower bounds for the
constant ĥ_α (the norm of the identity Λ_α → OΛ_α) obtained from Ω_f envelopes.
"""
import logging
import math
from collections.abc import Sequence
from typing import Any, NamedTuple

import numpy as np

from operator_moduli.errors import ArgumentError, DegenerateInputError, PreconditionError
from operator_moduli.functions import (
    FunctionSpec,
    HolderSeminorm,
    holder_seminorm,
    parse_function,
    sampled_holder_seminorm,
)
from operator_moduli.linalg import (
    NormalOperator,
    Support,
    apply_function,
    diagonal_normal,
    make_normal,
    operator_norm,
    random_matrix,
    random_normal,
)
from operator_moduli.moduli import (
    DEFAULT_SEARCH,
    Candidate,
    ModulusEnvelope,
    ModulusKind,
    ModulusWitness,
    SearchProblem,
    SearchSettings,
    make_witness,
    measured_modulus_spec,
    omega_transform,
)
from operator_moduli.utils import SearchProgressBar, rng, run_seeded_tasks

logger = logging.getLogger("HolderLogger")


def hn_eval(n: int, z: Any) -> complex | np.ndarray:
    "h_n(z) = z^{n+1}/z̄^n = |z|·sgn(z)^{2n+1}, with h_n(0) = 0."
    values = parse_function(f"hn:{int(n)}").evaluate(z)
    return complex(values) if np.ndim(z) == 0 else values


def _sgn_power_operator(n: NormalOperator, power: int) -> np.ndarray:
    "sgn(N)^power in spectral form (sgn 0 = 0)."
    modulus = np.abs(n.eigenvalues)
    signs = np.where(modulus > 0, n.eigenvalues / np.where(modulus > 0, modulus, 1.0), 0.0)
    values = signs**power if power > 0 else np.ones_like(signs)
    return (n.conjugator * values) @ n.conjugator.conj().T


def hn_telescoping(n: int, n1: NormalOperator, n2: NormalOperator) -> np.ndarray:
    """h_n(N₁) − h_n(N₂) assembled from the telescoping sum.

    For n ≥ 0:
        Σ_{j=0}^{n}   sgn^{2n−2j}(N₁)(N₁ − N₂)sgn^{2j}(N₂)
      + Σ_{j=0}^{n−1} sgn^{2n−2j}(N₁)(N₂* − N₁*)sgn^{2j+2}(N₂).
    For n < 0 the adjoint of the m = −n − 1 sum, since h̄_n = h_{−n−1}.
    """
    if n1.dim != n2.dim:
        raise ArgumentError(f"Operators have sizes {n1.dim} and {n2.dim}")
    if n < 0:
        return hn_telescoping(-n - 1, n1, n2).conj().T
    m1, m2 = n1.matrix, n2.matrix
    difference = m1 - m2
    adjoint_difference = m2.conj().T - m1.conj().T
    total = np.zeros_like(difference)
    for j in range(n + 1):
        left = _sgn_power_operator(n1, 2 * n - 2 * j)
        total += left @ difference @ _sgn_power_operator(n2, 2 * j)
    for j in range(n):
        total += (
            _sgn_power_operator(n1, 2 * n - 2 * j)
            @ adjoint_difference
            @ _sgn_power_operator(n2, 2 * j + 2)
        )
    return total


def circle_ratio(n: int, samples: int = 4096, epsilon: float = 1e-3) -> float:
    "max |h_n(e^{is}) − h_n(e^{it})|/|e^{is} − e^{it}| over s on a grid, t = s + ε."
    s = 2.0 * np.pi * np.arange(samples) / samples
    z, w = np.exp(1j * s), np.exp(1j * (s + epsilon))
    h = parse_function(f"hn:{int(n)}")
    return float(np.max(np.abs(h.evaluate(z) - h.evaluate(w)) / np.abs(z - w)))


class HnLipschitzReport(NamedTuple):
    n: int
    instances: int
    bound: int
    max_ratio: float
    violations: int
    max_telescoping_residual: float
    circle_ratio: float

    @property
    def ok(self) -> bool:
        return (
            self.violations == 0
            and self.max_telescoping_residual <= 1e-9
            and self.circle_ratio >= self.bound - 1e-3
        )


def _hn_instance(n: int, seed: int, index: int, dim: int) -> tuple[float, float]:
    g = rng(seed, index)
    size = int(g.integers(1, dim + 1))
    n1 = random_normal(size, g)
    if g.uniform() < 0.5:
        n2 = random_normal(size, g)
    else:
        # Nearby pairs probe the local Lipschitz ratio.
        step = 10.0 ** g.uniform(-4, -1)
        noise = g.standard_normal(size) + 1j * g.standard_normal(size)
        n2 = make_normal(n1.eigenvalues + step * noise, n1.conjugator)
    h = parse_function(f"hn:{n}")
    direct = apply_function(h, n1) - apply_function(h, n2)
    gap = operator_norm(n1.matrix - n2.matrix)
    ratio = operator_norm(direct) / gap if gap > 0 else 0.0
    telescoped = hn_telescoping(n, n1, n2)
    residual = operator_norm(telescoped - direct) / (1.0 + operator_norm(direct))
    return ratio, residual


def hn_lipschitz_check(
    n: int, instances: int, dim: int, seed: int = 0, num_concurrent: int = 1
) -> HnLipschitzReport:
    """Random checks of ‖h_n(N₁) − h_n(N₂)‖ ≤ |2n+1|·‖N₁ − N₂‖ (+1e-8), of the telescoping
    identity (relative residual 1e-9) and the scalar sharpness on the unit circle."""
    if instances < 1 or dim < 1:
        raise ArgumentError("instances and dim must be positive")
    bound = abs(2 * n + 1)
    results = run_seeded_tasks(
        lambda i: _hn_instance(n, seed, i, dim),
        range(instances),
        num_concurrent,
        description=f"h_{n}",
    )
    ratios = np.array([r for r, _ in results])
    residuals = np.array([e for _, e in results])
    report = HnLipschitzReport(
        n=n,
        instances=instances,
        bound=bound,
        max_ratio=float(ratios.max()),
        violations=int(np.sum(ratios > bound + 1e-8)),
        max_telescoping_residual=float(residuals.max()),
        circle_ratio=circle_ratio(n),
    )
    logger.info(
        f"h_{n}: max ratio {report.max_ratio:.9g} against {bound}, "
        f"{report.violations} violations"
    )
    return report


class HolderConstantEstimate(NamedTuple):
    """A lower bound for ĥ_α.

    `lower = witness.value/(seminorm·‖N₁ − N₂‖^α)` for ratio searches; envelope-based bounds
    carry no witness and record the substitution in `formula_trace`.
    """

    alpha: float
    lower: float
    witness: ModulusWitness | None
    formula_trace: dict[str, Any]


def _require_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ArgumentError(f"α must lie in (0, 1), got {alpha}")


def _nondegenerate_seminorm(f: FunctionSpec, alpha: float, radius: float) -> HolderSeminorm:
    if f.family == "constant":
        raise DegenerateInputError(f"{f.key} is constant; its Λ_{alpha} seminorm vanishes")
    seminorm = holder_seminorm(f, alpha, radius)
    if seminorm.value <= 0.0:
        raise DegenerateInputError(
            f"{f.key} has vanishing Λ_{alpha} seminorm on the disc of radius {radius}"
        )
    return seminorm


def holder_ratio_search(
    f: FunctionSpec,
    alpha: float,
    dim: int,
    budget: int,
    seed: int = 0,
    radius: float = 1.0,
    support: Support = "disc",
    settings: SearchSettings = DEFAULT_SEARCH,
) -> HolderConstantEstimate:
    """Best ‖f(N₁) − f(N₂)‖/(‖f‖_{Λ_α}·‖N₁ − N₂‖^α) found over normal pairs with spectra in F.

    Scalar pairs (antipodal and along rays) embedded as multiples of the identity are scored
    first; then each budget unit draws a fresh pair or perturbs the incumbent.  Spectra stay
    inside the radius cap, so homogeneous f give finite, radius-dependent values.

    Raises:
        ArgumentError: α ∉ (0, 1), dim < 1 or budget < 1.
        DegenerateInputError: ‖f‖_{Λ_α} = 0.
    """
    _require_alpha(alpha)
    if dim < 1 or budget < 1:
        raise ArgumentError(f"dim and budget must be positive, got {dim}, {budget}")
    seminorm = _nondegenerate_seminorm(f, alpha, radius)
    problem = SearchProblem(ModulusKind.PLAIN, f, math.inf, dim, radius, support, settings)
    g = rng(seed)

    best: tuple[NormalOperator, NormalOperator] | None = None
    best_ratio = -math.inf

    def consider(n1: NormalOperator, n2: NormalOperator) -> None:
        nonlocal best, best_ratio
        gap = operator_norm(n1.matrix - n2.matrix)
        if gap <= 0.0:
            return
        ratio = operator_norm(apply_function(f, n1) - apply_function(f, n2)) / gap**alpha
        if ratio > best_ratio:
            best, best_ratio = (n1, n2), ratio

    for z, w in problem.scalar_pairs(radius) + problem.scalar_pairs(radius / 2.0):
        consider(diagonal_normal(np.full(dim, z)), diagonal_normal(np.full(dim, w)))
    for t in radius * np.geomspace(1e-4, 1.0, 9):
        consider(diagonal_normal(np.zeros(dim)), diagonal_normal(np.full(dim, t)))

    with SearchProgressBar() as p:
        task = p.add_task(f"holder {f.key} α={alpha:g}", total=budget, best=None)
        for _ in range(budget):
            if best is None or g.uniform() < settings.fresh_probability:
                candidate = problem.fresh(g)
            else:
                candidate = problem.perturb(Candidate(best[0], best[1], None), g)
            consider(candidate.n1, candidate.n2)
            p.update(task, advance=1, best=best_ratio / seminorm.value if best else None)

    if best is None:
        raise DegenerateInputError(f"No pair with N₁ ≠ N₂ found for {f.key}")
    n1, n2 = best
    delta = operator_norm(n1.matrix - n2.matrix)
    witness = make_witness(ModulusKind.PLAIN, f, delta, n1, n2, None, seed, radius, support)
    lower = witness.value / (seminorm.value * witness.constraint**alpha)
    return HolderConstantEstimate(
        alpha=alpha,
        lower=lower,
        witness=witness,
        formula_trace={
            "delta": witness.constraint,
            "seminorm": seminorm.value,
            "seminorm_method": seminorm.method,
            "radius": radius,
        },
    )


class QuasicommutatorReport(NamedTuple):
    alpha: float
    instances: int
    seminorm: HolderSeminorm
    max_ratio: float
    quantiles: tuple[float, float, float]  # 50%, 90%, 99%
    max_omega_ratio: float
    violations: int
    reference: float  # (1 − α)^{-2}


def _quasicommutator_instance(
    f: FunctionSpec,
    alpha: float,
    seminorm: float,
    omega: Any,
    seed: int,
    index: int,
    dim: int,
    radius: float,
) -> tuple[float, float, bool]:
    g = rng(seed, index)
    size = int(g.integers(1, dim + 1))
    n1 = random_normal(size, g, radius)
    n2 = random_normal(size, g, radius) if g.uniform() < 0.5 else n1
    r = random_matrix(size, size, g) * 10.0 ** g.uniform(-2, 1)
    numerator = operator_norm(apply_function(f, n1) @ r - r @ apply_function(f, n2))
    constraint = operator_norm(n1.matrix @ r - r @ n2.matrix)
    r_norm = operator_norm(r)
    if constraint == 0.0:
        return 0.0, 0.0, numerator > 1e-12
    ratio = numerator / (seminorm * constraint**alpha * r_norm ** (1.0 - alpha))
    omega_ratio = numerator / (r_norm * omega_transform(omega, constraint / r_norm, order=2))
    return ratio, omega_ratio, False


def quasicommutator_experiment(
    f: FunctionSpec,
    alpha: float,
    instances: int,
    dim: int,
    seed: int = 0,
    radius: float = 1.0,
    num_concurrent: int = 1,
) -> QuasicommutatorReport:
    """Ratios ‖f(N₁)R − Rf(N₂)‖/(‖f‖_{Λ_α}·‖N₁R − RN₂‖^α·‖R‖^{1−α}) over random instances.

    Also records ‖f(N₁)R − Rf(N₂)‖/(‖R‖·ω**(‖N₁R − RN₂‖/‖R‖)) with ω the measured modulus of f.
    No constant is asserted; a zero constraint with nonzero numerator counts as a violation.
    """
    _require_alpha(alpha)
    if instances < 1 or dim < 1:
        raise ArgumentError("instances and dim must be positive")
    seminorm = _nondegenerate_seminorm(f, alpha, radius)
    omega = measured_modulus_spec(f, radius, seed=seed)
    results = run_seeded_tasks(
        lambda i: _quasicommutator_instance(f, alpha, seminorm.value, omega, seed, i, dim, radius),
        range(instances),
        num_concurrent,
        description=f"quasicommutator α={alpha:g}",
    )
    ratios = np.array([r for r, _, _ in results])
    omega_ratios = np.array([o for _, o, _ in results])
    q50, q90, q99 = (float(q) for q in np.quantile(ratios, [0.5, 0.9, 0.99]))
    report = QuasicommutatorReport(
        alpha=alpha,
        instances=instances,
        seminorm=seminorm,
        max_ratio=float(ratios.max()),
        quantiles=(q50, q90, q99),
        max_omega_ratio=float(omega_ratios.max()),
        violations=sum(v for _, _, v in results),
        reference=(1.0 - alpha) ** -2,
    )
    logger.info(
        f"α={alpha:g}: max ratio {report.max_ratio:.6g} "
        f"against (1−α)^-2 = {report.reference:.6g}"
    )
    return report


def substitution_delta(alpha: float) -> float:
    "δ(α) = 2·exp(−1/(1 − α))."
    _require_alpha(alpha)
    return 2.0 * math.exp(-1.0 / (1.0 - alpha))


def halpha_lower(
    alpha_grid: Sequence[float],
    f: FunctionSpec,
    envelope: ModulusEnvelope,
    radius: float = 1.0,
    samples: int = 200_000,
    seed: int = 0,
) -> list[HolderConstantEstimate]:
    """ĥ_α ≥ Ω_f(δ)/(‖f‖_{Λ_α}·δ^α) at δ = δ(α), with Ω_f(δ) read off a PLAIN envelope.

    The envelope value is taken at its largest grid point ≤ δ(α).  ‖f‖_{Λ_α} is the analytic
    seminorm when on record, else the bound 2^{1−α} that holds for sup|f| ≤ 1 and Lip f ≤ 1.

    Raises:
        ArgumentError: α ∉ (0, 1), or an envelope of another kind or function.
        PreconditionError: sampled sup|f| or Lipschitz constant above 1.
    """
    for alpha in alpha_grid:
        _require_alpha(alpha)
    if envelope.kind is not ModulusKind.PLAIN or envelope.f_key != f.key:
        raise ArgumentError(
            f"Need a PLAIN envelope of {f.key}, "
            f"got {envelope.kind.value} of {envelope.f_key}"
        )

    sup = f.sup_on(radius)
    if sup is None:
        g = rng(seed, 7)
        z = radius * np.sqrt(g.uniform(size=samples)) * np.exp(2j * np.pi * g.uniform(size=samples))
        rim = radius * np.exp(2j * np.pi * np.arange(64) / 64)
        sup = float(np.max(np.abs(f.evaluate(np.concatenate([z, rim])))))
    lip = f.lipschitz_on(radius)
    if lip is None:
        lip = sampled_holder_seminorm(f, 1.0, radius, samples, seed)
    if sup > 1.0 + 1e-9 or lip > 1.0 + 1e-9:
        raise PreconditionError(
            f"{f.key} needs sup|f| ≤ 1 and Lip ≤ 1 on the disc, got {sup:.6g}, {lip:.6g}"
        )

    estimates = []
    for alpha in alpha_grid:
        delta = substitution_delta(alpha)
        analytic = f.holder_constant(alpha, radius)
        seminorm = analytic if analytic is not None and analytic > 0 else 2.0 ** (1.0 - alpha)
        value = envelope.value_at(delta)
        estimates.append(
            HolderConstantEstimate(
                alpha=alpha,
                lower=value / (seminorm * delta**alpha),
                witness=None,
                formula_trace={
                    "delta": delta,
                    "envelope_value": value,
                    "seminorm": seminorm,
                    "seminorm_method": (
                        "analytic" if analytic is not None and analytic > 0 else "sup_lip_bound"
                    ),
                },
            )
        )
    return estimates
