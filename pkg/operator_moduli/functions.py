"""Registry of scalar test functions f: F ⊂ ℂ → ℂ with their analytic seminorm data.

Every entry is a `FunctionSpec`: a vectorized evaluator plus whatever is known in closed form
(Lipschitz constant on a disc, Λ_α seminorm, scalar modulus of continuity, complex derivative,
sup-norm, commutator-Lipschitz norm).  Unknown data is `None` and callers fall back to sampling.
"""
import json
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from operator_moduli.errors import ArgumentError, DomainError
from operator_moduli.utils import rng

logger = logging.getLogger("FunctionLogger")

ArrayFn = Callable[[np.ndarray], np.ndarray]

# Pairs per chunk of the sampling estimator; chunk i always draws from stream i.
_SAMPLE_CHUNK = 1 << 16


@dataclass(frozen=True, kw_only=True)
class FunctionSpec:
    """A registry function with its metadata.

    Attributes:
        key: registry id, e.g. `hn:2` or `conj(exp_atom:1,0)`.
        family: registry family name.
        evaluator: vectorized f, applied to complex128 arrays inside the domain.
        domain: vectorized mask of admissible points (`None` = all of ℂ).
        lipschitz: Lipschitz constant on clos(rD) as a function of r (r = inf for ℂ).
        holder: Λ_α seminorm on clos(rD) as a function of (α, r), when known in closed form.
        modulus: upper bound for the scalar modulus ω_f(t) on ℂ.
        modulus_exact: whether `modulus` is ω_f itself (usable as a lower bound too).
        derivative: complex derivative for holomorphic entries.
        cl_norm: ‖D₀f‖ as a Schur multiplier on ℂ×ℂ when known (affine maps only).
        sup_norm: sup |f| on clos(rD) as a function of r.
        support: natural closed set for sampling ("disc" or "line").
    """

    key: str
    family: str
    evaluator: ArrayFn
    domain: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz: Callable[[float], float] | None = None
    holder: Callable[[float, float], float] | None = None
    modulus: ArrayFn | None = None
    modulus_exact: bool = False
    derivative: ArrayFn | None = None
    cl_norm: float | None = None
    sup_norm: Callable[[float], float] | None = None
    support: str = "disc"
    params: tuple[Any, ...] = ()

    def __repr__(self) -> str:
        return f"FunctionSpec({self.key!r})"

    def evaluate(self, z: Any) -> np.ndarray:
        """f applied entrywise.

        Raises:
            DomainError: some point is outside the declared domain; the first one is reported.
        """
        points = np.asarray(z, dtype=np.complex128)
        if self.domain is not None:
            inside = np.asarray(self.domain(points), dtype=bool)
            if not np.all(inside):
                bad = complex(points.reshape(-1)[np.flatnonzero(~inside.reshape(-1))[0]])
                raise DomainError(f"{self.key} is undefined at {bad}", bad)
        return np.asarray(self.evaluator(points), dtype=np.complex128)

    __call__ = evaluate

    def lipschitz_on(self, radius: float = math.inf) -> float | None:
        return None if self.lipschitz is None else float(self.lipschitz(radius))

    def holder_constant(self, alpha: float, radius: float = math.inf) -> float | None:
        "Closed-form ‖f‖_{Λ_α} on clos(rD), or None."
        if self.holder is not None:
            return float(self.holder(alpha, radius))
        if self.family == "constant":
            return 0.0
        return None

    def omega(self, t: Any) -> np.ndarray:
        if self.modulus is None:
            raise ArgumentError(f"{self.key} has no scalar modulus of continuity on record")
        return np.asarray(self.modulus(np.asarray(t, dtype=float)), dtype=float)

    def sup_on(self, radius: float) -> float | None:
        return None if self.sup_norm is None else float(self.sup_norm(radius))

    def conjugate(self) -> "FunctionSpec":
        "The pointwise conjugate f̄ (h_n ↦ h_{−n−1}, z ↦ z̄)."
        match self.family:
            case "identity":
                return parse_function("conj")
            case "conj":
                return parse_function("identity")
            case "hn":
                return parse_function(f"hn:{-self.params[0] - 1}")
            case "constant":
                c = complex(self.params[0]).conjugate()
                return constant(c)
        evaluator = self.evaluator
        key = self.key[5:-1] if self.key.startswith("conj(") else f"conj({self.key})"
        return replace(
            self,
            key=key,
            family=self.family,
            evaluator=lambda z: np.conj(evaluator(z)),
            derivative=None,
            cl_norm=None,
        )

    def affine(self, a: complex, b: complex = 0.0) -> "FunctionSpec":
        "a·f + b, with all seminorms scaled by |a|."
        a, b = complex(a), complex(b)
        if self.family == "constant":
            return constant(a * complex(self.params[0]) + b)
        scale = abs(a)
        evaluator, derivative = self.evaluator, self.derivative
        lip, hol, mod, sup = self.lipschitz, self.holder, self.modulus, self.sup_norm
        return replace(
            self,
            key=f"({a!r}*{self.key}+{b!r})",
            family=self.family,
            evaluator=lambda z: a * evaluator(z) + b,
            lipschitz=None if lip is None else lambda r: scale * lip(r),
            holder=None if hol is None else lambda alpha, r: scale * hol(alpha, r),
            modulus=None if mod is None else lambda t: scale * mod(t),
            derivative=None if derivative is None else lambda z: a * derivative(z),
            cl_norm=None if self.cl_norm is None else scale * self.cl_norm,
            sup_norm=None if sup is None else lambda r: scale * sup(r) + abs(b),
        )

    def __mul__(self, other: "FunctionSpec") -> "FunctionSpec":
        "Pointwise product.  Lipschitz and Λ_α data follow the Leibniz bound on discs."
        f, g = self, other
        lip = None
        if None not in (f.lipschitz, g.lipschitz, f.sup_norm, g.sup_norm):
            lip = lambda r: (  # noqa: E731
                f.lipschitz(r) * g.sup_norm(r) + g.lipschitz(r) * f.sup_norm(r)
            )
        holder = None
        if None not in (f.holder, g.holder, f.sup_norm, g.sup_norm):
            holder = lambda alpha, r: (  # noqa: E731
                f.holder(alpha, r) * g.sup_norm(r) + g.holder(alpha, r) * f.sup_norm(r)
            )
        derivative = None
        if f.derivative is not None and g.derivative is not None:
            derivative = lambda z: (  # noqa: E731
                f.derivative(z) * g.evaluator(z) + f.evaluator(z) * g.derivative(z)
            )
        sup = None
        if f.sup_norm is not None and g.sup_norm is not None:
            sup = lambda r: f.sup_norm(r) * g.sup_norm(r)  # noqa: E731
        domains = [d for d in (f.domain, g.domain) if d is not None]
        return FunctionSpec(
            key=f"({f.key})*({g.key})",
            family="product",
            evaluator=lambda z: f.evaluator(z) * g.evaluator(z),
            domain=(lambda z: np.logical_and.reduce([d(z) for d in domains])) if domains else None,
            lipschitz=lip,
            holder=holder,
            derivative=derivative,
            sup_norm=sup,
            support="line" if "line" in (f.support, g.support) else "disc",
        )


def _disc_holder(scale: float) -> Callable[[float, float], float]:
    "Λ_α of a map with |f(z)−f(w)| = scale·|z−w| on clos(rD): scale·(2r)^{1−α}."
    return lambda alpha, r: scale * (2.0 * r) ** (1.0 - alpha) if alpha < 1.0 else scale


def _hn(n: int) -> ArrayFn:
    def h(z: np.ndarray) -> np.ndarray:
        modulus = np.abs(z)
        safe = np.where(modulus > 0, modulus, 1.0)
        return np.where(modulus > 0, modulus * (z / safe) ** (2 * n + 1), 0.0)

    return h


def _sgn_power(alpha: float) -> ArrayFn:
    def f(z: np.ndarray) -> np.ndarray:
        modulus = np.abs(z)
        safe = np.where(modulus > 0, modulus, 1.0)
        return np.where(modulus > 0, z * safe ** (alpha - 1.0), 0.0)

    return f


def _exp_atom_holder(frequency: float) -> Callable[[float, float], float]:
    "sup_s 2 sin(min(|ζ₀|s, π)/2)/s^α = |ζ₀|^α · max_{u∈(0,π]} 2 sin(u/2)/u^α."

    def holder(alpha: float, radius: float) -> float:
        if frequency == 0.0:
            return 0.0
        if alpha >= 1.0:
            return frequency
        result = minimize_scalar(
            lambda u: -2.0 * math.sin(u / 2.0) / u**alpha,
            bounds=(1e-9, math.pi),
            method="bounded",
            options={"xatol": 1e-12},
        )
        return frequency**alpha * float(-result.fun)

    return holder


def constant(c: complex) -> FunctionSpec:
    c = complex(c)
    return FunctionSpec(
        key=f"constant:{c.real!r}" if c.imag == 0 else f"constant:{c!r}",
        family="constant",
        evaluator=lambda z: np.full(np.shape(z), c, dtype=np.complex128),
        lipschitz=lambda r: 0.0,
        holder=lambda alpha, r: 0.0,
        modulus=lambda t: np.zeros_like(t, dtype=float),
        modulus_exact=True,
        derivative=lambda z: np.zeros(np.shape(z), dtype=np.complex128),
        cl_norm=0.0,
        sup_norm=lambda r: abs(c),
        params=(c,),
    )


def affine_map(a: complex, b: complex = 0.0) -> FunctionSpec:
    "f(z) = az + b.  D₀f ≡ a, so ‖f‖_CL = |a|."
    a, b = complex(a), complex(b)
    scale = abs(a)
    return FunctionSpec(
        key=f"affine:{a.real!r},{a.imag!r},{b.real!r},{b.imag!r}",
        family="affine",
        evaluator=lambda z: a * z + b,
        lipschitz=lambda r: scale,
        holder=_disc_holder(scale),
        modulus=lambda t: scale * t,
        modulus_exact=True,
        derivative=lambda z: np.full(np.shape(z), a, dtype=np.complex128),
        cl_norm=scale,
        sup_norm=lambda r: scale * r + abs(b),
        params=(a, b),
    )


def bandlimited(key: str, evaluator: ArrayFn, **metadata: Any) -> FunctionSpec:
    "Programmatic handle (e.g. a band-limited approximation sampled on a grid)."
    return FunctionSpec(key=key, family="bandlimited", evaluator=evaluator, **metadata)


def table_function(x: Any, y: Any, key: str = "table") -> FunctionSpec:
    """Real-line function by linear interpolation of (x_i, y_i) samples, x strictly increasing.

    Its domain is the segment [x₀, x_n] of the real axis.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=np.complex128)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ArgumentError("table needs matching x/y arrays with at least two samples")
    if np.any(np.diff(xs) <= 0):
        raise ArgumentError("table x values must be strictly increasing")
    slopes = np.abs(np.diff(ys)) / np.diff(xs)
    lip = float(slopes.max())
    oscillation = float(np.max(np.abs(ys[:, None] - ys[None, :])))
    lo, hi = xs[0], xs[-1]

    def evaluator(z: np.ndarray) -> np.ndarray:
        t = np.real(z)
        return np.interp(t, xs, ys.real) + 1j * np.interp(t, xs, ys.imag)

    return FunctionSpec(
        key=key,
        family="table",
        evaluator=evaluator,
        domain=lambda z: (np.abs(np.imag(z)) <= 1e-12) & (np.real(z) >= lo) & (np.real(z) <= hi),
        lipschitz=lambda r: lip,
        modulus=lambda t: np.minimum(lip * t, oscillation),
        sup_norm=lambda r: float(np.abs(ys).max()),
        support="line",
        params=(xs, ys),
    )


def _registry_entry(family: str, args: list[str], key: str) -> FunctionSpec:
    match family, len(args):
        case "identity", 0:
            return replace(affine_map(1.0), key="identity", family="identity", params=())
        case "conj", 0:
            return FunctionSpec(
                key="conj",
                family="conj",
                evaluator=np.conj,
                lipschitz=lambda r: 1.0,
                holder=_disc_holder(1.0),
                modulus=lambda t: t,
                modulus_exact=True,
                sup_norm=lambda r: r,
            )
        case "re", 0:
            return FunctionSpec(
                key="re",
                family="re",
                evaluator=lambda z: np.real(z).astype(np.complex128),
                lipschitz=lambda r: 1.0,
                holder=_disc_holder(1.0),
                modulus=lambda t: t,
                modulus_exact=True,
                sup_norm=lambda r: r,
            )
        case "power", 1:
            k = int(args[0])
            if k < 0:
                return FunctionSpec(
                    key=key,
                    family="power",
                    evaluator=lambda z: z ** float(k),
                    domain=lambda z: z != 0,
                    derivative=lambda z: k * z ** float(k - 1),
                    params=(k,),
                )
            return FunctionSpec(
                key=key,
                family="power",
                evaluator=lambda z: z**k,
                lipschitz=lambda r: k * r ** (k - 1) if k else 0.0,
                holder=_disc_holder(1.0) if k == 1 else None,
                modulus=(lambda t: t) if k == 1 else None,
                modulus_exact=k == 1,
                derivative=lambda z: k * z ** (k - 1) if k else np.zeros_like(z),
                sup_norm=lambda r: r**k,
                params=(k,),
            )
        case "hn", 1:
            n = int(args[0])
            slope = float(abs(2 * n + 1))
            return FunctionSpec(
                key=key,
                family="hn",
                evaluator=_hn(n),
                lipschitz=lambda r: slope,
                holder=_disc_holder(1.0) if n in (0, -1) else None,
                modulus=lambda t: slope * t,
                modulus_exact=n in (0, -1),
                derivative=(lambda z: np.ones_like(z)) if n == 0 else None,
                sup_norm=lambda r: r,
                params=(n,),
            )
        case "sgn_power", 1:
            alpha = float(args[0])
            if not 0.0 < alpha <= 1.0:
                raise ArgumentError(f"sgn_power needs α ∈ (0, 1], got {alpha}")
            c = 2.0 ** (1.0 - alpha)
            return FunctionSpec(
                key=key,
                family="sgn_power",
                evaluator=_sgn_power(alpha),
                lipschitz=(lambda r: 1.0) if alpha == 1.0 else None,
                holder=lambda a, r: c if a == alpha else _holder_from_modulus(c, alpha, a, r),
                modulus=lambda t: c * t**alpha,
                modulus_exact=True,
                sup_norm=lambda r: r**alpha,
                params=(alpha,),
            )
        case "abs_power", 1:
            alpha = float(args[0])
            if not 0.0 < alpha <= 1.0:
                raise ArgumentError(f"abs_power needs α ∈ (0, 1], got {alpha}")
            return FunctionSpec(
                key=key,
                family="abs_power",
                evaluator=lambda z: (np.abs(z) ** alpha).astype(np.complex128),
                lipschitz=(lambda r: 1.0) if alpha == 1.0 else None,
                holder=lambda a, r: 1.0 if a == alpha else _holder_from_modulus(1.0, alpha, a, r),
                modulus=lambda t: t**alpha,
                modulus_exact=True,
                sup_norm=lambda r: r**alpha,
                params=(alpha,),
            )
        case "exp_atom", 2:
            zeta = complex(float(args[0]), float(args[1]))
            frequency = abs(zeta)
            return FunctionSpec(
                key=key,
                family="exp_atom",
                evaluator=lambda z: np.exp(-1j * np.real(z * np.conj(zeta))),
                lipschitz=lambda r: frequency,
                holder=_exp_atom_holder(frequency),
                modulus=lambda t: 2.0 * np.sin(np.minimum(frequency * t, np.pi) / 2.0),
                modulus_exact=True,
                sup_norm=lambda r: 1.0,
                params=(zeta,),
            )
        case "constant", 1:
            return replace(constant(complex(args[0].replace(" ", ""))), key=key)
        case "affine", 4:
            a_re, a_im, b_re, b_im = (float(v) for v in args)
            return affine_map(complex(a_re, a_im), complex(b_re, b_im))
        case "table", 1:
            path = Path(args[0])
            try:
                payload = json.loads(path.read_text())
                return table_function(payload["x"], payload["y"], key=key)
            except (OSError, KeyError, json.JSONDecodeError) as e:
                raise ArgumentError(f"Cannot load function table {path}: {e}") from e
    raise ArgumentError(f"Unknown function id {key!r}")


def _holder_from_modulus(c: float, beta: float, alpha: float, radius: float) -> float:
    "Λ_α on clos(rD) of a function with ω(t) = c·t^β, for α ≤ β."
    if alpha > beta:
        return math.inf
    return c * (2.0 * radius) ** (beta - alpha)


def parse_function(key: str) -> FunctionSpec:
    """Look up a registry id.

    Accepted ids: `identity`, `conj`, `re`, `power:k`, `hn:n`, `sgn_power:α`, `abs_power:α`,
    `exp_atom:re,im`, `constant:c`, `affine:a_re,a_im,b_re,b_im`, `table:<json path>`
    and `conj(<id>)` for any of them.

    Raises:
        ArgumentError: unknown id or malformed parameters.
    """
    key = key.strip()
    if key.startswith("conj(") and key.endswith(")"):
        return parse_function(key[5:-1]).conjugate()
    family, _, rest = key.partition(":")
    if family == "table":
        args = [rest]
    else:
        args = [a for a in rest.split(",")] if rest else []
    try:
        return _registry_entry(family, args, key)
    except ValueError as e:
        if isinstance(e, ArgumentError):
            raise
        raise ArgumentError(f"Malformed parameters in function id {key!r}: {e}") from e


REGISTRY_EXAMPLES = (
    "identity",
    "conj",
    "re",
    "power:2",
    "hn:1",
    "hn:-2",
    "sgn_power:0.5",
    "abs_power:0.5",
    "exp_atom:1,0",
    "constant:1",
    "affine:2,0,1,0",
)


class HolderSeminorm(NamedTuple):
    "‖f‖_{Λ_α} on clos(rD) together with how it was obtained."

    value: float
    method: str  # "analytic" | "sampled"


def _structured_pairs(radius: float, support: str) -> tuple[np.ndarray, np.ndarray]:
    "Antipodal and ray pairs, where Λ_α seminorms of radial maps are attained."
    t = radius * np.geomspace(1e-6, 1.0, 200)
    if support == "line":
        z = np.concatenate([t, t, np.zeros_like(t)])
        w = np.concatenate([-t, t / 2.0, t])
        return z.astype(np.complex128), w.astype(np.complex128)
    phases = np.exp(2j * np.pi * np.arange(8) / 8)
    rays = np.outer(phases, t).ravel()
    z = np.concatenate([rays, np.zeros(t.size), rays])
    w = np.concatenate([-rays, t.astype(complex), np.outer(phases, t / 2).ravel()])
    return z, w


def sampled_holder_seminorm(
    f: FunctionSpec, alpha: float, radius: float = 1.0, samples: int = 10**6, seed: int = 0
) -> float:
    """max |f(z)−f(w)|/|z−w|^α over seeded pairs in F ∩ clos(rD).

    Pairs are drawn chunk by chunk from independent sub-streams, so a larger `samples`
    evaluates a superset of the pairs and the estimate never decreases.
    """
    if not 0.0 < alpha <= 1.0:
        raise ArgumentError(f"α must lie in (0, 1], got {alpha}")
    lo, hi = -radius, radius
    if f.family == "table":
        xs = f.params[0]
        lo, hi = max(lo, float(xs[0])), min(hi, float(xs[-1]))
        radius = max(abs(lo), abs(hi))

    def ratio(z: np.ndarray, w: np.ndarray) -> float:
        if f.support == "line":
            z, w = np.clip(z.real, lo, hi).astype(complex), np.clip(w.real, lo, hi).astype(complex)
        gap = np.abs(z - w)
        keep = gap > 0
        if not np.any(keep):
            return 0.0
        values = np.abs(f.evaluate(z[keep]) - f.evaluate(w[keep])) / gap[keep] ** alpha
        return float(values.max())

    best = ratio(*_structured_pairs(radius, f.support))
    remaining, chunk = samples, 0
    while remaining > 0:
        g = rng(seed, chunk)
        if f.support == "line":
            points = g.uniform(lo, hi, (2, _SAMPLE_CHUNK)).astype(np.complex128)
        else:
            rho = radius * np.sqrt(g.uniform(0.0, 1.0, (2, _SAMPLE_CHUNK)))
            points = rho * np.exp(2j * np.pi * g.uniform(0.0, 1.0, (2, _SAMPLE_CHUNK)))
        take = min(remaining, _SAMPLE_CHUNK)
        best = max(best, ratio(points[0, :take], points[1, :take]))
        remaining -= take
        chunk += 1
    logger.debug(f"Sampled Λ_{alpha} seminorm of {f.key}: {best:.6g} ({samples} pairs)")
    return best


def holder_seminorm(
    f: FunctionSpec, alpha: float, radius: float = 1.0, samples: int = 10**6, seed: int = 0
) -> HolderSeminorm:
    "Analytic ‖f‖_{Λ_α} when the registry knows it, else the sampling estimate."
    analytic = f.holder_constant(alpha, radius)
    if analytic is not None and math.isfinite(analytic):
        return HolderSeminorm(analytic, "analytic")
    return HolderSeminorm(sampled_holder_seminorm(f, alpha, radius, samples, seed), "sampled")


def sampled_modulus(
    f: FunctionSpec, t: float, radius: float = 1.0, samples: int = 20_000, seed: int = 0
) -> float:
    "Lower estimate of ω_f(t) on clos(rD): max |f(z)−f(w)| over seeded pairs with |z−w| = t."
    if t <= 0:
        return 0.0
    g = rng(seed, 1_000_003)
    if f.support == "line":
        if f.family == "table":
            xs = f.params[0]
            lo, hi = float(xs[0]), float(xs[-1])
        else:
            lo, hi = -radius, radius
        if hi - lo < t:
            return 0.0
        z = g.uniform(lo, hi - t, samples)
        return float(np.max(np.abs(f.evaluate(z + t + 0j) - f.evaluate(z + 0j))))
    if 2 * radius < t:
        return 0.0
    theta = np.exp(2j * np.pi * g.uniform(0.0, 1.0, samples))
    centre_room = radius - t / 2.0
    rho = centre_room * np.sqrt(g.uniform(0.0, 1.0, samples))
    centres = rho * np.exp(2j * np.pi * g.uniform(0.0, 1.0, samples))
    z = np.concatenate([centres + theta * t / 2.0, [t / 2.0, 0.0]])
    w = np.concatenate([centres - theta * t / 2.0, [-t / 2.0, t]])
    keep = np.abs(z) <= radius * (1 + 1e-12)
    keep &= np.abs(w) <= radius * (1 + 1e-12)
    return float(np.max(np.abs(f.evaluate(z[keep]) - f.evaluate(w[keep]))))
