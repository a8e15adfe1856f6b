"""Synthetic regression data: uniform designs, symmetric heavy-tailed
noise, and test functions with certified smoothness constants.

Randomness comes from the counter-based Philox generator with explicit
sub-stream derivation: stream 0 of a seed drives the design, stream 1 the
noise, so the two are independent by construction and every draw is a
pure function of (seed, stream).  All noise families are sampled by
inverse transform from the same uniform stream; the quantile transforms
are folded around 1/2 so that flipping a uniform u -> 1 - u negates the
draw exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .basis import multi_index_set
from .lepski import holder_floor
from .local_fit import Dataset

__all__ = [
    "NoiseFamily",
    "NOISE_FAMILIES",
    "HeteroscedasticRule",
    "NoiseModel",
    "TestFunction",
    "substream",
    "gen_design",
    "gen_noise",
    "noise_from_uniforms",
    "gen_data",
    "sinusoid",
    "cusp",
    "product_sinusoid",
    "constant_function",
    "polynomial_function",
    "function_library",
    "certify_holder",
    "certify_noise_family",
]

DESIGN_STREAM = 0
NOISE_STREAM = 1

# Keep inverse-CDF arguments strictly inside (0, 1).
_U_MARGIN = 2.0**-53


def substream(seed, *stream_ids: int) -> np.random.Generator:
    """Philox generator for a named sub-stream of a seed.

    ``seed`` may be an int or a tuple of ints (e.g. (base_seed, rep)).
    """
    entropy = seed if isinstance(seed, (tuple, list)) else (int(seed),)
    ss = np.random.SeedSequence(entropy=tuple(int(v) for v in entropy), spawn_key=stream_ids)
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Noise families (unit scale)
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class NoiseFamily:
    """A symmetric unit-scale density with closed-form cdf and quantile."""

    name: str
    density: Callable[[float], float]
    cdf: Callable[[float], float]
    _upper_quantile: Callable[[np.ndarray], np.ndarray]  # for u in [1/2, 1)

    def quantile(self, u):
        """Inverse cdf, folded so quantile(1 - u) == -quantile(u) exactly."""
        u = np.asarray(u, dtype=float)
        upper = np.where(u >= 0.5, u, 1.0 - u)
        vals = self._upper_quantile(upper)
        return np.where(u >= 0.5, vals, -vals)


def _gauss_density(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _gauss_cdf(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _laplace_density(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * np.exp(-np.abs(z))


def _laplace_cdf(z):
    return 0.5 * math.exp(z) if z < 0 else 1.0 - 0.5 * math.exp(-z)


def _cauchy_density(z):
    z = np.asarray(z, dtype=float)
    return 1.0 / (math.pi * (1.0 + z * z))


def _cauchy_cdf(z):
    return 0.5 + math.atan(z) / math.pi


NOISE_FAMILIES = {
    "gaussian": NoiseFamily(
        name="gaussian",
        density=_gauss_density,
        cdf=_gauss_cdf,
        _upper_quantile=lambda u: ndtri(u),
    ),
    "laplace": NoiseFamily(
        name="laplace",
        density=_laplace_density,
        cdf=_laplace_cdf,
        _upper_quantile=lambda u: -np.log(2.0 * (1.0 - u)),
    ),
    "cauchy": NoiseFamily(
        name="cauchy",
        density=_cauchy_density,
        cdf=_cauchy_cdf,
        _upper_quantile=lambda u: np.tan(math.pi * (u - 0.5)),
    ),
}


# ---------------------------------------------------------------------------
# Heteroscedastic scale rules
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HeteroscedasticRule:
    """Per-observation scale multipliers: constant, alternating between 1
    and ``factor``, or sinusoidal 1 + amplitude * sin(2 pi i / period)."""

    kind: str = "constant"
    factor: float = 1.0
    amplitude: float = 0.0
    period: int = 16

    def __post_init__(self):
        if self.kind not in ("constant", "alternating", "sinusoidal"):
            raise ValueError(f"unknown heteroscedastic rule {self.kind!r}")
        if self.kind == "alternating" and self.factor < 1.0:
            raise ValueError("alternating factor must be >= 1")
        if self.kind == "sinusoidal" and not 0.0 <= self.amplitude < 1.0:
            raise ValueError("sinusoidal amplitude must be in [0, 1)")
        if self.period < 1:
            raise ValueError("period must be >= 1")

    def multipliers(self, n: int) -> np.ndarray:
        i = np.arange(n)
        if self.kind == "constant":
            return np.ones(n)
        if self.kind == "alternating":
            return np.where(i % 2 == 0, 1.0, self.factor)
        return 1.0 + self.amplitude * np.sin(2.0 * math.pi * i / self.period)

    @property
    def min_multiplier(self) -> float:
        if self.kind == "sinusoidal":
            return 1.0 - self.amplitude
        return 1.0

    def to_config(self) -> dict:
        return {
            "kind": self.kind,
            "factor": self.factor,
            "amplitude": self.amplitude,
            "period": self.period,
        }


@dataclass(frozen=True)
class NoiseModel:
    """Noise specification: family, base scale, optional per-index scale
    rule, and the known lower scale bound sigma_min."""

    family: str
    base_scale: float = 1.0
    heteroscedastic: HeteroscedasticRule | None = None
    sigma_min: float | None = None

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.base_scale <= 0:
            raise ValueError(f"base scale must be positive, got {self.base_scale}")
        rule = self.heteroscedastic or HeteroscedasticRule()
        implied = self.base_scale * rule.min_multiplier
        sigma_min = implied if self.sigma_min is None else float(self.sigma_min)
        if sigma_min <= 0:
            raise ValueError(f"sigma_min must be positive, got {sigma_min}")
        if sigma_min > implied + 1e-15:
            raise ValueError(
                f"sigma_min {sigma_min} exceeds the smallest emitted scale {implied}"
            )
        object.__setattr__(self, "sigma_min", sigma_min)

    @property
    def unit_family(self) -> NoiseFamily:
        return NOISE_FAMILIES[self.family]

    def scales(self, n: int) -> np.ndarray:
        rule = self.heteroscedastic or HeteroscedasticRule()
        s = self.base_scale * rule.multipliers(n)
        assert np.all(s >= self.sigma_min - 1e-15), "scale rule violated sigma_min"
        return s

    def to_config(self) -> dict:
        cfg = {
            "family": self.family,
            "scale": self.base_scale,
            "sigma_min": self.sigma_min,
        }
        if self.heteroscedastic is not None:
            cfg["heteroscedastic"] = self.heteroscedastic.to_config()
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "NoiseModel":
        rule = cfg.get("heteroscedastic")
        return cls(
            family=cfg["family"],
            base_scale=cfg.get("scale", 1.0),
            heteroscedastic=HeteroscedasticRule(**rule) if rule else None,
            sigma_min=cfg.get("sigma_min"),
        )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------
def gen_design(n: int, d: int, seed) -> np.ndarray:
    """n i.i.d. uniform points on [0,1]^d from the design sub-stream."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return substream(seed, DESIGN_STREAM).random((n, d))


def noise_from_uniforms(u, family: NoiseFamily) -> np.ndarray:
    """Inverse-transform unit noise; odd in u around 1/2 by construction."""
    return family.quantile(u)


def gen_noise(model: NoiseModel, n: int, seed) -> np.ndarray:
    """Heteroscedastic noise draws sigma_i * xi_i from the noise sub-stream."""
    u = substream(seed, NOISE_STREAM).random(n)
    u = _U_MARGIN + u * (1.0 - 2.0 * _U_MARGIN)
    return model.scales(n) * noise_from_uniforms(u, model.unit_family)


def gen_data(f, model: NoiseModel, n: int, d: int, seed) -> Dataset:
    """Synthetic sample Y_i = f(X_i) + sigma_i xi_i with independent
    design and noise sub-streams."""
    x = gen_design(n, d, seed)
    y = np.asarray(f(x), dtype=float) + gen_noise(model, n, seed)
    return Dataset(x=x, y=y)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TestFunction:
    """A regression function with declared smoothness (beta), Lipschitz
    constant and derivative-sum bound, plus analytic partial derivatives
    up to the integer part of beta (None when a derivative is absent)."""

    name: str
    d: int
    beta: float
    lipschitz: float
    bound: float
    fn: Callable
    partial_fn: Callable
    params: dict

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.fn(x[None, :])[0])
        return self.fn(x)

    def partial(self, p, x):
        x = np.asarray(x, dtype=float)
        return self.partial_fn(tuple(int(q) for q in p), x)

    def to_config(self) -> dict:
        return {"name": self.name, **self.params}


def _sin_eval(freq, amplitude, x):
    return amplitude * np.sin(freq * x[:, 0])


def _sin_partial(freq, amplitude, p, x):
    k = p[0]
    return float(amplitude * freq**k * math.sin(freq * x[0] + k * math.pi / 2.0))


def sinusoid(beta: float, amplitude: float = 1.0) -> TestFunction:
    """a sin(2 pi x) on [0,1], declared at smoothness beta.

    All derivatives exist; the constants follow from |f^(m)| <= a (2 pi)^m:
    L = a (2 pi)^{floor+1} and M = a sum_{m<=floor} (2 pi)^m.
    """
    floor = holder_floor(beta)
    freq = 2.0 * math.pi
    lipschitz = amplitude * freq ** (floor + 1)
    bound = amplitude * sum(freq**m for m in range(floor + 1))
    return TestFunction(
        name="sinusoid",
        d=1,
        beta=beta,
        lipschitz=lipschitz,
        bound=bound,
        fn=partial(_sin_eval, freq, amplitude),
        partial_fn=partial(_sin_partial, freq, amplitude),
        params={"beta": beta, "amplitude": amplitude},
    )


def _cusp_eval(amplitude, center, beta, x):
    return amplitude * np.abs(x[:, 0] - center) ** beta


def _cusp_partial(amplitude, center, beta, p, x):
    if sum(p) > 0:
        return None  # derivative absent: feeds the zero-coefficient rule
    return float(amplitude * abs(x[0] - center) ** beta)


def cusp(beta: float, amplitude: float = 1.0, center: float = 0.5) -> TestFunction:
    """a |x - c|^beta for beta in (0, 1]: Hoelder with L = a, no first
    derivative at the cusp (reported absent everywhere)."""
    if not 0 < beta <= 1:
        raise ValueError(f"cusp smoothness must be in (0, 1], got {beta}")
    if not 0 <= center <= 1:
        raise ValueError(f"cusp center must be in [0, 1], got {center}")
    bound = amplitude * max(center, 1.0 - center) ** beta
    return TestFunction(
        name="cusp",
        d=1,
        beta=beta,
        lipschitz=amplitude,
        bound=bound,
        fn=partial(_cusp_eval, amplitude, center, beta),
        partial_fn=partial(_cusp_partial, amplitude, center, beta),
        params={"beta": beta, "amplitude": amplitude, "center": center},
    )


def _prod_sin_eval(freq, amplitude, x):
    return amplitude * np.sin(freq * x[:, 0]) * np.sin(freq * x[:, 1])


def _prod_sin_partial(freq, amplitude, p, x):
    k1, k2 = p
    return float(
        amplitude
        * freq ** (k1 + k2)
        * math.sin(freq * x[0] + k1 * math.pi / 2.0)
        * math.sin(freq * x[1] + k2 * math.pi / 2.0)
    )


def product_sinusoid(beta: float, amplitude: float = 1.0) -> TestFunction:
    """a sin(2 pi x_1) sin(2 pi x_2) on [0,1]^2 at declared smoothness beta."""
    floor = holder_floor(beta)
    freq = 2.0 * math.pi
    lipschitz = amplitude * freq ** (floor + 1)
    # d=2 has m+1 indices of total order m, each with sup |partial| <= a (2pi)^m
    bound = amplitude * sum(freq**m * (m + 1) for m in range(floor + 1))
    return TestFunction(
        name="product_sinusoid",
        d=2,
        beta=beta,
        lipschitz=lipschitz,
        bound=bound,
        fn=partial(_prod_sin_eval, freq, amplitude),
        partial_fn=partial(_prod_sin_partial, freq, amplitude),
        params={"beta": beta, "amplitude": amplitude},
    )


def _const_eval(value, x):
    return np.full(x.shape[0], value)


def _const_partial(value, p, x):
    return float(value) if sum(p) == 0 else 0.0


def constant_function(value: float, d: int = 1, beta: float = 1.0) -> TestFunction:
    """Constant function: in every smoothness class with L = 0."""
    return TestFunction(
        name="constant",
        d=d,
        beta=beta,
        lipschitz=0.0,
        bound=abs(value),
        fn=partial(_const_eval, value),
        partial_fn=partial(_const_partial, value),
        params={"value": value, "d": d, "beta": beta},
    )


def _poly_eval(coeffs, x):
    out = np.zeros(x.shape[0])
    for p, a in coeffs:
        out += a * np.prod(x ** np.asarray(p, dtype=float), axis=1)
    return out


def _poly_partial(coeffs, q, x):
    total = 0.0
    for p, a in coeffs:
        if any(pj < qj for pj, qj in zip(p, q)):
            continue
        term = a
        for pj, qj, xj in zip(p, q, x):
            term *= math.factorial(pj) / math.factorial(pj - qj) * xj ** (pj - qj)
        total += term
    return float(total)


def polynomial_function(coeffs: dict, d: int, beta: float | None = None) -> TestFunction:
    """Global polynomial sum_p a_p x^p with exact partial derivatives.

    ``coeffs`` maps exponent tuples to coefficients.  Used for exactness
    oracles; the declared constants are crude sup-norm bounds on [0,1]^d.
    """
    items = tuple(sorted((tuple(int(v) for v in p), float(a)) for p, a in coeffs.items()))
    degree = max((sum(p) for p, _ in items), default=0)
    bound = sum(abs(a) for _, a in items)
    return TestFunction(
        name="polynomial",
        d=d,
        beta=float(degree + 1) if beta is None else beta,
        lipschitz=max(bound, 1.0),
        bound=max(bound, 1.0),
        fn=partial(_poly_eval, items),
        partial_fn=partial(_poly_partial, items),
        params={"coeffs": {str(p): a for p, a in items}, "d": d},
    )


def function_library() -> list[TestFunction]:
    """Named test functions with certified constants."""
    return [
        sinusoid(beta=2.0),
        sinusoid(beta=3.0),
        cusp(beta=0.5, amplitude=1.0, center=0.5),
        cusp(beta=1.0, amplitude=1.0, center=0.3),
        product_sinusoid(beta=2.0),
        constant_function(0.5),
    ]


def make_test_function(cfg: dict) -> TestFunction:
    """Build a test function from its config dict {'name': ..., params}."""
    name = cfg["name"]
    if name == "sinusoid":
        return sinusoid(beta=cfg["beta"], amplitude=cfg.get("amplitude", 1.0))
    if name == "cusp":
        return cusp(
            beta=cfg["beta"],
            amplitude=cfg.get("amplitude", 1.0),
            center=cfg.get("center", 0.5),
        )
    if name == "product_sinusoid":
        return product_sinusoid(beta=cfg["beta"], amplitude=cfg.get("amplitude", 1.0))
    if name == "constant":
        return constant_function(
            cfg["value"], d=cfg.get("d", 1), beta=cfg.get("beta", 1.0)
        )
    raise ValueError(f"unknown test function {name!r}")


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HolderCertificate:
    """Sampled check of the declared smoothness constants."""

    max_holder_ratio: float
    derivative_sum: float
    ok: bool


def certify_holder(f: TestFunction, n_pairs: int = 10_000, seed: int = 0) -> HolderCertificate:
    """Check the two class inequalities on sampled point pairs: top-order
    increments against L ||x - y||_1^{beta - floor}, and the grid sup of
    the derivative sum against the bound M."""
    floor = holder_floor(f.beta)
    rng = substream(seed, 7)
    xs = rng.random((n_pairs, f.d))
    ys = rng.random((n_pairs, f.d))
    exponent = f.beta - floor

    top = [p for p in multi_index_set(floor, f.d).indices if sum(p) == floor]
    max_ratio = 0.0
    for p in top:
        for xi, yi in zip(xs, ys):
            fx = f.partial(p, xi) if floor > 0 else float(f(xi))
            fy = f.partial(p, yi) if floor > 0 else float(f(yi))
            if fx is None or fy is None:
                return HolderCertificate(math.inf, math.inf, False)
            gap = np.abs(xi - yi).sum()
            if gap > 0:
                max_ratio = max(max_ratio, abs(fx - fy) / gap**exponent)

    grid = rng.random((512, f.d))
    der_sum = 0.0
    for p in multi_index_set(floor, f.d).indices:
        if sum(p) == 0:
            der_sum += float(np.max(np.abs(f(grid))))
        else:
            der_sum += max(abs(f.partial(p, xi)) for xi in grid)
    ok = max_ratio <= f.lipschitz * (1 + 1e-9) and der_sum <= f.bound * (1 + 1e-9)
    return HolderCertificate(max_holder_ratio=max_ratio, derivative_sum=der_sum, ok=ok)


def certify_noise_family(family: NoiseFamily, grid=None) -> bool:
    """Symmetry and monotone decay on the positive axis, on a grid."""
    if grid is None:
        grid = np.linspace(0.0, 20.0, 2001)
    dens = np.asarray(family.density(grid), dtype=float)
    symmetric = np.allclose(dens, np.asarray(family.density(-grid), dtype=float))
    decreasing = bool(np.all(np.diff(dens) <= 1e-15))
    return symmetric and decreasing and bool(np.all(dens >= 0))
