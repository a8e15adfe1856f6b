"""Robust local polynomial fitting at a point.

For a window center x0, bandwidth h, degree b and contrast rho, the
estimator minimizes the localized criterion

    pi_h(t) = (1 / (n h^d)) sum_i rho(Y_i - f_t(X_i)) K((X_i - x0) / h)

over the l1-ball {||t||_1 <= M} of coefficient vectors, where f_t is the
local polynomial with coefficients t and the sum runs over the full
sample (the kernel support restricts it to the window).  The fitted value
at x0 is the first coordinate of the minimizer.  The criterion is convex
whenever rho is, so the projected gradient method below finds a global
minimizer; the l1-ball projection is the classic sort-based simplex
projection.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import CoefficientVector, MultiIndexSet, monomial_matrix, multi_index_set
from .contrast import ContrastSpec
from .kernels import KernelSpec

__all__ = [
    "Sample",
    "Dataset",
    "OptimizerSettings",
    "LocalFitConfig",
    "FitResult",
    "EmptyNeighborhoodError",
    "criterion",
    "criterion_gradient",
    "project_l1_ball",
    "fit_local",
    "estimate_at",
]


@dataclass(frozen=True)
class Sample:
    """One observation: a design point in the unit cube and its response."""

    x: tuple[float, ...]
    y: float


@dataclass(frozen=True)
class Dataset:
    """Design matrix in [0,1]^d and response vector, validated on build."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} design points but {y.shape[0]} responses")
        if not np.all(np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("design points must lie in [0,1]^d")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_samples(cls, samples) -> "Dataset":
        xs = np.array([s.x for s in samples], dtype=float)
        ys = np.array([s.y for s in samples], dtype=float)
        return cls(x=xs, y=ys)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Read a dataset CSV with header x_1,...,x_d,y."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty file, header row required")
            d = len(header) - 1
            expected = [f"x_{j + 1}" for j in range(d)] + ["y"]
            if d < 1 or header != expected:
                raise ValueError(
                    f"{path}: header must be {','.join(expected) if d >= 1 else 'x_1,...,y'},"
                    f" got {','.join(header)}"
                )
            rows = [[float(v) for v in row] for row in reader if row]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        arr = np.asarray(rows, dtype=float)
        return cls(x=arr[:, :d], y=arr[:, d])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x_{j + 1}" for j in range(self.d)] + ["y"])
            for xi, yi in zip(self.x, self.y):
                writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


@dataclass(frozen=True)
class OptimizerSettings:
    """Projected gradient settings: spectral trial step with monotone
    Armijo backtracking."""

    max_iterations: int = 20_000
    gradient_tolerance: float = 1e-8
    initial_step: float = 1.0
    backtracking: float = 0.5
    armijo: float = 1e-4
    record_objective: bool = False

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        for name in ("gradient_tolerance", "initial_step", "armijo"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtracking < 1:
            raise ValueError("backtracking factor must be in (0, 1)")


@dataclass(frozen=True)
class LocalFitConfig:
    """Everything defining one local fit at a point."""

    x0: tuple[float, ...]
    h: float
    degree: int
    bound: float
    kernel: KernelSpec
    contrast: ContrastSpec
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        x0 = tuple(float(v) for v in np.atleast_1d(np.asarray(self.x0, dtype=float)))
        object.__setattr__(self, "x0", x0)
        if not 0 < self.h <= 1:
            raise ValueError(f"bandwidth must be in (0, 1], got {self.h}")
        if self.degree < 0:
            raise ValueError(f"degree must be >= 0, got {self.degree}")
        if self.bound <= 0:
            raise ValueError(f"coefficient bound must be positive, got {self.bound}")
        if self.kernel.d != len(x0):
            raise ValueError(
                f"kernel dimension {self.kernel.d} != point dimension {len(x0)}"
            )

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def index_set(self) -> MultiIndexSet:
        return multi_index_set(self.degree, self.d)


@dataclass(frozen=True)
class FitResult:
    """Outcome of one local fit.  ``estimate`` is the first coefficient,
    bounded by the l1 radius; ``underdetermined`` flags windows with fewer
    samples than basis functions (the convex fit still runs)."""

    theta_hat: CoefficientVector
    estimate: float
    n_local: int
    iterations: int
    stationarity_gap: float
    converged: bool
    underdetermined: bool
    objective_path: tuple[float, ...] | None = None


class EmptyNeighborhoodError(RuntimeError):
    """No sample falls in the fitting window; the estimator is undefined."""

    def __init__(self, x0, h):
        super().__init__(f"no samples in the window of side {h} centered at {x0}")
        self.x0 = tuple(x0)
        self.h = h


class _LocalProblem:
    """Precomputed window data: rescaled design monomials, kernel weights
    and responses, plus the 1/(n h^d) normalization by the full size."""

    def __init__(self, data: Dataset, cfg: LocalFitConfig):
        x0 = np.asarray(cfg.x0, dtype=float)
        if data.d != cfg.d:
            raise ValueError(f"data dimension {data.d} != config dimension {cfg.d}")
        inside = np.all(np.abs(data.x - x0) <= cfg.h / 2.0, axis=1)
        self.n_local = int(np.count_nonzero(inside))
        self.scale = 1.0 / (data.n * cfg.h**cfg.d)
        self.index_set = cfg.index_set
        self.contrast = cfg.contrast
        if self.n_local:
            z = (data.x[inside] - x0) / cfg.h
            self.design = monomial_matrix(z, self.index_set)
            self.weights = cfg.kernel.value(z)
            self.y = data.y[inside]
        else:
            self.design = np.zeros((0, self.index_set.size))
            self.weights = np.zeros(0)
            self.y = np.zeros(0)

    def value(self, t: np.ndarray) -> float:
        if not self.n_local:
            return 0.0
        resid = self.y - self.design @ t
        return self.scale * float(self.weights @ self.contrast.value(resid))

    def gradient(self, t: np.ndarray) -> np.ndarray:
        if not self.n_local:
            return np.zeros(self.index_set.size)
        resid = self.y - self.design @ t
        psi = self.weights * self.contrast.first_derivative(resid)
        return -self.scale * (self.design.T @ psi)


def criterion(t, data: Dataset, cfg: LocalFitConfig) -> float:
    """Localized contrast criterion at coefficients ``t`` (defined on all
    of R^{N_b}, not just the constraint ball)."""
    t = np.asarray(t, dtype=float)
    return _LocalProblem(data, cfg).value(t)


def criterion_gradient(t, data: Dataset, cfg: LocalFitConfig) -> np.ndarray:
    """Analytic gradient of the criterion; exact wherever rho' exists."""
    t = np.asarray(t, dtype=float)
    return _LocalProblem(data, cfg).gradient(t)


def project_l1_ball(t, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1-ball, sort-based."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    if a.sum() <= radius:
        return t.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u) - radius
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.sign(t) * np.maximum(a - tau, 0.0)


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    if values.size == 0:
        return 0.0
    if weights.sum() <= 0:
        return float(np.median(values))
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(v[min(idx, v.size - 1)])


def fit_local(data: Dataset, cfg: LocalFitConfig) -> FitResult:
    """Minimize the local criterion over the l1-ball by projected gradient
    descent with backtracking.

    Starts from the kernel-weighted median of the in-window responses in
    the constant coordinate (zeros elsewhere, projected).  Stops when the
    unit-step projected-gradient norm falls below the tolerance or the
    iteration cap is hit.  Convexity of the criterion plus compactness of
    the ball make any stationary point a global minimizer.
    """
    if data.n == 0:
        raise ValueError("dataset is empty")
    problem = _LocalProblem(data, cfg)
    if problem.n_local == 0:
        raise EmptyNeighborhoodError(cfg.x0, cfg.h)

    opt = cfg.optimizer
    radius = cfg.bound
    t = np.zeros(problem.index_set.size)
    t[0] = _weighted_median(problem.y, problem.weights)
    t = project_l1_ball(t, radius)

    fval = problem.value(t)
    grad = problem.gradient(t)
    path = [fval] if opt.record_objective else None
    prev_t = prev_grad = None
    gap = float(np.linalg.norm(t - project_l1_ball(t - grad, radius)))
    converged = gap <= opt.gradient_tolerance
    iterations = 0
    stagnant = 0

    for _ in range(opt.max_iterations):
        if converged:
            break
        # Spectral (Barzilai-Borwein) trial step, safeguarded, then
        # monotone Armijo backtracking on the projected step.
        step = opt.initial_step
        if prev_t is not None:
            dt = t - prev_t
            dg = grad - prev_grad
            curv = float(dt @ dg)
            if curv > 0:
                step = min(max(float(dt @ dt) / curv, 1e-12), 1e12)
        candidate = t
        cand_val = fval
        while True:
            candidate = project_l1_ball(t - step * grad, radius)
            cand_val = problem.value(candidate)
            decrease = float(grad @ (candidate - t))
            if cand_val <= fval + opt.armijo * decrease:
                break
            step *= opt.backtracking
            if step < 1e-18:
                break
        if cand_val > fval:
            break  # line search stalled at numerical precision
        if np.array_equal(candidate, t):
            break  # fixed point at numerical precision
        stagnant = stagnant + 1 if cand_val == fval else 0
        prev_t, prev_grad = t, grad
        t, fval = candidate, cand_val
        grad = problem.gradient(t)
        iterations += 1
        if path is not None:
            path.append(fval)
        gap = float(np.linalg.norm(t - project_l1_ball(t - grad, radius)))
        converged = gap <= opt.gradient_tolerance
        if stagnant > 64:
            break  # objective flat at float precision, tolerance unreachable

    t = project_l1_ball(t, radius)
    theta = CoefficientVector(values=t, index_set=problem.index_set)
    return FitResult(
        theta_hat=theta,
        estimate=theta.center_value,
        n_local=problem.n_local,
        iterations=iterations,
        stationarity_gap=gap,
        converged=converged,
        underdetermined=problem.n_local < problem.index_set.size,
        objective_path=tuple(path) if path is not None else None,
    )


def estimate_at(data: Dataset, cfg: LocalFitConfig) -> float:
    """Fitted function value at the window center."""
    return fit_local(data, cfg).estimate


def with_bandwidth(cfg: LocalFitConfig, h: float) -> LocalFitConfig:
    """Copy of a fit config at a different bandwidth."""
    return replace(cfg, h=h)
