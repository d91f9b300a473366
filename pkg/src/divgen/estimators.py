"""MDPDE solver, generalized UMVUEs for B^(alpha) families, and risk evaluation."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import optimize

from .deformed import FiniteDeformed, GaussianDeformed
from .divergences import _model_terms
from .errors import DomainError, PreconditionError, UsageError
from .families import BAlphaFamily, ParametricFamily
from .glf import GLFKind, GeneralizedLikelihood, Statistic, balpha_statistic

__all__ = [
    "EstimatorReport",
    "SolverConfig",
    "mdpde_solve",
    "Estimator",
    "generalized_umvue_balpha",
    "RiskMethod",
    "RiskValue",
    "risk_evaluate",
]


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 100
    fd_step: float = 1e-6


@dataclass
class EstimatorReport:
    estimate: float | np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    method: str = "newton"
    message: str = ""

    def to_dict(self):
        est = self.estimate.tolist() if isinstance(self.estimate, np.ndarray) else self.estimate
        return {
            "estimate": est,
            "objective": self.objective,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
            "message": self.message,
        }


class _Residual:
    """DPD estimating residual; the model term ``int f^alpha u`` is memoized on the family."""

    def __init__(self, sample, fam: ParametricFamily, alpha: float):
        self.fam, self.alpha = fam, alpha
        self.sample = list(sample) if fam.support.is_finite else np.asarray(sample, dtype=float)

    def model(self, lam):
        fam, a = self.fam, self.alpha
        if fam.support.is_finite:
            return _model_terms(fam, lam, a)[0]
        return fam.memoized(
            "power-score", lam, a, lambda t: fam.integrate(lambda y: fam.pdf(t, y) ** a * fam.score(t, y), t)
        )

    def __call__(self, lam) -> float:
        fam, a = self.fam, self.alpha
        if fam.support.is_finite:
            dens = np.asarray([fam.pdf(lam, y) for y in self.sample], dtype=float)
            scores = np.asarray([fam.score(lam, y) for y in self.sample], dtype=float)
        else:
            dens = np.asarray(fam.pdf(lam, self.sample), dtype=float)
            scores = np.asarray(fam.score(lam, self.sample), dtype=float)
        return float(np.mean(dens ** (a - 1) * scores)) - self.model(lam)


def _search_interval(sample, fam: ParametricFamily):
    (lo, hi), = fam.bounds
    if fam.support.is_finite or not getattr(fam, "location", False):
        span = hi - lo if math.isfinite(hi - lo) else 20.0
        a = lo + 1e-9 * span if math.isfinite(lo) else -10.0
        b = hi - 1e-9 * span if math.isfinite(hi) else 10.0
        return a, b
    ys = np.asarray(sample, dtype=float)
    return max(lo, ys.min() - 1.0), min(hi, ys.max() + 1.0)


def mdpde_solve(sample, fam: ParametricFamily, alpha: float | None = None, cfg: SolverConfig = SolverConfig()) -> EstimatorReport:
    """Maximize the DPD generalized likelihood by safeguarded Newton on its gradient.

    The gradient is ``alpha`` times the DPD estimating residual, so a
    maximizer is a root where the residual crosses from positive to
    negative. Newton steps leaving the current sign bracket are replaced by
    bisection. If no sign change is found, the objective is maximized
    directly by bounded scalar minimization and reported as such.
    Non-convergence is reported, not raised.
    """
    alpha = fam.alpha if alpha is None else alpha
    if alpha is None:
        raise UsageError("alpha is required for families without an intrinsic alpha")
    if len(sample) == 0:
        raise DomainError("empty sample")
    if fam.dim > 1:
        return _coordinate_ascent(sample, fam, alpha, cfg)
    glf = GeneralizedLikelihood(GLFKind.DPD_SUM, fam, alpha)
    resid = _Residual(sample, fam, alpha)
    a, b = _search_interval(sample, fam)
    lo, hi = a, b
    ra, rb = resid(a), resid(b)
    if not (ra > 0 > rb):
        grid = np.linspace(a, b, 41)
        vals = [resid(x) for x in grid]
        for x0, x1, v0, v1 in zip(grid, grid[1:], vals, vals[1:]):
            if v0 > 0 >= v1:
                a, b, ra, rb = x0, x1, v0, v1
                break
        else:
            return _fallback(sample, fam, glf, resid, (a, b), cfg, "no sign change of the estimating residual")
    if rb == 0:
        return EstimatorReport(b, glf(sample, b), 0.0, 0, True)
    x = float(np.median(np.asarray(sample, dtype=float))) if not fam.support.is_finite else 0.5 * (a + b)
    if not a < x < b:
        x = 0.5 * (a + b)
    for it in range(1, cfg.max_iter + 1):
        r = resid(x)
        if abs(r) <= cfg.tol:
            return EstimatorReport(x, glf(sample, x), abs(r), it, True)
        if r > 0:
            a = x
        else:
            b = x
        h = cfg.fd_step * (1.0 + abs(x))
        dr = (resid(x + h) - resid(x - h)) / (2 * h) if lo < x - h and x + h < hi else math.nan
        step_ok = math.isfinite(dr) and dr < 0
        x_new = x - r / dr if step_ok else math.nan
        if not (step_ok and a < x_new < b):
            x_new = 0.5 * (a + b)
        if abs(x_new - x) <= 1e-15 * (1.0 + abs(x)) or b - a <= 4e-16 * (1.0 + abs(x)):
            r_new = resid(x_new)
            return EstimatorReport(x_new, glf(sample, x_new), abs(r_new), it, abs(r_new) <= cfg.tol,
                                   message="step below machine resolution")
        x = x_new
    r = resid(x)
    return EstimatorReport(x, glf(sample, x), abs(r), cfg.max_iter, abs(r) <= cfg.tol,
                           message="iteration cap reached")


def _fallback(sample, fam, glf, resid, bounds, cfg, why) -> EstimatorReport:
    res = optimize.minimize_scalar(lambda t: -glf(sample, t), bounds=bounds, method="bounded",
                                   options={"xatol": 1e-12, "maxiter": cfg.max_iter * 5})
    x = float(res.x)
    r = abs(resid(x))
    interior = bounds[0] + 1e-6 < x < bounds[1] - 1e-6
    return EstimatorReport(x, -float(res.fun), r, int(res.nfev), bool(r <= cfg.tol and interior),
                           method="bounded-scalar", message=why)


def _coordinate_ascent(sample, fam, alpha, cfg) -> EstimatorReport:
    """Experimental: cyclic one-dimensional maximization over parameter coordinates."""
    glf = GeneralizedLikelihood(GLFKind.DPD_SUM, fam, alpha)
    lam = np.array([0.5 * (lo + hi) if math.isfinite(lo + hi) else 0.0 for lo, hi in fam.bounds])
    best = glf(sample, lam)
    for sweep in range(1, cfg.max_iter + 1):
        prev = best
        for i, (lo, hi) in enumerate(fam.bounds):
            lo_i = lo + 1e-9 if math.isfinite(lo) else lam[i] - 10
            hi_i = hi - 1e-9 if math.isfinite(hi) else lam[i] + 10

            def neg(t, i=i):
                trial = lam.copy()
                trial[i] = t
                return -glf(sample, trial)

            res = optimize.minimize_scalar(neg, bounds=(lo_i, hi_i), method="bounded", options={"xatol": 1e-12})
            lam[i] = res.x
            best = -res.fun
        if abs(best - prev) <= cfg.tol * (1 + abs(best)):
            return EstimatorReport(lam, best, math.nan, sweep, True, method="coordinate-ascent",
                                   message="experimental; residual not evaluated")
    return EstimatorReport(lam, best, math.nan, cfg.max_iter, False, method="coordinate-ascent",
                           message="experimental; sweep cap reached")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Estimator:
    """``y -> fn(statistic(y))``."""

    name: str
    statistic: Statistic
    fn: Callable

    def __call__(self, y):
        return self.fn(self.statistic(y))

    def of_t(self, t):
        return self.fn(t)


def generalized_umvue_balpha(g: Callable, fam: BAlphaFamily, components=None, name: str = "umvue") -> Estimator:
    """``y -> g(fbar(y))``, the generalized UMVUE of its own deformed expectation.

    Needs the family to declare which components of ``w`` have a range
    containing a full-dimensional rectangle.
    """
    rect = getattr(fam, "rectangle_components", None)
    if rect is None:
        raise PreconditionError(f"{fam.name} does not declare a rectangle in the range of w")
    comps = rect if components is None else tuple(components)
    if not set(comps) <= set(rect):
        raise PreconditionError(f"components {comps} are not covered by the declared rectangle {rect}")
    return Estimator(name, balpha_statistic(fam, comps), g)


class RiskMethod(str, Enum):
    EXACT_FINITE = "exact"
    QUADRATURE = "quad"
    MONTE_CARLO = "mc"


@dataclass
class RiskValue:
    estimator: str
    lam: float
    n: int
    risk: float | Fraction
    method: RiskMethod
    se: float | None = None
    seed: int | None = None
    reps: int | None = None

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "lambda": float(self.lam),
            "n": self.n,
            "risk": float(self.risk),
            "risk_exact": str(self.risk) if isinstance(self.risk, Fraction) else None,
            "method": RiskMethod(self.method).value,
            "se": self.se,
            "seed": self.seed,
            "reps": self.reps,
        }


def risk_evaluate(
    estimator: Estimator | Callable,
    estimand: Callable,
    dist: FiniteDeformed | GaussianDeformed,
    lam,
    method: RiskMethod | str = RiskMethod.EXACT_FINITE,
    *,
    seed: int | None = None,
    reps: int = 100_000,
    tol: float = 1e-12,
) -> RiskValue:
    """Deformed squared-error risk ``E~_lam[(estimator - estimand(lam))^2]``.

    ``EXACT_FINITE`` sums over a finite space (exactly for Fraction ``lam``),
    ``QUADRATURE`` integrates over the normal marginal of ``Ybar`` and
    needs an estimator that factors through the mean, ``MONTE_CARLO`` draws
    ``reps`` samples with the given seed and reports a standard error.
    """
    method = RiskMethod(method)
    name = getattr(estimator, "name", "estimator")
    target = estimand(lam)
    if method is RiskMethod.EXACT_FINITE:
        if not isinstance(dist, FiniteDeformed):
            raise UsageError("exact risk needs a finite deformed distribution")
        risk = dist.expectation(lambda y: (estimator(y) - target) ** 2, lam)
        return RiskValue(name, lam, dist.n, risk, method)
    if not isinstance(dist, GaussianDeformed):
        if method is RiskMethod.QUADRATURE:
            raise UsageError("quadrature risk needs the Gaussian deformed distribution")
    if method is RiskMethod.QUADRATURE:
        stat = getattr(estimator, "statistic", None)
        if stat is None or stat.name not in ("mean", "fbar[1]"):
            raise UsageError("quadrature risk needs an estimator that is a function of the sample mean")
        d = dist.at(float(lam))
        risk = d.expectation_ybar(lambda t: (estimator.of_t(t) - target) ** 2, tol=tol)
        return RiskValue(name, lam, dist.n, max(risk, 0.0), method)
    if seed is None:
        raise UsageError("Monte Carlo risk needs an explicit seed")
    rng = np.random.default_rng(seed)
    if isinstance(dist, GaussianDeformed):
        draws = dist.at(float(lam)).sample(rng, reps)
        stat = getattr(estimator, "statistic", None)
        if stat is not None:
            values = np.asarray(estimator.of_t(stat.apply_rows(draws)), dtype=float)
        else:
            values = np.asarray([estimator(tuple(row)) for row in draws], dtype=float)
    else:
        probs = np.asarray(dist.pmf(float(lam)), dtype=float)
        idx = rng.choice(len(dist.space), size=reps, p=probs / probs.sum())
        table = np.asarray([float(estimator(y)) for y in dist.space])
        values = table[idx]
    sq = (values - float(target)) ** 2
    return RiskValue(name, lam, dist.n, float(sq.mean()), method, float(sq.std(ddof=1) / math.sqrt(reps)), seed, reps)
