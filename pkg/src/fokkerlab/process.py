"""SDE models dX = a(X,t) dt + sigma(X,t) dW and their transition kernels.

Coefficients are vectorized callables ``f(x, t)``. Each model also carries
``drift_dx`` (da/dx) and ``weight_dxx`` (d²b/dx², with b = sigma²), which the
entropy-rate identity needs; built-ins supply them in closed form, custom
models fall back to finite differences unless the caller provides them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionError
from .expr import parse_expression
from .grid import FULL_LINE, HALF_LINE
from .report import IdentityReport

Coefficient = Callable[..., np.ndarray]


def _const(c):
    def f(x, t=0.0):
        return np.full(np.broadcast(np.asarray(x, dtype=float), t).shape, float(c))
    return f


@dataclass(frozen=True)
class TransitionKernel:
    """Closed-form law of X_t given X_0 = x0.

    ``density(x0, xt, t)`` and ``score(x0, xt, t)`` broadcast over arrays;
    ``score`` is d/dxt log density. ``output_range(x0_lo, x0_hi, t, width)``
    returns an interval holding the kernel mass for every x0 in the range.
    """

    density: Callable
    score: Callable
    conditional_fisher: Optional[Callable] = None
    output_range: Optional[Callable] = None
    support_kind: str = FULL_LINE


@dataclass(frozen=True)
class SdeModel:
    name: str
    drift: Coefficient
    diffusion: Coefficient
    weight: Coefficient
    drift_dx: Coefficient
    weight_dxx: Coefficient
    support_kind: str = FULL_LINE
    params: dict = field(default_factory=dict)
    kernel: Optional[TransitionKernel] = None
    # exact_step(x, s, dt, z) -> x_next; overrides Euler-Maruyama in montecarlo
    exact_step: Optional[Callable] = None
    time_homogeneous: bool = True


def fd_derivative(f: Coefficient, step: float = 1e-5) -> Coefficient:
    """Central-difference d f / d x with a relative step."""
    def df(x, t=0.0):
        x = np.asarray(x, dtype=float)
        d = step * np.maximum(1.0, np.abs(x))
        return (f(x + d, t) - f(x - d, t)) / (2 * d)
    return df


def fd_second_derivative(f: Coefficient, step: float = 1e-4) -> Coefficient:
    """Central-difference d² f / d x² with a relative step."""
    def d2f(x, t=0.0):
        x = np.asarray(x, dtype=float)
        d = step * np.maximum(1.0, np.abs(x))
        return (f(x + d, t) - 2 * f(x, t) + f(x - d, t)) / (d * d)
    return d2f


def validate_model(model: SdeModel, x_probe=None, t_probe=(0.0, 0.5, 1.0, 5.0)) -> None:
    """Sample-check sigma > 0 and b = sigma² on the model's support."""
    if x_probe is None:
        x_probe = (np.geomspace(1e-3, 1e3, 61) if model.support_kind == HALF_LINE
                   else np.linspace(-10.0, 10.0, 81))
    x = np.asarray(x_probe, dtype=float)
    for t in t_probe:
        s = model.diffusion(x, t)
        b = model.weight(x, t)
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DomainError(f"{model.name}: diffusion must be positive on the support (t={t})")
        if not np.allclose(b, s * s, rtol=1e-12, atol=0):
            raise DomainError(f"{model.name}: weight must equal diffusion squared (t={t})")


def _gauss_logpdf(y, mean, var):
    return -0.5 * (y - mean) ** 2 / var - 0.5 * np.log(2 * np.pi * var)


def builtin_brownian() -> SdeModel:
    """Standard Brownian motion: a = 0, sigma = 1."""

    def density(x0, xt, t):
        return np.exp(_gauss_logpdf(np.asarray(xt, float), x0, t))

    def score(x0, xt, t):
        return -(np.asarray(xt, float) - x0) / t

    def out_range(lo, hi, t, width):
        s = math.sqrt(t)
        return lo - width * s, hi + width * s

    kernel = TransitionKernel(density, score, lambda t: 1.0 / t, out_range, FULL_LINE)
    zero, one = _const(0.0), _const(1.0)
    return SdeModel("brownian", zero, one, one, zero, zero, FULL_LINE, {}, kernel)


def builtin_ou(alpha: float) -> SdeModel:
    """Ornstein-Uhlenbeck process dX = -alpha X dt + dW, alpha > 0."""
    if not alpha > 0:
        raise DomainError(f"OU needs alpha > 0, got {alpha} (alpha -> 0 is Brownian motion)")
    alpha = float(alpha)

    def var(t):
        return -math.expm1(-2 * alpha * t) / (2 * alpha)

    def density(x0, xt, t):
        return np.exp(_gauss_logpdf(np.asarray(xt, float), math.exp(-alpha * t) * np.asarray(x0), var(t)))

    def score(x0, xt, t):
        return -2 * alpha * (np.asarray(xt, float) - math.exp(-alpha * t) * np.asarray(x0)) \
            / (-math.expm1(-2 * alpha * t))

    def cond_fisher(t):
        return 2 * alpha / (-math.expm1(-2 * alpha * t))

    def out_range(lo, hi, t, width):
        m = math.exp(-alpha * t)
        s = math.sqrt(var(t))
        return m * lo - width * s, m * hi + width * s

    kernel = TransitionKernel(density, score, cond_fisher, out_range, FULL_LINE)
    one = _const(1.0)
    return SdeModel(
        "ou",
        drift=lambda x, t=0.0: -alpha * np.asarray(x, dtype=float),
        diffusion=one, weight=one,
        drift_dx=_const(-alpha), weight_dxx=_const(0.0),
        support_kind=FULL_LINE, params={"alpha": alpha}, kernel=kernel,
    )


def builtin_gbm(mu: float, sigma: float) -> SdeModel:
    """Geometric Brownian motion dX = mu X dt + sigma X dW on x > 0."""
    if not sigma > 0:
        raise DomainError(f"GBM needs sigma > 0, got {sigma}")
    mu, sigma = float(mu), float(sigma)
    s2 = sigma * sigma
    c = mu - 0.5 * s2

    def density(x0, xt, t):
        xt = np.asarray(xt, dtype=float)
        with np.errstate(divide="ignore"):
            logx = np.log(xt)
        out = np.exp(_gauss_logpdf(logx, np.log(x0) + c * t, s2 * t)) / xt
        return np.where(xt > 0, out, 0.0)

    def score(x0, xt, t):
        xt = np.asarray(xt, dtype=float)
        return -((np.log(xt) - np.log(x0) - c * t) / (s2 * t) + 1.0) / xt

    def cond_fisher(t):
        return s2 + 1.0 / t

    def out_range(lo, hi, t, width):
        s = sigma * math.sqrt(t)
        return lo * math.exp(c * t - width * s), hi * math.exp(c * t + width * s)

    def exact_step(x, s, dt, z):
        return x * np.exp(c * dt + sigma * math.sqrt(dt) * z)

    kernel = TransitionKernel(density, score, cond_fisher, out_range, HALF_LINE)
    return SdeModel(
        "gbm",
        drift=lambda x, t=0.0: mu * np.asarray(x, dtype=float),
        diffusion=lambda x, t=0.0: sigma * np.asarray(x, dtype=float),
        weight=lambda x, t=0.0: s2 * np.asarray(x, dtype=float) ** 2,
        drift_dx=_const(mu), weight_dxx=_const(2 * s2),
        support_kind=HALF_LINE, params={"mu": mu, "sigma": sigma},
        kernel=kernel, exact_step=exact_step,
    )


def make_custom_model(drift: str, diffusion: str, support_kind: str = FULL_LINE,
                      drift_dx: str | None = None, weight_dxx: str | None = None,
                      name: str = "custom") -> SdeModel:
    """Model from expression strings in ``x`` and ``t`` (see :mod:`fokkerlab.expr`)."""
    a = parse_expression(drift)
    s = parse_expression(diffusion)

    def b(x, t=0.0):
        return s(x, t) ** 2

    a_x = parse_expression(drift_dx) if drift_dx else fd_derivative(a)
    b_xx = parse_expression(weight_dxx) if weight_dxx else fd_second_derivative(b)
    homogeneous = "t" not in _free_names(drift) | _free_names(diffusion)
    model = SdeModel(
        name, a, s, b, a_x, b_xx, support_kind,
        {"drift": drift, "diffusion": diffusion}, None, None, homogeneous,
    )
    validate_model(model)
    return model


def _free_names(source: str) -> set:
    import ast
    tree = ast.parse(source.replace("^", "**"), mode="eval")
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}


def model_from_name(name: str, **params) -> SdeModel:
    """Built-in model by config name: ``brownian``, ``ou`` or ``gbm``."""
    if name == "brownian":
        return builtin_brownian()
    if name == "ou":
        return builtin_ou(params.get("alpha", 1.0))
    if name == "gbm":
        return builtin_gbm(params.get("mu", 0.0), params.get("sigma", 1.0))
    raise DomainError(f"unknown built-in model {name!r}")


def _fd4(f, x, d):
    return (-f(x + 2 * d) + 8 * f(x + d) - 8 * f(x - d) + f(x - 2 * d)) / (12 * d)


def kernel_selfcheck(kernel: TransitionKernel, model: SdeModel, x0: float, t: float,
                     tolerance: float = 1e-6, n_probe: int = 201) -> IdentityReport:
    """Compare the analytic score with a finite difference of the log kernel.

    Probes span the central ±5 sd of the kernel. The gap is measured
    relative to ``max(1, |score|)`` so large scores near x = 0 for the
    half-line kernels do not dominate.
    """
    if not t > 0:
        raise PreconditionError(f"kernel self-check needs t > 0, got {t}")
    lo, hi = kernel.output_range(x0, x0, t, 5.0)
    if kernel.support_kind == HALF_LINE:
        probes = np.geomspace(lo, hi, n_probe)
    else:
        probes = np.linspace(lo, hi, n_probe)
    analytic = kernel.score(x0, probes, t)
    d = 1e-3 * (hi - lo) / n_probe
    if kernel.support_kind == HALF_LINE:
        d = 1e-3 * probes
    fd = _fd4(lambda y: np.log(kernel.density(x0, y, t)), probes, d)
    gap = np.abs(analytic - fd) / np.maximum(1.0, np.abs(analytic))
    k = int(np.argmax(gap))
    return IdentityReport(
        name=f"kernel_selfcheck[{model.name},x0={x0:g},t={t:g}]",
        lhs=float(analytic[k]), rhs=float(fd[k]), tolerance=tolerance,
        lhs_method="closed-form score", rhs_method="finite difference of log kernel",
        params={"model": model.name, **model.params, "x0": x0, "t": t,
                "sup_gap": float(gap[k])},
        extra_ok=bool(gap[k] <= tolerance),
    )
