"""Numerical checks of the information-estimation identities.

Every check returns an :class:`~fokkerlab.report.IdentityReport` whose two
sides come from different computations: a finite difference in time of a
solver- or kernel-based functional against a Fisher-type integral at a
single time, or two different Fisher functionals of one joint density.

Time derivatives are central differences with step ``h = 1e-3 * t`` by
default. Each rate check also records the estimate at ``h / 2`` in
``params`` so the truncation error can be judged from the report alone.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import DomainError, PreconditionError, UnsupportedModelError
from .fpsolver import SolveSpec, solve
from .grid import DensityField, Grid1D, integrate
from .infofun import (
    JointDensity,
    WeightFunction,
    bayes_risk_b,
    build_joint,
    default_xt_grid,
    entropy,
    fisher_b,
    kl,
    model_weight,
    mmse_b,
    mutual_fisher_b,
    mutual_information,
    parametric_fisher_b,
    posterior_fisher_b,
    relative_fisher_b,
    statistical_fisher_b,
)
from .process import SdeModel, TransitionKernel
from .report import IdentityReport

#: Default tolerance of each named check.
DEFAULT_TOLERANCES = {
    "entropy_rate": 1e-2,
    "kl_rate": 1e-2,
    "mi_rate": 1e-2,
    "fisher_bridge": 1e-3,
    "mmse_bridge": 1e-3,
    "van_trees": 1e-6,
    "immse": 2e-2,
    "ou_fisher_bound": 1e-4,
}

#: Side conditions: monotone decrease slack and van Trees sub-identity tolerance.
MONOTONE_SLACK = 1e-6
SUB_IDENTITY_TOL = 1e-3

CHECK_NAMES = tuple(DEFAULT_TOLERANCES)


def _step(t: float, h: float | None) -> float:
    if not t > 0:
        raise PreconditionError(f"t must be positive, got {t}")
    h = 1e-3 * t if h is None else float(h)
    if not (h > 0 and t - h > 0):
        raise PreconditionError(f"need 0 < h < t, got h={h}, t={t}")
    return h


def _central(f_minus: float, f_plus: float, h: float) -> float:
    return (f_plus - f_minus) / (2 * h)


def _snapshots(model: SdeModel, p0: DensityField, times, dt, scheme):
    traj = solve(SolveSpec(model, p0, max(times), dt, scheme, tuple(times)))
    return [traj.at(s) for s in times]


def _stencil(t: float, h: float):
    return (t - h, t - 0.5 * h, t, t + 0.5 * h, t + h)


# ---------------------------------------------------------------------------
# rate identities
# ---------------------------------------------------------------------------


def entropy_rate_rhs(model: SdeModel, p: DensityField, t: float) -> float:
    """½ J_b(p) + E_p[da/dx - ½ d²b/dx²] at time ``t``."""
    x = p.x
    corr = np.asarray(model.drift_dx(x, t), float) - 0.5 * np.asarray(model.weight_dxx(x, t), float)
    corr = np.broadcast_to(corr, x.shape)
    return 0.5 * fisher_b(p, model_weight(model), t) + float(integrate(p.values * corr, p.grid))


def verify_entropy_rate(model: SdeModel, p0: DensityField, t: float, h: float | None = None,
                        tolerance: float = DEFAULT_TOLERANCES["entropy_rate"],
                        dt: float | None = None, scheme: str = "crank-nicolson") -> IdentityReport:
    """dH(X_t)/dt from solver snapshots against the weighted-Fisher expression."""
    h = _step(t, h)
    fields = _snapshots(model, p0, _stencil(t, h), dt, scheme)
    H = [entropy(f) for f in fields]
    lhs = _central(H[0], H[4], h)
    lhs_half = _central(H[1], H[3], 0.5 * h)
    rhs = entropy_rate_rhs(model, fields[2], t)
    return IdentityReport(
        name=f"entropy_rate[{model.name},t={t:g}]", lhs=lhs, rhs=rhs, tolerance=tolerance,
        lhs_method="central difference of solver entropy",
        rhs_method="half weighted Fisher plus drift/diffusion correction",
        params={"model": model.name, **model.params, "t": t, "h": h,
                "lhs_h_half": lhs_half, "entropy_t": H[2]},
    )


def verify_kl_rate(model: SdeModel, p0: DensityField, q0: DensityField, t: float,
                   h: float | None = None, tolerance: float = DEFAULT_TOLERANCES["kl_rate"],
                   dt: float | None = None, scheme: str = "crank-nicolson") -> IdentityReport:
    """dK(p_t || q_t)/dt against -½ J_b(p_t || q_t); also asserts the rate is <= 0."""
    if p0.grid != q0.grid:
        raise DomainError("both initial densities must share one grid")
    h = _step(t, h)
    times = _stencil(t, h)
    ps = _snapshots(model, p0, times, dt, scheme)
    qs = _snapshots(model, q0, times, dt, scheme)
    K = [kl(p, q) for p, q in zip(ps, qs)]
    lhs = _central(K[0], K[4], h)
    lhs_half = _central(K[1], K[3], 0.5 * h)
    rhs = -0.5 * relative_fisher_b(ps[2], qs[2], model_weight(model), t)
    return IdentityReport(
        name=f"kl_rate[{model.name},t={t:g}]", lhs=lhs, rhs=rhs, tolerance=tolerance,
        lhs_method="central difference of solver KL divergence",
        rhs_method="negative half relative weighted Fisher",
        params={"model": model.name, **model.params, "t": t, "h": h,
                "lhs_h_half": lhs_half, "kl_t": K[2]},
        extra_ok=bool(lhs <= MONOTONE_SLACK),
    )


def _require_kernel(model: SdeModel) -> TransitionKernel:
    if model.kernel is None:
        raise UnsupportedModelError(f"model {model.name!r} has no closed-form transition kernel")
    return model.kernel


def verify_mi_rate(model: SdeModel, prior: DensityField, t: float, h: float | None = None,
                   tolerance: float = DEFAULT_TOLERANCES["mi_rate"],
                   grid_xt: Grid1D | None = None) -> IdentityReport:
    """dI(X0; Xt)/dt from kernel joints against -½ mutual weighted Fisher."""
    kernel = _require_kernel(model)
    h = _step(t, h)
    if grid_xt is None:
        grid_xt = default_xt_grid(kernel, prior.grid, t + h)
    times = _stencil(t, h)
    joints = {s: build_joint(prior, kernel, grid_xt, s) for s in times}
    I = [mutual_information(joints[s]) for s in times]
    lhs = _central(I[0], I[4], h)
    lhs_half = _central(I[1], I[3], 0.5 * h)
    rhs = -0.5 * mutual_fisher_b(joints[t], model_weight(model))
    return IdentityReport(
        name=f"mi_rate[{model.name},t={t:g}]", lhs=lhs, rhs=rhs, tolerance=tolerance,
        lhs_method="central difference of mutual information",
        rhs_method="negative half mutual weighted Fisher",
        params={"model": model.name, **model.params, "t": t, "h": h,
                "lhs_h_half": lhs_half, "mi_t": I[2]},
        extra_ok=bool(lhs <= MONOTONE_SLACK),
    )


# ---------------------------------------------------------------------------
# single-time identities on a joint density
# ---------------------------------------------------------------------------


def verify_fisher_bridge(joint: JointDensity, b: WeightFunction | None = None,
                         tolerance: float = DEFAULT_TOLERANCES["fisher_bridge"],
                         label: str = "") -> IdentityReport:
    """Mutual weighted Fisher equals statistical weighted Fisher."""
    return IdentityReport(
        name=f"fisher_bridge[{label or 'joint'},t={joint.t:g}]",
        lhs=mutual_fisher_b(joint, b), rhs=statistical_fisher_b(joint, b), tolerance=tolerance,
        lhs_method="conditional minus marginal Fisher in xt",
        rhs_method="posterior-family Fisher in the observation",
        params={"t": joint.t, "weight": getattr(b, "name", "1")},
    )


def verify_mmse_bridge(joint: JointDensity, kernel: TransitionKernel | None,
                       b: WeightFunction | None = None,
                       tolerance: float = DEFAULT_TOLERANCES["mmse_bridge"],
                       label: str = "") -> IdentityReport:
    """Mutual weighted Fisher equals the weighted mmse of the kernel score."""
    if kernel is None or kernel.score is None:
        raise UnsupportedModelError("mmse bridge needs a closed-form kernel score")
    t = joint.t
    rhs = mmse_b(joint, lambda x0, y: kernel.score(x0, y, t), b)
    return IdentityReport(
        name=f"mmse_bridge[{label or 'joint'},t={t:g}]",
        lhs=mutual_fisher_b(joint, b), rhs=rhs, tolerance=tolerance,
        lhs_method="conditional minus marginal Fisher in xt",
        rhs_method="posterior variance of the closed-form kernel score",
        params={"t": t, "weight": getattr(b, "name", "1")},
    )


def verify_van_trees(joint: JointDensity, b: WeightFunction | None = None,
                     estimator: str | Callable = "conditional-mean",
                     tolerance: float = DEFAULT_TOLERANCES["van_trees"],
                     label: str = "") -> IdentityReport:
    """Weighted Bayes risk of an estimator against 1 / J_b(X0 | Xt).

    The denominator is built as parametric Fisher plus prior Fisher; the
    report's side condition checks that sum against the posterior Fisher
    computed directly from posterior slices.
    """
    if estimator == "conditional-mean":
        est, est_name = None, "conditional-mean"
    elif callable(estimator):
        est, est_name = estimator, getattr(estimator, "__name__", "custom")
    else:
        raise DomainError(f"estimator must be 'conditional-mean' or callable, got {estimator!r}")
    risk = bayes_risk_b(joint, est, b)
    phi = parametric_fisher_b(joint, b)
    j_prior = fisher_b(joint.prior, b, joint.t)
    j_post = posterior_fisher_b(joint, b)
    total = phi + j_prior
    sub_gap = abs(total - j_post) / max(abs(j_post), 1e-12)
    return IdentityReport(
        name=f"van_trees[{label or 'joint'},{est_name},t={joint.t:g}]",
        lhs=risk, rhs=1.0 / total, tolerance=tolerance, relation="ge",
        lhs_method="weighted Bayes risk by quadrature",
        rhs_method="inverse of parametric plus prior Fisher",
        params={"t": joint.t, "estimator": est_name, "parametric_fisher": phi,
                "prior_fisher": j_prior, "posterior_fisher": j_post,
                "sub_identity_rel_err": sub_gap, "slack": risk - 1.0 / total},
        extra_ok=bool(sub_gap <= SUB_IDENTITY_TOL),
    )


# ---------------------------------------------------------------------------
# I-MMSE curves and the OU Fisher bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    t: float
    mi: float
    mi_rate: float
    mmse: float
    predicted_rate: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError(f"curve point needs t > 0, got {self.t}")
        for k in ("mi", "mi_rate", "mmse", "predicted_rate"):
            if not math.isfinite(getattr(self, k)):
                raise DomainError(f"curve point has non-finite {k}")


CURVE_COLUMNS = ("t", "mi", "mi_rate", "mmse", "predicted_rate")


def immse_coefficient(model: SdeModel, t: float) -> float:
    """Factor c(t) with dI/dt = c(t) * mmse(target | Xt) for the built-ins."""
    if model.name == "brownian":
        return -1.0 / (2 * t * t)
    if model.name == "ou":
        a = model.params["alpha"]
        e = math.exp(-2 * a * t)
        return -2 * a * a * e / (-math.expm1(-2 * a * t)) ** 2
    if model.name == "gbm":
        s2 = model.params["sigma"] ** 2
        return -1.0 / (2 * s2 * t * t)
    raise UnsupportedModelError(f"no I-MMSE coefficient for model {model.name!r}")


def immse_target(model: SdeModel) -> Callable:
    """Estimation target g(x0): x0 for BM and OU, log x0 for GBM."""
    if model.name == "gbm":
        return lambda x0, y: np.log(x0)
    if model.name in ("brownian", "ou"):
        return lambda x0, y: x0
    raise UnsupportedModelError(f"no I-MMSE target for model {model.name!r}")


def immse_curve(model: SdeModel, prior: DensityField, t_values: Iterable[float],
                h_rel: float = 1e-3, n_xt: int = 1025) -> list[CurvePoint]:
    """MI, its time derivative, the target mmse and the predicted rate per t."""
    kernel = _require_kernel(model)
    ts = [float(t) for t in t_values]
    if not ts:
        raise PreconditionError("t_values must be non-empty")
    if any(t <= 0 for t in ts):
        raise PreconditionError("all curve times must be positive")
    if ts != sorted(ts):
        raise PreconditionError("t_values must be sorted")
    g = immse_target(model)
    out = []
    for t in ts:
        h = h_rel * t
        grid_xt = default_xt_grid(kernel, prior.grid, t + h, n=n_xt)
        j_m, j_0, j_p = (build_joint(prior, kernel, grid_xt, s) for s in (t - h, t, t + h))
        rate = _central(mutual_information(j_m), mutual_information(j_p), h)
        m = mmse_b(j_0, g)
        out.append(CurvePoint(t, mutual_information(j_0), rate, m, immse_coefficient(model, t) * m))
    return out


def curve_to_csv(points) -> str:
    lines = [",".join(CURVE_COLUMNS)]
    for p in points:
        lines.append(",".join(format(getattr(p, c), ".17g") for c in CURVE_COLUMNS))
    return "\n".join(lines) + "\n"


def verify_immse_curve(model: SdeModel, prior: DensityField, t_values,
                       tolerance: float = DEFAULT_TOLERANCES["immse"]) -> IdentityReport:
    """Worst relative gap between MI rate and predicted rate along a curve."""
    pts = immse_curve(model, prior, t_values)
    gaps = [abs(p.mi_rate - p.predicted_rate) / max(abs(p.predicted_rate), 1e-12) for p in pts]
    k = int(np.argmax(gaps))
    return IdentityReport(
        name=f"immse[{model.name}]", lhs=pts[k].mi_rate, rhs=pts[k].predicted_rate,
        tolerance=tolerance,
        lhs_method="central difference of mutual information",
        rhs_method="closed-form coefficient times target mmse",
        params={"model": model.name, **model.params, "t_worst": pts[k].t,
                "t_values": [p.t for p in pts], "max_rel_gap": gaps[k]},
        extra_ok=all(gap <= tolerance for gap in gaps),
    )


def verify_ou_fisher_bound(alpha: float, prior: DensityField, t_values: Iterable[float],
                           tolerance: float = DEFAULT_TOLERANCES["ou_fisher_bound"]) -> IdentityReport:
    """J(X_t) <= 2 alpha / (1 - exp(-2 alpha t)) at every requested time."""
    from .process import builtin_ou

    model = builtin_ou(alpha)
    ts = [float(t) for t in t_values]
    if not ts or any(t <= 0 for t in ts):
        raise PreconditionError("t_values must be non-empty and positive")
    J = [fisher_b(build_joint(prior, model.kernel, None, t).marginal_xt()) for t in ts]
    bound = [model.kernel.conditional_fisher(t) for t in ts]
    slack = [bd - j for j, bd in zip(J, bound)]
    k = int(np.argmin(slack))
    return IdentityReport(
        name=f"ou_fisher_bound[alpha={alpha:g}]", lhs=J[k], rhs=bound[k], tolerance=tolerance,
        relation="le",
        lhs_method="Fisher information of kernel-built output marginal",
        rhs_method="closed-form conditional Fisher of the OU kernel",
        params={"alpha": alpha, "t_worst": ts[k], "t_values": ts, "min_slack": slack[k]},
        extra_ok=all(s >= -tolerance for s in slack),
    )


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------


def run_checks(checks: Mapping[str, Callable[[], IdentityReport]],
               threads: int = 1) -> list[IdentityReport]:
    """Run independent zero-argument checks, returning reports sorted by name."""
    items = sorted(checks.items())
    if threads <= 1 or len(items) <= 1:
        reports = [fn() for _, fn in items]
    else:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(lambda kv: kv[1](), items))
    return sorted(reports, key=lambda r: r.name)
