"""Linear SDEs dX = A X dt + b^{1/2} dW in dimension d <= 3.

Gaussian laws stay Gaussian, so every quantity is closed form given the
mean and covariance. Moments are propagated by fixed-step RK4 on
``dm/dt = A m`` and ``dS/dt = A S + S Aᵀ + b``; matrix exponentials are
deliberately not used so the propagation shares nothing with the Schur
complement formulas on the other side of each check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, PreconditionError
from .report import IdentityReport

MAX_RK_STEP = 1e-3
COV_EIG_FLOOR = 1e-12


def _sym(m) -> np.ndarray:
    m = np.array(m, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    return m


def _check_spd(m: np.ndarray, what: str, floor: float = 0.0) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"{what} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-10, atol=1e-12):
        raise DomainError(f"{what} must be symmetric")
    if np.linalg.eigvalsh(m).min() <= floor:
        raise NumericError(f"{what} is not positive definite")


@dataclass(frozen=True, eq=False)
class LinearSdeModel:
    dim: int
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A, b = _sym(self.A), _sym(self.b)
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.dim}")
        if A.shape != (self.dim, self.dim) or b.shape != (self.dim, self.dim):
            raise DomainError(f"A and b must be {self.dim}x{self.dim}")
        _check_spd(b, "weight matrix b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", 0.5 * (b + b.T))


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        m = np.atleast_1d(np.array(self.mean, dtype=float))
        c = _sym(self.cov)
        if c.shape != (m.size, m.size):
            raise DomainError(f"covariance shape {c.shape} does not match mean of size {m.size}")
        _check_spd(c, "covariance", COV_EIG_FLOOR)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", 0.5 * (c + c.T))
        object.__setattr__(self, "t", float(self.t))

    @property
    def dim(self) -> int:
        return self.mean.size


def _moment_rhs(A, b, m, S):
    return A @ m, A @ S + S @ A.T + b


def _rk4_moments(A, b, m, S, span, max_step):
    n = max(1, math.ceil(span / max_step))
    h = span / n
    for _ in range(n):
        k1m, k1S = _moment_rhs(A, b, m, S)
        k2m, k2S = _moment_rhs(A, b, m + 0.5 * h * k1m, S + 0.5 * h * k1S)
        k3m, k3S = _moment_rhs(A, b, m + 0.5 * h * k2m, S + 0.5 * h * k2S)
        k4m, k4S = _moment_rhs(A, b, m + h * k3m, S + h * k3S)
        m = m + h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
        S = S + h / 6 * (k1S + 2 * k2S + 2 * k3S + k4S)
    if not np.all(np.isfinite(S)):
        raise NumericError("covariance became non-finite")
    return m, S


def propagate(model: LinearSdeModel, state: GaussianState, t_end: float,
              max_step: float = MAX_RK_STEP) -> GaussianState:
    """Gaussian state at ``t_end`` by RK4 on the moment equations."""
    span = t_end - state.t
    if span < 0:
        raise PreconditionError(f"t_end={t_end} precedes state time {state.t}")
    if state.dim != model.dim:
        raise DomainError("state and model dimensions differ")
    if span == 0:
        return state
    m, S = _rk4_moments(model.A, model.b, state.mean, state.cov, span, max_step)
    return GaussianState(m, S, t_end)


def gaussian_entropy(state: GaussianState) -> float:
    """½ log((2 pi e)^d det S)."""
    sign, logdet = np.linalg.slogdet(state.cov)
    if sign <= 0:
        raise NumericError("covariance is not positive definite")
    return 0.5 * (state.dim * math.log(2 * math.pi * math.e) + logdet)


def gaussian_fisher_b(state: GaussianState, b) -> float:
    """tr(b S⁻¹), the b-weighted Fisher information of N(m, S)."""
    b = _sym(b)
    _check_spd(b, "weight matrix b")
    try:
        inv = np.linalg.inv(state.cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular covariance") from exc
    return float(np.trace(b @ inv))


def verify_entropy_rate_mv(model: LinearSdeModel, state: GaussianState, h: float = 1e-5,
                           tolerance: float = 1e-6) -> IdentityReport:
    """Central difference of entropy along the moment flow vs ½ tr(b S⁻¹) + tr(A).

    The rate is evaluated at ``state.t + h`` so that the stencil starts at
    the given state.
    """
    if not h > 0:
        raise PreconditionError(f"h must be positive, got {h}")
    t = state.t + h
    step = min(MAX_RK_STEP, h / 4)
    mid = propagate(model, state, t, step)
    hi = propagate(model, mid, t + h, step)
    lhs = (gaussian_entropy(hi) - gaussian_entropy(state)) / (2 * h)
    rhs = 0.5 * gaussian_fisher_b(mid, model.b) + float(np.trace(model.A))
    return IdentityReport(
        name=f"entropy_rate_mv[d={model.dim},t={t:g}]", lhs=lhs, rhs=rhs, tolerance=tolerance,
        lhs_method="central difference of Gaussian entropy along RK4 moments",
        rhs_method="half trace of b times precision plus trace of A",
        params={"dim": model.dim, "t": t, "h": h},
    )


def _propagator(model: LinearSdeModel, t: float, max_step: float = MAX_RK_STEP) -> np.ndarray:
    """Phi(t) solving dPhi/dt = A Phi, Phi(0) = I, by RK4."""
    n = max(1, math.ceil(t / max_step))
    h = t / n
    A = model.A
    Phi = np.eye(model.dim)
    for _ in range(n):
        k1 = A @ Phi
        k2 = A @ (Phi + 0.5 * h * k1)
        k3 = A @ (Phi + 0.5 * h * k2)
        k4 = A @ (Phi + h * k3)
        Phi = Phi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Phi


def _joint_blocks(model: LinearSdeModel, prior: GaussianState, t: float):
    """Prior covariance P, propagator M, kernel covariance Q and Cov(Xt)."""
    d = model.dim
    M = _propagator(model, t)
    _, Q = _rk4_moments(model.A, model.b, np.zeros(d), np.zeros((d, d)), t, MAX_RK_STEP)
    Q = 0.5 * (Q + Q.T)
    P = prior.cov
    return P, M, Q, M @ P @ M.T + Q


def verify_van_trees_mv(model: LinearSdeModel, prior: GaussianState, t: float,
                        tolerance: float = 1e-9) -> IdentityReport:
    """Weighted risk of the Gaussian posterior mean vs 1 / (Phi_b + J_b(prior)).

    LHS: tr(b⁻¹ C) with C = P - P Mᵀ Cov(Xt)⁻¹ M P (Schur complement).
    RHS: 1 / tr(b (Mᵀ Q⁻¹ M + P⁻¹)); the side condition compares the
    posterior precision Mᵀ Q⁻¹ M + P⁻¹ with C⁻¹ (Woodbury).
    """
    if not t > 0:
        raise PreconditionError(f"t must be positive, got {t}")
    if prior.dim != model.dim:
        raise DomainError("prior and model dimensions differ")
    P, M, Q, C_yy = _joint_blocks(model, prior, t)
    C = P - P @ M.T @ np.linalg.solve(C_yy, M @ P)
    b_inv = np.linalg.inv(model.b)
    lhs = float(np.trace(b_inv @ C))
    stat = M.T @ np.linalg.solve(Q, M)
    post_prec = stat + np.linalg.inv(P)
    phi_b = float(np.trace(model.b @ stat))
    j_prior = gaussian_fisher_b(prior, model.b)
    rhs = 1.0 / (phi_b + j_prior)
    woodbury = np.linalg.inv(C)
    gap = float(np.max(np.abs(woodbury - post_prec)) / np.max(np.abs(post_prec)))
    return IdentityReport(
        name=f"van_trees_mv[d={model.dim},t={t:g}]", lhs=lhs, rhs=rhs, tolerance=tolerance,
        relation="ge",
        lhs_method="trace of inverse-weighted Schur complement",
        rhs_method="inverse of parametric plus prior weighted Fisher",
        params={"dim": model.dim, "t": t, "parametric_fisher": phi_b,
                "prior_fisher": j_prior, "woodbury_gap": gap},
        extra_ok=bool(gap <= 1e-6),
    )


def gaussian_mutual_information(model: LinearSdeModel, prior: GaussianState, t: float) -> float:
    """I(X0; Xt) = ½ log det Cov(Xt) - ½ log det Q."""
    if not t >= 1e-6:
        raise PreconditionError(f"mutual information needs t >= 1e-6, got {t}")
    _, _, Q, C_yy = _joint_blocks(model, prior, t)
    return 0.5 * (np.linalg.slogdet(C_yy)[1] - np.linalg.slogdet(Q)[1])


def random_stable_model(dim: int, rng: np.random.Generator, margin: float = 0.2) -> LinearSdeModel:
    """Random A with spectral abscissa <= -margin and random SPD b."""
    G = rng.standard_normal((dim, dim))
    shift = np.max(np.linalg.eigvals(G).real) + margin + rng.uniform(0, 1)
    A = G - shift * np.eye(dim)
    L = rng.standard_normal((dim, dim))
    b = L @ L.T + 0.5 * np.eye(dim)
    return LinearSdeModel(dim, A, b)


def random_gaussian_state(dim: int, rng: np.random.Generator, t: float = 0.0) -> GaussianState:
    L = rng.standard_normal((dim, dim))
    return GaussianState(rng.standard_normal(dim), L @ L.T + 0.5 * np.eye(dim), t)
