"""Scalar-AWGN realization of the optimal causal reproduction.

Per time step the encoder projects the observation innovation onto the
eigenbasis of the innovation covariance, compresses the active modes into one
channel symbol a = Aenc . (E k), and the decoder expands the received symbol
b = a + z back with Bdec, adds the predicted observation, and updates a
Kalman-type predictor driven by the reproductions.

With water level xi, per-mode distortions delta and matched power
P = Q (prod lambda_i/delta_i - 1), the gains are

    Aenc_i = sqrt(alpha_i P / lambda_i)
    Bdec_i = sqrt(alpha_i P lambda_i) / (P + Q)

on active modes and zero elsewhere.  Bdec carries the 1/(P+Q) factor that
makes it the minimum-mean-square decode gain for the channel; without it the
chain cannot meet the distortion budget.  The resulting end-to-end error
trace is linear in the weights alpha:

    T(alpha) = sum(lambda) - (P/(P+Q)) * sum_i alpha_i lambda_i

so the weights are pinned by T(alpha) = D together with sum(alpha) = 1.  A
single active mode always satisfies the identity exactly at matched power;
with two active modes the identity is feasible only when the second mode sits
essentially at the water level (the residual floor is (lambda_2 - xi)^2 /
lambda_2), and infeasibility is reported as an error.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .errors import (
    DomainError,
    InfeasibleRealizationError,
    NonconvergenceError,
    UnsupportedModeCountError,
)
from .sources import StateSpaceModel, validate_model
from .waterfill import (
    WaterFillAllocation,
    diagonalize,
    innovation_covariance,
    rate_na,
    reverse_waterfill,
)

_PINV_RCOND = 1e-12
_ALPHA_TOL = 1e-8


@dataclass(frozen=True)
class ChannelModel:
    """Scalar additive white Gaussian noise channel b = a + z."""

    Q: float
    P: float = 0.0

    def __post_init__(self):
        if self.Q <= 0:
            raise DomainError(f"channel noise variance must be positive, got {self.Q}")
        if self.P < 0:
            raise DomainError(f"channel input power must be nonnegative, got {self.P}")

    @property
    def capacity_nats(self) -> float:
        return 0.5 * math.log1p(self.P / self.Q)


@dataclass
class KalmanState:
    """Predictor mean of the state given past reproductions."""

    xhat: np.ndarray


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-9
    max_outer: int = 10_000
    max_inner: int = 10_000
    damping: float = 0.5


@dataclass(frozen=True)
class RealizationDesign:
    """Converged steady-state encoder/decoder/filter objects.

    E rows are innovation eigenvectors; lam the eigenvalues (descending);
    Aenc/Bdec the encode row and decode column; H = Bdec Aenc (rank <= 1);
    Sigma the predictor error covariance; M the reproduction-innovation
    covariance; gain the filter gain A Sigma Ctilde' M^+.
    """

    model: StateSpaceModel
    E: np.ndarray
    lam: np.ndarray
    alloc: WaterFillAllocation
    alpha: np.ndarray
    Aenc: np.ndarray
    Bdec: np.ndarray
    H: np.ndarray
    Sigma: np.ndarray
    M: np.ndarray
    P: float
    Q: float
    rate_nats: float
    gain: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def channel(self) -> ChannelModel:
        return ChannelModel(Q=self.Q, P=self.P)

    @property
    def k_active(self) -> int:
        return self.alloc.k_active

    @property
    def Ctilde(self) -> np.ndarray:
        return self.E.T @ self.H @ self.E @ self.model.C

    def initial_state(self) -> KalmanState:
        return KalmanState(xhat=self.model.x0_mean.copy())


def capacity_matched_power(lam, alloc: WaterFillAllocation, Q: float) -> float:
    """Power making channel capacity equal the water-filling rate.

    From 0.5 log(1 + P/Q) = 0.5 sum log(lambda_i/delta_i):
    P = Q (prod lambda_i/delta_i - 1); zero at zero rate.
    """
    if Q <= 0:
        raise DomainError(f"channel noise variance must be positive, got {Q}")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    ratio = 1.0
    for lam_i, delta_i in zip(lam, alloc.delta):
        if lam_i <= 0:
            continue
        ratio *= lam_i / delta_i
    return max(Q * (ratio - 1.0), 0.0)


def _error_covariance(lam, Aenc, Bdec, Q):
    """End-to-end error covariance of the compressed modes (eigenbasis)."""
    Lam_d = np.diag(lam)
    H = np.outer(Bdec, Aenc)
    I = np.eye(len(lam))
    return (I - H) @ Lam_d @ (I - H).T + Q * np.outer(Bdec, Bdec)


def _gains(lam, alpha, P, Q):
    with np.errstate(divide="ignore", invalid="ignore"):
        Aenc = np.where(lam > 0, np.sqrt(np.clip(alpha * P / np.where(lam > 0, lam, 1.0), 0.0, None)), 0.0)
    Bdec = np.sqrt(np.clip(alpha * P * lam, 0.0, None)) / (P + Q) if P > 0 else np.zeros_like(lam)
    return Aenc, Bdec


def _diagonal_quadratic_candidates(lam1, lam2, D, P, Q):
    """Roots of the two-mode quadratic from the diagonal-only expansion with
    an unnormalized decode gain.  Kept for diagnostics; the trace identity
    used by solve_alpha is linear in alpha."""
    a = (lam1 + lam2) * P * P
    b = P * ((lam1 - lam2) * (2.0 - Q) - 2.0 * lam1 * P)
    c = (lam1 + lam2) - D + lam1 * P * (P + Q - 1.0)
    disc = b * b - 4.0 * a * c
    if a == 0.0:
        return []
    if disc < 0:
        return []
    root = math.sqrt(disc)
    return [(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)]


def solve_alpha(lam_active, D_active: float, P: float, Q: float) -> np.ndarray:
    """Channel-splitting weights for the active modes.

    D_active is the distortion budget carried by the active modes
    (k * xi for k active modes).  One active mode: alpha = (1,), which meets
    the distortion identity automatically at matched power.  Two active
    modes: solve the (linear) trace identity for alpha_2, clamp to [0, 1],
    and require the residual of the identity to stay within 1e-8; otherwise
    the realization is infeasible at this (D, P, Q).  More than two active
    modes are not supported by the scalar-channel construction.
    """
    lam_active = np.atleast_1d(np.asarray(lam_active, dtype=float))
    k = lam_active.size
    if k == 0:
        return np.zeros(0)
    if k == 1:
        return np.array([1.0])
    if k > 2:
        raise UnsupportedModeCountError(
            f"{k} active modes; the scalar-channel construction supports at most 2"
        )

    lam1, lam2 = float(lam_active[0]), float(lam_active[1])
    gamma = P / (P + Q)
    if gamma <= 0:
        raise InfeasibleRealizationError(
            f"zero channel power with two active modes at (D={D_active:g}, P={P:g}, Q={Q:g})"
        )
    # T(alpha) = sum(lam) - gamma * sum(alpha*lam) = D_active on the active block.
    target = (lam1 + lam2 - D_active) / gamma
    if lam1 == lam2:
        alpha2 = 0.5
    else:
        alpha2 = (target - lam1) / (lam2 - lam1)
    raw_root = alpha2
    alpha2 = min(max(alpha2, 0.0), 1.0)
    alpha = np.array([1.0 - alpha2, alpha2])

    achieved = float(np.trace(_error_covariance(lam_active, *_gains(lam_active, alpha, P, Q), Q)))
    residual = abs(achieved - D_active)
    if residual > _ALPHA_TOL:
        candidates = [raw_root] + _diagonal_quadratic_candidates(lam1, lam2, D_active, P, Q)
        raise InfeasibleRealizationError(
            f"infeasible realization at (D={D_active:g}, P={P:g}, Q={Q:g}): "
            f"best distortion residual {residual:.3g} exceeds {_ALPHA_TOL:g}",
            candidates=candidates,
        )
    return alpha


def riccati_step(Sigma, design: RealizationDesign, model: StateSpaceModel):
    """One predictor-covariance update driven by the reproduction chain.

    Returns (Sigma_next, M) where M is the covariance of the reproduction
    innovation at the current Sigma.  M is inverted by pseudo-inverse since
    it is rank-deficient whenever fewer than p modes are transmitted.
    """
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    A, B, C, G = model.A, model.B, model.C, model.G
    EHE = design.E.T @ design.H @ design.E
    Ctilde = EHE @ C
    Bd = design.E.T @ design.Bdec
    R = EHE @ (G @ G.T) @ EHE.T + design.Q * np.outer(Bd, Bd)

    M = Ctilde @ Sigma @ Ctilde.T + R
    M = 0.5 * (M + M.T)
    Minv = np.linalg.pinv(M, rcond=_PINV_RCOND, hermitian=True)
    AS = A @ Sigma
    Sigma_next = AS @ A.T - AS @ Ctilde.T @ Minv @ Ctilde @ Sigma @ A.T + B @ B.T
    Sigma_next = 0.5 * (Sigma_next + Sigma_next.T)
    if not np.all(np.isfinite(Sigma_next)):
        raise NonconvergenceError("non-finite covariance in filter update")
    return Sigma_next, M


def _riccati_fixed_point(A, BBt, Ctilde, R, Sigma0, tol, max_iter):
    """Iterate Sigma -> A Sigma A' - A Sigma C'(C Sigma C'+R)^+ C Sigma A' + BB'."""
    Sigma = Sigma0
    for it in range(max_iter):
        M = Ctilde @ Sigma @ Ctilde.T + R
        M = 0.5 * (M + M.T)
        Minv = np.linalg.pinv(M, rcond=_PINV_RCOND, hermitian=True)
        AS = A @ Sigma
        K = AS @ Ctilde.T @ Minv
        Sigma_next = AS @ A.T - K @ Ctilde @ Sigma @ A.T + BBt
        Sigma_next = 0.5 * (Sigma_next + Sigma_next.T)
        if not np.all(np.isfinite(Sigma_next)):
            raise NonconvergenceError(f"filter covariance diverged at iteration {it}")
        resid = float(np.max(np.abs(Sigma_next - Sigma)))
        Sigma = Sigma_next
        if resid <= tol * max(1.0, float(np.max(np.abs(Sigma)))):
            return Sigma, M, it + 1, resid
    raise NonconvergenceError(
        f"filter covariance not converged in {max_iter} iterations (residual {resid:.3g})",
        residual=resid,
        iterations=max_iter,
    )


def _build_gains(dec, alloc, P, Q):
    lam = dec.eigenvalues
    p = lam.size
    alpha = np.zeros(p)
    active = list(alloc.active_modes)
    if active and P > 0:
        alpha_active = solve_alpha(lam[active], len(active) * alloc.xi, P, Q)
        alpha[active] = alpha_active
    Aenc, Bdec = _gains(lam, alpha, P, Q)
    H = np.outer(Bdec, Aenc)
    return alpha, Aenc, Bdec, H


def design_steady_state(
    model: StateSpaceModel,
    D: float,
    Q: float,
    tol: float = 1e-9,
    max_iter: int = 10_000,
) -> RealizationDesign:
    """Joint fixed point of water-filling, gain design and the filter.

    Outer loop on the innovation covariance Lambda (damped by 0.5), inner
    loop iterating the predictor Riccati map to convergence for the current
    gains.  At the fixed point C Sigma C' + G G' matches the Lambda the
    design was built from, capacity equals the rate, and the analytic
    end-to-end distortion equals D.
    """
    diagnostics = validate_model(model)
    if diagnostics:
        raise DomainError("model failed validation: " + "; ".join(diagnostics))
    if D <= 0:
        raise DomainError(f"distortion budget must be positive, got {D}")
    if Q <= 0:
        raise DomainError(f"channel noise variance must be positive, got {Q}")

    cfg = FixedPointConfig(tol=tol, max_outer=max_iter)
    A, B, C, G = model.A, model.B, model.C, model.G
    BBt = B @ B.T
    GGt = G @ G.T

    # Initialize from the fully informed predictor (direct observation of Y).
    Sigma, _, _, _ = _riccati_fixed_point(
        A, BBt, C, GGt, BBt.copy(), tol=1e-12, max_iter=cfg.max_inner
    )
    Lam_used = innovation_covariance(Sigma, model)

    inner_iters = 0
    for outer in range(cfg.max_outer):
        dec = diagonalize(Lam_used)
        alloc = reverse_waterfill(dec.eigenvalues, D)
        P = capacity_matched_power(dec.eigenvalues, alloc, Q)
        alpha, Aenc, Bdec, H = _build_gains(dec, alloc, P, Q)

        EHE = dec.E.T @ H @ dec.E
        Ctilde = EHE @ C
        Bd = dec.E.T @ Bdec
        R = EHE @ GGt @ EHE.T + Q * np.outer(Bd, Bd)
        Sigma, M, inner_iters, inner_resid = _riccati_fixed_point(
            A, BBt, Ctilde, R, Sigma, tol=1e-12, max_iter=cfg.max_inner
        )

        Lam_raw = innovation_covariance(Sigma, model)
        resid = float(np.max(np.abs(Lam_raw - Lam_used)))
        if resid <= cfg.tol:
            gain = A @ Sigma @ Ctilde.T @ np.linalg.pinv(M, rcond=_PINV_RCOND, hermitian=True)
            rate = rate_na(alloc, dec.eigenvalues)
            err = _error_covariance(dec.eigenvalues, Aenc, Bdec, Q)
            design = RealizationDesign(
                model=model,
                E=dec.E,
                lam=dec.eigenvalues,
                alloc=alloc,
                alpha=alpha,
                Aenc=Aenc,
                Bdec=Bdec,
                H=H,
                Sigma=Sigma,
                M=M,
                P=P,
                Q=Q,
                rate_nats=rate,
                gain=gain,
                diagnostics={
                    "outer_iterations": outer + 1,
                    "inner_iterations_last": inner_iters,
                    "outer_residual": resid,
                    "inner_residual": inner_resid,
                    "distortion_residual": abs(
                        float(np.trace(err)) - min(D, float(np.sum(dec.eigenvalues)))
                    ),
                    "per_mode_distortion": np.diag(err).copy(),
                },
            )
            return design
        Lam_used = Lam_used + cfg.damping * (Lam_raw - Lam_used)

    raise NonconvergenceError(
        f"steady-state design not converged in {cfg.max_outer} outer iterations "
        f"(residual {resid:.3g})",
        residual=resid,
        iterations=cfg.max_outer,
    )


def analytic_distortion(design: RealizationDesign, lam=None) -> float:
    """Trace{(I - Bdec Aenc) diag(lam) (I - Bdec Aenc)' + Bdec Q Bdec'}.

    The eigenbasis conjugation cancels under the trace, so this is the
    end-to-end mean squared reproduction error of the chain.
    """
    if lam is None:
        lam = design.lam
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return float(np.trace(_error_covariance(lam, design.Aenc, design.Bdec, design.Q)))


def per_mode_distortion(design: RealizationDesign) -> np.ndarray:
    """Per-eigenmode reproduction error (diagonal of the error covariance)."""
    return np.diag(_error_covariance(design.lam, design.Aenc, design.Bdec, design.Q)).copy()


def encode(y, state: KalmanState, design: RealizationDesign) -> float:
    """Channel symbol for one observation: a = Aenc E (y - C xhat)."""
    K = np.asarray(y, dtype=float) - design.model.C @ state.xhat
    return float(design.Aenc @ (design.E @ K))


def decode(b: float, state: KalmanState, design: RealizationDesign, model: StateSpaceModel = None):
    """Reproduce one observation from the channel output and advance the filter.

    y_tilde = E' Bdec b + C xhat; the predictor update uses the same
    reproduction innovation: xhat' = A xhat + gain (y_tilde - C xhat).
    """
    model = model if model is not None else design.model
    Ktilde = design.E.T @ (design.Bdec * float(b))
    y_tilde = Ktilde + model.C @ state.xhat
    xhat_next = model.A @ state.xhat + design.gain @ Ktilde
    return y_tilde, KalmanState(xhat=xhat_next)


def design_to_dict(design: RealizationDesign) -> dict:
    return {
        "E": design.E,
        "alpha": design.alpha,
        "Aenc": design.Aenc,
        "Bdec": design.Bdec,
        "H": design.H,
        "Sigma": design.Sigma,
        "M": design.M,
        "P": design.P,
        "Q": design.Q,
        "lambda": design.lam,
        "delta": design.alloc.delta,
        "rate_nats": design.rate_nats,
    }


def save_design(design: RealizationDesign, path) -> None:
    jsonio.dump(design_to_dict(design), path)


def load_design(path, model: StateSpaceModel) -> RealizationDesign:
    """Rebuild a design exported by save_design for the given model."""
    doc = jsonio.load(path)
    required = ("E", "alpha", "Aenc", "Bdec", "H", "Sigma", "M", "P", "Q", "lambda", "delta")
    missing = [key for key in required if key not in doc]
    if missing:
        raise DomainError(f"design file missing keys: {', '.join(missing)}")
    lam = jsonio.as_vector(doc["lambda"], "lambda")
    delta = jsonio.as_vector(doc["delta"], "delta")
    alloc = reverse_waterfill(lam, max(float(np.sum(delta)), np.finfo(float).tiny))
    E = jsonio.as_matrix(doc["E"], "E")
    H = jsonio.as_matrix(doc["H"], "H")
    Sigma = jsonio.as_matrix(doc["Sigma"], "Sigma")
    M = jsonio.as_matrix(doc["M"], "M")
    Ctilde = E.T @ H @ E @ model.C
    gain = model.A @ Sigma @ Ctilde.T @ np.linalg.pinv(M, rcond=_PINV_RCOND, hermitian=True)
    return RealizationDesign(
        model=model,
        E=E,
        lam=lam,
        alloc=alloc,
        alpha=jsonio.as_vector(doc["alpha"], "alpha"),
        Aenc=jsonio.as_vector(doc["Aenc"], "Aenc"),
        Bdec=jsonio.as_vector(doc["Bdec"], "Bdec"),
        H=H,
        Sigma=Sigma,
        M=M,
        P=float(doc["P"]),
        Q=float(doc["Q"]),
        rate_nats=float(doc.get("rate_nats", rate_na(alloc, lam))),
        gain=gain,
    )
