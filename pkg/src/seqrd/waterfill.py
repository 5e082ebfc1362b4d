"""Innovation statistics, reverse water-filling, and the causal rate value.

The steady-state innovation covariance of the reproduction loop is
Lambda = C Sigma C' + G G'.  Its eigenvalues are allocated a distortion
budget D by reverse water-filling (delta_i = min(xi, lambda_i), sum = D) and
the sequential rate is 0.5 * sum log(lambda_i / delta_i) nats per step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError
from .sources import StateSpaceModel

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class InnovationDecomposition:
    """Eigendecomposition E Lambda E' = diag(eigenvalues), descending order.

    Rows of E are eigenvectors.  Sign convention: in each row the entry of
    largest magnitude is positive, which makes the factorization unique for
    distinct eigenvalues.
    """

    lambda_cov: np.ndarray
    E: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class WaterFillAllocation:
    """Per-mode distortions for budget D at water level xi.

    delta_i = min(xi, lambda_i); eta_i = 1 - delta_i / lambda_i; a mode is
    active when lambda_i > xi.  H_diag and Delta are the diagonal matrices
    diag(eta) and diag(delta) used by the reproduction kernel.
    """

    xi: float
    delta: np.ndarray
    eta: np.ndarray
    H_diag: np.ndarray
    Delta: np.ndarray
    D: float
    active_modes: tuple

    @property
    def k_active(self) -> int:
        return len(self.active_modes)


def innovation_covariance(Sigma: np.ndarray, model: StateSpaceModel) -> np.ndarray:
    """C Sigma C' + G G'; strictly positive definite since G is invertible."""
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    Lam = model.C @ Sigma @ model.C.T + model.G @ model.G.T
    return 0.5 * (Lam + Lam.T)


def diagonalize(Lambda: np.ndarray) -> InnovationDecomposition:
    """Symmetric eigendecomposition with descending, sign-fixed rows."""
    Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
    if Lambda.shape[0] != Lambda.shape[1]:
        raise StructuralError(f"covariance must be square, got {Lambda.shape}")
    if np.max(np.abs(Lambda - Lambda.T)) > _SYM_TOL * max(1.0, float(np.max(np.abs(Lambda)))):
        raise StructuralError("covariance is not symmetric")

    w, v = np.linalg.eigh(0.5 * (Lambda + Lambda.T))
    order = np.argsort(w)[::-1]
    eigenvalues = np.clip(w[order], 0.0, None)
    E = v[:, order].T
    for i in range(E.shape[0]):
        j = int(np.argmax(np.abs(E[i])))
        if E[i, j] < 0:
            E[i] = -E[i]
    return InnovationDecomposition(lambda_cov=Lambda, E=E, eigenvalues=eigenvalues)


def reverse_waterfill(lam, D: float) -> WaterFillAllocation:
    """Allocate total distortion D over eigenmodes lam (reverse water-filling).

    The water level xi solves sum_i min(xi, lambda_i) = D, found by monotone
    bisection on [0, max(lam) + D] and then polished exactly on the implied
    active set.  If D >= sum(lam) every mode is fully distorted (delta =
    lambda, zero active modes).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam < 0):
        raise DomainError("eigenvalues must be nonnegative")
    if D <= 0:
        raise DomainError(f"distortion budget must be positive, got {D}")

    total = float(np.sum(lam))
    if D >= total:
        xi = float(np.max(lam, initial=0.0))
        delta = lam.copy()
    else:
        lo, hi = 0.0, float(np.max(lam, initial=0.0)) + D
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(np.sum(np.minimum(mid, lam))) < D:
                lo = mid
            else:
                hi = mid
            if abs(float(np.sum(np.minimum(hi, lam))) - D) <= 1e-12 * max(1.0, D):
                break
        xi = hi
        # Exact water level for the active set found by bisection.
        active = lam > xi
        k = int(np.count_nonzero(active))
        if k > 0:
            xi = (D - float(np.sum(lam[~active]))) / k
        delta = np.minimum(xi, lam)

    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(lam > 0, 1.0 - delta / np.where(lam > 0, lam, 1.0), 0.0)
    eta = np.clip(eta, 0.0, 1.0)
    active_modes = tuple(int(i) for i in np.nonzero(lam > xi)[0])
    return WaterFillAllocation(
        xi=float(xi),
        delta=delta,
        eta=eta,
        H_diag=np.diag(eta),
        Delta=np.diag(delta),
        D=float(D),
        active_modes=active_modes,
    )


def rate_na(alloc: WaterFillAllocation, lam) -> float:
    """Sequential rate 0.5 * sum log(lambda_i / delta_i) in nats per step."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    rate = 0.0
    for lam_i, delta_i in zip(lam, alloc.delta):
        if lam_i <= 0:
            continue
        if delta_i <= 0:
            raise DomainError("zero per-mode distortion with positive eigenvalue")
        rate += 0.5 * np.log(lam_i / delta_i)
    return max(rate, 0.0)


def rdf_curve(model: StateSpaceModel, D_grid, cfg=None):
    """Rate-distortion points (D, rate, xi, k_active) along a grid of budgets.

    Each point runs the joint steady-state fixed point of the realization
    module.  The matched design depends on the channel noise only through the
    rate, so the curve is computed with a unit-noise channel.
    """
    from .realization import FixedPointConfig, design_steady_state

    cfg = cfg or FixedPointConfig()
    D_grid = np.atleast_1d(np.asarray(D_grid, dtype=float))
    if np.any(D_grid <= 0):
        raise DomainError("all distortion budgets must be positive")
    if np.any(np.diff(D_grid) <= 0) and D_grid.size > 1:
        raise DomainError("D grid must be strictly ascending")

    rows = []
    for D in D_grid:
        try:
            design = design_steady_state(
                model, float(D), Q=1.0, tol=cfg.tol, max_iter=cfg.max_outer
            )
        except Exception as exc:
            raise type(exc)(f"at D={D:g}: {exc}") from exc
        rows.append(
            {
                "D": float(D),
                "rate_nats": float(design.rate_nats),
                "xi": float(design.alloc.xi),
                "k_active": design.alloc.k_active,
            }
        )
    return rows


def rdf_curve_csv(rows) -> str:
    from .jsonio import format_float

    lines = ["D,rate_nats,xi,k_active"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    format_float(row["D"]),
                    format_float(row["rate_nats"]),
                    format_float(row["xi"]),
                    str(row["k_active"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"
