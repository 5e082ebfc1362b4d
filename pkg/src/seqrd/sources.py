"""Partially observed linear Gauss-Markov sources.

The model is the time-invariant recursion

    X[t+1] = A X[t] + B W[t]
    Y[t]   = C X[t] + G V[t]

with W, V independent standard-Gaussian IID vectors and X[0] ~ N(x0_mean,
x0_cov).  G must be square and invertible so the observation noise covariance
G G' is strictly positive definite.
"""

from dataclasses import dataclass

import numba
import numpy as np
import scipy.linalg as sla

from . import jsonio, rng
from .errors import DomainError, NonconvergenceError, StructuralError

_PBH_RTOL = 1e-9  # rank tolerance relative to the largest singular value
_PSD_TOL = 1e-10


@dataclass(frozen=True)
class StateSpaceModel:
    """Matrices and initial statistics of the source.

    Shapes: A (m,m), B (m,k), C (p,m), G (p,p), x0_mean (m,), x0_cov (m,m).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "G"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "x0_mean", np.atleast_1d(np.asarray(self.x0_mean, dtype=float)))
        object.__setattr__(self, "x0_cov", np.atleast_2d(np.asarray(self.x0_cov, dtype=float)))
        m = self.A.shape[0]
        if self.A.shape != (m, m):
            raise StructuralError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != m:
            raise StructuralError(f"B has {self.B.shape[0]} rows, A is {m}x{m}")
        if self.C.shape[1] != m:
            raise StructuralError(f"C has {self.C.shape[1]} columns, A is {m}x{m}")
        p = self.C.shape[0]
        if self.G.shape != (p, p):
            raise StructuralError(f"G must be {p}x{p} (square, matching C rows), got {self.G.shape}")
        if self.x0_mean.shape != (m,):
            raise StructuralError(f"x0_mean must have length {m}, got {self.x0_mean.shape}")
        if self.x0_cov.shape != (m, m):
            raise StructuralError(f"x0_cov must be {m}x{m}, got {self.x0_cov.shape}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Simulated states (horizon, m) and observations (horizon, p)."""

    states: np.ndarray
    observations: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]


def scalar_model(a=0.9, b=1.0, c=1.0, g=1.0, x0_mean=0.0, x0_var=None) -> StateSpaceModel:
    """Convenience constructor for 1-dimensional models."""
    if x0_var is None:
        x0_var = b * b / (1.0 - a * a) if abs(a) < 1 and b != 0 else 0.0
    return StateSpaceModel(
        A=[[a]], B=[[b]], C=[[c]], G=[[g]], x0_mean=[x0_mean], x0_cov=[[x0_var]]
    )


def _unit_circle_eigs(A: np.ndarray):
    return [mu for mu in np.linalg.eigvals(A) if abs(mu) >= 1.0 - 1e-12]


def validate_model(model: StateSpaceModel) -> list:
    """Check detectability, stabilizability and PSD initial covariance.

    Returns a list of human-readable diagnostics; empty means the model is
    admissible.  Dimension problems raise StructuralError at construction
    time, so only property failures are reported here.
    """
    diagnostics = []
    m = model.m

    sv = np.linalg.svd(model.G, compute_uv=False)
    if sv[-1] <= _PBH_RTOL * max(sv[0], 1.0):
        diagnostics.append("G is singular; observation noise must have full rank")

    asym = np.max(np.abs(model.x0_cov - model.x0_cov.T))
    if asym > _PSD_TOL:
        diagnostics.append(f"x0_cov is not symmetric (max asymmetry {asym:.3g})")
    else:
        eig = np.linalg.eigvalsh(0.5 * (model.x0_cov + model.x0_cov.T))
        if eig.size and eig[0] < -_PSD_TOL * max(1.0, eig[-1]):
            diagnostics.append(f"x0_cov has negative eigenvalue {eig[0]:.3g}")

    # PBH tests on eigenvalues with modulus >= 1.
    for mu in _unit_circle_eigs(model.A):
        pencil = np.vstack([mu * np.eye(m) - model.A, model.C.astype(complex)])
        smax = np.linalg.svd(pencil, compute_uv=False)[0]
        if np.linalg.matrix_rank(pencil, tol=_PBH_RTOL * smax) < m:
            diagnostics.append(f"(C, A) not detectable at eigenvalue {mu:.6g}")
        pencil = np.hstack([mu * np.eye(m) - model.A, model.B.astype(complex)])
        smax = np.linalg.svd(pencil, compute_uv=False)[0]
        if np.linalg.matrix_rank(pencil, tol=_PBH_RTOL * smax) < m:
            diagnostics.append(f"(A, B) not stabilizable at eigenvalue {mu:.6g}")

    return diagnostics


def _psd_sqrt(S: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (S + S.T))
    w = np.clip(w, 0.0, None)
    return v @ np.diag(np.sqrt(w)) @ v.T


@numba.njit(cache=True)
def _state_recursion(A, x0, BW):
    horizon = BW.shape[0]
    X = np.empty((horizon, A.shape[0]))
    X[0] = x0
    for t in range(horizon - 1):
        X[t + 1] = A @ X[t] + BW[t]
    return X


def simulate(model: StateSpaceModel, horizon: int, seed: int) -> Trajectory:
    """Draw one trajectory of `horizon` steps, bit-reproducible per seed."""
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    diagnostics = validate_model(model)
    if diagnostics:
        raise DomainError("model failed validation: " + "; ".join(diagnostics))

    m, k, p = model.m, model.k, model.p
    x0 = model.x0_mean + _psd_sqrt(model.x0_cov) @ rng.normals(seed, rng.ROLE_INIT, m)
    W = rng.normals(seed, rng.ROLE_PROCESS, (horizon, k))
    V = rng.normals(seed, rng.ROLE_OBSERVATION, (horizon, p))

    X = _state_recursion(np.ascontiguousarray(model.A), x0, W @ model.B.T)
    Y = X @ model.C.T + V @ model.G.T
    return Trajectory(states=X, observations=Y)


def stationary_state_cov(model: StateSpaceModel) -> np.ndarray:
    """Solve P = A P A' + B B' for a strictly stable A."""
    rho = np.max(np.abs(np.linalg.eigvals(model.A)))
    if rho >= 1.0:
        raise DomainError(f"nonstationary source: spectral radius {rho:.6g} >= 1")
    P = sla.solve_discrete_lyapunov(model.A, model.B @ model.B.T)
    P = 0.5 * (P + P.T)
    residual = np.max(np.abs(P - model.A @ P @ model.A.T - model.B @ model.B.T))
    if residual > 1e-12 * max(1.0, float(np.max(np.abs(P)))):
        raise NonconvergenceError(
            f"Lyapunov residual {residual:.3g} above tolerance", residual=residual
        )
    return P


def save_model(model: StateSpaceModel, path) -> None:
    jsonio.dump(
        {
            "A": model.A,
            "B": model.B,
            "C": model.C,
            "G": model.G,
            "x0_mean": model.x0_mean,
            "x0_cov": model.x0_cov,
        },
        path,
    )


def load_model(path) -> StateSpaceModel:
    """Read a model JSON document, rejecting ragged or missing fields."""
    doc = jsonio.load(path)
    required = ("A", "B", "C", "G", "x0_mean", "x0_cov")
    missing = [key for key in required if key not in doc]
    if missing:
        raise StructuralError(f"model file missing keys: {', '.join(missing)}")
    return StateSpaceModel(
        A=jsonio.as_matrix(doc["A"], "A"),
        B=jsonio.as_matrix(doc["B"], "B"),
        C=jsonio.as_matrix(doc["C"], "C"),
        G=jsonio.as_matrix(doc["G"], "G"),
        x0_mean=jsonio.as_vector(doc["x0_mean"], "x0_mean"),
        x0_cov=jsonio.as_matrix(doc["x0_cov"], "x0_cov"),
    )
