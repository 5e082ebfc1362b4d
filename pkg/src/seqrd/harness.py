"""Monte-Carlo of the full chain: source -> encoder -> AWGN -> decoder -> filter.

The encoder keeps its own replica of the decoder filter (fed by the same
channel outputs), so both sides stay bitwise synchronized; the report carries
the largest observed divergence between the two, which must be exactly zero.
"""

from dataclasses import dataclass

import numba
import numpy as np

from . import rng
from .errors import DivergenceError, DomainError
from .jsonio import format_float
from .realization import RealizationDesign, analytic_distortion, design_steady_state
from .sources import StateSpaceModel, simulate as simulate_source

_BATCHES = 50
_DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class SimReport:
    """Empirical closure statistics for one simulated chain."""

    steps: int
    burn_in: int
    seed: int
    empirical_distortion: float
    empirical_power: float
    stderr_distortion: float
    analytic_D: float
    analytic_P: float
    per_mode_distortion: np.ndarray
    replica_max_diff: float
    batches: int


@numba.njit(cache=True)
def _chain_loop(A, C, E, Aenc, Bdec, L, xhat0, Y, z, burn_in):
    T, p = Y.shape
    m = A.shape[0]
    xe = xhat0.copy()
    xd = xhat0.copy()
    dist = np.zeros(T)
    power = np.zeros(T)
    mode_sums = np.zeros(p)
    max_diff = 0.0
    Et = E.T
    for t in range(T):
        K = Y[t] - C @ xe
        gamma = E @ K
        a = 0.0
        for i in range(p):
            a += Aenc[i] * gamma[i]
        b = a + z[t]
        Ktilde = Et @ (Bdec * b)
        ytilde = Ktilde + C @ xd
        upd = L @ Ktilde
        xd = A @ xd + upd
        xe = A @ xe + upd
        diff = 0.0
        for i in range(m):
            delta = abs(xe[i] - xd[i])
            if delta > diff:
                diff = delta
        if diff > max_diff:
            max_diff = diff
        err = Y[t] - ytilde
        sq = 0.0
        for i in range(p):
            sq += err[i] * err[i]
        dist[t] = sq
        power[t] = a * a
        if t >= burn_in:
            gerr = E @ err
            for i in range(p):
                mode_sums[i] += gerr[i] * gerr[i]
        big = 0.0
        for i in range(m):
            if abs(xd[i]) > big:
                big = abs(xd[i])
        if big > _DIVERGENCE_LIMIT:
            return dist, power, mode_sums, max_diff, t
    return dist, power, mode_sums, max_diff, -1


def _batch_stderr(series: np.ndarray, batches: int = _BATCHES):
    """Batch-means standard error for an autocorrelated series."""
    size = series.size // batches
    if size < 1:
        raise DomainError(f"need at least {batches} post-burn-in samples for batch means")
    trimmed = series[: size * batches].reshape(batches, size)
    means = trimmed.mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(batches)), batches


def run_chain(
    model: StateSpaceModel,
    design: RealizationDesign,
    horizon: int,
    seed: int,
    burn_in: int = 10_000,
) -> SimReport:
    """Simulate `horizon` steps and report post-burn-in closure statistics."""
    if burn_in < 0:
        raise DomainError(f"burn_in must be nonnegative, got {burn_in}")
    if horizon < max(10 * burn_in, 1):
        raise DomainError(f"horizon {horizon} must be at least 10 * burn_in ({burn_in})")

    trajectory = simulate_source(model, horizon, seed)
    z = np.sqrt(design.Q) * rng.normals(seed, rng.ROLE_CHANNEL, horizon)

    dist, power, mode_sums, max_diff, diverged = _chain_loop(
        np.ascontiguousarray(model.A),
        np.ascontiguousarray(model.C),
        np.ascontiguousarray(design.E),
        np.ascontiguousarray(design.Aenc),
        np.ascontiguousarray(design.Bdec),
        np.ascontiguousarray(design.gain),
        np.ascontiguousarray(model.x0_mean, dtype=float),
        np.ascontiguousarray(trajectory.observations),
        z,
        burn_in,
    )
    if diverged >= 0:
        raise DivergenceError(f"filter state exceeded {_DIVERGENCE_LIMIT:g} at step {diverged}", step=diverged)

    tail_d = dist[burn_in:]
    tail_p = power[burn_in:]
    stderr, batches = _batch_stderr(tail_d)
    n = tail_d.size
    return SimReport(
        steps=horizon,
        burn_in=burn_in,
        seed=seed,
        empirical_distortion=float(tail_d.mean()),
        empirical_power=float(tail_p.mean()),
        stderr_distortion=stderr,
        analytic_D=analytic_distortion(design),
        analytic_P=design.P,
        per_mode_distortion=mode_sums / n,
        replica_max_diff=float(max_diff),
        batches=batches,
    )


@dataclass(frozen=True)
class SweepRow:
    D: float
    seed: int
    design: RealizationDesign = None
    report: SimReport = None
    error: str = None


def _row_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=int(base_seed), spawn_key=(997, index)).generate_state(1)[0])


def sweep(
    model: StateSpaceModel,
    D_grid,
    Q: float,
    steps: int,
    base_seed: int,
    burn_in: int = 10_000,
    design_tol: float = 1e-9,
):
    """One designed-and-simulated row per distortion budget.

    Rows are independent; a failing row records its error and does not abort
    the others.  Row seeds derive deterministically from base_seed.
    """
    rows = []
    for index, D in enumerate(np.atleast_1d(np.asarray(D_grid, dtype=float))):
        seed = _row_seed(base_seed, index)
        try:
            design = design_steady_state(model, float(D), Q, tol=design_tol)
            report = run_chain(model, design, steps, seed, burn_in=burn_in)
            rows.append(SweepRow(D=float(D), seed=seed, design=design, report=report))
        except Exception as exc:  # noqa: BLE001 - per-row isolation is the contract
            rows.append(
                SweepRow(D=float(D), seed=seed, error=f"{type(exc).__name__}: {exc}")
            )
    return rows


def sweep_csv(rows) -> str:
    lines = ["D,rate_nats,P,Q,empirical_distortion,stderr,empirical_power,steps,seed"]
    for row in rows:
        if row.error is not None:
            lines.append(f"# D={format_float(row.D)} failed: {row.error}")
            continue
        design, report = row.design, row.report
        lines.append(
            ",".join(
                [
                    format_float(row.D),
                    format_float(design.rate_nats),
                    format_float(design.P),
                    format_float(design.Q),
                    format_float(report.empirical_distortion),
                    format_float(report.stderr_distortion),
                    format_float(report.empirical_power),
                    str(report.steps),
                    str(report.seed),
                ]
            )
        )
    return "\n".join(lines) + "\n"
