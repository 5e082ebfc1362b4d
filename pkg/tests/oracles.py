"""Independent reference implementations used to freeze expected values.

Nothing here imports the solver paths under test: the classical single-letter
iteration works on flat matrices, the enumeration oracle walks sequence
tuples with dictionaries, and the gain-split scan evaluates the end-to-end
error covariance matrix directly over a dense grid.
"""

import itertools
import math

import numpy as np


def classical_ba(px, rho, slope, tol=1e-13, max_iter=200_000):
    """Classical single-letter fixed point at slope s <= 0 -> (rate, distortion)."""
    px = np.asarray(px, dtype=float)
    rho = np.asarray(rho, dtype=float)
    ny = rho.shape[1]
    q = np.full(ny, 1.0 / ny)
    tilt = np.exp(slope * rho)
    for _ in range(max_iter):
        denom = tilt @ q
        cond = tilt * q[None, :] / denom[:, None]
        q_new = px @ cond
        if np.max(np.abs(q_new - q)) <= tol:
            q = q_new
            break
        q = q_new
    denom = tilt @ q
    cond = tilt * q[None, :] / denom[:, None]
    dist = float(px @ np.sum(cond * rho, axis=1))
    mask = cond > 0
    safe_q = np.where(q[None, :] > 0, q[None, :], 1.0)
    rate = float(
        np.sum(px[:, None] * cond * np.log(np.where(mask, cond / safe_q, 1.0)), where=mask)
    )
    return max(rate, 0.0), dist


def classical_ba_rate(px, rho, D, slope_floor=-1e6):
    """Classical rate at average distortion D via bisection on the slope."""
    lo, hi = -1.0, 0.0
    while classical_ba(px, rho, lo)[1] > D and lo > slope_floor:
        lo *= 2.0
    best = (math.inf, None)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rate, dist = classical_ba(px, rho, mid)
        if abs(dist - D) < best[0]:
            best = (abs(dist - D), rate)
        if dist < D:
            lo = mid
        else:
            hi = mid
        if best[0] <= 1e-12:
            break
    return best[1]


def binary_hamming_rate(D: float) -> float:
    """ln 2 - H_b(D) in nats for the uniform binary source, 0 < D < 1/2."""
    hb = -D * math.log(D) - (1.0 - D) * math.log(1.0 - D)
    return math.log(2.0) - hb


def directed_information_bruteforce(source, family) -> float:
    """Literal tuple-by-tuple enumeration of sum_i I(X^i; Y_i | Y^{i-1})."""
    stages = source.horizon
    x_ranges = [range(s) for s in source.x_sizes]
    y_ranges = [range(s) for s in source.y_sizes]

    joint = {}
    for xseq in itertools.product(*x_ranges):
        px = 1.0
        for i in range(stages):
            px *= float(source.kernels[i][xseq[: i + 1]])
        if px == 0.0:
            continue
        for yseq in itertools.product(*y_ranges):
            q = 1.0
            for i in range(stages):
                q *= float(family.kernels[i][xseq[: i + 1] + yseq[: i + 1]])
            if q > 0.0:
                joint[(xseq, yseq)] = px * q

    total = 0.0
    for i in range(stages):
        pxy = {}
        pxy_prev = {}
        py = {}
        py_prev = {}
        for (xseq, yseq), pr in joint.items():
            xk, yk = xseq[: i + 1], yseq[: i + 1]
            pxy[(xk, yk)] = pxy.get((xk, yk), 0.0) + pr
            pxy_prev[(xk, yk[:i])] = pxy_prev.get((xk, yk[:i]), 0.0) + pr
            py[yk] = py.get(yk, 0.0) + pr
            py_prev[yk[:i]] = py_prev.get(yk[:i], 0.0) + pr
        for (xk, yk), pr in pxy.items():
            cond_xy = pr / pxy_prev[(xk, yk[:i])]
            cond_y = py[yk] / py_prev[yk[:i]]
            total += pr * math.log(cond_xy / cond_y)
    return total


def chain_distortion_matrix(lam, alpha, P, Q) -> float:
    """End-to-end error trace evaluated from the full covariance matrices."""
    lam = np.asarray(lam, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    enc = np.sqrt(alpha * P / lam)
    dec = np.sqrt(alpha * P * lam) / (P + Q)
    H = np.outer(dec, enc)
    I = np.eye(lam.size)
    err = (I - H) @ np.diag(lam) @ (I - H).T + Q * np.outer(dec, dec)
    return float(np.trace(err))


def alpha_scan(lam_pair, D, P, Q, steps=1_000_000):
    """Dense scan of the two-mode split minimizing the distortion residual.

    Evaluates the matrix-form error trace on a uniform alpha_2 grid and
    returns (alpha_2, residual) at the minimizer.
    """
    lam = np.asarray(lam_pair, dtype=float)
    a2 = np.linspace(0.0, 1.0, steps + 1)
    alpha = np.stack([1.0 - a2, a2], axis=1)  # (N, 2)
    enc = np.sqrt(alpha * P / lam[None, :])
    dec = np.sqrt(alpha * P * lam[None, :]) / (P + Q)
    H = dec[:, :, None] * enc[:, None, :]  # (N, 2, 2)
    I = np.eye(2)[None, :, :]
    A = I - H
    err = np.einsum("nij,j,nkj->nik", A, lam, A) + Q * dec[:, :, None] * dec[:, None, :]
    trace = err[:, 0, 0] + err[:, 1, 1]
    resid = np.abs(trace - D)
    best = int(np.argmin(resid))
    return float(a2[best]), float(resid[best])
