"""Finite-alphabet causal rate-distortion by exact enumeration.

Validator-scale instantiation of the theory: directed information is computed
from the fully enumerated joint distribution, the optimal causal reproduction
kernel is found by alternating the exponential-tilt update with exact
marginalization, and an outer bisection on the tilt parameter s <= 0 hits the
distortion budget.

Tensor conventions (fixed lexicographic axis order for reproducibility):
  joint at stage i:        axes (x_0..x_i, y_0..y_i)
  source kernel, stage i:  axes (x_0..x_i)            rows over x_i sum to 1
  repro kernel, stage i:   axes (x_0..x_i, y_0..y_{i-1}, y_i)
  marginal, stage i:       axes (y_0..y_{i-1}, y_i)
"""

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import DomainError, InstanceTooLargeError, NonconvergenceError, StructuralError

DEFAULT_ATOM_CAP = 10**7
_ROW_TOL = 1e-12


@dataclass(frozen=True)
class FiniteSource:
    """Causal source kernels P(x_i | x^{i-1}) plus per-stage distortions."""

    x_sizes: tuple
    y_sizes: tuple
    kernels: tuple  # stage i: array over (x_0..x_i)
    rho: tuple  # stage i: nonnegative (x_sizes[i], y_sizes[i]) matrix

    def __post_init__(self):
        object.__setattr__(self, "x_sizes", tuple(int(s) for s in self.x_sizes))
        object.__setattr__(self, "y_sizes", tuple(int(s) for s in self.y_sizes))
        object.__setattr__(self, "kernels", tuple(np.asarray(k, dtype=float) for k in self.kernels))
        object.__setattr__(self, "rho", tuple(np.asarray(r, dtype=float) for r in self.rho))
        n = len(self.x_sizes)
        if n == 0:
            raise StructuralError("source must have at least one stage")
        if len(self.y_sizes) != n or len(self.kernels) != n or len(self.rho) != n:
            raise StructuralError("x_sizes, y_sizes, kernels, rho must share one length")
        if any(s < 1 for s in self.x_sizes) or any(s < 1 for s in self.y_sizes):
            raise StructuralError("alphabet sizes must be positive")
        for i, kernel in enumerate(self.kernels):
            want = self.x_sizes[: i + 1]
            if kernel.shape != want:
                raise StructuralError(f"source kernel {i}: shape {kernel.shape}, expected {want}")
            rows = kernel.sum(axis=-1)
            if np.max(np.abs(rows - 1.0)) > _ROW_TOL:
                raise StructuralError(f"source kernel {i}: rows do not sum to 1")
            if np.any(kernel < 0):
                raise StructuralError(f"source kernel {i}: negative probability")
        for i, r in enumerate(self.rho):
            want = (self.x_sizes[i], self.y_sizes[i])
            if r.shape != want:
                raise StructuralError(f"distortion matrix {i}: shape {r.shape}, expected {want}")
            if np.any(r < 0):
                raise StructuralError(f"distortion matrix {i}: negative entries")

    @property
    def horizon(self) -> int:
        """Number of stages (n + 1)."""
        return len(self.x_sizes)

    @property
    def joint_atoms(self) -> int:
        return int(np.prod(self.x_sizes)) * int(np.prod(self.y_sizes))


@dataclass(frozen=True)
class CausalKernelFamily:
    """Reproduction kernels Q(y_i | y^{i-1}, x^i), one stochastic tensor per stage."""

    kernels: tuple

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(np.asarray(k, dtype=float) for k in self.kernels))
        for i, kernel in enumerate(self.kernels):
            rows = kernel.sum(axis=-1)
            if np.max(np.abs(rows - 1.0)) > _ROW_TOL:
                raise StructuralError(f"reproduction kernel {i}: rows do not sum to 1")
            if np.any(kernel < -1e-15):
                raise StructuralError(f"reproduction kernel {i}: negative probability")

    def __len__(self) -> int:
        return len(self.kernels)

    def mixed_with(self, other: "CausalKernelFamily", theta: float) -> "CausalKernelFamily":
        """Stagewise convex mixture theta * self + (1 - theta) * other."""
        mixed = tuple(
            theta * a + (1.0 - theta) * b for a, b in zip(self.kernels, other.kernels)
        )
        return CausalKernelFamily(kernels=mixed)


def iid_source(px, rho, stages: int) -> FiniteSource:
    """Memoryless source with one-letter marginal px repeated `stages` times."""
    px = np.asarray(px, dtype=float)
    rho = np.asarray(rho, dtype=float)
    nx, ny = rho.shape
    kernels = []
    for i in range(stages):
        kernels.append(np.broadcast_to(px, (nx,) * (i + 1)).copy() if i else px.copy())
    return FiniteSource(
        x_sizes=(nx,) * stages,
        y_sizes=(ny,) * stages,
        kernels=tuple(kernels),
        rho=(rho,) * stages,
    )


def _check_cap(source: FiniteSource, atom_cap: int) -> None:
    if source.joint_atoms > atom_cap:
        raise InstanceTooLargeError(
            f"instance too large: {source.joint_atoms} joint atoms exceed cap {atom_cap}"
        )


def _check_shapes(source: FiniteSource, family: CausalKernelFamily) -> None:
    if len(family) != source.horizon:
        raise StructuralError(
            f"kernel family has {len(family)} stages, source has {source.horizon}"
        )
    for i, kernel in enumerate(family.kernels):
        want = source.x_sizes[: i + 1] + source.y_sizes[:i] + (source.y_sizes[i],)
        if kernel.shape != want:
            raise StructuralError(
                f"reproduction kernel {i}: shape {kernel.shape}, expected {want}"
            )


def _forward(source: FiniteSource, family: CausalKernelFamily):
    """Enumerate the joint stage by stage.

    Yields per stage: (joint_before, joint_after, marginal) where joint_before
    has axes (x^i, y^{i-1}), joint_after has axes (x^i, y^i) and marginal is
    the conditional P(y_i | y^{i-1}) with unreachable histories left uniform.
    """
    joint = None  # axes (x^{i-1}, y^{i-1})
    for i in range(source.horizon):
        if i == 0:
            before = source.kernels[0]
        else:
            expanded = np.expand_dims(joint, axis=i)
            src = source.kernels[i].reshape(source.x_sizes[: i + 1] + (1,) * i)
            before = expanded * src
        after = before[..., None] * family.kernels[i]
        x_axes = tuple(range(i + 1))
        y_joint = after.sum(axis=x_axes)  # axes (y^{i-1}, y_i)
        y_hist = y_joint.sum(axis=-1)
        ny = source.y_sizes[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            marginal = np.where(
                y_hist[..., None] > 0, y_joint / np.where(y_hist[..., None] > 0, y_hist[..., None], 1.0), 1.0 / ny
            )
        yield before, after, marginal
        joint = after


def marginal_update(source: FiniteSource, family: CausalKernelFamily, atom_cap: int = DEFAULT_ATOM_CAP):
    """Exact conditional marginals P(y_i | y^{i-1}) induced by the kernels."""
    _check_cap(source, atom_cap)
    _check_shapes(source, family)
    return [marginal for _, _, marginal in _forward(source, family)]


def directed_information(
    source: FiniteSource, family: CausalKernelFamily, atom_cap: int = DEFAULT_ATOM_CAP
) -> float:
    """Sum of conditional mutual informations I(X^i; Y_i | Y^{i-1}) in nats.

    Computed by exact enumeration of the joint distribution; 0 log(0/q) is
    treated as 0.
    """
    _check_cap(source, atom_cap)
    _check_shapes(source, family)
    total = 0.0
    for i, (_, after, marginal) in enumerate(_forward(source, family)):
        kernel = family.kernels[i]
        m_full = np.broadcast_to(
            marginal.reshape((1,) * (i + 1) + marginal.shape), after.shape
        )
        mask = after > 0
        logk = np.log(kernel, where=mask, out=np.zeros_like(after))
        logm = np.log(m_full, where=mask, out=np.zeros_like(after))
        total += float(np.sum(after * (logk - logm), where=mask, initial=0.0))
    return max(total, 0.0)


def optimal_kernel_update(source: FiniteSource, marginals, s: float) -> CausalKernelFamily:
    """Exponential tilt of the marginals by the per-letter distortion.

    Q(y_i | y^{i-1}, x^i) = e^{s rho(x_i, y_i)} m(y_i | y^{i-1}) / Z(x_i, y^{i-1})
    evaluated in the log domain with max subtraction.  Depends on x^i only
    through x_i, so the reproduction is Markov in the source.
    """
    if s > 0:
        raise DomainError(f"tilt parameter must be nonpositive, got {s}")
    kernels = []
    for i in range(source.horizon):
        marginal = np.asarray(marginals[i], dtype=float)
        if np.any(marginal.sum(axis=-1) <= 0):
            raise StructuralError(f"marginal {i} has an all-zero row")
        with np.errstate(divide="ignore"):
            logm = np.log(marginal)
        # logits over (x_i, y^{i-1}, y_i)
        tilt = (s * source.rho[i]).reshape(
            (source.x_sizes[i],) + (1,) * i + (source.y_sizes[i],)
        )
        logits = tilt + logm[None, ...]
        peak = logits.max(axis=-1, keepdims=True)
        probs = np.exp(logits - peak)
        probs /= probs.sum(axis=-1, keepdims=True)
        full_shape = source.x_sizes[: i + 1] + source.y_sizes[:i] + (source.y_sizes[i],)
        reduced_shape = (1,) * i + probs.shape
        kernels.append(np.broadcast_to(probs.reshape(reduced_shape), full_shape).copy())
    return CausalKernelFamily(kernels=tuple(kernels))


def _stage_x_marginals(source: FiniteSource):
    """P(x_i) for each stage from the source kernels alone."""
    out = []
    joint = None
    for i in range(source.horizon):
        if i == 0:
            joint = source.kernels[0]
        else:
            joint = joint[..., None] * source.kernels[i]
        out.append(joint.reshape(-1, source.x_sizes[i]).sum(axis=0))
    return out


def distortion_bounds(source: FiniteSource):
    """(d_min, d_zero): tightest achievable distortion and zero-rate distortion."""
    px = _stage_x_marginals(source)
    dmin = 0.0
    dzero = 0.0
    for i in range(source.horizon):
        dmin += float(px[i] @ source.rho[i].min(axis=1))
        dzero += float((px[i] @ source.rho[i]).min())
    n = source.horizon
    return dmin / n, dzero / n


def expected_distortion(source: FiniteSource, family: CausalKernelFamily) -> float:
    """Average per-step distortion E[(1/(n+1)) sum rho(x_i, y_i)]."""
    total = 0.0
    for i, (_, after, _) in enumerate(_forward(source, family)):
        # collapse to (x_i, y_i)
        flat = np.moveaxis(after, (i, after.ndim - 1), (0, 1))
        pxy = flat.reshape(source.x_sizes[i], source.y_sizes[i], -1).sum(axis=-1)
        total += float(np.sum(pxy * source.rho[i]))
    return total / source.horizon


def parametric_rate(source: FiniteSource, marginals, s: float, distortion: float) -> float:
    """Closed-form rate at tilt s: (n+1) s d - sum_i E[log Z_i] in nats."""
    family = optimal_kernel_update(source, marginals, s)
    total = source.horizon * s * distortion
    for i, (before, _, _) in enumerate(_forward(source, family)):
        marginal = np.asarray(marginals[i], dtype=float)
        tilt = np.exp(s * source.rho[i])  # (x_i, y_i)
        # Z(x_i, y^{i-1}) = sum_{y_i} e^{s rho} m(y_i | y^{i-1})
        Z = np.tensordot(tilt, marginal, axes=([1], [marginal.ndim - 1]))
        # Z axes: (x_i, y^{i-1}); expand to match `before` axes (x^i, y^{i-1})
        Z_b = Z.reshape((1,) * i + (source.x_sizes[i],) + marginal.shape[:-1])
        mask = before > 0
        total -= float(np.sum(before * np.log(np.broadcast_to(Z_b, before.shape), where=mask, out=np.zeros_like(before)), where=mask, initial=0.0))
    return max(total, 0.0)


@dataclass(frozen=True)
class NrdfSolution:
    """Converged kernels with tilt s, rate (total nats) and achieved distortion."""

    kernels: CausalKernelFamily
    marginals: tuple
    s: float
    rate_nats: float
    rate_parametric_nats: float
    distortion: float
    stages: int
    sweeps: int

    @property
    def rate_per_step_nats(self) -> float:
        return self.rate_nats / self.stages


def _alternate(source, s, marginals, tol=1e-10, max_sweeps=100_000):
    """Alternate kernel/marginal updates at fixed s until the marginals settle."""
    family = None
    for sweep in range(max_sweeps):
        family = optimal_kernel_update(source, marginals, s)
        new_marginals = marginal_update(source, family)
        delta = max(
            float(np.max(np.abs(a - b))) for a, b in zip(new_marginals, marginals)
        )
        marginals = new_marginals
        if delta <= tol:
            return family, marginals, sweep + 1
    raise NonconvergenceError(
        f"alternating minimization not converged in {max_sweeps} sweeps "
        f"(last change {delta:.3g})",
        residual=delta,
        iterations=max_sweeps,
    )


def _uniform_marginals(source: FiniteSource):
    out = []
    for i in range(source.horizon):
        shape = source.y_sizes[:i] + (source.y_sizes[i],)
        out.append(np.full(shape, 1.0 / source.y_sizes[i]))
    return out


def solve_nrdf(
    source: FiniteSource,
    D: float,
    atom_cap: int = DEFAULT_ATOM_CAP,
    inner_tol: float = 1e-10,
    max_sweeps: int = 100_000,
    distortion_tol: float = 1e-10,
) -> NrdfSolution:
    """Causal rate-distortion solution at average distortion D.

    For fixed s <= 0 the kernel/marginal alternation converges to the tilted
    fixed point; an outer bisection on s matches the achieved distortion to D.
    The rate is reported both as enumerated directed information and through
    the parametric closed form; the two agree at the fixed point.
    """
    _check_cap(source, atom_cap)
    if D <= 0:
        raise DomainError(f"distortion budget must be positive, got {D}")
    dmin, dzero = distortion_bounds(source)
    if D < dmin - 1e-12:
        raise DomainError(f"distortion {D} below minimum achievable {dmin:.12g}")

    n = source.horizon
    if D >= dzero - 1e-12:
        # Zero rate: per-stage constant reproduction at the best letter.
        px = _stage_x_marginals(source)
        kernels = []
        marginals = []
        for i in range(n):
            best = int(np.argmin(px[i] @ source.rho[i]))
            row = np.zeros(source.y_sizes[i])
            row[best] = 1.0
            shape = source.x_sizes[: i + 1] + source.y_sizes[:i] + (source.y_sizes[i],)
            kernels.append(np.broadcast_to(row, shape).copy())
            marginals.append(np.broadcast_to(row, source.y_sizes[:i] + (source.y_sizes[i],)).copy())
        family = CausalKernelFamily(kernels=tuple(kernels))
        return NrdfSolution(
            kernels=family,
            marginals=tuple(marginals),
            s=0.0,
            rate_nats=0.0,
            rate_parametric_nats=0.0,
            distortion=dzero,
            stages=n,
            sweeps=0,
        )

    marginals = _uniform_marginals(source)

    def evaluate(s, warm):
        family, converged, sweeps = _alternate(
            source, s, warm, tol=inner_tol, max_sweeps=max_sweeps
        )
        dist = expected_distortion(source, family)
        return family, converged, sweeps, dist

    # Bracket: distortion is nondecreasing in s; find s_lo with dist <= D.
    s_lo = -1.0
    family, marginals, sweeps, dist_lo = evaluate(s_lo, marginals)
    expansions = 0
    while dist_lo > D and expansions < 60:
        s_lo *= 2.0
        family, marginals, sweeps, dist_lo = evaluate(s_lo, marginals)
        expansions += 1
    if dist_lo > D + distortion_tol:
        raise NonconvergenceError(
            f"could not bracket distortion {D} (floor reached {dist_lo:.12g})",
            residual=dist_lo - D,
        )

    s_hi = 0.0  # dist(0-) -> dzero > D
    best = (s_lo, family, marginals, sweeps, dist_lo)
    total_sweeps = sweeps
    for _ in range(200):
        if abs(best[4] - D) <= distortion_tol:
            break
        s_mid = 0.5 * (s_lo + s_hi)
        if s_hi - s_lo <= 1e-15 * max(1.0, abs(s_lo)):
            break
        family, marginals, sweeps, dist = evaluate(s_mid, marginals)
        total_sweeps += sweeps
        if abs(dist - D) < abs(best[4] - D):
            best = (s_mid, family, marginals, sweeps, dist)
        if dist < D:
            s_lo = s_mid
        else:
            s_hi = s_mid

    s, family, marginals, _, dist = best
    if abs(dist - D) > 1e-8:
        raise NonconvergenceError(
            f"bisection on s missed distortion {D} (achieved {dist:.12g})",
            residual=abs(dist - D),
        )
    rate = directed_information(source, family, atom_cap=atom_cap)
    rate_param = parametric_rate(source, marginals, s, dist)
    return NrdfSolution(
        kernels=family,
        marginals=tuple(marginals),
        s=s,
        rate_nats=rate,
        rate_parametric_nats=rate_param,
        distortion=dist,
        stages=n,
        sweeps=total_sweeps,
    )


def markov_in_source_deviation(family: CausalKernelFamily, source: FiniteSource) -> float:
    """Largest total-variation dependence of any stage kernel on x^{i-1}.

    A single-letter-distortion optimum must not depend on past source letters
    once (x_i, y^{i-1}) is fixed.
    """
    worst = 0.0
    for i, kernel in enumerate(family.kernels):
        if i == 0:
            continue
        hist = int(np.prod(source.x_sizes[:i]))
        rest = kernel.reshape((hist,) + kernel.shape[i:])
        tv = 0.5 * np.sum(np.abs(rest - rest[:1]), axis=-1)
        worst = max(worst, float(tv.max()))
    return worst


def load_instance(path) -> FiniteSource:
    """Read a finite-source instance JSON document."""
    doc = jsonio.load(path)
    for key in ("x_sizes", "y_sizes", "source", "rho"):
        if key not in doc:
            raise StructuralError(f"instance file missing key: {key}")
    x_sizes = tuple(int(v) for v in doc["x_sizes"])
    y_sizes = tuple(int(v) for v in doc["y_sizes"])
    stages = int(doc.get("horizon", len(x_sizes)))
    if stages != len(x_sizes):
        raise StructuralError("horizon does not match the number of alphabet sizes")
    kernels = []
    for i, stage in enumerate(doc["source"]):
        arr = np.array(stage, dtype=float)
        if arr.dtype == object:
            raise StructuralError(f"source kernel {i}: ragged array")
        kernels.append(arr)
    rho_doc = doc["rho"]
    if isinstance(rho_doc[0][0], list):
        rho = tuple(jsonio.as_matrix(r, f"rho[{i}]") for i, r in enumerate(rho_doc))
    else:
        rho = (jsonio.as_matrix(rho_doc, "rho"),) * stages
    return FiniteSource(x_sizes=x_sizes, y_sizes=y_sizes, kernels=tuple(kernels), rho=rho)


def solution_to_dict(solution: NrdfSolution, D: float) -> dict:
    return {
        "D": D,
        "s": solution.s,
        "rate_nats": solution.rate_nats,
        "rate_per_step_nats": solution.rate_per_step_nats,
        "rate_parametric_nats": solution.rate_parametric_nats,
        "distortion": solution.distortion,
        "kernels": list(solution.kernels.kernels),
    }
