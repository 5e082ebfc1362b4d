import math

import numpy as np
import pytest

from seqrd import discrete
from seqrd.discrete import (
    CausalKernelFamily,
    FiniteSource,
    directed_information,
    iid_source,
    marginal_update,
    optimal_kernel_update,
    solve_nrdf,
)
from seqrd.errors import DomainError, InstanceTooLargeError, StructuralError

from oracles import binary_hamming_rate, classical_ba_rate, directed_information_bruteforce

HAMMING = [[0.0, 1.0], [1.0, 0.0]]


def binary_source(stages=1, p0=0.5):
    return iid_source([p0, 1.0 - p0], HAMMING, stages=stages)


def random_family(source, rng):
    kernels = []
    for i in range(source.horizon):
        shape = source.x_sizes[: i + 1] + source.y_sizes[:i] + (source.y_sizes[i],)
        raw = rng.uniform(0.05, 1.0, size=shape)
        kernels.append(raw / raw.sum(axis=-1, keepdims=True))
    return CausalKernelFamily(kernels=tuple(kernels))


def test_source_validation():
    with pytest.raises(StructuralError, match="sum to 1"):
        FiniteSource(x_sizes=(2,), y_sizes=(2,), kernels=(np.array([0.6, 0.6]),), rho=(np.array(HAMMING),))
    with pytest.raises(StructuralError, match="negative"):
        FiniteSource(x_sizes=(2,), y_sizes=(2,), kernels=(np.array([0.5, 0.5]),),
                     rho=(np.array([[0.0, -1.0], [1.0, 0.0]]),))


def test_directed_information_zero_when_ignoring_source():
    src = binary_source()
    marginal = np.array([0.3, 0.7])
    family = CausalKernelFamily(kernels=(np.broadcast_to(marginal, (2, 2)).copy(),))
    assert directed_information(src, family) == 0.0


def test_directed_information_copy_channel():
    src = binary_source()
    family = CausalKernelFamily(kernels=(np.eye(2),))
    assert directed_information(src, family) == pytest.approx(math.log(2.0), abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_directed_information_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    # two stages, asymmetric source with memory
    k0 = np.array([0.3, 0.7])
    k1 = rng.uniform(0.1, 1.0, size=(2, 2))
    k1 /= k1.sum(axis=-1, keepdims=True)
    src = FiniteSource(x_sizes=(2, 2), y_sizes=(2, 2), kernels=(k0, k1),
                       rho=(np.array(HAMMING),) * 2)
    family = random_family(src, rng)
    fast = directed_information(src, family)
    slow = directed_information_bruteforce(src, family)
    assert fast == pytest.approx(slow, abs=1e-12)


def test_marginal_update_uniform_copy():
    src = binary_source()
    family = CausalKernelFamily(kernels=(np.eye(2),))
    (marginal,) = marginal_update(src, family)
    assert np.allclose(marginal, [0.5, 0.5])


def test_marginal_update_matches_bruteforce_conditional():
    rng = np.random.default_rng(9)
    src = FiniteSource(
        x_sizes=(2, 2), y_sizes=(2, 2),
        kernels=(np.array([0.25, 0.75]), np.array([[0.6, 0.4], [0.2, 0.8]])),
        rho=(np.array(HAMMING),) * 2,
    )
    family = random_family(src, rng)
    marginals = marginal_update(src, family)
    # stage-1 conditional marginal from the brute-force joint
    import itertools

    joint = {}
    for x0, x1, y0, y1 in itertools.product(range(2), repeat=4):
        pr = (src.kernels[0][x0] * src.kernels[1][x0, x1]
              * family.kernels[0][x0, y0] * family.kernels[1][x0, x1, y0, y1])
        joint[(x0, x1, y0, y1)] = pr
    for y0 in range(2):
        py0 = sum(pr for (a, b, yy0, c), pr in joint.items() if yy0 == y0)
        for y1 in range(2):
            py01 = sum(pr for (a, b, yy0, yy1), pr in joint.items() if yy0 == y0 and yy1 == y1)
            assert marginals[1][y0, y1] == pytest.approx(py01 / py0, abs=1e-12)


def test_kernel_update_values():
    src = binary_source()
    family = optimal_kernel_update(src, [np.array([0.5, 0.5])], -1.0)
    expect = 1.0 / (1.0 + math.exp(-1.0))
    assert family.kernels[0][0, 0] == pytest.approx(expect, abs=1e-12)
    assert family.kernels[0][1, 1] == pytest.approx(expect, abs=1e-12)


def test_kernel_update_softmin_limit():
    src = binary_source()
    family = optimal_kernel_update(src, [np.array([0.5, 0.5])], -200.0)
    assert family.kernels[0][0, 0] == pytest.approx(1.0, abs=1e-12)


def test_kernel_update_s_zero_is_identity_on_marginals():
    src = binary_source(stages=2)
    marginals = [np.array([0.4, 0.6]), np.array([[0.3, 0.7], [0.8, 0.2]])]
    family = optimal_kernel_update(src, marginals, 0.0)
    back = marginal_update(src, family)
    for a, b in zip(back, marginals):
        assert np.allclose(a, b, atol=1e-12)


def test_kernel_update_rejects_zero_marginal_row():
    src = binary_source()
    with pytest.raises(StructuralError, match="all-zero"):
        optimal_kernel_update(src, [np.array([0.0, 0.0])], -1.0)


def test_solve_matches_classical_oracle_and_closed_form():
    src = binary_source()
    for D in (0.05, 0.1, 0.25, 0.45):
        sol = solve_nrdf(src, D)
        assert sol.rate_nats == pytest.approx(binary_hamming_rate(D), abs=1e-7)
        assert sol.rate_nats == pytest.approx(classical_ba_rate([0.5, 0.5], HAMMING, D), abs=1e-6)
        assert sol.rate_nats == pytest.approx(sol.rate_parametric_nats, abs=1e-8)
        assert abs(sol.distortion - D) <= 1e-8
        assert sol.s <= 0.0


def test_solve_zero_rate_region():
    src = binary_source()
    sol = solve_nrdf(src, 0.75)
    assert sol.rate_nats == 0.0
    assert sol.distortion <= 0.75


def test_solve_iid_horizon_matches_single_stage():
    single = solve_nrdf(binary_source(stages=1), 0.15)
    double = solve_nrdf(binary_source(stages=2), 0.15)
    assert double.rate_per_step_nats == pytest.approx(single.rate_nats, abs=1e-7)
    assert abs(double.distortion - 0.15) <= 1e-8


def test_solve_rejects_unachievable_distortion():
    src = FiniteSource(
        x_sizes=(2,), y_sizes=(2,),
        kernels=(np.array([0.5, 0.5]),),
        rho=(np.array([[1.0, 2.0], [2.0, 1.0]]),),  # min achievable is 1.0
    )
    with pytest.raises(DomainError, match="below minimum"):
        solve_nrdf(src, 0.5)


def test_instance_cap():
    src = iid_source(np.full(10, 0.1), np.ones((10, 10)) - np.eye(10), stages=4)
    with pytest.raises(InstanceTooLargeError, match="too large"):
        solve_nrdf(src, 0.5)


def test_distortion_monotone_in_s():
    src = binary_source(stages=2)
    dists = []
    for s in (-8.0, -4.0, -2.0, -1.0, -0.5, -0.1):
        marginals = discrete._uniform_marginals(src)
        family, marginals, _ = discrete._alternate(src, s, marginals)
        dists.append(discrete.expected_distortion(src, family))
    assert all(b >= a - 1e-12 for a, b in zip(dists, dists[1:]))


def test_directed_information_convex_under_stagewise_mixtures():
    rng = np.random.default_rng(2024)
    violations = 0.0
    for _ in range(50):
        stages = int(rng.integers(1, 3))
        k0 = np.array([0.5, 0.5]) if rng.random() < 0.5 else np.array([0.3, 0.7])
        src = iid_source(k0, HAMMING, stages=stages)
        qa, qb = random_family(src, rng), random_family(src, rng)
        ia, ib = directed_information(src, qa), directed_information(src, qb)
        for theta in (0.25, 0.5, 0.75):
            mixed = qa.mixed_with(qb, theta)
            i_mix = directed_information(src, mixed)
            violations = max(violations, i_mix - (theta * ia + (1 - theta) * ib))
    assert violations <= 1e-9


def test_markov_in_source_property():
    sol = solve_nrdf(binary_source(stages=3), 0.2)
    assert discrete.markov_in_source_deviation(sol.kernels, binary_source(stages=3)) <= 1e-8


def test_instance_json_round_trip(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(
        '{"horizon": 2, "x_sizes": [2, 2], "y_sizes": [2, 2],'
        ' "source": [[0.5, 0.5], [[0.9, 0.1], [0.2, 0.8]]],'
        ' "rho": [[0.0, 1.0], [1.0, 0.0]]}'
    )
    src = discrete.load_instance(path)
    assert src.horizon == 2
    assert src.kernels[1][0, 0] == 0.9
    sol = solve_nrdf(src, 0.2)
    assert sol.rate_nats > 0
