import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import seqrd
from seqrd import diagonalize, innovation_covariance, rate_na, reverse_waterfill
from seqrd.errors import DomainError, StructuralError
from seqrd.sources import scalar_model

lam_lists = st.lists(st.floats(0.01, 50.0), min_size=1, max_size=6)


def test_innovation_covariance_values(memoryless_model):
    assert innovation_covariance([[0.0]], memoryless_model)[0, 0] == pytest.approx(1.0)
    scalar = scalar_model(a=0.5, b=1.0, c=1.0, g=1.0)
    assert innovation_covariance([[3.0]], scalar)[0, 0] == pytest.approx(4.0)
    model = seqrd.StateSpaceModel(
        A=np.eye(2) * 0.5, B=np.eye(2), C=[[1.0, 0.0]], G=[[0.5]],
        x0_mean=[0.0, 0.0], x0_cov=np.eye(2),
    )
    assert innovation_covariance(np.diag([2.0, 5.0]), model)[0, 0] == pytest.approx(2.25)


def test_diagonalize_identity_and_permutation():
    dec = diagonalize(np.eye(3))
    assert np.allclose(dec.eigenvalues, 1.0)
    assert np.allclose(dec.E @ dec.E.T, np.eye(3), atol=1e-12)

    dec = diagonalize(np.diag([1.0, 4.0]))
    assert np.allclose(dec.eigenvalues, [4.0, 1.0])
    assert np.allclose(np.abs(dec.E), [[0, 1], [1, 0]])
    assert dec.E.max() > 0  # positive sign convention


def test_diagonalize_two_by_two_closed_form():
    dec = diagonalize([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(dec.eigenvalues, [3.0, 1.0], atol=1e-12)
    r = 1.0 / math.sqrt(2.0)
    assert np.allclose(dec.E, [[r, r], [r, -r]], atol=1e-12)


def test_diagonalize_rejects_asymmetric():
    with pytest.raises(StructuralError, match="symmetric"):
        diagonalize([[1.0, 0.5], [0.0, 1.0]])


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_diagonalize_round_trip(p, seed):
    rng = np.random.default_rng(seed)
    root = rng.normal(size=(p, p))
    Lam = root @ root.T
    dec = diagonalize(Lam)
    rebuilt = dec.E.T @ np.diag(dec.eigenvalues) @ dec.E
    assert np.max(np.abs(rebuilt - Lam)) <= 1e-9 * max(1.0, np.max(np.abs(Lam)))
    assert np.all(np.diff(dec.eigenvalues) <= 1e-12)
    for row in dec.E:
        assert row[np.argmax(np.abs(row))] > 0


def test_reverse_waterfill_examples():
    alloc = reverse_waterfill([4.0, 1.0], 2.0)
    assert alloc.xi == pytest.approx(1.0)
    assert np.allclose(alloc.delta, [1.0, 1.0])
    assert np.allclose(alloc.eta, [0.75, 0.0])
    assert alloc.active_modes == (0,)

    alloc = reverse_waterfill([4.0, 1.0], 0.5)
    assert alloc.xi == pytest.approx(0.25)
    assert np.allclose(alloc.delta, [0.25, 0.25])
    assert np.allclose(alloc.eta, [0.9375, 0.75])
    assert alloc.k_active == 2
    assert alloc.xi == pytest.approx(0.5 / 2)  # xi = D / k with all modes active

    alloc = reverse_waterfill([3.0], 3.0)
    assert np.allclose(alloc.delta, [3.0])
    assert alloc.eta[0] == 0.0
    assert rate_na(alloc, [3.0]) == 0.0


def test_reverse_waterfill_rejects_bad_inputs():
    with pytest.raises(DomainError):
        reverse_waterfill([1.0], 0.0)
    with pytest.raises(DomainError):
        reverse_waterfill([-1.0], 0.5)


@settings(max_examples=200, deadline=None)
@given(lam_lists, st.floats(0.01, 0.999))
def test_reverse_waterfill_kkt(lam, frac):
    lam = np.array(lam)
    D = frac * float(lam.sum())
    alloc = reverse_waterfill(lam, D)
    assert abs(alloc.delta.sum() - D) <= 1e-10 * max(1.0, D)
    for lam_i, delta_i in zip(lam, alloc.delta):
        # KKT: either the mode is at the water level or fully distorted.
        assert (
            abs(delta_i - alloc.xi) <= 1e-9 * max(1.0, alloc.xi)
            or (abs(delta_i - lam_i) <= 1e-12 * max(1.0, lam_i) and lam_i <= alloc.xi + 1e-9)
        )
    assert np.all(alloc.eta >= 0.0) and np.all(alloc.eta <= 1.0)
    active = set(alloc.active_modes)
    for i, lam_i in enumerate(lam):
        assert (alloc.eta[i] > 0) == (i in active)


@settings(max_examples=100, deadline=None)
@given(lam_lists, st.floats(0.05, 0.95), st.floats(0.01, 100.0))
def test_reverse_waterfill_scale_covariance(lam, frac, scale):
    lam = np.array(lam)
    D = frac * float(lam.sum())
    base = reverse_waterfill(lam, D)
    scaled = reverse_waterfill(scale * lam, scale * D)
    assert scaled.xi == pytest.approx(scale * base.xi, rel=1e-9, abs=1e-12)
    assert np.allclose(scaled.delta, scale * base.delta, rtol=1e-9, atol=1e-12)
    assert np.allclose(scaled.eta, base.eta, rtol=1e-7, atol=1e-9)
    assert rate_na(scaled, scale * lam) == pytest.approx(rate_na(base, lam), rel=1e-9, abs=1e-12)


def test_rate_values():
    lam = [4.0, 1.0]
    assert rate_na(reverse_waterfill(lam, 2.0), lam) == pytest.approx(0.5 * math.log(4.0))
    assert rate_na(reverse_waterfill(lam, 0.5), lam) == pytest.approx(0.5 * math.log(64.0))
    assert rate_na(reverse_waterfill([3.0], 3.0), [3.0]) == 0.0


def test_rdf_curve_memoryless_closed_form(memoryless_model):
    rows = seqrd.rdf_curve(memoryless_model, [0.25])
    assert rows[0]["rate_nats"] == pytest.approx(0.5 * math.log(4.0), abs=1e-12)
    assert rows[0]["k_active"] == 1


def test_rdf_curve_zero_rate_at_full_distortion(memoryless_model):
    rows = seqrd.rdf_curve(memoryless_model, [1.0])
    assert rows[0]["rate_nats"] == 0.0


def test_rdf_curve_monotone_and_convex(ar1_model):
    grid = np.linspace(0.4, 4.0, 9)
    rows = seqrd.rdf_curve(ar1_model, grid)
    rates = np.array([row["rate_nats"] for row in rows])
    assert np.all(np.diff(rates) < 0)
    assert np.all(np.diff(rates, 2) >= -1e-9)
