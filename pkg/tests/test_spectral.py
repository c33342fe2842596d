"""Eigendecomposition, counting and heat-trace sampling checks."""

import math

import numpy as np
import pytest

from spectral_eta import (
    DegenerateSpectrum,
    InvalidTime,
    NotSelfAdjoint,
    eigensolve,
    eta_trace,
    heat_trace,
    kernel_dim,
    relative_trace,
    sample_relative_trace,
    spectral_gap,
)

EXACT_TOL = 1e-14


def test_eigensolve_sorted_and_hermitian_guard():
    rng = np.random.default_rng(1)
    m = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    m = 0.5 * (m + m.conj().T)
    spec = eigensolve(m)
    assert np.all(np.diff(spec.eigenvalues) >= 0.0)
    assert spec.eigenvalues.size == 12
    with pytest.raises(NotSelfAdjoint):
        eigensolve(m + 1e-3 * 1j * np.eye(12))


def test_counts_and_signature():
    spec = eigensolve(np.diag([-2.0, -1.0, 0.0, 0.0, 3.0]))
    assert spec.counts() == (2, 2, 1)
    assert spec.signature() == -1
    assert kernel_dim(spec) == 2


def test_kernel_threshold_scales_with_radius():
    # 1e-9 sits below the default threshold at unit radius, 1e-3 above
    assert eigensolve(np.diag([1e-9, 1.0])).counts()[1] == 1
    assert eigensolve(np.diag([1e-3, 1.0])).counts()[1] == 0


def test_heat_and_eta_trace_closed_forms():
    spec = eigensolve(np.diag([1.0, -2.0]))
    t = 0.7
    want_heat = math.exp(-t) + math.exp(-4.0 * t)
    want_eta = math.exp(-t) - 2.0 * math.exp(-4.0 * t)
    assert heat_trace(spec, t) == pytest.approx(want_heat, abs=EXACT_TOL)
    assert eta_trace(spec, t) == pytest.approx(want_eta, abs=EXACT_TOL)
    # vectorized evaluation matches the scalar one
    grid = np.array([0.3, 0.7, 2.0])
    values = heat_trace(spec, grid)
    assert values.shape == (3,)
    assert values[1] == pytest.approx(want_heat, abs=EXACT_TOL)


def test_relative_trace_conventions():
    s0 = eigensolve(np.diag([1.0, 3.0]))
    s1 = eigensolve(np.diag([2.0, 3.0]))
    t = 0.25
    plain = relative_trace((s0, s1), t, weighted=False)
    weighted = relative_trace((s0, s1), t, weighted=True)
    assert plain == pytest.approx(math.exp(-4.0 * t) - math.exp(-t), abs=EXACT_TOL)
    assert weighted == pytest.approx(
        2.0 * math.exp(-4.0 * t) - math.exp(-t), abs=EXACT_TOL)
    samples = sample_relative_trace((s0, s1), np.array([t]), weighted=True)
    assert samples.values[0] == pytest.approx(weighted, abs=EXACT_TOL)
    assert samples.kind == "relative-eta-weighted"


def test_trace_rejects_nonpositive_time():
    spec = eigensolve(np.diag([1.0, 2.0]))
    with pytest.raises(InvalidTime):
        heat_trace(spec, 0.0)
    with pytest.raises(InvalidTime):
        eta_trace(spec, -1.0)


def test_spectral_gap():
    s0 = eigensolve(np.diag([-0.5, 2.0]))
    s1 = eigensolve(np.diag([0.25, 4.0]))
    assert spectral_gap((s0, s1)) == pytest.approx(0.25, abs=EXACT_TOL)
    zero = eigensolve(np.zeros((3, 3)))
    with pytest.raises(DegenerateSpectrum):
        spectral_gap((zero, zero))
