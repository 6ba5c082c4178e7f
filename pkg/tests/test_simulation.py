import math

import numpy as np
import pytest

from gpcert.errors import DivergenceError
from gpcert.gp import TrainingSet, fit
from gpcert.simulation import (
    ReferenceSpec,
    benchmark_system,
    integrate,
    run_closed_loop,
    sample_prior_function,
)
from gpcert.tracking import closed_loop

from conftest import se_unit


def test_integrate_exponential_decay():
    _, x = integrate(lambda t, x: -x, np.array([1.0]), 1.0, 1e-3)
    assert x[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_integrate_constant_field():
    _, x = integrate(lambda t, x: np.zeros_like(x), np.array([2.0, -1.0]), 5.0, 1e-2)
    np.testing.assert_array_equal(x[-1], [2.0, -1.0])


def test_integrate_fourth_order():
    def err(dt):
        _, x = integrate(lambda t, x: -x, np.array([1.0]), 2.0, dt)
        return abs(x[-1, 0] - math.exp(-2.0))

    ratio = err(0.2) / err(0.1)
    assert 12.0 <= ratio <= 20.0


def test_integrate_harmonic_energy_drift():
    # 100 periods of the unit oscillator at dt = 1e-3
    def osc(t, x):
        return np.array([x[1], -x[0]])

    _, x = integrate(osc, np.array([1.0, 0.0]), 100 * 2 * math.pi, 1e-3)
    energy = 0.5 * (x[:, 0] ** 2 + x[:, 1] ** 2)
    assert np.abs(energy - energy[0]).max() / energy[0] <= 1e-6


@pytest.mark.filterwarnings("ignore:overflow")
def test_integrate_divergence_detected():
    with pytest.raises(DivergenceError) as exc:
        integrate(lambda t, x: x ** 3, np.array([5.0]), 10.0, 0.5)
    assert exc.value.time is not None


def test_benchmark_values():
    f, g, plant = benchmark_system()
    assert f(np.array([0.0, 0.0])) == pytest.approx(1.5)
    assert g(np.array([0.0, 0.0])) == pytest.approx(1.0)
    np.testing.assert_array_equal(plant.A, [[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(plant.b, [0.0, 1.0])


def test_benchmark_partial_derivative_bounds():
    # |df/dx1| <= 2 (attained), |df/dx2| <= 1/4: the basis for L_f = 2
    f, _, _ = benchmark_system()
    xs = np.linspace(-5, 5, 301)
    g1, g2 = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([g1.ravel(), g2.ravel()])
    h = 1e-6
    d1 = (f(pts + [h, 0]) - f(pts - [h, 0])) / (2 * h)
    d2 = (f(pts + [0, h]) - f(pts - [0, h])) / (2 * h)
    assert np.abs(d1).max() <= 2.0 + 1e-6
    assert np.abs(d1).max() >= 1.99
    assert np.abs(d2).max() <= 0.25 + 1e-6


def test_benchmark_input_gain_bounded_away_from_zero():
    _, g, _ = benchmark_system()
    xs = np.linspace(-50, 50, 10001)
    vals = g(np.column_stack([np.zeros_like(xs), xs]))
    assert vals.min() >= 0.5 - 1e-12


def test_reference_examples():
    ref = ReferenceSpec(2.0, 1.0)
    np.testing.assert_allclose(ref.state(0.0), [0.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(ref.state(math.pi / 2), [2.0, 0.0], atol=1e-12)
    assert ref.signal(0.5) == pytest.approx(-2.0 * math.sin(0.5))


def test_reference_consistency_residual():
    # finite-difference x_ref' against A x_ref + b r_ref on a grid
    _, _, plant = benchmark_system()
    ref = ReferenceSpec(2.0, 1.0)
    ts = np.linspace(0.1, 6.0, 60)
    h = 1e-4
    xdot = (ref.state(ts + h) - ref.state(ts - h)) / (2 * h)
    rhs = ref.state(ts) @ plant.A.T + np.outer(ref.signal(ts), plant.b)
    assert np.abs(xdot - rhs).max() <= 1e-8


def test_perfect_model_tracks_exactly():
    _, _, plant = benchmark_system()
    loop = closed_loop(plant, np.array([200.0, 20.0]))
    model = fit(se_unit(2), TrainingSet.empty(2, 0.01))
    zero_f = lambda x: np.zeros(np.asarray(x).shape[:-1])
    sim = run_closed_loop(loop, model, ReferenceSpec(2.0, 1.0), 5.0, 1e-3, 0, zero_f)
    assert sim.error_norms.max() <= 1e-6


def test_noise_free_measurements_reproduce_f():
    f, g, plant = benchmark_system()
    loop = closed_loop(plant, np.array([200.0, 20.0]))
    model = fit(se_unit(2), TrainingSet.empty(2, 0.01))
    sim = run_closed_loop(loop, model, ReferenceSpec(2.0, 1.0), 1.0, 1e-3, 0, f, g, noise_variance=0.0)
    np.testing.assert_allclose(sim.measurements.targets, f(sim.states), atol=1e-14)


def test_measurement_count_and_grid():
    f, g, plant = benchmark_system()
    loop = closed_loop(plant, np.array([200.0, 20.0]))
    model = fit(se_unit(2), TrainingSet.empty(2, 0.01))
    T, dt = 3.0, 1e-3
    sim = run_closed_loop(loop, model, ReferenceSpec(2.0, 1.0), T, dt, 1, f, g, noise_variance=0.01)
    assert len(sim.measurements) == int(math.floor(1 + T / dt + 1e-9))
    steps = np.diff(sim.times)
    assert steps.max() - steps.min() <= 1e-12


def test_measurement_noise_variance():
    f, g, plant = benchmark_system()
    loop = closed_loop(plant, np.array([200.0, 20.0]))
    model = fit(se_unit(2), TrainingSet.empty(2, 0.01))
    sim = run_closed_loop(loop, model, ReferenceSpec(2.0, 1.0), 2.0, 1e-3, 7, f, g, noise_variance=0.01)
    resid = sim.measurements.targets - f(sim.states)
    assert len(resid) >= 1000
    assert resid.var() == pytest.approx(0.01, rel=0.10)


def test_run_determinism():
    f, g, plant = benchmark_system()
    loop = closed_loop(plant, np.array([200.0, 20.0]))
    model = fit(se_unit(2), TrainingSet.empty(2, 0.01))
    a = run_closed_loop(loop, model, ReferenceSpec(2.0, 1.0), 1.0, 1e-3, 42, f, g, noise_variance=0.01)
    b = run_closed_loop(loop, model, ReferenceSpec(2.0, 1.0), 1.0, 1e-3, 42, f, g, noise_variance=0.01)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.measurements.targets, b.measurements.targets)


def test_prior_sampling_statistics():
    spec = se_unit()
    grid = np.array([[0.0]])
    draws = np.array([sample_prior_function(spec, grid, s)[0] for s in range(10000)])
    assert draws.var() == pytest.approx(1.0, rel=0.05)
    assert abs(draws.mean()) <= 3.0 / math.sqrt(10000)
    two = np.array([[0.0], [10.0]])
    pairs = np.array([sample_prior_function(spec, two, s) for s in range(10000)])
    corr = np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1]
    assert abs(corr) <= 0.05
