import math

import numpy as np
import pytest

from ssaid.core import sample_std
from ssaid.simulate import (
    FamilySpec,
    NoiseSpec,
    SseSignalSpec,
    _LOGISTIC_K,
    add_noise,
    generate,
    generate_family,
    generate_sse_like,
    sse_benchmark_spec,
    two_sse_equal_spec,
    two_sse_unequal_spec,
)


class TestSseGenerator:
    def test_no_events_is_straight_line(self):
        signal, truth = generate_sse_like(
            SseSignalSpec(length_days=100, n_events=0, inter_event_slope=1.0)
        )
        assert truth.count == 0
        d2 = np.diff(signal.values, n=2)
        assert np.max(np.abs(d2)) < 1e-12

    def test_benchmark_geometry(self):
        signal, truth = generate_sse_like(sse_benchmark_spec())
        assert len(signal) == 365
        assert truth.count == 10
        starts = truth.locations[0::2]
        ends = truth.locations[1::2]
        assert all(e - s == 7 for s, e in zip(starts, ends))
        assert all(b - a == 74 for a, b in zip(starts, starts[1:]))

    def test_output_is_normalized(self):
        signal, _ = generate_sse_like(sse_benchmark_spec())
        assert abs(signal.values.mean()) < 1e-12
        assert abs(sample_std(signal.values) - 1.0) < 1e-12

    def test_amplitude_ratio_preserved(self):
        spec = two_sse_unequal_spec()
        signal, truth = generate_sse_like(spec)
        f = signal.values
        jumps = []
        for start, end in zip(truth.locations[0::2], truth.locations[1::2]):
            slope = f[start] - f[start - 1]  # exactly linear outside events
            jumps.append(f[start] + slope * (end - start) - f[end])
        assert jumps[1] / jumps[0] == pytest.approx(5.0, rel=0.02)

    def test_linear_outside_events(self):
        signal, truth = generate_sse_like(sse_benchmark_spec())
        d2 = np.diff(signal.values, n=2)
        inside = np.zeros(len(signal), dtype=bool)
        for start, end in zip(truth.locations[0::2], truth.locations[1::2]):
            inside[start : end + 1] = True
        outside_centers = ~(inside[:-2] | inside[1:-1] | inside[2:])
        assert np.max(np.abs(d2[outside_centers])) < 1e-12

    def test_continuity(self):
        spec = sse_benchmark_spec()
        signal, _ = generate_sse_like(spec)
        # Analytic slope bound: background plus the steepest ramp slope,
        # rescaled into normalized units via the raw signal's std.
        g0 = 1.0 / (1.0 + math.exp(_LOGISTIC_K / 2.0))
        ramp_peak = _LOGISTIC_K / 4.0 / (1.0 - 2.0 * g0)
        amp = spec.amplitudes()[0]
        max_slope = abs(spec.inter_event_slope) + amp * ramp_peak / spec.event_duration
        t = np.arange(spec.length_days, dtype=float)
        raw = spec.inter_event_slope * t
        from ssaid.simulate import _ramp

        for start, a in zip(spec.event_starts(), spec.amplitudes()):
            raw = raw - a * _ramp((t - start) / spec.event_duration, spec.ramp_shape)
        std = sample_std(raw)
        assert np.max(np.abs(np.diff(signal.values))) <= 1.5 * max_slope / std

    def test_ramp_shapes(self):
        for shape in ("smooth-sigmoid", "quadratic-ease", "linear"):
            spec = SseSignalSpec(
                length_days=120, n_events=1, event_duration=10,
                recurrence=60, ramp_shape=shape,
            )
            signal, truth = generate_sse_like(spec)
            assert truth.locations == (30, 40)

    def test_truth_interior_and_sorted(self):
        _, truth = generate_sse_like(two_sse_equal_spec())
        locs = truth.locations
        assert all(b > a for a, b in zip(locs, locs[1:]))
        assert locs[0] >= 1

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            SseSignalSpec(n_events=2, event_duration=80, recurrence=74)
        with pytest.raises(ValueError):
            SseSignalSpec(length_days=200, n_events=5, recurrence=74)
        with pytest.raises(ValueError):
            generate_sse_like(
                SseSignalSpec(length_days=100, n_events=2, event_duration=30, recurrence=50)
            )
        with pytest.raises(ValueError):
            SseSignalSpec(ramp_shape="bounce")
        with pytest.raises(ValueError):
            SseSignalSpec(n_events=2, event_amplitudes=(1.0,))


class TestAddNoise:
    def test_zero_noise_identity(self):
        signal, _ = generate_sse_like(sse_benchmark_spec())
        out = add_noise(signal, NoiseSpec(0.0, seed=5))
        assert np.array_equal(out.values, signal.values)

    def test_noise_level_matches(self):
        signal, _ = generate_sse_like(sse_benchmark_spec())
        out = add_noise(signal, NoiseSpec(0.4, seed=6))
        measured = np.std(out.values - signal.values)
        assert abs(measured - 0.4) / 0.4 < 0.05

    def test_noise_is_centered(self):
        signal, _ = generate_sse_like(sse_benchmark_spec())
        out = add_noise(signal, NoiseSpec(0.4, seed=7))
        resid = out.values - signal.values
        assert abs(resid.mean()) < 3.0 * 0.4 / math.sqrt(len(signal))

    def test_seed_determinism(self):
        signal, _ = generate_sse_like(sse_benchmark_spec())
        a = add_noise(signal, NoiseSpec(0.3, seed=8))
        b = add_noise(signal, NoiseSpec(0.3, seed=8))
        c = add_noise(signal, NoiseSpec(0.3, seed=9))
        assert np.array_equal(a.values, b.values)
        assert np.all(a.values != c.values)

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(-0.1)


class TestFamilies:
    def test_tent(self):
        signal, truth = generate_family(
            "piecewise-linear", length=100, knots=[50], slopes=[1.0, -1.0]
        )
        assert truth.locations == (50,)
        assert signal.values[50] == pytest.approx(50.0)
        assert signal.values[99] == pytest.approx(1.0)

    def test_quadratic_curvature_flips_at_knot(self):
        signal, truth = generate_family(
            "piecewise-quadratic",
            length=100,
            knots=[40],
            curvatures=[0.02, -0.02],
            initial_slope=0.0,
        )
        d2 = np.diff(signal.values, n=2)
        signs = np.sign(d2)
        nz = np.nonzero(signs)[0]  # the sample straddling the knot is exactly 0
        compressed = signs[nz]
        flips = np.where(compressed[:-1] != compressed[1:])[0]
        assert len(flips) == 1
        assert abs(nz[flips[0] + 1] - 40) <= 1

    def test_quadratic_is_c1(self):
        signal, _ = generate_family(
            "piecewise-quadratic", length=80, knots=[30],
            curvatures=[0.05, -0.03], initial_slope=0.2,
        )
        d1 = np.diff(signal.values)
        assert np.max(np.abs(np.diff(d1))) < 0.06  # no slope jump at the knot

    def test_exponential_continuity(self):
        signal, truth = generate_family(
            "piecewise-exponential", length=90, knots=[45],
            rates=[0.02, -0.05], start_value=2.0,
        )
        assert truth.locations == (45,)
        jump = abs(signal.values[45] - signal.values[44])
        assert jump < abs(signal.values[44]) * 0.06

    def test_sinusoidal_continuity(self):
        signal, truth = generate_family(
            "sinusoidal", length=200, knots=[70, 140],
            amplitudes=[1.0, 2.0, 1.5], frequencies=[0.2, 0.35, 0.1],
        )
        for knot in truth.locations:
            left = signal.values[knot - 1]
            right = signal.values[knot]
            # Continuity at the join is enforced by phase matching: the jump
            # is no larger than one sample of the fastest oscillation.
            assert abs(right - left) <= 2.0 * 0.35 + 1e-12

    def test_sinusoidal_join_exact(self):
        # The knot sample equals the previous segment's extrapolated value to
        # machine precision (phase matching enforces the join).
        signal, _ = generate_family(
            "sinusoidal", length=60, knots=[30],
            amplitudes=[1.0, 3.0], frequencies=[0.3, 0.11],
        )
        v = signal.values
        extrapolated = 1.0 * math.sin(0.3 * 30)  # segment 1 continued to the knot
        assert v[30] == pytest.approx(extrapolated, abs=1e-12)

    def test_sinusoidal_impossible_join_rejected(self):
        with pytest.raises(ValueError):
            generate_family(
                "sinusoidal", length=60, knots=[30],
                amplitudes=[2.0, 0.5], frequencies=[0.12, 0.3], phase=1.4,
            )

    def test_exponential_zero_start_rejected(self):
        with pytest.raises(ValueError):
            generate_family(
                "piecewise-exponential", length=50, knots=[25],
                rates=[0.1, -0.1], start_value=0.0,
            )

    def test_bad_knots_rejected(self):
        with pytest.raises(ValueError):
            generate_family("piecewise-linear", length=50, knots=[30, 20], slopes=[1, -1, 1])
        with pytest.raises(ValueError):
            generate_family("piecewise-linear", length=50, knots=[49], slopes=[1, -1])

    def test_wrong_param_counts_rejected(self):
        with pytest.raises(ValueError):
            generate_family("piecewise-linear", length=50, knots=[25], slopes=[1.0])
        with pytest.raises(ValueError):
            generate_family(
                "piecewise-linear", length=50, knots=[25], slopes=[1, -1], bogus=3
            )

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            generate_family("piecewise-cubic", length=50, knots=[25])


class TestDispatch:
    def test_generate_dispatch(self):
        ts1, tr1 = generate(sse_benchmark_spec())
        assert tr1.count == 10
        ts2, tr2 = generate(
            FamilySpec("piecewise-linear", {"length": 60, "knots": [30], "slopes": [1, -1]})
        )
        assert tr2.locations == (30,)

    def test_family_spec_validates_kind(self):
        with pytest.raises(ValueError):
            FamilySpec("nope", {})
