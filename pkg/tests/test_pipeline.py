import math
from dataclasses import replace

import numpy as np
import pytest

from ssaid.core import DetectionResult, TimeSeries, sample_std
from ssaid.isolate_detect import IdConfig
from ssaid.pipeline import (
    GroupStats,
    SsaidConfig,
    _window_seed,
    aggregate,
    desk_config,
    full_config,
    identify_in_snl,
    member_stream,
    noise_grid,
    run_group,
    ssaid_detect,
    ssaid_detect_sliding,
    voting_success_prob,
)
from ssaid.simulate import (
    NoiseSpec,
    add_noise,
    generate_family,
    generate_sse_like,
    sse_benchmark_spec,
)
from ssaid.ssa import SsaConfig


def piecewise_linear(length, kinks, slopes):
    ts, _ = generate_family("piecewise-linear", length=length, knots=list(kinks), slopes=list(slopes))
    return ts.values


def tiny_config(**overrides):
    base = dict(
        ssa=SsaConfig(num_components=6),
        noise_levels=8,
        realizations=10,
        seed=123,
    )
    base.update(overrides)
    return SsaidConfig(**base)


class TestNoiseGrid:
    def test_formula(self):
        grid = noise_grid(1.0, 4, 2.0)
        assert grid == pytest.approx([0.5, 1.0, 1.5, 2.0])

    def test_single_level(self):
        assert noise_grid(0.7, 1, 2.0) == pytest.approx([1.4])

    def test_eighty_levels(self):
        grid = noise_grid(0.5, 80, 2.0)
        assert len(grid) == 80
        assert grid[-1] == pytest.approx(1.0)
        assert np.all(np.diff(grid) > 0)
        steps = np.diff(grid)
        assert np.allclose(steps, steps[0])

    def test_errors(self):
        with pytest.raises(ValueError):
            noise_grid(1.0, 0, 2.0)
        with pytest.raises(ValueError):
            noise_grid(0.0, 5, 2.0)


class TestVotingSuccessProb:
    def test_certain_success(self):
        for q in (1, 7, 50):
            assert voting_success_prob(1.0, q) == 1.0

    def test_certain_failure(self):
        assert voting_success_prob(0.0, 9) == 0.0

    def test_half_q2(self):
        assert voting_success_prob(0.5, 2) == pytest.approx(0.75)

    def test_quoted_value(self):
        assert voting_success_prob(0.6, 100) == pytest.approx(0.9832, abs=1e-4)

    def test_matches_convolution_oracle(self):
        # Independent oracle: distribution of the success count built by
        # convolving Bernoulli trials, then summing the upper tail.
        def oracle(p, q):
            dist = [1.0]
            for _ in range(q):
                nxt = [0.0] * (len(dist) + 1)
                for j, pr in enumerate(dist):
                    nxt[j] += pr * (1 - p)
                    nxt[j + 1] += pr * p
                dist = nxt
            return sum(dist[math.ceil(q / 2):])

        for p in (0.1, 0.25, 0.5, 0.6, 0.9):
            for q in range(1, 21):
                assert voting_success_prob(p, q) == pytest.approx(oracle(p, q), abs=1e-12)

    def test_monotone_in_p(self):
        vals = [voting_success_prob(p, 15) for p in np.linspace(0.05, 0.95, 10)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            voting_success_prob(1.2, 5)
        with pytest.raises(ValueError):
            voting_success_prob(-0.1, 5)
        with pytest.raises(ValueError):
            voting_success_prob(0.5, 0)

    def test_empirical_consistency(self):
        # Fraction of groups with at least half successes over simulated
        # Bernoulli groups matches the formula within 3 standard errors.
        p, q, n_groups = 0.55, 11, 2000
        rng = np.random.default_rng(42)
        wins = (rng.random((n_groups, q)) < p).sum(axis=1) >= math.ceil(q / 2)
        emp = wins.mean()
        expect = voting_success_prob(p, q)
        se = math.sqrt(expect * (1 - expect) / n_groups)
        assert abs(emp - expect) <= 3 * se


class TestRunGroup:
    def setup_method(self):
        self.signal = TimeSeries(piecewise_linear(300, [100, 200], [0.25, -0.25, 0.25]))

    def test_clean_signal_small_noise(self):
        std = sample_std(self.signal.values)
        streams = [member_stream(1, 1, 1, m) for m in range(20)]
        g = run_group(self.signal, 0.05 * std, streams, IdConfig(), k=1, s=1)
        assert g.h_mode == 2
        assert g.r2 >= 0.9
        assert g.omega3 is not None and g.omega3 <= 1.0
        assert not g.degenerate
        assert g.kappa == round(g.r2 * 20)

    def test_straight_line_mode_zero(self):
        line = TimeSeries(np.arange(120.0) * 0.3)
        streams = [member_stream(2, 1, 1, m) for m in range(20)]
        g = run_group(line, 0.5, streams, IdConfig())
        assert g.h_mode == 0
        assert g.r2 > 0.8
        assert g.locations == ()
        assert g.omega3 is None

    def test_single_member_group(self):
        streams = [member_stream(3, 1, 1, 0)]
        g = run_group(self.signal, 0.01, streams, IdConfig())
        assert g.r2 == 1.0
        assert g.kappa == 1
        if g.h_mode > 0:
            assert g.omega3 == 0.0

    def test_empty_streams_rejected(self):
        with pytest.raises(ValueError):
            run_group(self.signal, 0.1, [], IdConfig())

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            run_group(self.signal, -0.1, [member_stream(0, 1, 1, 1)], IdConfig())


class TestIdentifyInSnl:
    def g(self, **kw):
        base = dict(
            k=1, s=1, a_s=0.1, h_mode=10, r2=0.8, kappa=8,
            locations=tuple(range(10, 110, 10)), omega3=1.0, degenerate=False,
        )
        base.update(kw)
        return GroupStats(**base)

    def test_zero_mode_excluded(self):
        assert identify_in_snl([self.g(h_mode=0, locations=(), omega3=None, r2=0.9)], 3.0) == []

    def test_all_conditions_pass(self):
        g = self.g(r2=0.6, omega3=2.5)
        assert identify_in_snl([g], 3.0) == [g]

    def test_low_r2_excluded(self):
        assert identify_in_snl([self.g(r2=0.49, omega3=0.0)], 3.0) == []

    def test_omega3_boundary_inclusive(self):
        g = self.g(omega3=3.0)
        assert identify_in_snl([g], 3.0) == [g]
        assert identify_in_snl([self.g(omega3=3.01)], 3.0) == []

    def test_degenerate_excluded(self):
        g = self.g(degenerate=True, omega3=None, locations=(10, 20))
        assert identify_in_snl([g], 3.0) == []

    def test_order_preserved(self):
        a, b = self.g(s=1), self.g(s=2)
        assert identify_in_snl([a, b], 3.0) == [a, b]


class TestAggregate:
    def g(self, h, locs, s=1):
        return GroupStats(
            k=1, s=s, a_s=0.1, h_mode=h, r2=1.0, kappa=10,
            locations=tuple(locs), omega3=0.5, degenerate=False,
        )

    def test_single_group_verbatim(self):
        g = self.g(2, (100, 200))
        assert aggregate([g]).locations == (100, 200)

    def test_majority_count(self):
        groups = [
            self.g(2, (100, 200), s=1),
            self.g(2, (100, 200), s=2),
            self.g(1, (150,), s=3),
        ]
        assert aggregate(groups).locations == (100, 200)

    def test_columnwise_mode(self):
        groups = [
            self.g(2, (100, 200), s=1),
            self.g(2, (101, 200), s=2),
            self.g(2, (100, 200), s=3),
        ]
        assert aggregate(groups).locations == (100, 200)

    def test_order_invariance(self):
        groups = [
            self.g(2, (100, 200), s=1),
            self.g(2, (101, 201), s=2),
            self.g(2, (100, 200), s=3),
            self.g(3, (50, 150, 250), s=4),
        ]
        expect = aggregate(groups)
        for perm in ([3, 2, 1, 0], [1, 3, 0, 2]):
            assert aggregate([groups[i] for i in perm]) == expect

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestSsaidDetect:
    def test_finds_kinks_in_piecewise_linear(self):
        values = piecewise_linear(160, [60, 110], [0.4, -0.4, 0.4])
        rng = np.random.default_rng(5)
        x = TimeSeries(values + 0.4 * rng.standard_normal(160))
        res = ssaid_detect(x, tiny_config())
        assert res.detection.count == 2
        assert abs(res.detection.locations[0] - 60) <= 3
        assert abs(res.detection.locations[1] - 110) <= 3

    def test_pure_trend_returns_empty(self):
        rng = np.random.default_rng(6)
        x = TimeSeries(0.05 * np.arange(200.0) + 0.5 * rng.standard_normal(200))
        res = ssaid_detect(x, tiny_config())
        assert res.detection.count == 0
        assert res.in_snl_groups == ()

    def test_group_grid_complete(self):
        rng = np.random.default_rng(7)
        x = TimeSeries(rng.standard_normal(64))
        cfg = tiny_config()
        res = ssaid_detect(x, cfg)
        assert len(res.all_groups) == 6 * 8
        keys = [(g.k, g.s) for g in res.all_groups]
        assert keys == [(k, s) for k in range(1, 7) for s in range(1, 9)]

    def test_deterministic_and_schedule_independent(self):
        values = piecewise_linear(120, [60], [0.5, -0.5])
        rng = np.random.default_rng(8)
        x = TimeSeries(values + 0.3 * rng.standard_normal(120))
        a = ssaid_detect(x, tiny_config(n_jobs=1))
        b = ssaid_detect(x, tiny_config(n_jobs=1))
        c = ssaid_detect(x, tiny_config(n_jobs=2))
        assert a.detection == b.detection == c.detection
        assert a.all_groups == b.all_groups
        assert [g for g in a.all_groups] == [g for g in c.all_groups]

    def test_locations_interior(self):
        values = piecewise_linear(100, [50], [0.6, -0.6])
        rng = np.random.default_rng(9)
        x = TimeSeries(values + 0.3 * rng.standard_normal(100))
        res = ssaid_detect(x, tiny_config())
        for loc in res.detection.locations:
            assert 1 <= loc <= 98

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            ssaid_detect(TimeSeries(np.arange(20.0)), tiny_config())

    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            ssaid_detect(TimeSeries(np.full(50, 1.0)), tiny_config())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SsaidConfig(noise_levels=0)
        with pytest.raises(ValueError):
            SsaidConfig(realizations=0)
        with pytest.raises(ValueError):
            SsaidConfig(rmse_threshold=0.0)
        with pytest.raises(ValueError):
            SsaidConfig(noise_max_factor=-1.0)

    def test_presets(self):
        desk = desk_config()
        assert (desk.ssa.num_components, desk.noise_levels, desk.realizations) == (20, 20, 30)
        full = full_config()
        assert (full.ssa.num_components, full.noise_levels, full.realizations) == (100, 80, 50)


class TestSliding:
    def test_single_contributing_window_matches_plain(self):
        # Both change-points sit deep inside window 0 of [0, 300) and
        # [100, 400); they are more central there than in window 1, so the
        # merge must reproduce window 0's own result verbatim.
        values = piecewise_linear(400, [140, 160], [0.0, 1.0, 0.0])
        rng = np.random.default_rng(10)
        x = TimeSeries(values + 0.3 * rng.standard_normal(400))
        cfg = tiny_config(ssa=SsaConfig(num_components=10), noise_levels=10, realizations=12)
        res = ssaid_detect_sliding(x, cfg, segment_len=100)

        win0 = ssaid_detect(x.slice(0, 300), replace(cfg, seed=_window_seed(cfg.seed, 0)))
        win1 = ssaid_detect(x.slice(100, 400), replace(cfg, seed=_window_seed(cfg.seed, 1)))
        assert win0.detection.count == 2
        assert win1.detection.count == 2
        # Windows agree within the cluster radius, and window 0 is more
        # central for every point.
        assert res.detection == win0.detection

    def test_remainder_absorbed_into_last_window(self):
        rng = np.random.default_rng(11)
        x = TimeSeries(rng.standard_normal(115))
        res = ssaid_detect_sliding(x, tiny_config(), segment_len=35)
        # 3 segments plus remainder: one window covering all 115 samples.
        assert res.detection.count == 0

    def test_errors(self):
        x = TimeSeries(np.arange(50.0))
        with pytest.raises(ValueError):
            ssaid_detect_sliding(x, tiny_config(), segment_len=5)
        with pytest.raises(ValueError):
            ssaid_detect_sliding(x, tiny_config(), segment_len=20)


class TestOnBenchmarkSignal:
    def test_desk_scale_success_single_instance(self):
        signal, truth = generate_sse_like(sse_benchmark_spec())
        x = add_noise(signal, NoiseSpec(0.25, seed=42))
        res = ssaid_detect(x, desk_config(seed=1, n_jobs=2))
        assert res.detection.count == truth.count
        errs = np.array(res.detection.locations) - np.array(truth.locations)
        assert math.sqrt(np.mean(errs**2)) < 3.0
        assert len(res.all_groups) == 20 * 20

    def test_high_noise_count_roughly_survives(self):
        # At noise as large as the signal itself, the count stays within one
        # of the truth at this ensemble scale (the trailing event has the
        # least support and can merge), while locations visibly degrade.
        signal, truth = generate_sse_like(sse_benchmark_spec())
        n_close = 0
        for seed in range(4):
            x = add_noise(signal, NoiseSpec(1.0, seed=2200 + seed))
            res = ssaid_detect(x, desk_config(seed=seed, n_jobs=2))
            n_close += abs(res.detection.count - truth.count) <= 1
        assert n_close >= 3

    def test_equal_jumps_sliding_agrees_with_plain(self):
        from ssaid.simulate import two_sse_equal_spec

        signal, truth = generate_sse_like(two_sse_equal_spec())
        x = add_noise(signal, NoiseSpec(0.10, seed=2300))
        cfg = desk_config(seed=0, n_jobs=2)
        plain = ssaid_detect(x, cfg)
        sliding = ssaid_detect_sliding(x, cfg, segment_len=80)
        assert plain.detection.count == truth.count
        assert sliding.detection.count == plain.detection.count
