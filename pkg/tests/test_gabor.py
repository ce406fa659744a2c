import csv
import math

import numpy as np
import pytest

from lgnlab.core.errors import ArgumentError, DimensionError
from lgnlab.core.gabor import (
    FilterBank,
    GaborParams,
    RingachPoint,
    canonicalize,
    effective_bank,
    fit_bank,
    fit_gabor,
    fit_ringach_lines,
    gabor_eval,
    ringach_point,
    save_scatter_csv,
)
from lgnlab.core.kernels import delta_kernel, gaussian_kernel, log_kernel

SIDE = 11


def _random_params(rng):
    return GaborParams(
        amplitude=rng.uniform(0.5, 2.0),
        x0=0.0,
        y0=0.0,
        theta=rng.uniform(0.2, math.pi - 0.2),
        sigma_x=rng.uniform(1.8, 3.0),
        sigma_y=rng.uniform(1.8, 3.0),
        f=rng.uniform(0.1, 0.22),
        phi=rng.uniform(-math.pi, math.pi),
    )


def _close(fitted, truth, tol=1e-2):
    pairs = [
        (fitted.amplitude, truth.amplitude),
        (fitted.theta, truth.theta),
        (fitted.sigma_x, truth.sigma_x),
        (fitted.sigma_y, truth.sigma_y),
        (fitted.f, truth.f),
    ]
    return all(abs(a - b) < tol for a, b in pairs) and abs(fitted.x0) < tol and abs(fitted.y0) < tol


class TestParams:
    def test_sigma_must_be_positive(self):
        with pytest.raises(ArgumentError):
            GaborParams(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.1, 0.0)

    def test_canonical_form_evaluates_the_same(self):
        raw = GaborParams(-1.3, 0.5, -0.25, 4.0, 2.0, 2.5, -0.15, 2.9)
        canonical = canonicalize(raw)
        assert canonical.amplitude > 0.0
        assert canonical.f >= 0.0
        assert 0.0 <= canonical.theta < math.pi
        assert -math.pi < canonical.phi <= math.pi
        np.testing.assert_allclose(gabor_eval(canonical, SIDE), gabor_eval(raw, SIDE), atol=1e-12)

    def test_eval_center_value(self):
        p = GaborParams(2.0, 0.0, 0.0, 0.3, 2.0, 3.0, 0.1, 0.0)
        assert gabor_eval(p, 9)[4, 4] == pytest.approx(2.0)

    def test_half_turn_with_phase_flip(self):
        a = GaborParams(1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.15, 0.5)
        b = GaborParams(1.0, 0.0, 0.0, math.pi, 2.0, 3.0, 0.15, -0.5)
        np.testing.assert_allclose(gabor_eval(a, SIDE), gabor_eval(b, SIDE), atol=1e-12)

    def test_zero_frequency_is_gaussian(self):
        p = GaborParams(1.5, 0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0)
        np.testing.assert_allclose(gabor_eval(p, SIDE), gaussian_kernel(SIDE, 2.0, 1.5), atol=1e-15)

    def test_even_side(self):
        with pytest.raises(ArgumentError):
            gabor_eval(GaborParams(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.1, 0.0), 8)


class TestFitGabor:
    def test_random_exact_filters(self):
        rng = np.random.default_rng(11)
        successes = 0
        trials = 50
        for _ in range(trials):
            truth = _random_params(rng)
            fitted, corr = fit_gabor(gabor_eval(truth, SIDE))
            if corr >= 0.999 and _close(fitted, truth):
                successes += 1
        assert successes >= 0.95 * trials

    def test_documented_example(self):
        truth = GaborParams(1.0, 0.0, 0.0, math.radians(30.0), 2.0, 3.0, 0.15, 0.5)
        fitted, corr = fit_gabor(gabor_eval(truth, SIDE))
        assert corr >= 0.999
        for name in ("amplitude", "theta", "sigma_x", "sigma_y", "f", "phi"):
            assert getattr(fitted, name) == pytest.approx(getattr(truth, name), abs=1e-3)

    def test_gaussian_has_no_carrier(self):
        fitted, corr = fit_gabor(gaussian_kernel(SIDE, 2.0))
        assert corr > 0.999
        assert fitted.f < 1e-3

    def test_shifted_filter(self):
        truth = GaborParams(1.0, 1.5, -1.0, 0.7, 2.2, 2.6, 0.15, 0.4)
        fitted, corr = fit_gabor(gabor_eval(truth, SIDE))
        assert corr >= 0.999
        assert fitted.x0 == pytest.approx(1.5, abs=1e-2)
        assert fitted.y0 == pytest.approx(-1.0, abs=1e-2)

    def test_quarter_turn_gives_the_same_fit(self):
        truth = GaborParams(1.0, 0.0, 0.0, math.radians(30.0), 2.0, 3.0, 0.15, 0.5)
        noise = np.random.default_rng(13).normal(scale=0.02, size=(SIDE, SIDE))
        kernel = gabor_eval(truth, SIDE) + noise
        fitted, corr = fit_gabor(kernel)
        turned, turned_corr = fit_gabor(np.rot90(kernel))

        def sse(k, p):
            return float(np.sum((k - gabor_eval(p, SIDE)) ** 2))

        assert sse(np.rot90(kernel), turned) == pytest.approx(sse(kernel, fitted), rel=1e-6)
        assert turned_corr == pytest.approx(corr, abs=1e-7)
        assert abs(math.sin(turned.theta - fitted.theta)) == pytest.approx(1.0, abs=1e-6)
        for name in ("sigma_x", "sigma_y", "f"):
            assert getattr(turned, name) == pytest.approx(getattr(fitted, name), rel=1e-6)

    def test_constant_kernel(self):
        with pytest.raises(ArgumentError):
            fit_gabor(np.ones((5, 5)))


class TestBank:
    def test_validation(self):
        with pytest.raises(ArgumentError):
            FilterBank([])
        with pytest.raises(DimensionError):
            FilterBank([np.zeros((3, 3)), np.zeros((5, 5))])

    def test_effective_bank_with_delta(self, rng):
        bank = FilterBank([rng.normal(size=(7, 7)) for _ in range(3)])
        effective = effective_bank(delta_kernel(13), bank)
        assert len(effective) == 3 and effective.side == 7
        for a, b in zip(effective.filters, bank.filters):
            np.testing.assert_allclose(a, b, atol=1e-15)

    def test_effective_bank_is_linear(self, rng):
        psi_a, psi_b = rng.normal(size=(2, 5, 5))
        first, second = rng.normal(size=(2, 9, 9))
        mixed = effective_bank(2.0 * psi_a - 0.5 * psi_b, FilterBank([first + 3.0 * second]))
        parts_a = effective_bank(psi_a, FilterBank([first, second])).filters
        parts_b = effective_bank(psi_b, FilterBank([first, second])).filters
        expected = 2.0 * (parts_a[0] + 3.0 * parts_a[1]) - 0.5 * (parts_b[0] + 3.0 * parts_b[1])
        np.testing.assert_allclose(mixed.filters[0], expected, atol=1e-12)

    def test_minus_log_keeps_carrier_frequency(self):
        side = 15
        truth = GaborParams(1.0, 0.0, 0.0, 0.6, 2.5, 3.0, 0.15, 0.3)
        effective = effective_bank(log_kernel(7, 1.5, minus=True), FilterBank([gabor_eval(truth, side)]))
        fitted, corr = fit_gabor(effective.filters[0])
        assert corr >= 0.9
        assert fitted.f == pytest.approx(truth.f, rel=0.2)

    def test_fit_bank_threads_and_scatter(self, tmp_path):
        rng = np.random.default_rng(5)
        bank = FilterBank([gabor_eval(_random_params(rng), 11) for _ in range(3)])
        sequential = fit_bank(bank)
        assert fit_bank(bank, threads=3) == sequential

        path = tmp_path / "scatter.csv"
        save_scatter_csv(path, sequential)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["filter_index", "n_x", "n_y", "corr", "theta", "f", "sigma_x", "sigma_y"]
        assert len(rows) == 4
        point = ringach_point(sequential[1][0])
        assert float(rows[2][1]) == point.n_x


class TestRingach:
    def test_point(self):
        p = GaborParams(1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.25, 0.0)
        assert ringach_point(p) == RingachPoint(0.5, 0.75)

    def test_collinear(self):
        points = [RingachPoint(x, 2.0 * x) for x in np.linspace(0.1, 1.0, 10)]
        fit = fit_ringach_lines(points)
        assert fit.alpha == pytest.approx(2.0)
        assert fit.sse == pytest.approx(0.0, abs=1e-20)

    def test_two_segments(self):
        low = [RingachPoint(x, 0.5 * x) for x in np.linspace(0.1, 1.0, 8)]
        high = [RingachPoint(1.0 + d, 0.5 + 3.0 * d) for d in np.linspace(0.1, 1.0, 8)]
        points = high + low
        fit = fit_ringach_lines(points)
        assert fit.alpha == pytest.approx(0.5, rel=0.05)
        assert fit.slope2 == pytest.approx(3.0, rel=0.05)
        assert fit.breakpoint[0] == pytest.approx(1.0, rel=0.05)
        assert fit.breakpoint[1] == pytest.approx(0.5, rel=0.05)

        xs = np.array([p.n_x for p in points])
        ys = np.array([p.n_y for p in points])
        single = float(np.dot(xs, ys) / np.dot(xs, xs))
        assert fit.sse <= float(np.sum((ys - single * xs) ** 2))

    def test_two_segments_with_noise(self):
        generator = np.random.default_rng(17)
        xs = np.concatenate([np.linspace(0.05, 0.4, 12), np.linspace(0.45, 1.2, 12)])
        ys = np.where(xs <= 0.4, 1.5 * xs, 0.6 + 0.2 * (xs - 0.4))
        ys = ys + generator.normal(scale=1e-3, size=xs.size)
        fit = fit_ringach_lines([RingachPoint(float(x), float(y)) for x, y in zip(xs, ys)])
        assert fit.alpha == pytest.approx(1.5, rel=0.05)
        assert fit.slope2 == pytest.approx(0.2, rel=0.05)
        assert fit.breakpoint[0] == pytest.approx(0.4, rel=0.05)
        assert fit.breakpoint[1] == pytest.approx(0.6, rel=0.05)

    def test_too_few_points(self):
        with pytest.raises(ArgumentError):
            fit_ringach_lines([RingachPoint(1.0, 1.0)] * 3)
