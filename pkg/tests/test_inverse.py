import csv
import dataclasses

import numpy as np
import pytest
from scipy import signal

from lgnlab.core.errors import ArgumentError, DimensionError, DivergenceError
from lgnlab.core.inverse import (
    InverseConfig,
    InverseMode,
    InverseSolver,
    invert_kernel,
    save_residual_csv,
    save_slice_csv,
    stability_bound,
)
from lgnlab.core.kernels import delta_kernel, discrete_laplacian, log_kernel, radial_profile

SOLVERS = ["cg", "gradient"]


def _symmetric_3x3(a, b):
    return np.array([[b, a, b], [a, 1.0, a], [b, a, b]])


def _pinv_inverse(kernel, side):
    """把截断卷积算子逐列拼成矩阵，用伪逆求 argmin ‖M∗x − δ‖"""
    columns = []
    for index in range(side * side):
        basis = np.zeros(side * side)
        basis[index] = 1.0
        columns.append(signal.convolve2d(basis.reshape(side, side), kernel, mode="same").ravel())
    operator = np.stack(columns, axis=1)
    return (np.linalg.pinv(operator) @ delta_kernel(side).ravel()).reshape(side, side)


class TestConfig:
    def test_defaults(self):
        cfg = InverseConfig()
        assert cfg.mode is InverseMode.LEAST_SQUARES
        assert cfg.solver is InverseSolver.CONJUGATE_GRADIENT
        assert cfg.support_side == 41
        assert cfg.prescale

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dt": 0.0},
            {"dt": float("nan")},
            {"epsilon": 0.0},
            {"max_iters": 0},
            {"support_side": 20},
            {"mode": "jacobi"},
            {"solver": "newton"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ArgumentError):
            InverseConfig(**kwargs)

    def test_mode_aliases(self):
        assert InverseMode.parse("LS") is InverseMode.LEAST_SQUARES
        assert InverseMode.parse("least_squares") is InverseMode.LEAST_SQUARES
        assert InverseMode.parse("richardson") is InverseMode.RICHARDSON
        assert InverseSolver.parse("Conjugate_Gradient") is InverseSolver.CONJUGATE_GRADIENT

    def test_support_smaller_than_kernel(self):
        with pytest.raises(DimensionError):
            invert_kernel(log_kernel(9, 1.5), InverseConfig(support_side=7))


class TestLeastSquares:
    @pytest.mark.parametrize("solver", SOLVERS)
    def test_matches_pseudo_inverse(self, rng, solver):
        side = 21
        cfg = InverseConfig(dt=0.5, epsilon=1e-9, support_side=side, solver=solver)
        for _ in range(5):
            a, b = rng.uniform(-0.1, 0.1, size=2)
            kernel = _symmetric_3x3(a, b)
            result = invert_kernel(kernel, cfg)
            assert result.converged
            assert result.residual_l1 < 1e-6
            np.testing.assert_allclose(result.m_tilde, _pinv_inverse(kernel, side), atol=1e-6)

    @pytest.mark.parametrize("solver", SOLVERS)
    @pytest.mark.parametrize("gain", [1.0, 2.0])
    def test_delta_kernels_reach_tiny_residual(self, solver, gain):
        kernel = gain * delta_kernel(3)
        result = invert_kernel(kernel, InverseConfig(support_side=21, solver=solver))
        assert result.converged
        assert result.residual_l1 < 1e-6
        np.testing.assert_allclose(result.m_tilde, _pinv_inverse(kernel, 21), atol=1e-12)

    @pytest.mark.parametrize("solver", SOLVERS)
    def test_scaled_delta(self, solver):
        result = invert_kernel(2.0 * delta_kernel(3), InverseConfig(support_side=5, solver=solver))
        assert result.converged
        assert result.iterations <= 1
        np.testing.assert_allclose(result.m_tilde, 0.5 * delta_kernel(5), atol=1e-15)
        assert result.full_residual_l1 == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("solver", SOLVERS)
    def test_objective_is_monotone(self, solver):
        kernel = log_kernel(7, 1.5, minus=True)
        normalized = kernel / np.linalg.norm(kernel)
        support = 21
        dt = 0.5 * stability_bound(normalized, support)
        cfg = InverseConfig(dt=dt, support_side=support, max_iters=500, solver=solver)
        result = invert_kernel(kernel, cfg)
        trace = np.array(result.objective_trace)
        assert len(trace) == result.iterations
        assert np.all(np.diff(trace) <= 1e-10 * trace[0])
        assert trace[-1] < trace[0]

    def test_stop_rule_is_measured_on_m_tilde(self):
        # 核的 L2 范数约为 5，预缩放后的变量与 M̃ 相差这个倍数
        kernel = 5.0 * _symmetric_3x3(0.08, 0.03)
        cfg = InverseConfig(dt=0.5, epsilon=1e-3, support_side=21, solver="gradient")
        final = invert_kernel(kernel, cfg)
        assert final.converged
        assert final.iterations >= 2
        before = invert_kernel(kernel, dataclasses.replace(cfg, max_iters=final.iterations - 1))
        assert not before.converged
        step = float(np.abs(final.m_tilde - before.m_tilde).sum())
        assert final.update_trace[-1] == pytest.approx(step, rel=1e-9)
        assert step / cfg.dt < cfg.epsilon
        assert before.update_trace[-1] / cfg.dt >= cfg.epsilon

    def test_symmetric_kernel_gives_symmetric_inverse(self):
        kernel = log_kernel(7, 1.5, minus=True)
        dt = min(0.2, 0.5 * stability_bound(kernel / np.linalg.norm(kernel), 21))
        cfg = InverseConfig(dt=dt, support_side=21, max_iters=2000, solver="gradient")
        m_tilde = invert_kernel(kernel, cfg).m_tilde
        scale = np.abs(m_tilde).max()
        np.testing.assert_allclose(m_tilde, np.rot90(m_tilde), atol=1e-9 * scale)
        np.testing.assert_allclose(m_tilde, m_tilde.T, atol=1e-9 * scale)

    def test_laplacian_inverse_is_logarithmic_with_defaults(self):
        result = invert_kernel(discrete_laplacian(), InverseConfig(support_side=101))
        radii = np.arange(2, 41)
        profile = radial_profile(result.m_tilde, radii)
        assert np.corrcoef(profile, np.log(radii))[0, 1] >= 0.95
        assert profile[-1] > profile[0]

    def test_huge_step_diverges(self):
        kernel = _symmetric_3x3(0.05, 0.02)
        dt = 10.0 * stability_bound(kernel / np.linalg.norm(kernel), 11)
        with pytest.raises(DivergenceError) as info:
            invert_kernel(kernel, InverseConfig(dt=dt, support_side=11, solver="gradient"))
        assert info.value.mode == "least-squares"

    def test_zero_kernel(self):
        with pytest.raises(ArgumentError):
            invert_kernel(np.zeros((3, 3)), InverseConfig(support_side=5))


class TestRichardson:
    def test_scaled_delta_with_negative_step(self):
        cfg = InverseConfig(dt=-0.25, epsilon=1e-12, support_side=5, mode="richardson")
        result = invert_kernel(2.0 * delta_kernel(3), cfg)
        assert result.converged
        np.testing.assert_allclose(result.m_tilde, 0.5 * delta_kernel(5), atol=1e-11)

    def test_laplacian_wrong_sign_diverges(self):
        cfg = InverseConfig(dt=-1.0, support_side=21, mode="richardson")
        with pytest.raises(DivergenceError) as info:
            invert_kernel(discrete_laplacian(), cfg)
        assert info.value.mode == "richardson"
        assert info.value.iteration > 0

    def test_laplacian_inverse_is_logarithmic(self):
        cfg = InverseConfig(dt=0.2, support_side=101, max_iters=20000, mode="richardson")
        result = invert_kernel(discrete_laplacian(), cfg)
        radii = np.arange(2, 41)
        profile = radial_profile(result.m_tilde, radii)
        assert np.corrcoef(profile, np.log(radii))[0, 1] >= 0.95
        # Green 函数随 r 单调上升（中心最负）
        assert np.all(np.diff(profile) > 0.0)

    def test_leak_accounts_for_truncation(self):
        cfg = InverseConfig(dt=0.2, support_side=21, max_iters=3000, mode="richardson")
        result = invert_kernel(discrete_laplacian(), cfg)
        assert result.leak_l1 > 0.0
        assert result.full_residual_l1 == pytest.approx(result.residual_l1 + result.leak_l1)


class TestCsvWriters:
    def test_residual_csv(self, tmp_path):
        result = invert_kernel(
            discrete_laplacian(),
            InverseConfig(dt=0.2, support_side=11, max_iters=25, mode="richardson"),
        )
        path = tmp_path / "residual.csv"
        save_residual_csv(path, result)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["iter", "residual_l1", "update_l1", "objective"]
        assert len(rows) == result.iterations + 1
        assert float(rows[1][1]) == result.residual_trace[0]
        assert float(rows[-1][3]) == result.objective_trace[-1]

    def test_slice_csv(self, tmp_path):
        kernel = np.arange(49.0).reshape(7, 7)
        path = tmp_path / "slice.csv"
        save_slice_csv(path, kernel)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["r", "value", "log_r"]
        assert len(rows) == 5
        assert rows[1] == ["0", "24.0", ""]
        assert float(rows[2][2]) == 0.0
