"""测试 Adam 与 Glorot 初始化"""
import numpy as np
import pytest

from DrewLab.domain.errors import DrewValidationError
from DrewLab.infrastructure import tensor as T
from DrewLab.infrastructure.optim import AdamState, adam_step, glorot_init, zero_grads
from DrewLab.infrastructure.tensor import Tape, Tensor


class TestAdam:
    """Adam 测试"""

    def test_first_step_moves_by_lr(self):
        """测试第一步移动约 lr"""
        p = Tensor([0.0], requires_grad=True)
        p.grad = np.array([1.0])
        state = AdamState(lr=0.01)
        adam_step({"p": p}, state)
        assert p.data[0] == pytest.approx(-0.01, rel=1e-6)
        assert state.step == 1
        assert p.grad.tolist() == [1.0]

    def test_zero_grad_keeps_params(self):
        """测试梯度恒为 0 时参数不变"""
        p = Tensor([1.5, -2.0], requires_grad=True)
        state = AdamState()
        for _ in range(10):
            zero_grads({"p": p})
            adam_step({"p": p}, state)
        assert p.data.tolist() == [1.5, -2.0]

    def test_quadratic_bowl(self):
        """测试 200 步最小化二次函数"""
        target = np.array([0.3, -0.7])
        p = Tensor([0.0, 0.0], requires_grad=True)
        state = AdamState(lr=0.05)
        for _ in range(200):
            zero_grads({"p": p})
            with Tape() as tape:
                diff = T.sub(p, Tensor(target))
                tape.backward(T.sum(T.mul(diff, diff)))
            adam_step({"p": p}, state)
        assert np.max(np.abs(p.data - target)) < 1e-3

    def test_missing_grad_raises_error(self):
        """测试缺少梯度引发错误"""
        p = Tensor([1.0])
        with pytest.raises(DrewValidationError, match="缺少梯度"):
            adam_step({"p": p}, AdamState())


class TestGlorotInit:
    """Glorot 初始化测试"""

    def test_deterministic(self):
        """测试相同种子结果一致"""
        a = glorot_init((4, 4), np.random.default_rng(3))
        b = glorot_init((4, 4), np.random.default_rng(3))
        assert np.array_equal(a.data, b.data)

    def test_bounds(self):
        """测试取值范围"""
        w = glorot_init((4, 4), np.random.default_rng(0))
        assert np.all(np.abs(w.data) <= np.sqrt(6 / 8))
        assert w.requires_grad

    def test_variance(self):
        """测试方差约为 2/(fan_in+fan_out)"""
        w = glorot_init((200, 500), np.random.default_rng(1))
        assert w.data.var() == pytest.approx(2 / 700, rel=0.05)

    def test_rejects_non_matrix_shape(self):
        """测试非二维形状引发错误"""
        with pytest.raises(DrewValidationError):
            glorot_init((3,), np.random.default_rng(0))
