import numpy as np
import pytest

from nxseg.errors import ConfigError, ShapeError, TrainingError
from nxseg.tensor import (Adam, Tensor, adam_state, adam_step, clamp, conv1d,
                          log, relu, sigmoid)

from gradcheck import check_gradients, random_tensor


class TestMatmul:
    def test_identity(self):
        out = Tensor([[1.0, 0.0], [0.0, 1.0]]) @ Tensor([[3.0], [4.0]])
        np.testing.assert_array_equal(out.data, [[3.0], [4.0]])

    def test_scalar_product(self):
        out = Tensor([[2.0]]) @ Tensor([[5.0]])
        np.testing.assert_array_equal(out.data, [[10.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 2)))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        tensors = {"a": random_tensor(rng, (3, 4)),
                   "b": random_tensor(rng, (4, 2))}
        check_gradients(lambda t: (t["a"] @ t["b"]).sum(), tensors, rtol=1e-6)


class TestConv1d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.uniform(-1, 1, (2, 9)))
        k = np.zeros((2, 2, 3))
        k[0, 0, 1] = 1.0
        k[1, 1, 1] = 1.0
        for dilation in (1, 2, 4):
            out = conv1d(x, Tensor(k), dilation)
            np.testing.assert_allclose(out.data, x.data)

    def test_zero_input(self):
        rng = np.random.default_rng(2)
        out = conv1d(Tensor(np.zeros((3, 7))),
                     Tensor(rng.uniform(-1, 1, (4, 3, 3))), 2)
        np.testing.assert_array_equal(out.data, np.zeros((4, 7)))

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            conv1d(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 1, 4))), 1)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv1d(Tensor(np.zeros((2, 4))), Tensor(np.zeros((1, 3, 3))), 1)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        tensors = {"x": random_tensor(rng, (2, 8)),
                   "k": random_tensor(rng, (3, 2, 3))}
        check_gradients(lambda t: conv1d(t["x"], t["k"], 2).sum(),
                        tensors, rtol=1e-5)


class TestElementwise:
    def test_relu(self):
        out = relu(Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_relu_subgradient_zero_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        relu(x).sum().backward()
        assert x.grad[0] == 0.0

    def test_sigmoid_at_zero(self):
        assert sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_gradient_at_zero(self):
        x = Tensor([0.0], requires_grad=True)
        sigmoid(x).sum().backward()
        assert x.grad[0] == pytest.approx(0.25)

    def test_log_floors_nonpositive(self):
        out = log(Tensor([-1.0, 0.0, 1.0]))
        assert out.data[0] == out.data[1] == pytest.approx(np.log(1e-12))
        assert out.data[2] == 0.0

    def test_elementwise_gradients(self):
        rng = np.random.default_rng(4)
        tensors = {"x": random_tensor(rng, (3, 4)),
                   "y": random_tensor(rng, (3, 4))}
        check_gradients(lambda t: (t["x"] * t["y"] + t["x"] - t["y"]).sum(),
                        tensors, rtol=1e-6)

    def test_unary_gradients(self):
        rng = np.random.default_rng(5)
        tensors = {"x": random_tensor(rng, (4, 3), lo=0.2, hi=2.0)}
        check_gradients(
            lambda t: (log(t["x"]) * sigmoid(t["x"]) + relu(t["x"])).mean(),
            tensors, rtol=1e-5)

    def test_clamp_gradient_zero_outside(self):
        x = Tensor([-1.0, 0.5, 2.0], requires_grad=True)
        clamp(x, 0.0, 1.0).sum().backward()
        np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 3))) + Tensor(np.zeros((3, 2)))

    def test_scalar_broadcast(self):
        out = 1.0 - Tensor([[0.25, 0.5]])
        np.testing.assert_array_equal(out.data, [[0.75, 0.5]])

    def test_abs_gradient(self):
        x = Tensor([-2.0, 0.0, 3.0], requires_grad=True)
        abs(x).sum().backward()
        np.testing.assert_array_equal(x.grad, [-1.0, 0.0, 1.0])


class TestBackward:
    def test_loss_grad_wrt_itself_is_one(self):
        x = Tensor([2.0], requires_grad=True)
        loss = (x * x).sum()
        loss.backward()
        assert loss.grad == pytest.approx(1.0)

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            (x * 2.0).backward()

    def test_grad_accumulates_over_reused_nodes(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * 2.0
        (y + y).sum().backward()
        assert x.grad[0] == pytest.approx(4.0)

    def test_forward_deterministic(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(-1, 1, (3, 5))
        k = rng.uniform(-1, 1, (2, 3, 3))
        a = conv1d(Tensor(x), Tensor(k), 2).data
        b = conv1d(Tensor(x), Tensor(k), 2).data
        np.testing.assert_array_equal(a, b)

    def test_full_chain_gradient(self):
        # conv -> relu -> matmul -> sigmoid -> loss, the whole student path
        rng = np.random.default_rng(7)
        tensors = {"x": random_tensor(rng, (2, 6)),
                   "k": random_tensor(rng, (3, 2, 3)),
                   "w": random_tensor(rng, (4, 3))}

        def chain(t):
            h = relu(conv1d(t["x"], t["k"], 2))
            p = sigmoid(t["w"] @ h)
            return (p * p).mean()

        check_gradients(chain, tensors, rtol=1e-4)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = {"p": np.array([1.0, -2.0])}
        state = adam_state(params)
        adam_step(params, {"p": np.zeros(2)}, state)
        np.testing.assert_array_equal(params["p"], [1.0, -2.0])
        assert state["step"] == 1

    def test_first_step_moves_by_lr(self):
        # bias correction makes step 1 move by ~lr regardless of grad scale
        params = {"p": np.array([0.0])}
        state = adam_state(params)
        adam_step(params, {"p": np.array([1.0])}, state, lr=1e-3)
        assert params["p"][0] == pytest.approx(-1e-3, rel=1e-6)

    def test_two_steps_decrease_quadratic(self):
        x = Tensor([1.5], requires_grad=True)
        opt = Adam({"x": x}, lr=0.1)
        losses = []
        for _ in range(2):
            opt.zero_grad()
            loss = (x * x).sum()
            loss.backward()
            losses.append(loss.item())
            opt.step()
        assert (x.data[0] ** 2) < losses[1] < losses[0]

    def test_nonfinite_gradient_names_parameter(self):
        params = {"bad_param": np.array([0.0])}
        state = adam_state(params)
        with pytest.raises(TrainingError, match="bad_param"):
            adam_step(params, {"bad_param": np.array([np.nan])}, state)
