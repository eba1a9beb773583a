import numpy as np
import pytest

from graphcast.errors import ContractError, DimensionError, EmptyInputError, OracleError
from graphcast.numcore import (
    ParamSet,
    Tensor,
    affine,
    backward,
    finite_diff_check,
    matmul,
    mse_loss,
    relu,
    reshape,
    select_row,
    stack,
)


class TestMatmul:
    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(np.eye(2), m).data, m)

    def test_hand_case(self):
        # [[1,2]] @ [[3],[4]] = [[1*3 + 2*4]] = [[11]]
        out = matmul([[1.0, 2.0]], [[3.0], [4.0]])
        assert out.data.tolist() == [[11.0]]

    def test_zero_left(self):
        out = matmul(np.zeros((2, 2)), np.arange(6.0).reshape(2, 3))
        assert np.array_equal(out.data, np.zeros((2, 3)))

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_associativity_on_random_chains(self, rng):
        for _ in range(50):
            a, b, c = (rng.normal(size=(4, 4)) for _ in range(3))
            left = matmul(matmul(a, b), c).data
            right = matmul(a, matmul(b, c)).data
            denom = np.abs(left) + np.abs(right) + 1e-12
            assert np.max(np.abs(left - right) / denom) < 1e-9


class TestAffine:
    def test_zero_weight_gives_bias_column(self):
        out = affine(np.ones((3, 2)), np.zeros((1, 2)), np.array([5.0]))
        assert np.array_equal(out.data, np.full((3, 1), 5.0))

    def test_hand_case(self):
        # [1,1] . [2,3] + 1 = 6
        out = affine([[1.0, 1.0]], [[2.0, 3.0]], [1.0])
        assert out.data.tolist() == [[6.0]]

    def test_identity_weight_zero_bias(self, rng):
        x = rng.normal(size=(4, 3))
        out = affine(x, np.eye(3), np.zeros(3))
        assert np.allclose(out.data, x)

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            affine(np.ones((2, 3)), np.ones((1, 4)), np.zeros(1))


class TestRelu:
    def test_sign_cases(self):
        assert relu(np.array([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]

    def test_all_negative(self):
        assert np.array_equal(relu(-np.ones((2, 2))).data, np.zeros((2, 2)))

    def test_all_positive_unchanged(self, rng):
        x = np.abs(rng.normal(size=5)) + 0.1
        assert np.array_equal(relu(x).data, x)

    def test_grad_zero_at_exactly_zero(self):
        p = ParamSet([("x", np.array([0.0, -1.0, 2.0]))])
        loss = mse_loss(relu(p["x"]), np.zeros(3))
        grads = backward(loss, p)
        assert grads["x"].data[0] == 0.0 and grads["x"].data[1] == 0.0


class TestMseLoss:
    def test_equal_inputs_zero(self, rng):
        v = rng.normal(size=7)
        assert mse_loss(v, v.copy()).item() == 0.0

    def test_hand_case(self):
        # ((2-1)^2 + (4-2)^2) / 2 = 2.5
        assert mse_loss(np.array([2.0, 4.0]), np.array([1.0, 2.0])).item() == 2.5

    def test_single_element(self):
        assert mse_loss(np.array([3.0]), np.array([0.0])).item() == 9.0

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            mse_loss(np.array([]), np.array([]))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            mse_loss(np.zeros(2), np.zeros(3))

    def test_nonnegative_and_zero_iff_equal(self, rng):
        for _ in range(25):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            value = mse_loss(a, b).item()
            assert value >= 0.0
            assert (value == 0.0) == bool(np.array_equal(a, b))


class TestBackward:
    def test_chain_rule_hand_case(self):
        # loss = (w*x - y)^2 with w=1, x=2, y=0 -> d/dw = 2*(w*x - y)*x = 8
        p = ParamSet([("w", np.array([[1.0]]))])
        loss = mse_loss(matmul([[2.0]], p["w"]), np.array([0.0]))
        assert backward(loss, p)["w"].data.tolist() == [[8.0]]

    def test_unused_param_gets_zeros(self):
        p = ParamSet([("used", np.array([[1.0]])), ("unused", np.ones((2, 2)))])
        loss = mse_loss(matmul([[1.0]], p["used"]), np.array([0.0]))
        grads = backward(loss, p)
        assert np.array_equal(grads["unused"].data, np.zeros((2, 2)))
        assert grads.keys() == {"used", "unused"}

    def test_dead_relu_blocks_gradient(self):
        p = ParamSet([("w", np.array([[-3.0]]))])
        # pre-activation w*x is negative, so the unit is dead
        loss = mse_loss(relu(matmul([[2.0]], p["w"])), np.array([1.0]))
        assert backward(loss, p)["w"].data.tolist() == [[0.0]]

    def test_non_scalar_loss_rejected(self):
        p = ParamSet([("w", np.ones((2, 2)))])
        with pytest.raises(ContractError):
            backward(relu(p["w"]), p)

    def test_fanout_accumulates(self):
        # loss = mean(w^2, w^2) = w^2 with w used twice: d/dw = 2w = 6
        p = ParamSet([("w", np.array([3.0]))])
        doubled = stack([p["w"], p["w"]])
        loss = mse_loss(reshape(doubled, (2,)), np.zeros(2))
        assert backward(loss, p)["w"].data.tolist() == [6.0]


class TestPlumbingOps:
    def test_select_row_forward_and_grad(self):
        p = ParamSet([("h", np.arange(6.0).reshape(3, 2))])
        row = select_row(p["h"], 1)
        assert row.data.tolist() == [[2.0, 3.0]]
        loss = mse_loss(row, np.zeros(2))
        grads = backward(loss, p)["h"].data
        assert grads[0].tolist() == [0.0, 0.0] and grads[2].tolist() == [0.0, 0.0]
        assert grads[1].tolist() == [2.0, 3.0]

    def test_select_row_out_of_range(self):
        with pytest.raises(DimensionError):
            select_row(np.zeros((2, 2)), 5)

    def test_stack_scalars(self):
        tensors = [reshape(Tensor([v]), ()) for v in (1.0, 2.0, 3.0)]
        assert stack(tensors).data.tolist() == [1.0, 2.0, 3.0]

    def test_stack_shape_mismatch(self):
        with pytest.raises(DimensionError):
            stack([Tensor(np.zeros(2)), Tensor(np.zeros(3))])

    def test_reshape_bad_size(self):
        with pytest.raises(DimensionError):
            reshape(Tensor(np.zeros(4)), (3,))


def _random_two_layer_loss(rng):
    """A 2-layer ReLU MLP loss with inputs resampled away from ReLU kinks."""
    while True:
        w1 = rng.normal(size=(4, 3))
        b1 = rng.normal(size=4)
        w2 = rng.normal(size=(1, 4))
        b2 = rng.normal(size=1)
        x = rng.normal(size=(5, 3))
        y = rng.normal(size=5)
        pre = x @ w1.T + b1
        if np.min(np.abs(pre)) >= 1e-4:
            break
    params = ParamSet([("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)])

    def f(p):
        h = relu(affine(Tensor(x), p["w1"], p["b1"]))
        return mse_loss(affine(h, p["w2"], p["b2"]), y)

    return f, params


class TestFiniteDiffOracle:
    def test_quadratic_nearly_exact(self):
        p = ParamSet([("w", np.array([[1.5, -0.5]]))])

        def f(ps):
            return mse_loss(matmul(ps["w"], np.array([[2.0], [3.0]])), np.array([1.0]))

        assert finite_diff_check(f, p) < 1e-8

    def test_constant_function_zero_error(self):
        p = ParamSet([("w", np.ones(3))])

        def f(ps):
            return mse_loss(np.array([1.0]), np.array([1.0]))

        assert finite_diff_check(f, p) == 0.0

    def test_random_mlp_losses(self, rng):
        for _ in range(3):
            f, params = _random_two_layer_loss(rng)
            assert finite_diff_check(f, params) < 1e-5

    def test_nonfinite_function_raises(self):
        p = ParamSet([("w", np.array([1.0]))])

        def f(ps):
            return Tensor(np.array(np.inf))

        with pytest.raises(OracleError):
            finite_diff_check(f, p)


class TestDeterminism:
    def test_bit_identical_outputs(self, rng):
        a = rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 3))
        first = relu(matmul(a, b)).data
        second = relu(matmul(a.copy(), b.copy())).data
        assert np.array_equal(first, second)

    def test_tensor_is_float64_row_major(self):
        t = Tensor([[1, 2], [3, 4]])
        assert t.data.dtype == np.float64
        assert t.data.flags["C_CONTIGUOUS"]
        assert t.size == 4
