"""Gradient correctness of every tape op against central finite differences."""

import numpy as np
import pytest

from ctxmt import autodiff as ad


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return g


def check_op(build, *arrays):
    """build(tensors) -> output Tensor; compares grads on every input."""
    tensors = [ad.Tensor(a.copy(), requires_grad=True) for a in arrays]

    def loss_value():
        out = build(*[ad.Tensor(t.data, requires_grad=False) for t in tensors])
        return float((out.data * weights).sum())

    out = build(*tensors)
    weights = np.random.default_rng(0).standard_normal(out.data.shape)
    loss = ad.mul(out, ad.Tensor(weights))
    # reduce to scalar through the tape
    total = ad.reshape(loss, (-1,))
    scalar = ad.matmul(ad.reshape(total, (1, -1)), ad.reshape(ad.Tensor(np.ones(total.data.size)), (-1, 1)))
    scalar = ad.reshape(scalar, ())
    ad.backward(scalar)
    for tensor, array in zip(tensors, arrays):
        numeric = numeric_grad(lambda: loss_value(), tensor.data)
        assert tensor.grad is not None
        np.testing.assert_allclose(tensor.grad, numeric, rtol=1e-5, atol=1e-7)


RNG = np.random.default_rng(42)


class TestElementwiseOps:
    def test_add_broadcast(self):
        check_op(ad.add, RNG.standard_normal((3, 4)), RNG.standard_normal((4,)))

    def test_mul_broadcast(self):
        check_op(ad.mul, RNG.standard_normal((2, 3, 4)), RNG.standard_normal((3, 4)))

    def test_relu(self):
        check_op(ad.relu, RNG.standard_normal((5, 6)) + 0.1)

    def test_softmax(self):
        check_op(ad.softmax, RNG.standard_normal((4, 7)))

    def test_log_softmax(self):
        check_op(ad.log_softmax, RNG.standard_normal((4, 7)))

    def test_log_softmax_rows_normalize(self):
        out = ad.log_softmax(ad.Tensor(RNG.standard_normal((9, 13))))
        sums = np.exp(out.data).sum(axis=-1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)


class TestShapeOps:
    def test_matmul(self):
        check_op(ad.matmul, RNG.standard_normal((3, 4)), RNG.standard_normal((4, 5)))

    def test_matmul_batched_weight(self):
        check_op(ad.matmul, RNG.standard_normal((2, 3, 4)), RNG.standard_normal((4, 5)))

    def test_matmul_batched_both(self):
        check_op(ad.matmul, RNG.standard_normal((2, 3, 4)), RNG.standard_normal((2, 4, 5)))

    def test_reshape(self):
        check_op(lambda a: ad.reshape(a, (6, 2)), RNG.standard_normal((3, 4)))

    def test_transpose(self):
        check_op(lambda a: ad.transpose(a, (1, 0, 2)), RNG.standard_normal((2, 3, 4)))

    def test_embedding(self):
        ids = np.array([[0, 2], [1, 2]])
        check_op(lambda t: ad.embedding(t, ids), RNG.standard_normal((3, 4)))

    def test_layer_norm(self):
        check_op(
            ad.layer_norm,
            RNG.standard_normal((3, 5)),
            RNG.standard_normal(5),
            RNG.standard_normal(5),
        )


class TestPickedNll:
    def test_gradient(self):
        logits = RNG.standard_normal((2, 3, 5))
        targets = np.array([[1, 2, 0], [4, 4, 1]])
        weights = np.array([[1.0, 6.0, 1.0], [1.0, 1.0, 0.0]])
        x = ad.Tensor(logits.copy(), requires_grad=True)
        loss = ad.picked_nll(ad.log_softmax(x), targets, weights)
        ad.backward(loss)

        def value():
            out = ad.picked_nll(ad.log_softmax(ad.Tensor(x.data)), targets, weights)
            return float(out.data)

        numeric = numeric_grad(lambda: value(), x.data)
        np.testing.assert_allclose(x.grad, numeric, rtol=1e-5, atol=1e-8)

    def test_value_matches_manual(self):
        logp = np.log(np.full((1, 2, 4), 0.25))
        loss = ad.picked_nll(ad.Tensor(logp), np.array([[0, 3]]), np.array([[1.0, 2.0]]))
        assert float(loss.data) == pytest.approx(3 * np.log(4))


class TestBackward:
    def test_grad_accumulates_across_uses(self):
        x = ad.Tensor(np.array([2.0, 3.0]), requires_grad=True)
        y = ad.add(x, x)
        s = ad.matmul(ad.reshape(y, (1, 2)), ad.reshape(ad.Tensor(np.ones(2)), (2, 1)))
        ad.backward(ad.reshape(s, ()))
        np.testing.assert_allclose(x.grad, [2.0, 2.0])

    def test_requires_scalar(self):
        x = ad.Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            ad.backward(x)

    def test_constants_get_no_grad(self):
        x = ad.Tensor(np.ones((2, 2)), requires_grad=True)
        c = ad.Tensor(np.ones((2, 2)))
        out = ad.mul(x, c)
        scalar = ad.reshape(
            ad.matmul(ad.reshape(out, (1, 4)), ad.reshape(ad.Tensor(np.ones(4)), (4, 1))), ()
        )
        ad.backward(scalar)
        assert c.grad is None
        assert x.grad is not None
