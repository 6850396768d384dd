import numpy as np
import pytest

import sprkit.autodiff as ad
from sprkit.autodiff import AdamW, warmup_cosine_lr
from sprkit.errors import (ContractError, DataFormatError, DimensionError,
                           NumericDomainError)

from conftest import gradcheck


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(ad.tensor([[1.0, 0.0], [0.0, 1.0]]),
                        ad.tensor([[3.0], [4.0]]))
        assert np.array_equal(out.data, [[3.0], [4.0]])

    def test_hand_product(self):
        out = ad.matmul(ad.tensor([[1.0, 2.0]]), ad.tensor([[3.0], [4.0]]))
        assert np.array_equal(out.data, [[11.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            ad.matmul(ad.tensor(np.zeros((2, 3))), ad.tensor(np.zeros((2, 2))))

    def test_grad_of_sum_is_ones_times_bt(self, rng):
        a = ad.param(rng.normal(size=(3, 4)))
        b_val = rng.normal(size=(4, 2))
        loss = ad.reduce_sum(ad.matmul(a, ad.tensor(b_val)))
        ad.backward(loss)
        expected = np.ones((3, 2)) @ b_val.T
        np.testing.assert_allclose(a.grad, expected, rtol=1e-12)
        gradcheck(lambda: ad.reduce_sum(ad.matmul(a, ad.tensor(b_val))), [a])


class TestElementwise:
    def test_add(self):
        out = ad.elementwise(ad.tensor([1.0, 2.0]), ad.tensor([3.0, 4.0]), "add")
        assert np.array_equal(out.data, [4.0, 6.0])

    def test_sub_annihilates(self):
        x = ad.tensor([1.5, -2.0, 7.0])
        assert np.array_equal(ad.sub(x, x).data, np.zeros(3))

    def test_mul_backward_is_other_operand(self, rng):
        a = ad.param(rng.normal(size=(3, 3)))
        b_val = rng.normal(size=(3, 3))
        ad.backward(ad.reduce_sum(ad.mul(a, ad.tensor(b_val))))
        np.testing.assert_allclose(a.grad, b_val, rtol=1e-12)
        gradcheck(lambda: ad.reduce_sum(ad.mul(ad.mul(a, a), ad.tensor(b_val))), [a])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.add(ad.tensor([1.0]), ad.tensor([1.0, 2.0]))


class TestUnary:
    def test_softplus_at_zero(self):
        assert ad.softplus(ad.tensor([0.0])).data[0] == pytest.approx(np.log(2.0))

    def test_exp_at_zero(self):
        assert ad.exp(ad.tensor([0.0])).data[0] == 1.0

    def test_silu_gradient_at_zero(self):
        x = ad.param([0.0])
        ad.backward(ad.reduce_sum(ad.silu(x)))
        assert x.grad[0] == pytest.approx(0.5, abs=1e-12)

    def test_reciprocal_domain_guard(self):
        with pytest.raises(NumericDomainError):
            ad.reciprocal(ad.tensor([1.0, 1e-13]))

    @pytest.mark.parametrize("kind", ["exp", "softplus", "tanh", "silu", "neg"])
    def test_gradcheck_smooth_kinds(self, kind, rng):
        for trial in range(5):
            x = ad.param(rng.normal(size=(2, 3)))
            gradcheck(lambda: ad.reduce_sum(ad.unary(x, kind)), [x])

    def test_gradcheck_reciprocal_sqrt_abs(self, rng):
        for trial in range(5):
            x = ad.param(rng.uniform(0.5, 2.0, size=(4,)))
            gradcheck(lambda: ad.reduce_sum(ad.reciprocal(x)), [x])
            gradcheck(lambda: ad.reduce_sum(ad.sqrt(x)), [x])
            s = ad.param(rng.choice([-1.0, 1.0], size=4) * rng.uniform(0.5, 2.0, size=4))
            gradcheck(lambda: ad.reduce_sum(ad.absolute(s)), [s])

    def test_unknown_kind(self):
        with pytest.raises(ContractError):
            ad.unary(ad.tensor([1.0]), "gelu")


class TestReduce:
    def test_sum(self):
        assert ad.reduce_sum(ad.tensor([1.0, 2.0, 3.0])).item() == 6.0

    def test_mean_of_constants(self):
        assert ad.reduce_mean(ad.tensor(np.full(7, 4.25))).item() == 4.25

    def test_mean_grad_is_one_over_n(self):
        x = ad.param(np.arange(5.0))
        ad.backward(ad.reduce_mean(x))
        np.testing.assert_allclose(x.grad, np.full(5, 0.2), rtol=1e-15)

    def test_axis_reduce_and_grad(self, rng):
        x = ad.param(rng.normal(size=(3, 4)))
        out = ad.reduce(x, "sum", axis=1)
        assert out.shape == (3,)
        gradcheck(lambda: ad.reduce_sum(ad.mul(ad.reduce(x, "mean", axis=0),
                                               ad.reduce(x, "mean", axis=0))), [x])

    def test_bad_axis(self):
        with pytest.raises(DimensionError):
            ad.reduce(ad.tensor(np.zeros((2, 2))), "sum", axis=2)


class TestShapeOps:
    def test_reshape_slice_concat_gradcheck(self, rng):
        x = ad.param(rng.normal(size=(4, 6)))

        def fn():
            a = ad.slice_rows(x, 0, 2)
            b = ad.slice_rows(x, 2, 4)
            joined = ad.concat_rows([a, ad.reshape(b, (2, 6))])
            return ad.reduce_sum(ad.mul(joined, joined))

        gradcheck(fn, [x])

    def test_broadcast_helpers(self):
        row = ad.tensor([[1.0, 2.0, 3.0]])
        assert ad.broadcast_rows(row, 4).shape == (4, 3)
        col = ad.tensor([[1.0], [2.0]])
        assert ad.broadcast_cols(col, 5).shape == (2, 5)


class TestBackward:
    def test_quadratic_leaf_gradient(self):
        w = ad.param([1.0, 2.0])
        ad.backward(ad.reduce_sum(ad.mul(w, w)))
        np.testing.assert_allclose(w.grad, [2.0, 4.0], rtol=1e-15)

    def test_unconnected_leaf_gets_zeros(self):
        x = ad.param([1.0, 2.0])
        w = ad.param([3.0])
        _ = ad.mul(x, x)                        # on the tape, not in the loss
        ad.backward(ad.reduce_sum(ad.mul(w, w)))
        np.testing.assert_array_equal(x.grad, np.zeros(2))

    def test_accumulation_without_reset(self):
        w = ad.param([1.0, 2.0])
        ad.backward(ad.reduce_sum(ad.mul(w, w)))
        ad.backward(ad.reduce_sum(ad.mul(w, w)))
        np.testing.assert_allclose(w.grad, [4.0, 8.0], rtol=1e-15)

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(ContractError):
            ad.backward(ad.tensor([1.0, 2.0]))

    def test_two_layer_chain_matches_finite_differences(self, rng):
        w1 = ad.param(rng.normal(size=(3, 4)) * 0.5)
        w2 = ad.param(rng.normal(size=(4, 2)) * 0.5)
        x = ad.tensor(rng.normal(size=(2, 3)))

        def fn():
            h = ad.tanh(ad.matmul(x, w1))
            return ad.reduce_sum(ad.silu(ad.matmul(h, w2)))

        gradcheck(fn, [w1, w2])

    def test_backward_visits_each_node_once(self):
        x = ad.param([1.0, 2.0])
        y = ad.mul(x, x)
        z = ad.add(y, y)                        # diamond: y feeds z twice
        ad.backward(ad.reduce_sum(z))
        counts = ad.Graph.default.last_visit_counts
        assert counts and max(counts.values()) == 1
        np.testing.assert_allclose(x.grad, [4.0, 8.0], rtol=1e-15)

    def test_determinism_bit_identical(self, rng):
        def run():
            r = np.random.default_rng(77)
            a = ad.param(r.normal(size=(5, 5)))
            b = ad.tensor(r.normal(size=(5, 5)))
            loss = ad.reduce_sum(ad.silu(ad.matmul(a, b)))
            ad.backward(loss)
            return loss.item(), a.grad.copy()
        l1, g1 = run()
        l2, g2 = run()
        assert l1 == l2
        assert np.array_equal(g1, g2)


class TestAdamW:
    def test_zero_grad_zero_decay_is_noop(self):
        w = ad.param([1.0, -2.0])
        w.grad = np.zeros(2)
        opt = AdamW({"w": w}, lr=0.1, weight_decay=0.0)
        opt.step()
        np.testing.assert_array_equal(w.data, [1.0, -2.0])

    def test_descent_on_square(self):
        w = ad.param([1.0])
        opt = AdamW({"w": w}, lr=0.05)
        ad.backward(ad.reduce_sum(ad.mul(w, w)))
        opt.step()
        assert w.data[0] ** 2 < 1.0

    def test_missing_grad_rejected(self):
        w = ad.param([1.0])
        opt = AdamW({"w": w}, lr=0.1)
        with pytest.raises(ContractError, match="w"):
            opt.step()

    def test_converges_to_analytic_minimizer(self):
        # min of f(w) = |w - w*|^2 at w*; cosine-annealed Adam gets within 1e-3.
        target = np.array([0.7, -1.3])
        w = ad.param([0.0, 0.0])
        opt = AdamW({"w": w}, lr=0.05, weight_decay=0.0)
        for step in range(200):
            lr = warmup_cosine_lr(0.05, step, 200, 5)
            diff = ad.sub(w, ad.tensor(target))
            ad.backward(ad.reduce_sum(ad.mul(diff, diff)))
            opt.step(lr)
            opt.zero_grad()
        assert np.linalg.norm(w.data - target) < 1e-3


class TestSchedule:
    def test_linear_warmup_then_cosine(self):
        lrs = [warmup_cosine_lr(1.0, e, 20, 10) for e in range(20)]
        np.testing.assert_allclose(lrs[:10], (np.arange(10) + 1) / 10.0)
        assert lrs[10] == pytest.approx(1.0)
        assert lrs[-1] < lrs[10]
        assert all(a >= b for a, b in zip(lrs[10:], lrs[11:]))

    def test_warmup_must_be_shorter_than_total(self):
        with pytest.raises(ContractError):
            warmup_cosine_lr(1.0, 0, 5, 5)


class TestCheckpoint:
    def test_roundtrip_with_meta(self, tmp_path, rng):
        params = {"a.W": ad.param(rng.normal(size=(3, 2))),
                  "b": ad.param(rng.normal(size=(4,))),
                  "scalar": ad.param(np.float64(2.5))}
        path = tmp_path / "model.ckpt"
        ad.save_checkpoint(path, params, meta={"seed": "7", "config_hash": "abc"})
        loaded, meta = ad.load_checkpoint(path)
        assert meta == {"seed": "7", "config_hash": "abc"}
        assert set(loaded) == set(params)
        for k in params:
            assert np.array_equal(loaded[k], params[k].data)

    def test_magic_checked(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(DataFormatError) as info:
            ad.load_checkpoint(path)
        assert info.value.offset == 0

    def test_truncation_reports_offset(self, tmp_path):
        path = tmp_path / "model.ckpt"
        ad.save_checkpoint(path, {"w": ad.param(np.ones((4, 4)))})
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(DataFormatError) as info:
            ad.load_checkpoint(path)
        assert info.value.offset is not None
