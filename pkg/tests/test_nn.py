import numpy as np
import pytest

from cellscope import nn
from cellscope.errors import InvalidArchitectureError, ShapeMismatchError
from conftest import one_hot_targets, random_spans_layout


def small_net_layout():
    """6-4-2-4-6 net over 2 categorical (widths 2, 3) + 1 numeric attribute."""
    from cellscope.schema import AttributeSpec, Kind, Schema

    schema = Schema(
        (
            AttributeSpec("c0", Kind.CATEGORICAL, categories=("a", "b")),
            AttributeSpec("c1", Kind.CATEGORICAL, categories=("x", "y", "z")),
            AttributeSpec("n0", Kind.NUMERIC, mean=0.0, std_dev=1.0),
        )
    )
    return schema, schema.layout()


def loss_of_params(stack, batch, target, layout, mask=None, alpha=None):
    _, output, _ = nn.forward(stack, batch)
    if alpha is None:
        breakdown, _ = nn.mixed_loss(output, target, layout)
        return breakdown.total
    total, _ = nn.enhanced_loss(output, target, layout, mask, alpha)
    return total


def analytic_grads(stack, batch, target, layout, mask=None, alpha=None):
    _, output, cache = nn.forward(stack, batch)
    if alpha is None:
        _, grad = nn.mixed_loss(output, target, layout)
    else:
        _, grad = nn.enhanced_loss(output, target, layout, mask, alpha)
    return nn.backward(stack, cache, grad)


def finite_difference_check(stack, batch, target, layout, mask=None, alpha=None, h=1e-5):
    """Max relative error between analytic and central-difference gradients."""
    grads = analytic_grads(stack, batch, target, layout, mask, alpha)
    worst = 0.0
    for p, g in zip(stack.parameters(), grads):
        flat_p = p.ravel()
        flat_g = g.ravel()
        for idx in range(flat_p.size):
            keep = flat_p[idx]
            flat_p[idx] = keep + h
            up = loss_of_params(stack, batch, target, layout, mask, alpha)
            flat_p[idx] = keep - h
            down = loss_of_params(stack, batch, target, layout, mask, alpha)
            flat_p[idx] = keep
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric), abs(flat_g[idx]), 1e-8)
            worst = max(worst, abs(numeric - flat_g[idx]) / denom)
    return worst


class TestInit:
    def test_credit_style_architecture(self):
        stack = nn.init((160, 128, 64, 128, 160), seed=0, encoded_width=160)
        assert stack.n_layers == 4
        assert stack.widths[0] == stack.widths[-1] == 160
        assert stack.bottleneck_width == 64

    def test_glorot_variance(self):
        stack = nn.init((160, 128, 64, 128, 160), seed=1)
        w = stack.weights[0]  # 160 x 128
        expected = 2.0 / (160 + 128)
        assert w.var() == pytest.approx(expected, rel=0.10)
        assert all(not b.any() for b in stack.biases)

    def test_determinism(self):
        a = nn.init((6, 4, 2, 4, 6), seed=7)
        b = nn.init((6, 4, 2, 4, 6), seed=7)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_asymmetric_widths_rejected(self):
        with pytest.raises(InvalidArchitectureError):
            nn.init((6, 4, 2, 3, 6), seed=0)
        with pytest.raises(InvalidArchitectureError):
            nn.init((6, 4, 6), seed=0, encoded_width=7)


class TestForward:
    def test_zero_parameters_give_zero_output(self):
        stack = nn.init((6, 4, 2, 4, 6), seed=0)
        for w in stack.weights:
            w[:] = 0.0
        _, out, _ = nn.forward(stack, np.random.default_rng(0).normal(size=(3, 6)))
        np.testing.assert_array_equal(out, np.zeros((3, 6)))

    def test_batch_rows_independent(self):
        stack = nn.init((6, 4, 2, 4, 6), seed=1)
        batch = np.random.default_rng(1).normal(size=(5, 6))
        _, full, _ = nn.forward(stack, batch)
        for i in range(5):
            _, single, _ = nn.forward(stack, batch[i : i + 1])
            np.testing.assert_allclose(single[0], full[i], rtol=1e-12, atol=1e-12)

    def test_latent_width(self):
        stack = nn.init((160, 128, 64, 128, 160), seed=2)
        z, _, _ = nn.forward(stack, np.zeros((2, 160)))
        assert z.shape == (2, 64)

    def test_shape_mismatch(self):
        stack = nn.init((6, 4, 2, 4, 6), seed=0)
        with pytest.raises(ShapeMismatchError):
            nn.forward(stack, np.zeros((2, 5)))


class TestMixedLoss:
    def test_confident_correct_logits_vanishing_nll(self):
        schema, layout = small_net_layout()
        target = np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.5]])
        output = np.array([[50.0, -50.0, -50.0, 50.0, -50.0, 0.5]])
        breakdown, _ = nn.mixed_loss(output, target, layout)
        assert breakdown.total == pytest.approx(0.0, abs=1e-12)

    def test_numeric_identity_zero_error(self):
        schema, layout = small_net_layout()
        target = one_hot_targets(np.random.default_rng(0), layout, 4)
        breakdown, _ = nn.mixed_loss(target.copy(), target, layout)
        assert breakdown.per_attribute[2] == pytest.approx(0.0)

    def test_uniform_logits_log_two(self):
        from cellscope.schema import AttributeSpec, Kind, Schema

        schema = Schema((AttributeSpec("c", Kind.CATEGORICAL, categories=("a", "b")),))
        breakdown, _ = nn.mixed_loss(
            np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]), schema.layout()
        )
        assert breakdown.total == pytest.approx(np.log(2), abs=1e-12)

    def test_loss_terms_nonnegative(self):
        schema, layout = small_net_layout()
        rng = np.random.default_rng(3)
        output = rng.normal(size=(20, 6)) * 3
        target = one_hot_targets(rng, layout, 20)
        terms = nn.loss_terms(output, target, layout)
        assert (terms >= 0).all()

    def test_softmax_spans_sum_to_one(self):
        from cellscope.backend import span_softmax

        schema, layout = small_net_layout()
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 6)) * 10
        probs = span_softmax(x, layout.cat_starts, layout.cat_widths)
        np.testing.assert_allclose(probs[:, 0:2].sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(probs[:, 2:5].sum(axis=1), 1.0, atol=1e-9)


class TestEnhancedLoss:
    def test_alpha_extremes_select_mask_sides(self):
        schema, layout = small_net_layout()
        rng = np.random.default_rng(5)
        output = rng.normal(size=(6, 6))
        target = one_hot_targets(rng, layout, 6)
        mask = rng.integers(0, 2, size=(6, 3))
        terms = nn.loss_terms(output, target, layout)
        corrupted_only, _ = nn.enhanced_loss(output, target, layout, mask, alpha=1.0)
        clean_only, _ = nn.enhanced_loss(output, target, layout, mask, alpha=0.0)
        assert corrupted_only == pytest.approx((terms * mask).sum() / 6)
        assert clean_only == pytest.approx((terms * (1 - mask)).sum() / 6)

    def test_half_alpha_all_ones_mask_halves_total(self):
        schema, layout = small_net_layout()
        rng = np.random.default_rng(6)
        output = rng.normal(size=(4, 6))
        target = one_hot_targets(rng, layout, 4)
        breakdown, _ = nn.mixed_loss(output, target, layout)
        total, _ = nn.enhanced_loss(output, target, layout, np.ones((4, 3)), alpha=0.5)
        assert total == pytest.approx(0.5 * breakdown.total)

    def test_alpha_one_all_ones_mask_equals_mixed(self):
        schema, layout = small_net_layout()
        rng = np.random.default_rng(7)
        output = rng.normal(size=(4, 6))
        target = one_hot_targets(rng, layout, 4)
        breakdown, grad_mixed = nn.mixed_loss(output, target, layout)
        total, grad_enh = nn.enhanced_loss(output, target, layout, np.ones((4, 3)), alpha=1.0)
        assert total == pytest.approx(breakdown.total)
        np.testing.assert_allclose(grad_enh, grad_mixed, rtol=1e-12)


class TestBackward:
    def test_gradients_match_finite_differences_mixed(self):
        schema, layout = small_net_layout()
        rng = np.random.default_rng(8)
        stack = nn.init((6, 4, 2, 4, 6), seed=8)
        batch = rng.normal(size=(5, 6))
        target = one_hot_targets(rng, layout, 5)
        assert finite_difference_check(stack, batch, target, layout) < 1e-4

    def test_gradients_match_finite_differences_enhanced(self):
        schema, layout = small_net_layout()
        rng = np.random.default_rng(9)
        stack = nn.init((6, 4, 2, 4, 6), seed=9)
        batch = rng.normal(size=(5, 6))
        target = one_hot_targets(rng, layout, 5)
        mask = rng.integers(0, 2, size=(5, 3))
        worst = finite_difference_check(stack, batch, target, layout, mask, alpha=0.3)
        assert worst < 1e-4

    def test_zero_output_grad_zero_param_grads(self):
        stack = nn.init((6, 4, 2, 4, 6), seed=10)
        _, _, cache = nn.forward(stack, np.random.default_rng(10).normal(size=(3, 6)))
        grads = nn.backward(stack, cache, np.zeros((3, 6)))
        assert all(not g.any() for g in grads)

    def test_batch_gradient_is_sum_of_rows(self):
        # per-row loss gradients add: feed raw output grads, bypassing the 1/B
        schema, layout = small_net_layout()
        rng = np.random.default_rng(11)
        stack = nn.init((6, 4, 2, 4, 6), seed=11)
        batch = rng.normal(size=(4, 6))
        out_grad = rng.normal(size=(4, 6))
        _, _, cache = nn.forward(stack, batch)
        full = nn.backward(stack, cache, out_grad)
        summed = None
        for i in range(4):
            _, _, ci = nn.forward(stack, batch[i : i + 1])
            gi = nn.backward(stack, ci, out_grad[i : i + 1])
            summed = gi if summed is None else [a + b for a, b in zip(summed, gi)]
        for a, b in zip(full, summed):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


class TestAdam:
    def test_first_step_is_signed_lr(self):
        # at t=1 the bias-corrected ratio m_hat/sqrt(v_hat) collapses to sign(g)
        stack = nn.init((6, 4, 2, 4, 6), seed=12)
        before = [p.copy() for p in stack.parameters()]
        grads = [
            np.random.default_rng(i).normal(size=p.shape) + 0.5
            for i, p in enumerate(stack.parameters())
        ]
        state = nn.AdamState.for_stack(stack)
        nn.adam_step(stack, grads, state, lr=0.01)
        for p0, p1, g in zip(before, stack.parameters(), grads):
            np.testing.assert_allclose(p1 - p0, -0.01 * np.sign(g), rtol=1e-3)

    def test_zero_gradients_keep_parameters(self):
        stack = nn.init((6, 4, 2, 4, 6), seed=13)
        before = [p.copy() for p in stack.parameters()]
        state = nn.AdamState.for_stack(stack)
        zeros = [np.zeros_like(p) for p in stack.parameters()]
        for _ in range(5):
            nn.adam_step(stack, zeros, state, lr=0.1)
        for p0, p1 in zip(before, stack.parameters()):
            np.testing.assert_array_equal(p0, p1)

    def test_identical_runs_identical_trajectories(self):
        def run():
            stack = nn.init((6, 4, 2, 4, 6), seed=14)
            state = nn.AdamState.for_stack(stack)
            rng = np.random.default_rng(14)
            for _ in range(10):
                grads = [rng.normal(size=p.shape) for p in stack.parameters()]
                nn.adam_step(stack, grads, state, lr=1e-3)
            return stack

        a, b = run(), run()
        for wa, wb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(wa, wb)


class TestCosineSchedule:
    def test_anchors(self):
        assert nn.cosine_lr(0, 100, 0.5) == pytest.approx(0.5)
        assert nn.cosine_lr(100, 100, 0.5) == pytest.approx(0.0, abs=1e-15)
        assert nn.cosine_lr(50, 100, 0.5) == pytest.approx(0.25)


class TestTrainingSmoke:
    def test_loss_decreases_over_first_epochs(self):
        # full-batch epochs so the per-epoch loss is a well-defined objective
        # (mini-batch averages bounce with the shuffle composition)
        from cellscope import TrainConfig, fit_encoder, infer_schema, train_ae
        from cellscope.schema import encode
        from cellscope.synth import make_synthetic_table

        table = make_synthetic_table(n_rows=200, seed=15)
        schema = fit_encoder(table, infer_schema(table))
        x = encode(table, schema)
        model = train_ae(
            x, schema, TrainConfig(max_epochs=10, batch_size=200, seed=15),
            widths=(25, 16, 8, 16, 25),
        )
        history = model.provenance["loss_history"]
        violations = sum(1 for a, b in zip(history, history[1:]) if b >= a)
        assert violations <= 1
