from collections import Counter

import numpy as np
import pytest

from lfdense.core import ModeTensor, grad_check, mse_loss, view_stack
from lfdense.data import LightField, extract_sparse, make_pattern, synth_lf
from lfdense.net import NetworkConfig, build_network, forward
from lfdense.train import (
    AdamState,
    NonFiniteError,
    TrainConfig,
    adam_step,
    augment,
    augment_array,
    dihedral_inverse,
    load_moments,
    loss_and_grads,
    sample_batch,
    save_moments,
    train,
)

SMALL = NetworkConfig(n_cb=1, n_s=1, growth=2, bottleneck_kernel=1, bottleneck_channels=2)


def scene(seed=0, size=10, d=1):
    tex = np.random.default_rng(seed).random((size + 7 * d + 4, size + 7 * d + 4))
    return synth_lf(tex, d, 8, 8, size, size)


class TestLoss:
    def test_zero(self):
        a = np.random.default_rng(0).random((3, 4, 4))
        assert float(mse_loss(a, a)) == 0.0

    def test_constant_offset(self):
        a = np.zeros((3, 4, 4))
        assert float(mse_loss(a + 0.5, a, "mean")) == 0.25

    def test_sum_matches_loop(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((2, 3, 5)), rng.random((2, 3, 5))
        ref = 0.0
        for i in np.ndindex(a.shape):
            ref += (a[i] - b[i]) ** 2
        assert abs(float(mse_loss(a, b, "sum")) - ref) <= 1e-12 * ref


class TestAdam:
    def test_zero_gradient(self):
        p = [np.ones((2, 3))]
        new, _ = adam_step(p, [np.zeros((2, 3))], AdamState.fresh(p), 1, lr=0.1)
        assert np.array_equal(new[0], p[0])

    def test_first_step_is_signed_lr(self):
        rng = np.random.default_rng(2)
        p = [rng.standard_normal(50)]
        # eps/|g| must sit well below the 1e-6 tolerance
        g = [rng.choice([-1, 1], 50) * rng.uniform(0.1, 3.0, 50)]
        lr = 1e-3
        new, _ = adam_step(p, g, AdamState.fresh(p), 1, lr=lr)
        assert np.max(np.abs(new[0] - p[0] + lr * np.sign(g[0]))) < lr * 1e-6

    def test_two_step_unroll(self):
        p0, g = np.array([0.3, -1.2]), np.array([0.7, -0.05])
        b1, b2, eps, lr = 0.9, 0.999, 1e-8, 1e-2
        p, st = [p0.copy()], AdamState.fresh([p0])
        for t in (1, 2):
            p, st = adam_step(p, [g], st, t, b1, b2, eps, lr)
        m1, v1 = (1 - b1) * g, (1 - b2) * g * g
        x1 = p0 - lr * (m1 / (1 - b1)) / (np.sqrt(v1 / (1 - b2)) + eps)
        m2, v2 = b1 * m1 + (1 - b1) * g, b2 * v1 + (1 - b2) * g * g
        x2 = x1 - lr * (m2 / (1 - b1 ** 2)) / (np.sqrt(v2 / (1 - b2 ** 2)) + eps)
        np.testing.assert_allclose(p[0], x2, rtol=0, atol=1e-12)

    def test_non_finite(self):
        p = [np.zeros(2)]
        with pytest.raises(NonFiniteError):
            adam_step(p, [np.array([np.nan, 0])], AdamState.fresh(p), 1)

    def test_moments_round_trip(self, tmp_path):
        m = build_network(SMALL)
        st = AdamState(7, [a + 1 for a in m.arrays()], [a * 2 for a in m.arrays()])
        save_moments(st, m, tmp_path / "x.sadm")
        back = load_moments(tmp_path / "x.sadm", m)
        assert back.step == 7
        assert all(np.array_equal(a, b) for a, b in zip(back.m + back.v, st.m + st.v))


class TestAugment:
    def test_identity(self):
        x = np.random.default_rng(3).random((2, 2, 4, 4, 1))
        assert np.array_equal(augment_array(x, 0), x)

    @pytest.mark.parametrize("g", range(8))
    def test_inverse(self, g):
        x = np.random.default_rng(4).random((3, 3, 5, 5, 2))
        assert np.array_equal(augment_array(augment_array(x, g), dihedral_inverse(g)), x)

    def test_orbit_has_eight_members(self):
        x = np.random.default_rng(5).random((2, 2, 4, 4, 1))
        orbit = {augment_array(x, g).tobytes() for g in range(8)}
        assert len(orbit) == 8

    def test_closure(self):
        x = np.random.default_rng(6).random((2, 2, 4, 4, 1))
        orbit = {augment_array(x, g).tobytes() for g in range(8)}
        for g in range(8):
            for h in range(8):
                assert augment_array(augment_array(x, g), h).tobytes() in orbit

    @pytest.mark.parametrize("task", ["2x2to8x8", "3x3to9x9"])
    @pytest.mark.parametrize("g", range(8))
    def test_commutes_with_input_split(self, task, g):
        p = make_pattern(task)
        lf = LightField(np.random.default_rng(7).random(p.grid + (4, 4, 1)), "y_only")
        lhs = extract_sparse(augment(lf, g), p)[0].data
        rhs = augment_array(extract_sparse(lf, p)[0].data, g)
        assert np.array_equal(lhs, rhs)

    def test_light_field_wrapper(self):
        lf = LightField(np.random.default_rng(8).random((2, 2, 3, 3, 3)))
        out = augment(lf, 5)
        assert out.colorspace == "rgb" and np.array_equal(out.data, augment_array(lf.data, 5))


class TestSampler:
    def test_deterministic(self):
        p, cfg = make_pattern("2x2to8x8"), TrainConfig(patch_size=6, seed=3)
        a = sample_batch([scene()], p, cfg, 11)
        b = sample_batch([scene()], p, cfg, 11)
        assert [s.provenance for s in a] == [s.provenance for s in b]
        assert all(np.array_equal(x.input, y.input) for x, y in zip(a, b))
        assert a[0].input.shape == (2, 2, 6, 6, 1) and a[0].target.shape == (60, 6, 6)

    def test_full_patch_offset(self):
        p, cfg = make_pattern("2x2to8x8"), TrainConfig(patch_size=10)
        for it in range(1, 20):
            assert all(s.provenance[1] == (0, 0) for s in sample_batch([scene()], p, cfg, it))

    def test_scene_frequencies(self):
        p = make_pattern("2x2to8x8")
        scenes = [np.zeros((8, 8, 2, 2)) for _ in range(4)]
        cfg = TrainConfig(patch_size=2, batch_size=10, seed=1)
        counts = Counter(s.provenance[0] for it in range(1000) for s in sample_batch(scenes, p, cfg, it))
        assert sum(counts.values()) == 10_000
        assert all(0.2 <= counts[i] / 10_000 <= 0.3 for i in range(4))

    def test_patch_too_large(self):
        with pytest.raises(ValueError):
            sample_batch([scene()], make_pattern("2x2to8x8"), TrainConfig(patch_size=11), 1)


class TestLoop:
    def test_zero_iterations(self):
        m0 = build_network(SMALL, seed=0)
        res = train(SMALL, TrainConfig(iterations=0), [scene()], make_pattern("2x2to8x8"))
        assert res.log == []
        assert all(np.array_equal(a, b) for a, b in zip(res.model.arrays(), m0.arrays()))

    def test_resume_matches_uninterrupted(self, tmp_path):
        p = make_pattern("2x2to8x8")
        data = [scene(1), scene(2)]
        full = train(SMALL, TrainConfig(patch_size=6, iterations=6, checkpoint_every=3, seed=4), data, p,
                     out_dir=tmp_path, wall_time=False)
        part = train(SMALL, TrainConfig(patch_size=6, iterations=6, seed=4), data, p,
                     resume=tmp_path / "ckpt_000003.sadn", wall_time=False)
        assert [x[1] for x in part.log] == [x[1] for x in full.log[3:]]
        assert all(np.array_equal(a, b) for a, b in zip(part.model.arrays(), full.model.arrays()))

    def test_loss_decreases(self):
        p = make_pattern("2x2to8x8")
        res = train(SMALL, TrainConfig(patch_size=8, iterations=40, learning_rate=3e-3), [scene(d=0)], p)
        assert res.log[-1][1] < res.log[0][1]

    def test_pattern_mismatch(self):
        with pytest.raises(ValueError):
            train(SMALL, TrainConfig(), [scene()], make_pattern("3x3to9x9"))


class TestNetworkGradient:
    def test_two_block_gradient(self):
        cfg = NetworkConfig(n_cb=2, n_s=2, growth=3, bottleneck_kernel=3, bottleneck_channels=3)
        m = build_network(cfg, seed=1, dtype=np.float64)
        rng = np.random.default_rng(2)
        for _, k in m:
            k.bias[...] = rng.standard_normal(k.bias.shape) * 0.1
        x = ModeTensor(rng.random((2, 2, 8, 8, 1)))
        target = rng.random((60, 8, 8))

        def f(tape):
            return mse_loss(view_stack(forward(m, x, tape), tape), target, "mean", tape)

        for leaf in (x, m["cb1.s1"].weights, m["cb2.a1"].weights, m["bottleneck"].bias, m["head"].weights):
            assert grad_check(f, leaf, max_coords=40) < 1e-5

    def test_batch_gradient_is_mean(self):
        m = build_network(SMALL, seed=3, dtype=np.float64)
        batch = sample_batch([scene()], make_pattern("2x2to8x8"), TrainConfig(patch_size=4, batch_size=2), 1)
        loss, grads = loss_and_grads(m, batch)
        singles = [loss_and_grads(m, [s]) for s in batch]
        assert loss == pytest.approx((singles[0][0] + singles[1][0]) / 2, rel=1e-12)
        for i, g in enumerate(grads):
            np.testing.assert_allclose(g, (singles[0][1][i] + singles[1][1][i]) / 2, rtol=1e-12, atol=1e-15)
