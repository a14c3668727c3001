import numpy as np
import pytest

from fnsda.dynamics import default_environment_set, generate_dataset
from fnsda.engine import Tensor, gradients, no_grad
from fnsda.errors import UsageError
from fnsda.model import EnvContext, ModelConfig, count_params, init_params
from fnsda.optim import AdamState
from fnsda.pipelines import (
    AdaptSettings,
    TrainSettings,
    adapt,
    baseline_adapt_full,
    baseline_train_erm,
    load_checkpoint,
    params_digest,
    rollout_loss,
    save_checkpoint,
    train,
)


def small_config(**kw):
    base = dict(
        family="lv", layers=2, width=8, modes=4, context_dim=4, state_channels=2
    )
    base.update(kw)
    return ModelConfig(**base)


def settings(steps, **kw):
    base = dict(steps=steps, lr=2e-3, weight_decay=1e-4, warmup_steps=min(steps // 5, 50),
                batch_traj=4, starts_per_traj=8)
    base.update(kw)
    return TrainSettings(**base)


@pytest.fixture(scope="module")
def lv_bundle():
    env_set = default_environment_set("lv", n_tr=4, n_ev=3)
    return generate_dataset(env_set, seed=9)


class TestTrain:
    def test_zero_steps_checkpoint_is_initialization(self, lv_bundle):
        config = small_config()
        ckpt, run = train(lv_bundle, config, settings(0), seed=5)
        np.testing.assert_array_equal(ckpt.mean_context.c.data, np.zeros(4))
        fresh = init_params(small_config(init_seed=5))
        assert params_digest(ckpt.params) == params_digest(fresh)
        assert ckpt.meta["steps"] == 0.0

    def test_contexts_start_at_zero_and_move(self, lv_bundle):
        config = small_config()
        ckpt, run = train(lv_bundle, config, settings(40), seed=1)
        assert len(ckpt.contexts) == 9
        moved = [np.linalg.norm(c.c.data) for c in ckpt.contexts.values()]
        assert all(m > 0 for m in moved)

    def test_loss_decreases(self, lv_bundle):
        config = small_config()
        ckpt, run = train(lv_bundle, config, settings(150), seed=2)
        first = np.mean(run.loss_history[:10])
        last = np.mean(run.loss_history[-10:])
        assert last < first

    def test_train_deterministic_bitwise(self, lv_bundle):
        config = small_config()
        c1, _ = train(lv_bundle, config, settings(25), seed=3)
        c2, _ = train(lv_bundle, small_config(), settings(25), seed=3)
        assert params_digest(c1.params) == params_digest(c2.params)
        np.testing.assert_array_equal(c1.mean_context.c.data, c2.mean_context.c.data)

    def test_mean_context_is_mean(self, lv_bundle):
        config = small_config()
        ckpt, run = train(lv_bundle, config, settings(30), seed=4)
        stacked = np.stack([ckpt.contexts[e].c.data for e in sorted(ckpt.contexts)])
        np.testing.assert_allclose(ckpt.mean_context.c.data, stacked.mean(axis=0), atol=1e-15)


class TestErm:
    def test_erm_has_no_per_env_contexts(self, lv_bundle):
        config = small_config()
        ckpt, run = baseline_train_erm(lv_bundle, config, settings(20), seed=1)
        assert ckpt.contexts == {}
        assert not ckpt.config.contexts_enabled
        assert ckpt.config.partition == "all_shared"

    def test_erm_equals_train_under_same_flags(self, lv_bundle):
        config = small_config(partition="all_shared", contexts_enabled=False)
        c1, r1 = train(lv_bundle, config, settings(30), seed=7)
        c2, r2 = baseline_train_erm(lv_bundle, small_config(), settings(30), seed=7)
        np.testing.assert_array_equal(r1.loss_history, r2.loss_history)
        assert params_digest(c1.params) == params_digest(c2.params)

    def test_erm_adp_updates_everything(self, lv_bundle):
        config = small_config()
        ckpt, _ = baseline_train_erm(lv_bundle, config, settings(10), seed=1)
        before = params_digest(ckpt.params)
        ctx, updated, hist = baseline_adapt_full(
            ckpt, lv_bundle.eval[10][:1], "inter", AdaptSettings(steps=5, lr=1e-3)
        )
        assert params_digest(ckpt.params) != before
        assert updated == count_params(ckpt.params) + ctx.c.size + ctx.beta.size


class TestAdapt:
    def test_frozen_digest_and_update_surface(self, lv_bundle):
        config = small_config()
        ckpt, _ = train(lv_bundle, config, settings(30), seed=6)
        before = params_digest(ckpt.params)
        result = adapt(ckpt, lv_bundle.eval[10][:1], "inter", AdaptSettings(steps=8, lr=1e-3), env_index=4)
        assert result.frozen_intact
        assert result.digest_before == before == params_digest(ckpt.params)
        assert result.updated_scalars == 4 + 2  # d_c + L
        assert not np.array_equal(result.context.c.data, ckpt.mean_context.c.data)

    def test_zero_steps_returns_mean_context(self, lv_bundle):
        config = small_config()
        ckpt, _ = train(lv_bundle, config, settings(20), seed=6)
        result = adapt(ckpt, lv_bundle.eval[10][:1], "inter", AdaptSettings(steps=0, lr=1e-3))
        np.testing.assert_array_equal(result.context.c.data, ckpt.mean_context.c.data)
        np.testing.assert_array_equal(result.context.beta.data, ckpt.mean_context.beta.data)

    def test_inter_requires_exactly_one_trajectory(self, lv_bundle):
        config = small_config()
        ckpt, _ = train(lv_bundle, config, settings(5), seed=6)
        with pytest.raises(UsageError):
            adapt(ckpt, lv_bundle.eval[10][:2], "inter", AdaptSettings(steps=1, lr=1e-3))

    def test_extra_needs_prefix_length(self, lv_bundle):
        config = small_config()
        ckpt, _ = train(lv_bundle, config, settings(5), seed=6)
        with pytest.raises(UsageError):
            adapt(ckpt, lv_bundle.eval[10], "extra", AdaptSettings(steps=1, lr=1e-3))
        result = adapt(
            ckpt, lv_bundle.eval[10], "extra", AdaptSettings(steps=2, lr=1e-3), adapt_frames=10
        )
        assert result.frozen_intact

    def test_adapting_on_train_env_recovers_its_loss(self, lv_bundle):
        config = small_config()
        ckpt, run = train(lv_bundle, config, settings(250), seed=8)
        env_losses = [
            (i, l) for i, l in enumerate(run.loss_history[-9:])
        ]
        result = adapt(
            ckpt, lv_bundle.train[0][:1], "inter",
            AdaptSettings(steps=150, lr=2e-3), env_index=0,
        )
        with no_grad():
            final = result.loss_history[-1]
        train_loss = np.mean(run.loss_history[-36::9])  # env 0's recent visits
        assert final < 2 * train_loss + 1e-6

    def test_regularizer_pulls_context_toward_zero(self, lv_bundle):
        """Large lambda shrinks an offset context monotonically."""
        config = small_config()
        params = init_params(config)
        ctx = EnvContext.fresh(config)
        ctx.c.data[:] = 1.0
        states = np.stack([t.states for t in lv_bundle.train[0][:2]])
        opt = AdamState(lr=1e-2)
        norms = [np.linalg.norm(ctx.c.data)]
        for _ in range(60):
            loss = rollout_loss(params, ctx, states, 0.5, config, "lv", lam=10.0, reg="l2")
            grads = gradients(loss, {"c": ctx.c, "beta": ctx.beta})
            opt.step({"c": ctx.c}, {"c": grads["c"]})
            norms.append(np.linalg.norm(ctx.c.data))
        drops = sum(b < a for a, b in zip(norms, norms[1:]))
        assert drops >= 55
        assert norms[-1] < 0.5 * norms[0]


class TestCheckpointRoundtrip:
    def test_bitwise_roundtrip(self, tmp_path, lv_bundle):
        config = small_config()
        ckpt, _ = train(lv_bundle, config, settings(12), seed=11)
        path = str(tmp_path / "model.fnsc")
        save_checkpoint(ckpt, path)
        back = load_checkpoint(path)
        assert params_digest(back.params) == params_digest(ckpt.params)
        assert back.config == ckpt.config
        assert sorted(back.contexts) == sorted(ckpt.contexts)
        for e in ckpt.contexts:
            np.testing.assert_array_equal(back.contexts[e].c.data, ckpt.contexts[e].c.data)
            np.testing.assert_array_equal(back.contexts[e].beta.data, ckpt.contexts[e].beta.data)
        np.testing.assert_array_equal(back.mean_context.c.data, ckpt.mean_context.c.data)
        assert back.meta["seed"] == 11.0

    def test_identical_runs_identical_files(self, tmp_path, lv_bundle):
        config = small_config()
        p1, p2 = str(tmp_path / "a.fnsc"), str(tmp_path / "b.fnsc")
        save_checkpoint(train(lv_bundle, config, settings(12), seed=2)[0], p1)
        save_checkpoint(train(lv_bundle, small_config(), settings(12), seed=2)[0], p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()
