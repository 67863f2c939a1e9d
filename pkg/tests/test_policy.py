import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeronav.errors import ConfigError, TrainingError
from aeronav.geometry import Pose
from aeronav.perception import BBoxFeature, RoiFeature, ScanFeature, SemanticMap, assemble_bundle, zero_bundle
from aeronav.policy import (
    ActorCriticParams,
    ActorCriticPolicy,
    CoverageExplore,
    DualController,
    Mode,
    RandomPolicy,
    ScriptedExplore,
    ScriptedGoal,
    action_mask_for,
    greedy,
    load_checkpoint,
    sample,
    save_checkpoint,
    train_actor_critic,
)
from aeronav.policy.actor_critic import forward, loss_and_grads
from aeronav.policy.trainer import discounted_returns
from aeronav.simulator import Action
from conftest import box_room


def bundle(rho=None, dx=0.0, dy=0.0, z=2.0, valid=True, bbox=None, alt=0.6):
    scan = ScanFeature(np.ones(16) if rho is None else np.asarray(rho, float))
    return assemble_bundle(scan, RoiFeature(dx, dy, z, valid), SemanticMap(np.zeros(49)),
                           bbox or BBoxFeature(), alt)


def box(cx, cy, area=0.02):
    side = math.sqrt(area)
    return BBoxFeature(cx, cy, side, side, area, 0.6, True)


# -- controller --------------------------------------------------------------------

def test_never_detected_stays_exploring():
    c = DualController(None, None)
    assert all(c.switch(False) == Mode.EXPLORE for _ in range(50))


def test_switch_on_first_detection():
    c = DualController(None, None)
    modes = [c.switch(t >= 7) for t in range(12)]
    assert modes[:7] == [Mode.EXPLORE] * 7 and modes[7:] == [Mode.GOAL] * 5


def test_revert_after_k_lost_frames():
    c = DualController(None, None, revert_threshold=5)
    c.switch(True)
    modes = [c.switch(False) for _ in range(5)]
    assert modes == [Mode.GOAL] * 4 + [Mode.EXPLORE]


def _reference_switch(seq, k):
    """Straight-line restatement of the switching rule."""
    active, lost, out = "explore", 0, []
    for present in seq:
        if present:
            active, lost = "goal", 0
        elif active == "goal":
            lost += 1
            if lost == k:
                active, lost = "explore", 0
        out.append(active)
    return out


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_controller_exhaustive(k):
    for seq in itertools.product((False, True), repeat=10):
        c = DualController(None, None, revert_threshold=k)
        got = [c.switch(p).value for p in seq]
        assert got == _reference_switch(seq, k)
        first = seq.index(True) if True in seq else len(seq)
        assert all(m == "explore" for m in got[:first])


def test_controller_validation():
    with pytest.raises(ValueError):
        DualController(None, None, revert_threshold=0)


# -- scripted policies ---------------------------------------------------------------

def test_explore_clear_and_centred_goes_forward():
    assert ScriptedExplore()(bundle()) == Action.FORWARD


def test_explore_turns_away_from_close_right_obstacle():
    rho = np.ones(16)
    rho[15] = 0.1
    assert ScriptedExplore()(bundle(rho)) == Action.TURN_LEFT
    rho = np.ones(16)
    rho[0] = 0.1
    assert ScriptedExplore()(bundle(rho)) == Action.TURN_RIGHT


def test_explore_vertical_dominant_ascends():
    assert ScriptedExplore()(bundle(dy=-0.6)) == Action.ASCEND
    assert ScriptedExplore()(bundle(dy=0.6)) == Action.DESCEND


def _explore_rule(dx, dy):
    """Restated rule table with no obstacle inside the threshold."""
    vert = 2 * dy
    if math.hypot(dx, vert) > 0.3:
        if abs(vert) >= abs(dx):
            return Action.ASCEND if dy < 0 else Action.DESCEND
        return Action.TURN_RIGHT if dx > 0 else Action.TURN_LEFT
    return Action.FORWARD


def test_explore_rule_table_grid():
    grid = np.linspace(-1, 1, 21)
    for dx, dy in itertools.product(grid, grid):
        assert ScriptedExplore()(bundle(dx=dx, dy=dy)) == _explore_rule(dx, dy)


def test_goal_large_centred_box_is_done():
    assert ScriptedGoal()(bundle(bbox=box(0.5, 0.5, 0.2))) == Action.DONE


def test_goal_turns_toward_box():
    assert ScriptedGoal()(bundle(bbox=box(0.9, 0.5))) == Action.TURN_RIGHT
    assert ScriptedGoal()(bundle(bbox=box(0.1, 0.5))) == Action.TURN_LEFT


def test_goal_centres_vertically_then_advances():
    assert ScriptedGoal()(bundle(bbox=box(0.5, 0.2))) == Action.ASCEND
    assert ScriptedGoal()(bundle(bbox=box(0.5, 0.8))) == Action.DESCEND
    assert ScriptedGoal()(bundle(bbox=box(0.5, 0.5))) == Action.FORWARD


def test_goal_falls_back_without_detection():
    g = ScriptedGoal(fallback=ScriptedExplore())
    assert g(bundle(dy=-0.6)) == Action.ASCEND
    assert ScriptedGoal()(bundle(alt=1.5)) == Action.TURN_RIGHT


bundles = st.builds(
    lambda rho, dx, dy, z, valid, present, cx, cy, area, alt: bundle(
        rho, dx, dy, z, valid, box(cx, cy, area) if present else None, alt),
    st.lists(st.floats(0, 1), min_size=16, max_size=16), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 3),
    st.booleans(), st.booleans(), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0.2, 1.6))


@settings(max_examples=200, deadline=None)
@given(bundles)
def test_policies_total_and_deterministic(b):
    params = ActorCriticParams.init(b.size, hidden=8, seed=1)
    for pol in (ScriptedExplore(), ScriptedGoal(), ScriptedGoal(fallback=ScriptedExplore()), RandomPolicy(),
                CoverageExplore(), ActorCriticPolicy(params), ActorCriticPolicy(params, action_mask_for("explore"))):
        mem = pol.reset()
        p1, m1 = pol.act(b, mem)
        p2, _ = pol.act(b, mem)
        np.testing.assert_array_equal(p1, p2)
        assert p1.shape == (6,) and np.all(p1 >= 0) and abs(p1.sum() - 1) <= 1e-9
        assert greedy(p1) in list(Action)


def test_random_policy_never_done():
    p, _ = RandomPolicy().act(zero_bundle())
    assert p[int(Action.DONE)] == 0.0
    rng = np.random.default_rng(0)
    assert {sample(p, rng) for _ in range(500)} == set(Action) - {Action.DONE}


def test_greedy_ties_lowest_index():
    assert greedy(np.full(6, 1 / 6)) == Action.ASCEND


def test_explore_mask_excludes_done():
    params = ActorCriticParams.init(75, hidden=8, seed=0)
    p, _ = ActorCriticPolicy(params, action_mask_for("explore")).act(zero_bundle())
    assert p[int(Action.DONE)] == 0.0
    with pytest.raises(ConfigError):
        action_mask_for("other")


def test_softmax_stable_for_large_logits():
    params = ActorCriticParams.init(75, hidden=8, seed=0)
    params.w_pi *= 1e6
    p, _ = ActorCriticPolicy(params).act(bundle(dx=1.0, dy=-1.0))
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1) <= 1e-9


# -- actor-critic ---------------------------------------------------------------------

def _tiny_batch(seed=0):
    rng = np.random.default_rng(seed)
    params = ActorCriticParams.init(5, hidden=4, seed=seed, entropy_coef=0.05)
    x = rng.uniform(-1, 1, (7, 10))
    acts = rng.integers(0, 6, 7)
    rets = rng.normal(size=7)
    adv = rng.normal(size=7)
    return params, x, acts, rets, adv


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed):
    params, x, acts, rets, adv = _tiny_batch(seed)
    _, grads = loss_and_grads(params, x, acts, rets, adv)
    eps = 1e-6
    for name, arr in params.arrays().items():
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            lp, _ = loss_and_grads(params, x, acts, rets, adv)
            arr[idx] = old - eps
            lm, _ = loss_and_grads(params, x, acts, rets, adv)
            arr[idx] = old
            num[idx] = (lp - lm) / (2 * eps)
        err = np.linalg.norm(grads[name] - num) / max(np.linalg.norm(num), np.linalg.norm(grads[name]), 1e-12)
        assert err <= 1e-4, name


def test_discounted_returns():
    np.testing.assert_allclose(discounted_returns([1.0, 0.0, 2.0], 10.0, 0.5), [1 + 0 + 0.5 + 1.25, 1 + 2.5, 7.0])


def _sampler(i):
    sc = box_room(10, 8, 8, objects=[("Mug", (7, 3, 2), (9, 5, 4))])
    return sc, Pose((0.45, 0.6, 0.45), 0.3 * (i % 5)), "Mug", 100 + i


def test_zero_lr_leaves_params_unchanged():
    p0 = ActorCriticParams.init(75, hidden=8, seed=0, lr=0.0)
    res = train_actor_critic(_sampler, "explore", p0, 3, max_steps=12, n_step=5)
    for name, arr in p0.arrays().items():
        np.testing.assert_array_equal(res.params.arrays()[name], arr)
    assert len(res.curve) == 3


def test_training_deterministic_and_moves_params():
    p0 = ActorCriticParams.init(75, hidden=8, seed=3)
    a = train_actor_critic(_sampler, "goal", p0, 4, max_steps=10, n_step=4)
    b = train_actor_critic(_sampler, "goal", p0, 4, max_steps=10, n_step=4)
    assert a.curve == b.curve
    for name in p0.arrays():
        np.testing.assert_array_equal(a.params.arrays()[name], b.params.arrays()[name])
    assert not np.array_equal(a.params.w1, p0.w1)


def test_non_finite_loss_aborts():
    p0 = ActorCriticParams.init(75, hidden=8, seed=0)
    p0.b_v[0] = np.nan
    with pytest.raises(TrainingError, match="step"):
        train_actor_critic(_sampler, "explore", p0, 1, max_steps=5, n_step=2)


def test_trainer_validation():
    p0 = ActorCriticParams.init(75, hidden=8)
    with pytest.raises(ConfigError):
        train_actor_critic(_sampler, "explore", p0, 0)
    with pytest.raises(ConfigError):
        train_actor_critic(_sampler, "other", p0, 1)


def test_checkpoint_round_trip(tmp_path):
    p = ActorCriticParams.init(75, hidden=8, seed=9, lr=1e-3, role="goal", meta={"episodes": 3})
    save_checkpoint(p, tmp_path / "c.npz")
    back = load_checkpoint(tmp_path / "c.npz")
    for name, arr in p.arrays().items():
        np.testing.assert_array_equal(back.arrays()[name], arr)
    assert back.hyper() == p.hyper() and back.meta == p.meta
    x = np.random.default_rng(0).uniform(-1, 1, (3, 150))
    np.testing.assert_array_equal(forward(back, x)[0], forward(p, x)[0])


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(ConfigError):
        load_checkpoint(bad)
