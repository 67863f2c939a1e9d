"""End-to-end exit criteria. Slow; select with ``-m acceptance`` or skip with ``-m "not acceptance"``."""

import itertools
import math
import time

import numpy as np
import pytest

from aeronav.cli import EXIT_OK, main
from aeronav.evaluation import (
    EpisodeConfig,
    EpisodeSummary,
    NavEnv,
    ScenePoolSampler,
    compute_metrics,
    derive_seed,
    rollout_rewards,
    run_episode,
)
from aeronav.geometry import DEFAULT_INTRINSICS, Pose
from aeronav.perception import depth_to_scan, extract_roi
from aeronav.policy import (
    ActorCriticParams,
    ActorCriticPolicy,
    CoverageExplore,
    DualController,
    RandomPolicy,
    ScriptedGoal,
    action_mask_for,
    greedy,
    train_actor_critic,
)
from aeronav.policy.actor_critic import loss_and_grads
from aeronav.rewards import ExploreRewardConfig, GoalRewardConfig, explore_reward, goal_reward, success_check
from aeronav.simulator import (
    Action,
    DetectorNoise,
    ObjectInstance,
    SceneConfig,
    VoxelScene,
    detect,
    generate_scene,
    ground_truth_distance,
    is_valid_position,
    render,
)
from conftest import RES
from oracles import point_box_distance, roi_oracle, scan_oracle, visible_bbox

K = DEFAULT_INTRINSICS


def acceptance(n, title):
    return pytest.mark.acceptance(criterion=n, title=title)


def _line(record_property, n, ok, text):
    record_property("detail", text)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {text}")


# -- 1 -------------------------------------------------------------------------------

@acceptance(1, "perception oracle equivalence on 1000 rendered frames")
def test_perception_oracle_equivalence(record_property):
    scenes = [generate_scene(derive_seed(1, i), SceneConfig(rooms=2, dims=(32, 24, 12))) for i in range(5)]
    rng = np.random.default_rng(derive_seed(1, 99))
    frames = []
    while len(frames) < 1000:
        sc = scenes[len(frames) % len(scenes)]
        p = rng.uniform([0, 0, 0], sc.extent)
        if is_valid_position(sc, p):
            depth, _ = render(sc, Pose(tuple(p), rng.uniform(-math.pi, math.pi)), K)
            frames.append((depth, p[2] - sc.floor_z))
    worst = 0.0
    mismatched = 0
    elapsed = 0.0
    for depth, h in frames:
        t0 = time.perf_counter()
        scan = depth_to_scan(depth, K, height_above_floor=h)
        roi = extract_roi(depth, K, height_above_floor=h)
        elapsed += time.perf_counter() - t0
        ref = scan_oracle(depth, K, 0.1, 16, h)
        dx, dy, z, valid, bbox = roi_oracle(depth, K, 0.1, h)
        err = max(np.max(np.abs(scan.rho_min - ref)), abs(roi.dx - dx), abs(roi.dy - dy), abs(roi.z_mean - z))
        worst = max(worst, float(err))
        mismatched += (roi.valid != valid) or (roi.bbox != bbox)
    ok = worst <= 1e-9 and mismatched == 0 and elapsed < 60
    _line(record_property, 1, ok, f"max err {worst:.1e}, roi mismatches {mismatched}, runtime {elapsed:.1f}s")
    assert ok


# -- 2 -------------------------------------------------------------------------------

def _goal_formula(prev, cur, parent, area, succ, coll):
    return (prev - cur) + (1.0 if parent else 0.0) + min(area, 0.1) + (5.0 if succ else 0.0) \
        + (-0.1 if coll else 0.0) - 0.02


def _explore_formula(zp, zc, dx, dy, rho):
    fwd = min(max(zp - zc, -0.2), 0.2)
    d = math.sqrt(dx ** 2 + (2 * dy) ** 2)
    r_dir = -0.75 * d if d > 0.3 else 0.0
    r_safe = 1 - math.exp(2 * (1 / 3 - rho)) if rho <= 1 / 3 else 0.0
    return fwd + r_dir + r_safe - 0.01


@acceptance(2, "reward closed-form suite")
def test_reward_closed_form(record_property):
    n_goal = n_exp = 0
    worst = 0.0
    for prev, cur, parent, area, succ, coll in itertools.product(
            np.linspace(0, 5, 15), np.linspace(0, 5, 15), (False, True), np.linspace(0, 1, 7), (False, True),
            (False, True)):
        b = goal_reward(prev, cur, parent, area, succ, coll)
        worst = max(worst, abs(b.total - _goal_formula(prev, cur, parent, area, succ, coll)))
        n_goal += 1
    for zp, zc, dx, dy, rho in itertools.product(
            np.linspace(0, 3, 6), np.linspace(0, 3, 6), np.linspace(-1, 1, 7), np.linspace(-1, 1, 7),
            np.linspace(0, 1, 7)):
        b = explore_reward(zp, zc, dx, dy, rho)
        worst = max(worst, abs(b.total - _explore_formula(zp, zc, dx, dy, rho)))
        n_exp += 1
    boundary = (explore_reward(1, 1, 0.3, 0.0, 1.0).r_dir == 0.0
                and explore_reward(1, 1, 0.0, 0.15, 1.0).r_dir == 0.0
                and explore_reward(1, 1, 0, 0, ExploreRewardConfig().rho_thr).r_safe == 0.0
                and all(goal_reward(1, 1, False, a, False, False).r_bbox == 0.1 for a in (0.1, 0.3, 1.0)))
    ok = n_goal >= 10_000 and n_exp >= 10_000 and worst <= 1e-12 and boundary
    _line(record_property, 2, ok, f"{n_goal} goal + {n_exp} explore tuples, max err {worst:.1e}, "
                                  f"boundaries {'exact' if boundary else 'WRONG'}")
    assert ok


# -- 3 -------------------------------------------------------------------------------

@acceptance(3, "success predicate on an exhaustive 5x5x3 fixture")
def test_success_predicate_exhaustive(record_property):
    dims, target = (5, 5, 3), (2, 2, 1)
    occ = np.zeros(dims, dtype=bool)
    occ[target] = True
    lo = tuple(c * RES for c in target)
    hi = tuple((c + 1) * RES for c in target)
    sc = VoxelScene(RES, occ, [ObjectInstance(1, "Mug", lo, hi)], {"Mug": None}, seed=0,
                    start=(0.075, 0.075, 0.075))
    total = agree = positives = 0
    # every free cell centre plus an off-centre offset, 24 headings, each action
    for cell in np.argwhere(~occ):
        for offset in (0.5, 0.3):
            p = tuple((cell + offset) * RES)
            dist = point_box_distance(p, lo, hi)
            for step in range(24):
                pose = Pose(p, step * math.pi / 12)
                det = detect(sc, pose, K, "Mug")
                box = visible_bbox(lo, hi, pose, K)
                centred = box is not None and abs((box[0] + box[2]) / 2 - 40) <= 32 + 1e-9 \
                    and abs((box[1] + box[3]) / 2 - 30) <= 24 + 1e-9
                for action in Action:
                    want = action == Action.DONE and centred and dist < 1.5
                    got = success_check(det, (K.width, K.height), ground_truth_distance(sc, p, "Mug"), action)
                    total += 1
                    agree += got == want
                    positives += want
    ok = agree == total and 0 < positives < total
    _line(record_property, 3, ok, f"{agree}/{total} poses agree ({positives} successes)")
    assert ok


# -- 4 -------------------------------------------------------------------------------

@acceptance(4, "metrics fixture and SPL <= SR")
def test_metrics(record_property):
    fixture = [EpisodeSummary(True, 6.0, 3.0, 2, 10, 50, 100, "Mug"),
               EpisodeSummary(False, 4.0, 2.5, 0, 20, 30, 60, "Mug"),
               EpisodeSummary(True, 2.0, 2.0, 1, 5, 10, 40, "Vase")]
    r = compute_metrics(fixture)
    exact = (r.sr, r.spl, r.cr, r.fcr) == (200 / 3, 50.0, 300 / 35, 125 / 3)
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 8))
        items = [EpisodeSummary(bool(rng.random() < 0.5), float(rng.uniform(0, 30)), float(rng.uniform(0, 30)),
                                int(rng.integers(0, 10)), int(rng.integers(10, 200)), int(rng.integers(0, 50)),
                                int(rng.integers(50, 100))) for _ in range(n)]
        m = compute_metrics(items)
        violations += not (m.spl <= m.sr)
    ok = exact and violations == 0
    _line(record_property, 4, ok, f"fixture {'exact' if exact else 'WRONG'}, SPL>SR in {violations}/10000 reports")
    assert ok


# -- 5 -------------------------------------------------------------------------------

class _Recorder(DualController):
    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.trace = []

    def reset(self):
        super().reset()
        self.trace = []

    def switch(self, detection_present):
        mode = super().switch(detection_present)
        self.trace.append((bool(detection_present), mode.value))
        return mode


def _reference_modes(presence, k):
    active, lost, out = "explore", 0, []
    for p in presence:
        if p:
            active, lost = "goal", 0
        elif active == "goal":
            lost += 1
            if lost == k:
                active, lost = "explore", 0
        out.append(active)
    return out


@acceptance(5, "dual-policy switching property")
def test_switching(record_property):
    k = 5
    exhaustive_ok = all(
        [m.value for m in map(DualController(None, None, k).switch, seq)] == _reference_modes(seq, k)
        for seq in itertools.product((False, True), repeat=12))
    scenes = [generate_scene(derive_seed(5, i), SceneConfig(rooms=1, dims=(24, 24, 12))) for i in range(10)]
    sampler = ScenePoolSampler(scenes, "goal", seed=5, near_radius=3.0)
    early_goal = wrong = detected = reversions = 0
    for ep in range(500):
        sc, start, target, seed = sampler(ep)
        ctrl = _Recorder(CoverageExplore(), ScriptedGoal(), k)
        rec = run_episode(EpisodeConfig(sc, target, start, max_steps=40, seed=seed, noise=DetectorNoise(0.3, 2.0),
                                        compute_spl=False, track_coverage=False), ctrl)
        presence = [p for p, _ in ctrl.trace]
        modes = [m for _, m in ctrl.trace]
        first = presence.index(True) if True in presence else len(presence)
        early_goal += sum(s.policy == "goal" for s in rec.steps[:first])
        wrong += modes != _reference_modes(presence, k) or modes != [s.policy for s in rec.steps]
        detected += first < len(presence)
        reversions += sum(a == "goal" and b == "explore" for a, b in zip(modes, modes[1:]))
    ok = exhaustive_ok and early_goal == 0 and wrong == 0 and reversions > 0
    _line(record_property, 5, ok, f"500 episodes ({detected} with detections, {reversions} reversions): "
                                  f"{early_goal} early goal actions, {wrong} state-machine mismatches; "
                                  f"exhaustive 2^12 {'ok' if exhaustive_ok else 'FAILED'}")
    assert ok


# -- 6 -------------------------------------------------------------------------------

@acceptance(6, "exploration coverage trend")
def test_exploration_trend(record_property):
    t0 = time.perf_counter()
    results = {}
    for policy in ("explore-only", "random", "goal-only"):
        recs = []
        for s in range(10):
            sc = generate_scene(derive_seed(6, s), SceneConfig(rooms=3))
            absent = sorted(set(sc.class_names) - {o.label for o in sc.objects})[0]
            starts = ScenePoolSampler([sc], "explore", seed=derive_seed(6, s, 1))
            for seed in range(5):
                _, start, _, _ = starts(seed)
                recs.append(run_episode(EpisodeConfig(sc, absent, start, max_steps=150, policy=policy,
                                                      seed=derive_seed(6, s, seed), compute_spl=False)))
        results[policy] = compute_metrics(recs)
    elapsed = time.perf_counter() - t0
    e, r, g = (results[p] for p in ("explore-only", "random", "goal-only"))
    ok = e.fcr >= 2 * r.fcr and e.fcr >= 2 * g.fcr and e.cr <= 5.0 and elapsed < 600
    _line(record_property, 6, ok, f"FCR explore {e.fcr:.1f}% vs random {r.fcr:.1f}% / goal-only {g.fcr:.1f}%, "
                                  f"explore CR {e.cr:.2f}%, runtime {elapsed:.0f}s")
    assert ok


# -- 7 -------------------------------------------------------------------------------

def _target_for(sc, seed, placement):
    classes = sorted({o.label for o in sc.objects if o.is_target_candidate})
    rng = np.random.default_rng(np.random.SeedSequence((seed, placement, 7)))
    return classes[int(rng.integers(len(classes)))]


@acceptance(7, "dual-policy success trend")
def test_dual_policy_trend(record_property):
    t0 = time.perf_counter()
    noise = DetectorNoise(0.1, 2.0)
    sr = {}
    for policy in ("scripted-dual", "goal-only", "explore-only"):
        recs = []
        for s in range(10):
            for p in range(4):
                sc = generate_scene(s, SceneConfig(rooms=3), placement=p)
                target = _target_for(sc, s, p)
                for seed in range(5):
                    recs.append(run_episode(EpisodeConfig(sc, target, max_steps=200, policy=policy, seed=seed,
                                                          noise=noise, compute_spl=False, track_coverage=False)))
        sr[policy] = compute_metrics(recs).sr
    single = []
    for s in range(10):
        for p in range(4):
            sc = generate_scene(s, SceneConfig(rooms=1, dims=(24, 24, 12)), placement=p)
            single.append(run_episode(EpisodeConfig(sc, _target_for(sc, s, p), max_steps=200, compute_spl=False,
                                                    track_coverage=False)))
    single_sr = compute_metrics(single).sr
    elapsed = time.perf_counter() - t0
    ok = sr["scripted-dual"] > sr["goal-only"] and sr["scripted-dual"] > sr["explore-only"] \
        and single_sr >= 80.0 and elapsed < 900
    _line(record_property, 7, ok, f"SR dual {sr['scripted-dual']:.1f}% vs goal-only {sr['goal-only']:.1f}% / "
                                  f"explore-only {sr['explore-only']:.1f}%, single-room {single_sr:.1f}%, "
                                  f"runtime {elapsed:.0f}s")
    assert ok


# -- 8 -------------------------------------------------------------------------------

def _fd_error(seed):
    rng = np.random.default_rng(seed)
    params = ActorCriticParams.init(5, hidden=4, seed=seed, entropy_coef=0.05)
    x, acts = rng.uniform(-1, 1, (7, 10)), rng.integers(0, 6, 7)
    rets, adv = rng.normal(size=7), rng.normal(size=7)
    _, grads = loss_and_grads(params, x, acts, rets, adv)
    worst = 0.0
    for name, arr in params.arrays().items():
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + 1e-6
            lp, _ = loss_and_grads(params, x, acts, rets, adv)
            arr[idx] = old - 1e-6
            lm, _ = loss_and_grads(params, x, acts, rets, adv)
            arr[idx] = old
            num[idx] = (lp - lm) / 2e-6
        worst = max(worst, np.linalg.norm(grads[name] - num) / max(np.linalg.norm(num), 1e-12))
    return worst


@acceptance(8, "trainer sanity")
def test_trainer(record_property):
    fd = max(_fd_error(s) for s in range(3))
    cfg = SceneConfig(rooms=1, dims=(24, 24, 12))
    train_scenes = [generate_scene(derive_seed(8, i), cfg) for i in range(20)]
    held_out = [generate_scene(derive_seed(8, i), cfg) for i in range(20, 30)]
    train = ScenePoolSampler(train_scenes, "explore", seed=derive_seed(8, 100))
    test = ScenePoolSampler(held_out, "explore", seed=derive_seed(8, 200))
    p0 = ActorCriticParams.init(75, seed=0)
    episodes = 600
    res = train_actor_critic(train, "explore", p0, episodes, max_steps=40)
    a = train_actor_critic(train, "explore", p0, 20, max_steps=40).curve
    b = train_actor_critic(train, "explore", p0, 20, max_steps=40).curve
    trained = rollout_rewards(ActorCriticPolicy(res.params, action_mask_for("explore")), test, 50, "explore", 40)
    rand = rollout_rewards(RandomPolicy(), test, 50, "explore", 40)
    d = trained - rand
    z = d.mean() / (d.std(ddof=1) / math.sqrt(len(d)))
    ok = fd <= 1e-4 and z >= 3 and a == b and episodes <= 2000
    _line(record_property, 8, ok, f"grad rel err {fd:.1e}; trained {trained.mean():.3f} vs random "
                                  f"{rand.mean():.3f} mean reward, {z:.1f} SE after {episodes} episodes; "
                                  f"curve {'deterministic' if a == b else 'NOT deterministic'}")
    assert ok


# -- 9 -------------------------------------------------------------------------------

@acceptance(9, "end-to-end determinism")
def test_determinism(tmp_path, record_property):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 9\n[scene]\nrooms = 2\ndims = [32, 24, 12]\n[episode]\nmax_steps = 25\nepisodes = 2\n"
                   "detector_miss_prob = 0.1\ndetector_jitter = 2.0\n")
    scenes = tmp_path / "scenes"
    assert main(["gen-scenes", "--config", str(cfg), "--count", "2", "--out", str(scenes)]) == EXIT_OK
    outs = []
    for name, workers in (("w1", "1"), ("w2", "2"), ("w1b", "1")):
        out = tmp_path / name
        assert main(["eval", "--config", str(cfg), "--scene", str(scenes), "--workers", workers,
                     "--out", str(out)]) == EXIT_OK
        outs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    n_logs = sum(1 for k in outs[0] if k.startswith("logs/"))
    ok = outs[0] == outs[1] == outs[2] and n_logs > 0
    _line(record_property, 9, ok, f"{n_logs} logs + report byte-identical across reruns and 1 vs 2 workers")
    assert ok


# -- 10 ------------------------------------------------------------------------------

def _obstacle_room(i):
    """22 x 16 x 6 room: a low wall segment between the start band and a plant near the far wall."""
    rng = np.random.default_rng(derive_seed(12, i))
    nx, ny, nz = 22, 16, 6
    occ = np.zeros((nx, ny, nz), dtype=bool)
    occ[0], occ[-1] = True, True
    occ[:, 0], occ[:, -1] = True, True
    occ[:, :, 0], occ[:, :, -1] = True, True
    ty = int(rng.integers(5, 10))
    occ[18:20, ty:ty + 2, 1:4] = True
    occ[8:9, 4:12, 1:3] = True
    plant = ObjectInstance(1, "Plant", (18 * RES, ty * RES, RES), (20 * RES, (ty + 2) * RES, 4 * RES))
    return VoxelScene(RES, occ, [plant], {"Plant": None}, seed=i, start=(0.45, 1.2, 0.525))


def _obstacle_sampler(scenes, seed):
    def sample_episode(i):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        sc = scenes[int(rng.integers(len(scenes)))]
        while True:
            p = ((int(rng.integers(2, 7)) + 0.5) * RES, (int(rng.integers(5, 11)) + 0.5) * RES, 0.525)
            if is_valid_position(sc, p):
                break
        yaw = float(rng.integers(-1, 2)) * math.pi / 6
        return sc, Pose(p, yaw), "Plant", derive_seed(seed, i)
    return sample_episode


def _collision_rate(params, sampler, episodes=100, steps=40):
    policy = ActorCriticPolicy(params)
    collisions = total = 0
    for ep in range(episodes):
        sc, start, target, seed = sampler(ep)
        env = NavEnv(sc, target, start, seed=seed, track_coverage=False)
        obs, mem = env.reset(), policy.reset()
        for _ in range(steps):
            probs, mem = policy.act(obs.bundle, mem)
            tr = env.step(greedy(probs), "goal")
            obs = tr.obs
            total += 1
            collisions += tr.collided
            if tr.done:
                break
    return 100.0 * collisions / total


@acceptance(10, "ablation harness: no collision penalty raises CR")
def test_collision_ablation(record_property):
    scenes = [_obstacle_room(i) for i in range(6)]
    train, test = _obstacle_sampler(scenes, 1), _obstacle_sampler(scenes, 2)
    cr = {}
    for label, ablate in (("full", frozenset()), ("w/o R_c", frozenset({"r_c"}))):
        p0 = ActorCriticParams.init(75, seed=0, role="goal", discount=0.9)
        res = train_actor_critic(train, "goal", p0, 400, max_steps=40,
                                 env_kwargs={"goal_cfg": GoalRewardConfig(ablate=ablate)})
        cr[label] = _collision_rate(res.params, test)
    ok = cr["w/o R_c"] >= 2 * cr["full"] and cr["w/o R_c"] > 0
    _line(record_property, 10, ok, f"CR full {cr['full']:.1f}% vs w/o R_c {cr['w/o R_c']:.1f}% "
                                   f"({cr['w/o R_c'] / max(cr['full'], 1e-9):.1f}x)")
    assert ok
