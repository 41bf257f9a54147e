from htngym.agent import AgentRuntime, Hierarchy, Node, share_progress, task_effects_hold, update_hierarchy
from htngym.env import HDDLEnv
from htngym.grounding import OperatorInstance
from htngym.policy import ScriptedPolicy
from htngym.rollout import plan_joint, run_episode
from oracles import act, bundled

SINGLE_DELIVERY = [
    "m-deliver(city-loc-1,city-loc-2,package-0,truck-0)",
    "m-drive-to(truck-0,city-loc-0,city-loc-1)",
    "m-drive-to(truck-0,city-loc-1,city-loc-2)",
    "m-load",
    "m-unload",
]


def single_env():
    d, p = bundled("transport", "p00-single")
    return HDDLEnv(d, p, policies={"truck-0": ScriptedPolicy(SINGLE_DELIVERY)})


def u_properties_hold(env) -> bool:
    """Idempotence of U and no completed element left without a pending descendant."""
    g, s = env.grounding, env.state
    for rt in env.runtimes.values():
        h = rt.hierarchy
        if update_hierarchy(h, g, s) != h:
            return False
        for i, node in enumerate(h.nodes):
            if node.op.kind == "task" and task_effects_hold(g, node.op, s) and i == len(h) - 1:
                return False
    return True


def test_single_delivery_first_step_unwinds_drive_chain():
    env = single_env()
    joint, _ = plan_joint(env, deterministic=True)
    h = env.runtimes["truck-0"].hierarchy
    assert [n.op.kind for n in h.nodes] == ["task", "method", "task", "method", "action"]
    assert h.nodes[-1].op == act("drive", "truck-0", "city-loc-0", "city-loc-1")
    first_label = h.nodes[2].label
    env.step(joint)
    h = env.runtimes["truck-0"].hierarchy
    assert h.keys() == ("deliver(package-0,city-loc-2)", SINGLE_DELIVERY[0])
    assert h.progress[SINGLE_DELIVERY[0]] == {first_label}


def test_single_delivery_four_actions():
    env = single_env()
    r = run_episode(env, seed=0, deterministic=True)
    assert r.success and r.steps == 4
    assert [t["joint_action"]["truck-0"].split("(")[0] for t in r.trace] == ["drive", "pick-up", "drive", "drop"]


def test_previous_primitive_action():
    env = single_env()
    rt = env.runtimes["truck-0"]
    assert rt.previous_primitive_action() is None
    env.step({"truck-0": act("drive", "truck-0", "city-loc-0", "city-loc-1")})
    assert rt.previous_primitive_action() == act("drive", "truck-0", "city-loc-0", "city-loc-1")


def test_none_leaf_removed():
    env = single_env()
    g = env.grounding
    h = Hierarchy()
    h.push(Node(OperatorInstance("task", "deliver", ("package-0", "city-loc-2")), "task0"))
    h.push(Node(act("none", "truck-0")))
    out = update_hierarchy(h, g, env.state, act("none", "truck-0"))
    assert out.keys() == ("deliver(package-0,city-loc-2)",)


def test_satisfied_root_cleared():
    env = single_env()
    g = env.grounding
    h = Hierarchy()
    h.push(Node(OperatorInstance("task", "get-to", ("truck-0", "city-loc-0")), "g"))
    assert len(update_hierarchy(h, g, env.state)) == 0


def test_u_properties_on_rollouts():
    for folder, name in [("transport", "p02-2agent"), ("handoff", "p01-split"), ("transport_collab", "p03-hetero-2agent")]:
        d, p = bundled(folder, name)
        env = HDDLEnv(d, p)
        checks = []
        for seed in range(3):
            run_episode(env, seed=seed, on_step=lambda *_: checks.append(u_properties_hold(env)))
        assert checks and all(checks)


def test_share_progress_unions_labels():
    env = single_env()
    g = env.grounding
    key = SINGLE_DELIVERY[0]
    a, b = AgentRuntime("x"), AgentRuntime("y")
    for rt, label in ((a, "task0"), (b, "task2")):
        rt.hierarchy.push(Node(OperatorInstance("task", "deliver", ("package-0", "city-loc-2")), "g"))
        rt.hierarchy.push(Node(OperatorInstance("method", "m-deliver", ("city-loc-1", "city-loc-2", "package-0", "truck-0"))))
        rt.hierarchy.progress[key] = {label}
    share_progress([a, b], g, env.state)
    assert a.hierarchy.progress[key] == b.hierarchy.progress[key] == {"task0", "task2"}


def test_beliefs_track_truth_centralized():
    d, p = bundled("transport", "p02-2agent")
    env = HDDLEnv(d, p)
    env.reset(seed=3)
    while not env.done:
        joint, _ = plan_joint(env)
        env.step(joint)
        for rt in env.runtimes.values():
            assert set(rt.beliefs) == set(env.agents) - {rt.name}
            for other, b in rt.beliefs.items():
                assert b.hierarchy == env.runtimes[other].hierarchy
                assert b.beliefs == {}


def test_copy_is_independent():
    rt = AgentRuntime("truck-0")
    rt.hierarchy.push(Node(act("none", "truck-0")))
    dup = rt.copy()
    dup.hierarchy.pop()
    assert len(rt.hierarchy) == 1
