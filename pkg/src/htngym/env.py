"""Gym-style environment over grounded HDDL problems."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .agent import AgentRuntime, Hierarchy, share_progress, update_agent
from .grounding import GroundAction, Grounding, OperatorInstance
from .lint import has_errors, lint
from .model import DomainModel, ProblemModel
from .planner import actions_conflict
from .encoding import DYNAMIC, build_layout
from .policy import RandomPolicy
from .state import WorldState, initial_state


class EnvError(Exception):
    pass


class LintErrorsPresent(EnvError):
    pass


class PolicyAgentMismatch(EnvError):
    pass


class UnknownAgent(EnvError):
    pass


class PreconditionViolated(EnvError):
    def __init__(self, agent: str, action: str):
        self.agent, self.action = agent, action
        super().__init__(f"{agent}: precondition of {action} does not hold")


class ConflictingJointAction(EnvError):
    def __init__(self, pair: tuple[str, str]):
        self.pair = pair
        super().__init__(f"conflicting joint action: {pair[0]} vs {pair[1]}")


SINGLE_PASS = "single"
FIXPOINT = "fixpoint"


@dataclass
class EnvConfig:
    max_steps: int = 100
    step_penalty: float = -1.0
    goal_bonus: float = 50.0
    success_bonus: float = 100.0
    strict: bool = False
    env_action_mode: str = SINGLE_PASS
    decentralized: bool = False

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.env_action_mode not in (SINGLE_PASS, FIXPOINT):
            raise ValueError(f"unknown environment-action mode {self.env_action_mode!r}")


@dataclass
class StepResult:
    state: WorldState
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class HDDLEnv:
    """Holds the world state, the goal ledger and every agent's runtime."""

    def __init__(self, domain: DomainModel, problem: ProblemModel, policies: dict | None = None,
                 config: EnvConfig | None = None, grounding: Grounding | None = None,
                 check_lint: bool = True, layout_mode: str = DYNAMIC):
        if check_lint:
            errors = [f for f in lint(domain) if f.severity == "error"]
            if has_errors(errors):
                raise LintErrorsPresent("; ".join(str(f) for f in errors))
        self.domain = domain
        self.problem = problem
        self.config = config or EnvConfig()
        self.grounding = grounding or Grounding(domain, problem)
        self.agents: list[str] = list(self.grounding.agents)
        self.layout = build_layout(self.grounding, layout_mode)
        self.policies: dict = {}
        self.rng = np.random.default_rng(0)
        self.trace: list[dict] = []
        self._set_policies(policies)
        self.reset()

    def _set_policies(self, policies: dict | None) -> None:
        policies = policies or {}
        unknown = sorted(set(policies) - set(self.agents))
        if unknown:
            raise PolicyAgentMismatch(f"policies given for unknown agents {unknown}")
        for a in self.agents:
            if a in policies:
                self.policies[a] = policies[a]
            elif a not in self.policies:
                self.policies[a] = RandomPolicy(self.layout)

    # -- lifecycle -------------------------------------------------------------

    def reset(self, policies: dict | None = None, seed: int | None = None) -> WorldState:
        if policies is not None:
            self._set_policies(policies)
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = initial_state(self.grounding)
        self.runtimes: dict[str, AgentRuntime] = {a: AgentRuntime(a, self.policies[a]) for a in self.agents}
        for rt in self.runtimes.values():
            rt.beliefs = {b: AgentRuntime(b, self.policies[b]) for b in self.agents if b != rt.name}
        self.completed: set[str] = set()
        self.completed = self.check_goal_tasks()
        self.trace = []
        return self.state

    @property
    def done(self) -> bool:
        return self.all_goals_completed or self.state.step >= self.config.max_steps

    @property
    def all_goals_completed(self) -> bool:
        return len(self.completed) == len(self.problem.goal_tasks)

    def check_goal_tasks(self) -> set[str]:
        """Labels of goal tasks whose effects hold now, plus those completed earlier."""
        out = set(self.completed)
        for goal in self.problem.goal_tasks:
            if goal.label not in out and self.grounding.goal_completed(goal, self.state.holds):
                out.add(goal.label)
        return out

    # -- stepping --------------------------------------------------------------

    def _resolve(self, agent: str, op: OperatorInstance) -> GroundAction | None:
        if op.kind != "action":
            return None
        act = self.grounding.actions.get(op.key)
        if act is None or agent not in act.agents:
            return None
        return act

    def step(self, joint_action: dict[str, OperatorInstance]) -> StepResult:
        unknown = sorted(set(joint_action) - set(self.agents))
        if unknown:
            raise UnknownAgent(f"unknown agents in joint action: {unknown}")
        g = self.grounding
        executed: dict[str, OperatorInstance] = {}
        rejected: dict[str, str] = {}
        chosen: list[GroundAction] = []
        for agent in self.agents:
            op = joint_action.get(agent, g.none_action(agent))
            act = self._resolve(agent, op)
            if act is None or not self.state.applicable(act):
                if self.config.strict:
                    raise PreconditionViolated(agent, op.key)
                rejected[agent] = op.key
                op = g.none_action(agent)
                act = g.actions[op.key]
            executed[agent] = op
            chosen.append(act)

        unique: dict[str, GroundAction] = {}
        for act in chosen:
            unique.setdefault(act.op.key, act)
        actions = list(unique.values())
        for i, a in enumerate(actions):
            for b in actions[i + 1:]:
                if actions_conflict(a, b):
                    raise ConflictingJointAction((a.op.key, b.op.key))

        before = self.state.dynamic
        dynamic = set(before)
        for act in actions:
            dynamic -= act.delete
        for act in actions:
            dynamic |= act.add
        fired: list[str] = []
        dynamic = self._environment_actions(dynamic, fired)
        self.state = WorldState(frozenset(dynamic), self.state.static, self.state.step + 1)

        previously = set(self.completed)
        self.completed = self.check_goal_tasks()
        newly = sorted(self.completed - previously)
        reward = self.config.step_penalty + self.config.goal_bonus * len(newly)
        if self.all_goals_completed:
            reward += self.config.success_bonus
        done = self.done

        self._update_agents(executed)

        info = {"newly_completed": newly, "env_actions": fired, "rejected": rejected, "executed": executed}
        self.trace.append({
            "step": self.state.step,
            "joint_action": {a: op.key for a, op in executed.items()},
            "added": sorted(x.key for x in self.state.dynamic - before),
            "deleted": sorted(x.key for x in before - self.state.dynamic),
            "env_actions": fired,
            "rejected": rejected,
            "completed": newly,
            "reward": reward,
            "done": done,
        })
        return StepResult(self.state, reward, done, info)

    def _environment_actions(self, dynamic: set, fired: list[str]) -> set:
        env_actions = self.grounding.environment_actions
        passes = 1 if self.config.env_action_mode == SINGLE_PASS else max(1, len(env_actions))
        for _ in range(passes):
            changed = False
            for act in env_actions:
                holds = lambda a: a in dynamic or a in self.state.static
                if all(holds(a) for a in act.pre_pos) and not any(holds(a) for a in act.pre_neg):
                    new = (dynamic - act.delete) | act.add
                    if new != dynamic:  # an action that changes nothing is not logged
                        fired.append(act.op.key)
                        changed = True
                        dynamic = new
            if not changed:
                break
        return dynamic

    def _update_agents(self, executed: dict[str, OperatorInstance]) -> None:
        g, state = self.grounding, self.state
        for rt in self.runtimes.values():
            update_agent(rt, g, state, executed)
        share_progress(self.runtimes.values(), g, state)
        if not self.config.decentralized:
            self.sync_beliefs()
        else:
            for rt in self.runtimes.values():
                share_progress([rt, *rt.beliefs.values()], g, state)

    def sync_beliefs(self) -> None:
        for rt in self.runtimes.values():
            rt.beliefs = {b: self.runtimes[b].copy(False) for b in self.agents if b != rt.name}

    def hierarchies(self) -> dict[str, Hierarchy]:
        return {a: self.runtimes[a].hierarchy for a in self.agents}

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
