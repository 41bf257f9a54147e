"""World state and precondition checks shared by the environment and planner."""

from __future__ import annotations

from dataclasses import dataclass

from .grounding import GroundAction, GroundAtom, Grounding


@dataclass(frozen=True)
class WorldState:
    dynamic: frozenset[GroundAtom]
    static: frozenset[GroundAtom]
    step: int = 0

    def holds(self, atom: GroundAtom) -> bool:
        return atom in self.dynamic or atom in self.static

    def satisfies(self, pos, neg) -> bool:
        return all(self.holds(a) for a in pos) and not any(self.holds(a) for a in neg)

    def applicable(self, action: GroundAction) -> bool:
        return self.satisfies(action.pre_pos, action.pre_neg)


def initial_state(grounding: Grounding) -> WorldState:
    return WorldState(grounding.dynamic_init, grounding.static_init, 0)
