from collections import Counter

import pytest

from htngym.lint import (
    HintArityMismatch,
    UnknownAgentType,
    adapt,
    has_errors,
    lint,
    load_effects_file,
)
from htngym.parser import load_domain, parse_domain, print_domain
from htngym.sexpr import read_one
from oracles import DATA

IPC_EXPECTED = Counter({"AGENT_TYPE_MISSING": 1, "NONE_ACTION_MISSING": 1, "TASK_EFFECT_MISSING": 4})


def ipc():
    return load_domain(DATA / "ipc" / "transport-domain.hddl")


def hints():
    return load_effects_file((DATA / "ipc" / "transport-effects.txt").read_text())


def test_ipc_finding_set():
    assert Counter(f.rule for f in lint(ipc())) == IPC_EXPECTED


def test_bundled_transport_is_clean():
    assert lint(load_domain(DATA / "transport" / "domain.hddl")) == []


def test_handoff_only_warns_about_environment_action():
    found = lint(load_domain(DATA / "handoff" / "domain.hddl"))
    assert [f.rule for f in found] == ["ACTION_NO_AGENT_PARAM"]
    assert not has_errors(found)


def test_adapt_makes_ipc_clean():
    adapted = adapt(ipc(), "vehicle", hints())
    assert lint(adapted) == []


def test_adapt_is_idempotent():
    once = adapt(ipc(), "vehicle", hints())
    assert adapt(once, "vehicle", hints()) == once
    # and survives a print/parse cycle
    assert parse_domain(read_one(print_domain(once))) == once


def test_adapt_without_hints_keeps_effect_findings():
    rules = Counter(f.rule for f in lint(adapt(ipc(), "vehicle")))
    assert rules == Counter({"TASK_EFFECT_MISSING": 4})


def test_hint_for_unknown_task():
    with pytest.raises(HintArityMismatch):
        adapt(ipc(), "vehicle", {"teleport": hints()["deliver"]})


def test_hint_with_foreign_variable():
    bad = load_effects_file("deliver = (at ?q ?l)")
    with pytest.raises(HintArityMismatch):
        adapt(ipc(), "vehicle", bad)


def test_hint_with_wrong_arity():
    bad = load_effects_file("deliver = (at ?p)")
    with pytest.raises(HintArityMismatch):
        adapt(ipc(), "vehicle", bad)


def test_unknown_agent_type():
    with pytest.raises(UnknownAgentType):
        adapt(ipc(), "spaceship", hints())


def test_none_fix_reparses():
    text = (DATA / "ipc" / "transport-domain.hddl").read_text()
    (finding,) = [f for f in lint(ipc()) if f.rule == "NONE_ACTION_MISSING"]
    fixed = parse_domain(read_one(finding.fix.apply(text)))
    assert "none" in fixed.action_map
    assert "NONE_ACTION_MISSING" not in {f.rule for f in lint(fixed)}


def test_conditional_effect_is_unsupported():
    text = (DATA / "transport" / "domain.hddl").read_text().replace(
        ":effect (and\n      (not (at ?v ?l1))",
        ":effect (and (when (at ?v ?l1) (at ?v ?l1))\n      (not (at ?v ?l1))",
        1,
    )
    assert "(when" in text
    rules = [f.rule for f in lint(parse_domain(read_one(text)))]
    assert "UNSUPPORTED_CONSTRUCT" in rules


def test_findings_are_sorted_by_position():
    found = lint(ipc())
    starts = [f.span.start for f in found]
    assert starts == sorted(starts)
