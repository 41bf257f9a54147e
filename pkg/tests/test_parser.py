import random

import pytest

from htngym.parser import (
    DuplicateName,
    InitAtomMismatch,
    UnknownType,
    load_domain,
    parse_domain,
    parse_problem,
    print_domain,
    print_problem,
)
from htngym.sexpr import HddlError, IllegalCharacter, UnbalancedParenthesis, read_one, tokenize
from oracles import BUNDLED, DATA, bundled, random_domain_text


def test_tokenize_nesting():
    (e,) = tokenize("(a (b c))")
    assert e.is_list and e.head() == "a"
    assert e[1].is_list and [c.text for c in e[1]] == ["b", "c"]


def test_tokenize_strips_comments():
    assert [e.to_text() for e in tokenize("; hi\n(a b) ; trailing\n")] == ["(a b)"]


def test_unbalanced_reports_offset():
    with pytest.raises(UnbalancedParenthesis) as err:
        tokenize("((a)")
    assert err.value.span.start == 0
    with pytest.raises(UnbalancedParenthesis):
        tokenize("(a))")


def test_illegal_character():
    with pytest.raises(IllegalCharacter):
        tokenize("(a \x01)")


def test_keywords_lowercased_names_kept():
    (e,) = tokenize("(:PARAMETERS Truck-0)")
    assert e[0].text == ":parameters" and e[1].text == "Truck-0"


MINI = """
(define (domain mini)
  (:requirements :hierarchy :typing)
  (:types place - object bot - agent)
  (:predicates (at ?b - bot ?p - place) (road ?a ?b - place))
  (:task go :parameters (?b - bot ?p - place) :effect (at ?b ?p))
  (:method m-go :parameters (?b - bot ?a ?p - place) :task (go ?b ?p)
    :ordered-subtasks (and (move ?b ?a ?p) (none ?b)))
  (:action move :parameters (?b - bot ?a ?p - place)
    :precondition (and (at ?b ?a) (road ?a ?p))
    :effect (and (at ?b ?p) (not (at ?b ?a))))
  (:action none :parameters (?b - bot) :precondition () :effect ()))
"""


def test_ordered_subtasks_become_chain():
    d = parse_domain(read_one(MINI))
    m = d.method_map["m-go"]
    assert len(m.subtasks) == 2
    first, second = (s.label for s in m.subtasks)
    assert m.ordering == ((first, second),)


def test_transport_types_and_ordering():
    d = load_domain(DATA / "transport" / "domain.hddl")
    h = d.hierarchy
    assert h.parents("vehicle") == {"locatable", "agent"}
    via = d.method_map["m-drive-to-via"]
    assert [s.label for s in via.subtasks] == ["t1", "t2"]
    assert via.ordering == (("t1", "t2"),)


def test_unknown_type_rejected():
    with pytest.raises(UnknownType):
        parse_domain(read_one(MINI.replace("(?b - bot ?p - place) :effect", "(?b - robot ?p - place) :effect")))


def test_duplicate_action_rejected():
    twice = MINI.replace("(:action none", "(:action move :parameters () :precondition () :effect ())\n  (:action none")
    with pytest.raises(DuplicateName):
        parse_domain(read_one(twice))


PROBLEM = """
(define (problem p) (:domain mini)
  (:objects b1 - bot x y - place)
  (:htn :tasks (and (g2 (go b1 y)) (g1 (go b1 x))) :ordering ())
  (:init (at b1 x) (road x y)))
"""


def test_problem_goal_order_preserved():
    d = parse_domain(read_one(MINI))
    p = parse_problem(read_one(PROBLEM), d)
    assert [g.label for g in p.goal_tasks] == ["g2", "g1"]


def test_problem_without_goals():
    d = parse_domain(read_one(MINI))
    p = parse_problem(read_one(PROBLEM.replace("(and (g2 (go b1 y)) (g1 (go b1 x)))", "()")), d)
    assert p.goal_tasks == ()


def test_init_arity_mismatch():
    d = parse_domain(read_one(MINI))
    with pytest.raises(InitAtomMismatch):
        parse_problem(read_one(PROBLEM.replace("(road x y)", "(road x)")), d)


def test_errors_share_a_base_class():
    for exc in (UnknownType, DuplicateName, InitAtomMismatch, UnbalancedParenthesis):
        assert issubclass(exc, HddlError)


def test_printer_writes_empty_conditions():
    text = print_domain(parse_domain(read_one(MINI)))
    assert ":precondition ()" in text
    assert ":effect ()" in text


@pytest.mark.parametrize("folder,name", BUNDLED)
def test_bundled_round_trip(folder, name):
    d, p = bundled(folder, name)
    d2 = parse_domain(read_one(print_domain(d)))
    assert d2 == d
    assert parse_problem(read_one(print_problem(p)), d2) == p


def test_ipc_round_trip():
    d = load_domain(DATA / "ipc" / "transport-domain.hddl")
    assert parse_domain(read_one(print_domain(d))) == d


def test_fuzz_round_trip_sample():
    # the full 1000-domain sweep runs in the acceptance suite
    for seed in range(50):
        d = parse_domain(read_one(random_domain_text(random.Random(seed))))
        assert parse_domain(read_one(print_domain(d))) == d
