from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from callgym.actions import (
    STOP, ActionCall, Arg, ParseError, PayloadSchema, canonical_repr, extract_action, make_call, validate,
)

MOVE = PayloadSchema("move", (Arg("d", "int", 0, 3),))
SWAP = PayloadSchema("swap", (Arg("a", "pair", 0, 2, 0, 1), Arg("b", "pair", 0, 2, 0, 1)))
ROT = PayloadSchema("rotate", (Arg("theta", "real", -360, 360),))
SCHEMAS = {s.name: s for s in (MOVE, SWAP, ROT, STOP)}


@pytest.mark.parametrize("text, name, payload", [
    ("move(2)", "move", (2,)),
    ("('move', (2,))", "move", (2,)),
    ("('move', 2)", "move", (2,)),
    ("move([1, 2, 3, 4])", "move", (1, 2, 3, 4)),
    ("('swap', (0, 0), (0, 1))", "swap", ((0, 0), (0, 1))),
    ("swap((0,0),(0,1))", "swap", ((0, 0), (0, 1))),
    ("reorder([2,0,1])", "reorder", (2, 0, 1)),
    ("rotate(-1.5e1)", "rotate", (-15.0,)),
    ("rotate(.5)", "rotate", (0.5,)),
    ("stop()", "stop", ()),
    ("('stop',)", "stop", ()),
    ('("stop",)', "stop", ()),
])
def test_both_surface_forms(text, name, payload):
    call = extract_action(text)
    assert call == ActionCall(name, payload)


def test_last_literal_wins():
    assert extract_action("first move(1), then I'll move(3)") == ActionCall("move", (3,))
    assert extract_action("('move', (1,)) no wait move(0)") == ActionCall("move", (0,))


def test_literal_inside_prose():
    text = "Looking at the image, the agent should go right.\nAction: move(1)\nDone."
    assert extract_action(text) == ActionCall("move", (1,))


@pytest.mark.parametrize("text, kind", [
    ("", "no_match"),
    ("stop", "no_match"),
    ("Move(1)", "no_match"),
    ("move(1", "malformed_payload"),
    ("move(x)", "malformed_payload"),
    ("move(((((1)))))", "malformed_payload"),
])
def test_parse_errors(text, kind):
    err = extract_action(text)
    assert isinstance(err, ParseError)
    assert not err
    assert err.kind == kind


def test_non_string_is_parse_error():
    assert isinstance(extract_action(None), ParseError)


def test_canonical_form():
    assert canonical_repr(make_call("move", 2)) == "('move', (2,))"
    assert canonical_repr(make_call("stop")) == "('stop',)"
    assert canonical_repr(make_call("swap", (0, 0), (0, 1))) == "('swap', ((0, 0), (0, 1)))"
    assert str(make_call("rotate", 1.5)) == "('rotate', (1.5,))"


def test_validate_accepts_and_rejects():
    assert validate(make_call("move", 3), SCHEMAS) is True
    assert validate(make_call("rotate", 12), SCHEMAS) is True  # ints are valid reals
    assert validate(make_call("swap", (2, 1), (0, 0)), SCHEMAS) is True
    cases = {
        make_call("jump", 1): "unknown action 'jump'",
        make_call("move"): "move expects 1 argument(s), got 0",
        make_call("move", 4): "d out of range",
        make_call("move", 1.0): "d must be an integer",
        make_call("rotate", 400.0): "theta out of range",
        make_call("swap", (3, 0), (0, 0)): "a out of range",
        make_call("swap", (0, 2), (0, 0)): "a out of range",
        make_call("swap", 1, 2): "a must be a pair of integers",
        make_call("stop", 1): "stop expects 0 argument(s), got 1",
    }
    for call, reason in cases.items():
        v = validate(call, SCHEMAS)
        assert not v
        assert v.reason == reason


def test_action_call_rejects_bad_values():
    with pytest.raises(ValueError):
        ActionCall("Move")
    with pytest.raises(TypeError):
        ActionCall("move", ("x",))
    with pytest.raises(TypeError):
        ActionCall("move", (True,))


scalars = st.one_of(st.integers(-10**6, 10**6), st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False))
payloads = st.lists(st.one_of(scalars, st.tuples(scalars, scalars)), max_size=4)
names = st.from_regex(r"[a-z_][a-z0-9_]{0,8}", fullmatch=True)


@settings(max_examples=300, deadline=None)
@given(names, payloads)
def test_canonical_round_trip(name, payload):
    call = ActionCall(name, tuple(payload))
    assert extract_action(canonical_repr(call)) == call
    # the call form unwraps a lone list argument
    assert extract_action(f"{name}([1, 2])") == ActionCall(name, (1, 2))


@settings(max_examples=500, deadline=None)
@given(st.text(max_size=60))
def test_extract_never_raises(text):
    out = extract_action(text)
    assert isinstance(out, (ActionCall, ParseError))
