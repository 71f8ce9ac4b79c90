"""Action grammar: pull one function-call literal out of free-form agent text.

Two surface forms are accepted, anywhere in the text:

    tuple form   ('name', payload)   ('name',)   ('name', a, b)
    call form    name(arg, ...)      name()

Grammar (whitespace between tokens is insignificant)::

    number  = ["+" | "-"] (digits ["." {digit}] | "." digits) [("e"|"E") ["+"|"-"] digits]
    value   = number | "(" [values] ")" | "[" [values] "]"
    values  = value {"," value} [","]
    tuple   = "(" quote name quote ["," [values]] ")"
    call    = name "(" [values] ")"
    name    = [a-z_][a-z0-9_]*

The argument list becomes the payload; a single list argument is unwrapped,
so ``('swap', (1, 2))``, ``('swap', 1, 2)`` and ``swap(1, 2)`` are the same
call.  The last complete literal in the text wins.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

Value = Union[int, float, list]

NAME_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")
_TUPLE_START = re.compile(r"\(\s*(['\"])([a-z_][a-z0-9_]*)\1")
_CALL_START = re.compile(r"(?<![A-Za-z0-9_'\"])([a-z_][a-z0-9_]*)\(")
_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_WS = re.compile(r"\s*")

MAX_DEPTH = 2


@dataclass(frozen=True)
class ActionCall:
    name: str
    payload: tuple = ()

    def __post_init__(self):
        if not NAME_RE.match(self.name):
            raise ValueError(f"bad action name {self.name!r}")
        object.__setattr__(self, "payload", _freeze(self.payload))
        if _depth(list(self.payload)) > MAX_DEPTH:
            raise ValueError("payload nesting deeper than 2")

    def args(self) -> list:
        """Payload as plain nested lists."""
        return _thaw(self.payload)

    def __str__(self) -> str:
        return canonical_repr(self)


def _freeze(v):
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"payload values must be int, float or lists, got {v!r}")
    return v


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def _depth(v) -> int:
    if isinstance(v, (list, tuple)):
        return 1 + max((_depth(x) for x in v), default=0)
    return 0


@dataclass(frozen=True)
class ParseError:
    kind: str  # "no_match" | "malformed_payload"
    span: tuple[int, int] | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return False


class _Fail(Exception):
    def __init__(self, pos: int, detail: str):
        super().__init__(detail)
        self.pos = pos
        self.detail = detail


class _Reader:
    def __init__(self, text: str, pos: int):
        self.text = text
        self.pos = pos

    def ws(self):
        self.pos = _WS.match(self.text, self.pos).end()

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        self.ws()
        if self.peek() != ch:
            raise _Fail(self.pos, f"expected {ch!r}")
        self.pos += 1

    def value(self, depth: int) -> Value:
        self.ws()
        ch = self.peek()
        if ch in "([":
            if depth >= 4:
                raise _Fail(self.pos, "nesting too deep")
            close = ")" if ch == "(" else "]"
            self.pos += 1
            return self.values(close, depth + 1)
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            raise _Fail(self.pos, "expected a number or list")
        self.pos = m.end()
        tok = m.group()
        if any(c in tok for c in ".eE"):
            x = float(tok)
            if not math.isfinite(x):
                raise _Fail(m.start(), "number out of range")
            return x
        return int(tok)

    def values(self, close: str, depth: int) -> list:
        out: list = []
        self.ws()
        if self.peek() == close:
            self.pos += 1
            return out
        while True:
            out.append(self.value(depth))
            self.ws()
            ch = self.peek()
            if ch == close:
                self.pos += 1
                return out
            if ch != ",":
                raise _Fail(self.pos, f"expected ',' or {close!r}")
            self.pos += 1
            self.ws()
            if self.peek() == close:
                self.pos += 1
                return out


def _payload(args: list) -> list:
    if len(args) == 1 and isinstance(args[0], list):
        args = args[0]
    if _depth(args) > MAX_DEPTH:
        raise _Fail(-1, "payload nesting deeper than 2")
    return args


def _try_tuple(text: str, m: re.Match) -> tuple[int, ActionCall]:
    r = _Reader(text, m.end())
    r.ws()
    if r.peek() == ")":
        r.pos += 1
        return r.pos, ActionCall(m.group(2))
    r.expect(",")
    args = r.values(")", 1)
    return r.pos, ActionCall(m.group(2), _payload(args))


def _try_call(text: str, m: re.Match) -> tuple[int, ActionCall]:
    r = _Reader(text, m.end())
    args = r.values(")", 1)
    return r.pos, ActionCall(m.group(1), _payload(args))


def extract_action(raw: str) -> ActionCall | ParseError:
    """Return the last complete action literal in ``raw``, or a ParseError."""
    if not isinstance(raw, str):
        return ParseError("no_match", detail="not text")
    best: tuple[int, int, ActionCall] | None = None
    failure: tuple[int, int, str] | None = None
    candidates = [(m, _try_tuple) for m in _TUPLE_START.finditer(raw)]
    candidates += [(m, _try_call) for m in _CALL_START.finditer(raw)]
    for m, attempt in candidates:
        try:
            end, call = attempt(raw, m)
        except _Fail as e:
            failure = (m.start(), max(e.pos, m.end()), e.detail)
            continue
        key = (end, m.start(), call)
        if best is None or key[:2] > best[:2]:
            best = key
    if best is not None:
        return best[2]
    if failure is not None:
        return ParseError("malformed_payload", span=failure[:2], detail=failure[2])
    return ParseError("no_match")


# -- payload schemas ---------------------------------------------------------


@dataclass(frozen=True)
class Arg:
    """One payload element: kind is "int", "real" or "pair" (two ints)."""

    label: str
    kind: str = "int"
    lo: float | None = None
    hi: float | None = None
    # pair components may have their own ranges
    lo2: float | None = None
    hi2: float | None = None


@dataclass(frozen=True)
class PayloadSchema:
    name: str
    args: tuple[Arg, ...] = ()
    doc: str = ""
    signature: str = ""

    @property
    def arity(self) -> int:
        return len(self.args)


STOP = PayloadSchema("stop", (), "end the episode; the task is scored at this point", "stop()")


@dataclass(frozen=True)
class Violation:
    reason: str

    def __bool__(self) -> bool:
        return False


def _in_range(x, lo, hi) -> bool:
    return (lo is None or x >= lo) and (hi is None or x <= hi)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _check_arg(spec: Arg, x) -> str | None:
    if spec.kind == "int":
        if not _is_int(x):
            return f"{spec.label} must be an integer"
        if not _in_range(x, spec.lo, spec.hi):
            return f"{spec.label} out of range"
    elif spec.kind == "real":
        if not (_is_int(x) or isinstance(x, float)):
            return f"{spec.label} must be a number"
        if not _in_range(x, spec.lo, spec.hi):
            return f"{spec.label} out of range"
    elif spec.kind == "pair":
        if not isinstance(x, tuple) or len(x) != 2 or not all(_is_int(v) for v in x):
            return f"{spec.label} must be a pair of integers"
        if not _in_range(x[0], spec.lo, spec.hi) or not _in_range(x[1], spec.lo2, spec.hi2):
            return f"{spec.label} out of range"
    else:  # pragma: no cover - schema authoring error
        raise ValueError(spec.kind)
    return None


def validate(call: ActionCall, schemas: dict[str, PayloadSchema]) -> bool | Violation:
    """True when ``call`` fits one of ``schemas``; otherwise a Violation."""
    if not schemas:
        raise ValueError("empty schema set")
    schema = schemas.get(call.name)
    if schema is None:
        return Violation(f"unknown action '{call.name}'")
    if len(call.payload) != schema.arity:
        return Violation(
            f"{call.name} expects {schema.arity} argument(s), got {len(call.payload)}"
        )
    for spec, x in zip(schema.args, call.payload):
        reason = _check_arg(spec, x)
        if reason:
            return Violation(reason)
    return True


# -- canonical text -------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, tuple):
        inner = ", ".join(_fmt(x) for x in v)
        return f"({inner},)" if len(v) == 1 else f"({inner})"
    return repr(v)


def canonical_repr(call: ActionCall) -> str:
    if not call.payload:
        return f"('{call.name}',)"
    return f"('{call.name}', {_fmt(call.payload)})"


def make_call(name: str, *args) -> ActionCall:
    return ActionCall(name, args)


def describe(schemas: Sequence[PayloadSchema]) -> str:
    lines = []
    for s in schemas:
        lines.append(f"- {s.signature or s.name}: {s.doc}")
    return "\n".join(lines)
