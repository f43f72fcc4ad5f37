"""Sandboxed expression-tree language for wisdom program bodies.

Programs are s-expressions over records and lists.  The language is pure
by construction: no assignment, no host access, no I/O.  The only write
channel is (propose "field" value), which appends to a proposal list the
harness applies after execution.  Evaluation is total under budget: a
deterministic step meter (calibrated so the default 50 ms budget maps to
a fixed step cap) plus a wall-clock backstop cut off runaway programs,
and composite values are charged against a memory meter before they are
materialized.  Network access resolves named protocols against a
registry of harness-supplied stub functions and is denied unless the
protocol id is on the budget's allowlist.

Grammar (informal):
    expr    := atom | "(" form ")"
    atom    := integer | decimal | string | true | false | identifier
    form    := special | (op expr*)
    special := (if c t e) | (and e*) | (or e*) | (let ((name e)*) body)
             | (map name list-expr body) | (filter name list-expr body)
             | (fold acc name list-expr init body)
             | (record key-expr val-expr ...) | (list e*)
             | (get rec key) | (get-or rec key default)
             | (propose field-expr value-expr) | (network proto-expr arg-expr)
Comments run from ";" to end of line.
"""

from __future__ import annotations

import time
from typing import Any, Callable

from ..errors import GoalweaveError
from ..values import canonical_json, deep_equal

STEPS_PER_MS = 2000
WALL_BACKSTOP_FACTOR = 4
MAX_NESTING = 200

# Approximate per-value costs for the deterministic memory meter, in bytes.
# Charged before materialization so an over-allocating program errors out
# instead of actually allocating.
_COST_LIST_BASE = 56
_COST_LIST_SLOT = 8
_COST_INT_SLOT = 32
_COST_RECORD_BASE = 80
_COST_RECORD_PAIR = 50
_COST_STR_BASE = 49


class SandboxError(GoalweaveError):
    pass


class ForbiddenForm(SandboxError):
    """Parse-time rejection: unknown form or unbound identifier."""


class EvalRuntimeError(SandboxError):
    """Type or domain error during evaluation (a program bug)."""


class TimeBudgetExceeded(SandboxError):
    pass


class MemoryBudgetExceeded(SandboxError):
    pass


class NetworkDenied(SandboxError):
    pass


_PROTOCOL_STUBS: dict[str, Callable[[Any], Any]] = {}


def register_protocol(name: str, fn: Callable[[Any], Any]) -> None:
    """Register a pure stub serving (network "name" arg) calls."""
    _PROTOCOL_STUBS[name] = fn


def registered_protocols() -> tuple:
    return tuple(sorted(_PROTOCOL_STUBS))


# -- tokenizer ---------------------------------------------------------------


def _tokenize(text: str) -> list:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            parts = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise ForbiddenForm("unterminated escape in string literal")
                    esc = text[j + 1]
                    parts.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc))
                    if parts[-1] is None:
                        raise ForbiddenForm(f"unknown escape \\{esc}")
                    j += 2
                else:
                    parts.append(text[j])
                    j += 1
            if j >= n:
                raise ForbiddenForm("unterminated string literal")
            tokens.append(("str", "".join(parts)))
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n();"':
                j += 1
            tokens.append(("atom", text[i:j]))
            i = j
    return tokens


def _read(tokens: list, pos: int, depth: int) -> tuple:
    if depth > MAX_NESTING:
        raise ForbiddenForm("expression nesting too deep")
    if pos >= len(tokens):
        raise ForbiddenForm("unexpected end of program")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read(tokens, pos, depth + 1)
            items.append(item)
        if pos >= len(tokens):
            raise ForbiddenForm("missing closing parenthesis")
        return items, pos + 1
    if tok == ")":
        raise ForbiddenForm("unexpected closing parenthesis")
    kind, text = tok
    if kind == "str":
        return ("str", text), pos + 1
    if text == "true":
        return ("lit", True), pos + 1
    if text == "false":
        return ("lit", False), pos + 1
    try:
        return ("lit", int(text)), pos + 1
    except ValueError:
        pass
    try:
        return ("lit", float(text)), pos + 1
    except ValueError:
        pass
    return ("id", text), pos + 1


# -- analyzer ----------------------------------------------------------------
# Compiles the s-expression into tagged tuples and statically rejects
# unknown forms and unbound identifiers, so a program that parses can only
# fail on types, domains, or budget.


def _arity(name: str, args: list, low: int, high: Optional[int]) -> None:
    if len(args) < low or (high is not None and len(args) > high):
        raise ForbiddenForm(f"({name} ...): wrong argument count {len(args)}")


def _analyze(sx: Any, bound: frozenset) -> tuple:
    if isinstance(sx, tuple):
        tag = sx[0]
        if tag == "lit":
            return ("lit", sx[1])
        if tag == "str":
            return ("lit", sx[1])
        if tag == "id":
            name = sx[1]
            if name not in bound:
                raise ForbiddenForm(f"unbound identifier {name!r}")
            return ("var", name)
    if not isinstance(sx, list) or not sx:
        raise ForbiddenForm(f"malformed expression: {sx!r}")
    head = sx[0]
    if not (isinstance(head, tuple) and head[0] == "id"):
        raise ForbiddenForm("form head must be an operator name")
    op = head[1]
    args = sx[1:]

    if op == "if":
        _arity(op, args, 3, 3)
        return ("if",) + tuple(_analyze(a, bound) for a in args)
    if op in ("and", "or"):
        _arity(op, args, 1, None)
        return (op, tuple(_analyze(a, bound) for a in args))
    if op == "let":
        _arity(op, args, 2, 2)
        bindings_sx, body_sx = args
        if not isinstance(bindings_sx, list):
            raise ForbiddenForm("(let ((name expr)...) body): bad binding list")
        compiled = []
        inner = set(bound)
        for b in bindings_sx:
            if (
                not isinstance(b, list)
                or len(b) != 2
                or not (isinstance(b[0], tuple) and b[0][0] == "id")
            ):
                raise ForbiddenForm("let binding must be (name expr)")
            name = b[0][1]
            compiled.append((name, _analyze(b[1], frozenset(inner))))
            inner.add(name)
        return ("let", tuple(compiled), _analyze(body_sx, frozenset(inner)))
    if op in ("map", "filter"):
        _arity(op, args, 3, 3)
        var_sx, lst_sx, body_sx = args
        if not (isinstance(var_sx, tuple) and var_sx[0] == "id"):
            raise ForbiddenForm(f"({op} name list body): first argument must be a name")
        var = var_sx[1]
        return (
            op,
            var,
            _analyze(lst_sx, bound),
            _analyze(body_sx, bound | {var}),
        )
    if op == "fold":
        _arity(op, args, 5, 5)
        acc_sx, var_sx, lst_sx, init_sx, body_sx = args
        for v in (acc_sx, var_sx):
            if not (isinstance(v, tuple) and v[0] == "id"):
                raise ForbiddenForm("(fold acc name list init body): bad variable")
        acc, var = acc_sx[1], var_sx[1]
        return (
            "fold",
            acc,
            var,
            _analyze(lst_sx, bound),
            _analyze(init_sx, bound),
            _analyze(body_sx, bound | {acc, var}),
        )
    if op == "record":
        if len(args) % 2 != 0:
            raise ForbiddenForm("(record k v ...): odd argument count")
        pairs = tuple(
            (_analyze(args[i], bound), _analyze(args[i + 1], bound))
            for i in range(0, len(args), 2)
        )
        return ("record", pairs)
    if op == "list":
        return ("list", tuple(_analyze(a, bound) for a in args))
    if op == "get":
        _arity(op, args, 2, 2)
        return ("get", _analyze(args[0], bound), _analyze(args[1], bound))
    if op == "get-or":
        _arity(op, args, 3, 3)
        return (
            "getor",
            _analyze(args[0], bound),
            _analyze(args[1], bound),
            _analyze(args[2], bound),
        )
    if op == "propose":
        _arity(op, args, 2, 2)
        return ("propose", _analyze(args[0], bound), _analyze(args[1], bound))
    if op == "network":
        _arity(op, args, 2, 2)
        return ("network", _analyze(args[0], bound), _analyze(args[1], bound))
    if op in _BUILTINS:
        fn, low, high = _BUILTINS[op]
        _arity(op, args, low, high)
        return ("builtin", fn, op, tuple(_analyze(a, bound) for a in args))
    raise ForbiddenForm(f"unknown form {op!r}")


def parse_program(text: str) -> tuple:
    """Parse and statically check one expression; returns the compiled tree."""
    tokens = _tokenize(text)
    if not tokens:
        raise ForbiddenForm("empty program")
    sx, pos = _read(tokens, 0, 0)
    if pos != len(tokens):
        raise ForbiddenForm("trailing tokens after expression")
    return _analyze(sx, frozenset({"input"}))


# -- builtins ----------------------------------------------------------------


def _need_num(op: str, v: Any) -> Any:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalRuntimeError(f"({op}): expected a number, got {v!r}")
    return v


def _need_list(op: str, v: Any) -> list:
    if not isinstance(v, list):
        raise EvalRuntimeError(f"({op}): expected a list, got {v!r}")
    return v


def _need_record(op: str, v: Any) -> dict:
    if not isinstance(v, dict):
        raise EvalRuntimeError(f"({op}): expected a record, got {v!r}")
    return v


def _need_str(op: str, v: Any) -> str:
    if not isinstance(v, str):
        raise EvalRuntimeError(f"({op}): expected a string, got {v!r}")
    return v


def _bi_add(ev, vals):
    total = 0
    for v in vals:
        total = total + _need_num("+", v)
    return total


def _bi_sub(ev, vals):
    if len(vals) == 1:
        return -_need_num("-", vals[0])
    acc = _need_num("-", vals[0])
    for v in vals[1:]:
        acc = acc - _need_num("-", v)
    return acc


def _bi_mul(ev, vals):
    total = 1
    for v in vals:
        total = total * _need_num("*", v)
    return total


def _bi_div(ev, vals):
    a, b = (_need_num("/", v) for v in vals)
    if b == 0:
        raise EvalRuntimeError("(/): division by zero")
    return a / b


def _bi_min(ev, vals):
    return min(_need_num("min", v) for v in vals)


def _bi_max(ev, vals):
    return max(_need_num("max", v) for v in vals)


def _bi_abs(ev, vals):
    return abs(_need_num("abs", vals[0]))


def _bi_eq(ev, vals):
    return deep_equal(vals[0], vals[1])


def _bi_ne(ev, vals):
    return not deep_equal(vals[0], vals[1])


def _cmp(op, a, b):
    if isinstance(a, str) and isinstance(b, str):
        return a, b
    return _need_num(op, a), _need_num(op, b)


def _bi_lt(ev, vals):
    a, b = _cmp("<", vals[0], vals[1])
    return a < b


def _bi_le(ev, vals):
    a, b = _cmp("<=", vals[0], vals[1])
    return a <= b


def _bi_gt(ev, vals):
    a, b = _cmp(">", vals[0], vals[1])
    return a > b


def _bi_ge(ev, vals):
    a, b = _cmp(">=", vals[0], vals[1])
    return a >= b


def _bi_not(ev, vals):
    if not isinstance(vals[0], bool):
        raise EvalRuntimeError("(not): expected a boolean")
    return not vals[0]


def _bi_len(ev, vals):
    v = vals[0]
    if isinstance(v, (list, str)):
        return len(v)
    if isinstance(v, dict):
        return len(v)
    raise EvalRuntimeError("(len): expected list, string, or record")


def _bi_nth(ev, vals):
    lst = _need_list("nth", vals[0])
    idx = _need_num("nth", vals[1])
    if not isinstance(idx, int):
        raise EvalRuntimeError("(nth): index must be an integer")
    ev.charge_steps(1)
    if idx < 0 or idx >= len(lst):
        raise EvalRuntimeError(f"(nth): index {idx} out of range 0..{len(lst) - 1}")
    return lst[idx]


def _bi_contains(ev, vals):
    lst = _need_list("contains", vals[0])
    ev.charge_steps(len(lst))
    return any(deep_equal(x, vals[1]) for x in lst)


def _bi_sort(ev, vals):
    lst = _need_list("sort", vals[0])
    ev.charge_steps(len(lst))
    ev.charge(_COST_LIST_BASE + _COST_LIST_SLOT * len(lst))
    kinds = {(type(x) is bool, type(x).__name__) for x in lst}
    if len(kinds) > 1:
        raise EvalRuntimeError("(sort): mixed element types")
    if lst and not isinstance(lst[0], (int, float, str)):
        raise EvalRuntimeError("(sort): elements must be scalars")
    return sorted(lst)


def _bi_enumerate(ev, vals):
    lst = _need_list("enumerate", vals[0])
    ev.charge_steps(len(lst))
    ev.charge(len(lst) * (_COST_RECORD_BASE + 2 * _COST_RECORD_PAIR) + _COST_LIST_BASE)
    return [{"i": i, "v": v} for i, v in enumerate(lst)]


def _bi_range(ev, vals):
    n = _need_num("range", vals[0])
    if not isinstance(n, int) or n < 0:
        raise EvalRuntimeError("(range): expected a non-negative integer")
    ev.charge(_COST_LIST_BASE + _COST_INT_SLOT * n)
    ev.charge_steps(n)
    return list(range(n))


def _bi_concat(ev, vals):
    a = _need_list("concat", vals[0])
    b = _need_list("concat", vals[1])
    ev.charge(_COST_LIST_BASE + _COST_LIST_SLOT * (len(a) + len(b)))
    ev.charge_steps(len(a) + len(b))
    return a + b


def _bi_append(ev, vals):
    a = _need_list("append", vals[0])
    ev.charge(_COST_LIST_BASE + _COST_LIST_SLOT * (len(a) + 1))
    ev.charge_steps(len(a))
    return a + [vals[1]]


def _stringify(op: str, v: Any) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    raise EvalRuntimeError(f"({op}): cannot stringify {v!r}")


def _bi_str(ev, vals):
    parts = [_stringify("str", v) for v in vals]
    total = sum(len(p) for p in parts)
    ev.charge(_COST_STR_BASE + total)
    ev.charge_steps(len(parts))
    return "".join(parts)


def _bi_join(ev, vals):
    sep = _need_str("join", vals[0])
    lst = _need_list("join", vals[1])
    parts = [_stringify("join", v) for v in lst]
    total = sum(len(p) for p in parts) + len(sep) * max(0, len(parts) - 1)
    ev.charge(_COST_STR_BASE + total)
    ev.charge_steps(len(parts))
    return sep.join(parts)


def _bi_keys(ev, vals):
    rec = _need_record("keys", vals[0])
    ev.charge(_COST_LIST_BASE + sum(_COST_STR_BASE + len(k) for k in rec))
    ev.charge_steps(len(rec))
    return sorted(rec.keys())


def _bi_has(ev, vals):
    rec = _need_record("has", vals[0])
    key = _need_str("has", vals[1])
    return key in rec


def _bi_merge(ev, vals):
    a = _need_record("merge", vals[0])
    b = _need_record("merge", vals[1])
    ev.charge(_COST_RECORD_BASE + _COST_RECORD_PAIR * (len(a) + len(b)))
    ev.charge_steps(len(a) + len(b))
    out = dict(a)
    out.update(b)
    return out


_BUILTINS: dict[str, tuple] = {
    "+": (_bi_add, 1, None),
    "-": (_bi_sub, 1, None),
    "*": (_bi_mul, 1, None),
    "/": (_bi_div, 2, 2),
    "min": (_bi_min, 1, None),
    "max": (_bi_max, 1, None),
    "abs": (_bi_abs, 1, 1),
    "=": (_bi_eq, 2, 2),
    "!=": (_bi_ne, 2, 2),
    "<": (_bi_lt, 2, 2),
    "<=": (_bi_le, 2, 2),
    ">": (_bi_gt, 2, 2),
    ">=": (_bi_ge, 2, 2),
    "not": (_bi_not, 1, 1),
    "len": (_bi_len, 1, 1),
    "nth": (_bi_nth, 2, 2),
    "contains": (_bi_contains, 2, 2),
    "sort": (_bi_sort, 1, 1),
    "enumerate": (_bi_enumerate, 1, 1),
    "range": (_bi_range, 1, 1),
    "concat": (_bi_concat, 2, 2),
    "append": (_bi_append, 2, 2),
    "str": (_bi_str, 1, None),
    "join": (_bi_join, 2, 2),
    "keys": (_bi_keys, 1, 1),
    "has": (_bi_has, 2, 2),
    "merge": (_bi_merge, 2, 2),
}


# -- evaluator ---------------------------------------------------------------


class Proposal(tuple):
    """A (field, value) write intent accumulated by (propose ...)."""

    __slots__ = ()

    def __new__(cls, field: str, value: Any):
        return super().__new__(cls, (field, value))

    @property
    def field(self) -> str:
        return self[0]

    @property
    def value(self) -> Any:
        return self[1]


class Evaluator:
    __slots__ = (
        "step_cap",
        "steps",
        "mem_limit",
        "mem",
        "deadline",
        "allowlist",
        "proposals",
    )

    def __init__(self, time_limit_ms: float, memory_limit: int, allowlist: frozenset):
        self.step_cap = int(time_limit_ms * STEPS_PER_MS)
        self.steps = 0
        self.mem_limit = memory_limit
        self.mem = 0
        self.deadline = time.monotonic() + (time_limit_ms / 1000.0) * WALL_BACKSTOP_FACTOR
        self.allowlist = allowlist
        self.proposals: list = []

    def charge_steps(self, n: int) -> None:
        self.steps += n
        if self.steps > self.step_cap:
            raise TimeBudgetExceeded(
                f"step budget exhausted ({self.step_cap} steps for the configured time limit)"
            )

    def charge(self, nbytes: int) -> None:
        self.mem += nbytes
        if self.mem > self.mem_limit:
            raise MemoryBudgetExceeded(
                f"memory budget exhausted ({self.mem_limit} bytes)"
            )

    def eval(self, node: tuple, env: dict) -> Any:
        self.steps += 1
        if self.steps > self.step_cap:
            raise TimeBudgetExceeded(
                f"step budget exhausted ({self.step_cap} steps for the configured time limit)"
            )
        if self.steps & 4095 == 0 and time.monotonic() > self.deadline:
            raise TimeBudgetExceeded("wall-clock backstop tripped")

        tag = node[0]
        if tag == "lit":
            return node[1]
        if tag == "var":
            return env[node[1]]
        if tag == "builtin":
            fn, name, argnodes = node[1], node[2], node[3]
            vals = [self.eval(a, env) for a in argnodes]
            return fn(self, vals)
        if tag == "if":
            cond = self.eval(node[1], env)
            if not isinstance(cond, bool):
                raise EvalRuntimeError("(if): condition must be a boolean")
            return self.eval(node[2] if cond else node[3], env)
        if tag == "and":
            for sub in node[1]:
                v = self.eval(sub, env)
                if not isinstance(v, bool):
                    raise EvalRuntimeError("(and): expected booleans")
                if not v:
                    return False
            return True
        if tag == "or":
            for sub in node[1]:
                v = self.eval(sub, env)
                if not isinstance(v, bool):
                    raise EvalRuntimeError("(or): expected booleans")
                if v:
                    return True
            return False
        if tag == "let":
            inner = dict(env)
            for name, expr in node[1]:
                inner[name] = self.eval(expr, inner)
            return self.eval(node[2], inner)
        if tag == "get":
            rec = self.eval(node[1], env)
            key = self.eval(node[2], env)
            _need_str("get", key)
            _need_record("get", rec)
            if key not in rec:
                raise EvalRuntimeError(f"(get): missing field {key!r}")
            return rec[key]
        if tag == "getor":
            rec = self.eval(node[1], env)
            key = self.eval(node[2], env)
            _need_str("get-or", key)
            _need_record("get-or", rec)
            if key in rec:
                return rec[key]
            return self.eval(node[3], env)
        if tag == "record":
            self.charge(_COST_RECORD_BASE + _COST_RECORD_PAIR * len(node[1]))
            out = {}
            for knode, vnode in node[1]:
                k = self.eval(knode, env)
                _need_str("record", k)
                out[k] = self.eval(vnode, env)
            return out
        if tag == "list":
            self.charge(_COST_LIST_BASE + _COST_LIST_SLOT * len(node[1]))
            return [self.eval(a, env) for a in node[1]]
        if tag == "map":
            var, lst_node, body = node[1], node[2], node[3]
            lst = _need_list("map", self.eval(lst_node, env))
            self.charge(_COST_LIST_BASE + _COST_LIST_SLOT * len(lst))
            inner = dict(env)
            out = []
            for item in lst:
                inner[var] = item
                out.append(self.eval(body, inner))
            return out
        if tag == "filter":
            var, lst_node, body = node[1], node[2], node[3]
            lst = _need_list("filter", self.eval(lst_node, env))
            self.charge(_COST_LIST_BASE + _COST_LIST_SLOT * len(lst))
            inner = dict(env)
            out = []
            for item in lst:
                inner[var] = item
                keep = self.eval(body, inner)
                if not isinstance(keep, bool):
                    raise EvalRuntimeError("(filter): predicate must return a boolean")
                if keep:
                    out.append(item)
            return out
        if tag == "fold":
            acc_name, var, lst_node, init_node, body = (
                node[1],
                node[2],
                node[3],
                node[4],
                node[5],
            )
            lst = _need_list("fold", self.eval(lst_node, env))
            acc = self.eval(init_node, env)
            inner = dict(env)
            for item in lst:
                inner[acc_name] = acc
                inner[var] = item
                acc = self.eval(body, inner)
            return acc
        if tag == "propose":
            field = self.eval(node[1], env)
            _need_str("propose", field)
            value = self.eval(node[2], env)
            self.charge(_COST_RECORD_PAIR)
            self.proposals.append(Proposal(field, value))
            return True
        if tag == "network":
            proto = self.eval(node[1], env)
            _need_str("network", proto)
            if proto not in self.allowlist:
                raise NetworkDenied(f"protocol {proto!r} not on the allowlist")
            stub = _PROTOCOL_STUBS.get(proto)
            if stub is None:
                raise NetworkDenied(f"protocol {proto!r} has no registered stub")
            arg = self.eval(node[2], env)
            result = stub(arg)
            self.charge(_COST_STR_BASE + len(canonical_json(result)))
            return result
        raise EvalRuntimeError(f"unknown node tag {tag!r}")  # unreachable


def evaluate(
    ast: tuple,
    input_record: dict,
    time_limit_ms: float,
    memory_limit: int,
    allowlist: frozenset = frozenset(),
) -> tuple:
    """Run a compiled program; returns (result, proposals)."""
    ev = Evaluator(time_limit_ms, memory_limit, allowlist)
    result = ev.eval(ast, {"input": input_record})
    return result, tuple(ev.proposals)
