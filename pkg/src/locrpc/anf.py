"""A-normal-form terms shared by the target calculi.

Values are variables, located multi-parameter lambdas, named closures and
literals. Terms add local application, req, call, ret and let. The same
classes serve the lambda-level calculi and the closure-converted ones: the
former use `Lam`, the latter `Clo`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .syntax import Literal, Location, show_literal


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    loc: Location
    params: tuple[str, ...]
    body: Term


@dataclass(frozen=True)
class Clo:
    name: str
    env: tuple[Value, ...] = ()


@dataclass(frozen=True)
class Const:
    lit: Literal


Value = Var | Lam | Clo | Const


@dataclass(frozen=True)
class Val:
    value: Value


@dataclass(frozen=True)
class LocalApp:
    fun: Value
    args: tuple[Value, ...]


@dataclass(frozen=True)
class Req:
    fun: Value
    args: tuple[Value, ...]


@dataclass(frozen=True)
class Call:
    fun: Value
    args: tuple[Value, ...]


@dataclass(frozen=True)
class Ret:
    value: Value


@dataclass(frozen=True)
class Let:
    x: str
    bound: Term
    body: Term


Term = Val | LocalApp | Req | Call | Ret | Let


def let_chain(*parts) -> Term:
    """let_chain((x, m1), (y, m2), body) nests lets right to left."""
    *binds, body = parts
    for x, m in reversed(binds):
        body = Let(x, m, body)
    return body


# ---------------------------------------------------------------- substitution


def subst_value(v: Value, env: Mapping[str, Value]) -> Value:
    match v:
        case Var(name):
            return env.get(name, v)
        case Const():
            return v
        case Clo(name, vs):
            return Clo(name, tuple(subst_value(w, env) for w in vs))
        case Lam(loc, params, body):
            inner = _drop(env, params)
            return Lam(loc, params, subst(body, inner)) if inner else v
    raise TypeError(v)


def _drop(env: Mapping[str, Value], names: Iterable[str]) -> Mapping[str, Value]:
    names = set(names)
    if names.isdisjoint(env):
        return env
    return {k: w for k, w in env.items() if k not in names}


def subst(term: Term, env: Mapping[str, Value]) -> Term:
    """Parallel substitution of closed values for variables."""
    if not env:
        return term
    match term:
        case Val(v):
            return Val(subst_value(v, env))
        case LocalApp(f, args):
            return LocalApp(subst_value(f, env), tuple(subst_value(a, env) for a in args))
        case Req(f, args):
            return Req(subst_value(f, env), tuple(subst_value(a, env) for a in args))
        case Call(f, args):
            return Call(subst_value(f, env), tuple(subst_value(a, env) for a in args))
        case Ret(v):
            return Ret(subst_value(v, env))
        case Let(x, bound, body):
            return Let(x, subst(bound, env), subst(body, _drop(env, (x,))))
    raise TypeError(term)


# ---------------------------------------------------------------- free variables


def free_vars(node: Term | Value) -> list[str]:
    """Free variables in order of first occurrence."""
    out: dict[str, None] = {}
    _fv(node, frozenset(), out)
    return list(out)


def _fv(node, bound: frozenset[str], out: dict[str, None]) -> None:
    match node:
        case Var(name):
            if name not in bound:
                out.setdefault(name)
        case Const():
            pass
        case Clo(_, vs):
            for w in vs:
                _fv(w, bound, out)
        case Lam(_, params, body):
            _fv(body, bound | set(params), out)
        case Val(v) | Ret(v):
            _fv(v, bound, out)
        case LocalApp(f, args) | Req(f, args) | Call(f, args):
            _fv(f, bound, out)
            for a in args:
                _fv(a, bound, out)
        case Let(x, m1, m2):
            _fv(m1, bound, out)
            _fv(m2, bound | {x}, out)
        case _:
            raise TypeError(node)


# ---------------------------------------------------------------- equality up to renaming


def alpha_eq(a: Term | Value, b: Term | Value) -> bool:
    return _aeq(a, b, {}, {}, [0])


def _bind(ea: dict, eb: dict, xs, ys, counter) -> tuple[dict, dict]:
    ea, eb = dict(ea), dict(eb)
    for x, y in zip(xs, ys):
        counter[0] += 1
        ea[x] = eb[y] = counter[0]
    return ea, eb


def _aeq(a, b, ea: dict, eb: dict, counter) -> bool:
    match a, b:
        case Var(x), Var(y):
            if (x in ea) != (y in eb):
                return False
            return ea[x] == eb[y] if x in ea else x == y
        case Const(l1), Const(l2):
            return type(l1) is type(l2) and l1 == l2
        case Clo(n1, v1), Clo(n2, v2):
            return n1 == n2 and len(v1) == len(v2) and all(
                _aeq(x, y, ea, eb, counter) for x, y in zip(v1, v2)
            )
        case Lam(l1, p1, b1), Lam(l2, p2, b2):
            if l1 is not l2 or len(p1) != len(p2):
                return False
            ea2, eb2 = _bind(ea, eb, p1, p2, counter)
            return _aeq(b1, b2, ea2, eb2, counter)
        case Val(v1), Val(v2):
            return _aeq(v1, v2, ea, eb, counter)
        case Ret(v1), Ret(v2):
            return _aeq(v1, v2, ea, eb, counter)
        case (LocalApp(f1, a1), LocalApp(f2, a2)) | (Req(f1, a1), Req(f2, a2)) | (Call(f1, a1), Call(f2, a2)):
            return (
                len(a1) == len(a2)
                and _aeq(f1, f2, ea, eb, counter)
                and all(_aeq(x, y, ea, eb, counter) for x, y in zip(a1, a2))
            )
        case Let(x, m1, n1), Let(y, m2, n2):
            if not _aeq(m1, m2, ea, eb, counter):
                return False
            ea2, eb2 = _bind(ea, eb, (x,), (y,), counter)
            return _aeq(n1, n2, ea2, eb2, counter)
    return False


# ---------------------------------------------------------------- printing


def pretty_value(v: Value) -> str:
    match v:
        case Var(name):
            return name
        case Const(lit):
            return show_literal(lit)
        case Clo(name, vs):
            return f"clo({name}, {{{', '.join(pretty_value(w) for w in vs)}}})"
        case Lam(loc, params, body):
            ps = params[0] if len(params) == 1 else f"({', '.join(params)})"
            return f"\\{loc.value} {ps}. {pretty(body)}"
    raise TypeError(v)


def _atom(v: Value) -> str:
    s = pretty_value(v)
    return f"({s})" if isinstance(v, Lam) else s


def _args(args: tuple[Value, ...]) -> str:
    return "(" + ", ".join(pretty_value(a) for a in args) + ")"


def pretty(term: Term) -> str:
    match term:
        case Val(v):
            return pretty_value(v)
        case LocalApp(f, args):
            return f"{_atom(f)}{_args(args)}"
        case Req(f, args):
            return f"req({pretty_value(f)}){_args(args)}"
        case Call(f, args):
            return f"call({pretty_value(f)}){_args(args)}"
        case Ret(v):
            return f"ret({pretty_value(v)})"
        case Let(x, m1, m2):
            return f"let {x} = {pretty(m1)} in {pretty(m2)}"
    raise TypeError(term)


def term_size(node: Term | Value) -> int:
    match node:
        case Var() | Const():
            return 1
        case Clo(_, vs):
            return 1 + sum(term_size(w) for w in vs)
        case Lam(_, _, body):
            return 1 + term_size(body)
        case Val(v) | Ret(v):
            return 1 + term_size(v)
        case LocalApp(f, args) | Req(f, args) | Call(f, args):
            return 1 + term_size(f) + sum(term_size(a) for a in args)
        case Let(_, m1, m2):
            return 1 + term_size(m1) + term_size(m2)
    raise TypeError(node)


def iter_subterms(node: Term | Value):
    """Pre-order walk over every term and value node."""
    yield node
    match node:
        case Clo(_, vs):
            for w in vs:
                yield from iter_subterms(w)
        case Lam(_, _, body):
            yield from iter_subterms(body)
        case Val(v) | Ret(v):
            yield from iter_subterms(v)
        case LocalApp(f, args) | Req(f, args) | Call(f, args):
            yield from iter_subterms(f)
            for a in args:
                yield from iter_subterms(a)
        case Let(_, m1, m2):
            yield from iter_subterms(m1)
            yield from iter_subterms(m2)
