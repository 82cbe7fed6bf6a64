"""Stateful compilation: direct style on both sides, call/ret for server-to-client calls."""

from __future__ import annotations

from typing import Iterable

from . import anf as A
from .enc import Fresh, _fun_loc
from .machine import (
    ClientRunning,
    Config,
    Frame,
    LamResolver,
    Resolver,
    ServerRunning,
    Strategy,
    Trace,
    run,
    step,
)
from .syntax import CLIENT, SERVER, all_names
from .typecheck import AApp, AConst, ALam, AnnTerm, AVar, erase


class StateCompiler:
    def __init__(self, fresh: Fresh):
        self.fresh = fresh

    def value(self, ann: AnnTerm) -> A.Value:
        match ann:
            case AVar(name):
                return A.Var(name)
            case AConst(lit):
                return A.Const(lit)
            case ALam(loc, x, _, body):
                return A.Lam(loc, (x,), self.term(body, loc))
        raise TypeError(f"not a value: {ann!r}")

    def term(self, ann: AnnTerm, at) -> A.Term:
        if not isinstance(ann, AApp):
            return A.Val(self.value(ann))
        loc = _fun_loc(ann)
        f, x = self.fresh("f"), self.fresh("x")
        if at is CLIENT and loc is SERVER:
            r = self.fresh("r")
            call = A.Req(A.Var(f), (A.Var(x),))
        elif at is SERVER and loc is CLIENT:
            y, z, r = self.fresh("y"), self.fresh("z"), self.fresh("r")
            commute = A.Lam(
                CLIENT,
                (z,),
                A.Let(y, A.LocalApp(A.Var(f), (A.Var(z),)), A.Ret(A.Var(y))),
            )
            call = A.Call(commute, (A.Var(x),))
        else:
            r = self.fresh("r")
            call = A.LocalApp(A.Var(f), (A.Var(x),))
        fun = self.term(ann.fun, at)
        arg = self.term(ann.arg, at)
        return A.let_chain((f, fun), (x, arg), (r, call), A.Val(A.Var(r)))


def compile_client_state(ann: AnnTerm, fresh: Fresh | None = None) -> A.Term:
    return StateCompiler(fresh or Fresh(all_names(erase(ann)))).term(ann, CLIENT)


def compile_server_state(ann: AnnTerm, fresh: Fresh | None = None) -> A.Term:
    return StateCompiler(fresh or Fresh(all_names(erase(ann)))).term(ann, SERVER)


def compile_value_state(ann: AnnTerm, fresh: Fresh | None = None) -> A.Value:
    return StateCompiler(fresh or Fresh(all_names(erase(ann)))).value(ann)


def step_state(conf: Config, resolver: Resolver | None = None) -> tuple[Config, str]:
    return step(conf, Strategy.STATE, resolver or LamResolver())


def run_state(
    term: A.Term,
    fuel: int = 10**6,
    resolver: Resolver | None = None,
    stack: tuple[Frame, ...] = (),
) -> tuple[A.Value, Trace]:
    return run(term, Strategy.STATE, resolver or LamResolver(), fuel, stack)


def is_call_return_balanced(trace: Trace | Iterable[str]) -> bool:
    """Every Call is matched by a later Ret, properly nested."""
    rules = trace.rules if isinstance(trace, Trace) else list(trace)
    height = 0
    for rule in rules:
        if rule == "Call":
            height += 1
        elif rule == "Ret":
            height -= 1
            if height < 0:
                return False
    return height == 0


def matched_call_rets(trace: Trace) -> list[tuple[int, int]]:
    """Index pairs (i, j): step i is a Call and step j its matching Ret."""
    open_: list[int] = []
    pairs = []
    for i, s in enumerate(trace.steps):
        if s.rule == "Call":
            open_.append(i)
        elif s.rule == "Ret":
            pairs.append((open_.pop(), i))
    return pairs


def frames_preserved(trace: Trace) -> bool:
    """At each matched pair, the pending client frame and the stack below are restored."""
    for i, j in matched_call_rets(trace):
        before = trace.steps[i].before
        after = trace.steps[j].after
        if not (isinstance(before, ServerRunning) and isinstance(after, ServerRunning)):
            return False
        if before.pending != after.pending or before.stack != after.stack:
            return False
        call_bound = before.term
        if not (isinstance(call_bound, A.Let) and isinstance(after.term, A.Let)):
            return False
        if call_bound.x != after.term.x or call_bound.body != after.term.body:
            return False
    return True


__all__ = [
    "ClientRunning",
    "StateCompiler",
    "compile_client_state",
    "compile_server_state",
    "compile_value_state",
    "frames_preserved",
    "is_call_return_balanced",
    "matched_call_rets",
    "run_state",
    "step_state",
]
