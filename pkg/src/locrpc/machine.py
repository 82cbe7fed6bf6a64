"""Client/server configuration machine shared by all four target calculi.

The two strategies differ only in server-side rules: under `enc` the server
runs bare applications and calls in tail position with an always-empty
stack; under `state` the server runs let-wrapped code, and call/ret push and
pop frames on a server stack. How a function value is entered is delegated
to a resolver: `LamResolver` for lambda-level terms, `StoreResolver` for
closure-converted programs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol

from . import anf as A
from .syntax import CLIENT, SERVER, Location


class Strategy(enum.Enum):
    ENC = "enc"
    STATE = "state"

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------- errors


class MachineError(Exception):
    kind = "MachineError"


class Stuck(MachineError):
    kind = "Stuck"


class FuelExhausted(MachineError):
    kind = "FuelExhausted"


class UnknownFunction(MachineError):
    kind = "UnknownFunction"


class WrongLocationStore(MachineError):
    kind = "WrongLocationStore"


class ArityMismatch(Stuck):
    kind = "ArityMismatch"


# ---------------------------------------------------------------- configurations


@dataclass(frozen=True)
class Frame:
    """LetK(x, M): waits for a value to bind to x, then runs M."""

    x: str
    body: A.Term


@dataclass(frozen=True)
class ClientRunning:
    term: A.Term
    stack: tuple[Frame, ...] = ()


@dataclass(frozen=True)
class ServerRunning:
    pending: Frame
    term: A.Term
    stack: tuple[Frame, ...] = ()


Config = ClientRunning | ServerRunning


def is_terminal(conf: Config) -> bool:
    return isinstance(conf, ClientRunning) and isinstance(conf.term, A.Val) and not conf.stack


# ---------------------------------------------------------------- resolvers


class Resolver(Protocol):
    def enter(self, fun: A.Value, args: tuple[A.Value, ...], side: Location) -> A.Term: ...

    def check(self, fun: A.Value, nargs: int, side: Location) -> None: ...


class LamResolver:
    """Functions are located lambdas; entering one substitutes its arguments."""

    def check(self, fun, nargs, side):
        if not isinstance(fun, A.Lam):
            raise Stuck(f"cannot apply {A.pretty_value(fun)}")
        if fun.loc is not side:
            raise Stuck(f"a {fun.loc.value}-function cannot run on side {side.value}")
        if len(fun.params) != nargs:
            raise ArityMismatch(f"function of {len(fun.params)} parameters given {nargs} arguments")

    def enter(self, fun, args, side):
        self.check(fun, len(args), side)
        return A.subst(fun.body, dict(zip(fun.params, args)))


@dataclass(frozen=True)
class ClosedFunction:
    fvs: tuple[str, ...]
    loc: Location
    params: tuple[str, ...]
    body: A.Term


@dataclass
class FunctionStore:
    client: dict[str, ClosedFunction]
    server: dict[str, ClosedFunction]
    main: A.Term
    strategy: Strategy | None = None

    def side(self, loc: Location) -> dict[str, ClosedFunction]:
        return self.client if loc is CLIENT else self.server


@dataclass
class StoreResolver:
    """Functions are closures naming entries of a per-location store."""

    client: dict[str, ClosedFunction] = field(default_factory=dict)
    server: dict[str, ClosedFunction] = field(default_factory=dict)

    @classmethod
    def of(cls, store: FunctionStore) -> StoreResolver:
        return cls(store.client, store.server)

    def lookup(self, fun, nargs, side) -> ClosedFunction:
        if not isinstance(fun, A.Clo):
            raise Stuck(f"cannot apply {A.pretty_value(fun)}")
        here = self.client if side is CLIENT else self.server
        there = self.server if side is CLIENT else self.client
        fn = here.get(fun.name)
        if fn is None:
            if fun.name in there:
                raise WrongLocationStore(
                    f"{fun.name} is a {side.other.value}-function, needed on side {side.value}"
                )
            raise UnknownFunction(f"no function named {fun.name}")
        if len(fn.params) != nargs or len(fn.fvs) != len(fun.env):
            raise ArityMismatch(
                f"{fun.name} takes {len(fn.params)} arguments and {len(fn.fvs)} captured values,"
                f" given {nargs} and {len(fun.env)}"
            )
        return fn

    def check(self, fun, nargs, side):
        self.lookup(fun, nargs, side)

    def enter(self, fun, args, side):
        fn = self.lookup(fun, len(args), side)
        env = dict(zip(fn.fvs, fun.env))
        env.update(zip(fn.params, args))
        return A.subst(fn.body, env)


# ---------------------------------------------------------------- stepping

CLIENT_RULES = frozenset({"AppC", "Req", "ValC", "LetC", "Ret"})
SERVER_RULES = frozenset({"AppS", "Call", "Reply", "ValS", "LetS"})


def side_of(rule: str) -> str:
    return "C" if rule in CLIENT_RULES else "S"


def step(conf: Config, strategy: Strategy, resolver: Resolver) -> tuple[Config, str]:
    """Apply the unique rule enabled in `conf`; raises Stuck if there is none."""
    match conf:
        case ClientRunning(term, stack):
            return _client(term, stack, strategy, resolver)
        case ServerRunning(pending, term, stack):
            if strategy is Strategy.ENC:
                return _server_enc(pending, term, resolver)
            return _server_state(pending, term, stack, resolver)
    raise TypeError(conf)


def _client(term, stack, strategy, resolver):
    match term:
        case A.Let(x, bound, body):
            match bound:
                case A.LocalApp(f, args):
                    return ClientRunning(A.Let(x, resolver.enter(f, args, CLIENT), body), stack), "AppC"
                case A.Req(f, args):
                    resolver.check(f, len(args), SERVER)
                    call = A.LocalApp(f, args)
                    if strategy is Strategy.ENC:
                        return ServerRunning(Frame(x, body), call, stack), "Req"
                    return ServerRunning(Frame(x, body), A.Let("r", call, A.Val(A.Var("r"))), stack), "Req"
                case A.Val(v):
                    return ClientRunning(A.subst(body, {x: v}), stack), "ValC"
                case A.Let(y, m1, m2):
                    return ClientRunning(A.Let(y, m1, A.Let(x, m2, body)), stack), "LetC"
                case A.Ret(v) if strategy is Strategy.STATE:
                    if not stack:
                        raise Stuck("ret with an empty server stack")
                    top, rest = stack[0], stack[1:]
                    return ServerRunning(Frame(x, body), A.Let(top.x, A.Val(v), top.body), rest), "Ret"
                case A.Call():
                    raise Stuck("call in client position")
            raise Stuck(f"no client rule for let-bound {A.pretty(bound)}")
        case A.Val():
            raise Stuck("client holds a value with a nonempty server stack" if stack else "terminal")
    raise Stuck(f"no client rule for {A.pretty(term)}")


def _server_enc(pending: Frame, term, resolver):
    match term:
        case A.LocalApp(f, args):
            return ServerRunning(pending, resolver.enter(f, args, SERVER)), "AppS"
        case A.Call(f, args):
            resolver.check(f, len(args), CLIENT)
            return ClientRunning(A.Let(pending.x, A.LocalApp(f, args), pending.body)), "Call"
        case A.Val(v):
            return ClientRunning(A.Let(pending.x, A.Val(v), pending.body)), "Reply"
    raise Stuck(f"no server rule for {A.pretty(term)}")


def _server_state(pending: Frame, term, stack, resolver):
    match term:
        case A.Val(v):
            return ClientRunning(A.Let(pending.x, A.Val(v), pending.body), stack), "Reply"
        case A.Let(y, bound, body):
            match bound:
                case A.LocalApp(f, args):
                    return ServerRunning(pending, A.Let(y, resolver.enter(f, args, SERVER), body), stack), "AppS"
                case A.Call(f, args):
                    resolver.check(f, len(args), CLIENT)
                    client = A.Let(pending.x, A.LocalApp(f, args), pending.body)
                    return ClientRunning(client, (Frame(y, body), *stack)), "Call"
                case A.Val(v):
                    return ServerRunning(pending, A.subst(body, {y: v}), stack), "ValS"
                case A.Let(z, m1, m2):
                    return ServerRunning(pending, A.Let(z, m1, A.Let(y, m2, body)), stack), "LetS"
            raise Stuck(f"no server rule for let-bound {A.pretty(bound)}")
    raise Stuck(f"no server rule for {A.pretty(term)}")


# ---------------------------------------------------------------- traces


@dataclass(frozen=True)
class Step:
    rule: str
    side: str
    depth: int
    before: Config
    after: Config
    event: object = None


@dataclass
class Trace:
    steps: list[Step] = field(default_factory=list)

    @property
    def rules(self) -> list[str]:
        return [s.rule for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def lines(self, with_depth: bool = False) -> list[str]:
        out = []
        for n, s in enumerate(self.steps, 1):
            line = f"{n} {s.rule} {s.side}"
            if with_depth:
                line += f" depth={s.depth}"
            if s.event is not None:
                line += f" {s.event}"
            out.append(line)
        return out


def run(
    term: A.Term,
    strategy: Strategy,
    resolver: Resolver,
    fuel: int = 10**6,
    stack: tuple[Frame, ...] = (),
) -> tuple[A.Value, Trace]:
    """Step from ClientRunning(term, stack) until the client holds a value over `stack`."""
    conf: Config = ClientRunning(term, stack)
    trace = Trace()
    while not (isinstance(conf, ClientRunning) and isinstance(conf.term, A.Val) and conf.stack == stack):
        if len(trace.steps) >= fuel:
            raise FuelExhausted(f"no value after {fuel} steps")
        nxt, rule = step(conf, strategy, resolver)
        trace.steps.append(Step(rule, side_of(rule), len(nxt.stack), conf, nxt))
        conf = nxt
    return conf.term.value, trace
