"""Closure conversion into per-location function stores, and store-level execution."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import anf as A
from .machine import (
    ClientRunning,
    ClosedFunction,
    Config,
    FuelExhausted,
    FunctionStore,
    ServerRunning,
    Step,
    StoreResolver,
    Strategy,
    Trace,
    side_of,
    step,
)
from .syntax import CLIENT, UNIT, Location, Unit

__all__ = [
    "ClosedFunction",
    "CsConfig",
    "FunctionStore",
    "SessionEvent",
    "SessionStats",
    "StoreFormatError",
    "closure_convert",
    "erase_store",
    "run_cs",
    "step_cs",
    "store_from_json",
    "store_to_json",
]


# ---------------------------------------------------------------- conversion


class _Converter:
    def __init__(self):
        self.n = 0
        self.client: dict[str, ClosedFunction] = {}
        self.server: dict[str, ClosedFunction] = {}

    def value(self, v: A.Value) -> A.Value:
        match v:
            case A.Var() | A.Const():
                return v
            case A.Clo(name, vs):
                return A.Clo(name, tuple(self.value(w) for w in vs))
            case A.Lam(loc, params, body):
                fvs = tuple(A.free_vars(v))
                converted = self.term(body)
                self.n += 1
                name = f"g{self.n}"
                store = self.client if loc is CLIENT else self.server
                store[name] = ClosedFunction(fvs, loc, params, converted)
                return A.Clo(name, tuple(A.Var(z) for z in fvs))
        raise TypeError(v)

    def term(self, m: A.Term) -> A.Term:
        match m:
            case A.Val(v):
                return A.Val(self.value(v))
            case A.LocalApp(f, args):
                f = self.value(f)
                return A.LocalApp(f, tuple(self.value(a) for a in args))
            case A.Req(f, args):
                f = self.value(f)
                return A.Req(f, tuple(self.value(a) for a in args))
            case A.Call(f, args):
                f = self.value(f)
                return A.Call(f, tuple(self.value(a) for a in args))
            case A.Ret(v):
                return A.Ret(self.value(v))
            case A.Let(x, m1, m2):
                m1 = self.term(m1)
                return A.Let(x, m1, self.term(m2))
        raise TypeError(m)


def closure_convert(term: A.Term, strategy: Strategy | None = None) -> FunctionStore:
    """Name every lambda g1..gn in post-order and split the definitions by location."""
    conv = _Converter()
    main = conv.term(term)
    return FunctionStore(conv.client, conv.server, main, strategy)


def erase_store(store: FunctionStore) -> A.Term:
    """Inline every closure by its definition; inverse of closure_convert."""
    defs = {**store.client, **store.server}

    def value(v: A.Value) -> A.Value:
        match v:
            case A.Clo(name, vs):
                fn = defs[name]
                env = dict(zip(fn.fvs, (value(w) for w in vs)))
                body = A.subst(term(fn.body), {k: w for k, w in env.items() if A.Var(k) != w})
                return A.Lam(fn.loc, fn.params, body)
            case A.Lam(loc, params, body):
                return A.Lam(loc, params, term(body))
        return v

    def term(m: A.Term) -> A.Term:
        match m:
            case A.Val(v):
                return A.Val(value(v))
            case A.LocalApp(f, args):
                return A.LocalApp(value(f), tuple(value(a) for a in args))
            case A.Req(f, args):
                return A.Req(value(f), tuple(value(a) for a in args))
            case A.Call(f, args):
                return A.Call(value(f), tuple(value(a) for a in args))
            case A.Ret(v):
                return A.Ret(value(v))
            case A.Let(x, m1, m2):
                return A.Let(x, term(m1), term(m2))
        raise TypeError(m)

    return term(store.main)


def store_problems(store: FunctionStore) -> list[str]:
    """Violations of the store invariants; empty when the store is well formed."""
    problems = []
    overlap = set(store.client) & set(store.server)
    if overlap:
        problems.append(f"names in both stores: {sorted(overlap)}")
    for loc, defs in ((CLIENT, store.client), (CLIENT.other, store.server)):
        for name, fn in defs.items():
            if fn.loc is not loc:
                problems.append(f"{name} has location {fn.loc.value} but lives in the {loc.value} store")
            extra = set(A.free_vars(fn.body)) - set(fn.fvs) - set(fn.params)
            if extra:
                problems.append(f"{name} has free variables {sorted(extra)}")
    bodies = [("main", store.main, CLIENT)] + [
        (n, fn.body, fn.loc) for defs in (store.client, store.server) for n, fn in defs.items()
    ]
    for owner, body, _ in bodies:
        for node in A.iter_subterms(body):
            if isinstance(node, A.Clo):
                fn = store.client.get(node.name) or store.server.get(node.name)
                if fn is None:
                    problems.append(f"{owner} refers to unknown function {node.name}")
                elif len(fn.fvs) != len(node.env):
                    problems.append(f"{owner} builds {node.name} with {len(node.env)} captured values")
            elif isinstance(node, A.Lam):
                problems.append(f"{owner} still contains a lambda")
    return problems


# ---------------------------------------------------------------- sessions


@dataclass(frozen=True)
class SessionEvent:
    kind: str  # Created | Maintained | Closed
    sid: int

    def __str__(self) -> str:
        return f"{self.kind}({self.sid})"


@dataclass(frozen=True)
class CsConfig:
    conf: Config
    session: int | None = None
    created: int = 0


def step_cs(
    config: CsConfig, store: FunctionStore, strategy: Strategy
) -> tuple[CsConfig, str, SessionEvent | None]:
    """One machine step over the store, with the session annotation it implies."""
    before = config.conf
    after, rule = step(before, strategy, StoreResolver.of(store))
    sid, created, event = config.session, config.created, None
    match strategy, rule:
        case Strategy.ENC, "Req":
            created += 1
            sid = created
            event = SessionEvent("Created", sid)
        case Strategy.ENC, ("Call" | "Reply"):
            event = SessionEvent("Closed", sid)
            sid = None
        case Strategy.STATE, "Req":
            if before.stack:
                event = SessionEvent("Maintained", sid)
            else:
                created += 1
                sid = created
                event = SessionEvent("Created", sid)
        case Strategy.STATE, "Reply":
            if before.stack:
                event = SessionEvent("Maintained", sid)
            else:
                event = SessionEvent("Closed", sid)
                sid = None
        case Strategy.STATE, ("Call" | "Ret"):
            event = SessionEvent("Maintained", sid)
    return CsConfig(after, sid, created), rule, event


@dataclass
class SessionStats:
    sessions_created: int = 0
    max_concurrent_open: int = 0
    round_trips: int = 0
    per_session_round_trips: dict[int, int] = field(default_factory=dict)

    def summary(self) -> str:
        per = ",".join(str(self.per_session_round_trips[s]) for s in sorted(self.per_session_round_trips))
        return (
            f"sessions={self.sessions_created} roundTrips={self.round_trips}"
            f" maxOpen={self.max_concurrent_open} perSession=[{per}]"
        )


def session_stats(trace: Trace) -> SessionStats:
    stats = SessionStats()
    open_: set[int] = set()
    current = None
    for s in trace.steps:
        ev = s.event
        if ev is not None:
            if ev.kind == "Created":
                stats.sessions_created += 1
                stats.per_session_round_trips[ev.sid] = 0
                open_.add(ev.sid)
            elif ev.kind == "Closed":
                open_.discard(ev.sid)
            stats.max_concurrent_open = max(stats.max_concurrent_open, len(open_))
            current = ev.sid
        if s.rule in ("Req", "Ret"):
            stats.round_trips += 1
            if current is not None:
                stats.per_session_round_trips[current] += 1
    return stats


def run_cs(
    store: FunctionStore, strategy: Strategy | None = None, fuel: int = 10**6
) -> tuple[A.Value, Trace, SessionStats]:
    """Run main to a client value; the trace carries session events."""
    strategy = strategy or store.strategy
    if strategy is None:
        raise ValueError("no strategy given")
    config = CsConfig(ClientRunning(store.main))
    trace = Trace()
    while True:
        conf = config.conf
        if isinstance(conf, ClientRunning) and isinstance(conf.term, A.Val) and not conf.stack:
            break
        if len(trace.steps) >= fuel:
            raise FuelExhausted(f"no value after {fuel} steps")
        config, rule, event = step_cs(config, store, strategy)
        trace.steps.append(Step(rule, side_of(rule), len(config.conf.stack), conf, config.conf, event))
    return config.conf.term.value, trace, session_stats(trace)


# ---------------------------------------------------------------- store files


class StoreFormatError(ValueError):
    kind = "StoreFormatError"


def lit_to_json(lit):
    return None if isinstance(lit, Unit) else lit


def lit_from_json(obj):
    if obj is None:
        return UNIT
    if isinstance(obj, bool) or not isinstance(obj, (int, str)):
        raise StoreFormatError(f"bad literal {obj!r}")
    return obj


def value_to_json(v: A.Value) -> dict:
    match v:
        case A.Var(name):
            return {"t": "var", "name": name}
        case A.Const(lit):
            return {"t": "const", "lit": lit_to_json(lit)}
        case A.Clo(name, vs):
            return {"t": "clo", "name": name, "env": [value_to_json(w) for w in vs]}
    raise StoreFormatError(f"cannot serialise {v!r}")


def term_to_json(m: A.Term) -> dict:
    match m:
        case A.Val(v):
            return value_to_json(v)
        case A.LocalApp(f, args):
            return {"t": "app", "fun": value_to_json(f), "args": [value_to_json(a) for a in args]}
        case A.Req(f, args):
            return {"t": "req", "fun": value_to_json(f), "args": [value_to_json(a) for a in args]}
        case A.Call(f, args):
            return {"t": "call", "fun": value_to_json(f), "args": [value_to_json(a) for a in args]}
        case A.Ret(v):
            return {"t": "ret", "args": [value_to_json(v)]}
        case A.Let(x, m1, m2):
            return {"t": "let", "x": x, "bound": term_to_json(m1), "body": term_to_json(m2)}
    raise StoreFormatError(f"cannot serialise {m!r}")


def _field(obj: dict, key: str, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise StoreFormatError(f"missing field {key!r} in {obj!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise StoreFormatError(f"field {key!r} has the wrong type in {obj!r}")
    return value


def value_from_json(obj) -> A.Value:
    match _field(obj, "t", str):
        case "var":
            return A.Var(_field(obj, "name", str))
        case "const":
            return A.Const(lit_from_json(_field(obj, "lit")))
        case "clo":
            return A.Clo(_field(obj, "name", str), tuple(value_from_json(w) for w in _field(obj, "env", list)))
    raise StoreFormatError(f"not a value: {obj!r}")


def term_from_json(obj) -> A.Term:
    tag = _field(obj, "t", str)
    match tag:
        case "var" | "const" | "clo":
            return A.Val(value_from_json(obj))
        case "app" | "req" | "call":
            cls = {"app": A.LocalApp, "req": A.Req, "call": A.Call}[tag]
            args = tuple(value_from_json(a) for a in _field(obj, "args", list))
            return cls(value_from_json(_field(obj, "fun")), args)
        case "ret":
            args = _field(obj, "args", list)
            if len(args) != 1:
                raise StoreFormatError("ret takes exactly one value")
            return A.Ret(value_from_json(args[0]))
        case "let":
            return A.Let(
                _field(obj, "x", str), term_from_json(_field(obj, "bound")), term_from_json(_field(obj, "body"))
            )
    raise StoreFormatError(f"unknown term tag {tag!r}")


def _fun_to_json(fn: ClosedFunction) -> dict:
    return {"fvs": list(fn.fvs), "loc": fn.loc.value, "params": list(fn.params), "body": term_to_json(fn.body)}


def _fun_from_json(obj) -> ClosedFunction:
    try:
        loc = Location(_field(obj, "loc", str))
    except ValueError:
        raise StoreFormatError(f"bad location in {obj!r}") from None
    fvs = _field(obj, "fvs", list)
    params = _field(obj, "params", list)
    if not all(isinstance(n, str) for n in fvs + params):
        raise StoreFormatError("variable names must be strings")
    return ClosedFunction(tuple(fvs), loc, tuple(params), term_from_json(_field(obj, "body")))


def _gkey(name: str):
    digits = name.lstrip("abcdefghijklmnopqrstuvwxyz")
    return (name[: len(name) - len(digits)], int(digits)) if digits.isdigit() else (name, -1)


def store_to_json(store: FunctionStore) -> str:
    doc = {
        "strategy": store.strategy.value if store.strategy else None,
        "main": term_to_json(store.main),
        "client": {n: _fun_to_json(store.client[n]) for n in sorted(store.client, key=_gkey)},
        "server": {n: _fun_to_json(store.server[n]) for n in sorted(store.server, key=_gkey)},
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def store_from_json(text: str | bytes) -> FunctionStore:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise StoreFormatError(f"store is not valid JSON: {exc}") from None
    try:
        strategy = Strategy(_field(doc, "strategy", str))
    except ValueError:
        raise StoreFormatError("strategy must be 'enc' or 'state'") from None
    client = {n: _fun_from_json(f) for n, f in _field(doc, "client", dict).items()}
    server = {n: _fun_from_json(f) for n, f in _field(doc, "server", dict).items()}
    store = FunctionStore(client, server, term_from_json(_field(doc, "main")), strategy)
    problems = store_problems(store)
    if problems:
        raise StoreFormatError("; ".join(problems))
    return store


def pretty_store(store: FunctionStore) -> str:
    lines = [f"main = {A.pretty(store.main)}"]
    for title, defs in (("client", store.client), ("server", store.server)):
        lines.append(f"-- {title}")
        for name in sorted(defs, key=_gkey):
            fn = defs[name]
            ps = fn.params[0] if len(fn.params) == 1 else f"({', '.join(fn.params)})"
            lines.append(
                f"{name} = {{{', '.join(fn.fvs)}}} \\{fn.loc.value} {ps}. {A.pretty(fn.body)}"
            )
    return "\n".join(lines)
