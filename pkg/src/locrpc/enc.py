"""State-encoding compilation: direct-style client code, CPS server code."""

from __future__ import annotations

from . import anf as A
from .machine import (
    ClientRunning,
    Config,
    LamResolver,
    Resolver,
    Strategy,
    Trace,
    run,
    step,
)
from .syntax import CLIENT, SERVER
from .typecheck import AApp, AConst, ALam, AnnTerm, AVar, IllformedAnnotation, erase
from .syntax import all_names


class Fresh:
    """One counter per compilation unit: f1, x2, r3, k4, ..."""

    def __init__(self, avoid: set[str] = frozenset()):
        self.n = 0
        self.avoid = set(avoid)

    def __call__(self, prefix: str) -> str:
        while True:
            self.n += 1
            name = f"{prefix}{self.n}"
            if name not in self.avoid:
                return name


def _fun_loc(app: AApp):
    ty = app.fun.ty
    loc = getattr(ty, "loc", None)
    if loc is not app.app_loc:
        raise IllformedAnnotation(
            f"application marked @{app.app_loc.value} but its function has type {ty}", app.span
        )
    return loc


class EncCompiler:
    def __init__(self, fresh: Fresh):
        self.fresh = fresh

    def value(self, ann: AnnTerm) -> A.Value:
        match ann:
            case AVar(name):
                return A.Var(name)
            case AConst(lit):
                return A.Const(lit)
            case ALam(loc, x, _, body):
                if loc is CLIENT:
                    return A.Lam(CLIENT, (x,), self.client(body))
                k = self.fresh("k")
                return A.Lam(SERVER, (x, k), self.server(body, A.Var(k)))
        raise TypeError(f"not a value: {ann!r}")

    def client(self, ann: AnnTerm) -> A.Term:
        if not isinstance(ann, AApp):
            return A.Val(self.value(ann))
        loc = _fun_loc(ann)
        f, x, r = self.fresh("f"), self.fresh("x"), self.fresh("r")
        fun = self.client(ann.fun)
        arg = self.client(ann.arg)
        if loc is CLIENT:
            call = A.LocalApp(A.Var(f), (A.Var(x),))
        else:
            y = self.fresh("y")
            ident = A.Lam(SERVER, (y,), A.Val(A.Var(y)))
            call = A.Req(A.Var(f), (A.Var(x), ident))
        return A.let_chain((f, fun), (x, arg), (r, call), A.Val(A.Var(r)))

    def server(self, ann: AnnTerm, k: A.Value) -> A.Term:
        if not isinstance(ann, AApp):
            return A.LocalApp(k, (self.value(ann),))
        loc = _fun_loc(ann)
        f, x = self.fresh("f"), self.fresh("x")
        if loc is SERVER:
            inner = A.LocalApp(A.Var(f), (A.Var(x), k))
        else:
            z, y = self.fresh("z"), self.fresh("y")
            commute = A.Lam(
                CLIENT,
                (z,),
                A.Let(y, A.LocalApp(A.Var(f), (A.Var(z),)), A.Req(k, (A.Var(y),))),
            )
            inner = A.Call(commute, (A.Var(x),))
        arg = self.server(ann.arg, A.Lam(SERVER, (x,), inner))
        return self.server(ann.fun, A.Lam(SERVER, (f,), arg))


def _fresh_for(ann: AnnTerm, fresh: Fresh | None) -> Fresh:
    return fresh if fresh is not None else Fresh(all_names(erase(ann)))


def compile_client_enc(ann: AnnTerm, fresh: Fresh | None = None) -> A.Term:
    """Client-side compilation of a term annotated at the client."""
    return EncCompiler(_fresh_for(ann, fresh)).client(ann)


def compile_server_enc(ann: AnnTerm, k: A.Value, fresh: Fresh | None = None) -> A.Term:
    """CPS compilation of a server-side term with continuation value `k`."""
    avoid = all_names(erase(ann)) | set(A.free_vars(k))
    return EncCompiler(fresh if fresh is not None else Fresh(avoid)).server(ann, k)


def compile_value_enc(ann: AnnTerm, fresh: Fresh | None = None) -> A.Value:
    return EncCompiler(_fresh_for(ann, fresh)).value(ann)


def step_enc(conf: Config, resolver: Resolver | None = None) -> tuple[Config, str]:
    return step(conf, Strategy.ENC, resolver or LamResolver())


def run_enc(term: A.Term, fuel: int = 10**6, resolver: Resolver | None = None) -> tuple[A.Value, Trace]:
    return run(term, Strategy.ENC, resolver or LamResolver(), fuel)


def check_enc_discipline(term: A.Term, side=CLIENT) -> None:
    """Req only in client code, Call only in server code, no Ret."""
    match term:
        case A.Val(v):
            _check_value(v)
        case A.LocalApp(f, args):
            for v in (f, *args):
                _check_value(v)
        case A.Req(f, args):
            if side is not CLIENT:
                raise IllformedAnnotation("req in server code")
            for v in (f, *args):
                _check_value(v)
        case A.Call(f, args):
            if side is not SERVER:
                raise IllformedAnnotation("call in client code")
            for v in (f, *args):
                _check_value(v)
        case A.Ret():
            raise IllformedAnnotation("ret in state-encoding code")
        case A.Let(_, m1, m2):
            check_enc_discipline(m1, side)
            check_enc_discipline(m2, side)


def _check_value(v: A.Value) -> None:
    if isinstance(v, A.Lam):
        check_enc_discipline(v.body, v.loc)


__all__ = [
    "ClientRunning",
    "EncCompiler",
    "Fresh",
    "check_enc_discipline",
    "compile_client_enc",
    "compile_server_enc",
    "compile_value_enc",
    "run_enc",
    "step_enc",
]
