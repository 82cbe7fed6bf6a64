"""Locative types: checking, unification-based inference and location repair."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .syntax import (
    CLIENT,
    SERVER,
    App,
    Const,
    Lam,
    Literal,
    Location,
    SourceSpan,
    SrcTerm,
    Unit,
    Var,
    free_vars,
    fresh_name,
    show_literal,
)

# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class Base:
    name: str  # Int | Str | Unit

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Arrow:
    dom: LocType
    loc: Location
    cod: LocType

    def __str__(self) -> str:
        return show_type(self)


@dataclass(frozen=True)
class TyVar:
    id: int

    def __str__(self) -> str:
        return f"'t{self.id}"


LocType = Base | Arrow | TyVar

INT = Base("Int")
STR = Base("Str")
UNIT_T = Base("Unit")


def literal_type(lit: Literal) -> Base:
    match lit:
        case Unit():
            return UNIT_T
        case int():
            return INT
        case str():
            return STR
    raise TypeError(f"not a literal: {lit!r}")


def show_type(ty) -> str:
    match ty:
        case Arrow(dom, loc, cod):
            left = show_type(dom)
            if isinstance(dom, Arrow):
                left = f"({left})"
            where = loc.value if isinstance(loc, Location) else str(loc)
            return f"{left} ->{where} {show_type(cod)}"
        case _:
            return str(ty)


def erase_type(ty: LocType):
    """Simple-type skeleton with locations removed."""
    match ty:
        case Arrow(dom, _, cod):
            return ("->", erase_type(dom), erase_type(cod))
        case Base(name):
            return name
        case TyVar(i):
            return ("var", i)
    raise TypeError(ty)


def type_size(ty: LocType) -> int:
    match ty:
        case Arrow(dom, _, cod):
            return 1 + type_size(dom) + type_size(cod)
    return 1


# ---------------------------------------------------------------- errors


class TypingError(Exception):
    kind = "TypeError"

    def __init__(self, message: str, span: SourceSpan | None = None):
        super().__init__(message)
        self.message = message
        self.span = span


class TypeMismatch(TypingError):
    kind = "TypeMismatch"


class LocationMismatch(TypingError):
    kind = "LocationMismatch"

    def __init__(self, expected: Location, found: Location, span: SourceSpan | None = None):
        super().__init__(
            f"location mismatch: expected ->{expected.value}, found ->{found.value}"
            " (loc_eta_expand can repair this; rerun with --repair)",
            span,
        )
        self.expected = expected
        self.found = found
        self.app_index: int | None = None


class UnboundVariable(TypingError):
    kind = "UnboundVariable"


class OccursCheck(TypingError):
    kind = "OccursCheck"


class IllformedAnnotation(TypingError):
    kind = "IllformedAnnotation"


class ShapeMismatch(TypingError):
    kind = "ShapeMismatch"


class GenerationExhausted(TypingError):
    kind = "GenerationExhausted"


# ---------------------------------------------------------------- annotated terms


@dataclass(frozen=True)
class AVar:
    name: str
    ty: LocType
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AConst:
    lit: Literal
    ty: LocType
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ALam:
    loc: Location
    param: str
    param_ty: LocType
    body: AnnTerm
    ty: LocType
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AApp:
    fun: AnnTerm
    arg: AnnTerm
    app_loc: Location
    ty: LocType
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


AnnTerm = AVar | AConst | ALam | AApp


def erase(ann: AnnTerm) -> SrcTerm:
    match ann:
        case AVar(name):
            return Var(name, ann.span)
        case AConst(lit):
            return Const(lit, ann.span)
        case ALam(loc, param, _, body):
            return Lam(loc, param, erase(body), ann.span)
        case AApp(fun, arg):
            return App(erase(fun), erase(arg), ann.span)
    raise TypeError(ann)


def pretty_ann(ann: AnnTerm) -> str:
    """Extended syntax: every application shows its location as `@c` or `@s`."""
    match ann:
        case AVar(name):
            return name
        case AConst(lit):
            return show_literal(lit)
        case ALam(loc, param, _, body):
            return f"\\{loc.value} {param}. {pretty_ann(body)}"
        case AApp(fun, arg, where):
            left = pretty_ann(fun)
            if isinstance(fun, ALam):
                left = f"({left})"
            right = pretty_ann(arg)
            if isinstance(arg, (AApp, ALam)):
                right = f"({right})"
            return f"{left} @{where.value} {right}"
    raise TypeError(ann)


def ann_free_vars(ann: AnnTerm) -> set[str]:
    match ann:
        case AVar(name):
            return {name}
        case AConst():
            return set()
        case ALam(_, param, _, body):
            return ann_free_vars(body) - {param}
        case AApp(fun, arg):
            return ann_free_vars(fun) | ann_free_vars(arg)
    raise TypeError(ann)


def _ann_names(ann: AnnTerm) -> set[str]:
    match ann:
        case AVar(name):
            return {name}
        case AConst():
            return set()
        case ALam(_, param, _, body):
            return _ann_names(body) | {param}
        case AApp(fun, arg):
            return _ann_names(fun) | _ann_names(arg)
    raise TypeError(ann)


def ann_subst(ann: AnnTerm, name: str, value: AnnTerm) -> AnnTerm:
    """Capture-avoiding substitution on annotated terms; node types are kept."""
    match ann:
        case AVar(n):
            return value if n == name else ann
        case AConst():
            return ann
        case AApp(fun, arg, where, ty):
            return AApp(ann_subst(fun, name, value), ann_subst(arg, name, value), where, ty, ann.span)
        case ALam(loc, param, pty, body, ty):
            if param == name:
                return ann
            fv = ann_free_vars(value)
            if param in fv and name in ann_free_vars(body):
                new = fresh_name(param, fv | _ann_names(body) | {name})
                body = ann_subst(body, param, AVar(new, pty))
                param = new
            return ALam(loc, param, pty, ann_subst(body, name, value), ty, ann.span)
    raise TypeError(ann)


def rule_for(at: Location, app_loc: Location) -> str:
    if at is app_loc:
        return "T-App"
    return "T-Req" if at is CLIENT else "T-Call"


def rules_used(ann: AnnTerm, at: Location = CLIENT) -> list[str]:
    """Typing rule names of a derivation, in pre-order."""
    match ann:
        case AVar():
            return ["T-Var"]
        case AConst():
            return ["T-Const"]
        case ALam(loc, _, _, body):
            return ["T-Lam", *rules_used(body, loc)]
        case AApp(fun, arg, where):
            return [rule_for(at, where), *rules_used(fun, at), *rules_used(arg, at)]
    raise TypeError(ann)


# ---------------------------------------------------------------- checking


def _same(expected: LocType, found: LocType, span) -> None:
    if expected == found:
        return
    if erase_type(expected) != erase_type(found):
        raise TypeMismatch(f"expected {show_type(expected)}, found {show_type(found)}", span)
    a, b = _first_loc_diff(expected, found)
    raise LocationMismatch(a, b, span)


def _first_loc_diff(a: LocType, b: LocType):
    match a, b:
        case Arrow(d1, l1, c1), Arrow(d2, l2, c2):
            if l1 is not l2:
                return l1, l2
            if d1 != d2:
                return _first_loc_diff(d1, d2)
            return _first_loc_diff(c1, c2)
    raise ValueError("types do not differ in a location")


def check(env: Mapping[str, LocType], at: Location, ann: AnnTerm) -> LocType:
    """Declarative check: returns the type of `ann` at location `at`."""
    match ann:
        case AVar(name, ty):
            if name not in env:
                raise UnboundVariable(f"unbound variable {name}", ann.span)
            _same(ty, env[name], ann.span)
            return env[name]
        case AConst(lit, ty):
            lt = literal_type(lit)
            _same(ty, lt, ann.span)
            return lt
        case ALam(loc, param, pty, body, ty):
            res = check({**env, param: pty}, loc, body)
            out = Arrow(pty, loc, res)
            _same(ty, out, ann.span)
            return out
        case AApp(fun, arg, where, ty):
            ft = check(env, at, fun)
            if not isinstance(ft, Arrow):
                raise TypeMismatch(f"applying a non-function of type {show_type(ft)}", ann.span)
            if ft.loc is not where:
                raise LocationMismatch(where, ft.loc, ann.span)
            _same(ft.dom, check(env, at, arg), arg.span or ann.span)
            _same(ty, ft.cod, ann.span)
            return ft.cod
    raise TypeError(ann)


# ---------------------------------------------------------------- inference


@dataclass(frozen=True)
class LocVar:
    id: int

    def __str__(self) -> str:
        return f"'l{self.id}"


class _Solver:
    """Substitution state for one inference run."""

    def __init__(self):
        self.next = 0
        self.tys: dict[int, object] = {}
        self.locs: dict[int, object] = {}
        self.links: list[tuple[object, object, SourceSpan | None]] = []

    def fresh_ty(self) -> TyVar:
        self.next += 1
        return TyVar(self.next)

    def fresh_loc(self) -> LocVar:
        self.next += 1
        return LocVar(self.next)

    def loc(self, l):
        while isinstance(l, LocVar) and l.id in self.locs:
            l = self.locs[l.id]
        return l

    def ty(self, t):
        while isinstance(t, TyVar) and t.id in self.tys:
            t = self.tys[t.id]
        return t

    def zonk(self, t):
        t = self.ty(t)
        match t:
            case Arrow(dom, loc, cod):
                return Arrow(self.zonk(dom), self.loc(loc), self.zonk(cod))
        return t

    def occurs(self, v: int, t) -> bool:
        t = self.ty(t)
        match t:
            case TyVar(i):
                return i == v
            case Arrow(dom, _, cod):
                return self.occurs(v, dom) or self.occurs(v, cod)
        return False

    def unify_loc(self, expected, found, span):
        a, b = self.loc(expected), self.loc(found)
        if a == b:
            return
        if isinstance(a, LocVar):
            self.locs[a.id] = b
        elif isinstance(b, LocVar):
            self.locs[b.id] = a
        else:
            raise LocationMismatch(a, b, span)

    def bind(self, v: TyVar, t, span):
        if self.occurs(v.id, t):
            raise OccursCheck(
                f"infinite type: {v} occurs in {show_type(self.zonk(t))}", span
            )
        self.tys[v.id] = t

    def unify(self, expected, found, span):
        a, b = self.ty(expected), self.ty(found)
        if a == b:
            return
        match a, b:
            case TyVar(), _:
                self.bind(a, b, span)
            case _, TyVar():
                self.bind(b, a, span)
            case Base(x), Base(y):
                raise TypeMismatch(f"expected {x}, found {y}", span)
            case Arrow(d1, l1, c1), Arrow(d2, l2, c2):
                self.unify_loc(l1, l2, span)
                self.unify(d1, d2, span)
                self.unify(c1, c2, span)
            case _:
                raise TypeMismatch(
                    f"expected {show_type(self.zonk(a))}, found {show_type(self.zonk(b))}", span
                )

    def copy_shape(self, t):
        """A fresh arrow skeleton matching the outermost shape of t."""
        return Arrow(self.fresh_ty(), self.fresh_loc(), self.fresh_ty())

    def solve_links(self):
        """Make linked types equal up to locations."""
        pending = self.links
        rounds = 0
        while True:
            rounds += 1
            if rounds > 10_000:
                raise OccursCheck("infinite type while relating argument and domain", None)
            progress = False
            rest = []
            for a, b, span in pending:
                a, b = self.ty(a), self.ty(b)
                match a, b:
                    case TyVar(), TyVar():
                        if a != b:
                            rest.append((a, b, span))
                        continue
                    case TyVar(), Base():
                        self.bind(a, b, span)
                    case Base(), TyVar():
                        self.bind(b, a, span)
                    case TyVar(), Arrow():
                        self.bind(a, self.copy_shape(b), span)
                        rest.append((a, b, span))
                    case Arrow(), TyVar():
                        self.bind(b, self.copy_shape(a), span)
                        rest.append((a, b, span))
                    case Base(x), Base(y):
                        if x != y:
                            raise TypeMismatch(f"expected {y}, found {x}", span)
                    case Arrow(d1, _, c1), Arrow(d2, _, c2):
                        rest.append((d1, d2, span))
                        rest.append((c1, c2, span))
                    case _:
                        raise TypeMismatch(
                            f"expected {show_type(self.zonk(b))}, found {show_type(self.zonk(a))}",
                            span,
                        )
                progress = True
            pending = rest
            if not progress:
                break
        for a, b, span in pending:
            self.unify(a, b, span)
        self.links = []


@dataclass
class _Pre:
    """Annotated term before the final substitution is applied."""

    node: str
    ty: object
    span: SourceSpan | None
    name: str | None = None
    lit: Literal | None = None
    loc: object = None
    param_ty: object = None
    kids: tuple = ()
    at: Location | None = None
    index: int = -1
    arg_ty: object = None
    dom_ty: object = None


class _Inferencer:
    def __init__(self, coerce: frozenset[int] = frozenset()):
        self.s = _Solver()
        self.coerce = coerce
        self.apps = 0

    def go(self, env: Mapping[str, object], at: Location, term: SrcTerm) -> _Pre:
        match term:
            case Var(name):
                if name not in env:
                    raise UnboundVariable(f"unbound variable {name}", term.span)
                return _Pre("var", env[name], term.span, name=name)
            case Const(lit):
                return _Pre("const", literal_type(lit), term.span, lit=lit)
            case Lam(loc, param, body):
                a = self.s.fresh_ty()
                b = self.go({**env, param: a}, loc, body)
                return _Pre("lam", Arrow(a, loc, b.ty), term.span, name=param, loc=loc,
                            param_ty=a, kids=(b,))
            case App(fun, arg):
                index = self.apps
                self.apps += 1
                f = self.go(env, at, fun)
                x = self.go(env, at, arg)
                dom, res, where = self.s.fresh_ty(), self.s.fresh_ty(), self.s.fresh_loc()
                self.s.unify(Arrow(dom, where, res), f.ty, fun.span or term.span)
                if index in self.coerce:
                    self.s.links.append((x.ty, dom, arg.span or term.span))
                else:
                    try:
                        self.s.unify(dom, x.ty, arg.span or term.span)
                    except LocationMismatch as err:
                        err.app_index = index
                        raise
                return _Pre("app", res, term.span, loc=where, kids=(f, x), at=at, index=index,
                            arg_ty=x.ty, dom_ty=dom)
        raise TypeError(term)

    def default_app_locs(self, pre: _Pre) -> None:
        # Unconstrained application locations become local applications.
        if pre.node == "app" and isinstance(self.s.loc(pre.loc), LocVar):
            self.s.locs[self.s.loc(pre.loc).id] = pre.at
        for k in pre.kids:
            self.default_app_locs(k)

    def finish(self, t):
        t = self.s.ty(t)
        match t:
            case TyVar():
                return UNIT_T
            case Arrow(dom, loc, cod):
                loc = self.s.loc(loc)
                if isinstance(loc, LocVar):
                    loc = CLIENT
                return Arrow(self.finish(dom), loc, self.finish(cod))
        return t

    def build(self, pre: _Pre) -> AnnTerm:
        ty = self.finish(pre.ty)
        match pre.node:
            case "var":
                return AVar(pre.name, ty, pre.span)
            case "const":
                return AConst(pre.lit, ty, pre.span)
            case "lam":
                return ALam(pre.loc, pre.name, self.finish(pre.param_ty), self.build(pre.kids[0]),
                            ty, pre.span)
            case "app":
                f, x = pre.kids
                ff = self.build(f)
                return AApp(ff, self.build(x), ff.ty.loc, ty, pre.span)
        raise ValueError(pre.node)

    def iter_apps(self, pre: _Pre) -> Iterator[_Pre]:
        if pre.node == "app":
            yield pre
        for k in pre.kids:
            yield from self.iter_apps(k)


def _run(term, at, env, expected, coerce):
    inf = _Inferencer(coerce)
    pre = inf.go(dict(env or {}), at, term)
    if expected is not None:
        inf.s.unify(expected, pre.ty, term.span)
    inf.s.solve_links()
    inf.default_app_locs(pre)
    return inf, pre


def infer(
    term: SrcTerm,
    at: Location = CLIENT,
    env: Mapping[str, LocType] | None = None,
    expected: LocType | None = None,
) -> tuple[LocType, AnnTerm]:
    """Infer a type and an application-annotated term for `term` at `at`."""
    inf, pre = _run(term, at, env, expected, frozenset())
    ann = inf.build(pre)
    return ann.ty, ann


# ---------------------------------------------------------------- location repair


def loc_eta_expand(term: SrcTerm, src: LocType, dst: LocType) -> SrcTerm:
    """Wrap `term : src` in location-adjusting lambdas so it has type `dst`."""
    if src == dst:
        return term
    if erase_type(src) != erase_type(dst):
        raise ShapeMismatch(f"cannot coerce {show_type(src)} to {show_type(dst)}", term.span)
    assert isinstance(src, Arrow) and isinstance(dst, Arrow)
    x = "x" if "x" not in free_vars(term) else fresh_name("x", free_vars(term))
    inner = loc_eta_expand(Var(x), dst.dom, src.dom)
    body = loc_eta_expand(App(term, inner), src.cod, dst.cod)
    return Lam(dst.loc, x, body)


@dataclass(frozen=True)
class Repair:
    index: int
    span: SourceSpan | None
    found: LocType
    wanted: LocType


def repair(
    term: SrcTerm, at: Location = CLIENT, env: Mapping[str, LocType] | None = None
) -> tuple[SrcTerm, list[Repair]]:
    """Insert location eta-expansions at application arguments until the term types."""
    coerce: set[int] = set()
    first_error = None
    while True:
        try:
            inf, pre = _run(term, at, env, None, frozenset(coerce))
            break
        except LocationMismatch as err:
            first_error = first_error or err
            if err.app_index is None or err.app_index in coerce:
                raise first_error from None
            coerce.add(err.app_index)
    if not coerce:
        return term, []
    fixes: dict[int, tuple[LocType, LocType]] = {}
    for app in inf.iter_apps(pre):
        if app.index in coerce:
            fixes[app.index] = (inf.finish(app.arg_ty), inf.finish(app.dom_ty))
    counter = iter(range(10**9))

    def rebuild(t: SrcTerm) -> SrcTerm:
        match t:
            case Lam(loc, param, body):
                return Lam(loc, param, rebuild(body), t.span)
            case App(fun, arg):
                i = next(counter)
                f, x = rebuild(fun), rebuild(arg)
                if i in fixes:
                    x = loc_eta_expand(x, *fixes[i])
                return App(f, x, t.span)
        return t

    fixed = rebuild(term)
    try:
        infer(fixed, at, env)
    except TypingError:
        raise first_error from None
    log = [Repair(i, None, *fixes[i]) for i in sorted(fixes) if fixes[i][0] != fixes[i][1]]
    return fixed, log
