"""Goal-typed random generation of closed, well-typed source terms."""

from __future__ import annotations

import random
from typing import Mapping

from .syntax import CLIENT, SERVER, UNIT, App, Const, Lam, Location, SrcTerm, Var
from .typecheck import INT, STR, UNIT_T, Arrow, Base, GenerationExhausted, LocType

_LITERALS = {
    "Int": lambda rng: rng.randint(-9, 99),
    "Str": lambda rng: rng.choice(["", "a", "ok", "hi there", "é"]),
    "Unit": lambda rng: UNIT,
}


def random_type(rng: random.Random, depth: int = 2, arrow_bias: float = 0.4) -> LocType:
    if depth > 0 and rng.random() < arrow_bias:
        loc = rng.choice([CLIENT, SERVER])
        return Arrow(random_type(rng, depth - 1, arrow_bias / 2), loc, random_type(rng, depth - 1, arrow_bias / 2))
    return rng.choices([INT, STR, UNIT_T], weights=[6, 1, 1])[0]


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.names = 0

    def fresh(self, env: Mapping[str, LocType]) -> str:
        if env and self.rng.random() < 0.1:
            return self.rng.choice(sorted(env))  # shadow an outer binder
        self.names += 1
        return f"v{self.names}"

    def min_depth(self, env: Mapping[str, LocType], ty: LocType) -> int:
        if isinstance(ty, Base) or ty in env.values():
            return 1
        return 1 + self.min_depth(env, ty.cod)

    def term(self, env: dict[str, LocType], at: Location, goal: LocType, depth: int) -> SrcTerm:
        if depth < self.min_depth(env, goal):
            raise GenerationExhausted(f"no term of type {goal} fits in depth {depth}")
        rng = self.rng
        options: list[tuple[str, float]] = []
        if isinstance(goal, Base):
            options.append(("const", 1.0))
        vars_ = sorted(n for n, t in env.items() if t == goal)
        if vars_:
            options.append(("var", 3.0))
        if isinstance(goal, Arrow) and depth >= 1 + self.min_depth(env, goal.cod):
            options.append(("lam", 3.0))
        callers = sorted(
            n for n, t in env.items()
            if isinstance(t, Arrow) and t.cod == goal and depth >= 1 + self.min_depth(env, t.dom)
        )
        if callers:
            options.append(("call", 2.0))
        if depth >= 2 + self.min_depth(env, goal):
            options.append(("app", 4.0))
        kind = rng.choices([o for o, _ in options], weights=[w for _, w in options])[0]
        match kind:
            case "const":
                return Const(_LITERALS[goal.name](rng))
            case "var":
                return Var(rng.choice(vars_))
            case "lam":
                x = self.fresh(env)
                inner = {**env, x: goal.dom}
                if depth - 1 < self.min_depth(inner, goal.cod):
                    x = self.fresh({})
                    inner = {**env, x: goal.dom}
                body = self.term(inner, goal.loc, goal.cod, depth - 1)
                return Lam(goal.loc, x, body)
            case "call":
                f = rng.choice(callers)
                return App(Var(f), self.term(env, at, env[f].dom, depth - 1))
            case "app":
                for _ in range(8):
                    sigma = random_type(rng)
                    fun_ty = Arrow(sigma, rng.choice([CLIENT, SERVER]), goal)
                    if depth - 1 >= max(self.min_depth(env, fun_ty), self.min_depth(env, sigma)):
                        break
                else:
                    sigma = INT
                    fun_ty = Arrow(sigma, rng.choice([CLIENT, SERVER]), goal)
                fun = self.term(env, at, fun_ty, depth - 1)
                arg = self.term(env, at, sigma, depth - 1)
                return App(fun, arg)
        raise AssertionError(kind)


def gen_typed(
    seed: int,
    max_depth: int,
    at: Location = CLIENT,
    goal: LocType = INT,
    env: Mapping[str, LocType] | None = None,
) -> SrcTerm:
    """A random term of type `goal` at `at`, no deeper than `max_depth`. Deterministic in seed."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    g = _Gen(random.Random(seed))
    return g.term(dict(env or {}), at, goal, max_depth)


def depth(term: SrcTerm) -> int:
    match term:
        case Lam(_, _, body):
            return 1 + depth(body)
        case App(fun, arg):
            return 1 + max(depth(fun), depth(arg))
    return 1


def corpus(
    count: int, max_depth: int = 6, seed: int = 0, goals: tuple[LocType, ...] = (INT, STR, UNIT_T)
) -> list[tuple[int, SrcTerm]]:
    """`count` closed client programs of base type, cycling through `goals`."""
    out = []
    for i in range(count):
        s = seed + i
        out.append((s, gen_typed(s, max_depth, CLIENT, goals[i % len(goals)])))
    return out
