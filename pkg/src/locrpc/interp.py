"""Big-step reference evaluator: beta-reduction runs at the lambda's location."""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import App, Const, Lam, Location, SrcTerm, Var, free_vars, subst


class EvalError(Exception):
    kind = "EvalError"


class StuckApplication(EvalError):
    kind = "StuckApplication"


class FuelExhausted(EvalError):
    kind = "FuelExhausted"


class FreeVariable(EvalError):
    kind = "FreeVariable"


@dataclass(frozen=True)
class BetaEvent:
    at: Location
    fun_loc: Location

    @property
    def remote(self) -> bool:
        return self.at is not self.fun_loc


class _Evaluator:
    def __init__(self, fuel: int, record: bool):
        self.fuel = fuel
        self.events: list[BetaEvent] | None = [] if record else None

    def run(self, term: SrcTerm, at: Location) -> SrcTerm:
        # Iterative in the tail position (the body), recursive for L and M.
        while True:
            match term:
                case Lam() | Const():
                    return term
                case Var(name):
                    raise FreeVariable(f"free variable {name}")
                case App(fun, arg):
                    f = self.run(fun, at)
                    w = self.run(arg, at)
                    if not isinstance(f, Lam):
                        raise StuckApplication(f"cannot apply a literal: {f.lit!r}")
                    if self.fuel <= 0:
                        raise FuelExhausted("evaluation ran out of fuel")
                    self.fuel -= 1
                    if self.events is not None:
                        self.events.append(BetaEvent(at, f.loc))
                    term, at = subst(f.body, f.param, w), f.loc
                case _:
                    raise TypeError(f"not a term: {term!r}")


def _closed(term: SrcTerm) -> None:
    fv = free_vars(term)
    if fv:
        raise FreeVariable(f"free variable {sorted(fv)[0]}")


def eval_rpc(term: SrcTerm, at: Location, fuel: int = 10**6) -> SrcTerm:
    """Evaluate a closed term at `at`; fuel bounds the number of beta steps."""
    _closed(term)
    return _Evaluator(fuel, record=False).run(term, at)


def eval_trace(term: SrcTerm, at: Location, fuel: int = 10**6) -> tuple[SrcTerm, list[BetaEvent]]:
    """Like eval_rpc, also returning the (ambient, function) location of each beta."""
    _closed(term)
    ev = _Evaluator(fuel, record=True)
    value = ev.run(term, at)
    return value, ev.events
