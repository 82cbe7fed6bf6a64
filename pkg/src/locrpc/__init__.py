"""Typed RPC calculus toolkit: locative typing, two compilation strategies, and their runtimes."""

from .interp import eval_rpc, eval_trace
from .machine import FunctionStore, Strategy
from .pipeline import compile_store, run_program
from .syntax import CLIENT, SERVER, Location, alpha_eq, parse, pretty
from .typecheck import check, infer, loc_eta_expand

__all__ = [
    "CLIENT", "SERVER", "FunctionStore", "Location", "Strategy", "alpha_eq", "check", "compile_store",
    "eval_rpc", "eval_trace", "infer", "loc_eta_expand", "parse", "pretty", "run_program",
]
