"""End-to-end helpers: source text or term to compiled programs and runs."""

from __future__ import annotations

from dataclasses import dataclass

from . import anf as A
from .cs import SessionStats, closure_convert, run_cs
from .enc import compile_client_enc
from .machine import FunctionStore, Strategy, Trace
from .state import compile_client_state
from .syntax import CLIENT, SrcTerm
from .typecheck import AnnTerm, LocType, infer


def compile_rpc(ann: AnnTerm, strategy: Strategy) -> A.Term:
    if strategy is Strategy.ENC:
        return compile_client_enc(ann)
    return compile_client_state(ann)


def compile_store(term: SrcTerm, strategy: Strategy) -> FunctionStore:
    _, ann = infer(term, CLIENT)
    return closure_convert(compile_rpc(ann, strategy), strategy)


@dataclass
class Run:
    ty: LocType
    value: A.Value
    trace: Trace
    stats: SessionStats
    store: FunctionStore


def run_program(term: SrcTerm, strategy: Strategy, fuel: int = 10**6) -> Run:
    ty, ann = infer(term, CLIENT)
    store = closure_convert(compile_rpc(ann, strategy), strategy)
    value, trace, stats = run_cs(store, strategy, fuel)
    return Run(ty, value, trace, stats, store)


def show_value(v: A.Value) -> str:
    return A.pretty_value(v)
