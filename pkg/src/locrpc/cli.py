"""Command-line entry points: parse, typecheck, eval, compile, run, serve, client, gen."""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from pathlib import Path

from . import anf as A
from .cs import StoreFormatError, pretty_store, store_from_json, store_to_json
from .generate import gen_typed, random_type
from .interp import EvalError, eval_rpc
from .machine import MachineError, Strategy
from .net.client import ClientError, client_run
from .net.server import RpcServer
from .net.wire import DecodeError
from .pipeline import compile_store, run_program
from .syntax import CLIENT, ParseError, dump, parse, pretty
from .typecheck import INT, TypingError, infer, pretty_ann, repair, show_type

DEFAULT_PORT = 7070


class CliError(Exception):
    def __init__(self, kind: str, message: str, where: str = ""):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.where = where


def _where(path: str, err) -> str:
    span = getattr(err, "span", None)
    if span is None:
        return f"{path}:1:1"
    return f"{path}:{span.line}:{span.col}"


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError("IOError", str(exc), path) from None


def _load_term(path: str, fix: bool = False):
    text = _read(path)
    try:
        term = parse(text)
        if fix:
            term, log = repair(term, CLIENT)
            for r in log:
                print(f"note: eta-expanded argument of application #{r.index}: "
                      f"{show_type(r.found)} => {show_type(r.wanted)}", file=sys.stderr)
        ty, ann = infer(term, CLIENT)
    except (ParseError, TypingError) as exc:
        raise CliError(exc.kind, exc.message, _where(path, exc)) from None
    return term, ty, ann


def _load_store(path: str):
    try:
        return store_from_json(_read(path))
    except StoreFormatError as exc:
        raise CliError("StoreFormatError", str(exc), path) from None


def _port(args) -> int:
    if args.port is not None:
        return args.port
    return int(os.environ.get("LOCRPC_PORT", DEFAULT_PORT))


def cmd_parse(args) -> None:
    text = _read(args.file)
    try:
        term = parse(text)
    except ParseError as exc:
        raise CliError(exc.kind, exc.message, _where(args.file, exc)) from None
    print(dump(term))
    print(pretty(term))


def cmd_typecheck(args) -> None:
    term, ty, ann = _load_term(args.file, args.repair)
    print(show_type(ty))
    print(pretty_ann(ann))
    if args.repair:
        print(pretty(term))


def cmd_eval(args) -> None:
    text = _read(args.file)
    try:
        term = parse(text)
    except ParseError as exc:
        raise CliError(exc.kind, exc.message, _where(args.file, exc)) from None
    try:
        print(pretty(eval_rpc(term, CLIENT, args.fuel)))
    except EvalError as exc:
        raise CliError(type(exc).__name__, str(exc), args.file) from None


def cmd_compile(args) -> None:
    term, _, _ = _load_term(args.file)
    store = compile_store(term, Strategy(args.strategy))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "store.json"
    target.write_text(store_to_json(store), encoding="utf-8")
    if args.show:
        print(pretty_store(store))
    print(target)


def cmd_run(args) -> None:
    term, _, _ = _load_term(args.file)
    strategy = Strategy(args.strategy)
    try:
        result = run_program(term, strategy, args.fuel)
    except MachineError as exc:
        raise CliError(type(exc).__name__, str(exc), args.file) from None
    if args.trace:
        for line in result.trace.lines(with_depth=strategy is Strategy.STATE):
            print(line)
    print(A.pretty_value(result.value))
    if args.sessions:
        print(result.stats.summary())


def cmd_serve(args) -> None:
    store = _load_store(args.store)
    server = RpcServer(store.server, store.strategy, args.host, _port(args), args.production)
    try:
        server.start()
    except OSError as exc:
        raise CliError("Transport", str(exc), args.store) from None
    print(f"serving {store.strategy.value} store on {server.endpoint}", flush=True)
    try:
        server.thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()


def cmd_client(args) -> None:
    store = _load_store(args.store)
    endpoint = args.endpoint or f"http://127.0.0.1:{_port(args)}/rpc"
    try:
        value, log = client_run(store, store.strategy, endpoint, args.fuel)
    except (ClientError, DecodeError, MachineError) as exc:
        raise CliError(getattr(exc, "kind", type(exc).__name__), str(exc), args.store) from None
    if args.log:
        for entry in log.entries:
            print(entry.direction, entry.body.decode(), file=sys.stderr)
    print(A.pretty_value(value))


def cmd_gen(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    goals = random.Random(args.seed)
    for i in range(args.count):
        seed = args.seed * 100_003 + i
        goal = random_type(goals, 2) if args.arrow_goals else INT
        try:
            term = gen_typed(seed, args.depth, CLIENT, goal)
        except TypingError:
            term = gen_typed(seed, args.depth, CLIENT, INT)
        path = out / f"prog_{i:04d}.rpc"
        path.write_text(f"-- seed {seed}\n{pretty(term)}\n", encoding="utf-8")
        print(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locrpc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse", help="print the AST and the normalized source")
    s.add_argument("file")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("typecheck", help="infer the type and show the located applications")
    s.add_argument("file")
    s.add_argument("--repair", action="store_true", help="eta-expand arguments to fix location mismatches")
    s.set_defaults(func=cmd_typecheck)

    s = sub.add_parser("eval", help="evaluate with the reference interpreter")
    s.add_argument("file")
    s.add_argument("--fuel", type=int, default=10**6)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compile", help="compile and closure-convert to a store file")
    s.add_argument("file")
    s.add_argument("--strategy", choices=[x.value for x in Strategy], default="enc")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--show", action="store_true", help="also print the stores")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("run", help="compile and run on the local two-machine simulator")
    s.add_argument("file")
    s.add_argument("--strategy", choices=[x.value for x in Strategy], default="enc")
    s.add_argument("--trace", action="store_true")
    s.add_argument("--sessions", action="store_true")
    s.add_argument("--fuel", type=int, default=10**6)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("serve", help="host the server half of a store over HTTP")
    s.add_argument("store")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=None, help=f"default $LOCRPC_PORT or {DEFAULT_PORT}")
    s.add_argument("--production", action="store_true", help="disable /debug/sessions")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("client", help="run main against a server")
    s.add_argument("store")
    s.add_argument("--endpoint", default=None)
    s.add_argument("--port", type=int, default=None)
    s.add_argument("--fuel", type=int, default=10**6)
    s.add_argument("--log", action="store_true", help="dump wire messages to stderr")
    s.set_defaults(func=cmd_client)

    s = sub.add_parser("gen", help="write a corpus of random well-typed programs")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--depth", type=int, default=6)
    s.add_argument("--out-dir", default="corpus")
    s.add_argument("--arrow-goals", action="store_true", help="allow function-typed goals")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error[{exc.kind}] {exc.where} {exc.message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
