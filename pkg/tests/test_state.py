import pytest

from locrpc import anf as A
from locrpc.generate import corpus
from locrpc.interp import eval_rpc
from locrpc.machine import ClientRunning, Frame, ServerRunning, Stuck
from locrpc.state import (
    compile_client_state,
    compile_server_state,
    compile_value_state,
    frames_preserved,
    is_call_return_balanced,
    run_state,
    step_state,
)
from locrpc.syntax import CLIENT, SERVER, parse
from locrpc.typecheck import INT, Arrow, infer


def v(n):
    return A.Val(A.Var(n))


def test_call_ret_round_trip():
    f = A.Lam(CLIENT, ("a",), v("a"))
    mz = v("z")
    m = A.Val(A.Var("x"))
    delta = (Frame("q", v("q")),)
    pending = Frame("z", mz)

    s0 = ServerRunning(pending, A.Let("x", A.Call(f, (A.Const(4),)), m), delta)
    s1, rule = step_state(s0)
    assert rule == "Call"
    assert s1 == ClientRunning(A.Let("z", A.LocalApp(f, (A.Const(4),)), mz), (Frame("x", m), *delta))

    s2 = ClientRunning(A.Let("z", A.Ret(A.Const(4)), mz), (Frame("x", m), *delta))
    s3, rule = step_state(s2)
    assert rule == "Ret"
    assert s3 == ServerRunning(pending, A.Let("x", A.Val(A.Const(4)), m), delta)


def test_req_wraps_body_and_keeps_stack():
    f = A.Lam(SERVER, ("y",), v("y"))
    delta = (Frame("q", v("q")),)
    conf = ClientRunning(A.Let("x", A.Req(f, (A.Const(1),)), v("x")), delta)
    nxt, rule = step_state(conf)
    assert rule == "Req"
    assert nxt == ServerRunning(Frame("x", v("x")), A.Let("r", A.LocalApp(f, (A.Const(1),)), v("r")), delta)


def test_ret_with_empty_stack_is_stuck():
    with pytest.raises(Stuck):
        step_state(ClientRunning(A.Let("x", A.Ret(A.Const(1)), v("x"))))


def test_run_value():
    value, trace = run_state(A.Val(A.Lam(CLIENT, ("x",), v("x"))))
    assert len(trace) == 0


def test_running_example(p0):
    value, trace = run_state(compile_client_state(infer(p0, CLIENT)[1]))
    assert value == A.Const(0)
    assert [r for r in trace.rules if r in ("Req", "Call", "Ret", "Reply")] == ["Req", "Call", "Req", "Reply", "Ret", "Reply"]
    assert is_call_return_balanced(trace) and frames_preserved(trace)
    assert trace.lines(with_depth=True)[-1].endswith("depth=0")


def test_two_sequential_client_calls():
    src = r"(\c g. (\s h. (\s u. h 2) (h 1)) g) (\c n. n)"
    value, trace = run_state(compile_client_state(infer(parse(src), CLIENT)[1]))
    assert value == A.Const(2)
    assert trace.rules.count("Call") == 2
    assert trace.steps[-1].depth == 0


def test_compile_server_lambda_direct_style():
    _, ann = infer(parse(r"\s z. z"), CLIENT, expected=Arrow(INT, SERVER, INT))
    assert compile_value_state(ann) == A.Lam(SERVER, ("z",), v("z"))


def test_compile_remote_application_from_client():
    _, ann = infer(parse(r"(\s z. z) y"), CLIENT, {"y": INT})
    want = A.let_chain(
        ("f", A.Val(A.Lam(SERVER, ("z",), v("z")))), ("x", v("y")), ("r", A.Req(A.Var("f"), (A.Var("x"),))), v("r")
    )
    assert A.alpha_eq(compile_client_state(ann), want)


def test_compile_client_call_from_server():
    _, ann = infer(parse("f 0"), SERVER, {"f": Arrow(INT, CLIENT, INT)})
    commute = A.Lam(CLIENT, ("z",), A.Let("y", A.LocalApp(A.Var("f2"), (A.Var("z"),)), A.Ret(A.Var("y"))))
    want = A.let_chain(
        ("f2", v("f")), ("x", A.Val(A.Const(0))), ("r", A.Call(commute, (A.Var("x"),))), v("r")
    )
    assert A.alpha_eq(compile_server_state(ann), want)


def test_compile_server_local_application():
    _, ann = infer(parse("f x"), SERVER, {"f": Arrow(INT, SERVER, INT), "x": INT})
    want = A.let_chain(("f2", v("f")), ("x2", v("x")), ("r", A.LocalApp(A.Var("f2"), (A.Var("x2"),))), v("r"))
    assert A.alpha_eq(compile_server_state(ann), want)


def test_compile_client_lambda_from_server():
    _, ann = infer(parse(r"\c y. y"), SERVER, expected=Arrow(INT, CLIENT, INT))
    assert compile_value_state(ann) == A.Lam(CLIENT, ("y",), v("y"))


def test_balance_examples():
    assert is_call_return_balanced([])
    assert not is_call_return_balanced(["Call"])
    assert not is_call_return_balanced(["Ret", "Call"])
    assert is_call_return_balanced(["AppS", "Call", "AppC", "Call", "Ret", "Ret", "Call", "Ret"])


def coroutine_ok(rules):
    pairs = {"Reply": "Req", "Ret": "Call"}
    stack = []
    for r in rules:
        if r in ("Req", "Call"):
            stack.append(r)
        elif r in pairs:
            if not stack or stack.pop() != pairs[r]:
                return False
    return not stack


def test_corpus_properties():
    for _, term in corpus(400, seed=31):
        value, trace = run_state(compile_client_state(infer(term, CLIENT)[1]))
        assert value.lit == eval_rpc(term, CLIENT).lit
        assert is_call_return_balanced(trace) and frames_preserved(trace)
        assert coroutine_ok(trace.rules)
        # Req and its matching Reply see the same stack
        open_reqs = []
        for s in trace.steps:
            if s.rule == "Req":
                open_reqs.append(s.before.stack)
            elif s.rule == "Reply":
                assert s.after.stack == open_reqs.pop()
