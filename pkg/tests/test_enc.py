import pytest

from locrpc import anf as A
from locrpc.enc import (
    check_enc_discipline,
    compile_client_enc,
    compile_server_enc,
    compile_value_enc,
    run_enc,
    step_enc,
)
from locrpc.generate import corpus
from locrpc.interp import eval_rpc
from locrpc.machine import ClientRunning, FuelExhausted, Frame, ServerRunning, Stuck
from locrpc.syntax import CLIENT, SERVER, parse
from locrpc.typecheck import INT, AApp, ALam, Arrow, AVar, IllformedAnnotation, infer

ID_S = A.Lam(SERVER, ("y",), A.Val(A.Var("y")))


def v(n):
    return A.Val(A.Var(n))


def test_step_local_client_beta():
    ident = A.Lam(CLIENT, ("y",), v("y"))
    conf = ClientRunning(A.Let("x", A.LocalApp(ident, (A.Const(7),)), v("x")))
    assert step_enc(conf) == (ClientRunning(A.Let("x", A.Val(A.Const(7)), v("x"))), "AppC")


def test_step_req_and_reply():
    f = A.Lam(SERVER, ("y", "k"), A.LocalApp(A.Var("k"), (A.Var("y"),)))
    args = (A.Const(1), ID_S)
    conf = ClientRunning(A.Let("x", A.Req(f, args), v("x")))
    nxt, rule = step_enc(conf)
    assert rule == "Req" and nxt == ServerRunning(Frame("x", v("x")), A.LocalApp(f, args))
    done = ServerRunning(Frame("x", v("x")), A.Val(A.Const(1)))
    assert step_enc(done) == (ClientRunning(A.Let("x", A.Val(A.Const(1)), v("x"))), "Reply")


def test_step_stuck():
    with pytest.raises(Stuck):
        step_enc(ClientRunning(A.Let("x", A.LocalApp(A.Const(1), (A.Const(2),)), v("x"))))
    with pytest.raises(Stuck):
        step_enc(ClientRunning(A.Let("x", A.Call(ID_S, (A.Const(2),)), v("x"))))
    two = A.Lam(CLIENT, ("a", "b"), v("a"))
    with pytest.raises(Stuck):
        step_enc(ClientRunning(A.Let("x", A.LocalApp(two, (A.Const(2),)), v("x"))))


def test_run_value_takes_no_steps():
    value, trace = run_enc(A.Val(A.Lam(CLIENT, ("x",), v("x"))))
    assert len(trace) == 0 and value == A.Lam(CLIENT, ("x",), v("x"))


def test_let_flattening():
    term = A.Let("x", A.Let("y", A.Val(A.Const(1)), v("y")), v("x"))
    value, trace = run_enc(term)
    assert value == A.Const(1) and trace.rules == ["LetC", "ValC", "ValC"]


def test_fuel():
    loop = A.Lam(CLIENT, ("u",), A.Let("r", A.LocalApp(A.Var("u"), (A.Var("u"),)), v("r")))
    with pytest.raises(FuelExhausted):
        run_enc(A.Let("r", A.LocalApp(loop, (loop,)), v("r")), fuel=100)


def test_compile_values():
    assert compile_value_enc(AVar("x", INT)) == A.Var("x")
    lam = ALam(SERVER, "z", INT, AVar("z", INT), Arrow(INT, SERVER, INT))
    out = compile_value_enc(lam)
    assert A.alpha_eq(out, A.Lam(SERVER, ("z", "k"), A.LocalApp(A.Var("k"), (A.Var("z"),))))


def test_compile_remote_application_from_client():
    _, ann = infer(parse(r"(\s z. z) y"), CLIENT, {"y": INT})
    out = compile_client_enc(ann)
    f, x, r, y = "f", "x", "r", "w"
    want = A.let_chain(
        (f, A.Val(compile_value_enc(ann.fun))),
        (x, v("y")),
        (r, A.Req(A.Var(f), (A.Var(x), A.Lam(SERVER, (y,), v(y))))),
        v(r),
    )
    assert A.alpha_eq(out, want)


def test_compile_server_var():
    k = A.Var("K")
    assert compile_server_enc(AVar("x", INT), k) == A.LocalApp(k, (A.Var("x"),))


def test_compile_client_call_from_server():
    _, ann = infer(parse("f 0"), SERVER, {"f": Arrow(INT, CLIENT, INT)})
    k = A.Var("K")
    out = compile_server_enc(ann, k)
    # f and 0 are passed to their continuations, then a call ships the commute function
    commute = A.Lam(CLIENT, ("z",), A.Let("y", A.LocalApp(A.Var("f2"), (A.Var("z"),)), A.Req(k, (A.Var("y"),))))
    inner = A.Lam(SERVER, ("x",), A.Call(commute, (A.Var("x"),)))
    want = A.LocalApp(A.Lam(SERVER, ("f2",), A.LocalApp(inner, (A.Const(0),))), (A.Var("f"),))
    assert A.alpha_eq(out, want)


def test_compile_server_local_application():
    _, ann = infer(parse("f x"), SERVER, {"f": Arrow(INT, SERVER, INT), "x": INT})
    k = A.Var("K")
    body = A.LocalApp(A.Var("fv"), (A.Var("xv"), k))
    want = A.LocalApp(
        A.Lam(SERVER, ("fv",), A.LocalApp(A.Lam(SERVER, ("xv",), body), (A.Var("x"),))), (A.Var("f"),)
    )
    assert A.alpha_eq(compile_server_enc(ann, k), want)


def test_illformed_annotation():
    lam = ALam(SERVER, "z", INT, AVar("z", INT), Arrow(INT, SERVER, INT))
    with pytest.raises(IllformedAnnotation):
        compile_client_enc(AApp(lam, AVar("y", INT), CLIENT, INT))


def test_running_example(p0):
    value, trace = run_enc(compile_client_enc(infer(p0, CLIENT)[1]))
    assert value == A.Const(0)
    assert [r for r in trace.rules if r in ("Req", "Call", "Reply")] == ["Req", "Call", "Req", "Reply", "Req", "Reply"]


def test_trace_lines(p0):
    _, trace = run_enc(compile_client_enc(infer(p0, CLIENT)[1]))
    lines = trace.lines()
    assert lines[0].split() == ["1", trace.rules[0], "C"]
    assert all(len(line.split()) == 3 for line in lines)


def test_corpus_properties():
    for _, term in corpus(300, seed=21):
        compiled = compile_client_enc(infer(term, CLIENT)[1])
        check_enc_discipline(compiled)
        value, trace = run_enc(compiled)
        assert value.lit == eval_rpc(term, CLIENT).lit
        in_server = False
        for s in trace.steps:
            if isinstance(s.after, ClientRunning):
                assert s.after.stack == ()
            # server phases open with Req and close with Reply or Call, never nested
            if s.rule == "Req":
                assert not in_server
                in_server = True
            elif s.rule in ("Reply", "Call"):
                assert in_server
                in_server = False
        assert not in_server


def test_call_only_in_tail_position():
    def calls_in_bound(m):
        match m:
            case A.Let(_, bound, body):
                return isinstance(bound, A.Call) or calls_in_bound(bound) or calls_in_bound(body)
        return False

    for _, term in corpus(300, seed=22):
        compiled = compile_client_enc(infer(term, CLIENT)[1])
        for node in A.iter_subterms(compiled):
            if isinstance(node, A.Lam):
                assert not calls_in_bound(node.body)
