import http.client
import json
import threading
import urllib.request

import pytest

from locrpc import anf as A
from locrpc.cs import closure_convert, run_cs
from locrpc.generate import corpus
from locrpc.machine import FunctionStore, Strategy
from locrpc.net import RpcServer, Transport, UnknownSession, client_run, session_events
from locrpc.net.client import normalize_sids
from locrpc.net.server import RpcService
from locrpc.net.server import UnknownSession as ServerUnknownSession
from locrpc.net.wire import CallMsg, ReplyMsg, ReqMsg, RetMsg, decode, encode
from locrpc.pipeline import compile_rpc
from locrpc.syntax import CLIENT, parse
from locrpc.typecheck import infer


def store_for(term, strategy):
    return closure_convert(compile_rpc(infer(term, CLIENT)[1], strategy), strategy)


def post(endpoint, body):
    req = urllib.request.Request(endpoint, data=body, method="POST", headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as err:
        return err.code, err.read()


def open_sessions(server):
    with urllib.request.urlopen(f"http://127.0.0.1:{server.port}/debug/sessions") as resp:
        return json.loads(resp.read())["open"]


def test_enc_first_phase(p0):
    store = store_for(p0, Strategy.ENC)
    service = RpcService(store.server, Strategy.ENC)
    out = service.handle(ReqMsg(A.Clo("g7", ()), (A.Clo("g10", ()), A.Clo("g11", ()))))
    assert isinstance(out, CallMsg) and out.session is None
    assert out.fun.name == "g2" and out.args == (A.Const(0),)
    assert len(out.fun.env) == 3


def test_state_first_phase(p0):
    store = store_for(p0, Strategy.STATE)
    service = RpcService(store.server, Strategy.STATE)
    out = service.handle(ReqMsg(A.Clo("g3", ()), (A.Clo("g5", ()),)))
    assert isinstance(out, CallMsg) and out.session == "1"
    assert len(service.sessions) == 1
    out = service.handle(ReqMsg(A.Clo("g1", ()), (A.Const(7),)))
    assert isinstance(out, ReplyMsg) and out.session == "2"
    assert len(service.sessions) == 1


def test_state_unknown_session(p0):
    service = RpcService(store_for(p0, Strategy.STATE).server, Strategy.STATE)
    with pytest.raises(ServerUnknownSession):
        service.handle(RetMsg("41", A.Const(0)))


def test_one_request_in_flight_per_session():
    service = RpcService({}, Strategy.STATE)
    sid = service.sessions.open()
    with pytest.raises(ServerUnknownSession):
        service.sessions.acquire(sid)
    service.sessions.release(sid, ())
    assert service.sessions.acquire(sid) == ()


@pytest.mark.parametrize("strategy", list(Strategy))
def test_loopback_running_example(p0, strategy):
    store = store_for(p0, strategy)
    with RpcServer(store.server, strategy) as srv:
        value, log = client_run(store, strategy, srv.endpoint)
        assert open_sessions(srv) == 0
    assert value == A.Const(0) and log.round_trips == 3
    sids = {m.session for m in log.responses}
    assert sids == ({None} if strategy is Strategy.ENC else {"1"})


def test_value_main_sends_nothing():
    store = FunctionStore({}, {}, A.Val(A.Const(5)), Strategy.ENC)
    value, log = client_run(store, Strategy.ENC, "http://127.0.0.1:9/rpc")
    assert value == A.Const(5) and len(log) == 0


def test_transport_error(p0):
    store = store_for(p0, Strategy.ENC)
    with pytest.raises(Transport):
        client_run(store, Strategy.ENC, "http://127.0.0.1:9/rpc", timeout=2)


def test_http_status_codes(p0):
    store = store_for(p0, Strategy.STATE)
    with RpcServer(store.server, Strategy.STATE) as srv:
        assert post(srv.endpoint, b"{oops")[0] == 400
        assert post(srv.endpoint, encode(ReqMsg(A.Clo("g99", ()), ())))[0] == 404
        status, body = post(srv.endpoint, encode(RetMsg("12", A.Const(0))))
        assert status == 409 and decode(body).error == "UnknownSession"
        assert post(srv.endpoint.replace("/rpc", "/other"), b"{}")[0] == 404


def test_production_hides_debug(p0):
    store = store_for(p0, Strategy.ENC)
    with RpcServer(store.server, Strategy.ENC, production=True) as srv:
        conn = http.client.HTTPConnection("127.0.0.1", srv.port)
        conn.request("GET", "/debug/sessions")
        assert conn.getresponse().status == 404
        conn.close()


def test_enc_server_stays_stateless():
    for _, term in corpus(60, seed=91):
        store = store_for(term, Strategy.ENC)
        with RpcServer(store.server, Strategy.ENC) as srv:
            client_run(store, Strategy.ENC, srv.endpoint, between=lambda _n: assert_no_sessions(srv))
            assert open_sessions(srv) == 0


def assert_no_sessions(srv):
    assert open_sessions(srv) == 0


def test_concurrent_state_clients():
    src = r"(\c g. (\s h. (\s u. h 2) (h 1)) g) (\c n. n)"
    store = store_for(parse(src), Strategy.STATE)
    results, peaks = [], []
    with RpcServer(store.server, Strategy.STATE) as srv:
        def worker():
            value, _ = client_run(store, Strategy.STATE, srv.endpoint, between=lambda _n: peaks.append(open_sessions(srv)))
            results.append(value)

        threads = [threading.Thread(target=worker) for _ in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert open_sessions(srv) == 0
    assert results == [A.Const(2)] * 6
    assert max(peaks) <= 6


@pytest.mark.parametrize("strategy", list(Strategy))
def test_matches_local_runs(strategy):
    for _, term in corpus(40, seed=97):
        store = store_for(term, strategy)
        value, trace, stats = run_cs(store, strategy)
        with RpcServer(store.server, strategy) as srv:
            got, log = client_run(store, strategy, srv.endpoint)
        assert got == value and log.round_trips == stats.round_trips
        assert normalize_sids(session_events(log, strategy)) == normalize_sids([s.event for s in trace.steps if s.event])


def test_state_restart_loses_session(p0):
    store = store_for(p0, Strategy.STATE)
    srv = RpcServer(store.server, Strategy.STATE).start()
    port = srv.port

    def restart(_n):
        nonlocal srv
        srv.stop()
        srv = RpcServer(store.server, Strategy.STATE, port=port).start()

    try:
        with pytest.raises(UnknownSession):
            client_run(store, Strategy.STATE, srv.endpoint, between=restart)
    finally:
        srv.stop()
