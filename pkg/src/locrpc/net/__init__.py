"""HTTP runtime: wire format, server and trampolined client."""

from .client import ClientError, MessageLog, ServerError, Transport, UnknownSession, client_run, session_events
from .server import RpcServer, RpcService, SessionTable
from .wire import CallMsg, DecodeError, ErrorMsg, ReplyMsg, ReqMsg, RetMsg, decode, encode

__all__ = [
    "CallMsg", "ClientError", "DecodeError", "ErrorMsg", "MessageLog", "ReplyMsg", "ReqMsg", "RetMsg",
    "RpcServer", "RpcService", "ServerError", "SessionTable", "Transport", "UnknownSession",
    "client_run", "decode", "encode", "session_events",
]
