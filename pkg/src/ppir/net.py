"""Newline-delimited JSON wire protocol, database servers and the client fan-out.

Each database is an independent actor. The orchestrator opens one session per
database and never routes one database's traffic to another, so noncollusion
holds by construction. Both transports funnel through
``exchange(request bytes) -> reply bytes`` so a run yields the same transcript
bytes whichever transport carried it.

A session is ``hello`` followed by one ``query_batch``; the server answers the
batch with an ``answer_batch`` or reports an ``error`` frame.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import socket
import socketserver
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .dataset import Dataset
from .errors import (
    BadCandidate,
    BadSeed,
    LambdaTooLarge,
    MalformedFrame,
    OversizeFrame,
    PartialFailure,
    ProtocolError,
    RetrievalTimeout,
    UnknownKind,
)
from .protocol import Query, Transcript, answer_queries

log = logging.getLogger(__name__)

MAX_FRAME = 16 * 1024 * 1024
KINDS = ("hello", "query_batch", "answer_batch", "error")
LISTEN_ENV = "PPIR_LISTEN"
DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class WireMessage:
    kind: str
    session: str
    s: Optional[int] = None
    scheme: Optional[str] = None
    lam: int = 1
    queries: Optional[tuple[Query, ...]] = None
    answers: Optional[tuple[tuple[int, ...], ...]] = None
    code: Optional[str] = None
    text: Optional[str] = None

    @classmethod
    def hello(cls, session: str, s: int, scheme: str, lam: int = 1) -> WireMessage:
        return cls("hello", session, s=s, scheme=scheme, lam=lam)

    @classmethod
    def query_batch(cls, session: str, queries: Sequence[Query]) -> WireMessage:
        return cls("query_batch", session, queries=tuple(queries))

    @classmethod
    def answer_batch(cls, session: str, answers) -> WireMessage:
        return cls("answer_batch", session, answers=tuple(tuple(a) for a in answers))

    @classmethod
    def error(cls, session: str, code: str, text: str) -> WireMessage:
        return cls("error", session, code=code, text=text)


def encode(msg: WireMessage) -> bytes:
    obj: dict = {"kind": msg.kind, "session": msg.session}
    if msg.kind == "hello":
        obj["s"] = msg.s
        obj["scheme"] = msg.scheme
        if msg.lam != 1:
            obj["lambda"] = msg.lam
    elif msg.kind == "query_batch":
        obj["queries"] = [q.to_wire() for q in msg.queries]
    elif msg.kind == "answer_batch":
        obj["answers"] = [list(a) for a in msg.answers]
    elif msg.kind == "error":
        obj["code"] = msg.code
        obj["text"] = msg.text
    else:
        raise UnknownKind(f"unknown message kind {msg.kind!r}")
    frame = json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode() + b"\n"
    if len(frame) > MAX_FRAME:
        raise OversizeFrame(f"frame of {len(frame)} bytes exceeds {MAX_FRAME}")
    return frame


def _int(obj, key):
    v = obj.get(key)
    if type(v) is not int:
        raise MalformedFrame(f"{key!r} must be an integer")
    return v


def decode(frame: bytes) -> WireMessage:
    if len(frame) > MAX_FRAME:
        raise OversizeFrame(f"frame of {len(frame)} bytes exceeds {MAX_FRAME}")
    try:
        obj = json.loads(frame.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFrame(f"not a JSON frame: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedFrame("frame is not a JSON object")
    kind = obj.get("kind")
    session = obj.get("session")
    if not isinstance(session, str):
        raise MalformedFrame("'session' must be a string")
    if kind not in KINDS:
        raise UnknownKind(f"unknown message kind {kind!r}")
    try:
        if kind == "hello":
            scheme = obj.get("scheme")
            if not isinstance(scheme, str):
                raise MalformedFrame("'scheme' must be a string")
            lam = _int(obj, "lambda") if "lambda" in obj else 1
            if lam < 1:
                raise MalformedFrame("'lambda' must be positive")
            return WireMessage.hello(session, _int(obj, "s"), scheme, lam)
        if kind == "query_batch":
            raw = obj.get("queries")
            if not isinstance(raw, list):
                raise MalformedFrame("'queries' must be a list")
            for q in raw:
                if not isinstance(q, list) or not all(
                    isinstance(t, list) and len(t) == 3 and all(type(x) is int for x in t) for t in q
                ):
                    raise MalformedFrame("a query is a list of [candidate, symbol_index, coeff] triples")
            return WireMessage.query_batch(session, [Query.from_wire(q) for q in raw])
        if kind == "answer_batch":
            raw = obj.get("answers")
            if not isinstance(raw, list) or not all(
                isinstance(a, list) and all(type(x) is int for x in a) for a in raw
            ):
                raise MalformedFrame("'answers' must be a list of integer vectors")
            return WireMessage.answer_batch(session, raw)
        code, text = obj.get("code"), obj.get("text")
        if not isinstance(code, str) or not isinstance(text, str):
            raise MalformedFrame("error frames carry string 'code' and 'text'")
        return WireMessage.error(session, code, text)
    except ValueError as exc:
        raise MalformedFrame(str(exc)) from None


# -- server ------------------------------------------------------------------


class DatabaseServer:
    """Answers sessions against one immutable dataset.

    ``log`` records every inbound frame as (session, bytes); tests use it to
    confirm that no database sees another's traffic.
    """

    def __init__(self, dataset: Dataset, name: str = "db"):
        self.dataset = dataset
        self.name = name
        self._lock = threading.Lock()
        self.log: list[tuple[str, bytes]] = []

    def _record(self, session: str, frame: bytes) -> None:
        with self._lock:
            self.log.append((session, frame))

    def handle_stream(self, frames: Sequence[bytes]) -> list[bytes]:
        """Process the frames of one connection; returns the reply frames."""
        hellos: dict[str, WireMessage] = {}
        replies = []
        for frame in frames:
            reply = self._handle(frame, hellos)
            if reply is not None:
                replies.append(encode(reply))
        return replies

    def _handle(self, frame: bytes, hellos: dict) -> Optional[WireMessage]:
        session = ""
        try:
            msg = decode(frame)
            session = msg.session
            self._record(session, frame)
            if msg.kind == "hello":
                hellos[session] = msg
                return None
            if msg.kind != "query_batch":
                return WireMessage.error(session, "unexpected_kind", f"servers do not accept {msg.kind}")
            hello = hellos.get(session)
            if hello is None:
                return WireMessage.error(session, "no_hello", "query_batch before hello")
            answers = self._answer(hello, msg.queries)
            return WireMessage.answer_batch(session, answers)
        except ProtocolError as exc:
            self._record(session, frame)
            return WireMessage.error(session, exc.code, str(exc))
        except BadSeed as exc:
            return WireMessage.error(session, "bad_seed", str(exc))
        except LambdaTooLarge as exc:
            return WireMessage.error(session, "lambda_too_large", str(exc))
        except BadCandidate as exc:
            return WireMessage.error(session, "bad_candidate", str(exc))

    def _answer(self, hello: WireMessage, queries):
        ds = self.dataset
        if not 1 <= hello.s <= ds.delta:
            raise BadSeed(f"s={hello.s} outside [1, {ds.delta}]")
        return answer_queries(ds, hello.s, queries, hello.lam)


def split_frames(data: bytes) -> list[bytes]:
    return [line for line in data.split(b"\n") if line]


class Endpoint(Protocol):
    def exchange(self, request: bytes) -> bytes: ...


class InProcessEndpoint:
    """Direct call into a server object in this process."""

    def __init__(self, server: DatabaseServer):
        self.server = server

    def exchange(self, request: bytes) -> bytes:
        return b"".join(self.server.handle_stream(split_frames(request)))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        db: DatabaseServer = self.server.database
        hellos: dict = {}
        while True:
            line = self.rfile.readline(MAX_FRAME + 1)
            if not line:
                return
            if len(line) > MAX_FRAME:
                self.wfile.write(encode(WireMessage.error("", "oversize", "frame exceeds 16 MiB")))
                return
            reply = db._handle(line.rstrip(b"\n"), hellos)
            if reply is not None:
                self.wfile.write(encode(reply))
                self.wfile.flush()


class _TcpServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


class TcpDatabaseServer:
    """A :class:`DatabaseServer` behind a threaded TCP listener."""

    def __init__(self, dataset: Dataset, address: Optional[tuple[str, int]] = None, name: str = "db"):
        if address is None:
            address = parse_address(os.environ.get(LISTEN_ENV, "127.0.0.1:0"))
        self.database = DatabaseServer(dataset, name)
        self._server = _TcpServer(address, _Handler)
        self._server.database = self.database
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> TcpDatabaseServer:
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,), daemon=True)
        self._thread.start()
        log.info("%s listening on %s:%d", self.database.name, *self.address)
        return self

    def serve_forever(self) -> None:
        log.info("%s listening on %s:%d", self.database.name, *self.address)
        self._server.serve_forever()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()


def serve_database(dataset: Dataset, address: Optional[tuple[str, int]] = None) -> None:
    """Serve one database until interrupted (bind address from PPIR_LISTEN if not given)."""
    server = TcpDatabaseServer(dataset, address)
    try:
        server.serve_forever()
    finally:
        server._server.server_close()


class TcpEndpoint:
    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self.host = host
        self.port = port
        self.timeout = timeout

    def exchange(self, request: bytes) -> bytes:
        with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
            sock.sendall(request)
            sock.shutdown(socket.SHUT_WR)
            chunks = []
            while True:
                chunk = sock.recv(65536)
                if not chunk:
                    break
                chunks.append(chunk)
        return b"".join(chunks)


# -- client ------------------------------------------------------------------


def session_id(scheme: str, s: int, db: int, queries: Sequence[Query]) -> str:
    """Deterministic opaque id, so identical runs put identical bytes on the wire."""
    h = hashlib.sha256(f"{scheme}|{s}|{db}|".encode())
    for q in queries:
        h.update(json.dumps(q.to_wire()).encode())
    return h.hexdigest()[:16]


def request_bytes(session: str, s: int, scheme: str, lam: int, queries: Sequence[Query]) -> bytes:
    return encode(WireMessage.hello(session, s, scheme, lam)) + encode(WireMessage.query_batch(session, queries))


def _one_database(endpoint: Endpoint, db: int, scheme: str, s: int, lam: int, queries) -> tuple[tuple[int, ...], ...]:
    session = session_id(scheme, s, db, queries)
    try:
        reply = endpoint.exchange(request_bytes(session, s, scheme, lam, queries))
    except (socket.timeout, ConnectionError):
        # an endpoint that is down or silent looks the same to the client
        raise RetrievalTimeout(db + 1) from None
    except OSError as exc:
        raise PartialFailure(db + 1, f"transport failure: {exc}") from None
    frames = split_frames(reply)
    if len(frames) != 1:
        raise PartialFailure(db + 1, f"expected one reply frame, got {len(frames)}")
    msg = decode(frames[0])
    if msg.kind == "error":
        raise PartialFailure(db + 1, f"{msg.code}: {msg.text}")
    if msg.kind != "answer_batch" or msg.session != session:
        raise PartialFailure(db + 1, f"unexpected {msg.kind} frame")
    if len(msg.answers) != len(queries):
        raise PartialFailure(db + 1, f"{len(msg.answers)} answers for {len(queries)} queries")
    return msg.answers


def orchestrate(
    scheme: str,
    s: int,
    lam: int,
    p: int,
    queries: Sequence[Sequence[Query]],
    endpoints: Sequence[Endpoint],
    timeout: float = DEFAULT_TIMEOUT,
) -> Transcript:
    """Send every database its own hello + query batch concurrently and assemble the transcript.

    Any failure aborts the whole retrieval; nothing is decoded from a partial set.
    """
    if len(endpoints) != len(queries):
        raise ValueError(f"{len(queries)} query lists for {len(endpoints)} endpoints")
    with ThreadPoolExecutor(max_workers=max(1, len(endpoints))) as pool:
        futures = [
            pool.submit(_one_database, ep, j, scheme, s, lam, tuple(qs))
            for j, (ep, qs) in enumerate(zip(endpoints, queries))
        ]
        answers = []
        for j, fut in enumerate(futures):
            try:
                answers.append(fut.result(timeout=timeout))
            except FutureTimeout:
                raise RetrievalTimeout(j + 1) from None
    return Transcript(scheme, s, lam, p, tuple(tuple(qs) for qs in queries), tuple(answers))
