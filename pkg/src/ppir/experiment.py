"""End-to-end experiments: dataset, databases, retrieval, decode and bound checks."""

from __future__ import annotations

import csv
import io
import json
import random
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .capacity import TOLERANCE, CapacityReport, ProblemConfig, capacity_report
from .dataset import Dataset, build_dataset, resolve_candidates
from .errors import RegimeUnsupported
from .gf import DEFAULT_MODULUS
from .net import InProcessEndpoint, DatabaseServer, TcpDatabaseServer, TcpEndpoint, orchestrate
from .protocol import Transcript
from .scheme_mppir import MppirClient, MppirRequest, single_server_queries, decode_single_server
from .scheme_ppir import PpirClient, ppir_length
from .simulate import identify, scheme_name

SCHEMES = ("ppir", "mppir", "single_server")
TRANSPORTS = ("inproc", "tcp")
COLUMNS = ("n", "gamma", "eta", "lambda", "upper", "lower", "measured", "verdict")


@dataclass(frozen=True)
class ExperimentSpec:
    scheme: str
    n: int
    sizes: tuple[int, ...]
    omega: tuple[int, ...]
    length: Optional[int] = None
    lam: int = 1
    seed: int = 0
    transport: str = "inproc"
    repetitions: int = 1
    p: int = DEFAULT_MODULUS
    shuffle: bool = True
    s: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(self.sizes))
        object.__setattr__(self, "omega", tuple(self.omega))
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if self.scheme == "ppir" and (len(self.omega) != 1 or self.lam != 1):
            raise ValueError("ppir retrieves one message of one class")
        if (self.scheme == "single_server") != (self.n == 1):
            raise ValueError("single_server means n == 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @property
    def gamma_total(self) -> int:
        return len(self.sizes)

    @property
    def eta(self) -> int:
        return len(self.omega)

    @property
    def problem(self) -> ProblemConfig:
        return ProblemConfig(self.n, self.gamma_total, self.eta, self.lam)

    def block_length(self) -> int:
        if self.n == 1:
            return 1
        if self.scheme == "ppir":
            return ppir_length(self.n, self.gamma_total)
        return MppirClient(self.n, self.gamma_total, 1, self.p).length(self.eta)

    def resolved_length(self) -> int:
        block = self.block_length()
        length = self.length if self.length is not None else block
        if length % block:
            raise ValueError(f"L={length} is not a multiple of the scheme block length {block}")
        return length

    @classmethod
    def from_dict(cls, obj: dict) -> ExperimentSpec:
        obj = dict(obj)
        if "lambda" in obj:
            obj["lam"] = obj.pop("lambda")
        if "L" in obj:
            obj["length"] = obj.pop("L")
        if "gamma" in obj:
            obj["omega"] = [obj.pop("gamma")]
        return cls(**obj)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    measured_rate: Fraction
    download_symbols: int
    capacity_report: CapacityReport
    decode_ok: bool
    retrieved_indices: dict[int, tuple[int, ...]]
    s: int
    transcripts: tuple[Transcript, ...] = field(repr=False, default=())

    @property
    def rate_matches_lower(self) -> bool:
        lower = self.capacity_report.lower
        if isinstance(lower, Fraction):
            return self.measured_rate == lower
        return abs(float(self.measured_rate) - lower) < TOLERANCE

    @property
    def verdict(self) -> str:
        ok = self.decode_ok and self.measured_rate <= self.capacity_report.upper and self.rate_matches_lower
        return "PASS" if ok else "FAIL"

    def as_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "s": self.s,
            "measured_rate": fmt_value(self.measured_rate),
            "download_symbols": self.download_symbols,
            "capacity": {k: fmt_value(v) for k, v in self.capacity_report.as_dict().items()},
            "decode_ok": self.decode_ok,
            "retrieved_indices": {str(c): list(v) for c, v in self.retrieved_indices.items()},
            "verdict": self.verdict,
        }


def _endpoints(stack: ExitStack, dataset: Dataset, n: int, transport: str):
    if transport == "inproc":
        return [InProcessEndpoint(DatabaseServer(dataset, f"db{j + 1}")) for j in range(n)]
    servers = [stack.enter_context(TcpDatabaseServer(dataset, ("127.0.0.1", 0), f"db{j + 1}")) for j in range(n)]
    return [TcpEndpoint(*srv.address) for srv in servers]


class _PinnedPpir:
    def __init__(self, n, gamma, delta, omega):
        self._client = PpirClient(n, gamma, delta)
        self._desired = omega[0]

    def length(self, eta):
        return self._client.length

    def prepare(self, omega, lam, rng, shuffle, s, offset):
        return self._client.prepare(self._desired, rng, shuffle, s, offset)

    def decode(self, transcript, plan):
        return {self._desired: self._client.decode(transcript, plan)}


def retrieve(
    dataset: Dataset,
    n: int,
    omega: Sequence[int],
    lam: int,
    endpoints,
    rng: random.Random,
    s: Optional[int] = None,
    shuffle: bool = True,
    scheme: Optional[str] = None,
) -> tuple[int, dict[int, tuple[tuple[int, ...], ...]], tuple[Transcript, ...]]:
    """Retrieve every block of the desired messages over ``endpoints``.

    The same s serves all blocks (it fixes which members stand behind the
    candidates); each block gets fresh permutations. ``scheme="ppir"`` pins the
    PPIR construction even where the MDS scheme would also apply (Γ ≤ 2).
    Returns (s, messages, transcripts).
    """
    gamma = dataset.classification.gamma_total
    req = MppirRequest.make(n, gamma, omega, lam)
    if s is None:
        s = rng.randint(1, dataset.delta)
    if req.regime == "single_server":
        queries = single_server_queries(gamma, dataset.length)
        tr = orchestrate("single_server", s, lam, dataset.p, (queries,), endpoints)
        return s, decode_single_server(tr, req.omega, dataset.length), (tr,)
    if scheme == "ppir":
        client = _PinnedPpir(n, gamma, dataset.delta, req.omega)
    else:
        client = MppirClient(n, gamma, dataset.delta, dataset.p)
    block = client.length(req.eta)
    if dataset.length % block:
        raise ValueError(f"L={dataset.length} is not a multiple of the block length {block}")
    parts: dict[int, list] = {c: [[] for _ in range(lam)] for c in req.omega}
    transcripts = []
    for b in range(dataset.length // block):
        plan = client.prepare(req.omega, lam, rng, shuffle, s, offset=b * block)
        tr = orchestrate(scheme_name(plan), s, lam, dataset.p, plan.queries, endpoints)
        transcripts.append(tr)
        for c, msgs in client.decode(tr, plan).items():
            for k, m in enumerate(msgs):
                parts[c][k].extend(m)
    messages = {c: tuple(tuple(m) for m in v) for c, v in parts.items()}
    return s, messages, tuple(transcripts)


def run_experiment(spec: ExperimentSpec, repetition: int = 0, dataset: Optional[Dataset] = None) -> ExperimentResult:
    """Run one retrieval and check it against ground truth and the capacity bounds.

    Raises RegimeUnsupported (with ``.capacity`` set) when no scheme executes.
    """
    report = capacity_report(spec.problem)
    if spec.n > 1 and 1 < spec.eta and 2 * spec.eta < spec.gamma_total:
        raise RegimeUnsupported(
            f"no executable scheme for n={spec.n}, gamma={spec.gamma_total}, eta={spec.eta}", report
        )
    length = spec.resolved_length()
    if dataset is None:
        dataset = build_dataset(spec.sizes, length, spec.p, spec.seed)
    rng = random.Random(f"{spec.seed}:{repetition}")
    with ExitStack() as stack:
        endpoints = _endpoints(stack, dataset, spec.n, spec.transport)
        s, messages, transcripts = retrieve(
            dataset, spec.n, spec.omega, spec.lam, endpoints, rng, spec.s, spec.shuffle, spec.scheme
        )
    expected = resolve_candidates(dataset.classification, s, spec.lam)
    decode_ok = all(
        messages[c][k] == dataset.message(m) for c in spec.omega for k, m in enumerate(expected[c - 1])
    )
    retrieved = {}
    for c in spec.omega:
        try:
            retrieved[c] = tuple(identify(dataset, c, m) for m in messages[c])
        except LookupError:
            decode_ok = False
            retrieved[c] = ()
    download = sum(t.download_symbols for t in transcripts)
    rate = Fraction(spec.lam * spec.eta * dataset.length, download)
    return ExperimentResult(spec, rate, download, report, decode_ok, retrieved, s, transcripts)


def run_repetitions(spec: ExperimentSpec, workers: int = 4) -> list[ExperimentResult]:
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: run_experiment(spec, r), range(spec.repetitions)))


# -- tables ------------------------------------------------------------------


def fmt_value(v) -> object:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return v


def table_row(item) -> dict:
    """Column dict for an ExperimentResult or a bare CapacityReport."""
    if isinstance(item, ExperimentResult):
        rep, measured, verdict = item.capacity_report, item.measured_rate, item.verdict
    else:
        rep, measured, verdict = item, "", ""
    cfg = rep.config
    values = (cfg.n, cfg.gamma_total, cfg.eta, cfg.lam, rep.upper, rep.lower, measured, verdict)
    return {k: fmt_value(v) for k, v in zip(COLUMNS, values)}


def emit_table(results: Iterable, fmt: str = "csv") -> bytes:
    rows = [table_row(r) for r in results]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue().encode()
    if fmt == "json":
        return (json.dumps(rows, indent=2) + "\n").encode()
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        lines += ["| " + " | ".join(str(r[c]) for c in COLUMNS) + " |" for r in rows]
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown table format {fmt!r}")


def parse_value(text: str):
    """Inverse of :func:`fmt_value` for table cells."""
    if text == "":
        return ""
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        return Fraction(text)
    try:
        return float(text)
    except ValueError:
        return text
