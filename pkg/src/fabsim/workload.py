"""Request generation and trace replay.

Patterns: sequential stream, uniform random, and hot/cold skewed.  The
generator draws warm-up requests from one RNG stream and measured
requests from an independent one, so changing the warm-up count does not
perturb the measured request sequence.
"""

from dataclasses import dataclass, field

from .engine import make_rng

CACHELINE = 64

READ = "R"
WRITE = "W"


class TraceError(Exception):
    """Unreadable or malformed trace file."""


@dataclass
class PatternSpec:
    kind: str = "uniform"             # stream | uniform | skewed | trace
    footprint_bytes: int = 1 << 20
    hot_fraction: float = 0.10
    hot_prob: float = 0.90
    read_ratio: float = 1.0
    total_requests: int = 4000
    warmup_requests: int = 4000
    trace_path: str = ""

    def __post_init__(self):
        for name in ("hot_fraction", "hot_prob", "read_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        if self.kind not in ("stream", "uniform", "skewed", "trace"):
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.footprint_bytes < CACHELINE:
            raise ValueError("footprint smaller than one cacheline")


@dataclass(frozen=True)
class TraceRecord:
    op: str         # READ or WRITE
    address: int    # aligned down to 64 B on load


class RequestStream:
    """Per-requester request source.

    Yields (op, address) pairs; addresses are cacheline aligned.  The
    warm-up portion and the measured portion use independent RNG streams
    derived from (seed, stream_id).
    """

    def __init__(self, spec, seed, stream_id=0, trace=None):
        self.spec = spec
        self._warm_rng = make_rng(seed, 2 * stream_id)
        self._meas_rng = make_rng(seed, 2 * stream_id + 1)
        self._emitted = 0
        self._stream_pos = 0
        self._trace = trace
        if spec.kind == "trace" and trace is None:
            raise TraceError("trace pattern requires a loaded trace")

    @property
    def total(self):
        n = self.spec.warmup_requests + self.spec.total_requests
        if self._trace is not None:
            return min(n, len(self._trace))
        return n

    def has_next(self):
        return self._emitted < self.total

    def is_warmup(self, index):
        return index < self.spec.warmup_requests

    def next_request(self):
        """Returns (op, address, measured)."""
        if not self.has_next():
            raise StopIteration("request stream exhausted")
        idx = self._emitted
        self._emitted += 1
        measured = not self.is_warmup(idx)
        if self._trace is not None:
            rec = self._trace[idx]
            return rec.op, rec.address, measured

        rng = self._meas_rng if measured else self._warm_rng
        spec = self.spec
        lines = spec.footprint_bytes // CACHELINE
        if spec.kind == "stream":
            addr = (self._stream_pos % lines) * CACHELINE
            self._stream_pos += 1
        elif spec.kind == "uniform":
            addr = rng.randrange(lines) * CACHELINE
        else:  # skewed
            hot_lines = max(1, int(lines * spec.hot_fraction))
            if rng.random() < spec.hot_prob:
                addr = rng.randrange(hot_lines) * CACHELINE
            else:
                cold = lines - hot_lines
                addr = (hot_lines + rng.randrange(cold)) * CACHELINE if cold else 0
        op = READ if rng.random() < spec.read_ratio else WRITE
        return op, addr, measured


def load_trace(path):
    """Load a text trace: one `<R|W> <hex address>` record per line,
    `#` comments and blank lines ignored.  Addresses align down to 64 B.

    Returns (records, malformed_count); raises TraceError if the file is
    unreadable or more than 1% of non-empty lines are malformed.
    """
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise TraceError(f"cannot read trace {path}: {e}") from e

    records = []
    malformed = 0
    considered = 0
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        considered += 1
        parts = line.split()
        if len(parts) != 2 or parts[0] not in (READ, WRITE):
            malformed += 1
            continue
        try:
            addr = int(parts[1], 16)
        except ValueError:
            malformed += 1
            continue
        records.append(TraceRecord(parts[0], addr & ~(CACHELINE - 1)))
    if considered and malformed / considered > 0.01:
        raise TraceError(
            f"{malformed}/{considered} malformed lines in {path} (>1%)")
    return records, malformed


def save_trace(path, records):
    with open(path, "w") as f:
        for rec in records:
            f.write(f"{rec.op} 0x{rec.address:x}\n")


def mix_degree(records):
    """min(read fraction, write fraction) of a record list."""
    if not records:
        raise TraceError("mix degree of an empty trace is undefined")
    reads = sum(1 for r in records if r.op == READ)
    return min(reads, len(records) - reads) / len(records)


def synthetic_mixed_trace(n, mix, footprint_bytes, seed, stream_id=0):
    """Uniform-random trace with an exact read/write mix degree.

    Writes make up round(n * mix) records, shuffled deterministically, so
    mix_degree(result) == mix up to rounding.
    """
    rng = make_rng(seed, 7000 + stream_id)
    lines = footprint_bytes // CACHELINE
    n_writes = round(n * mix)
    ops = [WRITE] * n_writes + [READ] * (n - n_writes)
    rng.shuffle(ops)
    return [TraceRecord(op, rng.randrange(lines) * CACHELINE) for op in ops]
