"""Phased, multi-threaded key search.

Candidates are streamed in order and cut into chunks; worker threads run the
compiled batch kernel (which releases the GIL) on each chunk. The winner is the
confirmed candidate with the lowest (phase, index), so the outcome does not
depend on worker count or scheduling. Once a hit is known, chunks that start
after it are no longer submitted; chunks before it always finish.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .. import container
from ..cipher import _kernels, key_schedule
from ..errors import NotFmx
from ..lcg import DeviceIdentity
from .detector import PAYLOAD_OFFSET, PlaintextDetector
from .families import PATTERN_FAMILIES, CandidateFamily, FamilyParams, generate

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 2048


@dataclass(frozen=True)
class Phase:
    name: str
    families: tuple[CandidateFamily, ...]
    budget: int
    workers: int = 8
    params: FamilyParams = FamilyParams()


@dataclass(frozen=True)
class AttackPlan:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        if not self.phases:
            raise ValueError("attack plan needs at least one phase")


def default_plan(workers: int = 8, pattern_budget: int = 10_000,
                 extended_budget: int = 10_000_000, exhaustive_budget: int = 10_000_000) -> AttackPlan:
    """Pattern families, then 1-3 char suffixes, then 4-6 char suffixes."""
    return AttackPlan((
        Phase("pattern", PATTERN_FAMILIES, pattern_budget, workers),
        Phase("extended", (CandidateFamily.SUFFIX_BRUTE_FORCE,), extended_budget, workers,
              FamilyParams(suffix_min_len=1, suffix_max_len=3)),
        Phase("exhaustive", (CandidateFamily.SUFFIX_BRUTE_FORCE,), exhaustive_budget, workers,
              FamilyParams(suffix_min_len=4, suffix_max_len=6)),
    ))


@dataclass(frozen=True)
class Found:
    key: bytes
    phase: int  # 1-based
    candidate_index: int  # 0-based within the phase
    family: CandidateFamily


@dataclass(frozen=True)
class Exhausted:
    total_tested: int


@dataclass
class SearchReport:
    outcome: Found | Exhausted
    tested_per_family: dict[str, int] = field(default_factory=dict)
    total_tested: int = 0
    weak_accepts: int = 0
    elapsed: float = 0.0

    @property
    def found(self) -> bool:
        return isinstance(self.outcome, Found)

    def to_dict(self) -> dict:
        doc: dict = {"total_tested": self.total_tested,
                     "tested_per_family": dict(self.tested_per_family),
                     "weak_accepts": self.weak_accepts,
                     "elapsed": self.elapsed}
        if isinstance(self.outcome, Found):
            doc["outcome"] = {"status": "found", "key": self.outcome.key.hex(),
                              "phase": self.outcome.phase,
                              "candidate_index": self.outcome.candidate_index,
                              "family": self.outcome.family.value}
        else:
            doc["outcome"] = {"status": "exhausted", "total_tested": self.outcome.total_tested}
        return doc


class _Chunk:
    __slots__ = ("start", "keys", "families")

    def __init__(self, start: int, keys: list[bytes], families: list[CandidateFamily]):
        self.start = start
        self.keys = keys
        self.families = families


@dataclass
class _ChunkResult:
    start: int
    tested: int
    per_family: Counter
    weak: int
    hit: int | None  # absolute index


class _Target:
    """Immutable view of the file shared by all workers."""

    def __init__(self, data: bytes, detector: PlaintextDetector):
        if not container.detect(data):
            raise NotFmx("missing FMX magic")
        self.data = bytes(data)
        self.detector = detector
        self.searchable = len(data) >= PAYLOAD_OFFSET + 8
        block = self.data[PAYLOAD_OFFSET:PAYLOAD_OFFSET + 8].ljust(8, b"\x00")
        self.l_in = int.from_bytes(block[:4], "big")
        self.r_in = int.from_bytes(block[4:], "big")
        self.accept = np.zeros(256, dtype=bool)
        self.accept[list(detector.first_byte_accept)] = True

    def first_bytes(self, keys: list[bytes]) -> np.ndarray:
        n = len(keys)
        width = max(len(k) for k in keys)
        mat = np.zeros((n, width), dtype=np.uint8)
        lengths = np.empty(n, dtype=np.int64)
        if all(len(k) == width for k in keys):
            mat[:] = np.frombuffer(b"".join(keys), dtype=np.uint8).reshape(n, width)
            lengths[:] = width
        else:
            for i, k in enumerate(keys):
                mat[i, :len(k)] = np.frombuffer(k, dtype=np.uint8)
                lengths[i] = len(k)
        out = np.empty(n, dtype=np.uint64)
        _kernels.decrypt_first_block_batch(mat, lengths, _kernels.INIT_STATE,
                                           self.l_in, self.r_in, out)
        return (out >> np.uint64(56)).astype(np.uint8)

    def run_chunk(self, chunk: _Chunk) -> _ChunkResult:
        weak = 0
        hit = None
        if self.searchable:
            lead = self.first_bytes(chunk.keys)
            for i in np.flatnonzero(self.accept[lead]):
                if self.detector.confirm(key_schedule(chunk.keys[i]), self.data):
                    hit = chunk.start + int(i)
                    break
                weak += 1
        return _ChunkResult(chunk.start, len(chunk.keys), Counter(f.value for f in chunk.families), weak, hit)


def _labelled(phase: Phase, identity: DeviceIdentity) -> Iterator[tuple[bytes, CandidateFamily]]:
    for fam in phase.families:
        for key in generate(fam, identity, phase.params):
            yield key, fam


def _chunks(stream: Iterable[tuple[bytes, CandidateFamily]], budget: int, size: int) -> Iterator[_Chunk]:
    it = itertools.islice(stream, budget)
    start = 0
    while True:
        batch = list(itertools.islice(it, size))
        if not batch:
            return
        keys, fams = zip(*batch)
        yield _Chunk(start, list(keys), list(fams))
        start += len(batch)


def _run_phase(target: _Target, phase: Phase, identity: DeviceIdentity,
               chunk_size: int) -> tuple[int | None, list[_ChunkResult], dict[int, tuple[bytes, CandidateFamily]]]:
    workers = max(1, phase.workers)
    size = max(4, min(chunk_size, -(-phase.budget // workers)))
    best: int | None = None
    results: list[_ChunkResult] = []
    keys_by_index: dict[int, tuple[bytes, CandidateFamily]] = {}
    lock = threading.Lock()
    inflight: deque = deque()

    def collect(fut, chunk):
        nonlocal best
        res = fut.result()
        results.append(res)
        if res.hit is not None:
            rel = res.hit - chunk.start
            with lock:
                keys_by_index[res.hit] = (chunk.keys[rel], chunk.families[rel])
                if best is None or res.hit < best:
                    best = res.hit

    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="keysearch") as pool:
        for chunk in _chunks(_labelled(phase, identity), phase.budget, size):
            if best is not None and chunk.start > best:
                break
            inflight.append((pool.submit(target.run_chunk, chunk), chunk))
            while len(inflight) >= 2 * workers:
                collect(*inflight.popleft())
        while inflight:
            collect(*inflight.popleft())
    return best, results, keys_by_index


def run_attack(data: bytes, identity: DeviceIdentity, plan: AttackPlan | None = None,
               detector: PlaintextDetector = PlaintextDetector(),
               chunk_size: int = DEFAULT_CHUNK) -> SearchReport:
    plan = plan or default_plan()
    target = _Target(data, detector)
    report = SearchReport(Exhausted(0))
    per_family: Counter = Counter()
    t0 = time.perf_counter()
    for number, phase in enumerate(plan.phases, start=1):
        log.info("phase %d (%s): families=%s budget=%d workers=%d", number, phase.name,
                 [f.value for f in phase.families], phase.budget, phase.workers)
        best, results, keys = _run_phase(target, phase, identity, chunk_size)
        for res in results:
            per_family.update(res.per_family)
            report.total_tested += res.tested
            report.weak_accepts += res.weak
        if best is not None:
            key, fam = keys[best]
            report.outcome = Found(key, number, best, fam)
            log.info("phase %d: key %s at index %d", number, key.hex(), best)
            break
    else:
        report.outcome = Exhausted(report.total_tested)
    report.tested_per_family = dict(per_family)
    report.elapsed = time.perf_counter() - t0
    return report


def measure_throughput(data: bytes, identity: DeviceIdentity, workers: int = 8,
                       count: int = 200_000, chunk_size: int = DEFAULT_CHUNK) -> tuple[int, float]:
    """Test ``count`` suffix candidates; return (tested, keys per second)."""
    phase = Phase("throughput", (CandidateFamily.SUFFIX_BRUTE_FORCE,), count, workers,
                  FamilyParams(suffix_min_len=1, suffix_max_len=4))
    report = run_attack(data, identity, AttackPlan((phase,)), chunk_size=chunk_size)
    return report.total_tested, report.total_tested / report.elapsed
