"""Round-synchronous simulator for the Massively Parallel Computation model.

A :class:`Cluster` owns a pool of :class:`Machine` objects, each limited to
``S`` words.  Algorithms advance the cluster with :meth:`Cluster.run_round`:
every participating machine runs a local step that reads its inbox and
emits ``(destination, record)`` messages, then the simulator delivers the
messages at the barrier and checks the space limits.

Word model: an ``int``/``float``/``bool`` is one word, a tuple or list costs the sum
of its elements, strings and ``None`` are free (constant-size tags).
"""

from __future__ import annotations
import heapq

import logging
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Any, Callable, Iterable, Optional

log = logging.getLogger(__name__)


def words(rec: Any) -> int:
    """Word cost of a record under the simulator's word model."""
    t = type(rec)
    if t is tuple or t is list:
        n = 0
        for x in rec:
            tx = type(x)
            if tx is int or tx is float or tx is bool:
                n += 1
            elif tx is tuple or tx is list or tx is frozenset:
                n += words(x)
            elif x is None or tx is str:
                pass
            else:
                n += 1
        return n
    if t is frozenset:
        return len(rec)
    if rec is None or t is str:
        return 0
    return 1


def block_words(block: Iterable[Any]) -> int:
    return sum(map(words, block))


class Batch(list):
    """A bundle of records sent as one message; ``w`` is its precomputed word cost."""

    __slots__ = ("w",)

    def __init__(self, records: Iterable[Any] = (), w: Optional[int] = None):
        super().__init__(records)
        self.w = block_words(self) if w is None else w


class SpaceExceeded(RuntimeError):
    """A machine held or sent more than ``S`` words: the algorithm broke the model."""

    def __init__(self, machine: int, used: int, limit: int, where: str = "store"):
        super().__init__(f"machine {machine}: {where} uses {used} words > S={limit}")
        self.machine = machine
        self.used = used
        self.limit = limit
        self.where = where


@dataclass(frozen=True)
class MpcConfig:
    """Model parameters: ``S`` words per machine, ``M`` initial machines."""

    S: int
    M: int = 1
    delta: Optional[float] = None
    epsilon: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.S < 1:
            raise ValueError(f"S must be >= 1, got {self.S}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass
class RunMetrics:
    rounds: int = 0
    peak_machine_words: int = 0
    total_words: int = 0
    total_messages: int = 0
    peak_live_words: int = 0
    machines_used: int = 0
    success: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def __sub__(self, other: "RunMetrics") -> "RunMetrics":
        return RunMetrics(
            rounds=self.rounds - other.rounds,
            peak_machine_words=self.peak_machine_words,
            total_words=self.total_words,
            total_messages=self.total_messages - other.total_messages,
            peak_live_words=self.peak_live_words,
            machines_used=self.machines_used,
            success=self.success,
        )


class Machine:
    """One simulated machine: a data block, control scratch space and an inbox."""

    __slots__ = ("id", "store", "store_words", "aux", "aux_words", "inbox",
                 "inbox_words", "peak", "resident_peak")

    def __init__(self, mid: int):
        self.id = mid
        self.store: list = []
        self.store_words = 0
        self.aux: dict = {}
        self.aux_words = 0
        self.inbox: list = []
        self.inbox_words = 0
        self.peak = 0
        self.resident_peak = 0

    @property
    def used(self) -> int:
        return self.store_words + self.aux_words + self.inbox_words

    def set_store(self, records: list, w: Optional[int] = None) -> None:
        """Replace the data block during a local step (checked at the barrier)."""
        self.store = records
        self.store_words = block_words(records) if w is None else w

    def take_inbox(self) -> list:
        box = self.inbox
        self.inbox = []
        self.inbox_words = 0
        return box

    def put_aux(self, name: str, value: Any, w: Optional[int] = None) -> None:
        if name in self.aux:
            self.aux_words -= self.aux[name][1]
        w = words(value) if w is None else w
        self.aux[name] = (value, w)
        self.aux_words += w

    def get_aux(self, name: str, default: Any = None) -> Any:
        item = self.aux.get(name)
        return default if item is None else item[0]

    def pop_aux(self, name: str, default: Any = None) -> Any:
        item = self.aux.pop(name, None)
        if item is None:
            return default
        self.aux_words -= item[1]
        return item[0]

    def clear(self) -> None:
        self.store = []
        self.store_words = 0
        self.aux = {}
        self.aux_words = 0
        self.inbox = []
        self.inbox_words = 0


Step = Callable[[Machine], Optional[Iterable[tuple]]]


class Cluster:
    """A pool of machines driven from a single control flow.

    The pool starts with ``cfg.M`` machines and grows on :meth:`allocate`
    when algorithms need more (``metrics.machines_used`` records the high
    water mark).  Released machines are reused before new ones are created.
    """

    def __init__(self, cfg: MpcConfig):
        self.cfg = cfg
        self.S = cfg.S
        self.machines: list[Machine] = [Machine(i) for i in range(cfg.M)]
        # free machines as a heap on (-resident peak, id)
        self._free: list[tuple[int, int]] = [(0, i) for i in range(cfg.M)]
        self._busy: set[int] = set()
        self.metrics = RunMetrics(machines_used=cfg.M)
        self.globals: dict = {}
        self.round_log: list[tuple[str, int]] = []
        self._phase = "run"

    def __len__(self) -> int:
        return len(self.machines)

    # -- allocation ------------------------------------------------------
    def allocate(self, k: int) -> list[int]:
        """Hand out ``k`` empty machines.

        Released machines with the highest recorded peak go first, so reuse
        never raises a machine's peak needlessly.
        """
        out = []
        for _ in range(k):
            if self._free:
                out.append(heapq.heappop(self._free)[1])
            else:
                mid = len(self.machines)
                self.machines.append(Machine(mid))
                out.append(mid)
        self._busy.update(out)
        self.metrics.machines_used = max(self.metrics.machines_used,
                                         len(self.machines) - len(self._free))
        return out

    def release(self, ids: Iterable[int]) -> None:
        for mid in ids:
            m = self.machines[mid]
            m.clear()
            self._busy.discard(mid)
            heapq.heappush(self._free, (-m.resident_peak, mid))

    # -- local state -----------------------------------------------------
    def set_store(self, mid: int, records: list, w: Optional[int] = None) -> None:
        """Replace a machine's data block after local computation."""
        m = self.machines[mid]
        m.store = records
        m.store_words = block_words(records) if w is None else w
        self._check(m)

    def _check(self, m: Machine) -> None:
        used = m.used
        if used > self.S:
            self.metrics.success = False
            raise SpaceExceeded(m.id, used, self.S)
        if used > m.peak:
            m.peak = used
            if used > self.metrics.peak_machine_words:
                self.metrics.peak_machine_words = used
        resident = m.store_words + m.aux_words
        if resident > m.resident_peak:
            self.metrics.total_words += resident - m.resident_peak
            m.resident_peak = resident

    def local(self, fn: Callable[[Machine], None], machines: Iterable[int]) -> None:
        """Run a purely local step (no communication, no round) and re-check space."""
        for mid in machines:
            m = self.machines[mid]
            fn(m)
            self._check(m)

    def phase(self, name: str) -> "_Phase":
        """Label the rounds run inside a ``with`` block (for reports)."""
        return _Phase(self, name)

    # -- the round engine --------------------------------------------------
    def run_round(self, step: Step, machines: Optional[Iterable[int]] = None,
                  overflow: str = "raise") -> set[int]:
        """Run one synchronous round and return the ids that overflowed.

        ``step(machine)`` consumes the machine's inbox and yields
        ``(dest, record)`` pairs.  With ``overflow="drop"`` a recipient whose
        delivered words would exceed ``S`` loses its whole delivery instead of
        aborting the run; otherwise :class:`SpaceExceeded` is raised.
        """
        ids = range(len(self.machines)) if machines is None else machines
        outgoing: dict[int, list] = defaultdict(list)
        incoming_words: dict[int, int] = defaultdict(int)
        sent_total = 0
        touched = []
        S = self.S
        for mid in ids:
            m = self.machines[mid]
            msgs = step(m)
            m.inbox = []
            m.inbox_words = 0
            touched.append(m)
            if not msgs:
                continue
            sent = 0
            for dest, rec in msgs:
                if type(rec) is Batch:
                    w = rec.w
                    outgoing[dest].extend(rec)
                else:
                    w = words(rec)
                    outgoing[dest].append(rec)
                sent += w
                incoming_words[dest] += w
            if sent > S:
                self.metrics.success = False
                raise SpaceExceeded(mid, sent, S, "outbox")
            sent_total += sent
        dropped: set[int] = set()
        for dest, recs in outgoing.items():
            if dest >= len(self.machines):
                raise IndexError(f"message to unknown machine {dest}")
            m = self.machines[dest]
            w = incoming_words[dest]
            if overflow == "drop" and m.store_words + m.aux_words + m.inbox_words + w > S:
                dropped.add(dest)
                continue
            m.inbox.extend(recs)
            m.inbox_words += w
            touched.append(m)
        for m in touched:
            self._check(m)
        self.metrics.rounds += 1
        self.metrics.total_messages += sent_total
        ms = self.machines
        live = sum(ms[i].used for i in self._busy.union(m.id for m in touched))
        if live > self.metrics.peak_live_words:
            self.metrics.peak_live_words = live
        self.round_log.append((self._phase, sent_total))
        return dropped

    def snapshot(self) -> RunMetrics:
        return RunMetrics(**asdict(self.metrics))


class _Phase:
    def __init__(self, cluster: Cluster, name: str):
        self.cluster = cluster
        self.name = name
        self.prev = None
        self.rounds = 0

    def __enter__(self):
        self.prev = self.cluster._phase
        self.cluster._phase = self.name
        self.start = self.cluster.metrics.rounds
        return self

    def __exit__(self, *exc):
        self.cluster._phase = self.prev
        self.rounds = self.cluster.metrics.rounds - self.start
        return False


def new_cluster(cfg: MpcConfig) -> Cluster:
    return Cluster(cfg)
