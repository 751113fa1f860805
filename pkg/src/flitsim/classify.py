"""Ground-truth classification of the stream an endpoint forwards upward.

The oracle stream is the sender's data in order, identified by index.
Observed deliveries are compared against it as they happen:

* ``fail_data``: a delivered payload whose digest differs from the oracle;
* ``gap``: an oracle entry overtaken by a later one (counted once per
  skipped entry, whether or not it arrives later);
* ``duplicate``: an entry delivered again;
* ``reorder``: an entry delivered after a later entry of the same CQID.

``fail_order`` is the sum of the three ordering kinds. Entries never
delivered and never overtaken are ``undelivered``, not gaps.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Sequence


def digest(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


@dataclass(frozen=True, slots=True)
class StreamRecord:
    id: int
    cqid: int | None = None
    digest: bytes = b""
    label: str | None = None


@dataclass
class FailureCounts:
    fail_data: int = 0
    gap: int = 0
    duplicate: int = 0
    reorder: int = 0
    undelivered: int = 0

    @property
    def fail_order(self) -> int:
        return self.gap + self.duplicate + self.reorder

    def as_dict(self) -> dict[str, int]:
        out = asdict(self)
        out["fail_order"] = self.fail_order
        return out


class StreamClassifier:
    """Incremental classifier over oracle indices ``0..n-1``."""

    def __init__(self, n: int, cqid_of: Callable[[int], int | None] = lambda i: None):
        self.n = n
        self.cqid_of = cqid_of
        self.delivered = bytearray(n)
        self.frontier = 0  # one past the highest index delivered so far
        self.max_by_cqid: dict[int, int] = {}
        self.counts = FailureCounts()
        self.unique_delivered = 0

    def observe(self, index: int, data_ok: bool = True) -> None:
        if not 0 <= index < self.n:
            raise ValueError(f"delivered index {index} is not in the oracle stream")
        c = self.counts
        if not data_ok:
            c.fail_data += 1
        if self.delivered[index]:
            c.duplicate += 1
            return
        self.delivered[index] = 1
        self.unique_delivered += 1
        if index > self.frontier:
            c.gap += index - self.frontier
        if index >= self.frontier:
            self.frontier = index + 1
        cq = self.cqid_of(index)
        if cq is not None:
            latest = self.max_by_cqid.get(cq, -1)
            if latest > index:
                c.reorder += 1
            else:
                self.max_by_cqid[cq] = index

    def finish(self) -> FailureCounts:
        # undelivered tail entries that nothing overtook
        self.counts.undelivered = self.n - self.frontier
        return self.counts


def classify_stream(oracle: Sequence[StreamRecord], observed: Iterable[StreamRecord]) -> FailureCounts:
    """Compare a delivered stream against the oracle it should equal."""
    position = {rec.id: i for i, rec in enumerate(oracle)}
    clf = StreamClassifier(len(oracle), lambda i: oracle[i].cqid)
    for rec in observed:
        try:
            i = position[rec.id]
        except KeyError:
            raise ValueError(f"observed id {rec.id!r} is not in the oracle") from None
        clf.observe(i, rec.digest == oracle[i].digest)
    return clf.finish()
