"""In-memory registry of streaming estimation sessions.

Each session wraps one :class:`StreamingEstimator`.  A session is sequential
by nature (the recursion is order dependent), so feeds are serialized with a
per-session lock; separate sessions run independently.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..iotools import params_record
from ..pipeline import StreamingEstimator


class UnknownSession(KeyError):
    pass


@dataclass
class Session:
    estimator: StreamingEstimator
    lock: threading.Lock = field(default_factory=threading.Lock)

    def feed_rows(self, rows: list[list[float]]) -> list[dict]:
        records = []
        with self.lock:
            for row in rows:
                out = self.estimator.feed(np.asarray(row, dtype=float))
                if out is not None:
                    t, phi, _ = out
                    records.append(params_record(t, phi, self.estimator.method))
        return records

    def info(self) -> dict:
        est = self.estimator
        return {
            "method": est.method,
            "p": est.p,
            "k": est.k,
            "warmup": est.warmup,
            "samples_consumed": est.t,
            "ready": est.ready,
        }


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, estimator: StreamingEstimator) -> str:
        sid = uuid.uuid4().hex
        with self._lock:
            self._sessions[sid] = Session(estimator=estimator)
        return sid

    def get(self, sid: str) -> Session:
        with self._lock:
            try:
                return self._sessions[sid]
            except KeyError:
                raise UnknownSession(sid) from None

    def delete(self, sid: str) -> None:
        with self._lock:
            if sid not in self._sessions:
                raise UnknownSession(sid)
            del self._sessions[sid]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)
