from __future__ import annotations

import datetime as dt
import logging
import time

log = logging.getLogger(__name__)

__no_export = set(dir())  # all variables defined above this are not exported


def timestamp(when: dt.datetime | None = None) -> str:
    """compact UTC timestamp used in log file names, e.g. ``20240131T154502``."""
    when = when or dt.datetime.now(dt.timezone.utc)
    return when.strftime("%Y%m%dT%H%M%S")


class Timer:
    """wall clock of a ``with`` block; ``duration`` is live while the block runs."""

    def __init__(self, clock=time.perf_counter, enabled=True):
        self._clock = clock if enabled else (lambda: 0.0)
        self.start = 0.0
        self.stop: float | None = None

    def __enter__(self):
        self.start = self._clock()
        self.stop = None
        return self

    def __exit__(self, *args):
        self.stop = self._clock()

    @property
    def duration(self) -> float:
        end = self.stop if self.stop is not None else self._clock()
        return end - self.start


__all__ = [s for s in dir() if not s.startswith('_') and s not in __no_export]
