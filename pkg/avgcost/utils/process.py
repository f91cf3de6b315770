from __future__ import annotations

from functools import wraps
import gc
import logging
import sys

import psutil

from .core import Namespace, fn_name
from .os import to_mb
from .time import Timer

log = logging.getLogger(__name__)

__no_export = set(dir())  # all variables defined above this are not exported


class MemoryProfiler:

    def __init__(self, process=None, enabled=True):
        self.ps = (process or psutil.Process()) if enabled else None
        self.before_mem = None
        self.after_mem = None

    def __enter__(self):
        if self.ps is not None:
            self.before_mem = self.ps.memory_info()
        return self

    def __exit__(self, *args):
        if self.ps is not None:
            self.after_mem = self.ps.memory_info()

    def usage(self, before=False):
        if self.ps is None:
            return None
        mem = (self.before_mem if before
               else self.after_mem if self.after_mem is not None
               else self.ps.memory_info())
        res = Namespace(resident=to_mb(mem.rss), virtual=to_mb(mem.vms))
        if not before:
            res.resident_diff = to_mb(mem.rss - self.before_mem.rss)
            res.virtual_diff = to_mb(mem.vms - self.before_mem.vms)
        return res


def obj_size(o):
    if o is None:
        return 0
    return (o.nbytes if hasattr(o, 'nbytes')     # numpy arrays
            else o.memory_usage(deep=True).sum() if hasattr(o, 'memory_usage')  # pandas frames
            else sys.getsizeof(o, -1))


def profile(logger=log, log_level=None, duration=True, memory=True):
    """
    logs the duration and memory footprint of the decorated function,
    only when `logger` is enabled for `log_level` (TRACE by default).
    """
    def decorator(fn):

        @wraps(fn)
        def profiler(*args, **kwargs):
            level = log_level or getattr(logging, 'TRACE', logging.DEBUG)
            if not logger.isEnabledFor(level):
                return fn(*args, **kwargs)

            name = fn_name(fn)
            with MemoryProfiler(enabled=memory) as m:
                if memory:
                    mem = m.usage(before=True)
                    logger.log(level, "[PROFILING] `%s` memory before; resident: %.2f MB, virtual: %.2f MB; gc count: %s",
                               name, mem.resident, mem.virtual, gc.get_count())
                with Timer(enabled=duration) as t:
                    ret = fn(*args, **kwargs)
            if duration:
                logger.log(level, "[PROFILING] `%s` executed in %.3fs.", name, t.duration)
            if memory:
                mem = m.usage()
                logger.log(level, "[PROFILING] `%s` memory after; resident: %+.2f MB/%.2f MB, virtual: %+.2f MB/%.2f MB; returned %.3f MB.",
                           name, mem.resident_diff, mem.resident, mem.virtual_diff, mem.virtual, to_mb(obj_size(ret)))
            return ret

        return profiler

    return decorator


__all__ = [s for s in dir() if not s.startswith('_') and s not in __no_export]
