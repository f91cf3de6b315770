"""
**job** module handles the fan-out of independent computations:

- consistent exception handling and logging
- 2 job runners are implemented:
  - SimpleJobRunner runs the jobs sequentially.
  - ThreadPoolJobRunner runs the jobs in a pool of threads.
  Both return the results in the order the jobs were submitted.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from enum import Enum, auto
import logging
from typing import Any, Callable, List, Optional

from .utils import Namespace, Timer

log = logging.getLogger(__name__)


class State(Enum):
    created = auto()
    running = auto()
    completed = auto()
    failed = auto()


class JobError(Exception):
    pass


class InvalidStateError(JobError):
    pass


class Job:

    state_machine = [
        (None,              [State.created]),
        (State.created,     [State.running]),
        (State.running,     [State.completed, State.failed]),
        (State.completed,   None),
        (State.failed,      None),
    ]

    @classmethod
    def is_state_transition_ok(cls, old_state: State | None, new_state: State):
        allowed = next((head for tail, head in cls.state_machine if tail == old_state), None)
        return bool(allowed) and new_state in allowed

    def __init__(self, name: str, fn: Callable[[], Any], raise_on_failure: bool = True):
        """
        :param name: used in logs and in the result namespace.
        :param fn: the computation, called without arguments.
        :param raise_on_failure: bool (default=True)
            If True, log and raise any Exception that caused a job failure.
            If False, only log the exception, and produce a None result.
        """
        self.name = name
        self.fn = fn
        self.raise_on_failure = raise_on_failure
        self.state: State | None = None
        self.set_state(State.created)

    def set_state(self, state: State):
        if not self.is_state_transition_ok(self.state, state):
            raise InvalidStateError(f"Job `{self.name}` can't switch from state {self.state} to {state}.")
        log.log(getattr(logging, 'TRACE', logging.DEBUG), "Job `%s` state: %s.", self.name, state.name)
        self.state = state

    def start(self) -> Namespace:
        self.set_state(State.running)
        with Timer() as t:
            try:
                result = self.fn()
            except Exception as e:
                self.set_state(State.failed)
                log.exception("Job `%s` failed with error: %s", self.name, str(e))
                if self.raise_on_failure:
                    raise
                return Namespace(name=self.name, result=None, duration=t.duration)
        self.set_state(State.completed)
        log.debug("Job `%s` executed in %.3f seconds.", self.name, t.duration)
        return Namespace(name=self.name, result=result, duration=t.duration)

    def __str__(self):
        return f"Job({self.name}, {self.state.name if self.state else None})"


class JobRunner:

    def __init__(self, jobs: List[Job], on_new_result: Optional[Callable] = None):
        self.jobs = list(jobs)
        self.results: List[Namespace] = []
        self._on_new_result = on_new_result

    def start(self) -> List[Namespace]:
        with Timer() as t:
            self._run()
        log.debug("%s ran %s jobs in %.3f seconds.", type(self).__name__, len(self.jobs), t.duration)
        return self.results

    def _add_result(self, result: Namespace):
        self.results.append(result)
        if self._on_new_result is not None:
            self._on_new_result(result)

    def _run(self):
        pass


class SimpleJobRunner(JobRunner):

    def _run(self):
        for job in self.jobs:
            self._add_result(job.start())


class ThreadPoolJobRunner(JobRunner):

    def __init__(self, jobs: List[Job], parallel_jobs: int = 2, on_new_result: Optional[Callable] = None):
        super().__init__(jobs, on_new_result=on_new_result)
        self.parallel_jobs = max(1, parallel_jobs)

    def _run(self):
        with ThreadPoolExecutor(max_workers=self.parallel_jobs, thread_name_prefix="avgcost_job_") as executor:
            # `map` yields in submission order whatever the completion order.
            for result in executor.map(lambda job: job.start(), self.jobs):
                self._add_result(result)


def run_jobs(jobs: List[Job], parallel_jobs: int = 1) -> List[Namespace]:
    runner = (SimpleJobRunner(jobs) if parallel_jobs <= 1 or len(jobs) <= 1
              else ThreadPoolJobRunner(jobs, parallel_jobs=parallel_jobs))
    return runner.start()
