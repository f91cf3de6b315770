"""
**results** module provides the logic to format and save the artifacts of a run:
traces and reports as CSV (cf. ``write_csv``), summaries as JSON,
and the PASS/FAIL outcome of the invariant checks (cf. ``Check`` and ``CheckSuite``).

All artifacts are written atomically and contain no timestamp,
so that identical configurations produce byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import os
from typing import Any, Callable, List

import pandas as pd

from .utils import Namespace, atomic_write, json_dump, json_load

log = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def is_data_frame(df) -> bool:
    return isinstance(df, pd.DataFrame)


def to_data_frame(obj, columns=None) -> pd.DataFrame:
    if obj is None:
        obj = []
    if isinstance(obj, dict):
        orient = 'columns' if columns is None else 'index'
        return pd.DataFrame.from_dict(obj, columns=columns, orient=orient)
    return pd.DataFrame.from_records(obj, columns=columns)


def read_csv(path, nrows=None, dtype=None) -> pd.DataFrame:
    """
    read csv file to DataFrame.
    :param path: the path to a csv file or a file-like object.
    :param nrows: the number of rows to read, if not specified, all are read.
    """
    return pd.read_csv(path, nrows=nrows, dtype=dtype)


def write_csv(data, path, columns=None, index=False):
    """
    writes `data` with a header row, ',' separator, '.' decimal and 17 significant digits.
    """
    data_frame = data if is_data_frame(data) else to_data_frame(data, columns=columns)
    with atomic_write(path, newline='') as f:
        data_frame.to_csv(f, index=index, float_format=FLOAT_FORMAT, lineterminator='\n')
    log.info("Saved %s rows to `%s`.", len(data_frame), path)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    @property
    def status(self) -> str:
        return 'PASS' if self.passed else 'FAIL'

    def __json__(self):
        return dict(name=self.name, status=self.status, detail=self.detail)


@dataclass
class CheckSuite:
    checks: List[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "") -> Check:
        check = Check(name, bool(passed), detail)
        self.checks.append(check)
        log.log(logging.INFO if check.passed else logging.WARNING, "Check `%s`: %s %s", name, check.status, detail)
        return check

    def run(self, name: str, fn: Callable[[], Any], detail: str = "") -> Check:
        """adds a check from a predicate; a predicate raising an exception counts as a failure."""
        try:
            return self.add(name, fn(), detail)
        except Exception as e:
            log.exception("Check `%s` raised an error.", name)
            return self.add(name, False, f"{detail} {type(e).__name__}: {e}".strip())

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def __json__(self):
        return dict(status='PASS' if self.passed else 'FAIL', checks=self.checks)


class RunArtifacts:
    """the files of one run, all located in a session directory."""

    summary_file = 'summary.json'
    checks_file = 'checks.json'

    def __init__(self, session_dir: str):
        self.session_dir = session_dir

    def path(self, name: str) -> str:
        return os.path.join(self.session_dir, name)

    def save_json(self, name: str, obj) -> str:
        path = self.path(name)
        json_dump(obj, path, style='pretty')
        log.info("Saved `%s`.", path)
        return path

    def save_csv(self, name: str, df) -> str:
        path = self.path(name)
        write_csv(df, path)
        return path

    def save_summary(self, summary) -> str:
        return self.save_json(self.summary_file, summary)

    def save_checks(self, checks: CheckSuite) -> str:
        return self.save_json(self.checks_file, checks)

    def load_summary(self) -> Namespace:
        return json_load(self.path(self.summary_file), as_namespace=True)
