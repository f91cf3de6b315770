from __future__ import annotations

import logging
import os

from ruamel.yaml import YAML

from .core import Namespace, json_load
from .os import normalize_path

log = logging.getLogger(__name__)

__no_export = set(dir())  # all variables defined above this are not exported


def _as_namespace(node):
    if isinstance(node, dict):
        return Namespace({k: _as_namespace(v) for k, v in node.items()})
    if isinstance(node, list):
        return [_as_namespace(v) for v in node]
    return node


def config_load(path, verbose=False) -> Namespace:
    """
    loads a yaml (or json) config file as a Namespace tree.
    A missing file is not an error: it yields an empty Namespace so that optional user configs merge as no-ops.
    """
    path = normalize_path(path)
    if not os.path.isfile(path):
        log.log(logging.WARNING if verbose else logging.DEBUG, "No config file at `%s`, ignoring it.", path)
        return Namespace()

    log.log(logging.INFO if verbose else logging.DEBUG, "Loading config file `%s`.", path)
    if path.lower().endswith('.json'):
        return json_load(path, as_namespace=True)
    with open(path, 'r') as file:
        return _as_namespace(YAML(typ='safe', pure=True).load(file)) or Namespace()


__all__ = [s for s in dir() if not s.startswith('_') and s not in __no_export]
