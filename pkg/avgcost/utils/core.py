from ast import literal_eval
from copy import deepcopy
import json
import logging
import math
import pprint
import re

import numpy as np

log = logging.getLogger(__name__)

__no_export = set(dir())  # all variables defined above this are not exported


class Namespace:
    """
    attribute access over a plain dict, used for the configuration tree and the run summaries.
    Missing keys read as None through ``ns[key]`` and ``Namespace.get``.
    """

    printer = pprint.PrettyPrinter(indent=2, compact=True)

    @staticmethod
    def parse(*args, **kwargs):
        """
        builds a Namespace from a flat dict where keys can use dot syntax for nested properties,
        e.g. ``{'solvers.span_tol': '1e-8'}``; string values are literal-evaluated when possible.
        """
        parsed = Namespace()
        nested: dict = {}
        for k, v in dict(*args, **kwargs).items():
            if '.' in k:
                head, tail = k.split('.', 1)
                nested.setdefault(head, {})[tail] = v
                continue
            if isinstance(v, str):
                try:
                    v = literal_eval(v)
                except (ValueError, SyntaxError):
                    pass
            parsed[k] = v
        for k, sub in nested.items():
            parsed[k] = Namespace.parse(sub)
        return parsed

    @staticmethod
    def merge(*namespaces, deep=False):
        """later namespaces override earlier ones; with `deep`, nested namespaces are merged key by key."""
        merged = Namespace()
        for ns in filter(None, namespaces):
            for k, v in ns:
                if deep and isinstance(v, Namespace):
                    merged[k] = Namespace.merge(merged[k], v, deep=True)
                else:
                    merged[k] = v
        return merged

    @staticmethod
    def dict(namespace, deep=True):
        return {k: Namespace.dict(v) if deep and isinstance(v, Namespace) else v for k, v in namespace}

    @staticmethod
    def get(namespace, key, default=None):
        """nested access with dot syntax, e.g. ``Namespace.get(config, 'lqg.horizon')``; never raises."""
        head, _, tail = key.partition('.')
        value = getattr(namespace, head, None)
        if tail:
            return default if value is None else Namespace.get(value, tail, default)
        return default if value is None else value

    def __init__(self, *args, **kwargs):
        self.__dict__.update(dict(*args, **kwargs))

    def __add__(self, other):
        return Namespace.merge(self, other)

    def __iadd__(self, other):
        """updates self in place, `other` wins."""
        if other is not None:
            self.__dict__.update(other)
        return self

    def __contains__(self, key):
        return key in self.__dict__

    def __len__(self):
        return len(self.__dict__)

    def __getattr__(self, item):
        raise AttributeError(f"'Namespace' object has no attribute '{item}'")

    def __getitem__(self, item):
        return self.__dict__.get(item)

    def __setitem__(self, key, value):
        self.__dict__[key] = value

    def __delitem__(self, key):
        self.__dict__.pop(key, None)

    def __iter__(self):
        return iter(self.__dict__.items())

    def __copy__(self):
        return Namespace(self.__dict__.copy())

    def __deepcopy__(self, memo):
        return Namespace({k: deepcopy(v, memo) for k, v in self.__dict__.items()})

    def __dir__(self):
        return list(self.__dict__.keys())

    def __eq__(self, other):
        return isinstance(other, Namespace) and self.__dict__ == other.__dict__

    __hash__ = None  # type: ignore[assignment]

    def __str__(self):
        return Namespace.printer.pformat(Namespace.dict(self))

    def __repr__(self):
        return repr(self.__dict__)

    def __json__(self):
        return Namespace.dict(self)


def str_sanitize(s):
    return re.sub(r"[^\w-]", "_", s)


def fn_name(fn):
    return ".".join([fn.__module__, fn.__qualname__])


def json_load(file, as_namespace=False):
    with open(file, 'r') as f:
        return json_loads(f.read(), as_namespace=as_namespace)


def json_loads(s, as_namespace=False):
    if as_namespace:
        return json.loads(s, object_hook=lambda dic: Namespace(**dic))
    return json.loads(s)


def json_dump(o, file, style='default'):
    from .os import atomic_write
    with atomic_write(file) as f:
        f.write(json_dumps(o, style=style))


def _json_default(o):
    if hasattr(o, '__json__') and callable(o.__json__):
        return o.__json__()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return json.encoder.JSONEncoder.default(None, o)  # type: ignore


def json_dumps(o, style='default'):
    """
    :param o:
    :param style: str among ('compact', 'default', 'pretty').
                - `compact` removes all blanks (no space, no newline).
                - `default` adds a space after each separator but prints on one line
                - `pretty` adds a space after each separator and indents after opening brackets.
    :return: the json string; non finite floats are written as null.
    """
    separators = (',', ':') if style == 'compact' else None
    indent = 4 if style == 'pretty' else None
    return json.dumps(_finite_or_none(o), indent=indent, separators=separators, default=_json_default, allow_nan=False)


def _finite_or_none(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _finite_or_none(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite_or_none(v) for v in o]
    if isinstance(o, np.ndarray):
        return _finite_or_none(o.tolist())
    if isinstance(o, Namespace):
        return _finite_or_none(Namespace.dict(o))
    if hasattr(o, '__json__') and callable(o.__json__):
        return _finite_or_none(o.__json__())
    return o


__all__ = [s for s in dir() if not s.startswith('_') and s not in __no_export]
