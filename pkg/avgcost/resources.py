"""
**resources** module holds the merged configuration of a run in a singleton ``Resources`` instance,
and resolves the models bundled under ``resources/``.

Config keys ending with ``_dir`` or ``_file`` are treated as paths: the ``{root}``, ``{user}`` and ``{output}``
placeholders are substituted and the result is normalized.
"""
from __future__ import annotations

import copy
from functools import cached_property
import logging
import os
import random

from .utils import Namespace, normalize_path, touch

log = logging.getLogger(__name__)

_PATH_SUFFIXES = ('_dir', '_file')


def _resolve_paths(config: Namespace, placeholders: dict) -> Namespace:
    resolved = copy.copy(config)
    for k, v in config:
        if isinstance(v, Namespace):
            resolved[k] = _resolve_paths(v, placeholders)
        elif k.endswith(_PATH_SUFFIXES) and isinstance(v, str):
            resolved[k] = normalize_path(v.format(**placeholders))
    return resolved


class Resources:

    def __init__(self, config: Namespace):
        placeholders = dict(
            root=normalize_path(config.root_dir),
            user=normalize_path(config.user_dir),
            output=normalize_path(config.output_dir),
        )
        self.config = _resolve_paths(config, placeholders)
        log.debug("Using config:\n%s", self.config)

    @cached_property
    def seed(self) -> int | None:
        """the configured seed: an integer, `none`, or `auto` for a seed drawn once per run."""
        seed = str(self.config.seed).lower()
        if seed in ('none', ''):
            return None
        if seed == 'auto':
            drawn = random.randint(1, (1 << 31) - 1)
            log.info("Using auto seed %s.", drawn)
            return drawn
        return int(seed)

    def options(self, section: str) -> Namespace:
        """a copy of the config section at dotted path `section`, empty if the section is missing."""
        opts = Namespace.get(self.config, section)
        return copy.deepcopy(opts) if opts is not None else Namespace()

    def model_path(self, name: str, kind: str = 'models') -> str:
        """
        :param name: a path to a model file, or the name of a model bundled under resources/{kind}.
        :param kind: `models` for MDPs, `lqg` for LQG plants.
        """
        if os.path.isfile(normalize_path(name)):
            return normalize_path(name)
        bundle_dir = self.config[f"{kind}_dir"]
        bundled = os.path.join(bundle_dir, name if name.endswith('.json') else f"{name}.json")
        if not os.path.isfile(bundled):
            raise ValueError(f"No model file at `{name}` and no bundled model `{name}` in {bundle_dir}.")
        return bundled

    def bundled_models(self, kind: str = 'models') -> list:
        bundle_dir = self.config[f"{kind}_dir"]
        return sorted(os.path.splitext(f)[0] for f in os.listdir(bundle_dir) if f.endswith('.json'))


__INSTANCE__: Resources | None = None


def from_configs(*configs: Namespace) -> Resources:
    """merges the configs (later ones win) and installs the result as the current instance."""
    global __INSTANCE__
    __INSTANCE__ = Resources(Namespace.merge(*configs, deep=True))
    return __INSTANCE__


def get() -> Resources:
    if __INSTANCE__ is None:
        raise RuntimeError("No configuration has been loaded yet.")
    return __INSTANCE__


def output_dirs(root, session=None, subdirs=None, create=False) -> Namespace:
    """
    :return: a Namespace with the `root` and `session` dirs, plus one entry per subdir of the session dir.
    """
    root = root or '.'
    dirs = Namespace(root=root, session=os.path.join(root, session) if session else root)
    for d in [subdirs] if isinstance(subdirs, str) else (subdirs or []):
        dirs[d] = os.path.join(dirs.session, d)
    if create:
        for _, path in dirs:
            touch(path, as_dir=True)
    return dirs
