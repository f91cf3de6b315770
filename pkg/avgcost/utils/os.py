from contextlib import contextmanager
import logging
import os
import tempfile

log = logging.getLogger(__name__)

__no_export = set(dir())  # all variables defined above this are not exported


def to_mb(size_in_bytes):
    return size_in_bytes / (1 << 20)


def normalize_path(path):
    return os.path.realpath(os.path.expanduser(path))


def touch(path, as_dir=False):
    path = normalize_path(path)
    if not os.path.exists(path):
        dirname, basename = (path, '') if as_dir else os.path.split(path)
        if not os.path.exists(dirname):
            os.makedirs(dirname, exist_ok=True)
        if basename:
            open(path, 'a').close()
    os.utime(path, times=None)
    return path


@contextmanager
def atomic_write(path, mode='w', newline=None):
    """
    yields a file handle on a temporary file in the destination directory,
    which is renamed to `path` only if the block completes.
    """
    path = normalize_path(path)
    dirname = os.path.dirname(path)
    touch(dirname, as_dir=True)
    fd, tmp_path = tempfile.mkstemp(dir=dirname, prefix=f".{os.path.basename(path)}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline=newline) as f:
            yield f
        os.replace(tmp_path, path)
        log.debug("Wrote `%s`.", path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


__all__ = [s for s in dir() if not s.startswith('_') and s not in __no_export]
