"""
**logger** module configures the console and file handlers of a run (``setup``) from a ``--logging`` spec (``parse_levels``).
"""
import datetime as dt
import logging
import sys
import warnings

# prevent asap other modules from defining the root logger using basicConfig
logging.basicConfig(handlers=[logging.NullHandler()])

app_logger = logging.getLogger('avgcost')
warnings_logger = logging.getLogger('py.warnings')

logging.TRACE = logging.TRACE if hasattr(logging, 'TRACE') else 5  # type: ignore
logging.addLevelName(logging.TRACE, 'TRACE')  # type: ignore


class MillisFormatter(logging.Formatter):

    converter = dt.datetime.fromtimestamp  # type: ignore

    def formatTime(self, record, datefmt=None):
        t = self.converter(record.created).strftime(datefmt or "%Y-%m-%d %H:%M:%S")
        return f"{t}.{int(record.msecs):03d}"


def parse_levels(spec, defaults=None):
    """
    parses a logging specification like ``console:info,app:debug,root:info`` or a single level name.
    :param spec: the logging specification string.
    :param defaults: dict of default levels for the missing loggers.
    :return: a dict with keys among (console, app, root).
    """
    defaults = defaults or dict(console='INFO', app='DEBUG', root='INFO')
    if not spec:
        return dict(defaults)
    if ':' in spec:
        levels = {logger.strip(): int(level) if level.isnumeric() else level.strip().upper()
                  for logger, level in (d.split(':', 1) for d in spec.split(','))}
    else:
        levels = dict(console=spec.upper(), app=spec.upper(), root=spec.upper())
    return {**defaults, **levels}


def _file_handler(path, level):
    handler = logging.FileHandler(path, mode='a')
    handler.setLevel(level)
    handler.setFormatter(MillisFormatter('[%(levelname)s] [%(name)s:%(asctime)s] %(message)s', datefmt='%H:%M:%S'))
    return handler


def setup(log_file=None, root_file=None, root_level=logging.WARNING, app_level=None, console_level=None):
    """
    configures the Python logger.
    :param log_file: file receiving the avgcost logs.
    :param root_file: file receiving all logs, including the ones from numpy/scipy and captured warnings.
    :param root_level: level of the root logger and of `root_file`.
    :param app_level: level of the avgcost logger and of `log_file`, defaults to `root_level`.
    :param console_level: defaults to `app_level`.
    """
    logging.captureWarnings(True)
    if not sys.warnoptions:
        warnings.simplefilter("ignore")
        # overflow/invalid values from diverging iterates are reported once per location
        warnings.simplefilter("default", RuntimeWarning)

    root = logging.getLogger()
    root.setLevel(root_level)
    app_level = app_level or root_level
    console_level = console_level or app_level

    console = logging.StreamHandler()
    console.setLevel(console_level)
    app_handlers: list = [console]
    if log_file:
        app_handlers.append(_file_handler(log_file, app_level))

    app_logger.setLevel(app_level)
    for handler in app_handlers:
        app_logger.addHandler(handler)
        warnings_logger.addHandler(handler)

    if root_file:
        root.addHandler(_file_handler(root_file, root_level))
