from __future__ import annotations

import logging
from logging import Logger

import coloredlogs

from neuraCrypt.config import (
    ARITHMETIC,
    CONSOLE_LOGGING_LEVEL_STRING,
    ENABLE_LOGS,
    FAMILY_CAP,
    LOGS_FOLDER,
    PAIR_CAP,
    SYM_CAP,
    WORKERS,
)

__all__ = ("run_logs", "attach_file_handler")

TRACE = 5
VERBOSE = 7
NOTICE = 23
HNOTICE = 24
SUCCESS = 25
EXTRA_LEVELS = {
    "TRACE": TRACE,
    "VERBOSE": VERBOSE,
    "NOTICE": NOTICE,
    "HNOTICE": HNOTICE,
    "SUCCESS": SUCCESS,
}

ROOT = "neuraCrypt"
RECORD_PREFIX = "[%(asctime)-15s] [pid:%(process)8d][tid:%(thread)8d] %(levelname)-8s"

LEVEL_STYLES = {
    "trace": {"color": "black", "bold": True},
    "debug": {"color": "magenta", "bold": True},
    "verbose": {"color": "blue", "bold": True},
    "info": {"color": "white"},
    "notice": {"color": "cyan"},
    "hnotice": {"color": "cyan", "bold": True},
    "warning": {"color": "yellow", "bold": True},
    "success": {"color": "green", "bold": True},
    "error": {"color": "red"},
    "critical": {"color": "red", "bold": True},
}
FIELD_STYLES = {
    "asctime": {"color": "green"},
    "process": {"color": "magenta"},
    "levelname": {"color": "red", "bold": True},
    "name": {"color": "blue", "bold": True},
    "thread": {"color": "cyan"},
}


def _level_method(level: int):
    def log(self, message, *args, **kwargs):
        if self.isEnabledFor(level):
            self._log(level, message, args, **kwargs)

    return log


class VerboseLogger(Logger):
    """Logger with the extra TRACE, VERBOSE, NOTICE, HNOTICE and SUCCESS methods."""

    trace = _level_method(TRACE)
    verbose = _level_method(VERBOSE)
    notice = _level_method(NOTICE)
    hnotice = _level_method(HNOTICE)
    success = _level_method(SUCCESS)


for _name, _level in EXTRA_LEVELS.items():
    logging.addLevelName(_level, _name)
logging.setLoggerClass(VerboseLogger)

HAS_RUN = False


def _name_width() -> int:
    """Width of the longest component logger name created so far, at least 10."""
    names = [n for n in logging.Logger.manager.loggerDict if n.split(".")[0] == ROOT]
    return max([10, *map(len, names)])


def run_logs(logger: Logger) -> None:
    global HAS_RUN
    coloredlogs.install(
        logger=logger,
        level=logging._nameToLevel.get(CONSOLE_LOGGING_LEVEL_STRING.upper()),
        fmt=f"{RECORD_PREFIX}: %(name)-{_name_width()}s: %(message)s",
        level_styles=LEVEL_STYLES,
        field_styles=FIELD_STYLES,
        reconfigure=True,
    )
    if not HAS_RUN:
        log_settings(logger)
        HAS_RUN = True


def log_settings(logger: Logger) -> None:
    logger.debug("Log Level: %s", CONSOLE_LOGGING_LEVEL_STRING)
    logger.debug(
        "Analysis caps: Sym=%s samples, family=%s members, pairs=%s",
        SYM_CAP,
        FAMILY_CAP,
        PAIR_CAP,
    )
    logger.debug("Analysis arithmetic: %s", ARITHMETIC)
    logger.debug("Encoding workers: %s", WORKERS)


def attach_file_handler(logger: Logger, name: str = ROOT) -> None:
    if not ENABLE_LOGS:
        return
    LOGS_FOLDER.mkdir(parents=True, exist_ok=True)
    logfile = str(LOGS_FOLDER.joinpath(f"{name}.log").absolute())
    for handler in logger.handlers:
        if isinstance(handler, logging.FileHandler) and handler.baseFilename == logfile:
            return
    handler = logging.FileHandler(logfile)
    handler.setFormatter(logging.Formatter(fmt=f"{RECORD_PREFIX}: %(name)s: %(message)s"))
    logger.addHandler(handler)
