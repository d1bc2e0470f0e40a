import logging
import sys
from collections.abc import Sequence
from logging.handlers import TimedRotatingFileHandler

from mrem.cli import run
from mrem.helpers import custom_namer
from mrem.settings import LoggerSettings

log = logging.getLogger("mrem")


def setup_logging() -> None:
    """Setup file and console logging."""
    log_settings = LoggerSettings()
    for handler in list(log.handlers):
        log.removeHandler(handler)
        handler.close()
    log_dir = log_settings.file_path
    log_dir.mkdir(parents=True, exist_ok=True)
    file_handler = TimedRotatingFileHandler(
        log_dir / "mrem.log",
        when="W0",
        backupCount=4,
        encoding="utf8",
    )
    file_handler.namer = custom_namer
    file_handler.setFormatter(
        logging.Formatter(
            "%(asctime)s %(name)-19s[%(lineno)3d]%(levelname)7s: %(message)s",
            "%Y-%m-%d %H:%M:%S",
        )
    )
    log.addHandler(file_handler)
    log.setLevel(log_settings.level)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(
        logging.Formatter(
            "%(asctime)s %(name)-19s[%(lineno)3d] %(levelname)7s: %(message)s",
            "%H:%M:%S",
        )
    )
    log.addHandler(console_handler)


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging()
    code = run(argv)
    log.debug(f"Exit code {code}")
    return code


if __name__ == "__main__":
    exit(main())
