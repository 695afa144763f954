import logging, os, sys
from dotenv import load_dotenv

load_dotenv()


def setup_logger():
    logger = logging.getLogger("effham")
    if logger.handlers:
        return logger
    level = getattr(logging, os.getenv("EFFHAM_LOG_LEVEL", "INFO").upper(), logging.INFO)
    logger.setLevel(level)
    ch = logging.StreamHandler(sys.stdout)
    ch.setLevel(level)
    fmt = logging.Formatter("[%(asctime)s] %(levelname)s - %(message)s")
    ch.setFormatter(fmt)
    logger.addHandler(ch)
    return logger
