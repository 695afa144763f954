"""
Artifact storage for effham runs
Writes JSON documents and CSV tables that carry a provenance header, and
verifies files by SHA-256 digest
"""

import json
import hashlib
import logging
from typing import Any, Dict, Tuple, Union
from pathlib import Path

import pandas as pd

from shared.constants import TOOL_NAME, TOOL_VERSION

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"


def save_json(data: Union[Dict, list], file_path: Union[str, Path], backup: bool = False) -> Path:
    """
    Save data as a JSON document with sorted keys

    Args:
        data: Data to save
        file_path: Path to save file
        backup: Whether to keep a copy of an existing file

    Returns:
        Path: the written file
    """
    file_path = Path(file_path)

    if backup and file_path.exists():
        backup_path = file_path.with_suffix(f"{file_path.suffix}.backup")
        backup_path.write_bytes(file_path.read_bytes())
        logger.info(f"Backup created: {backup_path}")

    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    return file_path


def load_json(file_path: Union[str, Path]) -> Union[Dict, list]:
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        return json.load(f)


def provenance_header(config_hash: str, **extra: Any) -> Dict[str, Any]:
    header = {"tool": TOOL_NAME, "version": TOOL_VERSION, "config_hash": config_hash}
    header.update(extra)
    return header


def save_frame(df: pd.DataFrame, file_path: Union[str, Path], header: Dict[str, Any]) -> Path:
    """
    Save a DataFrame as CSV preceded by a one-line JSON header comment

    Args:
        df: Table to save
        file_path: Destination path
        header: Provenance dictionary written as '# {...}'

    Returns:
        Path: the written file
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        f.write("# " + json.dumps(header, sort_keys=True, default=str) + "\n")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT)
    return file_path


def load_frame(file_path: Union[str, Path]) -> Tuple[Dict[str, Any], pd.DataFrame]:
    """Read a file written by save_frame; returns (header, table)."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        first = f.readline()
        header: Dict[str, Any] = {}
        if first.startswith("# "):
            header = json.loads(first[2:])
        else:
            f.seek(0)
        df = pd.read_csv(f)
    return header, df


def file_digest(file_path: Union[str, Path]) -> str:
    sha256_hash = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(4096), b""):
            sha256_hash.update(chunk)
    return sha256_hash.hexdigest()


def verify_file_integrity(file_path: Union[str, Path], expected_hash: str = None) -> str:
    """
    Verify file integrity using SHA-256 hash

    Args:
        file_path: Path to file to verify
        expected_hash: Expected hash to compare against

    Returns:
        str: SHA-256 hash of file
    """
    file_path = Path(file_path)

    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    file_hash = file_digest(file_path)

    if expected_hash and file_hash != expected_hash:
        logger.error(f"File integrity check failed for {file_path}: expected {expected_hash}, got {file_hash}")
        raise ValueError(f"File integrity check failed for {file_path}")

    return file_hash
