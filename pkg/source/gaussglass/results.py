"""
Run records and their on-disk store.

Each CLI run can be written as a JSON ``RunRecord``. Records are also kept in an
LRU disk store keyed by the canonical (command, params, cfg) JSON, using file
modification times to track access order, so a repeated run can be compared
with the stored one.
"""

import csv
import hashlib
import io
import json
import logging
import os
import subprocess
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"

# Fields that differ between otherwise identical runs
VOLATILE_FIELDS = {"timestamp", "git_describe"}


def git_describe() -> Optional[str]:
    """``git describe --always --dirty`` of the working tree, or None outside a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunRecord(BaseModel):
    command: str
    params: Dict[str, Any] = Field(default_factory=dict)
    cfg: Dict[str, Any] = Field(default_factory=dict)
    estimates: Dict[str, Any] = Field(default_factory=dict)
    checks: Dict[str, bool] = Field(default_factory=dict)
    git_describe: Optional[str] = None
    timestamp: str = Field(default_factory=_utc_now)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def deterministic_view(self) -> Dict[str, Any]:
        """The record without the fields that change from run to run."""
        return self.model_dump(mode="json", exclude=VOLATILE_FIELDS)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    def key(self) -> str:
        return record_key(self.command, self.params, self.cfg)


def record_key(command: str, params: Dict[str, Any], cfg: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON of what determines a run."""
    canonical = json.dumps({"command": command, "params": params, "cfg": cfg},
                           sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def format_value(value: Any) -> str:
    if isinstance(value, float):
        # adding 0.0 turns -0.0 into 0.0
        return FLOAT_FORMAT % (value + 0.0)
    return str(value)


def write_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], out: TextIO):
    """Write rows with fixed float formatting so identical runs give identical bytes."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    write_csv(header, rows, buffer)
    return buffer.getvalue()


class ResultStore:
    """
    LRU disk store for run records.

    Records are stored as individual JSON files named by their key. When the
    store exceeds its size limit, least recently used records are evicted.
    """

    def __init__(self, store_dir: str, max_size_mb: float = 64.0):
        self.store_dir = Path(store_dir)
        self.max_size_bytes = int(max_size_mb * 1024 * 1024)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Result store at {self.store_dir} (max size: {max_size_mb}MB)")

    def _path(self, key: str) -> Path:
        return self.store_dir / f"{key}.json"

    def get(self, key: str) -> Optional[RunRecord]:
        """The stored record for ``key``, marked as recently used; None on a miss."""
        path = self._path(key)
        if not path.exists():
            return None
        try:
            record = RunRecord.model_validate_json(path.read_text(encoding="utf-8"))
            os.utime(path, None)
            logger.debug(f"Store hit for {key[:12]}")
            return record
        except (OSError, ValueError) as e:
            logger.warning(f"Error reading stored record {key[:12]}: {e}")
            return None

    def put(self, record: RunRecord) -> bool:
        content = record.to_json().encode("utf-8")
        if len(content) > self.max_size_bytes:
            logger.warning(f"Record for {record.command} ({len(content)} bytes) exceeds the store limit, not storing")
            return False
        try:
            self._evict_if_needed(len(content))
            self._path(record.key()).write_bytes(content)
            logger.debug(f"Stored record {record.key()[:12]} ({len(content)} bytes)")
            return True
        except OSError as e:
            logger.warning(f"Error storing record for {record.command}: {e}")
            return False

    def _entries(self) -> List[tuple]:
        """(path, size, mtime) of every record, oldest first."""
        entries = []
        try:
            for entry in self.store_dir.glob("*.json"):
                stat = entry.stat()
                entries.append((entry, stat.st_size, stat.st_mtime))
        except OSError as e:
            logger.warning(f"Error listing result store: {e}")
            return []
        entries.sort(key=lambda x: x[2])
        return entries

    def _evict_if_needed(self, new_size: int):
        entries = self._entries()
        current = sum(e[1] for e in entries)
        target = self.max_size_bytes - new_size
        for path, size, _ in entries:
            if current <= target:
                break
            try:
                path.unlink()
                current -= size
                logger.debug(f"Evicted stored record {path.name} ({size} bytes)")
            except OSError as e:
                logger.warning(f"Error evicting stored record {path.name}: {e}")

    def get_stats(self) -> dict:
        entries = self._entries()
        current = sum(e[1] for e in entries)
        return {
            "store_dir": str(self.store_dir),
            "max_size_bytes": self.max_size_bytes,
            "current_size_bytes": current,
            "utilization_percent": (current / self.max_size_bytes * 100) if self.max_size_bytes > 0 else 0,
            "num_records": len(entries),
        }

    def clear(self) -> int:
        count = 0
        for path, _, _ in self._entries():
            try:
                path.unlink()
                count += 1
            except OSError as e:
                logger.warning(f"Error removing stored record {path.name}: {e}")
        logger.info(f"Cleared {count} records from the result store")
        return count
