from __future__ import annotations

from dataclasses import dataclass


@dataclass
class RunRecord:
    id: int | None = None
    kind: str = ""
    seed: int = 0
    config_hash: str = ""
    config_path: str | None = None
    output_dir: str = ""
    jobs: int = 1
    status: str = "running"
    tool_version: str | None = None
    duration_s: float | None = None
    error: str | None = None
    started_at: str | None = None
    finished_at: str | None = None


@dataclass
class ResultFile:
    id: int | None = None
    run_id: int = 0
    name: str = ""
    sha256: str = ""
    size_bytes: int = 0
