from __future__ import annotations

import logging
from datetime import datetime, timezone
from pathlib import Path

import aiosqlite

from .models import ResultFile, RunRecord

logger = logging.getLogger(__name__)

_SCHEMA_PATH = Path(__file__).parent / "schema.sql"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Repository:
    """Registry of experiment runs and the checksums of the files they wrote."""

    def __init__(self, db_path: str) -> None:
        self._db_path = db_path
        self._db: aiosqlite.Connection | None = None

    async def connect(self) -> None:
        if self._db_path != ":memory:":
            Path(self._db_path).parent.mkdir(parents=True, exist_ok=True)
        self._db = await aiosqlite.connect(self._db_path)
        self._db.row_factory = aiosqlite.Row
        await self._db.execute("PRAGMA journal_mode=WAL")
        await self._db.execute("PRAGMA foreign_keys=ON")
        await self._db.executescript(_SCHEMA_PATH.read_text())
        await self._db.commit()
        logger.info("Run registry connected: %s", self._db_path)

    async def close(self) -> None:
        if self._db:
            await self._db.close()
            self._db = None

    @property
    def db(self) -> aiosqlite.Connection:
        assert self._db is not None, "Call connect() first"
        return self._db

    # ── runs ──

    async def start_run(self, run: RunRecord) -> int:
        run.started_at = run.started_at or _now()
        cur = await self.db.execute(
            """INSERT INTO runs (kind, seed, config_hash, config_path, output_dir,
                                 jobs, status, tool_version, started_at)
               VALUES (?, ?, ?, ?, ?, ?, 'running', ?, ?)""",
            (run.kind, run.seed, run.config_hash, run.config_path, run.output_dir,
             run.jobs, run.tool_version, run.started_at),
        )
        await self.db.commit()
        run.id = cur.lastrowid
        run.status = "running"
        return run.id  # type: ignore[return-value]

    async def finish_run(self, run_id: int, files: list[ResultFile], duration_s: float) -> None:
        await self.db.executemany(
            """INSERT INTO result_files (run_id, name, sha256, size_bytes)
               VALUES (?, ?, ?, ?)
               ON CONFLICT(run_id, name) DO UPDATE SET
                   sha256=excluded.sha256,
                   size_bytes=excluded.size_bytes""",
            [(run_id, f.name, f.sha256, f.size_bytes) for f in files],
        )
        await self.db.execute(
            "UPDATE runs SET status='finished', duration_s=?, finished_at=? WHERE id=?",
            (duration_s, _now(), run_id),
        )
        await self.db.commit()

    async def fail_run(self, run_id: int, error: str, duration_s: float) -> None:
        await self.db.execute(
            "UPDATE runs SET status='failed', error=?, duration_s=?, finished_at=? WHERE id=?",
            (error[:2000], duration_s, _now(), run_id),
        )
        await self.db.commit()

    async def get_run(self, run_id: int) -> RunRecord | None:
        cur = await self.db.execute("SELECT * FROM runs WHERE id=?", (run_id,))
        row = await cur.fetchone()
        return self._row_to_run(row) if row else None

    async def get_runs_for_config(self, config_hash: str, seed: int | None = None) -> list[RunRecord]:
        if seed is None:
            cur = await self.db.execute(
                "SELECT * FROM runs WHERE config_hash=? ORDER BY id", (config_hash,)
            )
        else:
            cur = await self.db.execute(
                "SELECT * FROM runs WHERE config_hash=? AND seed=? ORDER BY id", (config_hash, seed)
            )
        return [self._row_to_run(r) for r in await cur.fetchall()]

    async def get_files(self, run_id: int) -> list[ResultFile]:
        cur = await self.db.execute(
            "SELECT * FROM result_files WHERE run_id=? ORDER BY name", (run_id,)
        )
        return [
            ResultFile(id=r["id"], run_id=r["run_id"], name=r["name"], sha256=r["sha256"], size_bytes=r["size_bytes"])
            for r in await cur.fetchall()
        ]

    async def previous_checksums(self, config_hash: str, seed: int, before_run: int) -> dict[str, str] | None:
        """Checksums of the latest finished run of the same config and seed, if any."""
        cur = await self.db.execute(
            """SELECT id FROM runs
               WHERE config_hash=? AND seed=? AND status='finished' AND id<?
               ORDER BY id DESC LIMIT 1""",
            (config_hash, seed, before_run),
        )
        row = await cur.fetchone()
        if not row:
            return None
        return {f.name: f.sha256 for f in await self.get_files(row["id"])}

    @staticmethod
    def _row_to_run(r: aiosqlite.Row) -> RunRecord:
        return RunRecord(
            id=r["id"],
            kind=r["kind"],
            seed=r["seed"],
            config_hash=r["config_hash"],
            config_path=r["config_path"],
            output_dir=r["output_dir"],
            jobs=r["jobs"],
            status=r["status"],
            tool_version=r["tool_version"],
            duration_s=r["duration_s"],
            error=r["error"],
            started_at=r["started_at"],
            finished_at=r["finished_at"],
        )
