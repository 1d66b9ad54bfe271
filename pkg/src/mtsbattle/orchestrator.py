from __future__ import annotations

import asyncio
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import __version__
from .config import ExperimentConfig
from .db.models import ResultFile, RunRecord
from .db.repository import Repository
from .experiments import CellKey, ExperimentKind, experiment, run_cell
from .results import OutputFormat, ResultManifest, write_results

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    output_dir: Path
    files: list[Path]
    manifest: ResultManifest
    run_id: int | None = None
    reproduced: bool | None = None


class ExperimentRunner:
    """Runs every cell of one experiment and writes its results.

    Cells go to a process pool (inline when ``jobs == 1``); finished cells
    land on a queue drained by a single collector, which is the only writer
    of output files.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: str | Path,
        fmt: OutputFormat = "csv",
        jobs: int = 1,
        repo: Repository | None = None,
        config_path: str | None = None,
    ) -> None:
        if jobs < 1:
            raise ValueError("jobs must be >= 1")
        self._config = config
        self._out = Path(output_dir)
        self._fmt = fmt
        self._jobs = jobs
        self._repo = repo
        self._config_path = config_path
        self._queue: asyncio.Queue[tuple[int, Any]] = asyncio.Queue()

    async def run(self) -> RunSummary:
        kind = experiment(self._config.kind)
        keys = kind.cells(self._config)
        config_hash = self._config.digest()
        started = time.perf_counter()
        run_id = None
        if self._repo:
            run_id = await self._repo.start_run(
                RunRecord(
                    kind=self._config.kind,
                    seed=self._config.seed,
                    config_hash=config_hash,
                    config_path=self._config_path,
                    output_dir=str(self._out),
                    jobs=self._jobs,
                    tool_version=__version__,
                )
            )

        logger.info(
            "Running %s (seed=%d): %d cells on %d worker(s)", self._config.kind, self._config.seed, len(keys), self._jobs
        )
        tasks = [
            asyncio.create_task(self._dispatch(keys), name="dispatcher"),
            asyncio.create_task(self._collect(kind, keys), name="collector"),
        ]
        try:
            _, files = await asyncio.gather(*tasks)
        except asyncio.CancelledError:
            logger.info("Run cancelled")
            raise
        except Exception as exc:
            logger.exception("Experiment run failed")
            for t in tasks:
                t.cancel()
            if self._repo and run_id is not None:
                await self._repo.fail_run(run_id, f"{type(exc).__name__}: {exc}", time.perf_counter() - started)
            raise

        duration = time.perf_counter() - started
        manifest = ResultManifest.build(config_hash, self._config.kind, self._config.seed, files, duration)
        manifest.write(self._out)
        summary = RunSummary(output_dir=self._out, files=files, manifest=manifest, run_id=run_id)
        if self._repo and run_id is not None:
            summary.reproduced = await self._record(run_id, manifest, files, config_hash)
        logger.info("Run finished in %.1f s: %d files in %s", duration, len(files), self._out)
        return summary

    async def _dispatch(self, keys: list[CellKey]) -> None:
        if self._jobs == 1:
            for index, key in enumerate(keys):
                await self._queue.put((index, run_cell(self._config, index, key)))
                await asyncio.sleep(0)
            return

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=self._jobs) as pool:

            async def one(index: int, key: CellKey) -> None:
                result = await loop.run_in_executor(pool, run_cell, self._config, index, key)
                await self._queue.put((index, result))

            await asyncio.gather(*(one(i, k) for i, k in enumerate(keys)))

    async def _collect(self, kind: ExperimentKind, keys: list[CellKey]) -> list[Path]:
        done: dict[int, Any] = {}
        while len(done) < len(keys):
            index, result = await self._queue.get()
            done[index] = result
            logger.debug("Cell %d/%d collected", len(done), len(keys))
        ordered = [done[i] for i in range(len(keys))]
        items = kind.assemble(self._config, keys, ordered)
        return write_results(items, self._out, self._fmt)

    async def _record(self, run_id: int, manifest: ResultManifest, files: list[Path], config_hash: str) -> bool | None:
        assert self._repo is not None
        records = [
            ResultFile(run_id=run_id, name=p.name, sha256=manifest.checksums[p.name], size_bytes=p.stat().st_size)
            for p in files
        ]
        previous = await self._repo.previous_checksums(config_hash, self._config.seed, run_id)
        await self._repo.finish_run(run_id, records, manifest.duration_s)
        if previous is None:
            return None
        same = previous == manifest.checksums
        if same:
            logger.info("Results identical to the previous run of this configuration")
        else:
            changed = sorted(n for n in set(previous) | set(manifest.checksums) if previous.get(n) != manifest.checksums.get(n))
            logger.warning("Results differ from the previous run of this configuration: %s", ", ".join(changed))
        return same
