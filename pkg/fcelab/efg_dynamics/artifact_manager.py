import csv
import io
import json
import pathlib
from typing import Any, Dict, List, Sequence

import aiofiles

from . import config
from .audit import format_key
from .learners import dump_trace_lines
from .logger import get_logger
from .models import GameTree, PlayTrace, RegretReport

logger = get_logger(__name__)

CSV_COLUMNS = ("step", "family", "key", "avg_positive_regret")


class ArtifactManager:
    def __init__(self, output_dir: str = config.DEFAULT_OUTPUT_DIR):
        self.base_output_dir = pathlib.Path(output_dir)
        self.base_output_dir.mkdir(parents=True, exist_ok=True)

    def get_safe_name(self, name_part: str) -> str:
        """Creates a filesystem-safe string from a name part."""
        s_name = "".join(c for c in name_part if c.isalnum() or c in (' ', '-', '_', '.')).strip()
        return s_name.replace(' ', '_') or "game"

    def create_run_directory(self, game_name: str, procedure: str, seed: int) -> pathlib.Path:
        """Creates and returns the directory of one (game, procedure, seed) run."""
        run_dir = self.base_output_dir / f"{self.get_safe_name(game_name)}_{procedure}_seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Using run directory: {run_dir}")
        return run_dir

    async def write_text(self, content: str, full_path: pathlib.Path) -> pathlib.Path:
        async with aiofiles.open(full_path, "w", encoding="utf-8", newline="") as f:
            await f.write(content)
        logger.info(f"Saved file: {full_path}")
        return full_path

    async def save_trace(self, trace: PlayTrace, run_dir: pathlib.Path) -> pathlib.Path:
        path = run_dir / config.TRACE_FILENAME
        async with aiofiles.open(path, "w", encoding="utf-8") as f:
            for line in dump_trace_lines(trace):
                await f.write(line + "\n")
        logger.info(f"Saved trace ({trace.steps} steps): {path}")
        return path

    async def save_trajectory(self, game: GameTree, reports: Sequence[RegretReport],
                              run_dir: pathlib.Path) -> pathlib.Path:
        return await self.write_text(trajectory_csv(game, reports), run_dir / config.TRAJECTORY_FILENAME)

    async def save_summary(self, summary: Dict[str, Any], run_dir: pathlib.Path) -> pathlib.Path:
        content = json.dumps(summary, indent=2, sort_keys=True) + "\n"
        return await self.write_text(content, run_dir / config.SUMMARY_FILENAME)


def trajectory_rows(game: GameTree, reports: Sequence[RegretReport]) -> List[Dict[str, Any]]:
    rows = []
    for report in reports:
        for family, values in report.values.items():
            for key in sorted(values):
                rows.append({
                    "step": report.steps,
                    "family": family.value,
                    "key": format_key(game, family, key),
                    "avg_positive_regret": repr(float(values[key])),
                })
    return rows


def trajectory_csv(game: GameTree, reports: Sequence[RegretReport]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(trajectory_rows(game, reports))
    return buffer.getvalue()


def read_trajectory_csv(text: str) -> List[Dict[str, Any]]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "step": int(row["step"]),
            "family": row["family"],
            "key": row["key"],
            "avg_positive_regret": float(row["avg_positive_regret"]),
        })
    return rows
