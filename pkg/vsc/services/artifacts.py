"""CSV/JSON artifact writers and the run manifest"""

import csv
import logging
import platform
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import click
import numpy as np
import pydantic
import scipy
from pydantic import BaseModel, TypeAdapter

import vsc
from vsc.models.schemas import (
    DesignPointResult,
    GainSchedule,
    Metrics,
    RunConfig,
    RunManifest,
    VerificationSummary,
)
from vsc.services.constraints import SweepCurve
from vsc.services.simulation import TRACE_COLUMNS, SimTrace
from vsc.services.synthesis import schedule_gains

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".12g"
GAIN_CURVE_POINTS = 101


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


class ArtifactWriter:
    """Writes the artifacts of one command into an output directory and records them"""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []
        self.timings: dict[str, float] = {}

    def _register(self, path: Path) -> Path:
        name = str(path.relative_to(self.out_dir))
        if name not in self.artifacts:
            self.artifacts.append(name)
        logger.info(f"Wrote {path}")
        return path

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Record the wall-clock duration of a pipeline stage"""
        started = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - started, 3)

    # =========================================================================
    # GENERIC WRITERS
    # =========================================================================

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.out_dir / name
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        return self._register(path)

    def write_json(self, name: str, document: Union[BaseModel, dict, list]) -> Path:
        path = self.out_dir / name
        if isinstance(document, BaseModel):
            text = document.model_dump_json(indent=2)
        else:
            text = TypeAdapter(type(document)).dump_json(document, indent=2).decode()
        path.write_text(text + "\n")
        return self._register(path)

    # =========================================================================
    # DOMAIN WRITERS
    # =========================================================================

    def write_schedule(self, schedule: GainSchedule, name: str = "schedule.json") -> Path:
        return self.write_json(name, schedule)

    def write_design_points(self, results: list[DesignPointResult], name: str = "design_points.json") -> Path:
        path = self.out_dir / name
        adapter = TypeAdapter(list[DesignPointResult])
        path.write_bytes(adapter.dump_json(results, indent=2) + b"\n")
        return self._register(path)

    def write_gain_curves(self, schedule: GainSchedule, name: str = "gains_vs_stiffness.csv") -> Path:
        """Tuned gains at the design points and fitted curves over the scheduling range"""
        header = ["Zd", "kind"] + schedule.gain_names
        rows = [[dp.zd, "design"] + dp.gains.values for dp in schedule.design_points]
        for zd in np.linspace(schedule.zd_min, schedule.zd_max, GAIN_CURVE_POINTS):
            rows.append([float(zd), "fit"] + schedule_gains(schedule, float(zd)).tolist())
        return self.write_csv(name, header, rows)

    def write_verification(self, summary: VerificationSummary, name: str = "verify_sweep.csv") -> Path:
        header = ["Zd", "evaluated_Zd", "clamped", "stable", "constraint", "achieved", "bound", "margin", "passed"]
        rows = []
        for check in summary.checks:
            for result in check.report.results:
                rows.append(
                    [
                        check.zd,
                        check.evaluated_zd,
                        check.clamped,
                        check.report.stable,
                        result.name,
                        result.achieved,
                        result.bound,
                        result.margin,
                        result.passed,
                    ]
                )
        return self.write_csv(name, header, rows)

    def write_sweep(self, curve: SweepCurve, name: str) -> Path:
        rows = zip(curve.omegas, curve.values, [curve.bound] * len(curve.omegas), curve.in_band)
        return self.write_csv(name, ["omega", "magnitude", "bound", "in_band"], rows)

    def write_trace(self, trace: SimTrace, name: str) -> Path:
        return self.write_csv(name, TRACE_COLUMNS, trace.columns())

    def write_energy(self, trace: SimTrace, energy: np.ndarray, name: str) -> Path:
        return self.write_csv(name, ["t", "W"], zip(trace.t, energy))

    def write_metrics(self, metrics: dict[str, Metrics], name: str = "metrics.csv") -> Path:
        rows = [[method, m.me, m.sse, m.mco, m.snr] for method, m in metrics.items()]
        return self.write_csv(name, ["method", "ME", "SSE", "MCO", "SNR"], rows)

    # =========================================================================
    # MANIFEST
    # =========================================================================

    def write_manifest(self, command: str, config: RunConfig, exit_code: int = 0) -> Path:
        """
        Write timings.json, then manifest.json listing every artifact written so far.

        The manifest itself holds no wall-clock values.
        """
        self.write_json("timings.json", dict(self.timings))
        missing = [a for a in self.artifacts if not (self.out_dir / a).stat().st_size]
        if missing:
            logger.warning(f"Empty artifacts: {missing}")
        manifest = RunManifest(
            command=command,
            seed=config.seed,
            config=config,
            versions=package_versions(),
            artifacts=list(self.artifacts),
            exit_code=exit_code,
        )
        path = self.out_dir / "manifest.json"
        path.write_text(manifest.model_dump_json(indent=2) + "\n")
        logger.info(f"Wrote {path}")
        return path


def package_versions() -> dict[str, str]:
    return {
        "vsc": vsc.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "click": click.__version__,
    }
