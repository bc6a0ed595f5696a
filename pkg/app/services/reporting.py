"""Result tables (pandas) and optional box plots (matplotlib, SVG)."""
from pathlib import Path
from typing import Dict, List, Sequence
import logging

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.core.errors import InsufficientDataError, InvalidParameterError  # noqa: E402
from app.schemas.results import RESULT_COLUMNS, ExperimentResult  # noqa: E402
from app.services.stats import aggregate_trials  # noqa: E402

logger = logging.getLogger(__name__)

AGGREGATE_METRICS = ["episode_return", "mean_exec_delay", "jobs_completed", "mean_wait_delay"]
PLOT_METRICS = ["episode_return", "mean_exec_delay"]
AGGREGATE_COLUMNS = [
    "mode", "phase", "beta", "metric", "count", "min", "whisker_lo", "hinge_lo",
    "median", "hinge_hi", "whisker_hi", "max", "outliers",
]
TIMING_COLUMNS = ["mode", "phase", "seed", "train_seconds"]


def results_frame(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    """One row per (mode, phase, trial), in the order the results are given."""
    rows = [record.csv_row() for result in results for record in result.records]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def timings_frame(results: Sequence[ExperimentResult]) -> pd.DataFrame:
    rows = [
        {"mode": r.mode, "phase": r.phase, "seed": r.seed, "train_seconds": r.train_seconds}
        for result in results for r in result.records
    ]
    return pd.DataFrame(rows, columns=TIMING_COLUMNS)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_results(paths: Sequence[str]) -> pd.DataFrame:
    """
    Load and concatenate per-trial result CSVs.

    Raises:
        FileNotFoundError: If a path does not exist
        InvalidParameterError: If a file lacks required columns
    """
    required = {"mode", "phase", "beta", "seed", "episode_return", "mean_exec_delay", "jobs_completed"}
    frames = []
    for path in paths:
        if not Path(path).is_file():
            raise FileNotFoundError(f"Results file not found: {path}")
        frame = pd.read_csv(path)
        missing = required - set(frame.columns)
        if missing:
            raise InvalidParameterError("csv", path, f"missing columns {sorted(missing)}")
        frames.append(frame)
    if not frames:
        raise InsufficientDataError("report")
    return pd.concat(frames, ignore_index=True)


def aggregate_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Box statistics per (mode, phase, metric); modes keep first-seen order."""
    rows: List[Dict] = []
    metrics = [m for m in AGGREGATE_METRICS if m in frame.columns]
    for (mode, phase), group in frame.groupby(["mode", "phase"], sort=False):
        for metric in metrics:
            stats = aggregate_trials(group[metric].astype(float).tolist())
            row = {"mode": mode, "phase": int(phase), "beta": float(group["beta"].iloc[0]), "metric": metric}
            row.update(stats.model_dump())
            row["outliers"] = ";".join(f"{v:g}" for v in stats.outliers)
            rows.append(row)
    aggregate = pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)
    return aggregate.sort_values(["phase"], kind="stable").reset_index(drop=True)


def plot_boxplots(aggregate: pd.DataFrame, out_dir: str) -> List[str]:
    """One SVG per phase: Tukey boxes of return and execution delay across modes."""
    plt.rcParams["svg.hashsalt"] = "fogforge"
    written = []
    for phase, group in aggregate.groupby("phase", sort=True):
        fig, axes = plt.subplots(1, len(PLOT_METRICS), figsize=(5 * len(PLOT_METRICS), 4))
        for ax, metric in zip(axes, PLOT_METRICS):
            rows = group[group["metric"] == metric]
            boxes = [
                {
                    "label": row["mode"],
                    "med": row["median"],
                    "q1": row["hinge_lo"],
                    "q3": row["hinge_hi"],
                    "whislo": row["whisker_lo"],
                    "whishi": row["whisker_hi"],
                    "fliers": [float(v) for v in str(row["outliers"]).split(";") if v and v != "nan"],
                }
                for _, row in rows.iterrows()
            ]
            if boxes:
                ax.bxp(boxes, showfliers=True)
            ax.set_title(metric.replace("_", " "))
            ax.tick_params(axis="x", rotation=30)
        beta = group["beta"].iloc[0]
        fig.suptitle(f"Phase {phase} (beta={beta:g})")
        fig.tight_layout()
        path = str(Path(out_dir) / f"phase{phase}_boxplot.svg")
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
        logger.info(f"Wrote {path}")
    return written
