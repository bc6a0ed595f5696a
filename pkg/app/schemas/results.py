"""Pydantic schemas for per-trial results and aggregate statistics."""
from pydantic import BaseModel, Field
from typing import List, Optional


RESULT_COLUMNS = [
    "mode", "phase", "beta", "seed",
    "episode_return", "mean_exec_delay", "jobs_completed",
    "mean_wait_delay", "param_hash",
]


class PhaseMetrics(BaseModel):
    """Metrics of one inference episode."""
    episode_return: float
    mean_exec_delay: float
    mean_wait_delay: float
    jobs_completed: int
    jobs_created: int
    jobs_dropped: int = 0
    q_first: int = 0
    q_last: int = 0
    decisions: int = 0


class PhaseRecord(BaseModel):
    """One (mode, phase, trial) row."""
    mode: str
    phase: int = Field(..., ge=1)
    beta: float
    seed: int
    episode_return: float
    mean_exec_delay: float
    jobs_completed: int
    mean_wait_delay: float
    train_seconds: float = 0.0
    param_hash: str = ""
    q_first: int = 0
    q_last: int = 0
    loss_curve: List[float] = Field(default_factory=list, exclude=True)

    def csv_row(self) -> dict:
        data = self.model_dump()
        return {column: data[column] for column in RESULT_COLUMNS}


class ExperimentResult(BaseModel):
    """All phase records of one trial, in phase order."""
    mode: str
    seed: int
    records: List[PhaseRecord] = Field(default_factory=list)

    def final(self) -> Optional[PhaseRecord]:
        return self.records[-1] if self.records else None


class BoxStats(BaseModel):
    """Tukey box-and-whisker summary."""
    min: float
    hinge_lo: float
    median: float
    hinge_hi: float
    max: float
    whisker_lo: float
    whisker_hi: float
    outliers: List[float] = Field(default_factory=list)
    count: int


class OracleResult(BaseModel):
    """Verdict of one built-in validation check."""
    name: str
    passed: bool
    measured: float
    expected: float
    tolerance: float
    detail: str = ""
