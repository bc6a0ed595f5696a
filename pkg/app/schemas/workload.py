"""Pydantic schemas for workload categories."""
from pydantic import BaseModel, ConfigDict, Field
from typing import List
import enum

MIX_TOLERANCE = 1e-9

class WorkloadLabel(str, enum.Enum):
    """Compute-demand class of a workload."""
    LIGHT = "light"
    MODERATE = "moderate"
    HEAVY = "heavy"

_LABEL_ORDER = [WorkloadLabel.LIGHT, WorkloadLabel.MODERATE, WorkloadLabel.HEAVY]

class WorkloadCategory(BaseModel):
    """One job class (the category symbol w)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(..., ge=0)
    label: WorkloadLabel
    mean_instructions: float = Field(..., gt=0, description="Mean instructions per job")
    request_bytes: int = Field(default=0, ge=0, description="Uplink payload size")
    response_bytes: int = Field(default=0, ge=0, description="Downlink payload size")

def validate_category_table(categories: List[WorkloadCategory]) -> List[WorkloadCategory]:
    """
    Check ids are 0..k-1 in list order and mean instructions grow Light < Moderate < Heavy.

    Raises:
        ValueError: On any violation
    """
    if not categories:
        raise ValueError("at least one workload category is required")
    for index, category in enumerate(categories):
        if category.id != index:
            raise ValueError(f"category ids must be 0..k-1 in order, found {category.id} at {index}")
    labels = [c.label for c in categories]
    if len(set(labels)) != len(labels):
        raise ValueError("category labels must be unique")
    by_label = sorted(categories, key=lambda c: _LABEL_ORDER.index(c.label))
    for lighter, heavier in zip(by_label, by_label[1:]):
        if not heavier.mean_instructions > lighter.mean_instructions:
            raise ValueError(
                f"{heavier.label.value}.mean_instructions must exceed "
                f"{lighter.label.value}.mean_instructions"
            )
    return categories

def validate_mix(mix: List[float]) -> List[float]:
    """Check a probability vector: entries >= 0 and sum to 1 within 1e-9."""
    if not mix:
        raise ValueError("category mix must not be empty")
    if any(p < 0 for p in mix):
        raise ValueError("category mix entries must be non-negative")
    if abs(sum(mix) - 1.0) > MIX_TOLERANCE:
        raise ValueError(f"category mix must sum to 1, got {sum(mix)!r}")
    return mix


def default_categories() -> List[WorkloadCategory]:
    """Light/moderate/heavy table used when the config does not override it."""
    return [
        WorkloadCategory(id=0, label=WorkloadLabel.LIGHT, mean_instructions=1000.0,
                         request_bytes=500, response_bytes=100),
        WorkloadCategory(id=1, label=WorkloadLabel.MODERATE, mean_instructions=3000.0,
                         request_bytes=1000, response_bytes=200),
        WorkloadCategory(id=2, label=WorkloadLabel.HEAVY, mean_instructions=6000.0,
                         request_bytes=2000, response_bytes=400),
    ]
