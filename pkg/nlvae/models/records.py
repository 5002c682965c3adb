"""
Record models produced by the engine: loss rows, reports, cost tables,
run manifests, and the checkpoint document.
"""

from datetime import datetime
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, validator

from nlvae.utils.constants import CHECKPOINT_VERSION


class LossBreakdown(BaseModel):
    """One epoch of the beta-weighted objective: total = l_r + beta * l_kl + alpha."""

    l_r: float
    l_kl: float
    beta: float
    alpha: float
    total: float


class TrainRow(BaseModel):
    epoch: int
    loss: LossBreakdown
    seconds: float


class TrainReport(BaseModel):
    """Outcome of a single-image training run."""

    rows: List[TrainRow] = Field(default_factory=list)
    stopped_early: bool = False
    checkpoint_path: Optional[str] = None
    output_image_path: Optional[str] = None
    log_path: Optional[str] = None
    psnr: Optional[float] = None
    ssim: Optional[float] = None

    @property
    def completed_epochs(self) -> int:
        return len(self.rows)

    def l_r_curve(self) -> List[float]:
        return [row.loss.l_r for row in self.rows]


class MetricsRow(BaseModel):
    name: str
    scale: int
    psnr: Optional[float] = None
    ssim: Optional[float] = None
    baseline_psnr: Optional[float] = None
    baseline_ssim: Optional[float] = None


class MetricsReport(BaseModel):
    """Per-image rows plus their arithmetic means; absent columns stay None."""

    rows: List[MetricsRow]
    mean_psnr: Optional[float] = None
    mean_ssim: Optional[float] = None
    mean_baseline_psnr: Optional[float] = None
    mean_baseline_ssim: Optional[float] = None
    convention: Literal["y", "rgb"] = "y"
    shave_border: int = 0
    failures: Dict[str, str] = Field(default_factory=dict)

    @validator("mean_ssim")
    def validate_ssim_range(cls, v):
        if v is not None and not -1.0 <= v <= 1.0:
            raise ValueError("mean SSIM must lie in [-1, 1]")
        return v


class ConvCost(BaseModel):
    weights: int
    ops: int


class ReductionFactors(BaseModel):
    """Pointwise-to-standard ratios, kept as exact fractions."""

    F_W: Fraction
    F_O: Fraction

    class Config:
        arbitrary_types_allowed = True
        json_encoders = {Fraction: str}


class CostRow(BaseModel):
    layer: str
    kind: Literal["conv", "pointwise", "depthwise", "transposed", "dense"]
    K: int
    N_in: int
    P_out: int
    M_spatial: int
    weights: int
    ops: int
    bias: int = 0
    bn: int = 0


class CostSummary(BaseModel):
    rows: List[CostRow]
    total_weights: int
    total_ops: int
    total_bias: int
    total_bn: int
    conv_weights: int
    dense_weights: int


class RunManifest(BaseModel):
    """Everything needed to reproduce a command; written before work starts."""

    command: str
    config: Dict[str, Any]
    inputs: List[str] = Field(default_factory=list)
    output_dir: str
    seed: Optional[int] = None
    tool_version: str
    started_at: datetime = Field(default_factory=datetime.utcnow)
    finished_at: Optional[datetime] = None
    status: Literal["running", "completed", "failed"] = "running"


class SweepResult(BaseModel):
    axis: str
    curves: Dict[str, List[float]]
    report: Dict[str, MetricsReport]
    trend: Optional[str] = None


class TensorRecord(BaseModel):
    shape: List[int]
    dtype: Literal["float32", "float64"]
    data: str


class CheckpointDocument(BaseModel):
    """Versioned JSON checkpoint: config echo plus named parameter and buffer tensors."""

    version: int = CHECKPOINT_VERSION
    train_config: Dict[str, Any]
    tensors: Dict[str, TensorRecord]
    created_at: datetime = Field(default_factory=datetime.utcnow)
