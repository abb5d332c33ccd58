"""Request/response models for the HTTP service.

Field names mirror the CLI flags one-to-one so the CLI can stay a thin
pass-through; `lambda` is a Python keyword, hence the alias.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model: Literal["rbm", "orbm", "irbm"]
    data: str
    out: str
    hidden: int = Field(default=1, ge=0)
    beta: float = 1.01
    lr: float = 0.01
    reg: Literal["none", "l1", "l2"] = "none"
    lam: float = Field(default=0.0, alias="lambda", ge=0.0)
    batch: int = Field(default=64, ge=1)
    cd_steps: int = Field(default=10, ge=1)
    method: Literal["cd", "pcd"] = "pcd"
    epochs: int = Field(default=1, ge=0)
    seed: int = 0
    init_scale: float = 0.01
    binarize_seed: int = 0
    max_hidden: Optional[int] = None
    checkpoint_every: int = Field(default=0, ge=0)


class TrainResponse(BaseModel):
    checkpoint: str
    history_csv: str
    manifest: str
    model: str
    final_hidden: int
    epochs: int
    mean_free_energy: Optional[float]
    wall_seconds: float


class EvalRequest(BaseModel):
    checkpoint: str
    data: str
    exact: bool = False
    ais_inter: int = Field(default=100_000, ge=1)
    ais_chains: int = Field(default=5000, ge=2)
    ais_base: Literal["zero", "data"] = "zero"
    seed: int = 0
    binarize_seed: int = 0
    csv: Optional[str] = None
    threads: int = Field(default=1, ge=1)


class EvalResponse(BaseModel):
    model: str
    size: int
    lnZ: float
    lnZ_lo: float
    lnZ_hi: float
    nll: float
    ci: float
    ess: Optional[float] = None
    method: Literal["exact", "ais"]
    csv: Optional[str] = None


class SampleRequest(BaseModel):
    checkpoint: str
    out: str
    num_samples: int = Field(default=64, ge=1)
    steps: int = Field(default=10_000, ge=0)
    init: Literal["random", "zK", "auto"] = "auto"
    seed: int = 0
    img_shape: Optional[str] = None  # "HxW"


class SampleResponse(BaseModel):
    out: str
    num_samples: int
    steps: int
    init: str


class InspectZRequest(BaseModel):
    checkpoint: str
    data: str
    out: str
    intervals: Optional[str] = None  # "a:b,a:b"
    top_k: int = Field(default=10, ge=1)
    binarize_seed: int = 0
    limit: Optional[int] = Field(default=None, ge=1)


class IntervalTop(BaseModel):
    lo: int
    hi: int
    indices: list[int]
    probs: list[float]


class InspectZResponse(BaseModel):
    out: str
    num_examples: int
    support_max: int
    per_example_csvs: int
    intervals: list[IntervalTop]


class GradcheckRequest(BaseModel):
    checkpoint: str
    seed: int = 0
    trials: int = Field(default=3, ge=1)
    rel_tol: float = 1e-6
    abs_floor: float = 1e-8
    step: float = 1e-5


class BlockReport(BaseModel):
    name: str
    max_err_ratio: float
    worst_index: Optional[list[int]]
    passed: bool


class GradcheckResponse(BaseModel):
    passed: bool
    trials: int
    blocks: list[BlockReport]
