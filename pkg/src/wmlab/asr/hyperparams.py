from pydantic import BaseModel, ConfigDict, Field


class AsrTrainingConfig(BaseModel):
    """Architecture and optimizer settings of the recognizer."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    hidden_size: int = Field(default=128, ge=1)
    epochs: int = Field(default=20, ge=0)
    lr: float = Field(default=0.05, gt=0)
    batch_size: int = Field(default=16, ge=1)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    clip_norm: float = Field(default=5.0, gt=0)
