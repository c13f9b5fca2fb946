from pydantic import BaseModel, ConfigDict, Field, model_validator


# ============ QoE Schemas ============

class MosWeights(BaseModel):
    """Convex weights of the delay and rate MOS components"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    w_delay: float = Field(0.0, ge=0, le=1)
    w_rate: float = Field(1.0, ge=0, le=1)

    @model_validator(mode="after")
    def _check_convex(self) -> "MosWeights":
        if abs(self.w_delay + self.w_rate - 1.0) > 1e-12:
            raise ValueError("w_delay + w_rate must equal 1")
        return self


class MosRateMap(BaseModel):
    """Log-linear rate-to-MOS mapping: MOS 1 at or below the floor, 5 at or above the ceiling"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    rate_floor: float = Field(1e5, gt=0, description="bit/s")
    rate_ceiling: float = Field(1e8, gt=0, description="bit/s")

    @model_validator(mode="after")
    def _check_order(self) -> "MosRateMap":
        if self.rate_floor >= self.rate_ceiling:
            raise ValueError("rate_floor must be below rate_ceiling")
        return self
