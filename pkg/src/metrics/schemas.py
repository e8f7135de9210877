from pydantic import BaseModel, ConfigDict, Field, computed_field

from src.metrics.constants import (
    BN_FLOPS_PER_ELEMENT,
    FLOPS_PER_MAC,
    GIGA,
    MEGA,
    POOL_FLOPS_PER_ELEMENT,
    RELU_FLOPS_PER_ELEMENT,
    RESIDUAL_ADD_FLOPS_PER_ELEMENT,
)


class FlopConvention(BaseModel):
    """Counting rates for layers other than conv and linear."""

    mac: int = Field(FLOPS_PER_MAC, ge=1)
    bn: int = Field(BN_FLOPS_PER_ELEMENT, ge=0)
    relu: int = Field(RELU_FLOPS_PER_ELEMENT, ge=0)
    pool: int = Field(POOL_FLOPS_PER_ELEMENT, ge=0)
    residual_add: int = Field(RESIDUAL_ADD_FLOPS_PER_ELEMENT, ge=0)
    count_attention: bool = False

    model_config = ConfigDict(extra="forbid")


class LayerCost(BaseModel):
    layer_id: str
    kind: str
    params: int = 0
    buffers: int = 0
    flops: int = 0


class CostReport(BaseModel):
    """Parameter and FLOP totals with their per-layer breakdown.

    ``params`` excludes BN running statistics; those are counted in ``buffers``.
    """

    params: int = 0
    buffers: int = 0
    flops: int = 0
    layers: list[LayerCost] = Field(default_factory=list)

    @computed_field
    @property
    def mparams(self) -> float:
        return self.params / MEGA

    @computed_field
    @property
    def gflops(self) -> float:
        return self.flops / GIGA

    def layer(self, layer_id: str) -> LayerCost | None:
        return next((entry for entry in self.layers if entry.layer_id == layer_id), None)


class LatencyReport(BaseModel):
    median_ms: float
    repeats: int
    warmup: int
    input_shape: list[int]
    device: str
    threads: int
    torch_version: str
    platform: str
    processor: str
