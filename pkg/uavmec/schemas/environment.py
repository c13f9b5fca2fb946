from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from uavmec.utils.enums import MapSource, ObservationScope


# ============ Environment Schemas ============

class Lattice(BaseModel):
    """Discrete UAV positions: x_max * y_max columns, z_max altitude levels.

    Neighbouring lattice points are half a cube side apart.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    x_max: int = Field(10, ge=1)
    y_max: int = Field(10, ge=1)
    z_max: int = Field(1, ge=1)
    cell_size: float = Field(200.0, gt=0, description="Cube side length (m)")

    @property
    def step(self) -> float:
        return self.cell_size / 2.0

    @property
    def num_points(self) -> int:
        return self.x_max * self.y_max * self.z_max

    def contains(self, cell: Tuple[int, int, int]) -> bool:
        x, y, z = cell
        return 0 <= x < self.x_max and 0 <= y < self.y_max and 0 <= z < self.z_max


class MecConfig(BaseModel):
    """UAV-MEC decision process settings"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    coverage_radius_m: float = Field(150.0, gt=0, description="Horizontal radius a UAV serves")
    tie_tolerance: float = Field(1e-9, ge=0, description="MOS differences within this count as equal")
    marginal_init: bool = True  # Start UAVs at the lattice points farthest from the BS
    initial_cells: Optional[List[Tuple[int, int, int]]] = None
    horizon: Optional[int] = Field(None, ge=1, description="Cap on slots per episode")
    deployment_episodes: Optional[int] = Field(
        None, ge=1, description="Q-learning episodes that place the UAVs on the first slot before training"
    )


class MonitorConfig(BaseModel):
    """Constant-monitoring environment settings"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    coverage_radius: float = Field(1.5, ge=1, description="Observation radius R (cells)")
    decay: float = Field(1.0, ge=0, description="Penalty added per unobserved slot")
    penalty_cap: float = Field(10.0, gt=0, description="Largest penalty magnitude R_max")
    map_source: MapSource = MapSource.GRID
    map_path: Optional[str] = None
    rows: int = Field(8, ge=1)
    cols: int = Field(8, ge=1)
    horizon: int = Field(50, ge=1, description="Slots per episode")
    observation_scope: ObservationScope = ObservationScope.GLOBAL

    @model_validator(mode="after")
    def _check_map(self) -> "MonitorConfig":
        if self.map_source != MapSource.GRID and not self.map_path:
            raise ValueError(f"map_source '{self.map_source.value}' requires map_path")
        return self
