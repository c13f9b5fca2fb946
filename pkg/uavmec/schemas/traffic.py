from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, model_validator


# ============ Lane Network Schemas ============

class Intersection(BaseModel):
    """Road intersection I_i"""
    model_config = ConfigDict(frozen=True)

    id: int
    x: float
    y: float


class Lane(BaseModel):
    """Road segment L_j between two intersections; traversable both ways"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: int
    from_id: int = Field(..., alias="from")
    to_id: int = Field(..., alias="to")
    length: float = Field(..., gt=0, description="metres")
    speed_limit: float = Field(..., gt=0, description="m/s")


class LaneNetwork(BaseModel):
    """Intersections and the lanes joining them"""
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "intersections": [{"id": 0, "x": 0.0, "y": 0.0}, {"id": 1, "x": 100.0, "y": 0.0}],
                "lanes": [{"id": 0, "from": 0, "to": 1, "length": 100.0, "speed_limit": 16.67}],
            }
        },
    )

    intersections: List[Intersection]
    lanes: List[Lane]

    @model_validator(mode="after")
    def _check_references(self) -> "LaneNetwork":
        known = {i.id for i in self.intersections}
        if len(known) != len(self.intersections):
            raise ValueError("Intersection ids must be unique")
        if len({lane.id for lane in self.lanes}) != len(self.lanes):
            raise ValueError("Lane ids must be unique")
        for lane in self.lanes:
            if lane.from_id not in known or lane.to_id not in known:
                raise ValueError(f"Lane {lane.id} references an unknown intersection")
        return self

    def intersection_map(self) -> Dict[int, Intersection]:
        return {i.id: i for i in self.intersections}

    def lane_map(self) -> Dict[int, Lane]:
        return {lane.id: lane for lane in self.lanes}

    def incident_lanes(self, intersection_id: int) -> List[Lane]:
        return [lane for lane in self.lanes if intersection_id in (lane.from_id, lane.to_id)]
