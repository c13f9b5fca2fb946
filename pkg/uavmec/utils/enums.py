from enum import Enum


class Algorithm(str, Enum):
    """Registered scheduling algorithms"""
    RANDOM = "random"
    Q_SINGLE = "q-single"
    Q_MULTI = "q-multi"
    AC = "ac"            # Independent actor-critic, untied weights, no attention
    MAGCDRL = "magcdrl"  # Shared weights + graph attention

    @property
    def is_tabular(self) -> bool:
        return self in (Algorithm.Q_SINGLE, Algorithm.Q_MULTI)

    @property
    def is_neural(self) -> bool:
        return self in (Algorithm.AC, Algorithm.MAGCDRL)


class EnvironmentKind(str, Enum):
    """Which decision process an experiment runs"""
    MEC = "mec"
    MONITOR = "monitor"


class ScenarioType(str, Enum):
    """Where vehicle traces come from"""
    GRID = "grid"
    TRACE = "trace"


class MapSource(str, Enum):
    """Obstacle layout for the monitoring environment"""
    GRID = "grid"
    IMPORTED = "imported"
    COMBINED = "combined"  # Imported obstacles overlaid on a rows x cols grid


class ObservationScope(str, Enum):
    """What part of the world an agent observes"""
    GLOBAL = "global"  # Local crop + coarse global map
    LOCAL = "local"    # Local crop only, global channels zeroed


class ServingNode(str, Enum):
    """Kind of node a vehicle is attached to"""
    BS = "BS"
    UAV = "UAV"
