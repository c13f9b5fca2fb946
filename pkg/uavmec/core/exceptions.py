"""
Error types shared by every simulator module.
"""
from typing import Any, Dict, Optional


class SimulationError(Exception):
    """Base exception for simulator errors"""
    def __init__(self, message: str, error_code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)


class InvalidArgumentError(SimulationError, ValueError):
    """Raised when an operation receives arguments outside its domain"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, error_code="invalid_argument", details=details)


class ConfigError(SimulationError):
    """Raised for unusable configuration (CLI exit code 2)"""
    def __init__(self, message: str, config_path: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        self.config_path = config_path
        if config_path:
            message = f"{config_path}: {message}"
        super().__init__(message, error_code="config_error", details=details)


class TraceFormatError(ConfigError):
    """Raised when a trace CSV, lane network JSON or occupancy map is malformed"""
    pass


class TrainingError(SimulationError):
    """Raised when training cannot continue (CLI exit code 3)"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, error_code="training_error", details=details)


class CheckpointError(SimulationError):
    """Raised when a checkpoint cannot be written or decoded"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, error_code="checkpoint_error", details=details)
