from typing import Any, Dict


class FlowError(ValueError):
    """Base error for the scheme; ``details`` carries structured diagnostics."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details: Dict[str, Any] = details

    def with_details(self, **extra: Any) -> "FlowError":
        self.details.update(extra)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class DimensionError(FlowError):
    pass


class ManifoldError(FlowError):
    pass


class RankDeficientError(FlowError):
    pass


class GridMismatchError(FlowError):
    pass


class SnapshotFormatError(FlowError):
    def __init__(self, message: str, line: int, **details: Any):
        super().__init__(f"line {line}: {message}", line=line, **details)
        self.line = line


class InfeasibleStartError(FlowError):
    pass


class StagnationError(FlowError):
    pass


class AdmissibilityError(FlowError):
    pass


class LifespanError(FlowError):
    pass


class StepSizeError(FlowError):
    pass


class GeometryError(FlowError):
    pass


class BoundViolationError(FlowError):
    pass


class ConfigError(FlowError):
    def __init__(self, message: str, key: str = "", **details: Any):
        text = f"{key}: {message}" if key else message
        super().__init__(text, key=key, **details)
        self.key = key
