"""Exception hierarchy shared by the simulator, the learner and the CLI."""
from typing import Optional, Dict, Any


EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class FogForgeError(Exception):
    """Base error with consistent error code format."""

    exit_code: int = EXIT_RUNTIME

    def __init__(
        self,
        code: str,
        message: str,
        details: Optional[Dict[str, Any]] = None
    ):
        self.code = code
        self.message = message
        self.details = details or {}
        super().__init__(f"{code}: {message}")

    def to_dict(self) -> Dict[str, Any]:
        """Structured payload used by JSON logging and the CLI."""
        return {
            "code": self.code,
            "message": self.message,
            "details": self.details
        }


class InvalidParameterError(FogForgeError):
    """Raised when a numeric parameter is outside its valid domain."""

    exit_code = EXIT_USAGE

    def __init__(self, name: str, value: Any, reason: str):
        super().__init__(
            code="INVALID_PARAMETER",
            message=f"Invalid value for {name}: {reason}",
            details={"parameter": name, "value": repr(value), "reason": reason}
        )


class DisconnectedGraphError(FogForgeError):
    """Raised when an operation needs a connected graph."""

    def __init__(self, components: int):
        super().__init__(
            code="DISCONNECTED_GRAPH",
            message=f"Graph is not connected ({components} components)",
            details={"components": components}
        )


class TopologyTooSmallError(FogForgeError):
    """Raised when role assignment leaves too few Fog nodes or no source clusters."""

    exit_code = EXIT_USAGE

    def __init__(self, fog_count: int, cluster_count: int, reason: str = None):
        message = reason or f"Topology has {fog_count} Fog nodes, at least 2 are required"
        super().__init__(
            code="TOPOLOGY_TOO_SMALL",
            message=message,
            details={"fog_count": fog_count, "cluster_count": cluster_count}
        )


class TopologyFormatError(FogForgeError):
    """Raised when a topology document cannot be parsed or violates invariants."""

    exit_code = EXIT_USAGE

    def __init__(self, reason: str):
        super().__init__(
            code="TOPOLOGY_FORMAT",
            message=f"Invalid topology document: {reason}",
            details={"reason": reason}
        )


class UnreachableNodeError(FogForgeError):
    """Raised when no path connects two nodes."""

    def __init__(self, source: int, target: int):
        super().__init__(
            code="UNREACHABLE_NODE",
            message=f"No route from node {source} to node {target}",
            details={"source": source, "target": target}
        )


class InvalidActionError(FogForgeError):
    """Raised when a placement decision names a node that cannot execute jobs."""

    def __init__(self, node_id: Any, job_id: int):
        super().__init__(
            code="INVALID_ACTION",
            message=f"Job {job_id} assigned to non-Fog node {node_id}",
            details={"node_id": repr(node_id), "job_id": job_id}
        )


class InsufficientDataError(FogForgeError):
    """Raised when a statistic is requested over no data."""

    exit_code = EXIT_USAGE

    def __init__(self, what: str):
        super().__init__(
            code="INSUFFICIENT_DATA",
            message=f"Cannot compute {what} over an empty input",
            details={"what": what}
        )


class MissingCheckpointError(FogForgeError):
    """Raised when a transfer mode needs a previous-phase checkpoint that is absent."""

    def __init__(self, mode: str):
        super().__init__(
            code="MISSING_CHECKPOINT",
            message=f"Transfer mode '{mode}' requires a previous-phase checkpoint",
            details={"mode": mode}
        )


class CheckpointCorruptError(FogForgeError):
    """Raised when a checkpoint file is truncated or unreadable."""

    def __init__(self, path: str, reason: str):
        super().__init__(
            code="CHECKPOINT_CORRUPT",
            message=f"Checkpoint {path} is corrupt: {reason}",
            details={"path": path, "reason": reason}
        )


class CheckpointVersionError(FogForgeError):
    """Raised when a checkpoint was written with another format version."""

    def __init__(self, path: str, found: Any, expected: int):
        super().__init__(
            code="CHECKPOINT_VERSION",
            message=f"Checkpoint {path} has format_version {found}, expected {expected}",
            details={"path": path, "found": found, "expected": expected}
        )


class ConfigError(FogForgeError):
    """Raised when an experiment config fails validation."""

    exit_code = EXIT_USAGE

    def __init__(self, key_path: str, reason: str):
        super().__init__(
            code="CONFIG_ERROR",
            message=f"Invalid config at '{key_path}': {reason}",
            details={"key_path": key_path, "reason": reason}
        )


class ValidationFailedError(FogForgeError):
    """Raised when one or more built-in oracle checks fail."""

    exit_code = EXIT_VALIDATION

    def __init__(self, failed: list):
        super().__init__(
            code="VALIDATION_FAILED",
            message=f"{len(failed)} oracle check(s) failed: {', '.join(failed)}",
            details={"failed": failed}
        )
