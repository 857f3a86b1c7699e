from typing import Any, List, Optional, Sequence


class FceLabError(Exception):
    """Base exception for the fcelab package."""
    pass


class GameStructureError(FceLabError):
    """Raised when a game tree is malformed (orphan node, dangling child, cycle)."""

    def __init__(self, message: str, node_id: Optional[str] = None, code: str = "E-STRUCTURE"):
        self.node_id = node_id
        self.code = code
        super().__init__(message)


class PerfectRecallError(FceLabError):
    """Raised when an infoset merges nodes with different player-view ancestries."""

    def __init__(self, violations: Sequence[Any]):
        self.violations = list(violations)
        labels = ", ".join(v.label for v in self.violations)
        super().__init__(f"perfect recall violated at infoset(s): {labels}")


class GameParseError(FceLabError):
    """Raised on a malformed game document; renders as file:line:col: code: message."""

    def __init__(self, code: str, message: str, line: int = 0, column: int = 0,
                 path: Optional[str] = None):
        self.code = code
        self.message = message
        self.line = line
        self.column = column
        self.path = path or "<game>"
        super().__init__(f"{self.path}:{line}:{column}: {code}: {message}")


class ProbabilitySumError(GameParseError):
    """Raised when a chance node's probabilities do not sum to 1."""

    def __init__(self, node_id: str, total: float, line: int = 0, column: int = 0,
                 path: Optional[str] = None):
        self.node_id = node_id
        self.total = total
        super().__init__("E-PROB", f"chance node '{node_id}' probabilities sum to {total!r}, expected 1",
                         line, column, path)


class UnknownIdError(FceLabError):
    """Raised when an infoset, action or node id does not exist in the game."""
    pass


class ProfileCapError(FceLabError):
    """Raised when an exhaustive oracle would enumerate more profiles than allowed."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"game too large for exhaustive oracle: {count} > cap {cap}")


class MemoryCapError(FceLabError):
    """Raised when a learner's regret rows outgrow the configured memory cap."""

    def __init__(self, rows: int, cap: int):
        self.rows = rows
        self.cap = cap
        super().__init__(
            f"regret row count {rows} exceeds memory cap {cap} "
            f"(signal-history rows grow with T * M; see the memory usage guard)")


class CheckpointError(FceLabError):
    """Raised when a trace lacks a usable resume checkpoint."""
    pass


class SignalFormatError(FceLabError):
    """Raised when a signal file is malformed or its weights do not sum to 1."""

    def __init__(self, message: str, line: int = 0, problems: Optional[List[str]] = None):
        self.line = line
        self.problems = problems or []
        super().__init__(f"line {line}: {message}" if line else message)


class EngineError(FceLabError):
    """Raised on invalid regret-engine input (nonpositive mu, arity mismatch)."""
    pass


class ChanceRealizationError(FceLabError):
    """Raised when a profile of a game with chance nodes carries no realized chance moves."""
    pass


class ConfigError(FceLabError):
    """Raised on an invalid run configuration."""
    pass


class EmptyTraceError(FceLabError):
    """Raised when an audit is asked to summarise a trace with no timesteps."""
    pass


class RelationError(FceLabError):
    """Raised when (I^P, a, I) does not satisfy P(I) = P(I^P) and I in DES(I^P)."""
    pass


class TraceFormatError(FceLabError):
    """Raised when a trace file is malformed or was recorded on a different game."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"trace line {line}: {message}" if line else message)
