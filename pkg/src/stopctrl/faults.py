"""Failure types shared across the solvers and the command line.

The command line maps these onto exit codes: configuration problems
(ValueError subclasses raised by model/grid construction) exit 1,
AssumptionError exits 2, SolverFault and TopologyFault exit 3, and
ArtifactMismatch exits 4.
"""


class AssumptionError(RuntimeError):
    """A hard structural assumption failed the pre-solve screen."""

    def __init__(self, report, message: str | None = None):
        self.report = report
        if message is None:
            names = ", ".join(c.name for c in report.failures())
            message = f"assumption screen failed: {names}"
        super().__init__(message)


class SolverFault(RuntimeError):
    """A backward level iteration failed to converge (or a scheme
    stability precondition was violated)."""

    def __init__(self, message: str, level: int | None = None, delta: float | None = None):
        self.level = level
        self.delta = delta
        super().__init__(message)


class TopologyFault(RuntimeError):
    """Extracted regions contradict the one-boundary structure."""

    def __init__(self, message: str, level: int | None = None):
        self.level = level
        super().__init__(message)


class ArtifactMismatch(RuntimeError):
    """Artifacts fed to a pipeline stage carry different config hashes."""
