"""Exception hierarchy shared across the toolkit."""


class ScenecError(Exception):
    """Base class for all toolkit errors."""


class EmptyInput(ScenecError):
    pass


class InvalidValue(ScenecError, ValueError):
    """A value violates a type invariant."""


class UnknownCategory(ScenecError):
    pass


class NonConvergent(ScenecError):
    """Verifier fixes kept producing new fixable issues."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__(f"plan fixes did not converge ({len(self.issues)} new issues)")


# -- geometry kernel ---------------------------------------------------------


class KernelError(ScenecError):
    """Any failure raised while constructing or modifying a mesh."""

    reason = "KernelError"


class DegenerateParams(KernelError):
    reason = "DegenerateParams"


class SelfIntersection(KernelError):
    reason = "SelfIntersection"


class WidthTooLarge(KernelError):
    reason = "WidthTooLarge"


class UnsupportedTopology(KernelError):
    reason = "UnsupportedTopology"


# -- program engine ----------------------------------------------------------


class ExecError(ScenecError):
    """A part program failed at a specific op."""

    def __init__(self, op_index: int, reason: str, detail: str = "", part_name: str = ""):
        self.op_index = op_index
        self.reason = reason
        self.detail = detail
        self.part_name = part_name
        super().__init__(f"{part_name or 'program'} op {op_index}: {reason} {detail}".strip())

    def to_dict(self) -> dict:
        return {
            "op_index": self.op_index,
            "reason": self.reason,
            "detail": self.detail,
            "part_name": self.part_name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecError":
        return cls(int(data["op_index"]), str(data["reason"]), data.get("detail", ""), data.get("part_name", ""))


class UnloweredSymmetry(ScenecError):
    pass


class NameMismatch(ScenecError):
    pass


class BuildFailure(ScenecError):
    """The two-budget loop ran out of attempts."""

    def __init__(self, stage: str, attempts_used: int, last_error: str, part_name: str | None = None):
        self.stage = stage
        self.attempts_used = attempts_used
        self.last_error = last_error
        self.part_name = part_name
        super().__init__(f"build failed at {stage} after {attempts_used} attempts: {last_error}")

    def to_dict(self) -> dict:
        out = {"stage": self.stage, "attempts_used": self.attempts_used, "last_error": self.last_error}
        if self.part_name is not None:
            out["part_name"] = self.part_name
        return out


# -- articulation / export ---------------------------------------------------


class UnclassifiableMovable(ScenecError):
    pass


class OpenMeshNotShell(ScenecError):
    pass


class InvalidAsset(ScenecError):
    pass


class ParseError(ScenecError):
    pass


class SchemaError(ScenecError):
    pass


class VersionMismatch(ScenecError):
    pass


# -- scene -------------------------------------------------------------------


class UnresolvedSupport(ScenecError):
    pass


class NoSupportHit(ScenecError):
    pass


class DuplicateId(ScenecError):
    pass


class UnknownId(ScenecError):
    pass


class InvalidOverridePath(ScenecError):
    pass


class DegenerateFloor(ScenecError):
    pass


class UnknownRelationType(ScenecError):
    pass


class LoadError(ScenecError):
    pass


# -- backend -----------------------------------------------------------------


class BackendError(ScenecError):
    """Base for failures talking to a planner backend."""


class BackendTimeout(BackendError):
    pass


class SchemaViolation(BackendError):
    pass


class TransportError(BackendError):
    pass


class Unsupported(BackendError):
    """The backend does not offer the requested capability."""


class PlanRejected(ScenecError):
    """The verifier rejected a plan; ``report`` holds the issues."""

    def __init__(self, report):
        self.report = report
        super().__init__(report.to_text())
