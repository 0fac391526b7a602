"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class DecorError(Exception):
    """Base class for all engine errors."""


class MeshParseError(DecorError):
    """Malformed OBJ input (bad line, bad index, empty mesh)."""


class NoSurfaceError(DecorError):
    """No supporting surface survived extraction filtering."""


class ChatBackendError(DecorError):
    """Chat backend failed (transport, auth, timeout, exhausted script)."""


class ChatTransportError(ChatBackendError):
    """Transient transport failure that persisted through all retries."""


class ChatTimeoutError(ChatTransportError):
    """Backend did not answer within the request timeout."""


class ChatAuthError(ChatBackendError):
    """Backend rejected the configured credential."""


class StageExhaustedError(DecorError):
    """An LLM stage failed validation on every allowed attempt."""

    def __init__(self, stage: str, report, transcript=None):
        self.stage = stage
        self.report = report
        self.transcript = transcript or []
        summary = "; ".join(v.code for v in report.violations) if report else "no report"
        super().__init__(f"stage '{stage}' exhausted retries: {summary}")


class CompileError(DecorError):
    """Plan directives cannot be compiled into a constraint set."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


class InfeasibleLayoutError(DecorError):
    """No feasible position exists for an asset under the hard constraints."""

    def __init__(self, asset_id: str, detail: str = ""):
        self.asset_id = asset_id
        msg = f"no feasible placement for asset '{asset_id}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class RetrievalError(DecorError):
    """Catalog lookup failed (empty catalog, missing file)."""


class EditError(DecorError):
    """A scene edit could not be applied; the original scene is unchanged."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


class InfeasibleEditError(EditError):
    """Edit would leave the scene without a feasible layout."""

    def __init__(self, message: str):
        super().__init__("infeasible_edit", message)


class UnresolvableTargetError(EditError):
    """A free-form edit instruction names no asset present in the scene."""

    def __init__(self, message: str):
        super().__init__("unresolvable_target", message)
