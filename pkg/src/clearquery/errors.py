"""Exception types shared across the package.

Every exception carries a stable machine-readable ``code`` so the HTTP layer
can map module errors onto (status, code) pairs without string matching.
"""

from __future__ import annotations


class ClearQueryError(Exception):
    """Base class for all package errors."""

    code = "internal_error"


# -- schema catalog -----------------------------------------------------------

class NotADatabaseError(ClearQueryError):
    """The file exists but cannot be read as a SQLite database."""

    code = "not_a_database"


class IntrospectionError(ClearQueryError):
    """A catalog query failed while extracting the schema."""

    code = "introspection_failed"


class UnknownTableError(ClearQueryError):
    code = "unknown_table"

    def __init__(self, name: str):
        super().__init__(f"unknown table: {name!r}")
        self.name = name


class EmptySelectionError(ClearQueryError):
    code = "empty_selection"


# -- llm gateway --------------------------------------------------------------

class ProviderError(ClearQueryError):
    """Transport/auth failure, or an empty completion, after retries."""

    code = "provider_error"


class NoScriptEntryError(ProviderError):
    """A scripted/replay provider has no entry for the request digest.

    Signals a test-fixture gap; never silently falls through to live calls.
    """

    code = "no_script_entry"

    def __init__(self, digest: str, purpose: str):
        super().__init__(f"no scripted response for {purpose} request (digest {digest[:12]}...)")
        self.digest = digest
        self.purpose = purpose


class MalformedOutputError(ClearQueryError):
    """Model output contained no extractable value of the expected kind."""

    code = "malformed_output"

    def __init__(self, expected_kind: str, detail: str):
        super().__init__(f"malformed {expected_kind} output: {detail}")
        self.expected_kind = expected_kind
        self.detail = detail


class CorruptTranscriptError(ClearQueryError):
    code = "corrupt_transcript"

    def __init__(self, path: str, line_number: int, detail: str):
        super().__init__(f"{path}:{line_number}: {detail}")
        self.path = path
        self.line_number = line_number


# -- intent linker ------------------------------------------------------------

class UnknownMentionError(ClearQueryError):
    code = "unknown_mention"

    def __init__(self, mention_id: str):
        super().__init__(f"unknown mention: {mention_id!r}")
        self.mention_id = mention_id


class UnknownFieldError(ClearQueryError):
    code = "unknown_field"

    def __init__(self, table: str, column: str):
        super().__init__(f"field {table}.{column} is not part of the selected schema")
        self.table = table
        self.column = column


class NotConfirmedError(ClearQueryError):
    code = "not_confirmed"


# -- plan graph ---------------------------------------------------------------

class InvalidPlanError(ClearQueryError):
    code = "invalid_plan"

    def __init__(self, reason: str):
        super().__init__(f"invalid plan: {reason}")
        self.reason = reason


class IncompleteRegenerationError(ClearQueryError):
    code = "incomplete_regeneration"

    def __init__(self, missing_ids: list[str]):
        super().__init__(f"no replacement received for stale steps: {', '.join(missing_ids)}")
        self.missing_ids = list(missing_ids)


class UnknownStepError(ClearQueryError):
    code = "unknown_step"

    def __init__(self, step_id: str):
        super().__init__(f"unknown step: {step_id!r}")
        self.step_id = step_id


# -- session engine -----------------------------------------------------------

class InvalidStateError(ClearQueryError):
    code = "invalid_state"

    def __init__(self, message: str, state: str | None = None):
        super().__init__(message)
        self.state = state


class SessionNotFoundError(ClearQueryError):
    code = "session_not_found"

    def __init__(self, session_id: str):
        super().__init__(f"no session with id {session_id!r}")
        self.session_id = session_id


class CorruptSessionError(ClearQueryError):
    code = "corrupt_session"


# -- http api -----------------------------------------------------------------

class BindError(ClearQueryError):
    code = "bind_error"


class ConfigError(ClearQueryError):
    code = "config_error"
