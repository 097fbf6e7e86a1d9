"""Core evaluation model: typed values, payloads, request contexts, decisions.

Evaluation is total and fail-closed: every evaluation ends in exactly ALLOW or
DENY with one typed reason from a closed enumeration.  There is no "maybe" and
no stringly-typed reason channel; new failure modes require a new code, not a
new spelling.

Numeric quantities are exact decimals end to end.  Binary floating point is
banned from the evaluation path: a constraint of 5000 must mean 5000, not the
nearest representable double.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Mapping, Optional, Sequence

ALLOW = "ALLOW"
DENY = "DENY"

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1

_DECIMAL_RE = re.compile(r"^[+-]?[0-9]+(\.[0-9]+)?$")
_INTEGER_RE = re.compile(r"^[+-]?[0-9]+$")
_URI_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:[^\s]+$")
_FRACTION_RE = re.compile(r"\.([0-9]+)(?=$|[+-])")


class ValueParseError(ValueError):
    """A text form does not parse as its declared semantic type."""


class SemanticType(str, Enum):
    """Closed set of value types a semantic identifier may declare."""

    STRING_ID = "string_id"
    STRING_CODE = "string_code"
    TIMESTAMP = "timestamp"
    DECIMAL = "decimal"
    INTEGER = "integer"
    URI = "uri"
    IP_ADDRESS = "ip_address"


STRING_KINDS = frozenset(
    {SemanticType.STRING_ID, SemanticType.STRING_CODE, SemanticType.URI, SemanticType.IP_ADDRESS}
)
NUMERIC_KINDS = frozenset({SemanticType.DECIMAL, SemanticType.INTEGER})


class DenyCode(str, Enum):
    """Every reason an evaluation may deny.  Closed: codes are added by revision, never ad hoc."""

    SIGNATURE_INVALID = "signature_invalid"
    ISSUER_UNTRUSTED = "issuer_untrusted"
    ISSUER_NOT_VETTED = "issuer_not_vetted"
    AUDIENCE_MISMATCH = "audience_mismatch"
    PROOF_OF_POSSESSION_FAILED = "proof_of_possession_failed"
    SUBJECT_BINDING_MISMATCH = "subject_binding_mismatch"
    CREDENTIAL_EXPIRED = "credential_expired"
    CREDENTIAL_REVOKED = "credential_revoked"
    CREDENTIAL_INCOMPLETE = "credential_incomplete"
    PERMISSION_DENIED = "permission_denied"
    CONSTRAINT_UNKNOWN = "constraint_unknown"
    CONTEXT_FIELD_MISSING = "context_field_missing"
    CONSTRAINT_FAILED = "constraint_failed"
    LOCAL_POLICY_DENIED = "local_policy_denied"
    DELEGATION_DEPTH_EXCEEDED = "delegation_depth_exceeded"
    DELEGATION_CHAIN_BROKEN = "delegation_chain_broken"
    DELEGATION_WIDENED = "delegation_widened"
    MAPPING_PROFILE_MISSING = "mapping_profile_missing"
    MAPPING_PROFILE_INVALID = "mapping_profile_invalid"
    SEMANTIC_IDENTIFIER_UNKNOWN = "semantic_identifier_unknown"
    SEMANTIC_ALIAS_CONFLICT = "semantic_alias_conflict"
    SEMANTIC_ALIAS_MISSING = "semantic_alias_missing"
    SEMANTIC_TYPE_MISMATCH = "semantic_type_mismatch"
    WORKFLOW_POLICY_DENIED = "workflow_policy_denied"
    STATE_AUTHORITY_UNPERMITTED = "state_authority_unpermitted"
    STATE_AUTHORITY_UNREACHABLE = "state_authority_unreachable"
    STATE_LIMIT_EXCEEDED = "state_limit_exceeded"
    STATE_STALE = "state_stale"
    STATE_SEQUENCE_INVALID = "state_sequence_invalid"
    STATE_SIGNATURE_INVALID = "state_signature_invalid"


@dataclass(frozen=True)
class DenialReason:
    code: DenyCode
    detail: str = ""

    def to_dict(self) -> dict:
        return {"code": self.code.value, "detail": self.detail}

    @staticmethod
    def from_dict(obj: dict) -> "DenialReason":
        return DenialReason(code=DenyCode(obj["code"]), detail=str(obj.get("detail", "")))


# --- timestamps -------------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    """RFC 3339 text to an aware instant.  Naive timestamps are ambiguous and rejected."""
    if not isinstance(text, str) or not text:
        raise ValueParseError("timestamp must be RFC 3339 text")
    normalized = text.strip()
    if normalized.endswith(("Z", "z")):
        normalized = normalized[:-1] + "+00:00"
    # Python 3.10 only parses 3- or 6-digit fractions; RFC 3339 allows any
    # length, and render_timestamp itself emits trimmed fractions.
    fraction = _FRACTION_RE.search(normalized)
    if fraction and len(fraction.group(1)) not in (3, 6):
        digits = fraction.group(1)[:6].ljust(6, "0")
        normalized = normalized[: fraction.start(1)] + digits + normalized[fraction.end(1):]
    try:
        value = datetime.fromisoformat(normalized)
    except ValueError as exc:
        raise ValueParseError(f"invalid timestamp {text!r}: {exc}") from exc
    if value.tzinfo is None:
        raise ValueParseError(f"timestamp {text!r} has no UTC offset")
    return value.astimezone(timezone.utc)


def render_timestamp(value: datetime) -> str:
    """Canonical UTC text form, 'Z' suffix, sub-second digits only when present."""
    if value.tzinfo is None:
        raise ValueParseError("cannot render a naive timestamp")
    value = value.astimezone(timezone.utc)
    if value.microsecond:
        return value.strftime("%Y-%m-%dT%H:%M:%S.%f").rstrip("0") + "Z"
    return value.strftime("%Y-%m-%dT%H:%M:%SZ")


def _reject_control_chars(text: str, kind: SemanticType) -> None:
    for ch in text:
        if ord(ch) < 0x20 or ord(ch) == 0x7F:
            raise ValueParseError(f"{kind.value} value contains a control character")


# --- typed values -----------------------------------------------------------

@dataclass(frozen=True)
class TypedValue:
    """A context or constraint value together with its semantic type.

    ``text`` is the lossless text form (decimals keep their given digits, so
    text -> value -> text round-trips exactly).  ``value`` is the parsed form
    used for comparison: Decimal, int, aware datetime, or str.
    """

    kind: SemanticType
    value: object
    text: str

    def as_decimal(self) -> Decimal:
        if self.kind is SemanticType.DECIMAL:
            return self.value  # type: ignore[return-value]
        if self.kind is SemanticType.INTEGER:
            return Decimal(self.value)  # type: ignore[arg-type]
        raise ValueParseError(f"{self.kind.value} is not numeric")

    def to_dict(self) -> dict:
        return {"type": self.kind.value, "value": self.text}

    @staticmethod
    def from_dict(obj: dict) -> "TypedValue":
        if not isinstance(obj, dict) or "type" not in obj or "value" not in obj:
            raise ValueParseError("typed value requires 'type' and 'value'")
        return parse_typed_value(obj["value"], SemanticType(obj["type"]))


def parse_typed_value(text: str, kind: SemanticType) -> TypedValue:
    """Parse a text form by declared type.  Anything ambiguous or lossy is a parse error."""
    if not isinstance(text, str):
        raise ValueParseError(f"{kind.value} values travel as text, got {type(text).__name__}")
    if kind is SemanticType.DECIMAL:
        if not _DECIMAL_RE.match(text):
            raise ValueParseError(f"invalid decimal {text!r}")
        try:
            value = Decimal(text)
        except InvalidOperation as exc:
            raise ValueParseError(f"invalid decimal {text!r}") from exc
        return TypedValue(kind, value, text)
    if kind is SemanticType.INTEGER:
        if not _INTEGER_RE.match(text):
            raise ValueParseError(f"invalid integer {text!r}")
        number = int(text)
        if not _INT64_MIN <= number <= _INT64_MAX:
            raise ValueParseError(f"integer {text!r} outside signed 64-bit range")
        return TypedValue(kind, number, text)
    if kind is SemanticType.TIMESTAMP:
        instant = parse_timestamp(text)
        return TypedValue(kind, instant, render_timestamp(instant))
    if kind is SemanticType.IP_ADDRESS:
        _reject_control_chars(text, kind)
        try:
            ipaddress.ip_address(text)
        except ValueError as exc:
            raise ValueParseError(f"invalid ip_address {text!r}") from exc
        return TypedValue(kind, text, text)
    if kind is SemanticType.URI:
        _reject_control_chars(text, kind)
        if not _URI_RE.match(text):
            raise ValueParseError(f"invalid uri {text!r}")
        return TypedValue(kind, text, text)
    if kind in (SemanticType.STRING_ID, SemanticType.STRING_CODE):
        if not text:
            raise ValueParseError(f"{kind.value} value must be non-empty")
        _reject_control_chars(text, kind)
        return TypedValue(kind, text, text)
    raise ValueParseError(f"unsupported semantic type {kind!r}")


# --- request context --------------------------------------------------------

@dataclass(frozen=True)
class RequestContext:
    """The receiver's own typed description of the action under evaluation.

    Context is assembled by the enforcing party from data it already trusts;
    it is never taken from the requester's claims.
    """

    action: str
    fields: Mapping[str, TypedValue]

    def get(self, field_name: str) -> Optional[TypedValue]:
        return self.fields.get(field_name)

    def to_dict(self) -> dict:
        return {
            "kind": "request_context",
            "action": self.action,
            "fields": {name: value.to_dict() for name, value in self.fields.items()},
        }

    @staticmethod
    def from_dict(obj: dict) -> "RequestContext":
        if not isinstance(obj, dict) or not isinstance(obj.get("action"), str):
            raise ValueParseError("request context requires an 'action'")
        raw_fields = obj.get("fields", {})
        if not isinstance(raw_fields, dict):
            raise ValueParseError("context 'fields' must be an object")
        fields = {name: TypedValue.from_dict(value) for name, value in raw_fields.items()}
        return RequestContext(action=obj["action"], fields=fields)


# --- authorization payload --------------------------------------------------

@dataclass(frozen=True)
class AuthorizationPayload:
    """What a credential grants: who may do what, under which constraints.

    Fields are optional at this level so that a structurally parseable but
    incomplete payload can be carried to validate_payload, which is the stage
    that owns the credential_incomplete decision.
    """

    agent_id: Optional[str]
    issuer_id: Optional[str]
    permissions: Optional[frozenset[str]]
    constraints: Optional[tuple]  # tuple of constraint values; order defines C1..Cn labels

    def to_dict(self) -> dict:
        body: dict = {}
        if self.agent_id is not None:
            body["agent_id"] = self.agent_id
        if self.issuer_id is not None:
            body["issuer_id"] = self.issuer_id
        if self.permissions is not None:
            body["permissions"] = sorted(self.permissions)
        if self.constraints is not None:
            body["constraints"] = [c.to_dict() for c in self.constraints]
        return body


def validate_payload(payload: AuthorizationPayload) -> Optional[DenialReason]:
    """None when the payload is complete; credential_incomplete otherwise.

    An empty permission set grants nothing and is treated as a missing
    component, not as a valid credential that can never match.
    """
    if not payload.agent_id:
        return DenialReason(DenyCode.CREDENTIAL_INCOMPLETE, "payload missing agent identity")
    if not payload.issuer_id:
        return DenialReason(DenyCode.CREDENTIAL_INCOMPLETE, "payload missing issuer identity")
    if payload.permissions is None or not payload.permissions:
        return DenialReason(DenyCode.CREDENTIAL_INCOMPLETE, "payload permissions absent or empty")
    if payload.constraints is None:
        return DenialReason(DenyCode.CREDENTIAL_INCOMPLETE, "payload constraint list absent")
    seen: set[str] = set()
    for constraint in payload.constraints:
        rendered_parts = []
        for key, value in sorted(constraint.to_dict().items()):
            rendered_parts.append(f"{key}={value!r}")
        rendered = ";".join(rendered_parts)
        if rendered in seen:
            return DenialReason(DenyCode.CREDENTIAL_INCOMPLETE, "payload carries duplicate constraints")
        seen.add(rendered)
    return None


# --- decisions --------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    stage: str
    check: str
    result: str

    def to_dict(self) -> dict:
        return {"stage": self.stage, "check": self.check, "result": self.result}

    @staticmethod
    def from_dict(obj: dict) -> "TraceEntry":
        return TraceEntry(stage=str(obj["stage"]), check=str(obj["check"]), result=str(obj["result"]))


@dataclass(frozen=True)
class Decision:
    """The outcome of one evaluation: ALLOW, or DENY with exactly one typed reason.

    The trace is diagnostic metadata recording every check performed, in
    order; it never alters the outcome.  failed_constraint labels which
    credential constraint (C1..Cn, by payload order) produced the denial,
    when one did.
    """

    outcome: str
    reason: Optional[DenialReason] = None
    trace: tuple = ()
    failed_constraint: Optional[str] = None

    def __post_init__(self) -> None:
        if self.outcome not in (ALLOW, DENY):
            raise ValueError(f"outcome must be ALLOW or DENY, got {self.outcome!r}")
        if self.outcome == DENY and self.reason is None:
            raise ValueError("DENY requires a typed reason")
        if self.outcome == ALLOW and self.reason is not None:
            raise ValueError("ALLOW carries no denial reason")

    @property
    def allowed(self) -> bool:
        return self.outcome == ALLOW

    def to_dict(self) -> dict:
        return {
            "kind": "decision",
            "outcome": self.outcome,
            "reason": self.reason.to_dict() if self.reason else None,
            "failed_constraint": self.failed_constraint,
            "trace": [entry.to_dict() for entry in self.trace],
        }

    @staticmethod
    def from_dict(obj: dict) -> "Decision":
        reason = obj.get("reason")
        return Decision(
            outcome=str(obj["outcome"]),
            reason=DenialReason.from_dict(reason) if reason else None,
            trace=tuple(TraceEntry.from_dict(e) for e in obj.get("trace", [])),
            failed_constraint=obj.get("failed_constraint"),
        )


def allow(trace: Sequence[TraceEntry] = ()) -> Decision:
    return Decision(outcome=ALLOW, trace=tuple(trace))


def deny(
    code: DenyCode,
    detail: str = "",
    trace: Sequence[TraceEntry] = (),
    failed_constraint: Optional[str] = None,
) -> Decision:
    return Decision(
        outcome=DENY,
        reason=DenialReason(code, detail),
        trace=tuple(trace),
        failed_constraint=failed_constraint,
    )
