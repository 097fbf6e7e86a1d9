"""Governed semantic resolution: shared identifiers to local context fields.

Constraints name fields by semantic identifier (core.amount), receivers store
context under local names (claim_total).  The bridge is a steward-signed
mapping profile; resolution consults it on every lookup and fails closed on
anything unresolved: no profile, stale profile, unknown identifier, missing or
conflicting alias, or a type that does not line up.

The core vocabulary is compiled in.  Domain vocabularies extend it under
their own namespace; nothing may squat on ``core.``.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Optional, Sequence

from .canonical import canonical_dumps, digest_object
from .keys import attach_signature, check_signature
from .model import (
    DenialReason,
    DenyCode,
    RequestContext,
    SemanticType,
    TypedValue,
    ValueParseError,
    parse_timestamp,
    render_timestamp,
)

STATUS_REQUIRED = "required"
STATUS_CONDITIONAL = "conditional"
STATUS_ADVANCED = "advanced"


@dataclass(frozen=True)
class VocabularyEntry:
    identifier: str
    semantic_type: SemanticType
    status: str


def _core(identifier: str, semantic_type: SemanticType, status: str) -> tuple[str, VocabularyEntry]:
    return identifier, VocabularyEntry(identifier, semantic_type, status)


# The minimum viable vocabulary. Compiled in: resolution of core identifiers
# must never depend on fetching anything.
CORE_VOCABULARY: Mapping[str, VocabularyEntry] = dict(
    [
        _core("core.issuer_id", SemanticType.STRING_ID, STATUS_REQUIRED),
        _core("core.subject_id", SemanticType.STRING_ID, STATUS_REQUIRED),
        _core("core.presenter_id", SemanticType.STRING_ID, STATUS_REQUIRED),
        _core("core.audience_id", SemanticType.STRING_ID, STATUS_REQUIRED),
        _core("core.permission", SemanticType.STRING_ID, STATUS_REQUIRED),
        _core("core.valid_from", SemanticType.TIMESTAMP, STATUS_REQUIRED),
        _core("core.valid_until", SemanticType.TIMESTAMP, STATUS_REQUIRED),
        _core("core.request_time", SemanticType.TIMESTAMP, STATUS_REQUIRED),
        _core("core.delegator_id", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.recipient_id", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.action", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.resource_id", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.resource_type", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.amount", SemanticType.DECIMAL, STATUS_CONDITIONAL),
        _core("core.currency_code", SemanticType.STRING_CODE, STATUS_CONDITIONAL),
        _core("core.quantity", SemanticType.DECIMAL, STATUS_CONDITIONAL),
        _core("core.count", SemanticType.INTEGER, STATUS_CONDITIONAL),
        _core("core.total_budget", SemanticType.DECIMAL, STATUS_CONDITIONAL),
        _core("core.geo_region", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.ip_address", SemanticType.IP_ADDRESS, STATUS_CONDITIONAL),
        _core("core.request_id", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.workflow_id", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.workflow_role", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.workflow_step_id", SemanticType.STRING_ID, STATUS_CONDITIONAL),
        _core("core.state_authority_pointer", SemanticType.URI, STATUS_ADVANCED),
        _core("core.state_sequence", SemanticType.INTEGER, STATUS_ADVANCED),
        _core("core.state_timestamp", SemanticType.TIMESTAMP, STATUS_ADVANCED),
    ]
)


@dataclass(frozen=True)
class Vocabulary:
    """A domain vocabulary: namespaced identifiers with declared types."""

    profile_id: str
    version: int
    entries: Mapping[str, VocabularyEntry]

    def __post_init__(self) -> None:
        for identifier in self.entries:
            if "." not in identifier:
                raise ValueParseError(f"identifier {identifier!r} is not namespaced")
            if identifier.startswith("core."):
                raise ValueParseError("domain vocabularies may not define core identifiers")
            if not identifier.startswith(self.profile_id + "."):
                raise ValueParseError(
                    f"identifier {identifier!r} outside namespace {self.profile_id!r}"
                )

    def to_dict(self) -> dict:
        return {
            "kind": "vocabulary",
            "profile_id": self.profile_id,
            "version": self.version,
            "identifiers": {
                name: {"type": entry.semantic_type.value, "status": entry.status}
                for name, entry in self.entries.items()
            },
        }

    @staticmethod
    def from_dict(obj: dict) -> "Vocabulary":
        if not isinstance(obj, dict) or obj.get("kind") != "vocabulary":
            raise ValueParseError("not a vocabulary object")
        profile_id = obj.get("profile_id")
        version = obj.get("version")
        identifiers = obj.get("identifiers")
        if not isinstance(profile_id, str) or not isinstance(version, int) or not isinstance(identifiers, dict):
            raise ValueParseError("malformed vocabulary")
        entries = {}
        for name, spec in identifiers.items():
            if not isinstance(spec, dict):
                raise ValueParseError(f"malformed vocabulary entry {name!r}")
            entries[name] = VocabularyEntry(
                identifier=name,
                semantic_type=SemanticType(spec["type"]),
                status=str(spec.get("status", STATUS_CONDITIONAL)),
            )
        return Vocabulary(profile_id=profile_id, version=version, entries=entries)


def lookup_identifier(
    identifier: str, vocabularies: Sequence[Vocabulary]
) -> Optional[VocabularyEntry]:
    """Find an identifier in the core table or the configured domain vocabularies."""
    if identifier.startswith("core."):
        return CORE_VOCABULARY.get(identifier)
    for vocabulary in vocabularies:
        entry = vocabulary.entries.get(identifier)
        if entry is not None:
            return entry
    return None


@dataclass(frozen=True)
class AliasEntry:
    identifier: str
    field: str
    declared_type: SemanticType

    def to_dict(self) -> dict:
        return {"identifier": self.identifier, "field": self.field, "type": self.declared_type.value}


@dataclass(frozen=True)
class MappingProfile:
    """Steward-signed aliases from semantic identifiers to one receiver's local fields."""

    profile_id: str
    version: int
    valid_until: datetime
    aliases: tuple[AliasEntry, ...]
    raw: dict  # original object, kept for signature verification and digests

    def aliases_for(self, identifier: str) -> tuple[AliasEntry, ...]:
        return tuple(a for a in self.aliases if a.identifier == identifier)

    def digest(self) -> str:
        return digest_object(self.raw)

    def to_dict(self) -> dict:
        return dict(self.raw)

    @staticmethod
    def from_dict(obj: dict) -> "MappingProfile":
        if not isinstance(obj, dict) or obj.get("kind") != "mapping_profile":
            raise ValueParseError("not a mapping profile object")
        profile_id = obj.get("profile_id")
        version = obj.get("version")
        valid_until = obj.get("valid_until")
        aliases_raw = obj.get("aliases")
        if (
            not isinstance(profile_id, str)
            or not isinstance(version, int)
            or not isinstance(valid_until, str)
            or not isinstance(aliases_raw, list)
        ):
            raise ValueParseError("malformed mapping profile")
        aliases = []
        for row in aliases_raw:
            if not isinstance(row, dict):
                raise ValueParseError("malformed alias row")
            aliases.append(
                AliasEntry(
                    identifier=str(row["identifier"]),
                    field=str(row["field"]),
                    declared_type=SemanticType(row["type"]),
                )
            )
        return MappingProfile(
            profile_id=profile_id,
            version=version,
            valid_until=parse_timestamp(valid_until),
            aliases=tuple(aliases),
            raw=obj,
        )


def build_mapping_profile(
    profile_id: str,
    version: int,
    valid_until: datetime,
    aliases: Sequence[AliasEntry],
    steward_key,
) -> MappingProfile:
    body = {
        "kind": "mapping_profile",
        "profile_id": profile_id,
        "version": version,
        "valid_until": render_timestamp(valid_until),
        "aliases": [a.to_dict() for a in aliases],
    }
    return MappingProfile.from_dict(attach_signature(body, steward_key))


def identity_mapping_profile(
    vocabularies: Sequence[Vocabulary],
    valid_until: datetime,
    steward_key,
    profile_id: str = "identity",
    version: int = 1,
) -> MappingProfile:
    """A profile mapping every known identifier to itself.

    For receivers whose context is already keyed by semantic identifiers;
    resolution still runs through the same governed path.
    """
    aliases = [
        AliasEntry(identifier=name, field=name, declared_type=entry.semantic_type)
        for name, entry in CORE_VOCABULARY.items()
    ]
    for vocabulary in vocabularies:
        for name, entry in vocabulary.entries.items():
            aliases.append(AliasEntry(identifier=name, field=name, declared_type=entry.semantic_type))
    return build_mapping_profile(profile_id, version, valid_until, aliases, steward_key)


def validate_mapping_profile(
    mapping: Optional[MappingProfile],
    now: datetime,
    steward_keys: Mapping[str, str],
) -> Optional[DenialReason]:
    """Structural and trust validation of a loaded profile.

    Byte-identical duplicate alias rows make the artifact invalid; two aliases
    that disagree about one identifier are a per-identifier conflict, reported
    as semantic_alias_conflict at resolution time, not here.  None means valid.
    """
    if mapping is None:
        return DenialReason(DenyCode.MAPPING_PROFILE_MISSING, "no mapping profile configured")
    seen: set[str] = set()
    for alias in mapping.aliases:
        rendered = canonical_dumps(alias.to_dict())
        if rendered in seen:
            return DenialReason(
                DenyCode.MAPPING_PROFILE_INVALID, f"duplicate alias row for {alias.identifier}"
            )
        seen.add(rendered)
    envelope = mapping.raw.get("signature")
    key_id = envelope.get("key_id") if isinstance(envelope, dict) else None
    public_hex = steward_keys.get(key_id) if isinstance(key_id, str) else None
    if public_hex is None or not check_signature(mapping.raw, public_hex):
        return DenialReason(
            DenyCode.MAPPING_PROFILE_INVALID, "profile signature does not verify against any steward key"
        )
    if now > mapping.valid_until:
        return DenialReason(DenyCode.MAPPING_PROFILE_INVALID, "mapping profile is stale")
    return None


_UNVALIDATED = object()


def resolve_semantic_field(
    field: str,
    ctx: RequestContext,
    mapping: Optional[MappingProfile],
    vocabularies: Sequence[Vocabulary],
    now: datetime,
    steward_keys: Mapping[str, str],
    profile_status: object = _UNVALIDATED,
) -> tuple[Optional[TypedValue], Optional[DenialReason]]:
    """Resolve one semantic identifier to a typed context value.

    Checks run in a fixed order so outcomes are deterministic even when a
    profile has several defects: profile presence and trust, identifier
    existence, alias conflict, alias presence, declared type agreement,
    context presence.  Exactly one of (value, reason) is returned non-None.

    ``profile_status`` lets a caller that already validated the profile for
    this evaluation pass the cached result instead of re-verifying the
    signature per field.
    """
    if profile_status is _UNVALIDATED:
        profile_status = validate_mapping_profile(mapping, now, steward_keys)
    if mapping is None:
        return None, DenialReason(DenyCode.MAPPING_PROFILE_MISSING, "no mapping profile configured")
    if profile_status is not None:
        return None, profile_status  # type: ignore[return-value]

    entry = lookup_identifier(field, vocabularies)
    if entry is None:
        return None, DenialReason(
            DenyCode.SEMANTIC_IDENTIFIER_UNKNOWN, f"{field} is not in any governed vocabulary"
        )

    aliases = mapping.aliases_for(field)
    distinct = {(a.field, a.declared_type) for a in aliases}
    if len(distinct) > 1:
        return None, DenialReason(
            DenyCode.SEMANTIC_ALIAS_CONFLICT, f"{field} maps to multiple local fields"
        )
    if not aliases:
        return None, DenialReason(
            DenyCode.SEMANTIC_ALIAS_MISSING, f"no local alias for {field}"
        )
    alias = aliases[0]
    if alias.declared_type is not entry.semantic_type:
        return None, DenialReason(
            DenyCode.SEMANTIC_TYPE_MISMATCH,
            f"{field} declared {alias.declared_type.value}, vocabulary says {entry.semantic_type.value}",
        )
    value = ctx.get(alias.field)
    if value is None:
        return None, DenialReason(
            DenyCode.CONTEXT_FIELD_MISSING, f"context has no field {alias.field!r} for {field}"
        )
    if value.kind is not entry.semantic_type:
        return None, DenialReason(
            DenyCode.SEMANTIC_TYPE_MISMATCH,
            f"context field {alias.field!r} is {value.kind.value}, expected {entry.semantic_type.value}",
        )
    return value, None
