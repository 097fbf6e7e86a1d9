"""Steward-signed trust registries: issuer standing and permitted state authorities.

A registry answers two questions a receiver cannot answer from a credential
alone: is this issuer in good standing for this class of credential under
this profile, and is this state authority one the ecosystem recognizes.
Receivers may accept several registries; a lookup succeeds when any accepted,
in-window registry grants it.  Only the standing value "active" grants —
suspension and revocation both read as not vetted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Optional, Sequence

from .canonical import digest_object
from .keys import SigningKey, attach_signature, check_signature
from .model import parse_timestamp, render_timestamp

STANDING_ACTIVE = "active"
STANDING_VALUES = ("active", "suspended", "revoked")


class RegistryError(ValueError):
    def __init__(self, code: str, detail: str) -> None:
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class IssuerEntry:
    issuer_id: str
    standing: str
    credential_classes: frozenset[str]
    profiles: frozenset[str]


@dataclass(frozen=True)
class StateAuthorityEntry:
    pointer: str
    profiles: frozenset[str]


@dataclass(frozen=True)
class TrustRegistry:
    registry_id: str
    version: int
    valid_from: datetime
    valid_until: datetime
    issuers: Mapping[str, IssuerEntry]
    state_authorities: tuple[StateAuthorityEntry, ...]
    vocabulary_refs: tuple[dict, ...]
    raw: dict

    def digest(self) -> str:
        return digest_object(self.raw)

    def in_window(self, now: datetime) -> bool:
        return self.valid_from <= now <= self.valid_until

    def grants(self, issuer_id: str, credential_class: str, profile_id: str) -> bool:
        entry = self.issuers.get(issuer_id)
        if entry is None or entry.standing != STANDING_ACTIVE:
            return False
        if credential_class not in entry.credential_classes and "*" not in entry.credential_classes:
            return False
        return profile_id in entry.profiles or "*" in entry.profiles

    def permits_state_authority(self, pointer: str, profile_id: str) -> bool:
        for entry in self.state_authorities:
            if entry.pointer == pointer and (profile_id in entry.profiles or "*" in entry.profiles):
                return True
        return False

    def to_dict(self) -> dict:
        return dict(self.raw)


def build_registry(
    registry_id: str,
    version: int,
    valid_from: datetime,
    valid_until: datetime,
    issuers: Sequence[IssuerEntry],
    steward_key: SigningKey,
    state_authorities: Sequence[StateAuthorityEntry] = (),
    vocabulary_refs: Sequence[dict] = (),
) -> TrustRegistry:
    body = {
        "kind": "trust_registry",
        "registry_id": registry_id,
        "version": version,
        "valid_from": render_timestamp(valid_from),
        "valid_until": render_timestamp(valid_until),
        "issuers": {
            e.issuer_id: {
                "standing": e.standing,
                "credential_classes": sorted(e.credential_classes),
                "profiles": sorted(e.profiles),
            }
            for e in issuers
        },
        "state_authorities": [
            {"pointer": e.pointer, "profiles": sorted(e.profiles)} for e in state_authorities
        ],
        "vocabulary_refs": [dict(ref) for ref in vocabulary_refs],
    }
    signed = attach_signature(body, steward_key)
    return _parse_registry(signed)


def _parse_registry(obj: dict) -> TrustRegistry:
    if not isinstance(obj, dict) or obj.get("kind") != "trust_registry":
        raise RegistryError("malformed", "not a trust registry object")
    try:
        issuers_raw = obj["issuers"]
        issuers = {}
        for issuer_id, entry in issuers_raw.items():
            standing = entry["standing"]
            if standing not in STANDING_VALUES:
                raise RegistryError("malformed", f"unknown standing {standing!r}")
            issuers[issuer_id] = IssuerEntry(
                issuer_id=issuer_id,
                standing=standing,
                credential_classes=frozenset(entry["credential_classes"]),
                profiles=frozenset(entry["profiles"]),
            )
        authorities = tuple(
            StateAuthorityEntry(pointer=str(e["pointer"]), profiles=frozenset(e["profiles"]))
            for e in obj.get("state_authorities", [])
        )
        return TrustRegistry(
            registry_id=str(obj["registry_id"]),
            version=int(obj["version"]),
            valid_from=parse_timestamp(obj["valid_from"]),
            valid_until=parse_timestamp(obj["valid_until"]),
            issuers=issuers,
            state_authorities=authorities,
            vocabulary_refs=tuple(dict(r) for r in obj.get("vocabulary_refs", [])),
            raw=obj,
        )
    except RegistryError:
        raise
    except Exception as exc:
        raise RegistryError("malformed", f"registry structure: {exc}") from exc


def load_registry(
    data: bytes | str | dict,
    steward_keys: Mapping[str, str],
    now: Optional[datetime] = None,
) -> TrustRegistry:
    """Parse, verify steward signature, and (when now is given) check the window.

    Errors carry a code: malformed, bad_signature, or out_of_window.  An
    out-of-window registry is unusable for evaluation, full stop.
    """
    if isinstance(data, (bytes, str)):
        try:
            obj = json.loads(data if isinstance(data, str) else data.decode("utf-8"))
        except Exception as exc:
            raise RegistryError("malformed", f"registry bytes: {exc}") from exc
    else:
        obj = data
    registry = _parse_registry(obj)
    envelope = registry.raw.get("signature")
    key_id = envelope.get("key_id") if isinstance(envelope, dict) else None
    public_hex = steward_keys.get(key_id) if isinstance(key_id, str) else None
    if public_hex is None or not check_signature(registry.raw, public_hex):
        raise RegistryError("bad_signature", "registry signature does not verify against any steward key")
    if now is not None and not registry.in_window(now):
        raise RegistryError("out_of_window", "registry outside its validity window")
    return registry
