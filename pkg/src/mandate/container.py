"""Signed credential containers and their verification gate.

A container binds an authorization payload to identities, an audience, a
validity window, and a subject key, under one detached issuer signature over
canonical bytes.  Verification is a fixed sequence of checks, each with its
own typed denial; the order is part of the contract so that the same broken
credential denies the same way everywhere.

Presenters prove possession of the subject key by signing a receiver-chosen
nonce; a bare container is never enough.  Revocation is a signed, versioned
list distributed out of band; an unavailable or stale list counts against the
credential, not in its favor.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Mapping, Optional, Sequence

from .canonical import canonical_dumps, digest_object
from .constraints import check_attenuation, constraint_from_dict
from .keys import SigningKey, attach_signature, check_signature
from .model import (
    AuthorizationPayload,
    DenialReason,
    DenyCode,
    parse_timestamp,
    render_timestamp,
    validate_payload,
)


class ContainerError(ValueError):
    """Base for container handling failures outside the decision domain."""


class MalformedContainerError(ContainerError):
    """Bytes or structure that cannot be a credential container."""


class InvalidPayloadError(ContainerError):
    """Issuing was refused because the payload is incomplete or self-contradictory."""


class AttenuationViolation(ContainerError):
    """Issuing was refused because a delegation would widen its parent."""


@dataclass(frozen=True)
class CredentialContainer:
    credential_id: str
    issuer_id: str
    subject_id: str
    subject_public_key: str
    audience: frozenset[str]
    valid_from: datetime
    valid_until: datetime
    payload: AuthorizationPayload
    parent_digest: Optional[str]
    raw: dict
    digest_hex: str

    def digest(self) -> str:
        return self.digest_hex

    def to_dict(self) -> dict:
        return dict(self.raw)

    def dumps(self) -> str:
        return canonical_dumps(self.raw)


def _parse_payload(obj: object) -> AuthorizationPayload:
    if not isinstance(obj, dict):
        raise MalformedContainerError("payload must be an object")
    agent_id = obj.get("agent_id")
    issuer_id = obj.get("issuer_id")
    permissions = obj.get("permissions")
    constraints = obj.get("constraints")
    for name, value in (("agent_id", agent_id), ("issuer_id", issuer_id)):
        if value is not None and not isinstance(value, str):
            raise MalformedContainerError(f"payload {name} must be a string")
    if permissions is not None:
        if not isinstance(permissions, list) or not all(isinstance(p, str) for p in permissions):
            raise MalformedContainerError("payload permissions must be a list of strings")
        permissions = frozenset(permissions)
    if constraints is not None:
        if not isinstance(constraints, list):
            raise MalformedContainerError("payload constraints must be a list")
        constraints = tuple(constraint_from_dict(c) for c in constraints)
    return AuthorizationPayload(
        agent_id=agent_id,
        issuer_id=issuer_id,
        permissions=permissions,
        constraints=constraints,
    )


def parse_container(data: bytes | str | dict) -> CredentialContainer:
    """Structural parse only; trust decisions belong to verify_container.

    The payload may be incomplete (that is a decision, not a parse error), but
    identity bindings must be internally consistent and the audience must be
    non-empty: a container violating its own format invariants is rejected
    outright.  Unknown top-level fields are preserved: they stay under the
    signature and in digests.
    """
    if isinstance(data, (bytes, str)):
        try:
            if isinstance(data, bytes):
                data = data.decode("utf-8")
            obj = json.loads(data)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedContainerError(f"container bytes are not canonical text: {exc}") from exc
    else:
        obj = data
    if not isinstance(obj, dict) or obj.get("kind") != "credential":
        raise MalformedContainerError("not a credential container")
    try:
        credential_id = obj["credential_id"]
        issuer_id = obj["issuer_id"]
        subject_id = obj["subject_id"]
        subject_key = obj["subject_public_key"]
        audience_raw = obj["audience"]
        valid_from = parse_timestamp(obj["valid_from"])
        valid_until = parse_timestamp(obj["valid_until"])
        payload = _parse_payload(obj["payload"])
    except MalformedContainerError:
        raise
    except Exception as exc:
        raise MalformedContainerError(f"container missing or malformed field: {exc}") from exc
    for name, value in (
        ("credential_id", credential_id),
        ("issuer_id", issuer_id),
        ("subject_id", subject_id),
    ):
        if not isinstance(value, str) or not value:
            raise MalformedContainerError(f"{name} must be a non-empty string")
    if not isinstance(subject_key, dict) or not isinstance(subject_key.get("public_key"), str):
        raise MalformedContainerError("subject_public_key must carry a public_key")
    if (
        not isinstance(audience_raw, list)
        or not audience_raw
        or not all(isinstance(a, str) and a for a in audience_raw)
    ):
        raise MalformedContainerError("audience must be a non-empty list of identities")
    if payload.agent_id is not None and payload.agent_id != subject_id:
        raise MalformedContainerError("subject_id must equal payload.agent_id")
    if payload.issuer_id is not None and payload.issuer_id != issuer_id:
        raise MalformedContainerError("issuer_id must equal payload.issuer_id")
    parent_digest = obj.get("parent_digest")
    if parent_digest is not None and not isinstance(parent_digest, str):
        raise MalformedContainerError("parent_digest must be a digest string")
    return CredentialContainer(
        credential_id=credential_id,
        issuer_id=issuer_id,
        subject_id=subject_id,
        subject_public_key=subject_key["public_key"],
        audience=frozenset(audience_raw),
        valid_from=valid_from,
        valid_until=valid_until,
        payload=payload,
        parent_digest=parent_digest,
        raw=obj,
        digest_hex=digest_object(obj),
    )


def issue_credential(
    payload: AuthorizationPayload,
    subject_public_key: str,
    audience: Sequence[str],
    valid_from: datetime,
    valid_until: datetime,
    issuer_key: SigningKey,
    parent: Optional[CredentialContainer] = None,
    credential_id: Optional[str] = None,
) -> CredentialContainer:
    """Build and sign a container; refuses anything a verifier would have to deny structurally.

    For a delegation (parent given) the issuer must be the parent's subject,
    permissions must not grow, and constraints must pass check_attenuation.
    Widening is refused at issue time: a delegator cannot even mint the
    artifact, rather than minting one that every verifier rejects.
    """
    problem = validate_payload(payload)
    if problem is not None:
        raise InvalidPayloadError(problem.detail or problem.code.value)
    audience_list = [a for a in audience]
    if not audience_list or not all(isinstance(a, str) and a for a in audience_list):
        raise InvalidPayloadError("audience must be a non-empty list of identities")
    if valid_from > valid_until:
        raise InvalidPayloadError("validity window is empty")
    if parent is not None:
        if payload.issuer_id != parent.subject_id:
            raise AttenuationViolation(
                f"delegation issuer {payload.issuer_id!r} is not the parent subject {parent.subject_id!r}"
            )
        if valid_from < parent.valid_from or valid_until > parent.valid_until:
            raise AttenuationViolation("delegation validity window extends beyond its parent")
        parent_permissions = parent.payload.permissions or frozenset()
        extra = (payload.permissions or frozenset()) - parent_permissions
        if extra:
            raise AttenuationViolation(f"delegation adds permissions {sorted(extra)}")
        ok, detail = check_attenuation(payload.constraints or (), parent.payload.constraints or ())
        if not ok:
            raise AttenuationViolation(detail)
    body: dict = {
        "kind": "credential",
        "issuer_id": payload.issuer_id,
        "subject_id": payload.agent_id,
        "subject_public_key": {"suite": 1, "public_key": subject_public_key},
        "audience": sorted(set(audience_list)),
        "valid_from": render_timestamp(valid_from),
        "valid_until": render_timestamp(valid_until),
        "payload": payload.to_dict(),
    }
    if parent is not None:
        body["parent_digest"] = parent.digest()
    if credential_id is None:
        credential_id = "cred-" + digest_object(body)[:16]
    body["credential_id"] = credential_id
    signed = attach_signature(body, issuer_key)
    return parse_container(signed)


# --- proof of possession ------------------------------------------------------

@dataclass(frozen=True)
class PossessionProof:
    """The presenter's signature over a receiver-chosen nonce, bound to one credential."""

    credential_digest: str
    audience: str
    nonce: str
    timestamp: datetime
    raw: dict

    def to_dict(self) -> dict:
        return dict(self.raw)

    @staticmethod
    def from_dict(obj: dict) -> "PossessionProof":
        if not isinstance(obj, dict) or obj.get("kind") != "possession_proof":
            raise MalformedContainerError("not a possession proof")
        try:
            return PossessionProof(
                credential_digest=str(obj["credential_digest"]),
                audience=str(obj["audience"]),
                nonce=str(obj["nonce"]),
                timestamp=parse_timestamp(obj["timestamp"]),
                raw=obj,
            )
        except MalformedContainerError:
            raise
        except Exception as exc:
            raise MalformedContainerError(f"malformed possession proof: {exc}") from exc


def make_possession_proof(
    credential: CredentialContainer | str,
    audience: str,
    nonce: str,
    now: datetime,
    subject_key: SigningKey,
) -> PossessionProof:
    digest = credential.digest() if isinstance(credential, CredentialContainer) else credential
    body = {
        "kind": "possession_proof",
        "credential_digest": digest,
        "audience": audience,
        "nonce": nonce,
        "timestamp": render_timestamp(now),
    }
    return PossessionProof.from_dict(attach_signature(body, subject_key))


class NonceCache:
    """Single-use nonce memory per receiver; check-and-insert is atomic."""

    def __init__(self) -> None:
        self._seen: set[str] = set()
        self._lock = threading.Lock()

    def accept(self, nonce: str) -> bool:
        with self._lock:
            if nonce in self._seen:
                return False
            self._seen.add(nonce)
            return True


# --- revocation ---------------------------------------------------------------

class RevocationError(ValueError):
    pass


@dataclass(frozen=True)
class RevocationList:
    issuer_id: str
    version: int
    revoked: frozenset[str]
    updated_at: datetime
    raw: dict

    def to_dict(self) -> dict:
        return dict(self.raw)

    @staticmethod
    def from_dict(obj: dict) -> "RevocationList":
        if not isinstance(obj, dict) or obj.get("kind") != "revocation_list":
            raise RevocationError("not a revocation list")
        try:
            revoked = obj["revoked"]
            if not isinstance(revoked, list) or not all(isinstance(r, str) for r in revoked):
                raise RevocationError("revoked must be a list of credential ids")
            return RevocationList(
                issuer_id=str(obj["issuer_id"]),
                version=int(obj["version"]),
                revoked=frozenset(revoked),
                updated_at=parse_timestamp(obj["updated_at"]),
                raw=obj,
            )
        except RevocationError:
            raise
        except Exception as exc:
            raise RevocationError(f"malformed revocation list: {exc}") from exc


def new_revocation_list(
    issuer_id: str,
    issuer_key: SigningKey,
    now: datetime,
    revoked: Sequence[str] = (),
    version: int = 1,
) -> RevocationList:
    body = {
        "kind": "revocation_list",
        "issuer_id": issuer_id,
        "version": version,
        "revoked": sorted(set(revoked)),
        "updated_at": render_timestamp(now),
    }
    return RevocationList.from_dict(attach_signature(body, issuer_key))


def revoke(
    revocation_list: RevocationList,
    credential_id: str,
    issuer_key: SigningKey,
    now: datetime,
) -> RevocationList:
    """Revocation is monotone: the new list supersedes by version and only grows."""
    return new_revocation_list(
        issuer_id=revocation_list.issuer_id,
        issuer_key=issuer_key,
        now=now,
        revoked=sorted(revocation_list.revoked | {credential_id}),
        version=revocation_list.version + 1,
    )


class RevocationStore:
    """The receiver's view of issuer revocation lists, refreshed out of band."""

    def __init__(self, max_age: Optional[timedelta] = None) -> None:
        self._lists: dict[str, RevocationList] = {}
        self.max_age = max_age
        self._lock = threading.Lock()

    def update(self, revocation_list: RevocationList, issuer_public_hex: str) -> None:
        if not check_signature(revocation_list.raw, issuer_public_hex):
            raise RevocationError("revocation list signature does not verify")
        with self._lock:
            current = self._lists.get(revocation_list.issuer_id)
            if current is not None and revocation_list.version <= current.version:
                raise RevocationError(
                    f"version {revocation_list.version} does not supersede {current.version}"
                )
            self._lists[revocation_list.issuer_id] = revocation_list

    def status(self, issuer_id: str, credential_id: str, now: datetime) -> tuple[str, str]:
        """('revoked'|'stale'|'ok', detail).  No list for the issuer reads as ok: absence
        of a configured revocation source is a trust posture, not a failure."""
        with self._lock:
            revocation_list = self._lists.get(issuer_id)
        if revocation_list is None:
            return "ok", ""
        if self.max_age is not None and now - revocation_list.updated_at > self.max_age:
            return "stale", (
                f"revocation list for {issuer_id} is stale; cannot prove the credential is not revoked"
            )
        if credential_id in revocation_list.revoked:
            return "revoked", f"{credential_id} is revoked (list version {revocation_list.version})"
        return "ok", ""


# --- verification ---------------------------------------------------------------

DEFAULT_POP_MAX_AGE = timedelta(seconds=300)


def verify_container(
    container: CredentialContainer,
    presenter_id: str,
    pop: Optional[PossessionProof],
    *,
    evaluator_id: str,
    trusted_issuers: Mapping[str, str],
    now: datetime,
    nonce_cache: NonceCache,
    registries: Sequence = (),
    credential_class: str = "agent-authorization",
    profile_id: str = "",
    revocations: Optional[RevocationStore] = None,
    pop_required: bool = True,
    pop_max_age: timedelta = DEFAULT_POP_MAX_AGE,
    clock_skew: timedelta = timedelta(0),
) -> Optional[DenialReason]:
    """Run the fixed verification sequence; None means every check passed.

    Order: signature, issuer trust, issuer vetting (only when registries are
    configured; an empty registry set is the bilateral trust posture where the
    local key file is the whole trust decision), audience, proof of
    possession, subject binding, expiry, revocation.  An issuer absent from
    the trusted key file yields issuer_untrusted without a signature verdict:
    there is no key to verify against.
    """
    issuer_key = trusted_issuers.get(container.issuer_id)
    if issuer_key is not None and not check_signature(container.raw, issuer_key):
        return DenialReason(DenyCode.SIGNATURE_INVALID, "issuer signature does not verify")
    if issuer_key is None:
        return DenialReason(
            DenyCode.ISSUER_UNTRUSTED, f"issuer {container.issuer_id!r} is not in the trusted set"
        )
    if registries:
        vetted = any(
            r.in_window(now) and r.grants(container.issuer_id, credential_class, profile_id)
            for r in registries
        )
        if not vetted:
            return DenialReason(
                DenyCode.ISSUER_NOT_VETTED,
                f"no accepted registry vouches for {container.issuer_id!r} "
                f"({credential_class}, {profile_id or 'any profile'})",
            )
    if evaluator_id not in container.audience:
        return DenialReason(
            DenyCode.AUDIENCE_MISMATCH, f"credential is not addressed to {evaluator_id!r}"
        )
    if pop_required:
        failure = _possession_failure(container, pop, evaluator_id, now, nonce_cache, pop_max_age)
        if failure:
            return DenialReason(DenyCode.PROOF_OF_POSSESSION_FAILED, failure)
    if presenter_id != container.subject_id:
        return DenialReason(
            DenyCode.SUBJECT_BINDING_MISMATCH,
            f"presenter {presenter_id!r} is not the credential subject {container.subject_id!r}",
        )
    if not (container.valid_from - clock_skew <= now <= container.valid_until + clock_skew):
        return DenialReason(DenyCode.CREDENTIAL_EXPIRED, "outside the credential validity window")
    if revocations is not None:
        status, detail = revocations.status(container.issuer_id, container.credential_id, now)
        if status != "ok":
            return DenialReason(DenyCode.CREDENTIAL_REVOKED, detail)
    return None


def _possession_failure(
    container: CredentialContainer,
    pop: Optional[PossessionProof],
    evaluator_id: str,
    now: datetime,
    nonce_cache: NonceCache,
    pop_max_age: timedelta,
) -> str:
    if pop is None:
        return "no proof of possession presented"
    if pop.credential_digest != container.digest():
        return "proof is bound to a different credential"
    if not check_signature(pop.raw, container.subject_public_key):
        return "proof signature does not verify against the subject key"
    if pop.audience != evaluator_id:
        return "proof was made for a different receiver"
    if not (now - pop_max_age <= pop.timestamp <= now + pop_max_age):
        return "proof timestamp outside the freshness window"
    if not nonce_cache.accept(pop.nonce):
        return "nonce replayed"
    return ""
