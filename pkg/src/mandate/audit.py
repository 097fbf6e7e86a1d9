"""Signed, hash-chained audit records: one per evaluation, allow or deny.

Each record carries the digest of its predecessor, so truncating, reordering,
or editing the log breaks the chain at a verifiable index.  Records are
signed by the evaluator key and serialized canonically, one record per line.

The governance snapshot pins what the decision was made under (registry and
profile versions, manifest digest, trust anchor); the context snapshot keeps
only fields the evaluation actually resolved, which is the privacy posture:
the log explains decisions without archiving whole requests.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .canonical import canonical_dumps, digest_object, sha256_hex
from .keys import SigningKey, attach_signature, check_signature
from .model import render_timestamp

# Fixed anchor for the first record of every log.
GENESIS_DIGEST = sha256_hex(b"audit-log-genesis")

KEY_PROTECTION_CLASSES = ("hardware", "software", "unknown")


class AuditError(RuntimeError):
    """Appending or verifying the audit log failed."""


@dataclass(frozen=True)
class AuditRecord:
    record_id: str
    prev_record: str
    raw: dict

    def digest(self) -> str:
        return digest_object(self.raw)

    def to_dict(self) -> dict:
        return dict(self.raw)

    def dumps(self) -> str:
        return canonical_dumps(self.raw)


class AuditLog:
    """Append-only log bound to one evaluator key.

    With a path, every record is written and flushed as one canonical line;
    without one, records are kept in memory (tests, vector runs).  Appends are
    serialized under a lock so the chain never forks inside one process.
    """

    def __init__(
        self,
        evaluator_id: str,
        signing_key: SigningKey,
        path: Optional[Union[str, Path]] = None,
        key_protection: str = "software",
        environment: Optional[str] = None,
    ) -> None:
        if key_protection not in KEY_PROTECTION_CLASSES:
            raise AuditError(f"unknown key protection class {key_protection!r}")
        self.evaluator_id = evaluator_id
        self._key = signing_key
        self.path = Path(path) if path is not None else None
        self.key_protection = key_protection
        self.environment = environment
        self._lock = threading.Lock()
        self._memory: list[AuditRecord] = []
        self._last_digest = GENESIS_DIGEST
        if self.path is not None and self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                if line.strip():
                    self._last_digest = sha256_hex(line)

    def append(
        self,
        operation: str,
        timestamp: datetime,
        credential_digests: Iterable[str],
        presenter_id: Optional[str],
        subject_id: Optional[str],
        issuer_id: Optional[str],
        action: Optional[str],
        resource: Optional[str],
        context_snapshot: Mapping[str, str],
        constraint_results: Iterable[Mapping],
        decision_outcome: str,
        decision_code: Optional[str],
        decision_detail: str,
        failed_constraint: Optional[str],
        governance: Mapping,
        workflow: Optional[Mapping] = None,
    ) -> AuditRecord:
        body: dict = {
            "kind": "audit_record",
            "operation": operation,
            "timestamp": render_timestamp(timestamp),
            "evaluator_id": self.evaluator_id,
            "credential_digests": list(credential_digests),
            "presenter_id": presenter_id,
            "subject_id": subject_id,
            "issuer_id": issuer_id,
            "action": action,
            "resource": resource,
            "context": dict(context_snapshot),
            "constraint_results": [dict(r) for r in constraint_results],
            "decision": {
                "outcome": decision_outcome,
                "code": decision_code,
                "detail": decision_detail,
                "failed_constraint": failed_constraint,
            },
            "governance": dict(governance),
            "security": {
                "key_protection": self.key_protection,
                "environment": self.environment,
            },
        }
        if workflow is not None:
            body["workflow"] = dict(workflow)
        with self._lock:
            body["prev_record"] = self._last_digest
            body["record_id"] = "rec-" + digest_object(body)[:16]
            signed = attach_signature(body, self._key)
            record = AuditRecord(record_id=body["record_id"], prev_record=body["prev_record"], raw=signed)
            line = record.dumps()
            if self.path is not None:
                try:
                    with self.path.open("a", encoding="utf-8") as handle:
                        handle.write(line + "\n")
                        handle.flush()
                except OSError as exc:
                    raise AuditError(f"cannot append audit record: {exc}") from exc
            self._memory.append(record)
            self._last_digest = sha256_hex(line)
        return record

    def records(self) -> list[AuditRecord]:
        return list(self._memory)


def verify_audit_chain(
    lines_or_records: Iterable[Union[str, dict, AuditRecord]],
    evaluator_keys: Union[str, Mapping[str, str]],
) -> tuple[bool, Optional[int], str]:
    """Walk a log and verify linkage, canonical form, and every signature.

    Returns (ok, first_bad_index, detail).  ``evaluator_keys`` is one public
    key hex or a map of key_id to public key hex.
    """
    expected_prev = GENESIS_DIGEST
    index = -1
    for index, item in enumerate(lines_or_records):
        if isinstance(item, AuditRecord):
            obj = item.raw
            line = item.dumps()
        elif isinstance(item, dict):
            obj = item
            line = canonical_dumps(item)
        else:
            line = item.strip()
            try:
                obj = json.loads(line)
            except Exception as exc:
                return False, index, f"record {index} is not parseable: {exc}"
            if canonical_dumps(obj) != line:
                return False, index, f"record {index} is not in canonical form"
        if obj.get("prev_record") != expected_prev:
            return False, index, f"record {index} breaks the hash chain"
        envelope = obj.get("signature")
        key_id = envelope.get("key_id") if isinstance(envelope, dict) else None
        if isinstance(evaluator_keys, str):
            public_hex = evaluator_keys
        else:
            public_hex = evaluator_keys.get(key_id) if isinstance(key_id, str) else None
        if public_hex is None or not check_signature(obj, public_hex):
            return False, index, f"record {index} signature does not verify"
        expected_prev = sha256_hex(line)
    return True, None, f"{index + 1} records verified"
