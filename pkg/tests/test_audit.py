"""Hash-chained audit records: appending, persistence, and chain verification."""

import json

import pytest

from mandate.audit import GENESIS_DIGEST, AuditError, AuditLog, verify_audit_chain
from mandate.canonical import canonical_dumps
from mandate.keys import generate_key
from mandate.model import parse_timestamp

NOW = parse_timestamp("2026-05-01T12:00:00Z")
AUDIT_KEY = generate_key("svc:test:receiver#audit", seed="audit:key")


def append_some(log, count=3):
    records = []
    for i in range(count):
        records.append(
            log.append(
                operation="evaluate",
                timestamp=NOW,
                credential_digests=[f"digest-{i}"],
                presenter_id="agent:test:worker",
                subject_id="agent:test:worker",
                issuer_id="iss:test:authority",
                action="task.run",
                resource=f"jobs/{i}",
                context_snapshot={"core.amount": "100"},
                constraint_results=[{"label": "C1", "passed": True}],
                decision_outcome="ALLOW" if i % 2 == 0 else "DENY",
                decision_code=None if i % 2 == 0 else "constraint_failed",
                decision_detail="",
                failed_constraint=None,
                governance={"registry_versions": {}, "profile_version": 1},
            )
        )
    return records


def test_records_chain_from_genesis():
    log = AuditLog("svc:test:receiver", AUDIT_KEY)
    records = append_some(log)
    assert records[0].prev_record == GENESIS_DIGEST
    for prev, record in zip(records, records[1:]):
        import hashlib

        assert record.prev_record == hashlib.sha256(prev.dumps().encode()).hexdigest()


def test_verify_in_memory_records():
    log = AuditLog("svc:test:receiver", AUDIT_KEY)
    append_some(log)
    ok, bad, detail = verify_audit_chain(log.records(), AUDIT_KEY.public_hex)
    assert ok and bad is None
    assert "3 records" in detail


def test_verify_keyed_by_signature_key_id():
    log = AuditLog("svc:test:receiver", AUDIT_KEY)
    append_some(log)
    ok, _, _ = verify_audit_chain(log.records(), {AUDIT_KEY.key_id: AUDIT_KEY.public_hex})
    assert ok
    # Keyed by anything else, every record is unverifiable.
    ok, bad, _ = verify_audit_chain(log.records(), {"svc:test:receiver": AUDIT_KEY.public_hex})
    assert not ok and bad == 0


def test_file_backed_log_survives_reopen(tmp_path):
    path = tmp_path / "audit.log"
    log = AuditLog("svc:test:receiver", AUDIT_KEY, path=path)
    append_some(log, 2)
    # A new instance picks the chain up where the file left it.
    resumed = AuditLog("svc:test:receiver", AUDIT_KEY, path=path)
    append_some(resumed, 1)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    ok, bad, _ = verify_audit_chain(lines, AUDIT_KEY.public_hex)
    assert ok, bad


def test_tampered_line_detected(tmp_path):
    path = tmp_path / "audit.log"
    log = AuditLog("svc:test:receiver", AUDIT_KEY, path=path)
    append_some(log, 3)
    lines = path.read_text().splitlines()
    record = json.loads(lines[1])
    record["decision"]["outcome"] = "ALLOW"
    record["decision"]["code"] = None
    lines[1] = canonical_dumps(record)
    ok, bad, detail = verify_audit_chain(lines, AUDIT_KEY.public_hex)
    assert not ok
    assert bad == 1


def test_truncation_and_reorder_detected():
    log = AuditLog("svc:test:receiver", AUDIT_KEY)
    records = append_some(log, 3)
    # Dropping the middle record breaks linkage at its successor's position.
    ok, bad, _ = verify_audit_chain([records[0], records[2]], AUDIT_KEY.public_hex)
    assert not ok and bad == 1
    ok, bad, _ = verify_audit_chain([records[1], records[0], records[2]], AUDIT_KEY.public_hex)
    assert not ok and bad == 0


def test_non_canonical_line_detected():
    log = AuditLog("svc:test:receiver", AUDIT_KEY)
    records = append_some(log, 1)
    pretty = json.dumps(records[0].raw, indent=2, sort_keys=True)
    ok, bad, detail = verify_audit_chain([pretty], AUDIT_KEY.public_hex)
    assert not ok and bad == 0
    assert "canonical" in detail


def test_unparseable_line_detected():
    ok, bad, _ = verify_audit_chain(["{{{not json"], AUDIT_KEY.public_hex)
    assert not ok and bad == 0


def test_empty_log_verifies():
    ok, bad, detail = verify_audit_chain([], AUDIT_KEY.public_hex)
    assert ok and bad is None
    assert "0 records" in detail


def test_unknown_key_protection_class_rejected():
    with pytest.raises(AuditError):
        AuditLog("svc:test:receiver", AUDIT_KEY, key_protection="wishful")


def test_append_failure_surfaces_as_audit_error(tmp_path):
    target = tmp_path / "missing-directory" / "audit.log"
    log = AuditLog("svc:test:receiver", AUDIT_KEY, path=target)
    with pytest.raises(AuditError):
        append_some(log, 1)
