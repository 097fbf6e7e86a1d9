"""Command line round trips over file-based artifacts."""

import json
from decimal import Decimal

import pytest

from mandate.cli import main
from mandate.container import make_possession_proof, parse_container
from mandate.keys import generate_key
from mandate.model import parse_timestamp
from mandate.semantics import identity_mapping_profile

NOW = "2026-05-01T12:00:00Z"
FROM = "2026-01-01T00:00:00Z"
UNTIL = "2026-12-31T23:59:59Z"
RECEIVER_ID = "svc:cli:receiver"

ISSUER = generate_key("iss:cli:authority", seed="cli:issuer")
SUBJECT = generate_key("agent:cli:worker", seed="cli:subject")
DELEGATE = generate_key("agent:cli:delegate", seed="cli:delegate")
STEWARD = generate_key("steward:cli", seed="cli:steward")
AUDIT = generate_key("svc:cli:receiver#audit", seed="cli:audit")
RECEIVER = generate_key(RECEIVER_ID, seed="cli:receiver")
AUTHORITY = generate_key("authority:cli", seed="cli:authority")


def write(path, obj):
    path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    lines = [json.loads(line) for line in captured.out.splitlines() if line.strip()]
    return code, (lines[-1] if lines else None), captured.err


@pytest.fixture()
def workspace(tmp_path):
    files = {
        "issuer_key": write(tmp_path / "issuer.json", ISSUER.to_dict()),
        "subject_key": write(tmp_path / "subject.json", SUBJECT.to_dict()),
        "delegate_key": write(tmp_path / "delegate.json", DELEGATE.to_dict()),
        "receiver_key": write(tmp_path / "receiver.json", RECEIVER.to_dict()),
        "authority_key": write(tmp_path / "authority.json", AUTHORITY.to_dict()),
    }
    profile = identity_mapping_profile([], parse_timestamp(UNTIL), STEWARD)
    files["config"] = write(
        tmp_path / "config.json",
        {
            "evaluator_id": RECEIVER_ID,
            "audit_key": AUDIT.to_dict(),
            "trusted_issuers": {ISSUER.key_id: ISSUER.public_hex},
            "steward_keys": {STEWARD.key_id: STEWARD.public_hex},
            "mapping_profile": profile.to_dict(),
        },
    )
    files["payload"] = write(
        tmp_path / "payload.json",
        {
            "agent_id": SUBJECT.key_id,
            "issuer_id": ISSUER.key_id,
            "permissions": ["task.run"],
            "constraints": [
                {
                    "type": "NumericLimitConstraint",
                    "field": "core.amount",
                    "operator": "lte",
                    "value": "1000",
                }
            ],
        },
    )
    files["context"] = write(
        tmp_path / "context.json",
        {
            "kind": "request_context",
            "action": "task.run",
            "fields": {"core.amount": {"type": "decimal", "value": "250"}},
        },
    )
    files["dir"] = tmp_path
    return files


def issue(capsys, ws, out_name="credential.json", payload=None):
    out = ws["dir"] / out_name
    code, _, _ = run(
        capsys,
        "issue",
        "--key", ws["issuer_key"],
        "--payload", payload or ws["payload"],
        "--subject-key", ws["subject_key"],
        "--audience", RECEIVER_ID,
        "--valid-from", FROM,
        "--valid-until", UNTIL,
        "--out", out,
    )
    assert code == 0
    return out


def pop_file(ws, credential_path, nonce, key=SUBJECT):
    credential = parse_container(json.loads(credential_path.read_text()))
    proof = make_possession_proof(credential, RECEIVER_ID, nonce, parse_timestamp(NOW), key)
    return write(ws["dir"] / f"pop-{nonce}.json", proof.to_dict())


def evaluate(capsys, ws, credentials, nonce, key=SUBJECT, context=None, extra=()):
    argv = ["evaluate", "--config", ws["config"]]
    for path in credentials:
        argv += ["--credential", path]
    argv += [
        "--context", context or ws["context"],
        "--presenter", key.key_id,
        "--pop", pop_file(ws, credentials[-1], nonce, key),
        "--now", NOW,
    ]
    argv += list(extra)
    return run(capsys, *argv)


# --- key generation --------------------------------------------------------------

def test_keygen_is_deterministic_under_a_seed(tmp_path, capsys):
    out = tmp_path / "key.json"
    code, _, err = run(capsys, "keygen", "--key-id", "k1", "--seed", "s", "--out", out)
    assert code == 0
    first = json.loads(out.read_text())
    run(capsys, "keygen", "--key-id", "k1", "--seed", "s", "--out", out)
    assert json.loads(out.read_text()) == first
    assert first["public_key"] in err or first["public_key"]


def test_keygen_emits_to_stdout_without_out(capsys):
    code, obj, _ = run(capsys, "keygen", "--key-id", "k2")
    assert code == 0
    assert obj["key_id"] == "k2" and "private_key" in obj


# --- issue / evaluate ------------------------------------------------------------

def test_issue_then_allow_and_deny(workspace, capsys):
    credential_path = issue(capsys, workspace)
    code, decision, err = evaluate(capsys, workspace, [credential_path], "n1")
    assert code == 0
    assert decision["outcome"] == "ALLOW"
    assert "ALLOW" in err

    over = write(
        workspace["dir"] / "context-over.json",
        {
            "kind": "request_context",
            "action": "task.run",
            "fields": {"core.amount": {"type": "decimal", "value": "5000"}},
        },
    )
    code, decision, err = evaluate(capsys, workspace, [credential_path], "n2", context=over)
    assert code == 1
    assert decision["outcome"] == "DENY"
    assert decision["reason"]["code"] == "constraint_failed"
    assert "DENY constraint_failed at C1" in err


def test_evaluate_requires_a_config(workspace, capsys, monkeypatch):
    monkeypatch.delenv("MANDATE_CONFIG", raising=False)
    credential_path = issue(capsys, workspace)
    code, _, err = run(
        capsys,
        "evaluate",
        "--credential", credential_path,
        "--context", workspace["context"],
        "--presenter", SUBJECT.key_id,
    )
    assert code == 2
    assert "no engine config" in err


def test_evaluate_reads_config_from_environment(workspace, capsys, monkeypatch):
    monkeypatch.setenv("MANDATE_CONFIG", workspace["config"])
    credential_path = issue(capsys, workspace)
    code, decision, _ = run(
        capsys,
        "evaluate",
        "--credential", credential_path,
        "--context", workspace["context"],
        "--presenter", SUBJECT.key_id,
        "--pop", pop_file(workspace, credential_path, "env-nonce"),
        "--now", NOW,
    )
    assert code == 0 and decision["outcome"] == "ALLOW"


def test_evaluate_missing_file_is_a_usage_error(workspace, capsys):
    code, _, err = run(
        capsys,
        "evaluate",
        "--config", workspace["config"],
        "--credential", str(workspace["dir"] / "absent.json"),
        "--context", workspace["context"],
        "--presenter", SUBJECT.key_id,
    )
    assert code == 2
    assert "cannot read" in err


# --- delegation -------------------------------------------------------------------

def narrowed_payload(ws, limit="500"):
    return write(
        ws["dir"] / f"payload-narrow-{limit}.json",
        {
            "agent_id": DELEGATE.key_id,
            "issuer_id": SUBJECT.key_id,
            "permissions": ["task.run"],
            "constraints": [
                {
                    "type": "NumericLimitConstraint",
                    "field": "core.amount",
                    "operator": "lte",
                    "value": limit,
                }
            ],
        },
    )


def test_delegate_narrows_then_chain_evaluates(workspace, capsys):
    parent_path = issue(capsys, workspace)
    child_path = workspace["dir"] / "child.json"
    code, _, err = run(
        capsys,
        "delegate",
        "--parent", parent_path,
        "--key", workspace["subject_key"],
        "--payload", narrowed_payload(workspace),
        "--subject-key", workspace["delegate_key"],
        "--out", child_path,
    )
    assert code == 0
    code, decision, _ = evaluate(
        capsys, workspace, [parent_path, child_path], "chain-nonce", key=DELEGATE
    )
    assert code == 0 and decision["outcome"] == "ALLOW"


def test_delegate_refuses_widening(workspace, capsys):
    parent_path = issue(capsys, workspace)
    code, obj, err = run(
        capsys,
        "delegate",
        "--parent", parent_path,
        "--key", workspace["subject_key"],
        "--payload", narrowed_payload(workspace, limit="99999"),
        "--subject-key", workspace["delegate_key"],
    )
    assert code == 2
    assert obj["error"] == "attenuation_violation"
    assert "refused" in err


# --- revocation --------------------------------------------------------------------

def test_revocation_flows_into_evaluation(workspace, capsys):
    credential_path = issue(capsys, workspace)
    credential_id = json.loads(credential_path.read_text())["credential_id"]
    list_path = workspace["dir"] / "revoked.json"
    code, _, _ = run(
        capsys,
        "revoke",
        "--key", workspace["issuer_key"],
        "--credential-id", "cred-other",
        "--issuer-id", ISSUER.key_id,
        "--now", NOW,
        "--out", list_path,
    )
    assert code == 0
    code, _, _ = run(
        capsys,
        "revoke",
        "--key", workspace["issuer_key"],
        "--credential-id", credential_id,
        "--list", list_path,
        "--now", NOW,
        "--out", list_path,
    )
    assert code == 0
    revocation = json.loads(list_path.read_text())
    assert revocation["version"] == 2

    config = json.loads(open(workspace["config"]).read())
    config["revocation_lists"] = [
        {"list": revocation, "issuer_public": ISSUER.public_hex}
    ]
    write(workspace["dir"] / "config.json", config)
    code, decision, _ = evaluate(capsys, workspace, [credential_path], "revoked-nonce")
    assert code == 1
    assert decision["reason"]["code"] == "credential_revoked"


# --- audit -----------------------------------------------------------------------

def test_audit_chain_survives_cli_appends_and_detects_tamper(workspace, capsys):
    credential_path = issue(capsys, workspace)
    log_path = workspace["dir"] / "audit.log"
    for nonce in ("a1", "a2", "a3"):
        evaluate(
            capsys, workspace, [credential_path], nonce, extra=["--audit-path", str(log_path)]
        )
    keys_path = write(workspace["dir"] / "audit-keys.json", {AUDIT.key_id: AUDIT.public_hex})
    code, report, _ = run(capsys, "audit", "verify", "--log", log_path, "--keys", keys_path)
    assert code == 0
    assert report["ok"] is True and report["records"] == 3

    lines = log_path.read_text().splitlines()
    lines[1] = lines[1].replace("ALLOW", "DENY!", 1)
    log_path.write_text("\n".join(lines) + "\n")
    code, report, _ = run(capsys, "audit", "verify", "--log", log_path, "--keys", keys_path)
    assert code == 1
    assert report["ok"] is False and report["bad_index"] == 1


# --- manifest and preflight ---------------------------------------------------------

def build_registry_file(workspace, capsys):
    issuers_path = write(
        workspace["dir"] / "issuers.json",
        {
            ISSUER.key_id: {
                "standing": "active",
                "credential_classes": ["agent-authorization"],
                "profiles": ["*"],
            }
        },
    )
    registry_path = workspace["dir"] / "registry.json"
    code, _, _ = run(
        capsys,
        "registry", "build",
        "--key", write(workspace["dir"] / "steward.json", STEWARD.to_dict()),
        "--registry-id", "registry:cli",
        "--version", "1",
        "--valid-from", FROM,
        "--valid-until", UNTIL,
        "--issuers", issuers_path,
        "--out", registry_path,
    )
    assert code == 0
    return registry_path


def test_manifest_build_verify_preflight(workspace, capsys):
    registry_path = build_registry_file(workspace, capsys)
    config = json.loads(open(workspace["config"]).read())
    config["registries"] = [json.loads(registry_path.read_text())]
    write(workspace["dir"] / "config.json", config)

    manifest_path = workspace["dir"] / "manifest.json"
    code, _, _ = run(
        capsys,
        "manifest", "build",
        "--config", workspace["config"],
        "--key", workspace["receiver_key"],
        "--version", "1",
        "--valid-from", FROM,
        "--valid-until", UNTIL,
        "--out", manifest_path,
    )
    assert code == 0
    keys_path = write(workspace["dir"] / "receiver-keys.json", {RECEIVER_ID: RECEIVER.public_hex})
    code, verdict, _ = run(
        capsys, "manifest", "verify", "--manifest", manifest_path, "--keys", keys_path,
        "--now", NOW,
    )
    assert code == 0 and verdict["ok"] is True

    tampered = json.loads(manifest_path.read_text())
    tampered["version"] = 9
    tampered_path = write(workspace["dir"] / "manifest-tampered.json", tampered)
    code, verdict, _ = run(
        capsys, "manifest", "verify", "--manifest", tampered_path, "--keys", keys_path,
        "--now", NOW,
    )
    assert code == 1 and verdict["code"] == "bad_signature"

    credential_path = issue(capsys, workspace)
    caps_path = write(
        workspace["dir"] / "caps.json",
        {
            "credentials": [json.loads(credential_path.read_text())],
            "trust_anchors": ["registry:cli"],
        },
    )
    code, report, err = run(
        capsys,
        "preflight",
        "--manifest", manifest_path,
        "--keys", keys_path,
        "--capabilities", caps_path,
        "--now", NOW,
    )
    assert code == 0
    assert report["compatible"] is True
    assert "compatible" in err

    incompatible_path = write(
        workspace["dir"] / "caps-bad.json",
        {
            "credentials": [json.loads(credential_path.read_text())],
            "trust_anchors": ["registry:cli"],
            "credential_class": "payment-mandate",
        },
    )
    code, report, _ = run(
        capsys,
        "preflight",
        "--manifest", manifest_path,
        "--keys", keys_path,
        "--capabilities", incompatible_path,
        "--now", NOW,
    )
    assert code == 1
    assert report["findings"][0]["code"] == "credential_class_unaccepted"


# --- registry ----------------------------------------------------------------------

def test_registry_build_and_check(workspace, capsys):
    registry_path = build_registry_file(workspace, capsys)
    keys_path = write(workspace["dir"] / "steward-keys.json", {STEWARD.key_id: STEWARD.public_hex})
    code, verdict, _ = run(
        capsys,
        "registry", "check",
        "--registry", registry_path,
        "--keys", keys_path,
        "--now", NOW,
        "--issuer", ISSUER.key_id,
    )
    assert code == 0 and verdict["grants"] is True

    code, verdict, _ = run(
        capsys,
        "registry", "check",
        "--registry", registry_path,
        "--keys", keys_path,
        "--now", NOW,
        "--issuer", "iss:unknown",
    )
    assert code == 1 and verdict["grants"] is False

    wrong_keys = write(workspace["dir"] / "wrong-keys.json", {STEWARD.key_id: AUDIT.public_hex})
    code, verdict, _ = run(
        capsys,
        "registry", "check", "--registry", registry_path, "--keys", wrong_keys, "--now", NOW,
    )
    assert code == 1 and verdict["code"] == "bad_signature"


# --- conformance -------------------------------------------------------------------

def test_conformance_run_over_shipped_vectors(capsys):
    from pathlib import Path

    vectors = Path(__file__).resolve().parent.parent / "vectors"
    code, report, err = run(capsys, "conformance", "run", "--vectors", vectors)
    assert code == 0
    assert report["total"] == 59 and report["failed"] == 0
    assert "59/59" in err


# --- vouchers ----------------------------------------------------------------------

def test_voucher_init_update_verify(workspace, capsys):
    genesis_path = workspace["dir"] / "voucher-1.json"
    pointer = "https://state.cli.example/ledger"
    code, _, _ = run(
        capsys,
        "voucher", "init",
        "--key", workspace["authority_key"],
        "--credential-digest", "d" * 64,
        "--budget", "1000",
        "--pointer", pointer,
        "--now", "2026-05-01T11:58:00Z",
        "--out", genesis_path,
    )
    assert code == 0
    updated_path = workspace["dir"] / "voucher-2.json"
    code, _, _ = run(
        capsys,
        "voucher", "update",
        "--key", workspace["authority_key"],
        "--voucher", genesis_path,
        "--amount", "300",
        "--now", "2026-05-01T11:59:00Z",
        "--out", updated_path,
    )
    assert code == 0
    code, refusal, _ = run(
        capsys,
        "voucher", "update",
        "--key", workspace["authority_key"],
        "--voucher", updated_path,
        "--amount", "9000",
        "--now", NOW,
    )
    assert code == 2
    assert refusal["error"] == "over_budget"

    chain_path = write(
        workspace["dir"] / "chain.json",
        [json.loads(genesis_path.read_text()), json.loads(updated_path.read_text())],
    )
    code, verdict, _ = run(
        capsys,
        "voucher", "verify",
        "--vouchers", chain_path,
        "--authority-key", workspace["authority_key"],
        "--pointer", pointer,
        "--budget", "1000",
        "--credential-digest", "d" * 64,
        "--now", NOW,
    )
    assert code == 0
    assert verdict["ok"] is True and verdict["spent"] == "300"

    code, verdict, _ = run(
        capsys,
        "voucher", "verify",
        "--vouchers", chain_path,
        "--authority-key", workspace["authority_key"],
        "--pointer", pointer,
        "--budget", "2000",  # not the budget this chain accounts for
        "--credential-digest", "d" * 64,
        "--now", NOW,
    )
    assert code == 1
    assert verdict["ok"] is False
