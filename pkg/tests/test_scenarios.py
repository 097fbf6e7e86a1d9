"""Reference scenario bundles replayed end to end."""

import pytest

from mandate.audit import AuditLog, verify_audit_chain
from mandate.keys import generate_key
from mandate.pipeline import Engine
from mandate.scenarios import SCENARIO_NAMES, UnknownScenarioError, load_scenario

AUDIT = generate_key("test#audit", seed="scenarios:audit")


def engine_for(bundle):
    return Engine(bundle.engine_config(AuditLog(bundle.evaluator_id, AUDIT)))


def decide(bundle, engine, label, nonce):
    return engine.evaluate(
        bundle.credential,
        bundle.contexts[label],
        bundle.credential.subject_id,
        bundle.possession_proof(nonce),
        now=bundle.now,
    )


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_every_worked_context_matches_its_expected_decision(name):
    bundle = load_scenario(name)
    engine = engine_for(bundle)
    for index, label in enumerate(sorted(bundle.contexts)):
        decision = decide(bundle, engine, label, f"nonce-{index}")
        expected = bundle.expected[label]
        assert decision.outcome == expected["outcome"], label
        code = decision.reason.code.value if decision.reason else None
        assert code == expected["code"], label
        assert decision.failed_constraint == expected["failed_constraint"], label
    records = engine.config.audit_log.records()
    assert len(records) == len(bundle.contexts)
    ok, _, _ = verify_audit_chain(records, {AUDIT.key_id: AUDIT.public_hex})
    assert ok


def test_insurance_allow_trace_is_the_thirteen_entry_walkthrough():
    bundle = load_scenario("insurance_claims")
    decision = decide(bundle, engine_for(bundle), "allow", "walkthrough")
    assert decision.allowed
    assert len(decision.trace) == 13
    assert [(e.stage, e.check) for e in decision.trace] == [
        ("container", "parse"),
        ("container", "signature"),
        ("container", "issuer trust"),
        ("container", "audience"),
        ("container", "proof of possession"),
        ("container", "expiry and revocation"),
        ("payload", "permission"),
        ("constraints", "C1"),
        ("constraints", "C2"),
        ("constraints", "C3"),
        ("constraints", "C4"),
        ("policy", "local policy"),
        ("decision", "decision"),
    ]
    # The policy check witnesses the workflow id it required.
    assert decision.trace[11].result == "PASS: CLM-90421"
    assert decision.trace[12].result == "ALLOW"


def test_insurance_over_ceiling_denies_on_the_ceiling_constraint():
    bundle = load_scenario("insurance_claims")
    decision = decide(bundle, engine_for(bundle), "deny_over_ceiling", "ceiling")
    assert decision.failed_constraint == "C2"
    assert decision.reason.detail.startswith("C2:")


def test_supply_chain_issuer_is_vetted_through_the_registry():
    bundle = load_scenario("supply_chain")
    assert bundle.registries
    registry = bundle.registries[0]
    assert registry.grants(
        bundle.credential.issuer_id, "agent-authorization", bundle.profile_id
    )


def test_bundles_are_deterministic_across_loads():
    for name in SCENARIO_NAMES:
        first = load_scenario(name)
        second = load_scenario(name)
        assert first.credential.dumps() == second.credential.dumps()
        assert first.mapping_profile.digest() == second.mapping_profile.digest()


def test_unknown_scenario_name():
    with pytest.raises(UnknownScenarioError):
        load_scenario("retail")
