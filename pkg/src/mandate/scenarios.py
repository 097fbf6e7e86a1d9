"""End-to-end fixture bundles for the two reference use cases.

Pure data, deterministically derived: every key is seeded, every artifact is
signed the same way on every run, so documentation, tests, and the CLI can
all replay the same material and reach the same decisions.

``insurance_claims`` is an insurer's settlement negotiator presenting to a
body shop's claims service: four constraints, a local policy requiring a
workflow id, and a known ALLOW context plus a known over-ceiling denial.
``supply_chain`` is an evidence-presentation agent with five constraints,
including a namespace glob and a disclosure-volume ceiling, vetted through a
consortium trust registry.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal
from typing import Mapping, Optional

from .audit import AuditLog
from .constraints import (
    Constraint,
    EnumeratedListConstraint,
    NumericLimitConstraint,
    StringPatternConstraint,
    TemporalWindowConstraint,
)
from .container import (
    CredentialContainer,
    PossessionProof,
    issue_credential,
    make_possession_proof,
)
from .keys import SigningKey, generate_key
from .model import (
    AuthorizationPayload,
    RequestContext,
    SemanticType,
    parse_timestamp,
    parse_typed_value,
)
from .pipeline import EngineConfig, LocalPolicy
from .registry import IssuerEntry, StateAuthorityEntry, TrustRegistry, build_registry
from .semantics import (
    STATUS_CONDITIONAL,
    MappingProfile,
    Vocabulary,
    VocabularyEntry,
    identity_mapping_profile,
)

SCENARIO_NAMES = ("insurance_claims", "supply_chain")


class UnknownScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioBundle:
    """Everything one use case needs: keys, trust material, credential,
    contexts, and the decisions they must produce."""

    name: str
    keys: Mapping[str, SigningKey]  # roles: issuer, subject, steward, receiver
    evaluator_id: str
    vocabularies: tuple[Vocabulary, ...]
    mapping_profile: MappingProfile
    registries: tuple[TrustRegistry, ...]
    profile_id: str
    local_policy: Optional[LocalPolicy]
    credential: CredentialContainer
    contexts: Mapping[str, RequestContext]
    expected: Mapping[str, dict]
    now: datetime  # the instant the worked evaluations happen at

    def engine_config(self, audit_log: AuditLog) -> EngineConfig:
        issuer = self.keys["issuer"]
        return EngineConfig(
            evaluator_id=self.evaluator_id,
            audit_log=audit_log,
            trusted_issuers={self.credential.issuer_id: issuer.public_hex},
            steward_keys={self.keys["steward"].key_id: self.keys["steward"].public_hex},
            mapping_profile=self.mapping_profile,
            vocabularies=self.vocabularies,
            registries=self.registries,
            local_policy=self.local_policy,
            profile_id=self.profile_id,
        )

    def possession_proof(self, nonce: str, now: Optional[datetime] = None) -> PossessionProof:
        return make_possession_proof(
            self.credential,
            self.evaluator_id,
            nonce,
            now if now is not None else self.now,
            self.keys["subject"],
        )


def _value(text: str, kind: SemanticType):
    return parse_typed_value(text, kind)


_instant = parse_timestamp


def _insurance_claims() -> ScenarioBundle:
    issuer = generate_key("iss:megainsure:claims-authority", seed="scenario:insurance:issuer")
    subject = generate_key("agent:megainsure:negotiator-7", seed="scenario:insurance:subject")
    steward = generate_key("steward:insurance-consortium", seed="scenario:insurance:steward")
    receiver = generate_key("svc:bodyshopco:claims-api", seed="scenario:insurance:receiver")

    vocabulary = Vocabulary(
        profile_id="insurance",
        version=1,
        entries={
            "insurance.claim_type": VocabularyEntry(
                "insurance.claim_type", SemanticType.STRING_ID, STATUS_CONDITIONAL
            ),
        },
    )
    mapping = identity_mapping_profile(
        [vocabulary],
        valid_until=_instant("2027-01-01T00:00:00Z"),
        steward_key=steward,
        profile_id="insurance",
        version=1,
    )

    constraints: tuple[Constraint, ...] = (
        TemporalWindowConstraint(
            field="core.request_time",
            valid_from=_instant("2026-04-18T00:00:00Z"),
            valid_until=_instant("2026-04-18T23:59:59Z"),
            timezone="UTC",
        ),
        NumericLimitConstraint(
            field="core.amount", operator="lte", value=Decimal("5000"), currency="USD"
        ),
        NumericLimitConstraint(
            field="core.amount", operator="gte", value=Decimal("500"), currency="USD"
        ),
        EnumeratedListConstraint(
            field="insurance.claim_type",
            allowed=frozenset({"auto_collision", "auto_comprehensive"}),
        ),
    )
    payload = AuthorizationPayload(
        agent_id=subject.key_id,
        issuer_id=issuer.key_id,
        permissions=frozenset({"claim.settle"}),
        constraints=constraints,
    )
    credential = issue_credential(
        payload,
        subject_public_key=subject.public_hex,
        audience=[receiver.key_id],
        valid_from=_instant("2026-04-18T00:00:00Z"),
        valid_until=_instant("2026-04-18T23:59:59Z"),
        issuer_key=issuer,
    )

    def context(amount: str) -> RequestContext:
        return RequestContext(
            action="claim.settle",
            fields={
                "core.resource_id": _value("claims/auto/CLM-90421", SemanticType.STRING_ID),
                "core.amount": _value(amount, SemanticType.DECIMAL),
                "core.currency_code": _value("USD", SemanticType.STRING_CODE),
                "insurance.claim_type": _value("auto_collision", SemanticType.STRING_ID),
                "core.workflow_id": _value("CLM-90421", SemanticType.STRING_ID),
                "core.request_time": _value("2026-04-18T14:32:00Z", SemanticType.TIMESTAMP),
            },
        )

    return ScenarioBundle(
        name="insurance_claims",
        keys={"issuer": issuer, "subject": subject, "steward": steward, "receiver": receiver},
        evaluator_id=receiver.key_id,
        vocabularies=(vocabulary,),
        mapping_profile=mapping,
        registries=(),  # bilateral trust: the receiver pins the issuer key directly
        profile_id="insurance",
        local_policy=LocalPolicy(
            policy_id="bodyshopco-claims-intake",
            required_context_fields=("core.workflow_id",),
        ),
        credential=credential,
        contexts={
            "allow": context("3200"),
            "deny_over_ceiling": context("7500"),
        },
        expected={
            "allow": {"outcome": "ALLOW", "code": None, "failed_constraint": None},
            "deny_over_ceiling": {
                "outcome": "DENY",
                "code": "constraint_failed",
                "failed_constraint": "C2",
            },
        },
        now=_instant("2026-04-18T14:32:00Z"),
    )


def _supply_chain() -> ScenarioBundle:
    issuer = generate_key("iss:aerosupply:evidence-authority", seed="scenario:supply:issuer")
    subject = generate_key("agent:aerosupply:evidence-presenter-3", seed="scenario:supply:subject")
    steward = generate_key("steward:supplychain-consortium", seed="scenario:supply:steward")
    receiver = generate_key("svc:primecontractor:evidence-api", seed="scenario:supply:receiver")

    vocabulary = Vocabulary(
        profile_id="supplychain",
        version=1,
        entries={
            "supplychain.evidenceType": VocabularyEntry(
                "supplychain.evidenceType", SemanticType.STRING_ID, STATUS_CONDITIONAL
            ),
            "supplychain.recipientRole": VocabularyEntry(
                "supplychain.recipientRole", SemanticType.STRING_ID, STATUS_CONDITIONAL
            ),
            "supplychain.componentId": VocabularyEntry(
                "supplychain.componentId", SemanticType.STRING_ID, STATUS_CONDITIONAL
            ),
            "supplychain.maxRecordsDisclosed": VocabularyEntry(
                "supplychain.maxRecordsDisclosed", SemanticType.INTEGER, STATUS_CONDITIONAL
            ),
        },
    )
    mapping = identity_mapping_profile(
        [vocabulary],
        valid_until=_instant("2027-01-01T00:00:00Z"),
        steward_key=steward,
        profile_id="supplychain",
        version=1,
    )
    registry = build_registry(
        registry_id="registry:supplychain-consortium",
        version=1,
        valid_from=_instant("2026-01-01T00:00:00Z"),
        valid_until=_instant("2027-01-01T00:00:00Z"),
        issuers=[
            IssuerEntry(
                issuer_id=issuer.key_id,
                standing="active",
                credential_classes=frozenset({"agent-authorization"}),
                profiles=frozenset({"supplychain"}),
            )
        ],
        steward_key=steward,
        state_authorities=[
            StateAuthorityEntry(
                pointer="https://state.supplychain-consortium.example/ledger",
                profiles=frozenset({"supplychain"}),
            )
        ],
    )

    constraints: tuple[Constraint, ...] = (
        EnumeratedListConstraint(
            field="supplychain.evidenceType",
            allowed=frozenset({"origin_attestation", "test_certificate", "material_compliance"}),
        ),
        EnumeratedListConstraint(
            field="supplychain.recipientRole",
            allowed=frozenset({"prime_contractor", "certified_auditor", "regulator"}),
        ),
        StringPatternConstraint(
            field="supplychain.componentId",
            match="restricted_glob",
            pattern="aerospace/components/*/lot/*",
        ),
        TemporalWindowConstraint(
            field="core.request_time",
            valid_from=_instant("2026-01-01T00:00:00Z"),
            valid_until=_instant("2026-12-31T23:59:59Z"),
            timezone="UTC",
        ),
        NumericLimitConstraint(
            field="supplychain.maxRecordsDisclosed", operator="lte", value=Decimal("100")
        ),
    )
    payload = AuthorizationPayload(
        agent_id=subject.key_id,
        issuer_id=issuer.key_id,
        permissions=frozenset({"evidence.present"}),
        constraints=constraints,
    )
    credential = issue_credential(
        payload,
        subject_public_key=subject.public_hex,
        audience=[receiver.key_id],
        valid_from=_instant("2026-01-01T00:00:00Z"),
        valid_until=_instant("2026-12-31T23:59:59Z"),
        issuer_key=issuer,
    )

    def context(component_id: str, records: str) -> RequestContext:
        return RequestContext(
            action="evidence.present",
            fields={
                "supplychain.evidenceType": _value("test_certificate", SemanticType.STRING_ID),
                "supplychain.recipientRole": _value("certified_auditor", SemanticType.STRING_ID),
                "supplychain.componentId": _value(component_id, SemanticType.STRING_ID),
                "supplychain.maxRecordsDisclosed": _value(records, SemanticType.INTEGER),
                "core.request_time": _value("2026-06-15T10:00:00Z", SemanticType.TIMESTAMP),
            },
        )

    return ScenarioBundle(
        name="supply_chain",
        keys={"issuer": issuer, "subject": subject, "steward": steward, "receiver": receiver},
        evaluator_id=receiver.key_id,
        vocabularies=(vocabulary,),
        mapping_profile=mapping,
        registries=(registry,),
        profile_id="supplychain",
        local_policy=None,
        credential=credential,
        contexts={
            "allow": context("aerospace/components/wing-spar-204/lot/LOT-88", "42"),
            "deny_excessive_disclosure": context(
                "aerospace/components/wing-spar-204/lot/LOT-88", "250"
            ),
            "deny_wrong_namespace": context("maritime/hull/204/lot/9", "42"),
        },
        expected={
            "allow": {"outcome": "ALLOW", "code": None, "failed_constraint": None},
            "deny_excessive_disclosure": {
                "outcome": "DENY",
                "code": "constraint_failed",
                "failed_constraint": "C5",
            },
            "deny_wrong_namespace": {
                "outcome": "DENY",
                "code": "constraint_failed",
                "failed_constraint": "C3",
            },
        },
        now=_instant("2026-06-15T10:00:00Z"),
    )


def load_scenario(name: str) -> ScenarioBundle:
    if name == "insurance_claims":
        return _insurance_claims()
    if name == "supply_chain":
        return _supply_chain()
    raise UnknownScenarioError(f"unknown_scenario: {name!r} (choose from {SCENARIO_NAMES})")
