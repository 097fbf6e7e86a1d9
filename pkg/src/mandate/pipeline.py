"""The evaluation engine: one fixed pipeline from presented bytes to a decision.

Every call runs the same sequence: parse, container verification, payload
completeness, permission membership, each constraint in payload order, then
local policy.  The first failing check ends the evaluation with exactly one
typed reason; nothing later can resurrect an allow.  Delegation chains add a
depth gate, per-link verification, and pairwise narrowing checks before the
leaf payload is evaluated the ordinary way.

Each evaluation writes exactly one audit record, allow or deny.  If the
record cannot be written the decision itself becomes a denial: an enforcement
point that cannot account for its decisions must stop deciding.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from datetime import datetime, timedelta
from decimal import Decimal
from typing import Mapping, Optional, Sequence, Union

from .audit import AuditError, AuditLog
from .constraints import (
    Constraint,
    CumulativeLimitConstraint,
    EnumeratedListConstraint,
    NumericLimitConstraint,
    StringPatternConstraint,
    TemporalWindowConstraint,
    UnknownConstraint,
    constraint_from_dict,
    evaluate_constraint,
    check_attenuation,
    family_of,
    glob_match,
)
from .container import (
    CredentialContainer,
    MalformedContainerError,
    NonceCache,
    PossessionProof,
    RevocationStore,
    parse_container,
    verify_container,
    DEFAULT_POP_MAX_AGE,
)
from .model import (
    ALLOW,
    Decision,
    DenialReason,
    DenyCode,
    RequestContext,
    TraceEntry,
    allow,
    deny,
    validate_payload,
)
from .registry import TrustRegistry
from .semantics import MappingProfile, Vocabulary, resolve_semantic_field, validate_mapping_profile
from .stateful import (
    DEFAULT_FRESHNESS,
    EpochLedger,
    StateAuthority,
    StateVoucher,
    TIER_SYNCHRONOUS,
    TIERS,
    VoucherMemory,
    evaluate_cumulative,
)

CURRENCY_FIELD = "core.currency_code"

# Verification sub-checks in the order verify_container performs them, so a
# denial code can be placed on the trace at the right step.
_VERIFY_CHECKS = (
    "signature",
    "issuer trust",
    "audience",
    "proof of possession",
    "expiry and revocation",
)
_CODE_TO_CHECK = {
    DenyCode.SIGNATURE_INVALID: 0,
    DenyCode.ISSUER_UNTRUSTED: 1,
    DenyCode.ISSUER_NOT_VETTED: 1,
    DenyCode.AUDIENCE_MISMATCH: 2,
    DenyCode.PROOF_OF_POSSESSION_FAILED: 3,
    DenyCode.SUBJECT_BINDING_MISMATCH: 3,
    DenyCode.CREDENTIAL_EXPIRED: 4,
    DenyCode.CREDENTIAL_REVOKED: 4,
}


@dataclass(frozen=True)
class LocalPolicy:
    """Receiver-side requirements layered on top of whatever credentials say.

    Required context fields must resolve; policy constraints are evaluated
    like credential constraints but deny with local_policy_denied, since the
    defect is the receiver's own bar, not the credential.
    """

    policy_id: str
    required_context_fields: tuple[str, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": "local_policy",
            "policy_id": self.policy_id,
            "required_context_fields": list(self.required_context_fields),
            "constraints": [c.to_dict() for c in self.constraints],
        }

    @staticmethod
    def from_dict(obj: dict) -> "LocalPolicy":
        return LocalPolicy(
            policy_id=str(obj["policy_id"]),
            required_context_fields=tuple(obj.get("required_context_fields", ())),
            constraints=tuple(constraint_from_dict(c) for c in obj.get("constraints", ())),
        )


@dataclass(frozen=True)
class WorkflowRole:
    role_id: str
    issuer_pattern: str  # restricted glob over issuer identities
    required_permission: str

    def to_dict(self) -> dict:
        return {
            "role_id": self.role_id,
            "issuer_pattern": self.issuer_pattern,
            "required_permission": self.required_permission,
        }

    @staticmethod
    def from_dict(obj: dict) -> "WorkflowRole":
        return WorkflowRole(
            role_id=str(obj["role_id"]),
            issuer_pattern=str(obj["issuer_pattern"]),
            required_permission=str(obj["required_permission"]),
        )


@dataclass(frozen=True)
class WorkflowPolicy:
    """What a multi-agent workflow requires before any step may run."""

    workflow_id: str
    roles: tuple[WorkflowRole, ...]
    shared_fields: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": "workflow_policy",
            "workflow_id": self.workflow_id,
            "roles": [r.to_dict() for r in self.roles],
            "shared_fields": list(self.shared_fields),
        }

    @staticmethod
    def from_dict(obj: dict) -> "WorkflowPolicy":
        return WorkflowPolicy(
            workflow_id=str(obj["workflow_id"]),
            roles=tuple(WorkflowRole.from_dict(r) for r in obj.get("roles", ())),
            shared_fields=tuple(obj.get("shared_fields", ())),
        )


@dataclass(frozen=True)
class WorkflowComposition:
    """A successful composition: who fills each role, and the joined constraints
    every participant must satisfy on the shared fields."""

    workflow_id: str
    assignments: Mapping[str, str]  # role_id -> credential digest
    effective_constraints: tuple[Constraint, ...]


@dataclass
class EngineConfig:
    """Everything an enforcement point trusts, pinned up front.

    The engine never fetches trust material at evaluation time; registries,
    keys, profiles, and policy are loaded and verified by the operator before
    any request is consulted against them.
    """

    evaluator_id: str
    audit_log: AuditLog
    trusted_issuers: Mapping[str, str] = dc_field(default_factory=dict)
    steward_keys: Mapping[str, str] = dc_field(default_factory=dict)
    mapping_profile: Optional[MappingProfile] = None
    vocabularies: tuple[Vocabulary, ...] = ()
    registries: tuple[TrustRegistry, ...] = ()
    revocations: Optional[RevocationStore] = None
    local_policy: Optional[LocalPolicy] = None
    credential_class: str = "agent-authorization"
    profile_id: str = ""
    tier: str = TIER_SYNCHRONOUS
    state_clients: Mapping[str, StateAuthority] = dc_field(default_factory=dict)
    state_authority_keys: Mapping[str, str] = dc_field(default_factory=dict)
    epoch_ledger: Optional[EpochLedger] = None
    max_chain_depth: int = 4
    pop_required: bool = True
    pop_max_age: timedelta = DEFAULT_POP_MAX_AGE
    state_freshness: timedelta = DEFAULT_FRESHNESS
    clock_skew: timedelta = timedelta(0)
    manifest_digest: Optional[str] = None

    def __post_init__(self) -> None:
        if self.tier not in TIERS:
            raise ValueError(f"unknown enforcement tier {self.tier!r}")
        if self.max_chain_depth < 1:
            raise ValueError("max_chain_depth must be at least 1")


@dataclass
class _Notes:
    """Working memory for one evaluation, folded into its audit record."""

    containers: list[CredentialContainer] = dc_field(default_factory=list)
    resolved: dict[str, str] = dc_field(default_factory=dict)
    constraint_results: list[dict] = dc_field(default_factory=list)
    workflow: Optional[dict] = None


Credential = Union[bytes, str, dict, CredentialContainer]


class Engine:
    """A single enforcement point.  One instance, one trust configuration,
    one audit chain, one replay cache."""

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.nonce_cache = NonceCache()
        self.voucher_memory = VoucherMemory()

    # -- public operations -----------------------------------------------

    def evaluate(
        self,
        credential: Union[Credential, Sequence[Credential]],
        context: RequestContext,
        presenter_id: str,
        pop: Optional[PossessionProof] = None,
        *,
        now: datetime,
        vouchers: Optional[Sequence[StateVoucher]] = None,
    ) -> Decision:
        """Decide one request.  A list of credentials is a delegation chain,
        presented root first; a single credential is a chain of one."""
        trace: list[TraceEntry] = []
        notes = _Notes()
        if isinstance(credential, (list, tuple)):
            operation = "evaluate_chain" if len(credential) > 1 else "evaluate"
            decision = self._decide_chain(
                list(credential), context, presenter_id, pop, now, vouchers, trace, notes
            )
        else:
            operation = "evaluate"
            decision = self._decide_single(
                credential, context, presenter_id, pop, now, vouchers, trace, notes
            )
        return self._record(operation, decision, context, presenter_id, now, notes)

    def compose_workflow(
        self,
        policy: WorkflowPolicy,
        credentials: Sequence[Credential],
        *,
        now: datetime,
    ) -> tuple[Decision, Optional[WorkflowComposition]]:
        """Check that a set of credentials jointly staffs a workflow.

        Every role must be filled by a verified credential whose issuer
        matches the role's issuer pattern and whose permissions include the
        role's required permission.  Constraints on declared shared fields
        are conjoined across all participants; a conjunction that no request
        could ever satisfy is refused here, before any step runs.
        """
        trace: list[TraceEntry] = []
        notes = _Notes()
        decision, composition = self._compose(policy, credentials, now, trace, notes)
        decision = self._record(
            "compose_workflow",
            decision,
            None,
            None,
            now,
            notes,
        )
        if not decision.allowed:
            composition = None
        return decision, composition

    # -- parsing and verification ------------------------------------------

    def _parse(self, credential: Credential) -> CredentialContainer:
        if isinstance(credential, CredentialContainer):
            return credential
        return parse_container(credential)

    def _verify(
        self,
        container: CredentialContainer,
        presenter_id: str,
        pop: Optional[PossessionProof],
        now: datetime,
        *,
        pop_required: bool,
        trusted_issuers: Optional[Mapping[str, str]] = None,
        use_registries: bool = True,
    ) -> Optional[DenialReason]:
        """Run the container gate.  Chain links override the trust source:
        a delegated link is signed by its parent's subject, so its key comes
        from the parent container, and registry vetting applies only to the
        root issuer."""
        cfg = self.config
        return verify_container(
            container,
            presenter_id,
            pop,
            evaluator_id=cfg.evaluator_id,
            trusted_issuers=cfg.trusted_issuers if trusted_issuers is None else trusted_issuers,
            now=now,
            nonce_cache=self.nonce_cache,
            registries=cfg.registries if use_registries else (),
            credential_class=cfg.credential_class,
            profile_id=cfg.profile_id,
            revocations=cfg.revocations,
            pop_required=pop_required and cfg.pop_required,
            pop_max_age=cfg.pop_max_age,
            clock_skew=cfg.clock_skew,
        )

    def _trace_verify(self, trace: list[TraceEntry], reason: Optional[DenialReason]) -> None:
        """Append one entry per verification sub-check, stopping at the failure."""
        if reason is None:
            for check in _VERIFY_CHECKS:
                trace.append(TraceEntry("container", check, "PASS"))
            return
        failed_at = _CODE_TO_CHECK.get(reason.code, len(_VERIFY_CHECKS) - 1)
        for check in _VERIFY_CHECKS[:failed_at]:
            trace.append(TraceEntry("container", check, "PASS"))
        trace.append(
            TraceEntry("container", _VERIFY_CHECKS[failed_at], f"FAIL: {reason.detail}")
        )

    # -- single credential --------------------------------------------------

    def _decide_single(
        self,
        credential: Credential,
        context: RequestContext,
        presenter_id: str,
        pop: Optional[PossessionProof],
        now: datetime,
        vouchers: Optional[Sequence[StateVoucher]],
        trace: list[TraceEntry],
        notes: _Notes,
    ) -> Decision:
        try:
            container = self._parse(credential)
        except (MalformedContainerError, ValueError) as exc:
            trace.append(TraceEntry("container", "parse", f"FAIL: {exc}"))
            return self._finish(
                trace, deny(DenyCode.SIGNATURE_INVALID, f"malformed container: {exc}")
            )
        notes.containers.append(container)
        trace.append(TraceEntry("container", "parse", "PASS"))

        reason = self._verify(container, presenter_id, pop, now, pop_required=True)
        self._trace_verify(trace, reason)
        if reason is not None:
            return self._finish(trace, deny(reason.code, reason.detail))

        return self._evaluate_payload(container, context, now, vouchers, trace, notes)

    # -- delegation chain ----------------------------------------------------

    def _decide_chain(
        self,
        credentials: list[Credential],
        context: RequestContext,
        presenter_id: str,
        pop: Optional[PossessionProof],
        now: datetime,
        vouchers: Optional[Sequence[StateVoucher]],
        trace: list[TraceEntry],
        notes: _Notes,
    ) -> Decision:
        if not credentials:
            return self._finish(
                trace, deny(DenyCode.CREDENTIAL_INCOMPLETE, "no credentials presented")
            )
        containers: list[CredentialContainer] = []
        for index, credential in enumerate(credentials, start=1):
            try:
                containers.append(self._parse(credential))
            except (MalformedContainerError, ValueError) as exc:
                trace.append(TraceEntry("chain", "parse", f"FAIL: link {index}: {exc}"))
                return self._finish(
                    trace,
                    deny(DenyCode.SIGNATURE_INVALID, f"malformed container in link {index}: {exc}"),
                )
        notes.containers.extend(containers)
        trace.append(TraceEntry("chain", "parse", f"PASS: {len(containers)} links"))

        if len(containers) > self.config.max_chain_depth:
            trace.append(
                TraceEntry(
                    "chain",
                    "depth",
                    f"FAIL: {len(containers)} links exceeds limit {self.config.max_chain_depth}",
                )
            )
            return self._finish(
                trace,
                deny(
                    DenyCode.DELEGATION_DEPTH_EXCEEDED,
                    f"chain of {len(containers)} links exceeds the depth limit of "
                    f"{self.config.max_chain_depth}",
                ),
            )
        trace.append(TraceEntry("chain", "depth", "PASS"))

        for index, container in enumerate(containers, start=1):
            problem = validate_payload(container.payload)
            if problem is not None:
                trace.append(
                    TraceEntry("chain", f"link {index} payload", f"FAIL: {problem.detail}")
                )
                return self._finish(
                    trace, deny(problem.code, f"link {index}: {problem.detail}")
                )

        # Continuity is structural and judged before signatures, so a
        # mis-chained presentation reports the chain defect, not a key defect.
        for index, (parent, child) in enumerate(zip(containers, containers[1:]), start=2):
            if child.issuer_id != parent.subject_id:
                trace.append(
                    TraceEntry(
                        "chain",
                        f"link {index} continuity",
                        f"FAIL: issuer {child.issuer_id!r} is not the parent subject",
                    )
                )
                return self._finish(
                    trace,
                    deny(
                        DenyCode.DELEGATION_CHAIN_BROKEN,
                        f"link {index} issuer {child.issuer_id!r} is not the parent subject "
                        f"{parent.subject_id!r}",
                    ),
                )
            if child.parent_digest != parent.digest():
                trace.append(
                    TraceEntry(
                        "chain", f"link {index} continuity", "FAIL: parent digest mismatch"
                    )
                )
                return self._finish(
                    trace,
                    deny(
                        DenyCode.DELEGATION_CHAIN_BROKEN,
                        f"link {index} does not reference its parent by digest",
                    ),
                )
            trace.append(TraceEntry("chain", f"link {index} continuity", "PASS"))

        leaf = containers[-1]
        for index, container in enumerate(containers, start=1):
            is_leaf = container is leaf
            expected_presenter = presenter_id if is_leaf else container.subject_id
            # The root is signed by a configured issuer and subject to registry
            # vetting; every later link is signed by its parent's subject.
            overrides = (
                None
                if index == 1
                else {container.issuer_id: containers[index - 2].subject_public_key}
            )
            reason = self._verify(
                container,
                expected_presenter,
                pop if is_leaf else None,
                now,
                pop_required=is_leaf,
                trusted_issuers=overrides,
                use_registries=index == 1,
            )
            if reason is not None:
                trace.append(
                    TraceEntry("chain", f"link {index} verify", f"FAIL: {reason.detail}")
                )
                return self._finish(
                    trace, deny(reason.code, f"link {index}: {reason.detail}")
                )
            trace.append(TraceEntry("chain", f"link {index} verify", "PASS"))

        for index, (parent, child) in enumerate(zip(containers, containers[1:]), start=2):
            if child.valid_from < parent.valid_from or child.valid_until > parent.valid_until:
                trace.append(
                    TraceEntry("chain", f"link {index} attenuation", "FAIL: validity window widened")
                )
                return self._finish(
                    trace,
                    deny(
                        DenyCode.DELEGATION_WIDENED,
                        f"link {index} validity window extends beyond its parent",
                    ),
                )
            parent_permissions = parent.payload.permissions or frozenset()
            extra = (child.payload.permissions or frozenset()) - parent_permissions
            if extra:
                trace.append(
                    TraceEntry(
                        "chain", f"link {index} attenuation", f"FAIL: adds permissions {sorted(extra)}"
                    )
                )
                return self._finish(
                    trace,
                    deny(
                        DenyCode.DELEGATION_WIDENED,
                        f"link {index} grants permissions its parent never held: {sorted(extra)}",
                    ),
                )
            ok, detail = check_attenuation(
                child.payload.constraints or (), parent.payload.constraints or ()
            )
            if not ok:
                trace.append(
                    TraceEntry("chain", f"link {index} attenuation", f"FAIL: {detail}")
                )
                return self._finish(
                    trace, deny(DenyCode.DELEGATION_WIDENED, f"link {index}: {detail}")
                )
            trace.append(TraceEntry("chain", f"link {index} attenuation", "PASS"))

        return self._evaluate_payload(leaf, context, now, vouchers, trace, notes)

    # -- payload evaluation ---------------------------------------------------

    def _evaluate_payload(
        self,
        container: CredentialContainer,
        context: RequestContext,
        now: datetime,
        vouchers: Optional[Sequence[StateVoucher]],
        trace: list[TraceEntry],
        notes: _Notes,
    ) -> Decision:
        cfg = self.config
        payload = container.payload

        problem = validate_payload(payload)
        if problem is not None:
            trace.append(TraceEntry("payload", "completeness", f"FAIL: {problem.detail}"))
            return self._finish(trace, deny(problem.code, problem.detail))

        if context.action not in (payload.permissions or frozenset()):
            trace.append(
                TraceEntry("payload", "permission", f"FAIL: {context.action!r} not granted")
            )
            return self._finish(
                trace,
                deny(
                    DenyCode.PERMISSION_DENIED,
                    f"action {context.action!r} is not among the granted permissions",
                ),
            )
        trace.append(TraceEntry("payload", "permission", "PASS"))

        profile_status = validate_mapping_profile(cfg.mapping_profile, now, cfg.steward_keys)

        # Opportunistic, for the audit snapshot only: the requested resource is
        # recorded when resolvable, and its absence never alters the decision.
        resource, _ = resolve_semantic_field(
            "core.resource_id", context, cfg.mapping_profile, cfg.vocabularies,
            now, cfg.steward_keys, profile_status,
        )
        if resource is not None:
            notes.resolved["core.resource_id"] = resource.text

        constraints = payload.constraints or ()
        needs_currency = any(
            isinstance(c, (NumericLimitConstraint, CumulativeLimitConstraint)) and c.currency
            for c in constraints
        )
        context_currency: Optional[str] = None
        if needs_currency:
            context_currency, reason = self._resolve_currency(context, now, profile_status, notes)
            if reason is not None:
                trace.append(TraceEntry("constraints", "currency", f"FAIL: {reason.detail}"))
                return self._finish(trace, deny(reason.code, reason.detail))

        for index, constraint in enumerate(constraints, start=1):
            label = f"C{index}"
            decision = self._evaluate_one_constraint(
                label, constraint, container, context, now, context_currency,
                profile_status, vouchers, trace, notes,
            )
            if decision is not None:
                return decision

        decision = self._apply_local_policy(context, now, profile_status, trace, notes)
        if decision is not None:
            return decision

        trace.append(TraceEntry("decision", "decision", "ALLOW"))
        return allow(trace)

    def _evaluate_one_constraint(
        self,
        label: str,
        constraint: Constraint,
        container: CredentialContainer,
        context: RequestContext,
        now: datetime,
        context_currency: Optional[str],
        profile_status: Optional[DenialReason],
        vouchers: Optional[Sequence[StateVoucher]],
        trace: list[TraceEntry],
        notes: _Notes,
    ) -> Optional[Decision]:
        """None when the constraint passes; the final denial otherwise."""
        cfg = self.config
        family = family_of(constraint)
        if isinstance(constraint, UnknownConstraint):
            trace.append(
                TraceEntry("constraints", label, f"FAIL: unrecognized type {constraint.type_tag!r}")
            )
            notes.constraint_results.append(
                {"label": label, "type": constraint.type_tag, "field": "", "result": "FAIL"}
            )
            return self._finish(
                trace,
                deny(
                    DenyCode.CONSTRAINT_UNKNOWN,
                    f"{label}: constraint type {constraint.type_tag!r} is not recognized",
                    failed_constraint=label,
                ),
            )

        value, reason = resolve_semantic_field(
            constraint.field, context, cfg.mapping_profile, cfg.vocabularies,
            now, cfg.steward_keys, profile_status,
        )
        if reason is not None:
            trace.append(TraceEntry("constraints", label, f"FAIL: {reason.detail}"))
            notes.constraint_results.append(
                {"label": label, "type": family, "field": constraint.field, "result": "FAIL"}
            )
            return self._finish(
                trace,
                deny(reason.code, f"{label}: {reason.detail}", failed_constraint=label),
            )
        assert value is not None
        notes.resolved[constraint.field] = value.text

        if isinstance(constraint, CumulativeLimitConstraint):
            reason = evaluate_cumulative(
                constraint,
                value,
                container.digest(),
                tier=cfg.tier,
                registries=cfg.registries,
                profile_id=cfg.profile_id,
                now=now,
                context_currency=context_currency,
                state_clients=cfg.state_clients,
                epoch_ledger=cfg.epoch_ledger,
                vouchers=vouchers,
                authority_keys=cfg.state_authority_keys,
                voucher_memory=self.voucher_memory,
                freshness=cfg.state_freshness,
            )
            if reason is not None:
                trace.append(TraceEntry("constraints", label, f"FAIL: {reason.detail}"))
                notes.constraint_results.append(
                    {"label": label, "type": family, "field": constraint.field, "result": "FAIL"}
                )
                return self._finish(
                    trace,
                    deny(reason.code, f"{label}: {reason.detail}", failed_constraint=label),
                )
        else:
            ok, detail = evaluate_constraint(constraint, value, context_currency)
            if not ok:
                trace.append(TraceEntry("constraints", label, f"FAIL: {detail}"))
                notes.constraint_results.append(
                    {"label": label, "type": family, "field": constraint.field, "result": "FAIL"}
                )
                return self._finish(
                    trace,
                    deny(
                        DenyCode.CONSTRAINT_FAILED,
                        f"{label}: {detail}",
                        failed_constraint=label,
                    ),
                )
        trace.append(TraceEntry("constraints", label, "PASS"))
        notes.constraint_results.append(
            {"label": label, "type": family, "field": constraint.field, "result": "PASS"}
        )
        return None

    def _resolve_currency(
        self,
        context: RequestContext,
        now: datetime,
        profile_status: Optional[DenialReason],
        notes: _Notes,
    ) -> tuple[Optional[str], Optional[DenialReason]]:
        """Context currency for currency-tagged limits.  Absent is None, which
        the constraint then fails on its own terms; any other resolution
        defect is surfaced as-is."""
        cfg = self.config
        value, reason = resolve_semantic_field(
            CURRENCY_FIELD, context, cfg.mapping_profile, cfg.vocabularies,
            now, cfg.steward_keys, profile_status,
        )
        if reason is not None:
            if reason.code is DenyCode.CONTEXT_FIELD_MISSING:
                return None, None
            return None, reason
        assert value is not None
        notes.resolved[CURRENCY_FIELD] = value.text
        return value.text, None

    def _apply_local_policy(
        self,
        context: RequestContext,
        now: datetime,
        profile_status: Optional[DenialReason],
        trace: list[TraceEntry],
        notes: _Notes,
    ) -> Optional[Decision]:
        """None when local policy is satisfied; the final denial otherwise."""
        cfg = self.config
        policy = cfg.local_policy
        if policy is None:
            return None
        witness: list[str] = []
        for field in policy.required_context_fields:
            value, reason = resolve_semantic_field(
                field, context, cfg.mapping_profile, cfg.vocabularies,
                now, cfg.steward_keys, profile_status,
            )
            if reason is not None:
                trace.append(TraceEntry("policy", "local policy", f"FAIL: {reason.detail}"))
                return self._finish(
                    trace, deny(reason.code, f"local policy: {reason.detail}")
                )
            assert value is not None
            notes.resolved[field] = value.text
            witness.append(value.text)
        for constraint in policy.constraints:
            if isinstance(constraint, UnknownConstraint):
                trace.append(
                    TraceEntry("policy", "local policy", "FAIL: unrecognized policy constraint")
                )
                return self._finish(
                    trace,
                    deny(
                        DenyCode.LOCAL_POLICY_DENIED,
                        f"policy {policy.policy_id!r} holds an unrecognized constraint type",
                    ),
                )
            value, reason = resolve_semantic_field(
                constraint.field, context, cfg.mapping_profile, cfg.vocabularies,
                now, cfg.steward_keys, profile_status,
            )
            if reason is not None:
                trace.append(TraceEntry("policy", "local policy", f"FAIL: {reason.detail}"))
                return self._finish(
                    trace, deny(reason.code, f"local policy: {reason.detail}")
                )
            assert value is not None
            notes.resolved[constraint.field] = value.text
            ok, detail = evaluate_constraint(constraint, value)
            if not ok:
                trace.append(TraceEntry("policy", "local policy", f"FAIL: {detail}"))
                return self._finish(
                    trace,
                    deny(
                        DenyCode.LOCAL_POLICY_DENIED,
                        f"policy {policy.policy_id!r}: {detail}",
                    ),
                )
        suffix = f": {', '.join(witness)}" if witness else ""
        trace.append(TraceEntry("policy", "local policy", f"PASS{suffix}"))
        return None

    # -- workflow composition ---------------------------------------------------

    def _compose(
        self,
        policy: WorkflowPolicy,
        credentials: Sequence[Credential],
        now: datetime,
        trace: list[TraceEntry],
        notes: _Notes,
    ) -> tuple[Decision, Optional[WorkflowComposition]]:
        containers: list[CredentialContainer] = []
        for index, credential in enumerate(credentials, start=1):
            try:
                container = self._parse(credential)
            except (MalformedContainerError, ValueError) as exc:
                trace.append(TraceEntry("workflow", "parse", f"FAIL: credential {index}: {exc}"))
                return (
                    self._finish(
                        trace,
                        deny(
                            DenyCode.SIGNATURE_INVALID,
                            f"malformed container in workflow set ({index}): {exc}",
                        ),
                    ),
                    None,
                )
            containers.append(container)
        notes.containers.extend(containers)
        trace.append(TraceEntry("workflow", "parse", f"PASS: {len(containers)} credentials"))

        # Composition is a planning step: each credential is verified as an
        # artifact (signature, trust, window, revocation) with possession
        # deferred to the per-step evaluations that follow.
        for index, container in enumerate(containers, start=1):
            reason = self._verify(container, container.subject_id, None, now, pop_required=False)
            if reason is not None:
                trace.append(
                    TraceEntry("workflow", f"credential {index} verify", f"FAIL: {reason.detail}")
                )
                return (
                    self._finish(
                        trace, deny(reason.code, f"workflow credential {index}: {reason.detail}")
                    ),
                    None,
                )
            problem = validate_payload(container.payload)
            if problem is not None:
                trace.append(
                    TraceEntry("workflow", f"credential {index} verify", f"FAIL: {problem.detail}")
                )
                return (
                    self._finish(
                        trace, deny(problem.code, f"workflow credential {index}: {problem.detail}")
                    ),
                    None,
                )
            trace.append(TraceEntry("workflow", f"credential {index} verify", "PASS"))

        assignments: dict[str, str] = {}
        for role in policy.roles:
            filled = None
            for container in containers:
                if container.digest() in assignments.values():
                    continue
                if not glob_match(role.issuer_pattern, container.issuer_id):
                    continue
                if role.required_permission not in (container.payload.permissions or frozenset()):
                    continue
                filled = container
                break
            if filled is None:
                trace.append(
                    TraceEntry("workflow", f"role {role.role_id}", "FAIL: unfilled")
                )
                return (
                    self._finish(
                        trace,
                        deny(
                            DenyCode.WORKFLOW_POLICY_DENIED,
                            f"role {role.role_id!r} is not filled by any presented credential",
                        ),
                    ),
                    None,
                )
            assignments[role.role_id] = filled.digest()
            trace.append(
                TraceEntry("workflow", f"role {role.role_id}", f"PASS: {filled.subject_id}")
            )

        effective: list[Constraint] = []
        for field in policy.shared_fields:
            group = [
                c
                for container in containers
                for c in (container.payload.constraints or ())
                if not isinstance(c, UnknownConstraint) and c.field == field
            ]
            effective.extend(group)
            conflict = _joint_conflict(field, group)
            if conflict is not None:
                trace.append(TraceEntry("workflow", f"shared field {field}", f"FAIL: {conflict}"))
                return (
                    self._finish(
                        trace, deny(DenyCode.WORKFLOW_POLICY_DENIED, f"{field}: {conflict}")
                    ),
                    None,
                )
            trace.append(TraceEntry("workflow", f"shared field {field}", "PASS"))

        notes.workflow = {
            "workflow_id": policy.workflow_id,
            "assignments": dict(assignments),
            "shared_fields": list(policy.shared_fields),
        }
        trace.append(TraceEntry("decision", "decision", "ALLOW"))
        return (
            allow(trace),
            WorkflowComposition(
                workflow_id=policy.workflow_id,
                assignments=assignments,
                effective_constraints=tuple(effective),
            ),
        )

    # -- audit -------------------------------------------------------------------

    def _finish(self, trace: list[TraceEntry], decision: Decision) -> Decision:
        """Attach the trace (plus the closing decision entry) to a denial."""
        if decision.outcome != ALLOW and (not trace or trace[-1].stage != "decision"):
            assert decision.reason is not None
            trace.append(
                TraceEntry("decision", "decision", f"DENY: {decision.reason.code.value}")
            )
        return Decision(
            outcome=decision.outcome,
            reason=decision.reason,
            trace=tuple(trace),
            failed_constraint=decision.failed_constraint,
        )

    def _record(
        self,
        operation: str,
        decision: Decision,
        context: Optional[RequestContext],
        presenter_id: Optional[str],
        now: datetime,
        notes: _Notes,
    ) -> Decision:
        cfg = self.config
        leaf = notes.containers[-1] if notes.containers else None
        governance = {
            "tier": cfg.tier,
            "profile_id": cfg.profile_id,
            "mapping_profile": cfg.mapping_profile.digest() if cfg.mapping_profile else None,
            "registries": [
                {"registry_id": r.registry_id, "version": r.version, "digest": r.digest()}
                for r in cfg.registries
            ],
            "manifest_digest": cfg.manifest_digest,
            "trust_anchor": cfg.trusted_issuers.get(leaf.issuer_id) if leaf else None,
            "local_policy": cfg.local_policy.policy_id if cfg.local_policy else None,
        }
        try:
            cfg.audit_log.append(
                operation=operation,
                timestamp=now,
                credential_digests=[c.digest() for c in notes.containers],
                presenter_id=presenter_id,
                subject_id=leaf.subject_id if leaf else None,
                issuer_id=leaf.issuer_id if leaf else None,
                action=context.action if context else None,
                resource=notes.resolved.get("core.resource_id"),
                context_snapshot=notes.resolved,
                constraint_results=notes.constraint_results,
                decision_outcome=decision.outcome,
                decision_code=decision.reason.code.value if decision.reason else None,
                decision_detail=decision.reason.detail if decision.reason else "",
                failed_constraint=decision.failed_constraint,
                governance=governance,
                workflow=notes.workflow,
            )
        except AuditError as exc:
            trace = list(decision.trace)
            trace.append(TraceEntry("decision", "audit", f"FAIL: {exc}"))
            return deny(
                DenyCode.LOCAL_POLICY_DENIED,
                f"audit append failed, refusing to decide without a record: {exc}",
                trace=trace,
            )
        return decision


def _joint_conflict(field: str, group: Sequence[Constraint]) -> Optional[str]:
    """A reason the conjunction of same-field constraints can never hold, or None.

    This is a conservative emptiness check per family; anything it cannot
    prove empty stays in force as a conjunction at evaluation time.
    """
    lows: list[tuple[Decimal, bool]] = []
    highs: list[tuple[Decimal, bool]] = []
    pins: list[Decimal] = []
    currencies: set[Optional[str]] = set()
    for c in group:
        if isinstance(c, NumericLimitConstraint):
            if c.currency is not None:
                currencies.add(c.currency)
            if c.operator == "eq":
                pins.append(c.value)
            elif c.operator == "lt":
                highs.append((c.value, False))
            elif c.operator == "lte":
                highs.append((c.value, True))
            elif c.operator == "gt":
                lows.append((c.value, False))
            elif c.operator == "gte":
                lows.append((c.value, True))
    if len(currencies) > 1:
        return f"limits pin different currencies {sorted(currencies)}"
    if len(set(pins)) > 1:
        return "equality limits pin different values"
    if pins:
        pin = pins[0]
        for bound, inclusive in highs:
            if pin > bound or (pin == bound and not inclusive):
                return "equality limit falls outside a joint bound"
        for bound, inclusive in lows:
            if pin < bound or (pin == bound and not inclusive):
                return "equality limit falls outside a joint bound"
    if lows and highs:
        low, low_inc = max(lows, key=lambda b: (b[0], b[1]))
        high, high_inc = min(highs, key=lambda b: (b[0], -b[1]))
        if low > high or (low == high and not (low_inc and high_inc)):
            return "joint numeric bounds admit no value"

    froms = [c.valid_from for c in group if isinstance(c, TemporalWindowConstraint)]
    untils = [c.valid_until for c in group if isinstance(c, TemporalWindowConstraint)]
    if froms and untils and max(froms) > min(untils):
        return "joint temporal windows do not overlap"
    day_sets = [
        frozenset(c.allowed_days)
        for c in group
        if isinstance(c, TemporalWindowConstraint) and c.allowed_days is not None
    ]
    timezones = {
        c.timezone for c in group if isinstance(c, TemporalWindowConstraint) and c.allowed_days
    }
    if day_sets and len(timezones) <= 1:
        joint = frozenset.intersection(*day_sets)
        if not joint:
            return "joint day gates admit no weekday"

    alloweds = [
        frozenset(c.allowed)
        for c in group
        if isinstance(c, EnumeratedListConstraint) and c.allowed is not None
    ]
    denieds = [
        frozenset(c.denied)
        for c in group
        if isinstance(c, EnumeratedListConstraint) and c.denied is not None
    ]
    if alloweds:
        joint_allowed = frozenset.intersection(*alloweds)
        joint_denied = frozenset.union(*denieds) if denieds else frozenset()
        if not joint_allowed - joint_denied:
            return "joint enumerations admit no value"
    return None
