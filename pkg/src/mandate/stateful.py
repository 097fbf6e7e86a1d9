"""Stateful cumulative governance: budgets that survive across evaluations.

A cumulative limit cannot be decided from one request; something must keep
the running total.  Three postures are supported, weakest to strongest:

- stateless: the receiver keeps no state, so cumulative constraints deny as
  unreachable; the constraint is honored by refusing what cannot be enforced.
- epoch_bound: each enforcer spends only a pre-allocated slice of the budget
  per epoch, bounding global overshoot without coordination.
- synchronous: every spend is a linearizable reserve against the state
  authority named by the constraint, either directly or via signed vouchers
  the presenter carries from the authority.

Every check here fails toward denial, and the budget boundary is inclusive:
"no more than N in aggregate" admits totals equal to N.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Sequence, Union

from .canonical import canonical_dumps, sha256_hex
from .constraints import CumulativeLimitConstraint, Period
from .keys import SigningKey, attach_signature, check_signature
from .model import (
    NUMERIC_KINDS,
    DenialReason,
    DenyCode,
    TypedValue,
    parse_timestamp,
    render_timestamp,
)

DEFAULT_FRESHNESS = timedelta(seconds=300)
VOUCHER_GENESIS = sha256_hex(b"state-voucher-genesis")
_EPOCH_ORIGIN = datetime(1970, 1, 1, tzinfo=timezone.utc)


class OverBudgetError(RuntimeError):
    pass


class StateUnreachableError(RuntimeError):
    pass


class StateAuthority(Protocol):
    def reserve(self, key: str, amount: Decimal, budget: Decimal, period: Period, now: datetime) -> Decimal:
        """Atomically add ``amount`` to the running total for ``key`` if the
        result stays within ``budget`` (inclusive); return the new total.
        Raises OverBudgetError or StateUnreachableError."""
        ...


def _window_key(period: Period, now: datetime) -> str:
    if period.kind == "per_credential":
        return "all"
    if period.kind == "calendar":
        local = now.astimezone(timezone.utc)
        if period.calendar_unit == "day":
            return local.strftime("%Y-%m-%d")
        if period.calendar_unit == "week":
            year, week, _ = local.isocalendar()
            return f"{year}-W{week:02d}"
        return local.strftime("%Y-%m")
    raise ValueError("rolling periods are accounted by pruning, not window keys")


class InMemoryStateAuthority:
    """Linearizable in-process reserve ledger: one lock, check then commit."""

    def __init__(self, authority_id: str) -> None:
        self.authority_id = authority_id
        self._lock = threading.Lock()
        self._totals: dict[tuple[str, str], Decimal] = {}
        self._events: dict[str, list[tuple[datetime, Decimal]]] = {}

    def reserve(self, key: str, amount: Decimal, budget: Decimal, period: Period, now: datetime) -> Decimal:
        with self._lock:
            if period.kind == "rolling":
                window = timedelta(seconds=period.duration_seconds or 0)
                events = [e for e in self._events.get(key, []) if now - e[0] <= window]
                spent = sum((e[1] for e in events), Decimal(0))
                if spent + amount > budget:
                    raise OverBudgetError(
                        f"{format(spent + amount, 'f')} would exceed budget {format(budget, 'f')}"
                    )
                events.append((now, amount))
                self._events[key] = events
                return spent + amount
            bucket = (key, _window_key(period, now))
            spent = self._totals.get(bucket, Decimal(0))
            if spent + amount > budget:
                raise OverBudgetError(
                    f"{format(spent + amount, 'f')} would exceed budget {format(budget, 'f')}"
                )
            self._totals[bucket] = spent + amount
            return spent + amount

    def record(self, key: str, amount: Decimal, period: Period, now: datetime) -> None:
        """Add history without enforcing a budget: ledger replay and fixtures."""
        with self._lock:
            if period.kind == "rolling":
                self._events.setdefault(key, []).append((now, amount))
                return
            bucket = (key, _window_key(period, now))
            self._totals[bucket] = self._totals.get(bucket, Decimal(0)) + amount

    def spent(self, key: str, period: Period, now: datetime) -> Decimal:
        with self._lock:
            if period.kind == "rolling":
                window = timedelta(seconds=period.duration_seconds or 0)
                return sum(
                    (e[1] for e in self._events.get(key, []) if now - e[0] <= window), Decimal(0)
                )
            return self._totals.get((key, _window_key(period, now)), Decimal(0))


class FileStateAuthority:
    """Reserve ledger persisted as canonical append-only lines.

    Reservations are replayed at load, so restarts keep their running totals;
    the in-memory core still serializes all reserve calls.
    """

    def __init__(self, authority_id: str, path: Union[str, Path]) -> None:
        self.authority_id = authority_id
        self.path = Path(path)
        self._core = InMemoryStateAuthority(authority_id)
        self._io_lock = threading.Lock()
        if self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                self._core.record(
                    key=row["key"],
                    amount=Decimal(row["amount"]),
                    period=Period.from_dict(row["period"]),
                    now=parse_timestamp(row["timestamp"]),
                )

    def reserve(self, key: str, amount: Decimal, budget: Decimal, period: Period, now: datetime) -> Decimal:
        with self._io_lock:
            total = self._core.reserve(key, amount, budget, period, now)
            row = {
                "key": key,
                "amount": format(amount, "f"),
                "period": period.to_dict(),
                "timestamp": render_timestamp(now),
            }
            try:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(canonical_dumps(row) + "\n")
                    handle.flush()
            except OSError as exc:
                raise StateUnreachableError(f"state ledger not writable: {exc}") from exc
            return total


class UnreachableStateAuthority:
    """Test double for a partitioned or down authority."""

    def __init__(self, authority_id: str = "unreachable") -> None:
        self.authority_id = authority_id

    def reserve(self, key: str, amount: Decimal, budget: Decimal, period: Period, now: datetime) -> Decimal:
        raise StateUnreachableError("state authority is unreachable")


# --- epoch-bound quotas -------------------------------------------------------

@dataclass(frozen=True)
class EpochQuota:
    enforcer_id: str
    allocation: Decimal
    epoch_length_seconds: int


@dataclass(frozen=True)
class EpochAllocation:
    quotas: tuple[EpochQuota, ...]
    max_concurrent_exposure: Decimal  # worst case if every enforcer spends its slice before sync

    def quota_for(self, enforcer_id: str) -> Optional[EpochQuota]:
        for quota in self.quotas:
            if quota.enforcer_id == enforcer_id:
                return quota
        return None


def allocate_epoch_quotas(
    budget: Decimal,
    enforcer_ids: Sequence[str],
    epoch_length_seconds: int,
) -> EpochAllocation:
    """Split a budget into per-enforcer epoch slices, largest remainder first.

    The split is exact at the budget's own granularity: a budget of 100 over
    three enforcers yields 34, 33, 33 and sums back to 100.
    """
    if not enforcer_ids:
        raise ValueError("at least one enforcer required")
    if epoch_length_seconds <= 0:
        raise ValueError("epoch length must be positive")
    exponent = budget.as_tuple().exponent
    quantum = Decimal(1).scaleb(exponent if isinstance(exponent, int) else 0)
    total_quanta = int(budget / quantum)
    n = len(enforcer_ids)
    base, leftover = divmod(total_quanta, n)
    quotas = []
    for i, enforcer_id in enumerate(enforcer_ids):
        quanta = base + (1 if i < leftover else 0)
        quotas.append(
            EpochQuota(
                enforcer_id=enforcer_id,
                allocation=quantum * quanta,
                epoch_length_seconds=epoch_length_seconds,
            )
        )
    allocated = sum((q.allocation for q in quotas), Decimal(0))
    assert allocated == budget, "epoch allocation must be exact"
    return EpochAllocation(quotas=tuple(quotas), max_concurrent_exposure=allocated)


class EpochLedger:
    """One enforcer's local spend within its current epoch slice."""

    def __init__(self, quota: EpochQuota, origin: datetime = _EPOCH_ORIGIN) -> None:
        self.quota = quota
        self._origin = origin
        self._lock = threading.Lock()
        self._epoch_index: Optional[int] = None
        self._spent = Decimal(0)

    def reserve(self, amount: Decimal, now: datetime) -> Decimal:
        index = int((now - self._origin).total_seconds()) // self.quota.epoch_length_seconds
        with self._lock:
            if index != self._epoch_index:
                self._epoch_index = index
                self._spent = Decimal(0)
            if self._spent + amount > self.quota.allocation:
                raise OverBudgetError(
                    f"epoch slice {format(self.quota.allocation, 'f')} exhausted for "
                    f"{self.quota.enforcer_id}"
                )
            self._spent += amount
            return self._spent


# --- state vouchers -----------------------------------------------------------

@dataclass(frozen=True)
class StateVoucher:
    """A signed attestation of one credential's running total at a point in time."""

    authority_id: str
    credential_digest: str
    sequence: int
    spent: Decimal
    remaining: Decimal
    observed_at: datetime
    prev_signature: str
    raw: dict

    @property
    def signature_value(self) -> str:
        envelope = self.raw.get("signature")
        return envelope.get("value", "") if isinstance(envelope, dict) else ""

    def link_digest(self) -> str:
        """What the next voucher's prev_signature must equal."""
        return sha256_hex(self.signature_value)

    def to_dict(self) -> dict:
        return dict(self.raw)

    @staticmethod
    def from_dict(obj: dict) -> "StateVoucher":
        if not isinstance(obj, dict) or obj.get("kind") != "state_voucher":
            raise ValueError("not a state voucher")
        return StateVoucher(
            authority_id=str(obj["authority_id"]),
            credential_digest=str(obj["credential_digest"]),
            sequence=int(obj["sequence"]),
            spent=Decimal(str(obj["spent"])),
            remaining=Decimal(str(obj["remaining"])),
            observed_at=parse_timestamp(obj["observed_at"]),
            prev_signature=str(obj["prev_signature"]),
            raw=obj,
        )


def make_voucher(
    credential_digest: str,
    budget: Decimal,
    authority_id: str,
    authority_key: SigningKey,
    now: datetime,
) -> StateVoucher:
    body = {
        "kind": "state_voucher",
        "authority_id": authority_id,
        "credential_digest": credential_digest,
        "sequence": 1,
        "spent": "0",
        "remaining": format(budget, "f"),
        "observed_at": render_timestamp(now),
        "prev_signature": VOUCHER_GENESIS,
    }
    return StateVoucher.from_dict(attach_signature(body, authority_key))


def update_voucher(
    previous: StateVoucher,
    amount: Decimal,
    authority_key: SigningKey,
    now: datetime,
) -> StateVoucher:
    if amount < 0:
        raise ValueError("voucher updates never refund")
    if amount > previous.remaining:
        raise OverBudgetError(
            f"{format(amount, 'f')} exceeds remaining {format(previous.remaining, 'f')}"
        )
    body = {
        "kind": "state_voucher",
        "authority_id": previous.authority_id,
        "credential_digest": previous.credential_digest,
        "sequence": previous.sequence + 1,
        "spent": format(previous.spent + amount, "f"),
        "remaining": format(previous.remaining - amount, "f"),
        "observed_at": render_timestamp(now),
        "prev_signature": previous.link_digest(),
    }
    return StateVoucher.from_dict(attach_signature(body, authority_key))


class VoucherMemory:
    """Highest terminal sequence ever accepted per credential: rollback protection."""

    def __init__(self) -> None:
        self._highest: dict[str, int] = {}
        self._lock = threading.Lock()

    def check_and_advance(self, credential_digest: str, terminal_sequence: int) -> bool:
        with self._lock:
            best = self._highest.get(credential_digest, 0)
            if terminal_sequence <= best:
                return False
            self._highest[credential_digest] = terminal_sequence
            return True


def verify_voucher_chain(
    vouchers: Sequence[StateVoucher],
    constraint: CumulativeLimitConstraint,
    *,
    authority_keys: Mapping[str, str],
    now: datetime,
    freshness: timedelta = DEFAULT_FRESHNESS,
    memory: Optional[VoucherMemory] = None,
    credential_digest: Optional[str] = None,
) -> tuple[Optional[StateVoucher], Optional[DenialReason]]:
    """Validate a presented voucher chain and return its terminal voucher.

    Checks, in order: the chain is non-empty and names the constraint's
    authority throughout; every signature verifies against that authority's
    key; linkage digests connect the presented links; sequences strictly
    increase, and the terminal sequence advances past anything previously
    accepted for this credential; the newest attestation is no older than the
    freshness bound (age exactly equal is accepted); and the attested
    arithmetic is consistent (spent never decreases, spent + remaining always
    equals the constraint budget).  Content inconsistencies read as
    state_signature_invalid: a correctly signed voucher that does not add up
    is still not a trustworthy attestation.
    """
    if not vouchers:
        return None, DenialReason(
            DenyCode.STATE_AUTHORITY_UNREACHABLE, "no state attestation presented"
        )
    pointer = constraint.state_authority_pointer
    for voucher in vouchers:
        if voucher.authority_id != pointer:
            return None, DenialReason(
                DenyCode.STATE_SIGNATURE_INVALID,
                f"voucher names authority {voucher.authority_id!r}, constraint pins {pointer!r}",
            )
    public_hex = authority_keys.get(pointer)
    if public_hex is None:
        return None, DenialReason(
            DenyCode.STATE_SIGNATURE_INVALID, f"no key held for state authority {pointer!r}"
        )
    for voucher in vouchers:
        if not check_signature(voucher.raw, public_hex):
            return None, DenialReason(
                DenyCode.STATE_SIGNATURE_INVALID, f"voucher {voucher.sequence} signature does not verify"
            )
        if credential_digest is not None and voucher.credential_digest != credential_digest:
            return None, DenialReason(
                DenyCode.STATE_SIGNATURE_INVALID,
                f"voucher {voucher.sequence} attests a different credential",
            )
    for prev, current in zip(vouchers, vouchers[1:]):
        if current.prev_signature != prev.link_digest():
            return None, DenialReason(
                DenyCode.STATE_SEQUENCE_INVALID,
                f"voucher {current.sequence} does not link to voucher {prev.sequence}",
            )
    if vouchers[0].sequence == 1 and vouchers[0].prev_signature != VOUCHER_GENESIS:
        return None, DenialReason(
            DenyCode.STATE_SEQUENCE_INVALID, "first voucher does not anchor at the genesis digest"
        )
    sequences = [v.sequence for v in vouchers]
    if any(b <= a for a, b in zip(sequences, sequences[1:])) or sequences[0] < 1:
        return None, DenialReason(
            DenyCode.STATE_SEQUENCE_INVALID, "voucher sequence numbers must strictly increase"
        )
    terminal = vouchers[-1]
    if memory is not None and credential_digest is not None:
        if not memory.check_and_advance(credential_digest, terminal.sequence):
            return None, DenialReason(
                DenyCode.STATE_SEQUENCE_INVALID,
                f"sequence {terminal.sequence} was already consumed; replay or rollback",
            )
    age = now - terminal.observed_at
    if age > freshness:
        return None, DenialReason(
            DenyCode.STATE_STALE,
            f"newest attestation is {int(age.total_seconds())}s old, freshness bound is "
            f"{int(freshness.total_seconds())}s",
        )
    budget = constraint.budget
    previous_spent = None
    for voucher in vouchers:
        if voucher.spent < 0 or voucher.remaining < 0 or voucher.spent + voucher.remaining != budget:
            return None, DenialReason(
                DenyCode.STATE_SIGNATURE_INVALID,
                f"voucher {voucher.sequence} arithmetic does not reconcile with the budget",
            )
        if previous_spent is not None and voucher.spent < previous_spent:
            return None, DenialReason(
                DenyCode.STATE_SIGNATURE_INVALID,
                f"attested spend decreases at voucher {voucher.sequence}",
            )
        previous_spent = voucher.spent
    return terminal, None


# --- cumulative evaluation ------------------------------------------------------

TIER_STATELESS = "stateless"
TIER_EPOCH_BOUND = "epoch_bound"
TIER_SYNCHRONOUS = "synchronous"
TIERS = (TIER_STATELESS, TIER_EPOCH_BOUND, TIER_SYNCHRONOUS)


def evaluate_cumulative(
    constraint: CumulativeLimitConstraint,
    amount: TypedValue,
    credential_digest: str,
    *,
    tier: str,
    registries: Sequence,
    profile_id: str,
    now: datetime,
    context_currency: Optional[str] = None,
    state_clients: Optional[Mapping[str, StateAuthority]] = None,
    epoch_ledger: Optional[EpochLedger] = None,
    vouchers: Optional[Sequence[StateVoucher]] = None,
    authority_keys: Optional[Mapping[str, str]] = None,
    voucher_memory: Optional[VoucherMemory] = None,
    freshness: timedelta = DEFAULT_FRESHNESS,
) -> Optional[DenialReason]:
    """Enforce one cumulative limit under the configured tier; None means pass.

    The state authority pointer must be permitted by an accepted in-window
    registry regardless of tier: the pointer is the anti-spoofing anchor, and
    an unvouched ledger must not count spending.
    """
    if constraint.currency is not None and context_currency != constraint.currency:
        return DenialReason(
            DenyCode.CONSTRAINT_FAILED,
            f"cumulative limit is in {constraint.currency}, context currency is "
            f"{context_currency or '(absent)'}",
        )
    if amount.kind not in NUMERIC_KINDS:
        return DenialReason(
            DenyCode.CONSTRAINT_FAILED, f"field {constraint.field} is {amount.kind.value}, not numeric"
        )
    spend = amount.as_decimal()
    if spend < 0:
        return DenialReason(DenyCode.CONSTRAINT_FAILED, "negative amounts cannot be reserved")
    pointer = constraint.state_authority_pointer
    permitted = any(
        r.in_window(now) and r.permits_state_authority(pointer, profile_id) for r in registries
    )
    if not permitted:
        return DenialReason(
            DenyCode.STATE_AUTHORITY_UNPERMITTED,
            f"no accepted registry permits state authority {pointer!r}",
        )
    if tier == TIER_STATELESS:
        return DenialReason(
            DenyCode.STATE_AUTHORITY_UNREACHABLE,
            "stateless tier keeps no running totals; cumulative limits cannot be enforced",
        )
    if tier == TIER_EPOCH_BOUND:
        if epoch_ledger is None:
            return DenialReason(
                DenyCode.STATE_AUTHORITY_UNREACHABLE, "no epoch quota allocated to this enforcer"
            )
        try:
            epoch_ledger.reserve(spend, now)
            return None
        except OverBudgetError as exc:
            return DenialReason(DenyCode.STATE_LIMIT_EXCEEDED, str(exc))
    if tier != TIER_SYNCHRONOUS:
        return DenialReason(DenyCode.STATE_AUTHORITY_UNREACHABLE, f"unknown tier {tier!r}")
    client = (state_clients or {}).get(pointer)
    if client is not None:
        try:
            client.reserve(credential_digest, spend, constraint.budget, constraint.period, now)
            return None
        except OverBudgetError as exc:
            return DenialReason(DenyCode.STATE_LIMIT_EXCEEDED, str(exc))
        except StateUnreachableError as exc:
            return DenialReason(DenyCode.STATE_AUTHORITY_UNREACHABLE, str(exc))
    if vouchers:
        terminal, problem = verify_voucher_chain(
            list(vouchers),
            constraint,
            authority_keys=authority_keys or {},
            now=now,
            freshness=freshness,
            memory=voucher_memory,
            credential_digest=credential_digest,
        )
        if problem is not None:
            return problem
        assert terminal is not None
        if spend > terminal.remaining:
            return DenialReason(
                DenyCode.STATE_LIMIT_EXCEEDED,
                f"{format(spend, 'f')} exceeds attested remaining {format(terminal.remaining, 'f')}",
            )
        return None
    return DenialReason(
        DenyCode.STATE_AUTHORITY_UNREACHABLE,
        f"no reserve channel to state authority {pointer!r} and no vouchers presented",
    )
