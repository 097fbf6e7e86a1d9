"""Key material and the signature suite.

One modern deterministic signature algorithm, fixed by a one-byte suite
identifier carried in every envelope.  Suite 1 is Ed25519 over the canonical
bytes of the signed object with only the signature's proof value excluded;
the envelope's suite and key_id are themselves signed.  Unknown suites must
never verify.

Key distribution is deliberately simple: local key files for private keys and
a trusted-issuer file mapping issuer identity to public key.  The same
primitive stands in for bilateral exchange, registry-published keys, and
federation roots; the trust decision lives in which file the receiver loads.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import canonical_dumps, signing_bytes

SUITE_ED25519 = 1


class KeyError_(ValueError):
    """Raised for malformed key files or unsupported suites."""


@dataclass(frozen=True)
class SigningKey:
    """An Ed25519 private key plus its identity metadata."""

    key_id: str
    private_bytes: bytes

    @property
    def public_hex(self) -> str:
        return self._private().public_key().public_bytes_raw().hex()

    def _private(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.private_bytes)

    def sign(self, data: bytes) -> bytes:
        return self._private().sign(data)

    def to_dict(self) -> dict:
        return {
            "kind": "private_key",
            "suite": SUITE_ED25519,
            "key_id": self.key_id,
            "public_key": self.public_hex,
            "private_key": self.private_bytes.hex(),
        }

    def dumps(self) -> str:
        return canonical_dumps(self.to_dict())


def generate_key(key_id: str, seed: bytes | str | None = None) -> SigningKey:
    """Fresh key, or a deterministic one when a seed is given (fixtures, vectors)."""
    if seed is None:
        raw = secrets.token_bytes(32)
    else:
        if isinstance(seed, str):
            seed = seed.encode("utf-8")
        raw = hashlib.sha256(seed).digest()
    return SigningKey(key_id=key_id, private_bytes=raw)


def load_signing_key(obj: dict) -> SigningKey:
    if not isinstance(obj, dict) or obj.get("kind") != "private_key":
        raise KeyError_("not a private key file")
    if obj.get("suite") != SUITE_ED25519:
        raise KeyError_(f"unsupported signature suite {obj.get('suite')!r}")
    try:
        raw = bytes.fromhex(obj["private_key"])
        key = SigningKey(key_id=str(obj["key_id"]), private_bytes=raw)
    except (KeyError, ValueError) as exc:
        raise KeyError_(f"malformed private key file: {exc}") from exc
    if len(raw) != 32:
        raise KeyError_("Ed25519 private keys are 32 bytes")
    declared = obj.get("public_key")
    if declared is not None and declared != key.public_hex:
        raise KeyError_("public_key does not match private_key")
    return key


def verify_raw(public_hex: str, signature_hex: str, data: bytes, suite: int = SUITE_ED25519) -> bool:
    """True iff the signature verifies. Unknown suites and malformed material verify as False."""
    if suite != SUITE_ED25519:
        return False
    try:
        public = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_hex))
        public.verify(bytes.fromhex(signature_hex), data)
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def attach_signature(obj: dict, key: SigningKey) -> dict:
    """Return ``obj`` with a detached signature over its canonical bytes.

    The envelope's suite and key_id are placed before signing so they are
    covered by the signature; only the proof value stands outside it.
    """
    body = dict(obj)
    body["signature"] = {"suite": SUITE_ED25519, "key_id": key.key_id}
    signature = key.sign(signing_bytes(body)).hex()
    body["signature"]["value"] = signature
    return body


def check_signature(obj: dict, public_hex: str) -> bool:
    """Verify the detached signature envelope on ``obj`` against one public key."""
    envelope = obj.get("signature")
    if not isinstance(envelope, dict):
        return False
    suite = envelope.get("suite")
    value = envelope.get("value")
    if not isinstance(value, str):
        return False
    try:
        data = signing_bytes(obj)
    except Exception:
        return False
    return verify_raw(public_hex, value, data, suite=suite if isinstance(suite, int) else -1)
