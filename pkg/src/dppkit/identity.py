"""Identifiers, key material, and deterministic serialization.

Everything here is a pure value: DIDs, Ed25519 key pairs, DID documents,
GTIN product identifiers, and the canonical byte encoding that signatures
and registry records are computed over.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import ValidationError

DEFAULT_DID_METHOD = "dppkit"

# Capability name usable in DID document delegations. It permits hash
# anchoring only; controller or key changes are never delegable.
CAP_ANCHOR_EVENT = "anchor-event"

# Base58btc alphabet (Bitcoin alphabet).
_BASE58_ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


def base58_encode(data: bytes) -> str:
    """Encode bytes as a base58btc string."""
    num = int.from_bytes(data, "big")
    out = []
    while num > 0:
        num, rem = divmod(num, 58)
        out.append(_BASE58_ALPHABET[rem])
    for byte in data:
        if byte == 0:
            out.append(_BASE58_ALPHABET[0])
        else:
            break
    return "".join(reversed(out))


def sha256_digest(data: bytes) -> bytes:
    """256-bit digest used everywhere the package needs a hash."""
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

_SCALARS = (str, int, float, bool, type(None))


def _check_tree(value: Any, stack: list[int]) -> None:
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValidationError("non-finite floats cannot be canonicalized")
        return
    if isinstance(value, Mapping):
        if id(value) in stack:
            raise ValidationError("cyclic document cannot be canonicalized")
        stack.append(id(value))
        for key, item in value.items():
            if not isinstance(key, str):
                raise ValidationError(f"map keys must be strings, got {type(key).__name__}")
            _check_tree(item, stack)
        stack.pop()
        return
    if isinstance(value, (list, tuple)):
        if id(value) in stack:
            raise ValidationError("cyclic document cannot be canonicalized")
        stack.append(id(value))
        for item in value:
            _check_tree(item, stack)
        stack.pop()
        return
    raise ValidationError(f"unsupported scalar kind: {type(value).__name__}")


def canonicalize(value: Any) -> bytes:
    """Deterministic UTF-8 encoding of a document tree.

    Map keys are emitted in lexicographic order with minimal whitespace, so
    the same logical value always yields identical bytes. Rejects NaN and
    infinite floats, cycles, non-string keys, and unsupported scalar kinds.
    """
    _check_tree(value, [])
    text = json.dumps(
        value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )
    return text.encode("utf-8")


# ---------------------------------------------------------------------------
# Key material
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyPair:
    """A deterministic Ed25519 signing key pair.

    ``public_key`` is the raw 32-byte verification key; signing the same
    message with the same key always produces the same 64-byte signature.
    """

    public_key: bytes
    key_id: str
    _private: Ed25519PrivateKey = field(repr=False, compare=False)

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)

    @property
    def public_hex(self) -> str:
        return self.public_key.hex()

    def private_bytes(self) -> bytes:
        """Raw 32-byte seed, used only by wallet persistence."""
        return self._private.private_bytes_raw()


def generate_key_pair(seed: bytes, key_id: str = "key-1") -> KeyPair:
    """Derive a key pair from 32 bytes of entropy.

    The same seed always yields the same pair; distinct seeds yield distinct
    public keys up to negligible collision probability.
    """
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != 32:
        raise ValidationError("seed must be exactly 32 bytes")
    private = Ed25519PrivateKey.from_private_bytes(bytes(seed))
    public = private.public_key().public_bytes_raw()
    return KeyPair(public_key=public, key_id=key_id, _private=private)


def verify_signature(message: bytes, signature: bytes, public_key: bytes) -> bool:
    """Check an Ed25519 signature; returns False on any failure."""
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


# ---------------------------------------------------------------------------
# DIDs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Did:
    """A decentralised identifier, rendered as ``did:<method>:<id>``."""

    method: str
    method_specific_id: str

    def __post_init__(self) -> None:
        if not self.method or not self.method.isascii() or not self.method.islower():
            raise ValidationError(f"invalid DID method: {self.method!r}")
        msid = self.method_specific_id
        if not msid or ":" in msid or any(c.isspace() for c in msid):
            raise ValidationError(f"invalid method-specific id: {msid!r}")

    def __str__(self) -> str:
        return f"did:{self.method}:{self.method_specific_id}"

    @classmethod
    def parse(cls, text: str) -> "Did":
        parts = text.split(":")
        if len(parts) != 3 or parts[0] != "did":
            raise ValidationError(f"a DID has exactly three colon-separated parts: {text!r}")
        return cls(method=parts[1], method_specific_id=parts[2])


def derive_did(public_key: bytes, method: str = DEFAULT_DID_METHOD) -> Did:
    """Derive a DID from a verification key.

    The method-specific id is the base58 encoding of the SHA-256 digest of
    the raw public key, making identifiers self-certifying.
    """
    if len(public_key) != 32:
        raise ValidationError("public key must be 32 bytes")
    return Did(method=method, method_specific_id=base58_encode(sha256_digest(public_key)))


# ---------------------------------------------------------------------------
# Product identifiers
# ---------------------------------------------------------------------------


def gtin_check_digit(payload: str) -> int:
    """Mod-10 weighted check digit over the payload digits.

    Weights alternate 3, 1, 3, ... starting from the digit adjacent to the
    check digit position.
    """
    total = 0
    weight = 3
    for ch in reversed(payload):
        total += weight * int(ch)
        weight = 4 - weight
    return (10 - total % 10) % 10


def validate_gtin(digits: str) -> bool:
    """True iff the final digit matches the mod-10 weighted check digit.

    Only GTIN-13 and GTIN-14 are supported; a wrong length or a non-numeric
    string is a usage error, distinct from a failed check.
    """
    if not isinstance(digits, str) or len(digits) not in (13, 14):
        raise ValidationError("GTIN must be a string of 13 or 14 digits")
    if not digits.isdigit():
        raise ValidationError("GTIN must be numeric")
    return gtin_check_digit(digits[:-1]) == int(digits[-1])


@dataclass(frozen=True, order=True)
class Gtin:
    """A GTIN-13 or GTIN-14 with a verified check digit."""

    digits: str

    def __post_init__(self) -> None:
        if not validate_gtin(self.digits):
            raise ValidationError(f"GTIN check digit mismatch: {self.digits}")

    def __str__(self) -> str:
        return self.digits


@dataclass(frozen=True, order=True)
class ProductRef:
    """A product identified by GTIN, optionally pinned to one item by serial.

    A serial is present exactly when the context is item granularity; model
    and batch passports identify the whole reference.
    """

    gtin: Gtin
    serial: Optional[str] = None

    def key(self) -> str:
        return f"{self.gtin.digits}:{self.serial}" if self.serial else self.gtin.digits

    def to_dict(self) -> dict:
        body: dict[str, Any] = {"kind": "product", "gtin": self.gtin.digits}
        if self.serial is not None:
            body["serial"] = self.serial
        return body

    @classmethod
    def from_dict(cls, body: Mapping[str, Any]) -> "ProductRef":
        return cls(gtin=Gtin(body["gtin"]), serial=body.get("serial"))


# ---------------------------------------------------------------------------
# DID documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DidDocument:
    """Registry-stored record of a DID's controller, keys, and metadata.

    ``attributes`` carries passport data for document-based passports:
    granularity, serial, composition claims, and component references.
    ``version_id`` increases strictly across updates of the same id, and a
    deactivated document accepts no further updates.
    """

    id: Did
    controller: Did
    verification_methods: tuple[tuple[str, str], ...] = ()  # (key id, public key hex)
    delegations: tuple[tuple[str, str], ...] = ()  # (delegate DID, capability)
    services: tuple[tuple[str, str], ...] = ()  # (name, endpoint reference)
    also_known_as: Optional[str] = None  # GTIN digits
    attributes: Mapping[str, Any] = field(default_factory=dict)
    version_id: int = 1
    deactivated: bool = False

    def __post_init__(self) -> None:
        if self.version_id < 1:
            raise ValidationError("version_id starts at 1")
        if self.also_known_as is not None and not validate_gtin(self.also_known_as):
            raise ValidationError(f"alsoKnownAs is not a valid GTIN: {self.also_known_as}")

    def key_hexes(self) -> set[str]:
        return {pub for _, pub in self.verification_methods}

    def find_key(self, key_id: str) -> Optional[str]:
        for kid, pub in self.verification_methods:
            if kid == key_id:
                return pub
        return None

    def has_delegation(self, delegate: Did, capability: str) -> bool:
        return (str(delegate), capability) in self.delegations

    def next_version(self, **changes: Any) -> "DidDocument":
        """A copy with the given fields replaced and the version bumped."""
        return replace(self, version_id=self.version_id + 1, **changes)

    def to_dict(self) -> dict:
        body: dict[str, Any] = {
            "id": str(self.id),
            "controller": str(self.controller),
            "verificationMethod": [[kid, pub] for kid, pub in self.verification_methods],
            "delegations": [[did, cap] for did, cap in self.delegations],
            "services": [[name, ref] for name, ref in self.services],
            "attributes": dict(self.attributes),
            "versionId": self.version_id,
            "deactivated": self.deactivated,
        }
        if self.also_known_as is not None:
            body["alsoKnownAs"] = self.also_known_as
        return body

    @classmethod
    def from_dict(cls, body: Mapping[str, Any]) -> "DidDocument":
        return cls(
            id=Did.parse(body["id"]),
            controller=Did.parse(body["controller"]),
            verification_methods=tuple((k, p) for k, p in body.get("verificationMethod", [])),
            delegations=tuple((d, c) for d, c in body.get("delegations", [])),
            services=tuple((n, r) for n, r in body.get("services", [])),
            also_known_as=body.get("alsoKnownAs"),
            attributes=dict(body.get("attributes", {})),
            version_id=body["versionId"],
            deactivated=body.get("deactivated", False),
        )


def new_document(
    did: Did,
    controller: Did,
    keys: Sequence[KeyPair] = (),
    *,
    also_known_as: Optional[str] = None,
    attributes: Optional[Mapping[str, Any]] = None,
    services: Sequence[tuple[str, str]] = (),
) -> DidDocument:
    """Build a fresh version-1 document."""
    return DidDocument(
        id=did,
        controller=controller,
        verification_methods=tuple((k.key_id, k.public_hex) for k in keys),
        services=tuple(services),
        also_known_as=also_known_as,
        attributes=dict(attributes or {}),
    )
