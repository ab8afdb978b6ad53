"""Verifiable credentials and presentations.

Covers issuance and the verification pipeline, bearer credentials, status
list revocation, and the transfer-credential chains that record ownership
handoffs for products identified only by GTIN and serial number.

All verification is report-based: failures become verdicts, never
exceptions, so a verifier can always see exactly which check failed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from .errors import AuthorizationError, NotFoundError, ProtocolError, ValidationError
from .identity import (
    Did,
    KeyPair,
    ProductRef,
    canonicalize,
    sha256_hex,
    verify_signature,
)
from .registry import Account, Ledger, LedgerTransaction

Subject = Union[Did, ProductRef, None]

CLAIM_KIND_COMPOSITION = "composition"
CLAIM_KIND_EVENT = "event"
CLAIM_KIND_TRANSFER = "transfer"

CATEGORY_OWNERSHIP = "ownership"


def _subject_to_dict(subject: Subject) -> Optional[dict]:
    if subject is None:
        return None
    if isinstance(subject, Did):
        return {"kind": "did", "did": str(subject)}
    return subject.to_dict()


def _subject_from_dict(body: Optional[Mapping[str, Any]]) -> Subject:
    if body is None:
        return None
    if body["kind"] == "did":
        return Did.parse(body["did"])
    return ProductRef.from_dict(body)


@dataclass(frozen=True)
class Proof:
    """Detached signature with a DID-URL key reference."""

    verification_method: str  # "did:...#key-id"
    created: int
    signature: bytes

    def to_dict(self) -> dict:
        return {
            "verificationMethod": self.verification_method,
            "created": self.created,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_dict(cls, body: Mapping[str, Any]) -> "Proof":
        return cls(
            verification_method=body["verificationMethod"],
            created=body["created"],
            signature=bytes.fromhex(body["signature"]),
        )


@dataclass(frozen=True)
class VerifiableCredential:
    """A signed, tamper-evident claim set about a subject.

    A credential with no subject is a bearer credential: valid for whoever
    presents it. The proof covers the canonical form of everything except
    the proof itself, including the credential id and status pointer.
    """

    id: str
    issuer: Did
    subject: Subject
    claims: Mapping[str, Any]
    issued_at: int
    expires_at: Optional[int] = None
    status: Optional[tuple[str, int]] = None  # (status list id, index)
    proof: Optional[Proof] = None

    def to_dict(self, include_proof: bool = True) -> dict:
        body: dict[str, Any] = {
            "id": self.id,
            "issuer": str(self.issuer),
            "subject": _subject_to_dict(self.subject),
            "claims": dict(self.claims),
            "issuedAt": self.issued_at,
        }
        if self.expires_at is not None:
            body["expiresAt"] = self.expires_at
        if self.status is not None:
            body["status"] = [self.status[0], self.status[1]]
        if include_proof and self.proof is not None:
            body["proof"] = self.proof.to_dict()
        return body

    @classmethod
    def from_dict(cls, body: Mapping[str, Any]) -> "VerifiableCredential":
        status = body.get("status")
        return cls(
            id=body["id"],
            issuer=Did.parse(body["issuer"]),
            subject=_subject_from_dict(body.get("subject")),
            claims=body["claims"],
            issued_at=body["issuedAt"],
            expires_at=body.get("expiresAt"),
            status=(status[0], status[1]) if status else None,
            proof=Proof.from_dict(body["proof"]) if "proof" in body else None,
        )

    def to_bytes(self) -> bytes:
        return canonicalize(self.to_dict())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "VerifiableCredential":
        import json

        return cls.from_dict(json.loads(raw))

    def digest(self) -> str:
        """The anchorable hash: digest of the canonical credential file."""
        return sha256_hex(self.to_bytes())

    def category(self) -> Optional[str]:
        return self.claims.get("category")


@dataclass(frozen=True)
class VerifiablePresentation:
    """Holder-signed envelope of credentials, bound to audience and nonce."""

    holder: Did
    credentials: tuple[VerifiableCredential, ...]
    audience: Did
    nonce: bytes
    proof: Proof

    def signed_body(self) -> dict:
        return {
            "holder": str(self.holder),
            "credentials": [vc.to_dict() for vc in self.credentials],
            "audience": str(self.audience),
            "nonce": self.nonce.hex(),
        }

    def to_dict(self) -> dict:
        body = self.signed_body()
        body["proof"] = self.proof.to_dict()
        return body

    @classmethod
    def from_dict(cls, body: Mapping[str, Any]) -> "VerifiablePresentation":
        return cls(
            holder=Did.parse(body["holder"]),
            credentials=tuple(
                VerifiableCredential.from_dict(c) for c in body["credentials"]
            ),
            audience=Did.parse(body["audience"]),
            nonce=bytes.fromhex(body["nonce"]),
            proof=Proof.from_dict(body["proof"]),
        )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    signature_valid: bool
    issuer_resolvable: bool
    not_expired: bool
    not_revoked: bool

    @property
    def valid(self) -> bool:
        return (
            self.signature_valid
            and self.issuer_resolvable
            and self.not_expired
            and self.not_revoked
        )

    def to_dict(self) -> dict:
        return {
            "signatureValid": self.signature_valid,
            "issuerResolvable": self.issuer_resolvable,
            "notExpired": self.not_expired,
            "notRevoked": self.not_revoked,
            "valid": self.valid,
        }


@dataclass(frozen=True)
class PresentationReport:
    holder_signature_valid: bool
    audience_match: bool
    nonce_match: bool
    subject_binding: bool
    credential_reports: tuple[VerificationReport, ...]

    @property
    def valid(self) -> bool:
        return (
            self.holder_signature_valid
            and self.audience_match
            and self.nonce_match
            and self.subject_binding
            and all(r.valid for r in self.credential_reports)
        )

    def to_dict(self) -> dict:
        return {
            "holderSignatureValid": self.holder_signature_valid,
            "audienceMatch": self.audience_match,
            "nonceMatch": self.nonce_match,
            "subjectBinding": self.subject_binding,
            "credentials": [r.to_dict() for r in self.credential_reports],
            "valid": self.valid,
        }


@dataclass(frozen=True)
class LinkReport:
    credential_id: str
    signature_valid: bool
    linkage: bool
    product_consistent: bool


@dataclass(frozen=True)
class ChainReport:
    """Per-link verdicts for a transfer-credential chain, root first.

    Embedded (non-head) links are expected to be revoked by later sales, so
    only the head is required to be unrevoked.
    """

    links: tuple[LinkReport, ...]
    root_issuer_trusted: bool
    head_not_revoked: bool

    @property
    def valid(self) -> bool:
        return (
            bool(self.links)
            and all(l.signature_valid and l.linkage and l.product_consistent for l in self.links)
            and self.root_issuer_trusted
            and self.head_not_revoked
        )

    def to_dict(self) -> dict:
        return {
            "links": [
                {
                    "credential": l.credential_id,
                    "signatureValid": l.signature_valid,
                    "linkage": l.linkage,
                    "productConsistent": l.product_consistent,
                }
                for l in self.links
            ],
            "rootIssuerTrusted": self.root_issuer_trusted,
            "headNotRevoked": self.head_not_revoked,
            "valid": self.valid,
        }


# ---------------------------------------------------------------------------
# Status lists
# ---------------------------------------------------------------------------


@dataclass
class StatusList:
    """Issuer-side handle for a revocation bitstring.

    The bits live on the registry (anchored on every update); this handle
    tracks index assignment so each credential gets a fresh slot.
    """

    id: str
    issuer: Did
    bits: bytearray = field(default_factory=bytearray)
    next_index: int = 0

    def assign(self) -> int:
        index = self.next_index
        self.next_index += 1
        return index

    def is_set(self, index: int) -> bool:
        byte, off = divmod(index, 8)
        return byte < len(self.bits) and bool(self.bits[byte] & (1 << off))

    def set_bit(self, index: int) -> None:
        byte, off = divmod(index, 8)
        if byte >= len(self.bits):
            self.bits.extend(b"\x00" * (byte - len(self.bits) + 1))
        self.bits[byte] |= 1 << off


def create_status_list(
    list_id: str, issuer_keys: KeyPair, issuer: Did, registry: Ledger, payer: Account
) -> tuple[StatusList, LedgerTransaction]:
    tx = registry.status_list_create(list_id, issuer, signer=issuer_keys, payer=payer)
    return StatusList(id=list_id, issuer=issuer), tx


def revoke(
    issuer_keys: KeyPair,
    status_list: StatusList,
    index: int,
    registry: Ledger,
    payer: Account,
) -> Optional[LedgerTransaction]:
    """Set a revocation bit and anchor the new bits on the registry.

    Revoking an already-revoked index is an idempotent no-op. Only the
    list's issuer may revoke; the registry rejects foreign signatures.
    """
    if index < 0 or index >= status_list.next_index:
        raise ValidationError(f"index {index} was never assigned on {status_list.id}")
    if registry.status_list_issuer(status_list.id) != status_list.issuer:
        raise AuthorizationError("status list issuer mismatch")
    if status_list.is_set(index):
        return None
    status_list.set_bit(index)
    try:
        return registry.status_list_update(
            status_list.id, bytes(status_list.bits), signer=issuer_keys, payer=payer
        )
    except Exception:
        byte, off = divmod(index, 8)
        status_list.bits[byte] &= ~(1 << off)
        raise


# ---------------------------------------------------------------------------
# Issuance
# ---------------------------------------------------------------------------


def _credential_id(body: Mapping[str, Any]) -> str:
    return "vc:" + sha256_hex(canonicalize(dict(body)))[:32]


def _credential_signing_bytes(vc: VerifiableCredential, proof_method: str, created: int) -> bytes:
    """Everything except the signature itself is signed, proof metadata included."""
    body = vc.to_dict(include_proof=False)
    body["proof"] = {"verificationMethod": proof_method, "created": created}
    return canonicalize(body)


def _presentation_signing_bytes(body: Mapping[str, Any], proof_method: str, created: int) -> bytes:
    signed = dict(body)
    signed["proof"] = {"verificationMethod": proof_method, "created": created}
    return canonicalize(signed)


def issue_credential(
    issuer_keys: KeyPair,
    issuer: Did,
    subject: Subject,
    claims: Mapping[str, Any],
    issued_at: int,
    expires_at: Optional[int] = None,
    status: Optional[tuple[str, int]] = None,
    registry: Optional[Ledger] = None,
    _allow_foreign_status: bool = False,
) -> VerifiableCredential:
    """Create and sign a credential that verifies immediately.

    When a registry is supplied, the issuer must be resolvable and active,
    and a status pointer must name a list the issuer owns (transfer
    credentials deliberately assign status on the buyer's list instead and
    bypass that ownership check).
    """
    if expires_at is not None and expires_at <= issued_at:
        raise ValidationError("expiresAt must be strictly after issuedAt")
    if registry is not None:
        try:
            doc = registry.resolve_did(issuer)
        except NotFoundError:
            raise ValidationError(f"issuer {issuer} is not resolvable") from None
        if doc.deactivated:
            raise ValidationError(f"issuer {issuer} is deactivated")
        if issuer_keys.public_hex not in doc.key_hexes():
            raise ValidationError("issuer keys are not registered in the issuer document")
        if status is not None and not _allow_foreign_status:
            if registry.status_list_issuer(status[0]) != issuer:
                raise ValidationError(f"issuer does not own status list {status[0]}")
    core: dict[str, Any] = {
        "issuer": str(issuer),
        "subject": _subject_to_dict(subject),
        "claims": dict(claims),
        "issuedAt": issued_at,
    }
    if expires_at is not None:
        core["expiresAt"] = expires_at
    if status is not None:
        core["status"] = [status[0], status[1]]
    vc = VerifiableCredential(
        id=_credential_id(core),
        issuer=issuer,
        subject=subject,
        claims=dict(claims),
        issued_at=issued_at,
        expires_at=expires_at,
        status=status,
    )
    method = f"{issuer}#{issuer_keys.key_id}"
    signature = issuer_keys.sign(_credential_signing_bytes(vc, method, issued_at))
    proof = Proof(verification_method=method, created=issued_at, signature=signature)
    return replace(vc, proof=proof)


def _resolve_proof_key(registry: Ledger, proof: Proof, expected_did: Did) -> Optional[bytes]:
    did_part, _, key_id = proof.verification_method.partition("#")
    if not key_id or did_part != str(expected_did):
        return None
    try:
        doc = registry.resolve_did(expected_did)
    except NotFoundError:
        return None
    pub = doc.find_key(key_id)
    return bytes.fromhex(pub) if pub else None


def verify_credential(
    vc: VerifiableCredential, registry: Ledger, now: int
) -> VerificationReport:
    """Independent verdicts for signature, issuer, expiry, and revocation."""
    issuer_resolvable = registry.has_did(vc.issuer)
    signature_valid = False
    if vc.proof is not None:
        key = _resolve_proof_key(registry, vc.proof, vc.issuer)
        if key is not None:
            signature_valid = verify_signature(
                canonicalize(vc.to_dict(include_proof=False)), vc.proof.signature, key
            )
    not_expired = vc.expires_at is None or vc.expires_at >= now
    if vc.status is None:
        not_revoked = True
    else:
        list_id, index = vc.status
        if registry.status_list_exists(list_id):
            not_revoked = not registry.status_bit(list_id, index)
        else:
            not_revoked = False  # unknown list: revocation state unprovable
    return VerificationReport(
        signature_valid=signature_valid,
        issuer_resolvable=issuer_resolvable,
        not_expired=not_expired,
        not_revoked=not_revoked,
    )


# ---------------------------------------------------------------------------
# Presentations
# ---------------------------------------------------------------------------


def create_presentation(
    holder_keys: KeyPair,
    holder: Did,
    credentials: Sequence[VerifiableCredential],
    audience: Did,
    nonce: bytes,
    created: int,
) -> VerifiablePresentation:
    """Sign a credential set for one audience and challenge nonce."""
    if not credentials:
        raise ValidationError("a presentation needs at least one credential")
    body = {
        "holder": str(holder),
        "credentials": [vc.to_dict() for vc in credentials],
        "audience": str(audience),
        "nonce": nonce.hex(),
    }
    proof = Proof(
        verification_method=f"{holder}#{holder_keys.key_id}",
        created=created,
        signature=holder_keys.sign(canonicalize(body)),
    )
    return VerifiablePresentation(
        holder=holder,
        credentials=tuple(credentials),
        audience=audience,
        nonce=bytes(nonce),
        proof=proof,
    )


def verify_presentation(
    vp: VerifiablePresentation,
    registry: Ledger,
    expected_audience: Did,
    expected_nonce: bytes,
    now: int,
) -> PresentationReport:
    """Check holder signature, challenge binding, and subject binding.

    Subject binding requires the holder to be the subject of every
    DID-subject credential; bearer and product-subject credentials are
    exempt (products cannot present themselves; their owner does).
    """
    holder_signature_valid = False
    key = _resolve_proof_key(registry, vp.proof, vp.holder)
    if key is not None:
        holder_signature_valid = verify_signature(
            canonicalize(vp.signed_body()), vp.proof.signature, key
        )
    subject_binding = all(
        vc.subject == vp.holder
        for vc in vp.credentials
        if isinstance(vc.subject, Did)
    )
    return PresentationReport(
        holder_signature_valid=holder_signature_valid,
        audience_match=vp.audience == expected_audience,
        nonce_match=vp.nonce == bytes(expected_nonce),
        subject_binding=subject_binding,
        credential_reports=tuple(
            verify_credential(vc, registry, now) for vc in vp.credentials
        ),
    )


# ---------------------------------------------------------------------------
# Transfer credentials
# ---------------------------------------------------------------------------


def issue_transfer_credential(
    seller_keys: KeyPair,
    seller: Did,
    buyer: Did,
    product: ProductRef,
    previous: Optional[VerifiableCredential],
    sale_date: int,
    price: Optional[str] = None,
    status_assignment: Optional[tuple[str, int]] = None,
    registry: Optional[Ledger] = None,
    extra_terms: Optional[Mapping[str, Any]] = None,
) -> VerifiableCredential:
    """Issue one ownership-handoff link, embedding the predecessor verbatim.

    For every non-root link the seller must be the buyer of the embedded
    predecessor, and all links must reference the identical product. The
    fresh status index is assigned on the buyer's list so the buyer can
    revoke it themselves when they later resell.
    """
    if buyer == seller:
        raise ValidationError("buyer and seller must differ")
    if previous is not None:
        if previous.claims.get("kind") != CLAIM_KIND_TRANSFER:
            raise ValidationError("previous credential is not a transfer credential")
        if previous.subject != seller:
            raise ProtocolError("chain mismatch: seller is not the previous buyer")
        prev_product = ProductRef.from_dict(previous.claims["product"])
        if prev_product != product:
            raise ProtocolError("product mismatch across chain links")
        if registry is not None:
            report = verify_credential(previous, registry, now=sale_date)
            if not (report.signature_valid and report.issuer_resolvable):
                raise ProtocolError("previous transfer credential does not verify")
    claims: dict[str, Any] = {
        "kind": CLAIM_KIND_TRANSFER,
        "category": CATEGORY_OWNERSHIP,
        "product": product.to_dict(),
        "previous": previous.to_dict() if previous is not None else None,
        "saleDate": sale_date,
    }
    if price is not None:
        claims["price"] = price
    if extra_terms:
        claims.update(extra_terms)
    return issue_credential(
        issuer_keys=seller_keys,
        issuer=seller,
        subject=buyer,
        claims=claims,
        issued_at=sale_date,
        status=status_assignment,
        registry=registry,
        _allow_foreign_status=True,
    )


def chain_links(tc: VerifiableCredential) -> tuple[VerifiableCredential, ...]:
    """Unfold an embedded chain into root-first order."""
    links: list[VerifiableCredential] = []
    current: Optional[VerifiableCredential] = tc
    while current is not None:
        links.append(current)
        embedded = current.claims.get("previous")
        current = VerifiableCredential.from_dict(embedded) if embedded else None
    links.reverse()
    return tuple(links)


def verify_transfer_chain(
    tc: VerifiableCredential,
    registry: Ledger,
    trusted_manufacturers: Iterable[Did],
    now: int,
) -> ChainReport:
    """Verify an ownership chain back to a trusted manufacturer.

    Each link's signature must verify against its issuer's registered key,
    every link's issuer must be the previous link's buyer, and all links
    must name the identical product. The root issuer must be a trusted
    manufacturer and the head must be unrevoked; superseded links are
    expected to be revoked.
    """
    trusted = {str(d) for d in trusted_manufacturers}
    links = chain_links(tc)
    reports: list[LinkReport] = []
    head_product = None
    if tc.claims.get("kind") == CLAIM_KIND_TRANSFER and "product" in tc.claims:
        head_product = canonicalize(tc.claims["product"])
    for pos, link in enumerate(links):
        cred_report = verify_credential(link, registry, now)
        signature_valid = cred_report.signature_valid and cred_report.issuer_resolvable
        if pos == 0:
            linkage = link.claims.get("kind") == CLAIM_KIND_TRANSFER
        else:
            linkage = links[pos - 1].subject == link.issuer
        product_consistent = (
            head_product is not None
            and link.claims.get("product") is not None
            and canonicalize(link.claims["product"]) == head_product
        )
        reports.append(
            LinkReport(
                credential_id=link.id,
                signature_valid=signature_valid,
                linkage=linkage,
                product_consistent=product_consistent,
            )
        )
    root_trusted = bool(links) and str(links[0].issuer) in trusted
    head = links[-1] if links else None
    if head is None:
        head_not_revoked = False
    elif head.status is None:
        head_not_revoked = True
    else:
        list_id, index = head.status
        head_not_revoked = registry.status_list_exists(list_id) and not registry.status_bit(
            list_id, index
        )
    return ChainReport(
        links=tuple(reports),
        root_issuer_trusted=root_trusted,
        head_not_revoked=head_not_revoked,
    )
