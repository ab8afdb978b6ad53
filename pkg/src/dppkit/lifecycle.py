"""End-to-end ownership and maintenance protocols.

Two designs over the same registry: products with their own DID whose
document controller is the current owner (transfer = controller swap, events
= anchored hashes), and products identified only by GTIN and serial whose
ownership lives in a chain of transfer credentials with seller-side
revocation.

Protocol steps validate every precondition, including fee feasibility for
all payers, before the first registry write, so a failed call leaves the
ledger, wallets, and status lists untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Mapping, MutableMapping, Optional

from .clock import LogicalClock
from .credentials import (
    CLAIM_KIND_EVENT,
    CLAIM_KIND_TRANSFER,
    ChainReport,
    PresentationReport,
    StatusList,
    VerifiableCredential,
    VerifiablePresentation,
    create_status_list,
    issue_credential,
    issue_transfer_credential,
    revoke,
    verify_presentation,
    verify_transfer_chain,
)
from .errors import (
    AuthorizationError,
    CorrelationWarning,
    InsufficientFundsError,
    NotFoundError,
    ProtocolError,
    ValidationError,
)
from .identity import (
    CAP_ANCHOR_EVENT,
    Did,
    KeyPair,
    ProductRef,
    canonicalize,
    derive_did,
    generate_key_pair,
    new_document,
    sha256_hex,
)
from .passport import (
    Dpp,
    Granularity,
    Role,
    composition_document_attributes,
    create_original_dpp,
)
from .registry import (
    ANCHOR_EVENT,
    ANCHOR_ORIGINAL,
    ANCHOR_TRANSFER,
    Account,
    Ledger,
    LedgerTransaction,
)
from .wallet import Wallet, transfer_credentials


@dataclass
class Agent:
    """A protocol participant with a registered DID, wallet, and account."""

    name: str
    did: Did
    role: Role
    wallet: Wallet
    account: Account
    transfer_list: Optional[StatusList] = None

    @property
    def keys(self) -> KeyPair:
        return self.wallet.key()


@dataclass
class CommercialRegistry:
    """Public trust root: the DIDs and roles of legal companies."""

    entries: dict[str, tuple[str, Role]] = field(default_factory=dict)

    def register(self, did: Did, legal_name: str, role: Role) -> None:
        self.entries[str(did)] = (legal_name, role)

    def contains(self, did: Did) -> bool:
        return str(did) in self.entries

    def manufacturers(self) -> tuple[Did, ...]:
        return tuple(
            Did.parse(d) for d, (_, role) in sorted(self.entries.items()) if role is Role.MANUFACTURER
        )


@dataclass(frozen=True)
class DppInputs:
    """What the manufacturer supplies when minting a passport."""

    granularity: Granularity
    composition: Mapping[str, Mapping[str, Any]]
    components: tuple[Any, ...] = ()
    composition_in_document: bool = False


@dataclass(frozen=True)
class MintOutcome:
    product_did: Did
    dpp: Dpp
    transaction: LedgerTransaction


@dataclass(frozen=True)
class ChainMintOutcome:
    dpp: Dpp
    product_status_list: StatusList
    original_anchor: LedgerTransaction
    manufacturer: Did


@dataclass(frozen=True)
class FraudReport:
    signer_in_commercial_registry: bool
    signer_key_verifies: bool
    chain_subject_continuity: bool
    chain_report: Optional[ChainReport]
    presentation_report: PresentationReport

    @property
    def chain_verdict(self) -> bool:
        return self.chain_report is not None and self.chain_report.valid

    @property
    def fraudulent(self) -> bool:
        return not (
            self.signer_in_commercial_registry
            and self.signer_key_verifies
            and self.chain_subject_continuity
            and self.chain_verdict
        )

    def to_dict(self) -> dict:
        return {
            "signerInCommercialRegistry": self.signer_in_commercial_registry,
            "signerKeyVerifies": self.signer_key_verifies,
            "chainSubjectContinuity": self.chain_subject_continuity,
            "chainVerdict": self.chain_verdict,
            "chain": self.chain_report.to_dict() if self.chain_report else None,
            "presentation": self.presentation_report.to_dict(),
            "fraudulent": self.fraudulent,
        }


def agent_status_list_id(did: Did) -> str:
    return f"sl:agent:{did.method_specific_id}"


def product_status_list_id(product: ProductRef) -> str:
    return f"sl:product:{product.key()}"


def create_agent(
    registry: Ledger,
    seed: bytes,
    name: str,
    role: Role,
    balance: Decimal,
    commercial_registry: Optional[CommercialRegistry] = None,
    legal_name: Optional[str] = None,
) -> Agent:
    """Register an agent DID and open its fee account.

    When a commercial registry is given the agent is listed there as a legal
    company under ``legal_name`` (companies only; private owners stay out).
    """
    keys = generate_key_pair(seed)
    did = derive_did(keys.public_key)
    account = registry.open_account(did, balance)
    doc = new_document(did, controller=did, keys=[keys])
    registry.create_did(doc, payer=account, signer=keys)
    wallet = Wallet(owner=did)
    wallet.add_key(keys)
    agent = Agent(name=name, did=did, role=role, wallet=wallet, account=account)
    if commercial_registry is not None:
        commercial_registry.register(did, legal_name or name, role)
    return agent


def _require_commercial(agent: Agent, commercial_registry: CommercialRegistry) -> None:
    if not commercial_registry.contains(agent.did):
        raise AuthorizationError(f"{agent.name} ({agent.did}) is not a registered legal company")


def _check_granularity(
    product: ProductRef,
    granularity: Granularity,
    granularity_index: Optional[MutableMapping[str, str]],
) -> None:
    """Granularity is fixed per product type and immutable afterwards."""
    if granularity_index is None:
        return
    gtin = product.gtin.digits
    known = granularity_index.get(gtin)
    if known is not None and known != granularity.value:
        raise ValidationError(
            f"product type {gtin} already uses {known} granularity, not {granularity.value}"
        )
    granularity_index[gtin] = granularity.value


def _require_funds(account: Account, needed: Decimal, label: str) -> None:
    if account.balance < needed:
        raise InsufficientFundsError(
            f"{label}: balance {account.balance} cannot cover {needed} tokens"
        )


# ---------------------------------------------------------------------------
# DID-per-product design
# ---------------------------------------------------------------------------


def mint_product_p081(
    manufacturer: Agent,
    product: ProductRef,
    inputs: DppInputs,
    registry: Ledger,
    clock: LogicalClock,
    commercial_registry: CommercialRegistry,
    product_seed: bytes,
    granularity_index: Optional[MutableMapping[str, str]] = None,
) -> MintOutcome:
    """Create a product DID controlled by the manufacturer, plus its passport.

    The document links the GTIN (and serial for items); model and batch
    compositions live in the document itself, item compositions become
    credentials unless the hybrid document-tree mode is requested.
    """
    _require_commercial(manufacturer, commercial_registry)
    _check_granularity(product, inputs.granularity, granularity_index)
    _require_funds(manufacturer.account, registry.fees.create_did, "mint")
    product_keys = generate_key_pair(product_seed, key_id="product-key")
    product_did = derive_did(product_keys.public_key)
    if registry.has_did(product_did):
        raise ValidationError(f"product DID already exists: {product_did}")

    document_based = inputs.granularity is not Granularity.ITEM or inputs.composition_in_document
    if document_based:
        attributes = composition_document_attributes(
            inputs.granularity, inputs.composition, inputs.components, serial=product.serial
        )
    else:
        attributes = {"granularity": inputs.granularity.value}
        if product.serial is not None:
            attributes["serial"] = product.serial
    doc = new_document(
        product_did,
        controller=manufacturer.did,
        keys=[product_keys],
        also_known_as=product.gtin.digits,
        attributes=attributes,
    )
    tx = registry.create_did(doc, payer=manufacturer.account, signer=manufacturer.keys)
    dpp = create_original_dpp(
        wallet=manufacturer.wallet,
        issuer=manufacturer.did,
        product=product,
        granularity=inputs.granularity,
        composition=inputs.composition,
        components=inputs.components,
        registry=registry,
        now=clock.tick(),
        product_did=product_did,
        composition_in_document=inputs.composition_in_document,
    )
    return MintOutcome(product_did=product_did, dpp=dpp, transaction=tx)


def transfer_ownership_p081(
    registry: Ledger,
    product_did: Did,
    seller: Agent,
    buyer_did: Did,
    clock: LogicalClock,
) -> LedgerTransaction:
    """Hand the product over by rewriting the document controller.

    The seller must be the current controller; afterwards they can no longer
    modify the document. The buyer DID should be fresh and product-specific;
    reuse across products is allowed but draws a correlation warning.
    """
    current = registry.resolve_did(product_did)
    if current.controller != seller.did:
        raise AuthorizationError(f"{seller.name} is not the current controller")
    if buyer_did == seller.did:
        raise ValidationError("buyer and seller must differ")
    for other in registry.find_controlled_products(buyer_did):
        if other != product_did:
            warnings.warn(
                f"buyer DID {buyer_did} already controls {other}; "
                "reuse across products enables correlation",
                CorrelationWarning,
                stacklevel=2,
            )
            break
    new_doc = current.next_version(controller=buyer_did)
    return registry.update_did_document(
        product_did,
        new_doc,
        signer=seller.keys,
        payer=seller.account,
        signer_did=seller.did,
    )


def add_owner_keys_p081(
    registry: Ledger, product_did: Did, owner: Agent, clock: LogicalClock
) -> LedgerTransaction:
    """Post-transfer step: the new owner adds their keys to the document."""
    current = registry.resolve_did(product_did)
    if current.controller != owner.did:
        raise AuthorizationError(f"{owner.name} is not the current controller")
    key = owner.keys
    methods = current.verification_methods + ((f"owner-{key.key_id}", key.public_hex),)
    new_doc = current.next_version(verification_methods=methods)
    return registry.update_did_document(
        product_did, new_doc, signer=key, payer=owner.account, signer_did=owner.did
    )


def record_event_p081(
    registry: Ledger,
    product_did: Did,
    owner: Agent,
    workshop: Agent,
    event_claims: Mapping[str, Any],
    clock: LogicalClock,
    commercial_registry: CommercialRegistry,
) -> tuple[VerifiableCredential, LedgerTransaction]:
    """Workshop-performed event: delegated anchoring plus a credential.

    The owner grants the workshop a single-use anchor-event delegation (a
    document update the owner pays for); the workshop issues the event
    credential into the owner's wallet and anchors its hash, consuming the
    delegation. The delegation never allows controller or key changes.
    """
    _require_commercial(workshop, commercial_registry)
    current = registry.resolve_did(product_did)
    if current.controller != owner.did:
        raise AuthorizationError(f"{owner.name} is not the current controller")
    _require_funds(owner.account, registry.fees.update_did, "delegation grant")
    _require_funds(workshop.account, registry.fees.anchor_hash, "event anchor")
    product = _product_from_document(registry, product_did)

    grant = current.next_version(
        delegations=current.delegations + ((str(workshop.did), CAP_ANCHOR_EVENT),)
    )
    registry.update_did_document(
        product_did, grant, signer=owner.keys, payer=owner.account, signer_did=owner.did
    )
    vc = issue_credential(
        issuer_keys=workshop.keys,
        issuer=workshop.did,
        subject=product,
        claims=_event_claims(event_claims),
        issued_at=clock.tick(),
        registry=registry,
    )
    owner.wallet.store_credential(vc, registry, now=vc.issued_at)
    anchor_tx = registry.anchor_hash(
        product_did,
        vc.digest(),
        signer=workshop.keys,
        signer_did=workshop.did,
        payer=workshop.account,
        label=ANCHOR_EVENT,
    )
    return vc, anchor_tx


def record_owner_event_p081(
    registry: Ledger,
    product_did: Did,
    owner: Agent,
    event_claims: Mapping[str, Any],
    clock: LogicalClock,
) -> tuple[VerifiableCredential, LedgerTransaction]:
    """Owner-registered event (inspections, self-maintenance).

    The owner issues the credential themselves and anchors it as controller:
    one document-update-priced registry write per event.
    """
    current = registry.resolve_did(product_did)
    if current.controller != owner.did:
        raise AuthorizationError(f"{owner.name} is not the current controller")
    product = _product_from_document(registry, product_did)
    vc = issue_credential(
        issuer_keys=owner.keys,
        issuer=owner.did,
        subject=product,
        claims=_event_claims(event_claims),
        issued_at=clock.tick(),
        registry=registry,
    )
    owner.wallet.store_credential(vc, registry, now=vc.issued_at)
    anchor_tx = registry.anchor_hash(
        product_did,
        vc.digest(),
        signer=owner.keys,
        signer_did=owner.did,
        payer=owner.account,
        label=ANCHOR_EVENT,
    )
    return vc, anchor_tx


def _event_claims(event_claims: Mapping[str, Any]) -> dict:
    claims = {"kind": CLAIM_KIND_EVENT, "category": "repairs"}
    claims.update(event_claims)
    if "claims" not in claims:
        raise ValidationError("event claims need a 'claims' payload")
    return claims


def _product_from_document(registry: Ledger, product_did: Did) -> ProductRef:
    doc = registry.resolve_did(product_did)
    if not doc.also_known_as:
        raise ValidationError(f"document {product_did} has no GTIN link")
    from .identity import Gtin

    return ProductRef(gtin=Gtin(doc.also_known_as), serial=doc.attributes.get("serial"))


# ---------------------------------------------------------------------------
# GTIN-only design
# ---------------------------------------------------------------------------


def mint_product_p082(
    manufacturer: Agent,
    product: ProductRef,
    inputs: DppInputs,
    registry: Ledger,
    clock: LogicalClock,
    commercial_registry: CommercialRegistry,
    granularity_index: Optional[MutableMapping[str, str]] = None,
) -> ChainMintOutcome:
    """Mint a passport for a product identified only by GTIN and serial.

    No product DID is created. Composition credentials are issued against
    the product reference with revocation slots on a per-product status
    list, and the digest of the original credential set is registered so
    later audits can detect concealment. Per-product registry cost is the
    status list creation plus one status-list-priced registration.
    """
    _require_commercial(manufacturer, commercial_registry)
    _check_granularity(product, inputs.granularity, granularity_index)
    list_id = product_status_list_id(product)
    if registry.status_list_exists(list_id):
        raise ValidationError(f"product already minted: {product.key()}")
    _require_funds(
        manufacturer.account,
        registry.fees.status_list_create + registry.fees.status_list_update,
        "mint",
    )
    status_list, _ = create_status_list(
        list_id, manufacturer.keys, manufacturer.did, registry, payer=manufacturer.account
    )
    dpp = create_original_dpp(
        wallet=manufacturer.wallet,
        issuer=manufacturer.did,
        product=product,
        granularity=inputs.granularity,
        composition=inputs.composition,
        components=inputs.components,
        registry=registry,
        now=clock.tick(),
        status_for=lambda _i: (status_list.id, status_list.assign()),
    )
    set_digest = sha256_hex(canonicalize(sorted(vc.digest() for vc in dpp.original)))
    anchor_tx = registry.anchor_hash(
        product,
        set_digest,
        signer=manufacturer.keys,
        signer_did=manufacturer.did,
        payer=manufacturer.account,
        label=ANCHOR_ORIGINAL,
    )
    return ChainMintOutcome(
        dpp=dpp,
        product_status_list=status_list,
        original_anchor=anchor_tx,
        manufacturer=manufacturer.did,
    )


def manufacturer_of_record(registry: Ledger, product: ProductRef) -> Did:
    """The agent that registered the product's original credential set."""
    for anchor in registry.anchors(product):
        if anchor.label == ANCHOR_ORIGINAL:
            return Did.parse(anchor.signer)
    raise NotFoundError(f"no original registration for {product.key()}")


def head_transfer_credential(agent: Agent, product: ProductRef) -> Optional[VerifiableCredential]:
    """The agent's current ownership proof for a product, if any."""
    candidates = [
        vc
        for vc in agent.wallet.credentials_for_product(product)
        if vc.claims.get("kind") == CLAIM_KIND_TRANSFER and vc.subject == agent.did
    ]
    if not candidates:
        return None
    return max(candidates, key=lambda c: (c.issued_at, c.id))


def ensure_transfer_list(agent: Agent, registry: Ledger) -> StatusList:
    """Lazily create the agent's personal revocation list (they pay)."""
    if agent.transfer_list is None:
        agent.transfer_list, _ = create_status_list(
            agent_status_list_id(agent.did),
            agent.keys,
            agent.did,
            registry,
            payer=agent.account,
        )
    return agent.transfer_list


def attach_transfer_list(agent: Agent, registry: Ledger, next_index: int) -> Optional[StatusList]:
    """Rehydrate an agent's list handle from registry state (CLI restarts)."""
    list_id = agent_status_list_id(agent.did)
    if not registry.status_list_exists(list_id):
        return None
    agent.transfer_list = StatusList(
        id=list_id,
        issuer=agent.did,
        bits=bytearray(registry.status_bits(list_id)),
        next_index=next_index,
    )
    return agent.transfer_list


def transfer_ownership_p082(
    registry: Ledger,
    product: ProductRef,
    seller: Agent,
    buyer: Agent,
    clock: LogicalClock,
    price: Optional[str] = None,
) -> VerifiableCredential:
    """Sell a GTIN-identified product: issue, revoke, register, hand over.

    Atomically (validated before the first write): a new transfer credential
    embedding the seller's chain is issued to the buyer with a revocation
    slot on the buyer's own list, the seller's superseded credential is
    revoked on the seller's list, the new credential's hash is registered
    with the product identifier, and the product's credentials move wallets.

    A seller whose credential is already revoked sold twice; the call is
    rejected.
    """
    if seller.did == buyer.did:
        raise ValidationError("buyer and seller must differ")
    previous = head_transfer_credential(seller, product)
    if previous is None:
        maker = manufacturer_of_record(registry, product)
        if maker != seller.did:
            raise ProtocolError(
                f"{seller.name} holds no transfer credential and is not the manufacturer of record"
            )
    elif previous.status is not None:
        list_id, index = previous.status
        if registry.status_bit(list_id, index):
            raise ProtocolError(
                f"{seller.name}'s ownership credential is revoked (product already sold)"
            )

    fees = registry.fees
    buyer_needed = fees.status_list_update  # registration of the new credential
    if buyer.transfer_list is None:
        buyer_needed += fees.status_list_create
    _require_funds(buyer.account, buyer_needed, "purchase")
    if previous is not None and previous.status is not None:
        _require_funds(seller.account, fees.status_list_update, "revocation")

    buyer_list = ensure_transfer_list(buyer, registry)
    sale_date = clock.tick()
    credential = issue_transfer_credential(
        seller_keys=seller.keys,
        seller=seller.did,
        buyer=buyer.did,
        product=product,
        previous=previous,
        sale_date=sale_date,
        price=price,
        status_assignment=(buyer_list.id, buyer_list.assign()),
        registry=registry,
    )
    if previous is not None:
        if previous.status is not None and seller.transfer_list is not None:
            revoke(
                seller.keys,
                seller.transfer_list,
                previous.status[1],
                registry,
                payer=seller.account,
            )
        seller.wallet.remove(previous.id)
    registry.anchor_hash(
        product,
        credential.digest(),
        signer=buyer.keys,
        signer_did=buyer.did,
        payer=buyer.account,
        label=ANCHOR_TRANSFER,
    )
    transfer_credentials(seller.wallet, buyer.wallet, product, registry, now=sale_date)
    buyer.wallet.store_credential(credential, registry, now=sale_date)
    return credential


def record_event_p082(
    registry: Ledger,
    product: ProductRef,
    owner: Agent,
    workshop: Agent,
    event_claims: Mapping[str, Any],
    clock: LogicalClock,
    commercial_registry: CommercialRegistry,
) -> tuple[VerifiableCredential, LedgerTransaction]:
    """Workshop event for a GTIN-identified product.

    The credential goes to the owner's wallet and its hash is registered in
    a transaction carrying the product identifier; any registered agent may
    write such a registration.
    """
    _require_commercial(workshop, commercial_registry)
    _require_funds(workshop.account, registry.fees.status_list_update, "event anchor")
    vc = issue_credential(
        issuer_keys=workshop.keys,
        issuer=workshop.did,
        subject=product,
        claims=_event_claims(event_claims),
        issued_at=clock.tick(),
        registry=registry,
    )
    owner.wallet.store_credential(vc, registry, now=vc.issued_at)
    anchor_tx = registry.anchor_hash(
        product,
        vc.digest(),
        signer=workshop.keys,
        signer_did=workshop.did,
        payer=workshop.account,
        label=ANCHOR_EVENT,
    )
    return vc, anchor_tx


# ---------------------------------------------------------------------------
# Fraud detection
# ---------------------------------------------------------------------------


def detect_fraud(
    vp: VerifiablePresentation,
    commercial_registry: CommercialRegistry,
    registry: Ledger,
    audience: Did,
    nonce: bytes,
    now: int,
) -> FraudReport:
    """Check a sales-stage presentation against the commercial trust root.

    A presentation is fraudulent when the signer is not a listed legal
    company, their key does not verify, the latest transfer credential's
    subject is not the presenter, or the ownership chain fails verification.
    """
    presentation = verify_presentation(vp, registry, audience, nonce, now)
    transfer_creds = [
        vc for vc in vp.credentials if vc.claims.get("kind") == CLAIM_KIND_TRANSFER
    ]
    head = max(transfer_creds, key=lambda c: (c.issued_at, c.id)) if transfer_creds else None
    chain_report = (
        verify_transfer_chain(head, registry, commercial_registry.manufacturers(), now)
        if head is not None
        else None
    )
    return FraudReport(
        signer_in_commercial_registry=commercial_registry.contains(vp.holder),
        signer_key_verifies=presentation.holder_signature_valid,
        chain_subject_continuity=head is not None and head.subject == vp.holder,
        chain_report=chain_report,
        presentation_report=presentation,
    )
