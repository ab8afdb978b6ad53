"""Passport assembly and views.

Builds original passports at model, batch, or item granularity, resolves the
current view (original claims overlaid with lifecycle updates in order),
audits presented updates against anchored hashes, and filters views by
audience role.

All operations here are read-side and side-effect-free given registry and
wallet snapshots.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

from .credentials import (
    CLAIM_KIND_COMPOSITION,
    CLAIM_KIND_EVENT,
    VerifiableCredential,
    issue_credential,
)
from .errors import NotFoundError, ValidationError
from .identity import Did, DidDocument, ProductRef, canonicalize, sha256_hex
from .registry import ANCHOR_EVENT, Ledger
from .wallet import Wallet


class Granularity(str, enum.Enum):
    MODEL = "model"
    BATCH = "batch"
    ITEM = "item"


class Role(str, enum.Enum):
    MANUFACTURER = "manufacturer"
    IMPORTER = "importer"
    DEALER = "dealer"
    RETAILER = "retailer"
    CUSTOMS = "customs"
    CUSTOMER = "customer"
    END_USER = "end-user"
    REPAIRER = "repairer"
    RECYCLER = "recycler"


# The category taxonomy is configuration: product groups get their concrete
# lists from later regulation, so these are shipped defaults, not a schema.
DEFAULT_TAXONOMY = frozenset(
    {
        "materials",
        "repairs",
        "ownership",
        "certifications",
        "carbon",
        "allergens",
        "disassembly",
    }
)


@dataclass(frozen=True)
class AccessPolicy:
    """Role-based read grants over claim categories."""

    grants: Mapping[Role, frozenset[str]]
    taxonomy: frozenset[str] = DEFAULT_TAXONOMY

    def __post_init__(self) -> None:
        for role, categories in self.grants.items():
            unknown = set(categories) - set(self.taxonomy)
            if unknown:
                raise ValidationError(f"policy for {role} names unknown categories: {unknown}")

    def granted(self, role: Role) -> frozenset[str]:
        if role not in self.grants:
            raise ValidationError(f"policy does not define role: {role}")
        return self.grants[role]

    def covers(self, role: Role) -> bool:
        return role in self.grants

    def to_dict(self) -> dict:
        return {
            "taxonomy": sorted(self.taxonomy),
            "grants": {role.value: sorted(cats) for role, cats in self.grants.items()},
        }

    @classmethod
    def from_dict(cls, body: Mapping[str, Any]) -> "AccessPolicy":
        taxonomy = frozenset(body.get("taxonomy", DEFAULT_TAXONOMY))
        grants = {
            Role(role): frozenset(cats) for role, cats in body.get("grants", {}).items()
        }
        return cls(grants=grants, taxonomy=taxonomy)


def example_policy() -> AccessPolicy:
    """Shipped example policy; real role rules arrive with delegated acts."""
    everything = frozenset(DEFAULT_TAXONOMY)
    return AccessPolicy(
        grants={
            Role.MANUFACTURER: everything,
            Role.END_USER: everything,
            Role.REPAIRER: frozenset({"materials", "repairs", "certifications"}),
            Role.RECYCLER: frozenset({"materials", "disassembly"}),
            Role.CUSTOMER: frozenset({"allergens", "certifications", "carbon"}),
            Role.RETAILER: frozenset({"ownership", "certifications"}),
            Role.DEALER: frozenset({"ownership", "certifications"}),
            Role.IMPORTER: frozenset({"certifications", "materials"}),
            Role.CUSTOMS: frozenset({"certifications", "ownership", "materials"}),
        }
    )


@dataclass(frozen=True)
class Dpp:
    """An assembled passport: original claims plus ordered updates."""

    product: ProductRef
    granularity: Granularity
    identity: Optional[Did] = None
    original: tuple[VerifiableCredential, ...] = ()
    document_claims: Optional[Mapping[str, Any]] = None
    updates: tuple[VerifiableCredential, ...] = ()
    components: tuple[Union[Did, ProductRef], ...] = ()


@dataclass(frozen=True)
class ClaimEntry:
    value: Any
    category: str
    source: str  # credential id or "document"


@dataclass
class DppView:
    """Resolved state of one passport node."""

    product_key: str
    identity: Optional[str]
    granularity: Optional[str]
    claims: dict[tuple[str, str], ClaimEntry] = field(default_factory=dict)
    applied_updates: list[str] = field(default_factory=list)
    components: list["DppView"] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    truncated: bool = False

    def to_dict(self) -> dict:
        claims: dict[str, dict[str, Any]] = {}
        for (component, key), entry in sorted(self.claims.items()):
            claims.setdefault(component, {})[key] = {
                "value": entry.value,
                "category": entry.category,
                "source": entry.source,
            }
        return {
            "product": self.product_key,
            "identity": self.identity,
            "granularity": self.granularity,
            "claims": claims,
            "appliedUpdates": list(self.applied_updates),
            "components": [c.to_dict() for c in self.components],
            "diagnostics": list(self.diagnostics),
            "truncated": self.truncated,
        }

    def to_bytes(self) -> bytes:
        return canonicalize(self.to_dict())

    def digest(self) -> str:
        return sha256_hex(self.to_bytes())

    def categories(self) -> set[str]:
        return {entry.category for entry in self.claims.values()}


@dataclass(frozen=True)
class AuditReport:
    """Anchored event digests reconciled against presented credentials."""

    target_key: str
    matched: tuple[tuple[str, str], ...]  # (digest, credential id)
    concealments: tuple[str, ...]  # anchored digests with no presented match
    extras: tuple[str, ...]  # presented credential ids never anchored

    @property
    def complete(self) -> bool:
        return not self.concealments

    def to_dict(self) -> dict:
        return {
            "target": self.target_key,
            "matched": [[d, c] for d, c in self.matched],
            "concealments": list(self.concealments),
            "unverifiableExtras": list(self.extras),
            "complete": self.complete,
        }


# ---------------------------------------------------------------------------
# Creation
# ---------------------------------------------------------------------------


def _component_ref_str(ref: Union[Did, ProductRef]) -> str:
    return str(ref) if isinstance(ref, Did) else ref.key()


def check_component_graph(
    components: Sequence[Union[Did, ProductRef]],
    registry: Ledger,
    root_key: str,
) -> None:
    """Reject component references that loop back to the root or each other."""
    seen: set[str] = set()

    def walk(ref: Union[Did, ProductRef], path: set[str]) -> None:
        key = _component_ref_str(ref)
        if key == root_key or key in path:
            raise ValidationError(f"cyclic component reference via {key}")
        if key in seen:
            return
        seen.add(key)
        if isinstance(ref, Did) and registry.has_did(ref):
            doc = registry.resolve_did(ref)
            for child in doc.attributes.get("components", []):
                walk(Did.parse(child) if child.startswith("did:") else _ref_from_key(child), path | {key})

    for ref in components:
        walk(ref, set())


def _ref_from_key(key: str) -> ProductRef:
    from .identity import Gtin

    gtin, _, serial = key.partition(":")
    return ProductRef(gtin=Gtin(gtin), serial=serial or None)


def composition_document_attributes(
    granularity: Granularity,
    composition: Mapping[str, Mapping[str, Any]],
    components: Sequence[Union[Did, ProductRef]],
    serial: Optional[str] = None,
) -> dict:
    """Attribute block for document-based passports."""
    attributes: dict[str, Any] = {
        "granularity": granularity.value,
        "dpp": {name: dict(entry) for name, entry in composition.items()},
        "components": [_component_ref_str(c) for c in components],
    }
    if serial is not None:
        attributes["serial"] = serial
    return attributes


def create_original_dpp(
    wallet: Wallet,
    issuer: Did,
    product: ProductRef,
    granularity: Granularity,
    composition: Mapping[str, Mapping[str, Any]],
    components: Sequence[Union[Did, ProductRef]],
    registry: Ledger,
    now: int,
    product_did: Optional[Did] = None,
    composition_in_document: bool = False,
    status_for: Optional[Callable[[int], tuple[str, int]]] = None,
) -> Dpp:
    """Assemble the manufacturer's original passport.

    Model and batch passports with a DID identity keep their composition in
    the DID document; item passports get one credential per composition
    entry. Very complex items can opt into the hybrid mode where the
    component tree lives in documents while instance updates stay
    credentials (``composition_in_document=True``).

    ``composition`` maps component name to ``{"category": ..., "claims":
    {...}}``. ``status_for`` optionally assigns a revocation slot per issued
    credential (callable index -> (list id, index)).
    """
    if granularity is Granularity.ITEM and product.serial is None:
        raise ValidationError("item granularity requires a serial number")
    if granularity is not Granularity.ITEM and product.serial is not None:
        raise ValidationError(f"{granularity.value} granularity must not carry a serial")
    for name, entry in composition.items():
        if "category" not in entry or "claims" not in entry:
            raise ValidationError(f"composition entry {name!r} needs category and claims")
    check_component_graph(components, registry, root_key=product.key())

    document_based = product_did is not None and (
        granularity is not Granularity.ITEM or composition_in_document
    )
    if document_based:
        return Dpp(
            product=product,
            granularity=granularity,
            identity=product_did,
            document_claims={name: dict(entry) for name, entry in composition.items()},
            components=tuple(components),
        )

    issued: list[VerifiableCredential] = []
    for index, name in enumerate(sorted(composition)):
        entry = composition[name]
        status = status_for(index) if status_for is not None else None
        vc = issue_credential(
            issuer_keys=wallet.key(),
            issuer=issuer,
            subject=product,
            claims={
                "kind": CLAIM_KIND_COMPOSITION,
                "category": entry["category"],
                "component": name,
                "claims": dict(entry["claims"]),
            },
            issued_at=now,
            status=status,
            registry=registry,
        )
        wallet.store_credential(vc, registry, now)
        issued.append(vc)
    return Dpp(
        product=product,
        granularity=granularity,
        identity=product_did,
        original=tuple(issued),
        components=tuple(components),
    )


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


def _document_for_target(
    target: Union[Did, ProductRef], registry: Ledger
) -> Optional[DidDocument]:
    if isinstance(target, Did):
        return registry.resolve_did(target)
    candidates = registry.find_dids_by_gtin(target.gtin.digits)
    for did in candidates:
        doc = registry.resolve_did(did)
        attr_serial = doc.attributes.get("serial")
        if attr_serial == target.serial or attr_serial is None:
            return doc
    return None


def _sorted_updates(
    product: ProductRef, wallets: Iterable[Wallet]
) -> list[VerifiableCredential]:
    seen: dict[str, VerifiableCredential] = {}
    for wallet in wallets:
        for vc in wallet.credentials_for_product(product):
            if vc.claims.get("kind") == CLAIM_KIND_EVENT:
                seen.setdefault(vc.id, vc)
    return sorted(seen.values(), key=lambda c: (c.issued_at, c.id))


def resolve_dpp(
    target: Union[Did, ProductRef],
    registry: Ledger,
    wallets: Sequence[Wallet] = (),
    max_depth: Optional[int] = None,
) -> DppView:
    """Resolve a passport: original claims with updates applied in order.

    Later updates to the same (component, claim key) supersede earlier ones;
    the ordering key is (logical time, credential id), so arrival order
    never matters. The component tree is expanded to ``max_depth`` (default
    unlimited) with a cycle guard; broken references produce a partial view
    with a diagnostic instead of failing.
    """
    return _resolve_node(target, registry, wallets, max_depth, visited=frozenset())


def _resolve_node(
    target: Union[Did, ProductRef],
    registry: Ledger,
    wallets: Sequence[Wallet],
    depth: Optional[int],
    visited: frozenset[str],
) -> DppView:
    doc: Optional[DidDocument] = None
    product: Optional[ProductRef] = None
    if isinstance(target, Did):
        doc = registry.resolve_did(target)
        if doc.also_known_as:
            product = ProductRef(
                gtin=_ref_from_key(doc.also_known_as).gtin,
                serial=doc.attributes.get("serial"),
            )
    else:
        product = target
        doc = _document_for_target(target, registry)

    node_key = str(target) if isinstance(target, Did) else target.key()
    view = DppView(
        product_key=product.key() if product else node_key,
        identity=str(doc.id) if doc else None,
        granularity=None,
    )

    component_refs: list[Union[Did, ProductRef]] = []
    if doc is not None:
        view.granularity = doc.attributes.get("granularity")
        for name, entry in doc.attributes.get("dpp", {}).items():
            for key, value in entry.get("claims", {}).items():
                view.claims[(name, key)] = ClaimEntry(
                    value=value, category=entry.get("category", "materials"), source="document"
                )
        component_refs.extend(
            Did.parse(ref) if ref.startswith("did:") else _ref_from_key(ref)
            for ref in doc.attributes.get("components", [])
        )

    originals: list[VerifiableCredential] = []
    if product is not None:
        seen: dict[str, VerifiableCredential] = {}
        for wallet in wallets:
            for vc in wallet.credentials_for_product(product):
                if vc.claims.get("kind") == CLAIM_KIND_COMPOSITION:
                    seen.setdefault(vc.id, vc)
        originals = sorted(seen.values(), key=lambda c: (c.issued_at, c.id))
    for vc in originals:
        if view.granularity is None:
            view.granularity = vc.claims.get("granularity")
        name = vc.claims.get("component", "product")
        for key, value in vc.claims.get("claims", {}).items():
            view.claims[(name, key)] = ClaimEntry(
                value=value, category=vc.claims.get("category", "materials"), source=vc.id
            )

    if doc is None and not originals:
        raise NotFoundError(f"no passport found for {node_key}")

    if product is not None:
        for vc in _sorted_updates(product, wallets):
            name = vc.claims.get("component", "product")
            for key, value in vc.claims.get("claims", {}).items():
                view.claims[(name, key)] = ClaimEntry(
                    value=value, category=vc.claims.get("category", "repairs"), source=vc.id
                )
            view.applied_updates.append(vc.id)

    next_visited = visited | {node_key}
    for ref in component_refs:
        ref_key = _component_ref_str(ref)
        if ref_key in next_visited:
            view.diagnostics.append(f"component cycle at {ref_key}")
            continue
        if depth is not None and depth <= 0:
            child = DppView(
                product_key=ref_key, identity=None, granularity=None, truncated=True
            )
            view.components.append(child)
            continue
        try:
            child = _resolve_node(
                ref,
                registry,
                wallets,
                None if depth is None else depth - 1,
                next_visited,
            )
        except NotFoundError:
            view.diagnostics.append(f"broken component reference: {ref_key}")
            child = DppView(product_key=ref_key, identity=None, granularity=None)
            child.diagnostics.append("unresolvable")
        view.components.append(child)
    return view


# ---------------------------------------------------------------------------
# Audit and filtering
# ---------------------------------------------------------------------------


def audit_completeness(
    target: Union[Did, ProductRef],
    registry: Ledger,
    presented: Sequence[VerifiableCredential],
) -> AuditReport:
    """Pair anchored event digests with presented update credentials.

    Unmatched anchors are concealments; presented credentials that were
    never anchored are unverifiable extras.
    """
    anchored = [a for a in registry.anchors(target) if a.label == ANCHOR_EVENT]
    if not anchored and not registry.anchors(target):
        raise NotFoundError(f"no anchors recorded for {target}")
    by_digest = {vc.digest(): vc for vc in presented}
    matched = []
    concealed = []
    for anchor in anchored:
        vc = by_digest.pop(anchor.digest, None)
        if vc is None:
            concealed.append(anchor.digest)
        else:
            matched.append((anchor.digest, vc.id))
    extras = tuple(sorted(vc.id for vc in by_digest.values()))
    return AuditReport(
        target_key=str(target) if isinstance(target, Did) else target.key(),
        matched=tuple(matched),
        concealments=tuple(concealed),
        extras=extras,
    )


def access_filter(view: DppView, role: Role, policy: AccessPolicy) -> DppView:
    """Strip claims outside the role's grants; structure is preserved."""
    granted = policy.granted(role)
    filtered = DppView(
        product_key=view.product_key,
        identity=view.identity,
        granularity=view.granularity,
        claims={
            key: entry for key, entry in view.claims.items() if entry.category in granted
        },
        applied_updates=list(view.applied_updates),
        components=[access_filter(child, role, policy) for child in view.components],
        diagnostics=list(view.diagnostics),
        truncated=view.truncated,
    )
    return filtered
