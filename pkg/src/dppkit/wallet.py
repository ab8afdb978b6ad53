"""Per-agent credential store with selective disclosure.

A wallet belongs to one agent and is never shared across threads. It indexes
credentials by product and claim category so a presentation for a given
audience role contains exactly what the access policy grants, nothing else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .credentials import (
    VerifiableCredential,
    VerifiablePresentation,
    create_presentation,
    verify_credential,
)
from .errors import ValidationError
from .identity import Did, KeyPair, ProductRef, generate_key_pair
from .registry import Ledger


@dataclass(frozen=True)
class TransferReport:
    """Outcome of moving a product's credentials between wallets."""

    product: ProductRef
    moved: tuple[str, ...]

    @property
    def noop(self) -> bool:
        return not self.moved


def _product_of(vc: VerifiableCredential) -> Optional[ProductRef]:
    if isinstance(vc.subject, ProductRef):
        return vc.subject
    product = vc.claims.get("product")
    if isinstance(product, dict):
        return ProductRef.from_dict(product)
    return None


def _matches(candidate: Optional[ProductRef], wanted: ProductRef) -> bool:
    if candidate is None:
        return False
    if candidate == wanted:
        return True
    # A class-level credential (no serial) covers every item of its GTIN.
    return candidate.serial is None and candidate.gtin == wanted.gtin


@dataclass
class Wallet:
    owner: Did
    keys: dict[str, KeyPair] = field(default_factory=dict)
    _store: dict[str, VerifiableCredential] = field(default_factory=dict)

    def add_key(self, pair: KeyPair) -> None:
        self.keys[pair.key_id] = pair

    def key(self, key_id: Optional[str] = None) -> KeyPair:
        if key_id is None:
            if not self.keys:
                raise ValidationError("wallet holds no keys")
            key_id = sorted(self.keys)[0]
        return self.keys[key_id]

    # -- storage -------------------------------------------------------------

    def store_credential(
        self, vc: VerifiableCredential, registry: Ledger, now: int
    ) -> "Wallet":
        """Keep a credential; invalid ones are rejected, duplicates ignored."""
        if vc.id in self._store:
            return self
        report = verify_credential(vc, registry, now)
        if not report.valid:
            raise ValidationError(f"credential {vc.id} fails verification: {report.to_dict()}")
        if isinstance(vc.subject, Did) and vc.subject != self.owner:
            raise ValidationError("subject-bearing credential belongs to a different holder")
        self._store[vc.id] = vc
        return self

    def remove(self, credential_id: str) -> Optional[VerifiableCredential]:
        return self._store.pop(credential_id, None)

    def get(self, credential_id: str) -> VerifiableCredential:
        try:
            return self._store[credential_id]
        except KeyError:
            raise ValidationError(f"credential not in wallet: {credential_id}") from None

    def __len__(self) -> int:
        return len(self._store)

    def credentials(self) -> tuple[VerifiableCredential, ...]:
        return tuple(sorted(self._store.values(), key=lambda c: (c.issued_at, c.id)))

    def credentials_for_product(
        self, product: ProductRef, category: Optional[str] = None
    ) -> tuple[VerifiableCredential, ...]:
        out = [
            vc
            for vc in self._store.values()
            if _matches(_product_of(vc), product)
            and (category is None or vc.category() == category)
        ]
        return tuple(sorted(out, key=lambda c: (c.issued_at, c.id)))

    # -- disclosure -----------------------------------------------------------

    def selective_disclose(
        self,
        product: ProductRef,
        audience_role: "Role",
        policy: "AccessPolicy",
        audience: Did,
        nonce: bytes,
        now: int,
    ) -> VerifiablePresentation:
        """Present exactly the credentials the policy grants to the role."""
        from .passport import AccessPolicy, Role  # noqa: F401  (type references)

        granted = policy.granted(audience_role)
        if not granted:
            raise ValidationError(f"role {audience_role} has no granted categories")
        selected = [
            vc
            for vc in self.credentials_for_product(product)
            if vc.category() in granted
        ]
        if not selected:
            raise ValidationError(
                f"nothing to disclose for {product.key()} to role {audience_role}"
            )
        return create_presentation(
            holder_keys=self.key(),
            holder=self.owner,
            credentials=selected,
            audience=audience,
            nonce=nonce,
            created=now,
        )

    # -- persistence -----------------------------------------------------------

    def save(self, directory: Union[str, Path]) -> None:
        """Write one canonical credential file per entry plus an index."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = {}
        for vc in self.credentials():
            name = vc.id.replace(":", "_") + ".json"
            (directory / name).write_bytes(vc.to_bytes())
            names[vc.id] = name
        index = {
            "owner": str(self.owner),
            "keys": {kid: pair.private_bytes().hex() for kid, pair in self.keys.items()},
            "credentials": names,
        }
        (directory / "index.json").write_text(json.dumps(index, sort_keys=True, indent=2))

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "Wallet":
        directory = Path(directory)
        index = json.loads((directory / "index.json").read_text())
        wallet = cls(owner=Did.parse(index["owner"]))
        for kid, seed_hex in index["keys"].items():
            wallet.add_key(generate_key_pair(bytes.fromhex(seed_hex), key_id=kid))
        for name in index["credentials"].values():
            vc = VerifiableCredential.from_bytes((directory / name).read_bytes())
            wallet._store[vc.id] = vc
        return wallet


def transfer_credentials(
    source: Wallet,
    destination: Wallet,
    product: ProductRef,
    registry: Ledger,
    now: int,
) -> TransferReport:
    """Move all of a product's portable credentials to the new owner.

    Portable means product-subject or bearer: personal receipts whose
    subject is another DID stay with their subject. The source retains none
    of the moved credentials; when there is nothing to move the result is a
    no-op report.
    """
    movable = [
        vc
        for vc in source.credentials_for_product(product)
        if not isinstance(vc.subject, Did)
    ]
    for vc in movable:
        destination.store_credential(vc, registry, now)
    for vc in movable:
        source.remove(vc.id)
    return TransferReport(product=product, moved=tuple(vc.id for vc in movable))
