"""The verifiable data registry: an append-only, fee-charging transaction log.

Stores DID documents with full version history, anchored credential hashes,
and revocation status lists. A single committer serializes all writes;
committed transactions are never modified or removed, and replaying the
persisted log from genesis reproduces identical resolved state.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

from .clock import LogicalClock
from .errors import (
    AuthorizationError,
    InsufficientFundsError,
    NotFoundError,
    ValidationError,
)
from .identity import (
    CAP_ANCHOR_EVENT,
    Did,
    DidDocument,
    KeyPair,
    ProductRef,
    canonicalize,
    derive_did,
    sha256_hex,
    verify_signature,
)

KIND_CREATE_DID = "createDid"
KIND_UPDATE_DID = "updateDid"
KIND_DEACTIVATE_DID = "deactivateDid"
KIND_ANCHOR_HASH = "anchorHash"
KIND_STATUS_CREATE = "statusListCreate"
KIND_STATUS_UPDATE = "statusListUpdate"

TX_KINDS = (
    KIND_CREATE_DID,
    KIND_UPDATE_DID,
    KIND_DEACTIVATE_DID,
    KIND_ANCHOR_HASH,
    KIND_STATUS_CREATE,
    KIND_STATUS_UPDATE,
)

# Anchor labels keep passport-set registrations, lifecycle events, and
# ownership handoffs distinguishable for completeness audits.
ANCHOR_ORIGINAL = "dpp-original"
ANCHOR_EVENT = "event"
ANCHOR_TRANSFER = "transfer"

AnchorTarget = Union[Did, ProductRef]


@dataclass(frozen=True)
class FeeSchedule:
    """Token-denominated operation prices.

    Defaults mirror the reference network's pricing: 50 tokens to register a
    DID, 25 per document update, 10 to deactivate, 2.5 for status list
    creation or update, with tokens priced at 0.04 EUR (as of June 2024;
    the token price is a parameter because it can vary).
    """

    create_did: Decimal = Decimal("50")
    update_did: Decimal = Decimal("25")
    deactivate_did: Decimal = Decimal("10")
    status_list_create: Decimal = Decimal("2.5")
    status_list_update: Decimal = Decimal("2.5")
    anchor_hash: Decimal = Decimal("25")  # charged as a document update
    token_price_eur: Decimal = Decimal("0.04")

    def __post_init__(self) -> None:
        for name in (
            "create_did",
            "update_did",
            "deactivate_did",
            "status_list_create",
            "status_list_update",
            "anchor_hash",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"fee {name} must be non-negative")
        if self.token_price_eur <= 0:
            raise ValidationError("token price must be positive")

    def to_dict(self) -> dict:
        return {
            "createDid": str(self.create_did),
            "updateDid": str(self.update_did),
            "deactivateDid": str(self.deactivate_did),
            "statusListCreate": str(self.status_list_create),
            "statusListUpdate": str(self.status_list_update),
            "anchorHash": str(self.anchor_hash),
            "tokenPriceEur": str(self.token_price_eur),
        }

    @classmethod
    def from_dict(cls, body: Mapping[str, str]) -> "FeeSchedule":
        return cls(
            create_did=Decimal(body["createDid"]),
            update_did=Decimal(body["updateDid"]),
            deactivate_did=Decimal(body["deactivateDid"]),
            status_list_create=Decimal(body["statusListCreate"]),
            status_list_update=Decimal(body["statusListUpdate"]),
            anchor_hash=Decimal(body["anchorHash"]),
            token_price_eur=Decimal(body["tokenPriceEur"]),
        )


@dataclass
class Account:
    """Fee-paying account; the balance never goes negative."""

    did: Did
    balance: Decimal


@dataclass(frozen=True)
class LedgerTransaction:
    """One committed registry entry; gapless seq, never mutated."""

    seq: int
    time: int
    kind: str
    payload: Mapping[str, Any]
    fee: Decimal
    payer: str

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "time": self.time,
            "kind": self.kind,
            "payload": dict(self.payload),
            "fee": str(self.fee),
            "payer": self.payer,
        }

    def to_line(self) -> bytes:
        return canonicalize(self.to_record())

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "LedgerTransaction":
        return cls(
            seq=record["seq"],
            time=record["time"],
            kind=record["kind"],
            payload=record["payload"],
            fee=Decimal(record["fee"]),
            payer=record["payer"],
        )


@dataclass(frozen=True)
class Anchor:
    """A (target, digest) registration with its provenance."""

    target_key: str
    digest: str
    label: str
    time: int
    signer: str
    seq: int


def target_key(target: AnchorTarget) -> str:
    return str(target) if isinstance(target, Did) else target.key()


def _target_payload(target: AnchorTarget) -> dict:
    if isinstance(target, Did):
        return {"kind": "did", "did": str(target)}
    return target.to_dict()


def _target_from_payload(body: Mapping[str, Any]) -> AnchorTarget:
    if body["kind"] == "did":
        return Did.parse(body["did"])
    return ProductRef.from_dict(body)


class _StatusListState:
    """Registry-side view of one revocation bitstring."""

    __slots__ = ("issuer", "bits", "set_times")

    def __init__(self, issuer: str) -> None:
        self.issuer = issuer
        self.bits = bytearray()
        self.set_times: dict[int, int] = {}

    def bit(self, index: int) -> bool:
        byte, off = divmod(index, 8)
        if byte >= len(self.bits):
            return False
        return bool(self.bits[byte] & (1 << off))

    def set_indexes(self) -> set[int]:
        out = set()
        for i in range(len(self.bits) * 8):
            if self.bit(i):
                out.add(i)
        return out


class Ledger:
    """Single-node simulated registry with fee accounting.

    All mutating operations are serialized through one committer lock; reads
    see immutable committed state. When a ``path`` is attached, every
    committed transaction is appended to the file as one canonical-encoded
    line; the genesis line holds the fee schedule.
    """

    def __init__(
        self,
        fees: Optional[FeeSchedule] = None,
        clock: Optional[LogicalClock] = None,
        path: Optional[Union[str, Path]] = None,
    ) -> None:
        self.fees = fees or FeeSchedule()
        self.clock = clock or LogicalClock()
        self._lock = threading.Lock()
        self._txns: list[LedgerTransaction] = []
        self._accounts: dict[str, Account] = {}
        self._docs: dict[str, list[DidDocument]] = {}
        self._anchors: dict[str, list[Anchor]] = {}
        self._anchor_index: set[tuple[str, str]] = set()
        self._status: dict[str, _StatusListState] = {}
        self._key_owner: dict[str, str] = {}
        self._touching: dict[str, list[int]] = {}
        self._path: Optional[Path] = None
        if path is not None:
            self.attach(path)

    # -- persistence --------------------------------------------------------

    def attach(self, path: Union[str, Path]) -> None:
        """Start appending committed transactions to ``path``.

        Writes the genesis line when the file does not exist yet.
        """
        self._path = Path(path)
        if not self._path.exists() or self._path.stat().st_size == 0:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            genesis = canonicalize({"kind": "genesis", "fees": self.fees.to_dict()})
            with open(self._path, "wb") as fh:
                fh.write(genesis + b"\n")
                for tx in self._txns:
                    fh.write(tx.to_line() + b"\n")

    def _persist(self, tx: LedgerTransaction) -> None:
        if self._path is not None:
            with open(self._path, "ab") as fh:
                fh.write(tx.to_line() + b"\n")

    @classmethod
    def replay(cls, path: Union[str, Path], clock: Optional[LogicalClock] = None) -> "Ledger":
        """Rebuild a ledger from its persisted log, verifying as it goes.

        Checks gapless sequence numbers, byte-exact canonical encoding,
        payload signatures, authorization against the then-current state,
        and recorded fees against the genesis schedule.
        """
        import json as _json

        path = Path(path)
        lines = path.read_bytes().splitlines()
        if not lines:
            raise ValidationError(f"empty ledger file: {path}")
        genesis = _json.loads(lines[0])
        if genesis.get("kind") != "genesis":
            raise ValidationError("ledger file must start with a genesis line")
        ledger = cls(fees=FeeSchedule.from_dict(genesis["fees"]), clock=clock)
        if canonicalize(genesis) != lines[0]:
            raise ValidationError("genesis line is not canonical")
        for raw in lines[1:]:
            record = _json.loads(raw)
            tx = LedgerTransaction.from_record(record)
            if tx.to_line() != raw:
                raise ValidationError(f"transaction {record.get('seq')} is not canonical")
            if tx.seq != len(ledger._txns) + 1:
                raise ValidationError(f"sequence gap at {tx.seq}")
            expected_fee = ledger._expected_fee(tx.kind, tx.payload)
            if tx.fee != expected_fee:
                raise ValidationError(
                    f"transaction {tx.seq}: recorded fee {tx.fee} != schedule fee {expected_fee}"
                )
            ledger._apply(tx)
            ledger._txns.append(tx)
            ledger._index(tx)
        ledger.clock.now = max(ledger.clock.now, max((t.time for t in ledger._txns), default=0))
        return ledger

    # -- accounts ------------------------------------------------------------

    def open_account(self, did: Did, balance: Decimal) -> Account:
        if balance < 0:
            raise ValidationError("opening balance must be non-negative")
        account = Account(did=did, balance=Decimal(balance))
        self._accounts[str(did)] = account
        return account

    def account(self, did: Did) -> Account:
        try:
            return self._accounts[str(did)]
        except KeyError:
            raise NotFoundError(f"no account for {did}") from None

    def total_fees(self) -> Decimal:
        return sum((tx.fee for tx in self._txns), Decimal(0))

    # -- reads ---------------------------------------------------------------

    @property
    def transactions(self) -> tuple[LedgerTransaction, ...]:
        return tuple(self._txns)

    def has_did(self, did: Did) -> bool:
        return str(did) in self._docs

    def resolve_did(self, did: Did) -> DidDocument:
        versions = self._docs.get(str(did))
        if not versions:
            raise NotFoundError(f"unknown DID: {did}")
        return versions[-1]

    def document_versions(self, did: Did) -> tuple[DidDocument, ...]:
        versions = self._docs.get(str(did))
        if not versions:
            raise NotFoundError(f"unknown DID: {did}")
        return tuple(versions)

    def owner_history(self, did: Did) -> tuple[Did, ...]:
        """Controller sequence across versions; duplicates collapsed."""
        out: list[Did] = []
        for doc in self.document_versions(did):
            if not out or out[-1] != doc.controller:
                out.append(doc.controller)
        return tuple(out)

    def history(self, target: AnchorTarget) -> tuple[LedgerTransaction, ...]:
        key = target_key(target)
        seqs = self._touching.get(key)
        if not seqs:
            raise NotFoundError(f"nothing on ledger for {key}")
        return tuple(self._txns[i - 1] for i in seqs)

    def anchors(self, target: AnchorTarget) -> tuple[Anchor, ...]:
        return tuple(self._anchors.get(target_key(target), ()))

    def find_dids_by_gtin(self, gtin: str) -> tuple[Did, ...]:
        """Linear scan across documents, matching the alsoKnownAs link."""
        out = []
        for versions in self._docs.values():
            doc = versions[-1]
            if doc.also_known_as == gtin:
                out.append(doc.id)
        return tuple(sorted(out, key=str))

    def find_controlled_products(self, controller: Did) -> tuple[Did, ...]:
        """Product documents (GTIN-linked) currently controlled by a DID."""
        out = []
        for versions in self._docs.values():
            doc = versions[-1]
            if doc.also_known_as is not None and doc.controller == controller:
                out.append(doc.id)
        return tuple(sorted(out, key=str))

    def key_owner(self, public_hex: str) -> Optional[Did]:
        owner = self._key_owner.get(public_hex)
        return Did.parse(owner) if owner else None

    def status_list_exists(self, list_id: str) -> bool:
        return list_id in self._status

    def status_list_issuer(self, list_id: str) -> Did:
        state = self._status.get(list_id)
        if state is None:
            raise NotFoundError(f"unknown status list: {list_id}")
        return Did.parse(state.issuer)

    def status_bit(self, list_id: str, index: int) -> bool:
        state = self._status.get(list_id)
        if state is None:
            raise NotFoundError(f"unknown status list: {list_id}")
        return state.bit(index)

    def status_bits(self, list_id: str) -> bytes:
        state = self._status.get(list_id)
        if state is None:
            raise NotFoundError(f"unknown status list: {list_id}")
        return bytes(state.bits)

    def revocation_time(self, list_id: str, index: int) -> Optional[int]:
        state = self._status.get(list_id)
        if state is None:
            raise NotFoundError(f"unknown status list: {list_id}")
        return state.set_times.get(index)

    def transcript_digest(self) -> str:
        """Digest over the canonical genesis and transaction lines."""
        import hashlib

        h = hashlib.sha256()
        h.update(canonicalize({"kind": "genesis", "fees": self.fees.to_dict()}) + b"\n")
        for tx in self._txns:
            h.update(tx.to_line() + b"\n")
        return h.hexdigest()

    def state_digest(self) -> str:
        """Digest of the resolved registry state (documents, anchors, lists)."""
        state = {
            "documents": {
                did: [doc.to_dict() for doc in versions] for did, versions in self._docs.items()
            },
            "anchors": {
                key: [[a.digest, a.label, a.time, a.signer] for a in items]
                for key, items in self._anchors.items()
            },
            "statusLists": {
                list_id: {"issuer": st.issuer, "bits": bytes(st.bits).hex()}
                for list_id, st in self._status.items()
            },
        }
        return sha256_hex(canonicalize(state))

    # -- shared validation / application -------------------------------------

    def _expected_fee(self, kind: str, payload: Mapping[str, Any]) -> Decimal:
        if kind == KIND_CREATE_DID:
            return self.fees.create_did
        if kind == KIND_UPDATE_DID:
            return self.fees.update_did
        if kind == KIND_DEACTIVATE_DID:
            return self.fees.deactivate_did
        if kind == KIND_ANCHOR_HASH:
            if payload["target"]["kind"] == "did":
                return self.fees.anchor_hash
            return self.fees.status_list_update
        if kind == KIND_STATUS_CREATE:
            return self.fees.status_list_create
        if kind == KIND_STATUS_UPDATE:
            return self.fees.status_list_update
        raise ValidationError(f"unknown transaction kind: {kind}")

    def _signing_bytes(self, kind: str, time: int, body: Mapping[str, Any]) -> bytes:
        return canonicalize({"kind": kind, "time": time, "body": body})

    def _controller_keys(self, controller: Did, *, bootstrap: Optional[DidDocument] = None) -> set[str]:
        if bootstrap is not None and controller == bootstrap.id:
            return bootstrap.key_hexes()
        versions = self._docs.get(str(controller))
        if not versions:
            raise AuthorizationError(f"controller {controller} has no registered document")
        doc = versions[-1]
        if doc.deactivated:
            raise AuthorizationError(f"controller {controller} is deactivated")
        return doc.key_hexes()

    def _check_payload_signature(self, tx_kind: str, time: int, payload: Mapping[str, Any]) -> None:
        body = {k: v for k, v in payload.items() if k != "signature"}
        if not verify_signature(
            self._signing_bytes(tx_kind, time, body),
            bytes.fromhex(payload["signature"]),
            bytes.fromhex(payload["signerKey"]),
        ):
            raise AuthorizationError("payload signature does not verify")

    def _apply(self, tx: LedgerTransaction) -> None:
        """Validate a transaction against current state and apply it.

        Used identically on first commit and on replay, so authorization
        soundness is re-checked whenever the log is replayed.
        """
        kind, payload, time = tx.kind, tx.payload, tx.time
        if kind == KIND_CREATE_DID:
            doc = DidDocument.from_dict(payload["doc"])
            self._check_payload_signature(kind, time, payload)
            if str(doc.id) in self._docs:
                raise ValidationError(f"DID already exists: {doc.id}")
            if doc.version_id != 1:
                raise ValidationError("initial document must have versionId 1")
            if doc.deactivated:
                raise ValidationError("cannot create a deactivated document")
            if not doc.verification_methods:
                raise ValidationError("document needs at least one verification method")
            first_key = bytes.fromhex(doc.verification_methods[0][1])
            if derive_did(first_key, method=doc.id.method) != doc.id:
                raise ValidationError("document id is not derived from its first key")
            signer_key = payload["signerKey"]
            if signer_key not in self._controller_keys(doc.controller, bootstrap=doc):
                raise AuthorizationError("createDid signer is not a controller key")
            self._docs[str(doc.id)] = [doc]
            for _, pub in doc.verification_methods:
                self._key_owner.setdefault(pub, str(doc.id))
        elif kind == KIND_UPDATE_DID:
            new_doc = DidDocument.from_dict(payload["doc"])
            self._check_payload_signature(kind, time, payload)
            versions = self._docs.get(str(new_doc.id))
            if not versions:
                raise NotFoundError(f"unknown DID: {new_doc.id}")
            current = versions[-1]
            if current.deactivated:
                raise ValidationError(f"document is deactivated: {new_doc.id}")
            if new_doc.version_id != current.version_id + 1:
                raise ValidationError(
                    f"stale versionId {new_doc.version_id}; current is {current.version_id}"
                )
            if payload["signerKey"] not in self._controller_keys(current.controller):
                raise AuthorizationError("signer is not a key of the current controller")
            versions.append(new_doc)
            for _, pub in new_doc.verification_methods:
                self._key_owner.setdefault(pub, str(new_doc.id))
        elif kind == KIND_DEACTIVATE_DID:
            did = Did.parse(payload["did"])
            self._check_payload_signature(kind, time, payload)
            versions = self._docs.get(str(did))
            if not versions:
                raise NotFoundError(f"unknown DID: {did}")
            current = versions[-1]
            if current.deactivated:
                raise ValidationError(f"already deactivated: {did}")
            if payload["signerKey"] not in self._controller_keys(current.controller):
                raise AuthorizationError("signer is not a key of the current controller")
            versions.append(current.next_version(deactivated=True))
        elif kind == KIND_ANCHOR_HASH:
            self._check_payload_signature(kind, time, payload)
            target = _target_from_payload(payload["target"])
            key = target_key(target)
            digest = payload["digest"]
            signer_key = payload["signerKey"]
            signer = payload["signer"]
            if isinstance(target, Did):
                versions = self._docs.get(str(target))
                if not versions:
                    raise NotFoundError(f"unknown DID: {target}")
                current = versions[-1]
                authorized = False
                try:
                    if signer_key in self._controller_keys(current.controller):
                        authorized = True
                except AuthorizationError:
                    authorized = False
                consumed = None
                if not authorized:
                    for delegate_did, cap in current.delegations:
                        if cap != CAP_ANCHOR_EVENT or delegate_did != signer:
                            continue
                        delegate_doc = self._docs.get(delegate_did)
                        if delegate_doc and signer_key in delegate_doc[-1].key_hexes():
                            authorized = True
                            consumed = (delegate_did, cap)
                            break
                if not authorized:
                    raise AuthorizationError(
                        "anchor signer is neither controller nor anchor-event delegate"
                    )
                if consumed is not None:
                    # Delegations are single-use: consumed by the anchor they
                    # authorize, deterministically on replay as well.
                    remaining = tuple(d for d in current.delegations if d != consumed)
                    versions[-1] = DidDocument.from_dict(
                        {**current.to_dict(), "delegations": [list(d) for d in remaining]}
                    )
            else:
                owner = self._key_owner.get(signer_key)
                if owner is None or owner != signer:
                    raise AuthorizationError("anchor signer is not a registered agent key")
            anchor = Anchor(
                target_key=key,
                digest=digest,
                label=payload.get("label", ANCHOR_EVENT),
                time=time,
                signer=signer,
                seq=tx.seq,
            )
            self._anchors.setdefault(key, []).append(anchor)
            self._anchor_index.add((key, digest))
        elif kind == KIND_STATUS_CREATE:
            self._check_payload_signature(kind, time, payload)
            list_id = payload["id"]
            if list_id in self._status:
                raise ValidationError(f"status list already exists: {list_id}")
            issuer = Did.parse(payload["issuer"])
            if payload["signerKey"] not in self._controller_keys(issuer):
                raise AuthorizationError("status list creator must sign with the issuer's key")
            self._status[list_id] = _StatusListState(issuer=str(issuer))
        elif kind == KIND_STATUS_UPDATE:
            self._check_payload_signature(kind, time, payload)
            list_id = payload["id"]
            state = self._status.get(list_id)
            if state is None:
                raise NotFoundError(f"unknown status list: {list_id}")
            if payload["signerKey"] not in self._controller_keys(Did.parse(state.issuer)):
                raise AuthorizationError("status list update must be signed by its issuer")
            new_bits = bytearray(bytes.fromhex(payload["bits"]))
            if len(new_bits) < len(state.bits):
                raise ValidationError("status list bits may only grow")
            old_set = state.set_indexes()
            state_before = bytes(state.bits)
            state.bits = new_bits
            new_set = state.set_indexes()
            if not old_set <= new_set:
                state.bits = bytearray(state_before)
                raise ValidationError("a set status bit is never cleared")
            for idx in new_set - old_set:
                state.set_times[idx] = time
        else:
            raise ValidationError(f"unknown transaction kind: {kind}")

    def _index(self, tx: LedgerTransaction) -> None:
        keys: list[str] = []
        payload = tx.payload
        if tx.kind in (KIND_CREATE_DID, KIND_UPDATE_DID):
            keys.append(payload["doc"]["id"])
        elif tx.kind == KIND_DEACTIVATE_DID:
            keys.append(payload["did"])
        elif tx.kind == KIND_ANCHOR_HASH:
            keys.append(target_key(_target_from_payload(payload["target"])))
        elif tx.kind in (KIND_STATUS_CREATE, KIND_STATUS_UPDATE):
            keys.append(payload["id"])
        for key in keys:
            self._touching.setdefault(key, []).append(tx.seq)

    # -- commit path ----------------------------------------------------------

    def _commit(
        self,
        kind: str,
        body: dict,
        signer: KeyPair,
        signer_did: Did,
        payer: Account,
    ) -> LedgerTransaction:
        with self._lock:
            fee_payload_probe = dict(body)
            fee = self._expected_fee(kind, fee_payload_probe)
            if payer.balance < fee:
                raise InsufficientFundsError(
                    f"{payer.did} balance {payer.balance} cannot cover fee {fee}"
                )
            time = self.clock.tick()
            payload = dict(body)
            payload["signer"] = str(signer_did)
            payload["signerKey"] = signer.public_hex
            payload["signature"] = signer.sign(
                self._signing_bytes(kind, time, {k: v for k, v in payload.items()})
            ).hex()
            tx = LedgerTransaction(
                seq=len(self._txns) + 1,
                time=time,
                kind=kind,
                payload=payload,
                fee=fee,
                payer=str(payer.did),
            )
            self._apply(tx)
            payer.balance -= fee
            self._txns.append(tx)
            self._index(tx)
            self._persist(tx)
            return tx

    # -- operations -----------------------------------------------------------

    def create_did(self, doc: DidDocument, payer: Account, signer: KeyPair) -> LedgerTransaction:
        """Register a fresh DID with its custom initial document."""
        return self._commit(
            KIND_CREATE_DID,
            {"doc": doc.to_dict()},
            signer=signer,
            signer_did=doc.controller,
            payer=payer,
        )

    def update_did_document(
        self,
        did: Did,
        new_doc: DidDocument,
        signer: KeyPair,
        payer: Account,
        signer_did: Optional[Did] = None,
    ) -> LedgerTransaction:
        """Store a new document version, controller-authorized."""
        if new_doc.id != did:
            raise ValidationError("document id must match the DID being updated")
        current = self.resolve_did(did)
        return self._commit(
            KIND_UPDATE_DID,
            {"doc": new_doc.to_dict()},
            signer=signer,
            signer_did=signer_did or current.controller,
            payer=payer,
        )

    def deactivate_did(
        self, did: Did, signer: KeyPair, payer: Account, signer_did: Optional[Did] = None
    ) -> LedgerTransaction:
        current = self.resolve_did(did)
        return self._commit(
            KIND_DEACTIVATE_DID,
            {"did": str(did)},
            signer=signer,
            signer_did=signer_did or current.controller,
            payer=payer,
        )

    def anchor_hash(
        self,
        target: AnchorTarget,
        digest: str,
        signer: KeyPair,
        signer_did: Did,
        payer: Account,
        label: str = ANCHOR_EVENT,
    ) -> LedgerTransaction:
        """Register a credential digest against a product DID or ProductRef.

        Re-anchoring the same digest for the same target is an idempotent
        no-op: the existing transaction is returned and no fee is charged.
        """
        key = target_key(target)
        if (key, digest) in self._anchor_index:
            for tx in self._txns:
                if (
                    tx.kind == KIND_ANCHOR_HASH
                    and tx.payload["digest"] == digest
                    and target_key(_target_from_payload(tx.payload["target"])) == key
                ):
                    return tx
        return self._commit(
            KIND_ANCHOR_HASH,
            {"target": _target_payload(target), "digest": digest, "label": label},
            signer=signer,
            signer_did=signer_did,
            payer=payer,
        )

    def status_list_create(
        self, list_id: str, issuer: Did, signer: KeyPair, payer: Account
    ) -> LedgerTransaction:
        return self._commit(
            KIND_STATUS_CREATE,
            {"id": list_id, "issuer": str(issuer)},
            signer=signer,
            signer_did=issuer,
            payer=payer,
        )

    def status_list_update(
        self, list_id: str, bits: bytes, signer: KeyPair, payer: Account
    ) -> LedgerTransaction:
        issuer = self.status_list_issuer(list_id)
        return self._commit(
            KIND_STATUS_UPDATE,
            {"id": list_id, "bits": bits.hex(), "digest": sha256_hex(bits)},
            signer=signer,
            signer_did=issuer,
            payer=payer,
        )
