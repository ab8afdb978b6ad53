import random
from decimal import Decimal

import pytest

from dppkit.clock import LogicalClock
from dppkit.errors import (
    AuthorizationError,
    InsufficientFundsError,
    NotFoundError,
    ValidationError,
)
from dppkit.identity import (
    CAP_ANCHOR_EVENT,
    Gtin,
    ProductRef,
    derive_did,
    generate_key_pair,
    new_document,
)
from dppkit.registry import (
    ANCHOR_EVENT,
    FeeSchedule,
    Ledger,
    LedgerTransaction,
)

from conftest import GTIN_A, seed


def make_identity(n: int):
    keys = generate_key_pair(seed(n))
    return keys, derive_did(keys.public_key)


def register_agent(ledger: Ledger, n: int, balance="1000"):
    keys, did = make_identity(n)
    account = ledger.open_account(did, Decimal(balance))
    doc = new_document(did, controller=did, keys=[keys])
    ledger.create_did(doc, payer=account, signer=keys)
    return keys, did, account


def register_product(ledger: Ledger, owner_keys, owner_did, owner_account, n: int, serial="S1"):
    product_keys = generate_key_pair(seed(n), key_id="product-key")
    product_did = derive_did(product_keys.public_key)
    doc = new_document(
        product_did,
        controller=owner_did,
        keys=[product_keys],
        also_known_as=GTIN_A,
        attributes={"granularity": "item", "serial": serial},
    )
    ledger.create_did(doc, payer=owner_account, signer=owner_keys)
    return product_did


class TestFeeSchedule:
    def test_defaults(self):
        fees = FeeSchedule()
        assert fees.create_did == Decimal("50")
        assert fees.update_did == Decimal("25")
        assert fees.deactivate_did == Decimal("10")
        assert fees.status_list_create == Decimal("2.5")
        assert fees.status_list_update == Decimal("2.5")
        assert fees.token_price_eur == Decimal("0.04")

    def test_deactivation_price_matches_published_eur_figure(self):
        # 0.40 EUR at 0.04 EUR per token.
        fees = FeeSchedule()
        assert fees.deactivate_did * fees.token_price_eur == Decimal("0.40")

    def test_negative_fee_rejected(self):
        with pytest.raises(ValidationError):
            FeeSchedule(create_did=Decimal("-1"))
        with pytest.raises(ValidationError):
            FeeSchedule(token_price_eur=Decimal("0"))

    def test_dict_roundtrip(self):
        fees = FeeSchedule()
        assert FeeSchedule.from_dict(fees.to_dict()) == fees


class TestCreateResolve:
    def test_create_debits_fee(self, ledger):
        keys, did = make_identity(1)
        account = ledger.open_account(did, Decimal("100"))
        ledger.create_did(new_document(did, did, [keys]), payer=account, signer=keys)
        assert account.balance == Decimal("50")
        assert ledger.resolve_did(did).version_id == 1

    def test_duplicate_rejected(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        with pytest.raises(ValidationError):
            ledger.create_did(new_document(did, did, [keys]), payer=account, signer=keys)

    def test_insufficient_funds_leaves_ledger_unchanged(self, ledger):
        keys, did = make_identity(1)
        account = ledger.open_account(did, Decimal("49.9"))
        before = len(ledger.transactions)
        with pytest.raises(InsufficientFundsError):
            ledger.create_did(new_document(did, did, [keys]), payer=account, signer=keys)
        assert len(ledger.transactions) == before
        assert account.balance == Decimal("49.9")

    def test_unknown_did_not_found(self, ledger):
        _, did = make_identity(2)
        with pytest.raises(NotFoundError):
            ledger.resolve_did(did)

    def test_id_must_derive_from_first_key(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        other_keys, _ = make_identity(2)
        bad = new_document(derive_did(other_keys.public_key), controller=did, keys=[keys])
        with pytest.raises(ValidationError):
            ledger.create_did(bad, payer=account, signer=keys)

    def test_custom_initial_document_in_same_transaction(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        product = register_product(ledger, keys, did, account, 3)
        doc = ledger.resolve_did(product)
        assert doc.also_known_as == GTIN_A
        assert doc.attributes["granularity"] == "item"


class TestUpdate:
    def test_controller_updates_services(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        current = ledger.resolve_did(did)
        ledger.update_did_document(
            did, current.next_version(services=(("wallet", "local:1"),)), keys, account
        )
        resolved = ledger.resolve_did(did)
        assert resolved.version_id == 2
        assert resolved.services == (("wallet", "local:1"),)

    def test_previous_owner_cannot_update_after_controller_change(self, ledger):
        seller_keys, seller_did, seller_acct = register_agent(ledger, 1)
        buyer_keys, buyer_did, buyer_acct = register_agent(ledger, 2)
        product = register_product(ledger, seller_keys, seller_did, seller_acct, 3)
        current = ledger.resolve_did(product)
        ledger.update_did_document(
            product, current.next_version(controller=buyer_did), seller_keys, seller_acct
        )
        stale = ledger.resolve_did(product)
        with pytest.raises(AuthorizationError):
            ledger.update_did_document(
                product,
                stale.next_version(controller=seller_did),
                seller_keys,
                seller_acct,
            )

    def test_stale_version_rejected(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        current = ledger.resolve_did(did)
        ledger.update_did_document(did, current.next_version(), keys, account)
        with pytest.raises(ValidationError):
            ledger.update_did_document(did, current.next_version(), keys, account)

    def test_delegate_cannot_change_controller(self, ledger):
        owner_keys, owner_did, owner_acct = register_agent(ledger, 1)
        shop_keys, shop_did, shop_acct = register_agent(ledger, 2)
        product = register_product(ledger, owner_keys, owner_did, owner_acct, 3)
        current = ledger.resolve_did(product)
        ledger.update_did_document(
            product,
            current.next_version(delegations=((str(shop_did), CAP_ANCHOR_EVENT),)),
            owner_keys,
            owner_acct,
        )
        with_delegation = ledger.resolve_did(product)
        with pytest.raises(AuthorizationError):
            ledger.update_did_document(
                product,
                with_delegation.next_version(controller=shop_did),
                shop_keys,
                shop_acct,
            )

    def test_prior_versions_remain_queryable(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        current = ledger.resolve_did(did)
        ledger.update_did_document(
            did, current.next_version(services=(("a", "b"),)), keys, account
        )
        versions = ledger.document_versions(did)
        assert [v.version_id for v in versions] == [1, 2]
        assert versions[0].services == ()


class TestDeactivate:
    def test_deactivate_then_resolve(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        ledger.deactivate_did(did, keys, account)
        assert ledger.resolve_did(did).deactivated is True

    def test_fee_is_ten_tokens(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        before = account.balance
        tx = ledger.deactivate_did(did, keys, account)
        assert tx.fee == Decimal("10")
        assert before - account.balance == Decimal("10")

    def test_update_after_deactivation_rejected(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        ledger.deactivate_did(did, keys, account)
        current = ledger.resolve_did(did)
        with pytest.raises(ValidationError):
            ledger.update_did_document(did, current.next_version(), keys, account)

    def test_non_controller_rejected(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        other_keys, _, other_acct = register_agent(ledger, 2)
        with pytest.raises(AuthorizationError):
            ledger.deactivate_did(did, other_keys, other_acct)

    def test_double_deactivation_rejected(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        ledger.deactivate_did(did, keys, account)
        with pytest.raises(ValidationError):
            ledger.deactivate_did(did, keys, account)


class TestAnchors:
    def test_delegate_anchors_event_hash(self, ledger):
        owner_keys, owner_did, owner_acct = register_agent(ledger, 1)
        shop_keys, shop_did, shop_acct = register_agent(ledger, 2)
        product = register_product(ledger, owner_keys, owner_did, owner_acct, 3)
        current = ledger.resolve_did(product)
        ledger.update_did_document(
            product,
            current.next_version(delegations=((str(shop_did), CAP_ANCHOR_EVENT),)),
            owner_keys,
            owner_acct,
        )
        tx = ledger.anchor_hash(product, "ab" * 32, shop_keys, shop_did, shop_acct)
        assert tx.fee == Decimal("25")
        anchors = ledger.anchors(product)
        assert len(anchors) == 1 and anchors[0].digest == "ab" * 32
        # single-use: the delegation is consumed by the anchor
        assert ledger.resolve_did(product).delegations == ()
        with pytest.raises(AuthorizationError):
            ledger.anchor_hash(product, "cd" * 32, shop_keys, shop_did, shop_acct)

    def test_same_digest_twice_is_single_entry_no_fee(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        product = register_product(ledger, keys, did, account, 3)
        ledger.anchor_hash(product, "ab" * 32, keys, did, account)
        balance = account.balance
        count = len(ledger.transactions)
        tx = ledger.anchor_hash(product, "ab" * 32, keys, did, account)
        assert len(ledger.transactions) == count
        assert account.balance == balance
        assert tx.payload["digest"] == "ab" * 32

    def test_unauthorized_anchor_rejected(self, ledger):
        owner_keys, owner_did, owner_acct = register_agent(ledger, 1)
        other_keys, other_did, other_acct = register_agent(ledger, 2)
        product = register_product(ledger, owner_keys, owner_did, owner_acct, 3)
        with pytest.raises(AuthorizationError):
            ledger.anchor_hash(product, "ab" * 32, other_keys, other_did, other_acct)

    def test_product_ref_anchor_by_any_registered_agent(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        ref = ProductRef(Gtin(GTIN_A), "S7")
        tx = ledger.anchor_hash(ref, "ee" * 32, keys, did, account)
        assert tx.fee == Decimal("2.5")
        assert ledger.anchors(ref)[0].signer == str(did)

    def test_product_ref_anchor_by_unregistered_key_rejected(self, ledger):
        register_agent(ledger, 1)
        rogue = generate_key_pair(seed(99))
        rogue_did = derive_did(rogue.public_key)
        account = ledger.open_account(rogue_did, Decimal("100"))
        with pytest.raises(AuthorizationError):
            ledger.anchor_hash(ProductRef(Gtin(GTIN_A), "S7"), "ff" * 32, rogue, rogue_did, account)


class TestHistory:
    def test_controller_sequence_is_ownership_history(self, ledger):
        a_keys, a_did, a_acct = register_agent(ledger, 1)
        _, b_did, _ = register_agent(ledger, 2)
        b_keys = generate_key_pair(seed(2))
        _, c_did, _ = register_agent(ledger, 3)
        product = register_product(ledger, a_keys, a_did, a_acct, 4)
        doc = ledger.resolve_did(product)
        ledger.update_did_document(product, doc.next_version(controller=b_did), a_keys, a_acct)
        doc = ledger.resolve_did(product)
        ledger.update_did_document(
            product, doc.next_version(controller=c_did), b_keys, ledger.account(b_did)
        )
        assert ledger.owner_history(product) == (a_did, b_did, c_did)

    def test_two_anchors_appear_in_history(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        product = register_product(ledger, keys, did, account, 3)
        ledger.anchor_hash(product, "aa" * 32, keys, did, account)
        ledger.anchor_hash(product, "bb" * 32, keys, did, account)
        kinds = [tx.kind for tx in ledger.history(product)]
        assert kinds.count("anchorHash") == 2

    def test_unknown_target_not_found(self, ledger):
        with pytest.raises(NotFoundError):
            ledger.history(ProductRef(Gtin(GTIN_A), "nope"))

    def test_history_is_prefix_stable_under_random_ops(self, ledger):
        rng = random.Random(42)
        keys, did, account = register_agent(ledger, 1, balance="100000")
        product = register_product(ledger, keys, did, account, 3)
        snapshots = []
        for step in range(30):
            op = rng.choice(["anchor", "update", "noop"])
            if op == "anchor":
                ledger.anchor_hash(product, rng.randbytes(32).hex(), keys, did, account)
            elif op == "update":
                current = ledger.resolve_did(product)
                ledger.update_did_document(
                    product,
                    current.next_version(services=(("s", str(step)),)),
                    keys,
                    account,
                )
            history = [tx.seq for tx in ledger.history(product)]
            if snapshots:
                assert history[: len(snapshots[-1])] == snapshots[-1]
            snapshots.append(history)


class TestInvariants:
    def test_append_only_prefix_property(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        before = [tx.to_line() for tx in ledger.transactions]
        register_product(ledger, keys, did, account, 3)
        after = [tx.to_line() for tx in ledger.transactions]
        assert after[: len(before)] == before

    def test_fee_conservation(self, ledger):
        keys, did, account = register_agent(ledger, 1, balance="500")
        product = register_product(ledger, keys, did, account, 3)
        ledger.anchor_hash(product, "aa" * 32, keys, did, account)
        ledger.deactivate_did(product, keys, account)
        removed = Decimal("500") - account.balance
        assert ledger.total_fees() == removed

    def test_seq_gapless(self, ledger):
        keys, did, account = register_agent(ledger, 1)
        register_product(ledger, keys, did, account, 3)
        assert [tx.seq for tx in ledger.transactions] == list(
            range(1, len(ledger.transactions) + 1)
        )


class TestReplay:
    def build_scenario(self, path):
        clock = LogicalClock()
        ledger = Ledger(FeeSchedule(), clock, path=path)
        keys, did, account = register_agent(ledger, 1)
        shop_keys, shop_did, shop_acct = register_agent(ledger, 2)
        product = register_product(ledger, keys, did, account, 3)
        current = ledger.resolve_did(product)
        ledger.update_did_document(
            product,
            current.next_version(delegations=((str(shop_did), CAP_ANCHOR_EVENT),)),
            keys,
            account,
        )
        ledger.anchor_hash(product, "ab" * 32, shop_keys, shop_did, shop_acct)
        ledger.anchor_hash(ProductRef(Gtin(GTIN_A), "S9"), "cd" * 32, keys, did, account)
        ledger.deactivate_did(shop_did, shop_keys, shop_acct)
        return ledger

    def test_replay_reproduces_state_and_transcript(self, tmp_path):
        path = tmp_path / "ledger.ndjson"
        original = self.build_scenario(path)
        replayed = Ledger.replay(path)
        assert replayed.state_digest() == original.state_digest()
        assert replayed.transcript_digest() == original.transcript_digest()
        assert len(replayed.transactions) == len(original.transactions)

    def test_replayed_ledger_supports_further_writes(self, tmp_path):
        path = tmp_path / "ledger.ndjson"
        original = self.build_scenario(path)
        replayed = Ledger.replay(path)
        keys, did = make_identity(1)
        account = replayed.open_account(did, Decimal("100"))
        product_did = ProductRef(Gtin(GTIN_A), "S9")
        tx = replayed.anchor_hash(product_did, "ef" * 32, keys, did, account)
        assert tx.time > max(t.time for t in original.transactions)

    def test_tampered_line_detected(self, tmp_path):
        path = tmp_path / "ledger.ndjson"
        self.build_scenario(path)
        lines = path.read_bytes().splitlines()
        tampered = lines[:]
        tampered[2] = tampered[2].replace(b'"fee":"50"', b'"fee":"49"', 1)
        path.write_bytes(b"\n".join(tampered) + b"\n")
        with pytest.raises(ValidationError):
            Ledger.replay(path)

    def test_forged_signature_detected(self, tmp_path):
        path = tmp_path / "ledger.ndjson"
        self.build_scenario(path)
        lines = path.read_bytes().splitlines()
        import json

        record = json.loads(lines[3])
        sig = record["payload"]["signature"]
        record["payload"]["signature"] = ("0" if sig[0] != "0" else "1") + sig[1:]
        from dppkit.identity import canonicalize

        lines[3] = canonicalize(record)
        path.write_bytes(b"\n".join(lines) + b"\n")
        with pytest.raises((AuthorizationError, ValidationError)):
            Ledger.replay(path)
