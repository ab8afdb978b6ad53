import hashlib

import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey
from hypothesis import given, settings
from hypothesis import strategies as st

from dppkit.errors import ValidationError
from dppkit.identity import (
    Did,
    DidDocument,
    Gtin,
    ProductRef,
    base58_encode,
    canonicalize,
    derive_did,
    generate_key_pair,
    gtin_check_digit,
    validate_gtin,
    verify_signature,
)

ZERO_SEED = bytes(32)

# Frozen determinism fixture: the Ed25519 public key for an all-zero seed.
ZERO_SEED_PUBLIC_HEX = "3b6a27bcceb6a42d62a3a8d02a6f0d73653215771de243a63ac048a18b59da29"


class TestKeyPairs:
    def test_zero_seed_is_reproducible(self):
        pair = generate_key_pair(ZERO_SEED)
        again = generate_key_pair(ZERO_SEED)
        assert pair.public_hex == ZERO_SEED_PUBLIC_HEX
        assert again.public_hex == pair.public_hex
        assert pair.sign(b"x") == again.sign(b"x")

    def test_distinct_seeds_distinct_keys(self):
        a = generate_key_pair(bytes([1]) * 32)
        b = generate_key_pair(bytes([2]) * 32)
        assert a.public_key != b.public_key

    def test_sign_verify_roundtrip_against_scheme_oracle(self):
        # Oracle: the signature scheme's own verifier, invoked directly.
        pair = generate_key_pair(bytes([7]) * 32)
        signature = pair.sign(b"dpp")
        Ed25519PublicKey.from_public_bytes(pair.public_key).verify(signature, b"dpp")
        assert verify_signature(b"dpp", signature, pair.public_key)

    def test_signing_is_deterministic(self):
        pair = generate_key_pair(bytes([9]) * 32)
        assert pair.sign(b"message") == pair.sign(b"message")

    @pytest.mark.parametrize("bad", [b"", b"short", bytes(31), bytes(33)])
    def test_wrong_seed_length_rejected(self, bad):
        with pytest.raises(ValidationError):
            generate_key_pair(bad)

    def test_mutated_message_or_signature_fails(self):
        pair = generate_key_pair(bytes([3]) * 32)
        message = b"tamper evident payload"
        signature = pair.sign(message)
        for i in range(len(message)):
            mutated = bytearray(message)
            mutated[i] ^= 0x01
            assert not verify_signature(bytes(mutated), signature, pair.public_key)
        for i in range(0, len(signature), 7):
            mutated = bytearray(signature)
            mutated[i] ^= 0x01
            assert not verify_signature(message, bytes(mutated), pair.public_key)


class TestDeriveDid:
    def test_pure_function(self):
        pair = generate_key_pair(bytes([5]) * 32)
        assert derive_did(pair.public_key) == derive_did(pair.public_key)

    def test_one_byte_difference_changes_did(self):
        # Oracle: the digests of the two inputs differ, so the encodings must.
        key = bytearray(generate_key_pair(bytes([6]) * 32).public_key)
        other = bytearray(key)
        other[0] ^= 0x01
        assert hashlib.sha256(bytes(key)).digest() != hashlib.sha256(bytes(other)).digest()
        assert derive_did(bytes(key)) != derive_did(bytes(other))

    def test_rendered_prefix(self):
        pair = generate_key_pair(bytes([8]) * 32)
        assert str(derive_did(pair.public_key, method="dppkit")).startswith("did:dppkit:")

    def test_no_collisions_across_many_keys(self):
        seen = set()
        for i in range(10_000):
            did = derive_did(hashlib.sha256(i.to_bytes(4, "big")).digest())
            assert did not in seen
            seen.add(did)

    def test_base58_matches_digest(self):
        pair = generate_key_pair(bytes([4]) * 32)
        digest = hashlib.sha256(pair.public_key).digest()
        assert derive_did(pair.public_key).method_specific_id == base58_encode(digest)


class TestDid:
    def test_render_three_parts(self):
        did = Did("dppkit", "abc123")
        assert str(did) == "did:dppkit:abc123"
        assert Did.parse(str(did)) == did

    @pytest.mark.parametrize("bad", ["did:dppkit", "dppkit:abc", "did:dppkit:a:b", "did::x"])
    def test_parse_rejects_malformed(self, bad):
        with pytest.raises(ValidationError):
            Did.parse(bad)

    @pytest.mark.parametrize("msid", ["", "a:b", "a b", "a\tb"])
    def test_invalid_method_specific_id(self, msid):
        with pytest.raises(ValidationError):
            Did("dppkit", msid)

    def test_uppercase_method_rejected(self):
        with pytest.raises(ValidationError):
            Did("DPPKit", "abc")


class TestCanonicalize:
    def test_key_order_independence(self):
        assert canonicalize({"b": 1, "a": 2}) == canonicalize({"a": 2, "b": 1})

    def test_empty_map_is_two_bytes(self):
        assert canonicalize({}) == b"{}"
        assert len(canonicalize({})) == 2

    def test_nested_fixture_matches_hand_encoding(self):
        value = {
            "product": {"gtin": "4006381333931", "serial": "SN-1"},
            "claims": {"materials": ["steel", "rubber"], "mass_g": 120},
            "v": 1,
        }
        expected = (
            b'{"claims":{"mass_g":120,"materials":["steel","rubber"]},'
            b'"product":{"gtin":"4006381333931","serial":"SN-1"},"v":1}'
        )
        assert canonicalize(value) == expected

    def test_unicode_is_utf8_not_escaped(self):
        assert canonicalize({"name": "Straße"}) == '{"name":"Straße"}'.encode("utf-8")

    def test_nan_rejected(self):
        with pytest.raises(ValidationError):
            canonicalize({"x": float("nan")})
        with pytest.raises(ValidationError):
            canonicalize({"x": float("inf")})

    def test_unsupported_scalar_rejected(self):
        with pytest.raises(ValidationError):
            canonicalize({"x": object()})
        with pytest.raises(ValidationError):
            canonicalize({"x": b"raw"})

    def test_non_string_keys_rejected(self):
        with pytest.raises(ValidationError):
            canonicalize({1: "x"})

    def test_cycle_rejected(self):
        loop: dict = {}
        loop["self"] = loop
        with pytest.raises(ValidationError):
            canonicalize(loop)

    def test_injective_on_corpus(self):
        corpus = [
            {},
            {"a": 1},
            {"a": "1"},
            {"a": [1]},
            {"a": {"b": 1}},
            [],
            [1, 2],
            [2, 1],
            "a",
            1,
            True,
            None,
            {"a": None},
            {"a": True},
        ]
        encodings = [canonicalize(v) for v in corpus]
        assert len(set(encodings)) == len(encodings)

    @given(
        st.recursive(
            st.none() | st.booleans() | st.integers() | st.text(),
            lambda inner: st.lists(inner, max_size=4)
            | st.dictionaries(st.text(max_size=6), inner, max_size=4),
            max_leaves=12,
        )
    )
    @settings(max_examples=100)
    def test_pure_function(self, value):
        assert canonicalize(value) == canonicalize(value)


def mod10_oracle(digits: str) -> bool:
    """Independent check-digit oracle: positional weights from the left.

    For an even payload length the first position weighs 1, for odd it
    weighs 3, alternating; the check digit completes the sum to a multiple
    of ten.
    """
    payload, check = digits[:-1], int(digits[-1])
    first_weight = 1 if len(payload) % 2 == 0 else 3
    total = 0
    for pos, ch in enumerate(payload):
        weight = first_weight if pos % 2 == 0 else 4 - first_weight
        total += weight * int(ch)
    return (total + check) % 10 == 0


class TestGtin:
    def test_all_zero_gtin_valid(self):
        assert validate_gtin("0000000000000") is True

    def test_known_ean13_valid_against_oracle(self):
        assert mod10_oracle("4006381333931")
        assert validate_gtin("4006381333931") is True

    def test_mutated_check_digit_invalid(self):
        assert not mod10_oracle("4006381333932")
        assert validate_gtin("4006381333932") is False

    def test_gtin14(self):
        payload = "1400638133393"
        digits = payload + str(gtin_check_digit(payload))
        assert mod10_oracle(digits)
        assert validate_gtin(digits) is True

    @pytest.mark.parametrize("bad", ["123", "400638133393", "40063813339311x", "400638133393a"])
    def test_malformed_rejected_not_false(self, bad):
        with pytest.raises(ValidationError):
            validate_gtin(bad)

    @given(st.text(alphabet="0123456789", min_size=12, max_size=13))
    @settings(max_examples=200)
    def test_check_digit_agrees_with_oracle(self, payload):
        digits = payload + str(gtin_check_digit(payload))
        assert mod10_oracle(digits)
        assert validate_gtin(digits) is True

    def test_gtin_type_validates(self):
        with pytest.raises(ValidationError):
            Gtin("4006381333932")
        assert Gtin("4006381333931").digits == "4006381333931"


class TestProductRef:
    def test_key_with_and_without_serial(self):
        gtin = Gtin("4006381333931")
        assert ProductRef(gtin).key() == "4006381333931"
        assert ProductRef(gtin, "S1").key() == "4006381333931:S1"

    def test_dict_roundtrip(self):
        ref = ProductRef(Gtin("4006381333931"), "S9")
        assert ProductRef.from_dict(ref.to_dict()) == ref


class TestDidDocument:
    def test_version_starts_at_one(self):
        pair = generate_key_pair(bytes([7]) * 32)
        did = derive_did(pair.public_key)
        with pytest.raises(ValidationError):
            DidDocument(id=did, controller=did, version_id=0)

    def test_next_version_bumps(self):
        pair = generate_key_pair(bytes([7]) * 32)
        did = derive_did(pair.public_key)
        doc = DidDocument(id=did, controller=did)
        assert doc.next_version().version_id == 2
        assert doc.version_id == 1

    def test_also_known_as_must_be_valid_gtin(self):
        pair = generate_key_pair(bytes([7]) * 32)
        did = derive_did(pair.public_key)
        with pytest.raises(ValidationError):
            DidDocument(id=did, controller=did, also_known_as="4006381333932")

    def test_dict_roundtrip(self):
        pair = generate_key_pair(bytes([7]) * 32)
        did = derive_did(pair.public_key)
        doc = DidDocument(
            id=did,
            controller=did,
            verification_methods=(("key-1", pair.public_hex),),
            delegations=((str(did), "anchor-event"),),
            services=(("wallet", "local:acme"),),
            also_known_as="4006381333931",
            attributes={"granularity": "model"},
        )
        assert DidDocument.from_dict(doc.to_dict()) == doc
