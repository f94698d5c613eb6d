"""Tests for the binary ciphertext and key format."""

import struct

import pytest

from space_switch import CiphertextCodec, ParamSet, Residue, keygen
from space_switch.bgv import decrypt, encrypt, mod_switch


@pytest.fixture(scope="module")
def params() -> ParamSet:
    return ParamSet.create(5, 2, 2, backend="bgv", n=16)


@pytest.fixture(scope="module")
def keys(params: ParamSet):
    return keygen(params, seed=7)


@pytest.fixture
def codec(params: ParamSet) -> CiphertextCodec:
    return CiphertextCodec(params)


class TestCiphertextCodec:
    def test_header_layout(self, codec: CiphertextCodec):
        assert codec.HEADER.size == 37
        assert codec.MAGIC == b"SSHE"

    def test_ciphertext_roundtrip(self, codec: CiphertextCodec, params: ParamSet, keys):
        sk, _ = keys
        ct = encrypt(Residue(17, 25), sk, params, seed=1)
        blob = codec.encode(ct)
        back = codec.decode(blob)
        assert back == ct
        assert decrypt(back, sk).value == 17

    def test_lower_level_and_tag(self, codec: CiphertextCodec, params: ParamSet, keys):
        sk, _ = keys
        ct = mod_switch(encrypt(Residue(3, 5), sk, params, seed=2), params)
        back = codec.decode(codec.encode_ciphertext(ct))
        assert back.level == params.levels - 1
        assert back.ptxt_modulus == 5
        assert decrypt(back, sk) == Residue(3, 5)

    def test_keys_roundtrip(self, codec: CiphertextCodec, keys):
        sk, rk = keys
        assert codec.decode(codec.encode(sk)) == sk
        assert codec.decode(codec.encode(rk)) == rk

    def test_concatenated_records(self, codec: CiphertextCodec, params: ParamSet, keys):
        sk, rk = keys
        cts = [encrypt(Residue(v, 25), sk, params, seed=v) for v in (1, 2, 3)]
        blob = codec.encode(sk) + codec.encode(rk) + b"".join(codec.encode(ct) for ct in cts)
        records = codec.decode_all(blob)
        assert records[0] == sk
        assert records[1] == rk
        assert records[2:] == cts

    def test_bad_magic(self, codec: CiphertextCodec, params: ParamSet, keys):
        blob = bytearray(codec.encode(keys[0]))
        blob[:4] = b"XXXX"
        with pytest.raises(ValueError, match="Bad magic"):
            codec.decode(bytes(blob))

    def test_bad_version(self, codec: CiphertextCodec, keys):
        blob = bytearray(codec.encode(keys[0]))
        blob[4] = 99
        with pytest.raises(ValueError, match="Unsupported format version 99"):
            codec.decode(bytes(blob))

    def test_truncated_header(self, codec: CiphertextCodec):
        with pytest.raises(ValueError, match="Truncated header"):
            codec.decode(b"SSHE\x01")

    def test_truncated_body(self, codec: CiphertextCodec, keys):
        blob = codec.encode(keys[0])
        with pytest.raises(ValueError, match="Truncated body"):
            codec.decode(blob[:-3])

    def test_trailing_bytes(self, codec: CiphertextCodec, keys):
        blob = codec.encode(keys[0])
        with pytest.raises(ValueError, match="2 trailing bytes"):
            codec.decode(blob + b"\x00\x00")

    def test_foreign_params(self, codec: CiphertextCodec, keys):
        other = CiphertextCodec(ParamSet.create(7, 2, 2, backend="bgv", n=16))
        with pytest.raises(ValueError, match="Record made for p=5"):
            other.decode(codec.encode(keys[0]))

    def test_level_outside_chain(self, codec: CiphertextCodec, params: ParamSet, keys):
        blob = bytearray(codec.encode(keys[0]))
        struct.pack_into("<H", blob, 15, params.levels + 5)
        with pytest.raises(ValueError, match="outside the chain"):
            codec.decode(bytes(blob))

    def test_unknown_kind(self, codec: CiphertextCodec, keys):
        blob = bytearray(codec.encode(keys[0]))
        blob[5] = 9
        with pytest.raises(ValueError, match="Unknown record kind 9"):
            codec.decode(bytes(blob))
