"""
Versioned binary format for toy BGV ciphertexts and keys.

Every record is a fixed little-endian header followed by ring elements,
each stored as n little-endian unsigned integers of a common byte width:

    - Bytes 0-3:   Magic b"SSHE"
    - Byte 4:      Format version
    - Byte 5:      Record kind (1 ciphertext, 2 secret key, 3 relin key)
    - Bytes 6-9:   p (uint32)
    - Byte 10:     r
    - Bytes 11-14: ring degree n (uint32)
    - Bytes 15-16: level (uint16)
    - Bytes 17-20: kind-specific value: tag exponent for a ciphertext,
                   Hamming weight for a secret key, gadget bits for a relin key
    - Bytes 21-24: coefficient byte width (uint32)
    - Bytes 25-28: ring element count (uint32)
    - Bytes 29-36: noise estimate in bits (float64, NaN for keys)

Ciphertext moduli are not stored: the reader rebuilds Q_level from the
ParamSet it is given and refuses records made under different parameters.
Several records may be concatenated in one file.

Example:
    >>> codec = CiphertextCodec(params)
    >>> blob = codec.encode_ciphertext(ct)
    >>> codec.decode(blob) == ct
    True
"""

import math
import struct
from collections.abc import Iterator, Sequence
from typing import TYPE_CHECKING

from .bgv import BGVCiphertext, RelinKey, SecretKey
from .ring import RingElem

if TYPE_CHECKING:
    from .params import ParamSet

type Record = BGVCiphertext | SecretKey | RelinKey


class CiphertextCodec:
    """Reads and writes records for one ParamSet."""

    MAGIC = b"SSHE"
    VERSION = 1
    HEADER = struct.Struct("<4sBBIBIHIIId")

    KIND_CIPHERTEXT = 1
    KIND_SECRET_KEY = 2
    KIND_RELIN_KEY = 3

    def __init__(self, params: "ParamSet"):
        self.params = params

    def _header(self, kind: int, level: int, aux: int, width: int, count: int, noise: float) -> bytes:
        p = self.params
        return self.HEADER.pack(
            self.MAGIC, self.VERSION, kind, p.p, p.r, p.n, level, aux, width, count, noise
        )

    @staticmethod
    def _width(modulus: int) -> int:
        return (modulus.bit_length() + 7) // 8

    def _body(self, elems: Sequence[RingElem], width: int) -> bytes:
        return b"".join(c.to_bytes(width, "little") for e in elems for c in e.coeffs)

    def encode_ciphertext(self, ct: BGVCiphertext) -> bytes:
        width = self._width(ct.modulus)
        tag_exp, rest = 0, ct.ptxt_modulus
        while rest > 1:
            rest //= self.params.p
            tag_exp += 1
        return self._header(self.KIND_CIPHERTEXT, ct.level, tag_exp, width, 2, ct.noise_bits) + self._body(
            (ct.c0, ct.c1), width
        )

    def encode_secret_key(self, sk: SecretKey) -> bytes:
        width = self._width(sk.s.modulus)
        header = self._header(self.KIND_SECRET_KEY, self.params.levels, sk.hamming_weight, width, 1, math.nan)
        return header + self._body((sk.s,), width)

    def encode_relin_key(self, rk: RelinKey) -> bytes:
        elems = [e for pair in rk.pairs for e in pair]
        width = self._width(elems[0].modulus)
        header = self._header(self.KIND_RELIN_KEY, self.params.levels, rk.base_bits, width, len(elems), math.nan)
        return header + self._body(elems, width)

    def encode(self, record: Record) -> bytes:
        match record:
            case BGVCiphertext():
                return self.encode_ciphertext(record)
            case SecretKey():
                return self.encode_secret_key(record)
            case RelinKey():
                return self.encode_relin_key(record)

    def decode(self, data: bytes) -> Record:
        """
        Decode exactly one record.

        Raises:
            ValueError: If the data is malformed or holds trailing bytes
        """
        record, end = self._read(data, 0)
        if end != len(data):
            raise ValueError(f"{len(data) - end} trailing bytes after record")
        return record

    def decode_all(self, data: bytes) -> list[Record]:
        return list(self.iter_records(data))

    def iter_records(self, data: bytes) -> Iterator[Record]:
        offset = 0
        while offset < len(data):
            record, offset = self._read(data, offset)
            yield record

    def _read(self, data: bytes, offset: int) -> tuple[Record, int]:
        if len(data) - offset < self.HEADER.size:
            raise ValueError(f"Truncated header at byte {offset}")
        magic, version, kind, p, r, n, level, aux, width, count, noise = self.HEADER.unpack_from(data, offset)
        if magic != self.MAGIC:
            raise ValueError(f"Bad magic {magic!r} at byte {offset}, expected {self.MAGIC!r}")
        if version != self.VERSION:
            raise ValueError(f"Unsupported format version {version}")
        params = self.params
        if (p, r, n) != (params.p, params.r, params.n):
            raise ValueError(
                f"Record made for p={p} r={r} n={n}, reader has p={params.p} r={params.r} n={params.n}"
            )
        if not 0 <= level <= params.levels:
            raise ValueError(f"Record level {level} outside the chain [0, {params.levels}]")
        modulus = params.q_at(level)
        if width != self._width(modulus):
            raise ValueError(f"Coefficient width {width} does not match modulus of level {level}")

        start = offset + self.HEADER.size
        end = start + width * n * count
        if end > len(data):
            raise ValueError(f"Truncated body: need {end - start} bytes, have {len(data) - start}")
        elems: list[RingElem] = []
        for i in range(count):
            base = start + i * width * n
            coeffs = tuple(
                int.from_bytes(data[base + j * width : base + (j + 1) * width], "little") for j in range(n)
            )
            elems.append(RingElem(coeffs, modulus))

        match kind:
            case self.KIND_CIPHERTEXT:
                if count != 2:
                    raise ValueError(f"A ciphertext has 2 ring elements, record has {count}")
                return BGVCiphertext(elems[0], elems[1], params.p**aux, level, noise), end
            case self.KIND_SECRET_KEY:
                if count != 1:
                    raise ValueError(f"A secret key has 1 ring element, record has {count}")
                return SecretKey(elems[0], aux), end
            case self.KIND_RELIN_KEY:
                if count % 2:
                    raise ValueError(f"A relinearisation key has paired elements, record has {count}")
                pairs = tuple((elems[i], elems[i + 1]) for i in range(0, count, 2))
                return RelinKey(pairs, aux), end
            case _:
                raise ValueError(f"Unknown record kind {kind}")
