"""Canonical binary encoding and storage-key derivation.

Every value that lands in chain state goes through this module, so the
byte layout here is what state roots, golden vectors and cross-chain
queries all agree on.

Layout rules:

* integers are little-endian, fixed width (u8, u32, u64)
* strings and byte blobs carry a 4-byte little-endian length prefix
* sequences carry a 4-byte little-endian item count
* optionals are a one-byte tag (0 = absent, 1 = present) then the value
"""

from __future__ import annotations

import hashlib
import struct
from typing import Callable, Iterable, TypeVar

from .errors import MalformedValue

T = TypeVar("T")

DIGEST128_SIZE = 16
LENGTH_PREFIX_SIZE = 4


def enc(s: str) -> bytes:
    """Length-prefixed UTF-8 encoding of ``s``."""
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def digest128(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=DIGEST128_SIZE).digest()


def digest256(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=32).digest()


def storage_key_for(s: str) -> bytes:
    """Hash-then-concatenate key: ``blake2b128(enc(s)) || enc(s)``."""
    payload = enc(s)
    return digest128(payload) + payload


def parse_storage_key(key: bytes) -> str:
    """Split a key built by :func:`storage_key_for` and re-verify its digest.

    Returns the original string; raises :class:`MalformedValue` if the key
    is not well-formed or the digest does not match the payload.
    """
    if len(key) < DIGEST128_SIZE + LENGTH_PREFIX_SIZE:
        raise MalformedValue("storage key too short")
    digest, payload = key[:DIGEST128_SIZE], key[DIGEST128_SIZE:]
    if digest128(payload) != digest:
        raise MalformedValue("storage key digest mismatch")
    dec = Decoder(payload)
    s = dec.str()
    dec.finish()
    return s


class Encoder:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Encoder":
        self._parts.append(struct.pack("<B", v))
        return self

    def u32(self, v: int) -> "Encoder":
        self._parts.append(struct.pack("<I", v))
        return self

    def u64(self, v: int) -> "Encoder":
        self._parts.append(struct.pack("<Q", v))
        return self

    def bool(self, v: bool) -> "Encoder":
        return self.u8(1 if v else 0)

    def fixed(self, b: bytes) -> "Encoder":
        self._parts.append(bytes(b))
        return self

    def bytes(self, b: bytes) -> "Encoder":
        self.u32(len(b))
        self._parts.append(bytes(b))
        return self

    def str(self, s: str) -> "Encoder":
        self._parts.append(enc(s))
        return self

    def seq(self, items: Iterable[T], write: Callable[["Encoder", T], object]) -> "Encoder":
        items = list(items)
        self.u32(len(items))
        for item in items:
            write(self, item)
        return self

    def finish(self) -> bytes:
        return b"".join(self._parts)


class Decoder:
    """Strict reader: every read is bounds-checked and :meth:`finish`
    rejects trailing bytes."""

    def __init__(self, data: bytes) -> None:
        self._data = memoryview(bytes(data))
        self._pos = 0

    def _take(self, n: int) -> bytes:
        end = self._pos + n
        if n < 0 or end > len(self._data):
            raise MalformedValue(
                f"truncated value: need {n} bytes at offset {self._pos}, "
                f"have {len(self._data) - self._pos}"
            )
        out = bytes(self._data[self._pos:end])
        self._pos = end
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def bool(self) -> bool:
        tag = self.u8()
        if tag > 1:
            raise MalformedValue(f"invalid boolean tag {tag}")
        return tag == 1

    def fixed(self, n: int) -> bytes:
        return self._take(n)

    def bytes(self) -> bytes:
        return self._take(self.u32())

    def str(self) -> str:
        raw = self.bytes()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedValue("invalid UTF-8 in string") from exc

    def seq(self, read: Callable[["Decoder"], T]) -> list[T]:
        count = self.u32()
        # each item consumes at least one byte; reject absurd counts early
        if count > len(self._data) - self._pos:
            raise MalformedValue(f"sequence count {count} exceeds remaining input")
        return [read(self) for _ in range(count)]

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise MalformedValue(f"{len(self._data) - self._pos} trailing bytes")


def encode_u64(v: int) -> bytes:
    return struct.pack("<Q", v)


def decode_u64(raw: bytes) -> int:
    dec = Decoder(raw)
    v = dec.u64()
    dec.finish()
    return v


def encode_str_list(items: Iterable[str]) -> bytes:
    return Encoder().seq(items, Encoder.str).finish()


def decode_str_list(raw: bytes) -> list[str]:
    dec = Decoder(raw)
    out = dec.seq(Decoder.str)
    dec.finish()
    return out
