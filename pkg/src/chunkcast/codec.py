"""Random linear coding over GF(256) within a batch.

Encoded packets carry a coefficient vector (one field element per source
packet of the batch) plus the matching linear combination of payloads.
Receivers absorb packets into a row-reduced decoder; a packet is innovative
exactly when it raises the decoder's rank, and rank = batch size means the
batch decodes by back-substitution.

Field arithmetic uses log/antilog tables over the AES reduction polynomial
x^8 + x^4 + x^3 + x + 1 (0x11B); 3 generates the multiplicative group for
this polynomial (2 does not).  Addition is XOR.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

_POLY = 0x11B
_GENERATOR = 3

# exp table doubled so products of two logs index without a modulo
_EXP = np.zeros(510, dtype=np.uint8)
_LOG = np.zeros(256, dtype=np.int32)


def _build_tables() -> None:
    x = 1
    for i in range(255):
        _EXP[i] = x
        _LOG[x] = i
        hi = x << 1
        if hi & 0x100:
            hi ^= _POLY
        x = hi ^ x  # x * 3 = x*2 + x
    _EXP[255:510] = _EXP[0:255]


_build_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_EXP[int(_LOG[a]) + int(_LOG[b])])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return int(_EXP[255 - int(_LOG[a])])


def gf_mul_vec(vec: np.ndarray, c: int) -> np.ndarray:
    """Scale a uint8 vector by the field element ``c``."""
    if c == 0:
        return np.zeros_like(vec)
    if c == 1:
        return vec.copy()
    out = np.zeros_like(vec)
    nz = vec != 0
    out[nz] = _EXP[_LOG[vec[nz]] + _LOG[c]]
    return out


@dataclass(frozen=True)
class EncodedPacket:
    """A random linear combination of one batch's source packets.

    ``payload`` may be None for rank-only bookkeeping (the simulator's coded
    mode tracks innovation without carrying payload bytes).
    """

    batch: int
    coefficients: np.ndarray
    payload: np.ndarray | None = None


def encode(
    batch_payloads: Sequence[bytes | np.ndarray],
    rng: np.random.Generator,
    batch: int = 1,
) -> EncodedPacket:
    """Draw uniform coefficients and combine the batch's payloads.

    All payloads must share one length.  The all-zero coefficient draw is
    legal; it simply yields a redundant packet.
    """
    payloads = [np.frombuffer(bytes(p), dtype=np.uint8) if isinstance(p, (bytes, bytearray)) else np.asarray(p, dtype=np.uint8) for p in batch_payloads]
    if not payloads:
        raise ValueError("batch_payloads must be non-empty")
    length = payloads[0].shape[0]
    if any(p.shape[0] != length for p in payloads):
        raise ValueError("all batch payloads must have equal length")
    coeffs = rng.integers(0, 256, size=len(payloads), dtype=np.uint8)
    combined = np.zeros(length, dtype=np.uint8)
    for c, p in zip(coeffs, payloads):
        combined ^= gf_mul_vec(p, int(c))
    return EncodedPacket(batch=batch, coefficients=coeffs, payload=combined)


class DecoderState:
    """Incremental Gaussian elimination for one (receiver, batch) pair.

    Rows are kept in reduced row-echelon form, so once rank reaches the
    batch size the payload rows are the decoded source packets in order.
    """

    def __init__(self, batch: int, size: int, payload_len: int | None = None):
        if size < 1:
            raise ValueError("batch size must be positive")
        self.batch = batch
        self.size = size
        self.payload_len = payload_len
        self.rank = 0
        # pivot column -> (coefficient row, payload row or None)
        self._rows: dict[int, tuple[np.ndarray, np.ndarray | None]] = {}

    def absorb(self, pkt: EncodedPacket) -> bool:
        """Row-reduce a packet into the decoder; True iff it was innovative."""
        if pkt.batch != self.batch:
            raise ValueError(f"packet batch {pkt.batch} != decoder batch {self.batch}")
        coeffs = np.asarray(pkt.coefficients, dtype=np.uint8)
        if coeffs.shape[0] != self.size:
            raise ValueError(
                f"coefficient length {coeffs.shape[0]} != batch size {self.size}"
            )
        row = coeffs.copy()
        pay = None if pkt.payload is None else np.asarray(pkt.payload, dtype=np.uint8).copy()
        # eliminate known pivots
        for col, (prow, ppay) in self._rows.items():
            f = int(row[col])
            if f:
                row ^= gf_mul_vec(prow, f)
                if pay is not None and ppay is not None:
                    pay ^= gf_mul_vec(ppay, f)
        pivots = np.nonzero(row)[0]
        if pivots.size == 0:
            return False
        col = int(pivots[0])
        inv = gf_inv(int(row[col]))
        row = gf_mul_vec(row, inv)
        if pay is not None:
            pay = gf_mul_vec(pay, inv)
        # back-eliminate the new pivot from stored rows to stay in RREF
        for ocol, (prow, ppay) in list(self._rows.items()):
            f = int(prow[col])
            if f:
                nrow = prow ^ gf_mul_vec(row, f)
                npay = ppay
                if ppay is not None and pay is not None:
                    npay = ppay ^ gf_mul_vec(pay, f)
                self._rows[ocol] = (nrow, npay)
        self._rows[col] = (row, pay)
        self.rank += 1
        return True

    @property
    def decodable(self) -> bool:
        return self.rank == self.size

    def decode(self) -> list[bytes]:
        """Recover the batch's source payloads; requires full rank."""
        if self.rank < self.size:
            raise ValueError(f"rank {self.rank} < batch size {self.size}: not decodable")
        out = []
        for col in range(self.size):
            _, pay = self._rows[col]
            if pay is None:
                raise ValueError("decoder holds no payloads (rank-only mode)")
            out.append(pay.tobytes())
        return out
