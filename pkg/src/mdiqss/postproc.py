"""Classical post-processing: reconciliation, privacy amplification, OTP.

Keys are numpy uint8 arrays of 0/1 bits throughout. Alice's key is the
reference and is never modified; reconciliation moves only the sharer-side
key. Every parity disclosed during reconciliation is counted, the 64-bit
verification hash is charged on top, and the privacy-amplification output
length accounts for both plus a safety margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .qsim import RandomStream

#: Substream domain tag for post-processing randomness.
DOMAIN_POSTPROC = 1

#: Bits charged for the reconciliation verification hash exchange.
VERIFICATION_BITS = 64

# CRC-64/ECMA-182 polynomial, used as the verification hash feedback taps.
_HASH_POLY = 0x42F0E1EBA9EA3693
_HASH_MASK = (1 << 64) - 1


def as_bits(values: Sequence[int] | np.ndarray) -> np.ndarray:
    bits = np.asarray(values, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("bit strings must be one-dimensional")
    if bits.size and bits.max() > 1:
        raise ValueError("bit strings may only contain 0 and 1")
    return bits


def random_bits(n: int, rng: RandomStream) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def bits_to_hex(bits: np.ndarray) -> str:
    """Pack bits big-endian into bytes (zero-padded tail) as lowercase hex."""
    if bits.size == 0:
        return ""
    return bytes(np.packbits(as_bits(bits))).hex()


def hex_to_bits(text: str, length: int) -> np.ndarray:
    unpacked = np.unpackbits(np.frombuffer(bytes.fromhex(text), dtype=np.uint8))
    if length > unpacked.size:
        raise ValueError(f"hex string holds {unpacked.size} bits, need {length}")
    return unpacked[:length].astype(np.uint8)


def binary_entropy(p: float) -> float:
    """Shannon binary entropy with h(0) = h(1) = 0 by continuity."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def poly_hash64(bits: np.ndarray) -> int:
    """64-bit polynomial (LFSR) hash of a bit string."""
    h = 0
    for b in as_bits(bits):
        top = h >> 63
        h = ((h << 1) & _HASH_MASK) | int(b)
        if top:
            h ^= _HASH_POLY
    return h


@dataclass
class ReconciliationReport:
    corrected_positions: list[int]
    parity_bits_leaked: int
    verification_ok: bool

    def to_json_dict(self) -> dict:
        return {
            "corrected_positions": self.corrected_positions,
            "parity_bits_leaked": self.parity_bits_leaked,
            "verification_ok": self.verification_ok,
        }


def _parity(bits: np.ndarray, idx: np.ndarray) -> int:
    return int(bits[idx].sum() & 1)


def _locate_error(
    alice: np.ndarray, sharer: np.ndarray, block: np.ndarray
) -> tuple[int, int]:
    """Binary-search one mismatched block; returns (position, parities disclosed)."""
    disclosed = 0
    while block.size > 1:
        half = block.size // 2
        left = block[:half]
        disclosed += 1
        if _parity(alice, left) != _parity(sharer, left):
            block = left
        else:
            block = block[half:]
    return int(block[0]), disclosed


def reconcile(
    alice_key: Sequence[int] | np.ndarray,
    sharer_key: Sequence[int] | np.ndarray,
    block_size: int,
    rng: RandomStream,
) -> tuple[np.ndarray, ReconciliationReport]:
    """Two-pass block-parity reconciliation of the sharer key toward Alice's.

    Pass one walks the key in natural order with the given block size;
    pass two reshuffles the positions and doubles the block size. Every
    block parity and every binary-search parity is counted as leaked.
    """
    alice = as_bits(alice_key)
    sharer = as_bits(sharer_key).copy()
    if alice.shape != sharer.shape:
        raise ValueError("keys must have equal length")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    n = alice.size
    leaked = 0
    corrected: list[int] = []
    passes = (
        (np.arange(n), block_size),
        (rng.permutation(n), 2 * block_size),
    )
    for order, size in passes:
        for start in range(0, n, size):
            block = order[start : start + size]
            leaked += 1
            if _parity(alice, block) != _parity(sharer, block):
                position, disclosed = _locate_error(alice, sharer, block)
                leaked += disclosed
                sharer[position] ^= 1
                corrected.append(position)
    ok = poly_hash64(alice) == poly_hash64(sharer)
    return sharer, ReconciliationReport(corrected, leaked, ok)


def auto_block_size(qber: Optional[float]) -> int:
    """First-pass reconciliation block size tuned to an error estimate.

    Small blocks at high error rates keep double-error blocks rare enough
    for the two-pass scheme to clear; with no or negligible error the
    cheapest usable block is taken.
    """
    if qber is None or qber <= 0.0:
        return 64
    return max(4, min(64, int(round(0.16 / qber))))


def pa_output_length(n_sift: int, qber_z: float, leaked: int, safety_margin: int) -> int:
    """Extractable final-key length after entropy and leakage accounting."""
    if n_sift < 0 or leaked < 0 or safety_margin < 0:
        raise ValueError("inputs must be non-negative")
    if not 0.0 <= qber_z <= 0.5:
        raise ValueError(f"qber_z must be in [0, 0.5], got {qber_z}")
    usable = math.floor(n_sift * (1.0 - binary_entropy(qber_z)))
    return max(0, usable - leaked - safety_margin)


@dataclass(frozen=True)
class ToeplitzSeed:
    """Random bits defining a Toeplitz hashing matrix (n_out x n_in)."""

    entries: np.ndarray
    n_in: int
    n_out: int

    def __post_init__(self) -> None:
        entries = as_bits(self.entries)
        if self.n_out > self.n_in:
            raise ValueError("n_out must not exceed n_in")
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError("Toeplitz dimensions must be positive")
        if entries.size != self.n_in + self.n_out - 1:
            raise ValueError(
                f"need {self.n_in + self.n_out - 1} seed bits, got {entries.size}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def random(cls, n_in: int, n_out: int, rng: RandomStream) -> "ToeplitzSeed":
        return cls(random_bits(n_in + n_out - 1, rng), n_in, n_out)


def toeplitz_hash(bits: Sequence[int] | np.ndarray, seed: ToeplitzSeed) -> np.ndarray:
    """GF(2) Toeplitz matrix-vector product, computed by convolution.

    Matrix element (i, j) is seed entry n_in - 1 + i - j, so output bit i
    is the mod-2 convolution of the seed with the input at lag n_in-1+i.
    """
    bits = as_bits(bits)
    if bits.size != seed.n_in:
        raise ValueError(f"input has {bits.size} bits, seed expects {seed.n_in}")
    conv = np.convolve(seed.entries.astype(np.int64), bits.astype(np.int64))
    return (conv[seed.n_in - 1 : seed.n_in - 1 + seed.n_out] & 1).astype(np.uint8)


def otp_encrypt(key: Sequence[int] | np.ndarray, secret: Sequence[int] | np.ndarray) -> np.ndarray:
    """One-time pad: bitwise XOR of equal-length key and secret."""
    k = as_bits(key)
    s = as_bits(secret)
    if k.shape != s.shape:
        raise ValueError("key and secret must have equal length")
    return np.bitwise_xor(k, s)


def otp_decrypt(ciphertext: Sequence[int] | np.ndarray, key: Sequence[int] | np.ndarray) -> np.ndarray:
    """Inverse of otp_encrypt (XOR is an involution)."""
    return otp_encrypt(key, ciphertext)


@dataclass
class KeyMaterial:
    """Alice-side key material across the post-processing stages."""

    raw_key: np.ndarray
    z_estimation_bits: np.ndarray
    corrected_key: np.ndarray
    final_key: Optional[np.ndarray]
    ciphertext: Optional[np.ndarray]

    def to_json_dict(self) -> dict:
        return {
            "raw_key": bits_to_hex(self.raw_key),
            "raw_length": int(self.raw_key.size),
            "z_estimation_bits": bits_to_hex(self.z_estimation_bits),
            "z_length": int(self.z_estimation_bits.size),
            "corrected_key": bits_to_hex(self.corrected_key),
            "final_key": bits_to_hex(self.final_key) if self.final_key is not None else None,
            "final_length": int(self.final_key.size) if self.final_key is not None else 0,
            "ciphertext": bits_to_hex(self.ciphertext) if self.ciphertext is not None else None,
        }


STATUS_OK = "ok"
STATUS_INSUFFICIENT = "insufficient_key"
STATUS_VERIFY_FAILED = "verification_failed"


@dataclass
class SecretSharingSession:
    """Full distillation and secret-distribution outcome for one campaign.

    The ciphertext is delivered to Bob alone; recovery models the explicit
    cooperative step in which both sharers combine their reconstructed
    final key with it.
    """

    status: str
    qber_z: Optional[float]
    leaked_bits: int
    capacity: int
    reconciliation: ReconciliationReport
    alice: KeyMaterial
    sharer_final_key: Optional[np.ndarray]
    recovered_secret: Optional[np.ndarray]

    @property
    def recovered_ok(self) -> bool:
        return (
            self.recovered_secret is not None
            and self.alice.ciphertext is not None
            and bool(
                np.array_equal(
                    self.recovered_secret,
                    otp_decrypt(self.alice.ciphertext, self.alice.final_key),
                )
            )
        )

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "qber_z": self.qber_z,
            "leaked_bits": self.leaked_bits,
            "capacity": self.capacity,
            "reconciliation": self.reconciliation.to_json_dict(),
            "alice": self.alice.to_json_dict(),
            "sharer_final_key": (
                bits_to_hex(self.sharer_final_key) if self.sharer_final_key is not None else None
            ),
            "recovered_secret": (
                bits_to_hex(self.recovered_secret) if self.recovered_secret is not None else None
            ),
        }


def share_secret(
    alice_raw: Sequence[int] | np.ndarray,
    sharer_raw: Sequence[int] | np.ndarray,
    qber_z: Optional[float],
    secret: Sequence[int] | np.ndarray,
    rng: RandomStream,
    z_estimation_bits: Sequence[int] | np.ndarray = (),
    block_size: Optional[int] = None,
    safety_margin: int = 64,
) -> SecretSharingSession:
    """Reconcile, amplify, encrypt and cooperatively recover one secret.

    ``block_size`` defaults to the error-rate-tuned choice of
    :func:`auto_block_size`. With no Z-round estimate available the error
    rate is assumed maximal, which zeroes the capacity; reporting
    insufficient key is the correct accounting outcome in that case, not a
    failure.
    """
    alice = as_bits(alice_raw)
    sharer = as_bits(sharer_raw)
    secret_bits = as_bits(secret)
    z_bits = as_bits(z_estimation_bits)
    if secret_bits.size == 0:
        raise ValueError("secret must contain at least one bit")

    empty_material = KeyMaterial(alice, z_bits, sharer.copy(), None, None)
    if alice.size == 0:
        report = ReconciliationReport([], 0, True)
        return SecretSharingSession(
            STATUS_INSUFFICIENT, qber_z, 0, 0, report, empty_material, None, None
        )

    if block_size is None:
        block_size = auto_block_size(qber_z)
    corrected, report = reconcile(alice, sharer, block_size, rng)
    leaked_total = report.parity_bits_leaked + VERIFICATION_BITS
    effective_qber = 0.5 if qber_z is None else min(max(qber_z, 0.0), 0.5)
    capacity = pa_output_length(alice.size, effective_qber, leaked_total, safety_margin)

    material = KeyMaterial(alice, z_bits, corrected, None, None)
    if not report.verification_ok:
        return SecretSharingSession(
            STATUS_VERIFY_FAILED, qber_z, leaked_total, capacity, report, material, None, None
        )
    if capacity < 1:
        return SecretSharingSession(
            STATUS_INSUFFICIENT, qber_z, leaked_total, capacity, report, material, None, None
        )

    n_out = min(capacity, secret_bits.size)
    seed = ToeplitzSeed.random(alice.size, n_out, rng)
    material.final_key = toeplitz_hash(alice, seed)
    sharer_final = toeplitz_hash(corrected, seed)

    if capacity < secret_bits.size:
        return SecretSharingSession(
            STATUS_INSUFFICIENT,
            qber_z,
            leaked_total,
            capacity,
            report,
            material,
            sharer_final,
            None,
        )

    material.ciphertext = otp_encrypt(material.final_key, secret_bits)
    recovered = otp_decrypt(material.ciphertext, sharer_final)
    return SecretSharingSession(
        STATUS_OK,
        qber_z,
        leaked_total,
        capacity,
        report,
        material,
        sharer_final,
        recovered,
    )
