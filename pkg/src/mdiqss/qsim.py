"""Exact statevector kernel for few-qubit protocol simulation.

Pure complex-double statevectors for 1..6 qubits, with the handful of
operations the secret-sharing rounds need: preparing GHZ triples and
single-qubit states, Kronecker composition, Bell-basis and local (Z/X)
measurement with Born-rule sampling, two-qubit unitaries, and stochastic
Pauli channel noise.

Conventions, fixed globally:

* Qubit indexing is big-endian by label order: for an ``n``-qubit state,
  basis index ``i`` spells the bitstring of qubits ``0..n-1`` from most to
  least significant bit.
* Measured qubits are removed from the returned state (detectors absorb
  the photons), so downstream code never re-addresses consumed qubits.
* Every operation is a pure function of ``(state, rng)``; states are
  immutable after construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

RandomStream = np.random.Generator

MAX_QUBITS = 6
NORM_TOL = 1e-9
#: Branch probabilities below this are treated as exact zeros before
#: sampling, so floating-point dust never produces an impossible outcome.
BRANCH_CUTOFF = 1e-12

_INV_SQRT2 = 1.0 / np.sqrt(2.0)

BASIS_Z = "Z"
BASIS_X = "X"


class SingleQubitPrep(enum.Enum):
    """One of the four preparation states {|0>, |1>, |+>, |->}.

    Each carries a basis view (Z for the computational pair, X for the
    Hadamard pair) and a classical bit view: |0> and |+> encode 0,
    |1> and |-> encode 1.
    """

    ZERO = "ZERO"
    ONE = "ONE"
    PLUS = "PLUS"
    MINUS = "MINUS"

    @property
    def basis(self) -> str:
        return BASIS_Z if self in (SingleQubitPrep.ZERO, SingleQubitPrep.ONE) else BASIS_X

    @property
    def bit(self) -> int:
        return 0 if self in (SingleQubitPrep.ZERO, SingleQubitPrep.PLUS) else 1


ALL_PREPS = (
    SingleQubitPrep.ZERO,
    SingleQubitPrep.ONE,
    SingleQubitPrep.PLUS,
    SingleQubitPrep.MINUS,
)


def prep_for(basis: str, bit: int) -> SingleQubitPrep:
    """The preparation state with the given basis and classical bit."""
    for prep in ALL_PREPS:
        if prep.basis == basis and prep.bit == bit:
            return prep
    raise ValueError(f"no preparation for basis={basis!r} bit={bit!r}")


class BellOutcome(enum.Enum):
    """The four Bell states, split into a sign bit and a parity bit.

    sign_bit is 0 for the "+" states and 1 for the "-" states;
    parity_bit is 0 for the phi (even) pair and 1 for the psi (odd) pair.
    """

    PHI_PLUS = "PHI_PLUS"
    PHI_MINUS = "PHI_MINUS"
    PSI_PLUS = "PSI_PLUS"
    PSI_MINUS = "PSI_MINUS"

    @property
    def sign_bit(self) -> int:
        return 0 if self in (BellOutcome.PHI_PLUS, BellOutcome.PSI_PLUS) else 1

    @property
    def parity_bit(self) -> int:
        return 0 if self in (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS) else 1


BELL_OUTCOMES = (
    BellOutcome.PHI_PLUS,
    BellOutcome.PHI_MINUS,
    BellOutcome.PSI_PLUS,
    BellOutcome.PSI_MINUS,
)

# Bell bras as rows over the 2-bit index (q1, q2); all entries are real.
_BELL_BRAS = np.array(
    [
        [1, 0, 0, 1],    # phi+
        [1, 0, 0, -1],   # phi-
        [0, 1, 1, 0],    # psi+
        [0, 1, -1, 0],   # psi-
    ],
    dtype=np.complex128,
) * _INV_SQRT2

# Local measurement bras: row index is the classical bit.
_LOCAL_BRAS = {
    BASIS_Z: np.eye(2, dtype=np.complex128),
    BASIS_X: np.array([[1, 1], [1, -1]], dtype=np.complex128) * _INV_SQRT2,
}

_PAULIS = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class StateVector:
    """Pure state of ``num_qubits`` qubits as 2**n complex amplitudes.

    A zero-qubit state (a single unit amplitude) is permitted as the
    residue left after every qubit has been measured away.
    """

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 0 <= self.num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [0, {MAX_QUBITS}], got {self.num_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.num_qubits,):
            raise ValueError(
                f"expected {1 << self.num_qubits} amplitudes, got shape {amps.shape}"
            )
        if not np.isfinite(amps).all():
            raise ValueError("amplitudes must be finite")
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"squared norm {norm_sq} deviates from 1 beyond {NORM_TOL}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probability_of(self, bitstring: int) -> float:
        """Born probability of one computational-basis outcome."""
        return float(abs(self.amplitudes[bitstring]) ** 2)


@dataclass(frozen=True)
class TwoQubitUnitary:
    """A 4x4 unitary acting on an ordered qubit pair (high bit, low bit)."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        mat = np.asarray(self.entries, dtype=np.complex128)
        if mat.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {mat.shape}")
        deviation = np.abs(mat.conj().T @ mat - np.eye(4)).max()
        if deviation > NORM_TOL:
            raise ValueError(f"matrix is not unitary (deviation {deviation:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    @classmethod
    def identity(cls) -> "TwoQubitUnitary":
        return cls(np.eye(4))


@dataclass(frozen=True)
class AncillaState:
    """Single ancilla qubit alpha|0> + beta|1> held by an attacker."""

    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        norm_sq = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"ancilla squared norm {norm_sq} deviates from 1")

    def to_state(self) -> StateVector:
        return StateVector(1, np.array([self.alpha, self.beta], dtype=np.complex128))


@dataclass(frozen=True)
class NoiseSpec:
    """Per-transit stochastic Pauli error rates."""

    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0

    def __post_init__(self) -> None:
        for name, p in (("p_x", self.p_x), ("p_y", self.p_y), ("p_z", self.p_z)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.p_x + self.p_y + self.p_z > 1.0 + 1e-12:
            raise ValueError("p_x + p_y + p_z must not exceed 1")

    @property
    def total(self) -> float:
        return self.p_x + self.p_y + self.p_z


NOISELESS = NoiseSpec()


@lru_cache(maxsize=1)
def prepare_ghz() -> StateVector:
    """Three-qubit GHZ state (|000> + |111>)/sqrt(2).

    Qubit order is fixed as (dealer-kept, to-David, to-Ethan). States are
    immutable, so the cached instance is shared safely.
    """
    amps = np.zeros(8, dtype=np.complex128)
    amps[0b000] = _INV_SQRT2
    amps[0b111] = _INV_SQRT2
    return StateVector(3, amps)


@lru_cache(maxsize=4)
def prepare_single(prep: SingleQubitPrep) -> StateVector:
    """One qubit in the requested preparation state."""
    table = {
        SingleQubitPrep.ZERO: [1.0, 0.0],
        SingleQubitPrep.ONE: [0.0, 1.0],
        SingleQubitPrep.PLUS: [_INV_SQRT2, _INV_SQRT2],
        SingleQubitPrep.MINUS: [_INV_SQRT2, -_INV_SQRT2],
    }
    return StateVector(1, np.array(table[prep], dtype=np.complex128))


def tensor(left: StateVector, right: StateVector) -> StateVector:
    """Kronecker product; the left operand's qubits take the high positions."""
    total = left.num_qubits + right.num_qubits
    if total > MAX_QUBITS:
        raise ValueError(f"tensor product would have {total} qubits (max {MAX_QUBITS})")
    joined = (left.amplitudes[:, None] * right.amplitudes[None, :]).reshape(-1)
    return StateVector(total, joined)


def _moved_to_front(state: StateVector, front: list[int]) -> tuple[np.ndarray, list[int]]:
    """Reshape amplitudes to (2**len(front), rest) with ``front`` leading.

    Returns the reshaped array plus the labels-order of the remaining axes
    (original positions, ascending), which is also the qubit order of any
    post-measurement state built from a row.
    """
    n = state.num_qubits
    rest = [k for k in range(n) if k not in front]
    psi = state.amplitudes.reshape([2] * n) if n else state.amplitudes.reshape([])
    block = psi.transpose(front + rest).reshape(1 << len(front), -1)
    return block, rest


def _sample_index(probabilities: np.ndarray, rng: RandomStream) -> int:
    u = rng.random()
    acc = 0.0
    last = 0
    for i, p in enumerate(probabilities):
        if p < BRANCH_CUTOFF:
            continue
        acc += p
        last = i
        if u < acc:
            return i
    return last


def bell_branches(
    state: StateVector, q1: int, q2: int
) -> list[tuple[BellOutcome, float, StateVector | None]]:
    """Exact Bell-projection branches for the ordered pair (q1, q2).

    Returns, for each of the four outcomes, its Born probability and the
    normalized post-measurement state with both qubits removed (``None``
    on zero-probability branches). Probabilities sum to 1.
    """
    if q1 == q2:
        raise ValueError("Bell measurement needs two distinct qubits")
    for q in (q1, q2):
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    block, _ = _moved_to_front(state, [q1, q2])
    projected = _BELL_BRAS @ block  # (4, 2**(n-2))
    probs = np.einsum("ij,ij->i", projected, projected.conj()).real
    branches: list[tuple[BellOutcome, float, StateVector | None]] = []
    for k, outcome in enumerate(BELL_OUTCOMES):
        p = float(probs[k])
        if p < BRANCH_CUTOFF:
            branches.append((outcome, 0.0, None))
            continue
        post = StateVector(state.num_qubits - 2, projected[k] / np.sqrt(p))
        branches.append((outcome, p, post))
    return branches


def measure_bell(
    state: StateVector, q1: int, q2: int, rng: RandomStream
) -> tuple[BellOutcome, StateVector]:
    """Sample a Bell-state measurement of (q1, q2) and consume both qubits."""
    if q1 == q2:
        raise ValueError("Bell measurement needs two distinct qubits")
    for q in (q1, q2):
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    block, _ = _moved_to_front(state, [q1, q2])
    projected = _BELL_BRAS @ block
    probs = np.einsum("ij,ij->i", projected, projected.conj()).real
    k = _sample_index(probs, rng)
    post = StateVector(state.num_qubits - 2, projected[k] / np.sqrt(probs[k]))
    return BELL_OUTCOMES[k], post


def local_branches(
    state: StateVector, q: int, basis: str
) -> list[tuple[int, float, StateVector | None]]:
    """Exact single-qubit measurement branches in the Z or X basis.

    Bit convention follows the preparation states: outcome 0 corresponds
    to |0> (Z) or |+> (X). The measured qubit is removed.
    """
    if basis not in _LOCAL_BRAS:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    if not 0 <= q < state.num_qubits:
        raise ValueError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    block, _ = _moved_to_front(state, [q])
    projected = _LOCAL_BRAS[basis] @ block
    probs = np.einsum("ij,ij->i", projected, projected.conj()).real
    branches: list[tuple[int, float, StateVector | None]] = []
    for bit in (0, 1):
        p = float(probs[bit])
        if p < BRANCH_CUTOFF:
            branches.append((bit, 0.0, None))
            continue
        post = StateVector(state.num_qubits - 1, projected[bit] / np.sqrt(p))
        branches.append((bit, p, post))
    return branches


def measure_local(
    state: StateVector, q: int, basis: str, rng: RandomStream
) -> tuple[int, StateVector]:
    """Sample a Z- or X-basis measurement of qubit q and consume it."""
    if basis not in _LOCAL_BRAS:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}")
    if not 0 <= q < state.num_qubits:
        raise ValueError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    block, _ = _moved_to_front(state, [q])
    projected = _LOCAL_BRAS[basis] @ block
    probs = np.einsum("ij,ij->i", projected, projected.conj()).real
    bit = _sample_index(probs, rng)
    post = StateVector(state.num_qubits - 1, projected[bit] / np.sqrt(probs[bit]))
    return bit, post


def _apply_matrix(state: StateVector, qubits: list[int], matrix: np.ndarray) -> StateVector:
    n = state.num_qubits
    block, _ = _moved_to_front(state, qubits)
    out = matrix @ block
    # Undo the front move: out currently has axes qubits + rest.
    rest = [k for k in range(n) if k not in qubits]
    perm = qubits + rest
    inverse = np.argsort(perm)
    psi = out.reshape([2] * n).transpose(inverse).reshape(-1)
    return StateVector(n, psi)


def apply_two_qubit_unitary(
    state: StateVector, q1: int, q2: int, u: TwoQubitUnitary
) -> StateVector:
    """Apply ``u`` on the (q1, q2) subspace; q1 is the high bit of u's basis."""
    if q1 == q2:
        raise ValueError("two-qubit unitary needs two distinct qubits")
    for q in (q1, q2):
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit index {q} out of range for {state.num_qubits} qubits")
    return _apply_matrix(state, [q1, q2], u.entries)


def apply_pauli(state: StateVector, q: int, which: str) -> StateVector:
    """Apply a single Pauli (or identity) to qubit q."""
    if which not in _PAULIS:
        raise ValueError(f"unknown Pauli label {which!r}")
    if which == "I":
        return state
    return _apply_matrix(state, [q], _PAULIS[which])


def apply_pauli_noise(
    state: StateVector, q: int, spec: NoiseSpec, rng: RandomStream
) -> tuple[StateVector, str]:
    """One stochastic Pauli channel transit on qubit q.

    Applies X, Y or Z with the spec's probabilities (identity otherwise)
    and reports which label was applied. A zero-rate spec draws no
    randomness, keeping noiseless runs cheap and stream-stable.
    """
    if spec.total == 0.0:
        return state, "I"
    u = rng.random()
    if u < spec.p_x:
        label = "X"
    elif u < spec.p_x + spec.p_y:
        label = "Y"
    elif u < spec.total:
        label = "Z"
    else:
        label = "I"
    return apply_pauli(state, q, label), label


def substream(seed: int, domain: int, index: int) -> RandomStream:
    """Deterministic independent random stream for (seed, domain, index).

    Round-level parallelism is safe because each round draws only from its
    own substream; identical arguments always reproduce the same stream.
    """
    ss = np.random.SeedSequence(entropy=[int(seed) & (2**64 - 1), int(domain), int(index)])
    return np.random.default_rng(ss)
