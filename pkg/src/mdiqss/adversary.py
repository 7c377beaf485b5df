"""Attack strategies against the protocol and their detection statistics.

Three participant-attack families are modeled as hooks into round
execution: intercept-and-resend on Charlie's particle, relay X-basis
measurement of both dealer particles, and entangling an ancilla onto one
in-transit particle with a general two-qubit unitary. The module also
carries the matching theory: the per-check escape law and the exact
residual check error induced by an ancilla unitary.

Escape accounting: a performed check is counted as *escaped* when the
forwarded particle differed from the original (the resend basis missed
the preparation basis) and the check still passed. Per checked round that
event has probability 1/2 * 1/2 = 1/4, and a campaign with k performed
checks escapes entirely with probability 4**-k. The plain probability of
simply never triggering an error is larger (3/4 per check) and can be
read off DetectionStats as well via campaigns_aborted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import qsim
from .protocol import CheckResult, decoy_check
from .qsim import (
    AncillaState,
    BASIS_X,
    BASIS_Z,
    RandomStream,
    SingleQubitPrep,
    StateVector,
    TwoQubitUnitary,
)

#: Substream domain tag for escape-trial campaigns.
DOMAIN_ESCAPE = 3

POLICY_FIXED_Z = "fixed_z"
POLICY_FIXED_X = "fixed_x"
POLICY_RANDOM = "random"
_POLICIES = (POLICY_FIXED_Z, POLICY_FIXED_X, POLICY_RANDOM)

ANCILLA_TARGETS = ("charlie", "david", "ethan")


class InterceptResult(NamedTuple):
    state: StateVector
    basis: str
    bit: int


@dataclass(frozen=True)
class NoAttack:
    """Strict no-op; installs no hooks and draws no randomness."""

    kind = "none"


@dataclass(frozen=True)
class InterceptResendC:
    """Measure Charlie's in-flight particle and forward the eigenstate."""

    policy: str = POLICY_RANDOM
    kind = "intercept_resend"

    def __post_init__(self) -> None:
        if self.policy not in _POLICIES:
            raise ValueError(f"unknown basis policy {self.policy!r}")

    def apply(self, in_flight: StateVector, rng: RandomStream) -> InterceptResult:
        if self.policy == POLICY_FIXED_Z:
            basis = BASIS_Z
        elif self.policy == POLICY_FIXED_X:
            basis = BASIS_X
        else:
            basis = BASIS_Z if rng.random() < 0.5 else BASIS_X
        bit, _ = qsim.measure_local(in_flight, 0, basis, rng)
        return InterceptResult(qsim.prepare_single(qsim.prep_for(basis, bit)), basis, bit)


@dataclass(frozen=True)
class MeasureDEInX:
    """Relays measure both dealer particles in X before any Bell pairing.

    Each measured particle is re-prepared as the observed eigenstate so
    the Bell announcements can still be produced.
    """

    kind = "measure_de_x"

    def apply_to_ghz(
        self, ghz: StateVector, rng: RandomStream
    ) -> tuple[int, int, StateVector]:
        """X-measure the two distributed GHZ qubits; the dealer qubit collapses.

        Equal outcomes leave the kept qubit in |+>, unequal in |->.
        """
        bit_d, rest = qsim.measure_local(ghz, 1, BASIS_X, rng)
        bit_e, alice = qsim.measure_local(rest, 1, BASIS_X, rng)
        return bit_d, bit_e, alice


@dataclass(frozen=True)
class EntangleAncilla:
    """Entangle a private ancilla onto one in-transit particle."""

    unitary: TwoQubitUnitary
    ancilla: AncillaState
    target: str = "ethan"
    kind = "entangle_ancilla"

    def __post_init__(self) -> None:
        if self.target not in ANCILLA_TARGETS:
            raise ValueError(f"target must be one of {ANCILLA_TARGETS}, got {self.target!r}")


AttackStrategy = NoAttack | InterceptResendC | MeasureDEInX | EntangleAncilla


def intercept_resend_hook(
    in_flight: StateVector, rng: RandomStream, policy: str = POLICY_RANDOM
) -> StateVector:
    """Transit hook form of the intercept-and-resend attack."""
    return InterceptResendC(policy).apply(in_flight, rng).state


def measure_de_hook(
    ghz: StateVector, rng: RandomStream
) -> tuple[int, int, StateVector]:
    """Relay hook form of the X-measurement attack on a GHZ triple."""
    return MeasureDEInX().apply_to_ghz(ghz, rng)


def theoretical_escape(num_checked: int) -> float:
    """Escape probability after ``num_checked`` performed checks, (1/4)**k."""
    if num_checked < 0:
        raise ValueError("num_checked must be >= 0")
    return 0.25**num_checked


def ancilla_residual_error(u: TwoQubitUnitary, ancilla: AncillaState) -> float:
    """Worst-case check error an ancilla unitary induces on Z-basis decoys.

    Enumerates, exactly, every computational-basis (decoy, sharer)
    configuration: the decoy transits through ``u`` with the ancilla, the
    relay announces a Bell outcome, and the error weight is the summed
    Born probability of outcomes the audit rejects. These configurations
    pin the no-particle-flip constraint: the result is zero (to numerical
    precision) iff ``u`` never moves amplitude across the particle's
    computational branches for this ancilla.
    """
    worst = 0.0
    for decoy in (SingleQubitPrep.ZERO, SingleQubitPrep.ONE):
        probe = qsim.tensor(qsim.prepare_single(decoy), ancilla.to_state())
        probe = qsim.apply_two_qubit_unitary(probe, 0, 1, u)
        for sharer in (SingleQubitPrep.ZERO, SingleQubitPrep.ONE):
            # Qubits: particle=0, ancilla=1, sharer=2; the relay pairs 0 and 2.
            full = qsim.tensor(probe, qsim.prepare_single(sharer))
            err = sum(
                prob
                for outcome, prob, _ in qsim.bell_branches(full, 0, 2)
                if decoy_check(decoy, sharer, outcome) is CheckResult.ERROR
            )
            worst = max(worst, err)
    return worst


@dataclass
class DetectionStats:
    """Aggregated check-level and campaign-level detection tallies."""

    checked_rounds: int = 0
    escaped_rounds: int = 0
    campaigns_aborted: int = 0
    campaigns_total: int = 0

    @property
    def empirical_escape_rate(self) -> Optional[float]:
        return self.escaped_rounds / self.checked_rounds if self.checked_rounds else None

    @property
    def abort_rate(self) -> Optional[float]:
        return self.campaigns_aborted / self.campaigns_total if self.campaigns_total else None

    def to_json_dict(self) -> dict:
        return {
            "checked_rounds": self.checked_rounds,
            "escaped_rounds": self.escaped_rounds,
            "empirical_escape_rate": self.empirical_escape_rate,
            "campaigns_aborted": self.campaigns_aborted,
            "campaigns_total": self.campaigns_total,
        }


@dataclass
class EscapeTrialResult:
    """Outcome of truncated escape trials for one checked-round count."""

    num_checked: int
    stats: DetectionStats
    full_escape_campaigns: int

    @property
    def full_escape_rate(self) -> float:
        return self.full_escape_campaigns / self.stats.campaigns_total


def run_escape_trials(
    num_checked: int,
    campaigns: int,
    policy: str = POLICY_RANDOM,
    seed: int = 0,
) -> EscapeTrialResult:
    """Monte-Carlo escape experiment on the attacked relay arm.

    Each campaign simulates decoy rounds on the Charlie-Ethan arm under an
    intercept-and-resend attack and is truncated once exactly
    ``num_checked`` checks were performed (skipped rounds do not count).
    A campaign counts as a full escape when every performed check escaped
    in the tampered-yet-passed sense; it counts as aborted when any check
    errored.
    """
    if num_checked < 1:
        raise ValueError("num_checked must be >= 1")
    attack = InterceptResendC(policy)
    stats = DetectionStats(campaigns_total=campaigns)
    full_escapes = 0
    for campaign in range(campaigns):
        rng = qsim.substream(seed, DOMAIN_ESCAPE, campaign)
        performed = 0
        detected = False
        all_escaped = True
        while performed < num_checked:
            decoy = qsim.ALL_PREPS[int(rng.integers(4))]
            charlie = qsim.ALL_PREPS[int(rng.integers(4))]
            result = attack.apply(qsim.prepare_single(charlie), rng)
            pair = qsim.tensor(qsim.prepare_single(decoy), result.state)
            outcome, _ = qsim.measure_bell(pair, 0, 1, rng)
            check = decoy_check(decoy, charlie, outcome)
            if check is CheckResult.SKIPPED:
                continue
            performed += 1
            stats.checked_rounds += 1
            tampered = result.basis != charlie.basis
            if check is CheckResult.ERROR:
                detected = True
            escaped = tampered and check is CheckResult.OK
            stats.escaped_rounds += int(escaped)
            all_escaped = all_escaped and escaped
        stats.campaigns_aborted += int(detected)
        full_escapes += int(all_escaped)
    return EscapeTrialResult(num_checked, stats, full_escapes)


def block_diagonal_unitary(upper: np.ndarray, lower: np.ndarray) -> TwoQubitUnitary:
    """Unitary acting as ``upper`` on the particle-0 branch, ``lower`` on 1."""
    mat = np.zeros((4, 4), dtype=np.complex128)
    mat[:2, :2] = upper
    mat[2:, 2:] = lower
    return TwoQubitUnitary(mat)


def partial_flip_unitary(epsilon: float) -> TwoQubitUnitary:
    """Rotation leaking amplitude ``epsilon`` across the particle branches.

    On an ancilla prepared as |0>, the attacked particle's flipped branch
    carries exactly |epsilon|**2 probability, so the residual check error
    equals epsilon squared.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    c = np.sqrt(1.0 - epsilon**2)
    mat = np.eye(4, dtype=np.complex128)
    # Rotate within the ancilla-0 plane spanned by |00> and |10>.
    mat[0, 0] = c
    mat[2, 0] = epsilon
    mat[0, 2] = -epsilon
    mat[2, 2] = c
    return TwoQubitUnitary(mat)


def haar_unitary(rng: RandomStream, dim: int = 4) -> np.ndarray:
    """Haar-distributed random unitary matrix (QR with phase fixing)."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def off_block_mass(u: TwoQubitUnitary) -> float:
    """Squared Frobenius norm of the particle-flipping blocks of ``u``."""
    mat = u.entries
    return float(np.sum(np.abs(mat[2:, :2]) ** 2) + np.sum(np.abs(mat[:2, 2:]) ** 2))
