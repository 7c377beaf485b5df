"""Round orchestration, decoy checks, sifting and share reconstruction.

One round of the protocol: the dealer Alice either prepares a GHZ triple
(keeping one qubit, sending one each to the relays David and Ethan) or two
single-qubit decoys; the sharers Bob and Charlie always send a random
preparation state to their relay; each relay announces a Bell-state
measurement on its incoming pair. In GHZ rounds Alice measures her qubit
when the sharers' bases agree; in decoy rounds she audits the announced
Bell outcomes against what she and the sharer actually sent.

All randomness flows through per-round substreams derived from the
campaign seed, so campaigns are reproducible bit for bit and rounds may be
executed in any order or in parallel.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Optional, Sequence, Union

from . import qsim
from .qsim import (
    BASIS_X,
    BASIS_Z,
    BellOutcome,
    NoiseSpec,
    NOISELESS,
    RandomStream,
    SingleQubitPrep,
)

if TYPE_CHECKING:  # avoids a runtime import cycle; adversary imports protocol
    from .adversary import AttackStrategy

#: Substream domain tag for per-round randomness.
DOMAIN_ROUND = 0

PROCEED = "PROCEED"
ABORT = "ABORT"


class CheckResult(enum.Enum):
    NOT_APPLICABLE = "NOT_APPLICABLE"
    SKIPPED = "SKIPPED"
    OK = "OK"
    ERROR = "ERROR"


@dataclass(frozen=True)
class GhzRound:
    """Round in which Alice distributed a GHZ triple."""


@dataclass(frozen=True)
class DecoyRound:
    """Round in which Alice sent two independent decoy states instead."""

    decoy_david: SingleQubitPrep
    decoy_ethan: SingleQubitPrep


RoundKind = Union[GhzRound, DecoyRound]


@dataclass(frozen=True)
class MeasuredBit:
    basis: str
    bit: int


@dataclass(frozen=True)
class RoundRecord:
    """Public and private transcript of one protocol round."""

    index: int
    kind: RoundKind
    bob_prep: SingleQubitPrep
    charlie_prep: SingleQubitPrep
    bsm_david: BellOutcome
    bsm_ethan: BellOutcome
    bob_announced: str
    charlie_announced: str
    alice_result: Optional[MeasuredBit]
    check_david: CheckResult
    check_ethan: CheckResult

    @property
    def is_ghz(self) -> bool:
        return isinstance(self.kind, GhzRound)

    def to_json_dict(self) -> dict:
        decoy = self.kind if isinstance(self.kind, DecoyRound) else None
        return {
            "index": self.index,
            "kind": "GHZ" if self.is_ghz else "DECOY",
            "decoy_david": decoy.decoy_david.value if decoy else None,
            "decoy_ethan": decoy.decoy_ethan.value if decoy else None,
            "bob_prep": self.bob_prep.value,
            "charlie_prep": self.charlie_prep.value,
            "bsm_david": self.bsm_david.value,
            "bsm_ethan": self.bsm_ethan.value,
            "bob_announced": self.bob_announced,
            "charlie_announced": self.charlie_announced,
            "alice_result": (
                {"basis": self.alice_result.basis, "bit": self.alice_result.bit}
                if self.alice_result
                else None
            ),
            "check_david": self.check_david.value,
            "check_ethan": self.check_ethan.value,
        }


@dataclass
class RoundTrace:
    """Attack-side bookkeeping for one round; never serialized.

    ``charlie_tampered`` is None when no resend attack ran, otherwise True
    when the forwarded state differed from what Charlie actually sent
    (the resend basis missed the preparation basis).
    """

    charlie_resend_basis: Optional[str] = None
    charlie_tampered: Optional[bool] = None
    relay_x_bits: Optional[tuple[int, int]] = None
    ancilla_target: Optional[str] = None


@dataclass(frozen=True)
class ProtocolConfig:
    """Campaign parameters.

    ``ghz_prob`` is the per-round probability of a GHZ round (decoys are
    sent otherwise); values of exactly 0 or 1 are allowed for targeted
    experiments. Noise specs are per directed transit.
    """

    ghz_prob: float = 0.8
    rounds: int = 1000
    qber_threshold: float = 0.05
    noise_alice_david: NoiseSpec = NOISELESS
    noise_alice_ethan: NoiseSpec = NOISELESS
    noise_bob_david: NoiseSpec = NOISELESS
    noise_charlie_ethan: NoiseSpec = NOISELESS
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ghz_prob <= 1.0:
            raise ValueError(f"ghz_prob must be in [0, 1], got {self.ghz_prob}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if not 0.0 <= self.qber_threshold <= 1.0:
            raise ValueError(f"qber_threshold must be in [0, 1], got {self.qber_threshold}")

    def to_json_dict(self) -> dict:
        def noise(spec: NoiseSpec) -> dict:
            return {"p_x": spec.p_x, "p_y": spec.p_y, "p_z": spec.p_z}

        return {
            "ghz_prob": self.ghz_prob,
            "rounds": self.rounds,
            "qber_threshold": self.qber_threshold,
            "noise_alice_david": noise(self.noise_alice_david),
            "noise_alice_ethan": noise(self.noise_alice_ethan),
            "noise_bob_david": noise(self.noise_bob_david),
            "noise_charlie_ethan": noise(self.noise_charlie_ethan),
            "seed": self.seed,
        }


def alice_basis_action(bob_basis: str, charlie_basis: str) -> Optional[str]:
    """Basis Alice measures her kept qubit in, or None when bases differ."""
    return bob_basis if bob_basis == charlie_basis else None


def decoy_check(
    decoy: SingleQubitPrep, sharer: SingleQubitPrep, bsm: BellOutcome
) -> CheckResult:
    """Audit one announced Bell outcome against a decoy/sharer pair.

    Skipped when the two preparation bases differ (no action is taken).
    For a Z-basis pair the Bell parity bit must equal the XOR of the two
    classical bits; for an X-basis pair the sign bit must.
    """
    if decoy.basis != sharer.basis:
        return CheckResult.SKIPPED
    expected = decoy.bit ^ sharer.bit
    observed = bsm.parity_bit if decoy.basis == BASIS_Z else bsm.sign_bit
    return CheckResult.OK if observed == expected else CheckResult.ERROR


def reconstruct_bit(
    bob_bit: int, charlie_bit: int, bsm_david: BellOutcome, bsm_ethan: BellOutcome
) -> int:
    """Sharers' joint reconstruction of Alice's X-basis bit.

    Compiled parity rule for X/X rounds: the two preparation bits XORed
    with both announced Bell sign bits. Validated exhaustively against
    Born-rule simulation of the collapsed dealer qubit.
    """
    return bob_bit ^ charlie_bit ^ bsm_david.sign_bit ^ bsm_ethan.sign_bit


def _draw_prep(rng: RandomStream) -> SingleQubitPrep:
    return qsim.ALL_PREPS[int(rng.integers(4))]


def _execute_round(
    config: ProtocolConfig,
    attack: Optional["AttackStrategy"],
    rng: RandomStream,
    index: int = 0,
) -> tuple[RoundRecord, RoundTrace]:
    """Run one full round. Draw order is fixed and documented.

    Draws: round kind, decoys (decoy rounds only), Bob's prep, Charlie's
    prep, channel noise for the David/Ethan/Bob/Charlie transits, attack
    randomness, David's BSM, Ethan's BSM, Alice's measurement (when the
    announced bases coincide in a GHZ round).
    """
    is_ghz = rng.random() < config.ghz_prob
    kind: RoundKind
    if is_ghz:
        kind = GhzRound()
    else:
        kind = DecoyRound(_draw_prep(rng), _draw_prep(rng))
    bob_prep = _draw_prep(rng)
    charlie_prep = _draw_prep(rng)

    # Particle blocks stay separate until each relay joins its pair.
    if is_ghz:
        core_labels = ["alice", "david", "ethan"]
        core = qsim.prepare_ghz()
    else:
        core_labels = ["david", "ethan"]
        core = qsim.tensor(
            qsim.prepare_single(kind.decoy_david), qsim.prepare_single(kind.decoy_ethan)
        )
    bob_q = qsim.prepare_single(bob_prep)
    charlie_q = qsim.prepare_single(charlie_prep)
    charlie_labels = ["charlie"]

    core, _ = qsim.apply_pauli_noise(core, core_labels.index("david"), config.noise_alice_david, rng)
    core, _ = qsim.apply_pauli_noise(core, core_labels.index("ethan"), config.noise_alice_ethan, rng)
    bob_q, _ = qsim.apply_pauli_noise(bob_q, 0, config.noise_bob_david, rng)
    charlie_q, _ = qsim.apply_pauli_noise(charlie_q, 0, config.noise_charlie_ethan, rng)

    trace = RoundTrace()
    attack_kind = getattr(attack, "kind", "none") if attack is not None else "none"

    if attack_kind == "intercept_resend":
        result = attack.apply(charlie_q, rng)
        trace.charlie_resend_basis = result.basis
        trace.charlie_tampered = result.basis != charlie_prep.basis
        charlie_q = result.state
    elif attack_kind == "measure_de_x":
        if is_ghz:
            bit_d, bit_e, alice_q = attack.apply_to_ghz(core, rng)
            core = qsim.tensor(
                qsim.tensor(alice_q, qsim.prepare_single(qsim.prep_for(BASIS_X, bit_d))),
                qsim.prepare_single(qsim.prep_for(BASIS_X, bit_e)),
            )
        else:
            bit_d, rest = qsim.measure_local(core, 0, BASIS_X, rng)
            bit_e, _ = qsim.measure_local(rest, 0, BASIS_X, rng)
            core = qsim.tensor(
                qsim.prepare_single(qsim.prep_for(BASIS_X, bit_d)),
                qsim.prepare_single(qsim.prep_for(BASIS_X, bit_e)),
            )
        trace.relay_x_bits = (bit_d, bit_e)
    elif attack_kind == "entangle_ancilla":
        trace.ancilla_target = attack.target
        if attack.target == "charlie":
            charlie_q = qsim.tensor(charlie_q, attack.ancilla.to_state())
            charlie_labels = ["charlie", "ancilla"]
            charlie_q = qsim.apply_two_qubit_unitary(charlie_q, 0, 1, attack.unitary)
        else:
            pos = core_labels.index(attack.target)
            core = qsim.tensor(core, attack.ancilla.to_state())
            core_labels = core_labels + ["ancilla"]
            core = qsim.apply_two_qubit_unitary(core, pos, len(core_labels) - 1, attack.unitary)
    elif attack_kind != "none":
        raise ValueError(f"unknown attack kind {attack_kind!r}")

    labels = core_labels + ["bob"] + charlie_labels
    state = qsim.tensor(qsim.tensor(core, bob_q), charlie_q)

    def consume_pair(lbl1: str, lbl2: str) -> BellOutcome:
        nonlocal state, labels
        p1, p2 = labels.index(lbl1), labels.index(lbl2)
        outcome, state = qsim.measure_bell(state, p1, p2, rng)
        labels = [l for i, l in enumerate(labels) if i not in (p1, p2)]
        return outcome

    bsm_david = consume_pair("david", "bob")
    bsm_ethan = consume_pair("ethan", "charlie")

    alice_result: Optional[MeasuredBit] = None
    if is_ghz:
        bob_announced = bob_prep.basis
        charlie_announced = charlie_prep.basis
        check_david = check_ethan = CheckResult.NOT_APPLICABLE
        action = alice_basis_action(bob_prep.basis, charlie_prep.basis)
        if action is not None:
            bit, state = qsim.measure_local(state, labels.index("alice"), action, rng)
            labels.remove("alice")
            alice_result = MeasuredBit(action, bit)
    else:
        # Decoy rounds disclose the full preparation, not just the basis.
        bob_announced = bob_prep.value
        charlie_announced = charlie_prep.value
        check_david = decoy_check(kind.decoy_david, bob_prep, bsm_david)
        check_ethan = decoy_check(kind.decoy_ethan, charlie_prep, bsm_ethan)

    record = RoundRecord(
        index=index,
        kind=kind,
        bob_prep=bob_prep,
        charlie_prep=charlie_prep,
        bsm_david=bsm_david,
        bsm_ethan=bsm_ethan,
        bob_announced=bob_announced,
        charlie_announced=charlie_announced,
        alice_result=alice_result,
        check_david=check_david,
        check_ethan=check_ethan,
    )
    return record, trace


def run_round(
    config: ProtocolConfig,
    attack: Optional["AttackStrategy"] = None,
    rng: Optional[RandomStream] = None,
    index: int = 0,
) -> RoundRecord:
    """Execute one round and return its transcript record."""
    if rng is None:
        rng = qsim.substream(config.seed, DOMAIN_ROUND, index)
    record, _ = _execute_round(config, attack, rng, index)
    return record


@lru_cache(maxsize=16)
def _ghz_round_state(
    bob_prep: SingleQubitPrep, charlie_prep: SingleQubitPrep
) -> qsim.StateVector:
    # StateVector is immutable, so the cached object is shared safely.
    return qsim.tensor(
        qsim.tensor(qsim.prepare_ghz(), qsim.prepare_single(bob_prep)),
        qsim.prepare_single(charlie_prep),
    )


def run_ghz_round(
    bob_prep: SingleQubitPrep, charlie_prep: SingleQubitPrep, rng: RandomStream
) -> tuple[BellOutcome, BellOutcome, Optional[int]]:
    """Noise-free, attack-free GHZ round with fixed sharer preparations.

    Returns both announced Bell outcomes and Alice's measured bit in the
    common basis (None when the bases differ). Used by correlation tests
    and statistics that need many rounds of a specific kind.
    """
    state = _ghz_round_state(bob_prep, charlie_prep)
    # Labels: alice=0, david=1, ethan=2, bob=3, charlie=4.
    bsm_david, state = qsim.measure_bell(state, 1, 3, rng)
    # Remaining: alice=0, ethan=1, charlie=2.
    bsm_ethan, state = qsim.measure_bell(state, 1, 2, rng)
    action = alice_basis_action(bob_prep.basis, charlie_prep.basis)
    alice_bit: Optional[int] = None
    if action is not None:
        alice_bit, _ = qsim.measure_local(state, 0, action, rng)
    return bsm_david, bsm_ethan, alice_bit


@dataclass
class SiftedKeys:
    """Key material extracted from a campaign's GHZ rounds.

    Raw-key entries come from rounds where both announced bases were X;
    Z/Z rounds feed error estimation for privacy amplification; mixed-basis
    GHZ rounds are discarded outright. Shares are stored per round as
    (bob bit, charlie bit, David sign/parity bit, Ethan sign/parity bit).
    """

    raw_indices: list[int] = field(default_factory=list)
    raw_alice_bits: list[int] = field(default_factory=list)
    raw_shares: list[tuple[int, int, int, int]] = field(default_factory=list)
    z_indices: list[int] = field(default_factory=list)
    z_alice_bits: list[int] = field(default_factory=list)
    z_shares: list[tuple[int, int, int, int]] = field(default_factory=list)
    discarded_count: int = 0

    def sharer_raw_key(self) -> list[int]:
        """Raw key as the cooperating sharers reconstruct it."""
        return [
            reconstruct_bit(
                bob,
                charlie,
                _SIGN_TO_OUTCOME[sign_d],
                _SIGN_TO_OUTCOME[sign_e],
            )
            for bob, charlie, sign_d, sign_e in self.raw_shares
        ]

    def z_error_rate(self) -> Optional[float]:
        """Mismatch rate of the two single-sharer Z-round identities.

        Each Z/Z round yields two comparisons: Alice's bit against
        bob XOR parity(David) and against charlie XOR parity(Ethan).
        """
        if not self.z_alice_bits:
            return None
        mismatches = 0
        for alice, (bob, charlie, par_d, par_e) in zip(self.z_alice_bits, self.z_shares):
            mismatches += int(alice != bob ^ par_d) + int(alice != charlie ^ par_e)
        return mismatches / (2 * len(self.z_alice_bits))

    def to_json_dict(self) -> dict:
        return {
            "raw_indices": self.raw_indices,
            "raw_alice_bits": self.raw_alice_bits,
            "raw_shares": [list(s) for s in self.raw_shares],
            "z_indices": self.z_indices,
            "z_alice_bits": self.z_alice_bits,
            "z_shares": [list(s) for s in self.z_shares],
            "discarded_count": self.discarded_count,
        }


# reconstruct_bit only consumes sign bits, so any representative works.
_SIGN_TO_OUTCOME = {0: BellOutcome.PHI_PLUS, 1: BellOutcome.PHI_MINUS}


def sift(records: Sequence[RoundRecord]) -> SiftedKeys:
    """Partition GHZ rounds into raw-key, estimation and discarded sets."""
    keys = SiftedKeys()
    for rec in records:
        if not rec.is_ghz:
            continue
        if rec.alice_result is None:
            keys.discarded_count += 1
            continue
        basis = rec.alice_result.basis
        if basis == BASIS_X:
            keys.raw_indices.append(rec.index)
            keys.raw_alice_bits.append(rec.alice_result.bit)
            keys.raw_shares.append(
                (
                    rec.bob_prep.bit,
                    rec.charlie_prep.bit,
                    rec.bsm_david.sign_bit,
                    rec.bsm_ethan.sign_bit,
                )
            )
        else:
            keys.z_indices.append(rec.index)
            keys.z_alice_bits.append(rec.alice_result.bit)
            keys.z_shares.append(
                (
                    rec.bob_prep.bit,
                    rec.charlie_prep.bit,
                    rec.bsm_david.parity_bit,
                    rec.bsm_ethan.parity_bit,
                )
            )
    return keys


@dataclass
class ArmErrorStats:
    """Decoy-check tallies for one relay arm, split by check basis."""

    checked: int = 0
    errors: int = 0
    z_checked: int = 0
    z_errors: int = 0
    x_checked: int = 0
    x_errors: int = 0

    def record(self, basis: str, result: CheckResult) -> None:
        if result not in (CheckResult.OK, CheckResult.ERROR):
            return
        err = int(result is CheckResult.ERROR)
        self.checked += 1
        self.errors += err
        if basis == BASIS_Z:
            self.z_checked += 1
            self.z_errors += err
        else:
            self.x_checked += 1
            self.x_errors += err

    @property
    def rate(self) -> Optional[float]:
        return self.errors / self.checked if self.checked else None

    @property
    def z_rate(self) -> Optional[float]:
        return self.z_errors / self.z_checked if self.z_checked else None

    @property
    def x_rate(self) -> Optional[float]:
        return self.x_errors / self.x_checked if self.x_checked else None

    def to_json_dict(self) -> dict:
        return {
            "checked": self.checked,
            "errors": self.errors,
            "rate": self.rate,
            "z_checked": self.z_checked,
            "z_errors": self.z_errors,
            "z_rate": self.z_rate,
            "x_checked": self.x_checked,
            "x_errors": self.x_errors,
            "x_rate": self.x_rate,
        }


@dataclass
class ChannelErrorReport:
    """Per-arm and pooled decoy-check error rates for one campaign.

    Rates are None (serialized as null) when no check contributed, which
    is distinct from a measured rate of zero.
    """

    david: ArmErrorStats
    ethan: ArmErrorStats

    @property
    def combined_checked(self) -> int:
        return self.david.checked + self.ethan.checked

    @property
    def combined_errors(self) -> int:
        return self.david.errors + self.ethan.errors

    @property
    def combined_rate(self) -> Optional[float]:
        return self.combined_errors / self.combined_checked if self.combined_checked else None

    def to_json_dict(self) -> dict:
        return {
            "david": self.david.to_json_dict(),
            "ethan": self.ethan.to_json_dict(),
            "combined_checked": self.combined_checked,
            "combined_errors": self.combined_errors,
            "combined_rate": self.combined_rate,
        }


def estimate_error_rate(records: Sequence[RoundRecord]) -> ChannelErrorReport:
    """Tally decoy-check outcomes; skipped checks never enter denominators."""
    david = ArmErrorStats()
    ethan = ArmErrorStats()
    for rec in records:
        if rec.is_ghz:
            continue
        assert isinstance(rec.kind, DecoyRound)
        david.record(rec.kind.decoy_david.basis, rec.check_david)
        ethan.record(rec.kind.decoy_ethan.basis, rec.check_ethan)
    return ChannelErrorReport(david=david, ethan=ethan)


@dataclass
class Transcript:
    """Everything one campaign produced, plus the threshold decision."""

    config: ProtocolConfig
    records: list[RoundRecord]
    report: ChannelErrorReport
    decision: str
    sifted: Optional[SiftedKeys]
    traces: list[RoundTrace]

    @property
    def aborted(self) -> bool:
        return self.decision == ABORT

    def records_jsonl(self) -> str:
        import json

        return "".join(
            json.dumps(rec.to_json_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            for rec in self.records
        )


def run_campaign(
    config: ProtocolConfig, attack: Optional["AttackStrategy"] = None
) -> Transcript:
    """Run all rounds, estimate channel error, decide abort or proceed.

    When no check produced data the campaign proceeds (there is no
    evidence to abort on); otherwise it aborts iff the pooled error rate
    exceeds the configured threshold. Keys are sifted only on proceed.
    """
    records: list[RoundRecord] = []
    traces: list[RoundTrace] = []
    for i in range(config.rounds):
        rng = qsim.substream(config.seed, DOMAIN_ROUND, i)
        record, trace = _execute_round(config, attack, rng, index=i)
        records.append(record)
        traces.append(trace)
    report = estimate_error_rate(records)
    rate = report.combined_rate
    decision = ABORT if rate is not None and rate > config.qber_threshold else PROCEED
    sifted = sift(records) if decision == PROCEED else None
    return Transcript(
        config=config,
        records=records,
        report=report,
        decision=decision,
        sifted=sifted,
        traces=traces,
    )
