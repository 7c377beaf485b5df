import numpy as np
import pytest

from mdiqss import adversary, protocol, qsim
from mdiqss.adversary import (
    EntangleAncilla,
    InterceptResendC,
    MeasureDEInX,
    NoAttack,
    POLICY_FIXED_X,
    POLICY_FIXED_Z,
    POLICY_RANDOM,
    ancilla_residual_error,
    block_diagonal_unitary,
    haar_unitary,
    intercept_resend_hook,
    measure_de_hook,
    off_block_mass,
    partial_flip_unitary,
    run_escape_trials,
    theoretical_escape,
)
from mdiqss.protocol import CheckResult, ProtocolConfig, decoy_check, run_campaign
from mdiqss.qsim import (
    ALL_PREPS,
    AncillaState,
    BASIS_X,
    BASIS_Z,
    SingleQubitPrep,
    TwoQubitUnitary,
)

P = SingleQubitPrep


def rng_for(tag: int) -> np.random.Generator:
    return qsim.substream(77, 60, tag)


class TestInterceptResend:
    def test_x_eigenstate_passes_through(self):
        attack = InterceptResendC(POLICY_FIXED_X)
        rng = rng_for(0)
        for sent in (P.PLUS, P.MINUS):
            for _ in range(20):
                result = attack.apply(qsim.prepare_single(sent), rng)
                assert result.basis == BASIS_X
                assert result.bit == sent.bit
                assert np.allclose(
                    result.state.amplitudes, qsim.prepare_single(sent).amplitudes
                )

    def test_wrong_basis_resend_halves_z_check(self):
        # Charlie sent |0>, the attacker measured X: whatever eigenstate is
        # forwarded, a Z-matched check accepts with probability exactly 1/2.
        for fake in (P.PLUS, P.MINUS):
            for decoy in (P.ZERO, P.ONE):
                pair = qsim.tensor(qsim.prepare_single(decoy), qsim.prepare_single(fake))
                err = sum(
                    prob
                    for outcome, prob, _ in qsim.bell_branches(pair, 0, 1)
                    if decoy_check(decoy, P.ZERO, outcome) is CheckResult.ERROR
                )
                assert err == pytest.approx(0.5, abs=1e-12)

    def test_matched_attack_basis_never_errors(self):
        # Fixed-X attack, X decoy, X sharer: eigenstate pass-through means
        # the performed check can never reject.
        attack = InterceptResendC(POLICY_FIXED_X)
        rng = rng_for(1)
        for decoy in (P.PLUS, P.MINUS):
            for charlie in (P.PLUS, P.MINUS):
                for _ in range(10):
                    result = attack.apply(qsim.prepare_single(charlie), rng)
                    pair = qsim.tensor(qsim.prepare_single(decoy), result.state)
                    outcome, _ = qsim.measure_bell(pair, 0, 1, rng)
                    assert decoy_check(decoy, charlie, outcome) is CheckResult.OK

    def test_escape_rate_quarter_per_checked_round(self):
        trial = run_escape_trials(1, 10_000, policy=POLICY_RANDOM, seed=5)
        assert trial.stats.checked_rounds == 10_000
        assert abs(trial.stats.empirical_escape_rate - 0.25) < 0.02

    def test_hook_surface(self):
        rng = rng_for(2)
        forwarded = intercept_resend_hook(
            qsim.prepare_single(P.ZERO), rng, policy=POLICY_FIXED_Z
        )
        assert np.allclose(forwarded.amplitudes, [1, 0])

    def test_campaign_ethan_arm_error_rate(self):
        config = ProtocolConfig(ghz_prob=0.2, rounds=6000, qber_threshold=1.0, seed=6)
        transcript = run_campaign(config, InterceptResendC(POLICY_RANDOM))
        report = transcript.report
        # Only the attacked arm sees errors; per performed check the error
        # probability is 1/4 under the random per-round policy.
        assert report.david.rate == 0.0
        n = report.ethan.checked
        sigma = (0.25 * 0.75 / n) ** 0.5
        assert abs(report.ethan.rate - 0.25) < 4 * sigma


class TestMeasureDE:
    def test_ghz_collapse_follows_relay_bits(self):
        rng = rng_for(3)
        plus = qsim.prepare_single(P.PLUS).amplitudes
        minus = qsim.prepare_single(P.MINUS).amplitudes
        seen = set()
        for _ in range(200):
            bit_d, bit_e, alice = measure_de_hook(qsim.prepare_ghz(), rng)
            seen.add((bit_d, bit_e))
            expected = plus if bit_d == bit_e else minus
            assert abs(np.vdot(expected, alice.amplitudes)) ** 2 == pytest.approx(
                1.0, abs=1e-12
            )
        assert seen == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_decoy_check_error_quarter_per_arm(self):
        # Exact enumeration over same-basis pairs and X-collapse branches:
        # Z pairs error with probability 1/2, X pairs never, average 1/4.
        total = 0.0
        pairs = 0
        for decoy in ALL_PREPS:
            for sharer in ALL_PREPS:
                if decoy.basis != sharer.basis:
                    continue
                pairs += 1
                err = 0.0
                for bit, p_collapse, _ in qsim.local_branches(
                    qsim.prepare_single(decoy), 0, BASIS_X
                ):
                    if p_collapse == 0.0:
                        continue
                    fake = qsim.prepare_single(qsim.prep_for(BASIS_X, bit))
                    pair = qsim.tensor(fake, qsim.prepare_single(sharer))
                    err += p_collapse * sum(
                        prob
                        for outcome, prob, _ in qsim.bell_branches(pair, 0, 1)
                        if decoy_check(decoy, sharer, outcome) is CheckResult.ERROR
                    )
                total += err
        assert pairs == 8
        assert total / pairs == pytest.approx(0.25, abs=1e-12)

    def test_campaign_rates_match_enumeration(self):
        config = ProtocolConfig(ghz_prob=0.3, rounds=8000, qber_threshold=1.0, seed=7)
        report = run_campaign(config, MeasureDEInX()).report
        for arm in (report.david, report.ethan):
            sigma_z = (0.5 * 0.5 / arm.z_checked) ** 0.5
            assert abs(arm.z_rate - 0.5) < 4 * sigma_z
            assert arm.x_rate == 0.0


class TestAncillaAttack:
    def test_identity_unitary_is_invisible(self):
        for alpha, beta in ((1.0, 0.0), (0.6, 0.8), (0.5**0.5, 0.5**0.5 * 1j)):
            err = ancilla_residual_error(TwoQubitUnitary.identity(), AncillaState(alpha, beta))
            assert err <= 1e-12

    def test_strong_flip_exceeds_quarter(self):
        # Half the particle-0 branch mass moved across: X tensor Hadamard
        # sends |0>|0> to |1>|+>, a maximal flip on the probe.
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        u = TwoQubitUnitary(np.kron(x, h))
        err = ancilla_residual_error(u, AncillaState(1.0, 0.0))
        assert err >= 0.25

    @pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
    def test_partial_flip_law(self, eps):
        ancilla = AncillaState(1.0, 0.0)
        u = partial_flip_unitary(eps)
        # Independent route: read the flipped-branch weight straight off
        # the evolved amplitudes of decoy tensor ancilla.
        probe = qsim.apply_two_qubit_unitary(
            qsim.tensor(qsim.prepare_single(P.ZERO), ancilla.to_state()), 0, 1, u
        )
        flipped_mass = float(np.sum(np.abs(probe.amplitudes[2:]) ** 2))
        assert flipped_mass == pytest.approx(eps**2, abs=1e-12)
        assert ancilla_residual_error(u, ancilla) == pytest.approx(flipped_mass, abs=1e-12)

    def test_zero_iff_block_diagonal(self):
        rng = rng_for(4)
        ancilla = AncillaState(0.8, 0.6)
        for _ in range(25):
            u_block = block_diagonal_unitary(haar_unitary(rng, 2), haar_unitary(rng, 2))
            assert ancilla_residual_error(u_block, ancilla) <= 1e-12
        for _ in range(25):
            u = TwoQubitUnitary(haar_unitary(rng, 4))
            if off_block_mass(u) > 1e-4:
                assert ancilla_residual_error(u, ancilla) > 0.0

    def test_target_validation(self):
        with pytest.raises(ValueError):
            EntangleAncilla(TwoQubitUnitary.identity(), AncillaState(1, 0), target="dealer")

    def test_block_diagonal_attack_passes_campaign_checks(self):
        rng = rng_for(8)
        attack = EntangleAncilla(
            block_diagonal_unitary(haar_unitary(rng, 2), haar_unitary(rng, 2)),
            AncillaState(1.0, 0.0),
            target="ethan",
        )
        config = ProtocolConfig(ghz_prob=0.3, rounds=3000, seed=9)
        report = run_campaign(config, attack).report
        # Computational-basis checks stay silent for block-diagonal
        # transits; X-basis decoys may still fire when the blocks differ.
        assert report.ethan.z_errors == 0
        assert report.david.errors == 0

    def test_partial_flip_attack_detected_at_scale(self):
        attack = EntangleAncilla(
            partial_flip_unitary(0.5), AncillaState(1.0, 0.0), target="ethan"
        )
        config = ProtocolConfig(ghz_prob=0.3, rounds=4000, qber_threshold=0.01, seed=10)
        transcript = run_campaign(config, attack)
        assert transcript.report.ethan.z_rate > 0.1
        assert transcript.aborted


class TestEscapeScaling:
    def test_theoretical_escape_values(self):
        assert theoretical_escape(0) == 1.0
        assert theoretical_escape(2) == 0.0625
        with pytest.raises(ValueError):
            theoretical_escape(-1)

    def test_campaign_escape_matches_theory(self):
        for k in (1, 2):
            trials = 6000
            result = run_escape_trials(k, trials, seed=11 + k)
            q = theoretical_escape(k)
            sigma = (q * (1 - q) / trials) ** 0.5
            assert abs(result.full_escape_rate - q) < 3 * sigma

    def test_escape_decays_exponentially(self):
        ks = np.array([1, 2, 3, 4])
        freqs = []
        for k in ks:
            result = run_escape_trials(int(k), 15_000, seed=12)
            freqs.append(result.full_escape_rate)
        slope = np.polyfit(ks, np.log(freqs), 1)[0]
        assert abs(slope - np.log(0.25)) < 0.1 * abs(np.log(0.25))


class TestNoAttack:
    def test_transcripts_bit_identical(self):
        config = ProtocolConfig(ghz_prob=0.6, rounds=400, seed=13)
        bare = run_campaign(config, None)
        hooked = run_campaign(config, NoAttack())
        assert bare.records == hooked.records
        assert bare.records_jsonl() == hooked.records_jsonl()

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            InterceptResendC("always_x")
