"""Shared brute-force oracles used by several test modules.

Everything here recomputes expected values through exact Born-rule
enumeration in qsim, independently of the compiled rules and counters in
the protocol layer that the tests exercise.
"""

from __future__ import annotations

import numpy as np

from mdiqss import qsim
from mdiqss.protocol import CheckResult, decoy_check
from mdiqss.qsim import ALL_PREPS, BASIS_X, BASIS_Z, NoiseSpec, SingleQubitPrep

PAULI_LABELS = ("I", "X", "Y", "Z")


def pauli_probabilities(spec: NoiseSpec) -> dict[str, float]:
    return {
        "I": 1.0 - spec.total,
        "X": spec.p_x,
        "Y": spec.p_y,
        "Z": spec.p_z,
    }


def arm_check_error_oracle(
    noise_decoy: NoiseSpec, noise_sharer: NoiseSpec
) -> dict[str, float]:
    """Exact expected decoy-check error rates for one relay arm.

    Enumerates every Pauli-insertion branch on the decoy and sharer
    transits and every same-basis (decoy, sharer) pair, then weights the
    Bell outcomes that the check rejects. Returns per-basis rates plus the
    pooled rate under uniform preparation draws.
    """
    d_probs = pauli_probabilities(noise_decoy)
    s_probs = pauli_probabilities(noise_sharer)
    totals = {BASIS_Z: 0.0, BASIS_X: 0.0}
    counts = {BASIS_Z: 0, BASIS_X: 0}
    for decoy in ALL_PREPS:
        for sharer in ALL_PREPS:
            if decoy.basis != sharer.basis:
                continue
            counts[decoy.basis] += 1
            err = 0.0
            for pd in PAULI_LABELS:
                for ps in PAULI_LABELS:
                    weight = d_probs[pd] * s_probs[ps]
                    if weight == 0.0:
                        continue
                    state = qsim.tensor(
                        qsim.apply_pauli(qsim.prepare_single(decoy), 0, pd),
                        qsim.apply_pauli(qsim.prepare_single(sharer), 0, ps),
                    )
                    for outcome, prob, _ in qsim.bell_branches(state, 0, 1):
                        if decoy_check(decoy, sharer, outcome) is CheckResult.ERROR:
                            err += weight * prob
            totals[decoy.basis] += err
    z_rate = totals[BASIS_Z] / counts[BASIS_Z]
    x_rate = totals[BASIS_X] / counts[BASIS_X]
    return {"Z": z_rate, "X": x_rate, "combined": 0.5 * (z_rate + x_rate)}


def collapse_prep(state: qsim.StateVector) -> SingleQubitPrep:
    """Identify a single-qubit state as a preparation-set element."""
    for prep in ALL_PREPS:
        ref = qsim.prepare_single(prep).amplitudes
        if abs(np.vdot(ref, state.amplitudes)) ** 2 > 1.0 - 1e-9:
            return prep
    raise AssertionError("state is not a preparation-set element")
