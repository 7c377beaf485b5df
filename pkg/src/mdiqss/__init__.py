"""Exact simulator for three-party measurement-device-independent quantum secret sharing.

The package is organized as a small numpy library:

* :mod:`mdiqss.qsim`      exact few-qubit statevector kernel
* :mod:`mdiqss.protocol`  round orchestration, decoy checks, sifting
* :mod:`mdiqss.adversary` participant attacks and detection statistics
* :mod:`mdiqss.postproc`  reconciliation, privacy amplification, one-time pad
* :mod:`mdiqss.cli`       batch driver emitting machine-readable reports
"""

from .qsim import (
    AncillaState,
    BellOutcome,
    NoiseSpec,
    SingleQubitPrep,
    StateVector,
    TwoQubitUnitary,
)
from .protocol import (
    ChannelErrorReport,
    CheckResult,
    DecoyRound,
    GhzRound,
    ProtocolConfig,
    RoundRecord,
    SiftedKeys,
    Transcript,
    decoy_check,
    reconstruct_bit,
    run_campaign,
    run_round,
    sift,
)
from .adversary import (
    DetectionStats,
    EntangleAncilla,
    InterceptResendC,
    MeasureDEInX,
    NoAttack,
    ancilla_residual_error,
    run_escape_trials,
    theoretical_escape,
)
from .postproc import (
    ReconciliationReport,
    SecretSharingSession,
    ToeplitzSeed,
    otp_decrypt,
    otp_encrypt,
    pa_output_length,
    reconcile,
    share_secret,
    toeplitz_hash,
)

__version__ = "0.1.0"

__all__ = [
    "AncillaState",
    "BellOutcome",
    "ChannelErrorReport",
    "CheckResult",
    "DecoyRound",
    "DetectionStats",
    "EntangleAncilla",
    "GhzRound",
    "InterceptResendC",
    "MeasureDEInX",
    "NoAttack",
    "NoiseSpec",
    "ProtocolConfig",
    "ReconciliationReport",
    "RoundRecord",
    "SecretSharingSession",
    "SiftedKeys",
    "SingleQubitPrep",
    "StateVector",
    "ToeplitzSeed",
    "Transcript",
    "TwoQubitUnitary",
    "ancilla_residual_error",
    "decoy_check",
    "otp_decrypt",
    "otp_encrypt",
    "pa_output_length",
    "reconcile",
    "reconstruct_bit",
    "run_campaign",
    "run_escape_trials",
    "run_round",
    "share_secret",
    "sift",
    "theoretical_escape",
    "toeplitz_hash",
]
