"""Ancilla-entangling attacks and the no-flip constraint
======================================================

A general two-qubit unitary couples an attacker ancilla to one in-transit
particle. Computational-basis decoy checks reject it with probability
equal to the particle-flipping amplitude mass, so staying invisible to
them forces the unitary to act block-diagonally on the particle.
"""

import numpy as np

from mdiqss import qsim
from mdiqss.adversary import (
    ancilla_residual_error,
    block_diagonal_unitary,
    haar_unitary,
    off_block_mass,
    partial_flip_unitary,
)
from mdiqss.qsim import AncillaState, TwoQubitUnitary

ancilla = AncillaState(1.0, 0.0)

print("flip-amplitude family: residual check error equals epsilon^2")
print(f"{'epsilon':>8} {'residual':>10} {'epsilon^2':>10}")
for eps in (0.0, 0.1, 0.2, 0.3, 0.5):
    residual = ancilla_residual_error(partial_flip_unitary(eps), ancilla)
    print(f"{eps:>8.2f} {residual:>10.4f} {eps**2:>10.4f}")

rng = qsim.substream(44, 0, 0)
print("\nrandom block-diagonal unitaries stay invisible to Z-basis decoys:")
worst = max(
    ancilla_residual_error(
        block_diagonal_unitary(haar_unitary(rng, 2), haar_unitary(rng, 2)), ancilla
    )
    for _ in range(20)
)
print(f"  worst residual over 20 draws: {worst:.2e}")

print("\nunrestricted random unitaries leak and get caught:")
for _ in range(5):
    u = TwoQubitUnitary(haar_unitary(rng, 4))
    print(
        f"  off-block mass {off_block_mass(u):.3f} -> "
        f"residual {ancilla_residual_error(u, ancilla):.3f}"
    )
