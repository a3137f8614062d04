"""toalab: a numerical laboratory for quantum time-of-arrival distributions.

Computes arrival-time curves for Gaussian wave packets under standard
quantum mechanics (Kijowski metric, probability-current detector,
Marchewka-Schuss absorbing boundary, discrete first-passage walks and
their diffusion limit) and under a time-extended quantum mechanics in
which the wave function disperses in coordinate time as well, and
cross-validates every closed form against independent oracles.
"""

__version__ = "0.1.0"
