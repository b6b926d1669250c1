"""Quantum-trajectory simulation of cat-like states in a pumped, decaying cavity.

A stream of two-level atoms prepared in alternating opposite-phase dipole
states drives a single cavity mode toward a squeezed vacuum; a detected
photon-decay click heralds a squeezed-one-photon (cat-like) state. The
package provides the stochastic trajectory engine, analytic reference
states, independent verification oracles, state analysis, and a batch CLI.
"""

__version__ = "0.1.0"
