"""Numerical laboratory for the focusing/defocusing biharmonic nonlinear Schrodinger equation

    i u_t + Lap^2 u = s |u|^{p-1} u    (radial, n >= 5)

covering the free propagator and its decay, Littlewood-Paley tools, the fundamental solution,
the bipolar two-point kernel, ground states and nonlinear dynamics.
"""

__version__ = "0.1.0"
