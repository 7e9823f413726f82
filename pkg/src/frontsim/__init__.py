"""frontsim: reflected diffusions with a reactive moving front.

Three engines for the same object — an n-particle Monte Carlo system, a
finite-volume free-boundary PDE solver, and a Volterra integral-equation
solver — plus the verification harness that demonstrates they agree.
"""

__version__ = "0.1.0"
