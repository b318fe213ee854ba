"""
Frequency-domain simulator and analysis toolkit for interference between
Stokes and anti-Stokes scattering channels in dispersively coupled
two-mode, three-mode, and chained systems, validated against an
independent time-domain stochastic oracle.
"""

__version__ = "0.1.0"
