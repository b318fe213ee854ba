"""
Physical parameter types, drift matrices, steady states, and stability.

All internal rates, detunings, and frequencies are expressed in units of
the shared low-mode frequency (set to 1); absolute frequencies are kept
separately and used only for thermal occupations. Mode ordering always
alternates high-frequency (driven, detuned) and low-frequency modes,
starting with a high mode: (a, b) for the two-mode unit, (m, b, c) for
the three-mode system, and (high, low, high, ...) for longer chains.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import numerics

__all__ = [
    "Topology",
    "ModeParams",
    "CouplingParams",
    "BareDriveParams",
    "SystemModel",
    "SteadyState",
    "StabilityVerdict",
    "InstabilityError",
    "conjugation_permutation",
    "build_drift_matrix",
    "build_drift_matrix_du",
    "build_drift_matrix_three",
    "build_drift_matrix_chain",
    "input_coupling_matrix",
    "solve_steady_state",
    "check_stability",
    "require_stable",
]

STABILITY_MARGIN = 1e-12


class Topology(enum.Enum):
    DU = "du"
    THREE_MODE = "three"
    CHAIN = "chain"


class InstabilityError(Exception):
    """Raised when an operation requires a stable drift matrix but gets none."""

    def __init__(self, spectral_abscissa: float):
        self.spectral_abscissa = spectral_abscissa
        super().__init__(
            f"drift matrix is not stable (spectral abscissa {spectral_abscissa:.3e})"
        )


@dataclass(frozen=True)
class ModeParams:
    """
    One bosonic mode.

    For high-frequency (driven) modes `detuning` is the drive detuning; for
    low-frequency modes it stores the mode frequency itself (1 in internal
    units). `absolute_frequency` (rad/s) is used only for thermal occupation.
    """

    label: str
    absolute_frequency: float
    kappa: float
    detuning: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"mode {self.label!r}: kappa must be positive")
        if self.absolute_frequency <= 0:
            raise ValueError(f"mode {self.label!r}: absolute_frequency must be positive")


@dataclass(frozen=True)
class CouplingParams:
    """Linearized coupling G = |G| e^{i theta} between an adjacent mode pair."""

    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("coupling magnitude must be non-negative")

    @property
    def value(self) -> complex:
        return self.magnitude * cmath.exp(1j * self.phase)


@dataclass(frozen=True)
class BareDriveParams:
    """Bare (pre-linearization) coupling and drive of a two-mode unit (rad/s)."""

    bare_coupling: float
    drive_amplitude: float
    drive_frequency: float

    def __post_init__(self):
        if self.drive_amplitude < 0:
            raise ValueError("drive_amplitude must be non-negative")


_MODE_COUNTS = {Topology.DU: 2, Topology.THREE_MODE: 3}


@dataclass(frozen=True)
class SystemModel:
    """A parametrized two-mode, three-mode, or chained dispersive system."""

    topology: Topology
    modes: tuple[ModeParams, ...]
    couplings: tuple[CouplingParams, ...]
    temperature: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        n = len(self.modes)
        expected = _MODE_COUNTS.get(self.topology)
        if expected is not None and n != expected:
            raise ValueError(
                f"{self.topology.value} topology requires {expected} modes, got {n}"
            )
        if self.topology is Topology.CHAIN and n < 2:
            raise ValueError("chain topology requires at least 2 modes")
        if len(self.couplings) != n - 1:
            raise ValueError(
                f"expected {n - 1} couplings for {n} modes, got {len(self.couplings)}"
            )
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @property
    def n_modes(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class SteadyState:
    """Mean fields and effective detuning of a driven two-mode unit."""

    a_mean: complex
    b_mean: complex
    effective_detuning: float
    branch_count: int
    branch_index: int
    degenerate: bool
    intensities: tuple[float, ...] = field(default=())


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    spectral_abscissa: float
    eigenvalues: tuple[complex, ...]


def conjugation_permutation(n_modes: int) -> NDArray[np.intp]:
    """Index permutation swapping each (annihilation, creation) channel pair."""
    perm = np.arange(2 * n_modes)
    perm[0::2] += 1
    perm[1::2] -= 1
    return perm


def build_drift_matrix(model: SystemModel) -> NDArray[np.complex128]:
    """
    Drift matrix of the linearized Langevin system in the doubled basis
    (delta_1, delta_1^dag, delta_2, delta_2^dag, ...).

    High modes contribute -(i Delta + kappa/2) on their diagonal; each
    high-low coupling G adds the beam-splitter and parametric terms to both
    partners. Creation-channel rows follow from the conjugation symmetry
    P M* P = M.
    """
    n = model.n_modes
    m = np.zeros((2 * n, 2 * n), dtype=complex)
    for i, mode in enumerate(model.modes):
        m[2 * i, 2 * i] = -(1j * mode.detuning + mode.kappa / 2.0)
    for i, coupling in enumerate(model.couplings):
        g = coupling.value
        hi, lo = (i, i + 1) if i % 2 == 0 else (i + 1, i)
        m[2 * hi, 2 * lo] += -1j * g
        m[2 * hi, 2 * lo + 1] += -1j * g
        m[2 * lo, 2 * hi] += -1j * np.conj(g)
        m[2 * lo, 2 * hi + 1] += -1j * g
    perm = conjugation_permutation(n)
    for i in range(n):
        m[2 * i + 1, :] = np.conj(m[2 * i, perm])
    return m


def build_drift_matrix_du(model: SystemModel) -> NDArray[np.complex128]:
    """4x4 drift matrix of a single two-mode unit, basis (a, a^dag, b, b^dag)."""
    if model.topology is not Topology.DU:
        raise ValueError("build_drift_matrix_du requires DU topology")
    return build_drift_matrix(model)


def build_drift_matrix_three(model: SystemModel) -> NDArray[np.complex128]:
    """6x6 drift matrix of the three-mode system, basis (m, m^dag, b, b^dag, c, c^dag)."""
    if model.topology is not Topology.THREE_MODE:
        raise ValueError("build_drift_matrix_three requires ThreeMode topology")
    return build_drift_matrix(model)


def build_drift_matrix_chain(model: SystemModel) -> NDArray[np.complex128]:
    """2Nx2N block-tridiagonal drift matrix of an alternating high/low chain."""
    if model.topology is not Topology.CHAIN:
        raise ValueError("build_drift_matrix_chain requires Chain topology")
    return build_drift_matrix(model)


def input_coupling_matrix(model: SystemModel) -> NDArray[np.float64]:
    """Diagonal input-coupling matrix L = diag(sqrt(kappa)) per doubled channel."""
    rates = np.repeat([mode.kappa for mode in model.modes], 2)
    return np.diag(np.sqrt(rates))


def _cubic_roots(c3: float, c2: float, c1: float, c0: float) -> tuple[list[float], bool]:
    """
    Real roots of c3 x^3 + c2 x^2 + c1 x + c0 (closed form, Cardano).

    Returns the sorted real roots and a near-degenerate-discriminant flag.
    """
    if c3 == 0.0:
        if c2 == 0.0:
            return ([-c0 / c1] if c1 != 0.0 else []), False
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0:
            return [], False
        s = math.sqrt(disc)
        return sorted([(-c1 + s) / (2 * c2), (-c1 - s) / (2 * c2)]), abs(disc) < 1e-12
    d0 = c2 * c2 - 3.0 * c3 * c1
    d1 = 2.0 * c2**3 - 9.0 * c3 * c2 * c1 + 27.0 * c3 * c3 * c0
    inner = d1 * d1 - 4.0 * d0**3
    scale = max(abs(d1 * d1), abs(4.0 * d0**3), 1e-300)
    degenerate = abs(inner) / scale < 1e-9
    sqrt_inner = cmath.sqrt(inner)
    cand = (d1 + sqrt_inner) / 2.0
    if abs(cand) < abs((d1 - sqrt_inner) / 2.0):
        cand = (d1 - sqrt_inner) / 2.0
    if cand == 0:
        return [float(-c2 / (3.0 * c3))], True
    big_c = cand ** (1.0 / 3.0)
    zeta = cmath.exp(2j * cmath.pi / 3.0)
    roots = []
    for k in range(3):
        ck = big_c * zeta**k
        roots.append(-(c2 + ck + d0 / ck) / (3.0 * c3))
    mag = max(abs(r) for r in roots) + 1e-300
    real_roots = []
    for r in roots:
        if abs(r.imag) <= 1e-7 * mag:
            x = r.real
            # Newton polish to push the closed-form root to full precision.
            for _ in range(50):
                f = ((c3 * x + c2) * x + c1) * x + c0
                df = (3.0 * c3 * x + 2.0 * c2) * x + c1
                if df == 0.0:
                    break
                step = f / df
                x -= step
                if abs(step) <= 1e-16 * max(abs(x), 1.0):
                    break
            real_roots.append(x)
    deduped: list[float] = []
    for x in sorted(real_roots):
        if not deduped or abs(x - deduped[-1]) > 1e-8 * max(abs(x), 1.0):
            deduped.append(x)
    return deduped, degenerate


def solve_steady_state(
    bare: BareDriveParams,
    modes: tuple[ModeParams, ModeParams],
    branch_index: int | None = None,
) -> SteadyState:
    """
    Self-consistent mean fields of a driven two-mode unit.

    Solves <a> = eps / (i Dtilde + kappa_a/2), <b> = -i g |<a>|^2 / (i w_b +
    kappa_b/2) with Dtilde = Delta_0 + g(<b> + <b>*), reduced to a closed-form
    cubic in |<a>|^2. Works in units of the low mode's absolute frequency.
    The default branch is the lowest-intensity one (continuously connected to
    zero drive); `branch_index` overrides.
    """
    high, low = modes
    w_b = low.absolute_frequency
    kappa_a = high.kappa
    kappa_b = low.kappa
    g = bare.bare_coupling / w_b
    eps = bare.drive_amplitude / w_b
    delta0 = (high.absolute_frequency - bare.drive_frequency) / w_b
    if eps == 0.0:
        return SteadyState(
            a_mean=0.0 + 0.0j,
            b_mean=0.0 + 0.0j,
            effective_detuning=delta0,
            branch_count=1,
            branch_index=0,
            degenerate=False,
            intensities=(0.0,),
        )
    # Low-mode back-action shifts the detuning linearly in I = |<a>|^2.
    beta = 2.0 * g * g / (1.0 + kappa_b**2 / 4.0)
    c3 = beta * beta
    c2 = -2.0 * delta0 * beta
    c1 = delta0 * delta0 + kappa_a * kappa_a / 4.0
    c0 = -eps * eps
    roots, degenerate = _cubic_roots(c3, c2, c1, c0)
    intensities = tuple(r for r in roots if r > 0.0)
    if not intensities:
        raise ValueError("steady-state cubic produced no positive-intensity branch")
    index = 0 if branch_index is None else branch_index
    if not 0 <= index < len(intensities):
        raise ValueError(
            f"branch_index {index} out of range for {len(intensities)} branches"
        )
    intensity = intensities[index]
    delta_eff = delta0 - beta * intensity
    a_mean = eps / (1j * delta_eff + kappa_a / 2.0)
    b_mean = -1j * g * intensity / (1j + kappa_b / 2.0)
    return SteadyState(
        a_mean=a_mean,
        b_mean=b_mean,
        effective_detuning=float(delta_eff),
        branch_count=len(intensities),
        branch_index=index,
        degenerate=degenerate,
        intensities=intensities,
    )


def check_stability(m) -> StabilityVerdict:
    """Eigenvalue-based stability verdict: stable iff all Re(lambda) < -margin."""
    eigs = numerics.eigenvalues(m)
    abscissa = float(np.max(eigs.real))
    return StabilityVerdict(
        stable=abscissa < -STABILITY_MARGIN,
        spectral_abscissa=abscissa,
        eigenvalues=tuple(eigs),
    )


def require_stable(m) -> StabilityVerdict:
    """check_stability that raises InstabilityError on an unstable matrix."""
    verdict = check_stability(m)
    if not verdict.stable:
        raise InstabilityError(verdict.spectral_abscissa)
    return verdict
