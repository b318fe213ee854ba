"""
Frequency-domain physics: transfer matrices, transmission and asymmetry
coefficients, thermal occupations, output spectra, homodyne quadrature
coefficients, amplification/SNR spectra, and susceptibilities.

Two resolvents appear here. Interference coefficients (transmissions,
asymmetries, quadrature coefficients) use the doubled-basis transfer
matrix Gamma(w) = L (i w Lambda - M)^{-1} L - I with Lambda alternating
-1, +1 per channel. Measured output power spectra use the causal
resolvent (-i w I - M)^{-1}, which is what a time-domain simulation of
the same Langevin system produces.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import constants

from . import numerics
from .model import (
    SystemModel,
    Topology,
    build_drift_matrix,
    conjugation_permutation,
    input_coupling_matrix,
    require_stable,
)

__all__ = [
    "RESONANCE_PROBE_OFFSET",
    "resonance_probe_frequency",
    "UndefinedAsymmetryError",
    "TransferResult",
    "DuTransmission",
    "ThreeModeTransmission",
    "SpectrumTable",
    "transfer_matrix",
    "causal_transfer_matrix",
    "transmission_du",
    "transmission_three",
    "asymmetry",
    "asymmetry_du",
    "asymmetries_three",
    "thermal_occupation",
    "occupations",
    "quadrature_coefficients",
    "output_spectrum",
    "amplification_spectrum",
    "snr_spectrum",
    "susceptibility",
]

#: Offset used when probing "at the low-mode resonance". Exactly on
#: resonance the two low-mode susceptibilities coincide and every low-mode
#: output row-pair sum cancels identically (the intracavity field exactly
#: replays the input), which makes the counter-propagating coefficients
#: vanish 0/0-style. Evaluating a small fraction of the low-mode linewidth
#: inside the peak recovers the limiting interference behavior.
RESONANCE_PROBE_OFFSET = 1e-6


def resonance_probe_frequency(omega_low: float = 1.0) -> float:
    """Probe frequency just inside the low-mode resonance (see module note)."""
    return omega_low - RESONANCE_PROBE_OFFSET


class UndefinedAsymmetryError(Exception):
    """Raised when an asymmetry factor would be 0/0."""


@dataclass(frozen=True)
class TransferResult:
    """Transfer matrix Gamma at one frequency, with the homodyne phase used."""

    omega: float
    gamma: NDArray[np.complex128]
    psi: float = 0.0


@dataclass(frozen=True)
class DuTransmission:
    """Two-mode transmission coefficients (quadrature row-pair sums)."""

    t_a: float
    t_b: float
    b_to_a_plus: float
    b_to_a_minus: float
    a_to_b_plus: float
    a_to_b_minus: float


@dataclass(frozen=True)
class ThreeModeTransmission:
    """Three-mode transmission coefficients between the b port and its neighbors."""

    b_to_m_plus: float
    b_to_m_minus: float
    m_to_b_plus: float
    m_to_b_minus: float
    c_to_b_plus: float
    c_to_b_minus: float
    b_to_c_plus: float
    b_to_c_minus: float


@dataclass
class SpectrumTable:
    """A frequency grid with named per-frequency scalar columns."""

    omega: NDArray[np.float64]
    columns: dict[str, NDArray[np.float64]] = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.ndim != 1 or np.any(np.diff(self.omega) <= 0):
            raise ValueError("frequency grid must be 1-D and strictly increasing")
        for name, col in self.columns.items():
            arr = np.asarray(col, dtype=float)
            if arr.shape != self.omega.shape:
                raise ValueError(f"column {name!r} length mismatch")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"column {name!r} contains non-finite values")
            self.columns[name] = arr

    def to_csv(self, stream, metadata: dict | None = None) -> None:
        """Write as CSV with '#'-prefixed metadata header lines."""
        own = isinstance(stream, (str, bytes))
        fh = open(stream, "w", newline="", encoding="utf-8") if own else stream
        try:
            for key, value in (metadata or {}).items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.writer(fh)
            names = list(self.columns)
            writer.writerow(["omega", *names])
            for i, w in enumerate(self.omega):
                writer.writerow([repr(float(w)), *(repr(float(self.columns[n][i])) for n in names)])
        finally:
            if own:
                fh.close()

    def to_json_dict(self) -> dict:
        return {
            "omega": self.omega.tolist(),
            "columns": {k: v.tolist() for k, v in self.columns.items()},
        }


def _channel_signature(n_modes: int) -> NDArray[np.float64]:
    return np.tile([-1.0, 1.0], n_modes)


def transfer_matrix(
    model: SystemModel, omega: float, psi: float = 0.0, check: bool = True
) -> TransferResult:
    """
    Input-output transfer matrix Gamma(w) = L (i w Lambda - M)^{-1} L - I.

    Lambda alternates -1, +1 over the doubled channels; L carries sqrt(kappa)
    per channel. Set check=False to skip the (eigenvalue-based) stability
    gate, e.g. inside a frequency loop that has already verified it.
    """
    m = build_drift_matrix(model)
    if check:
        require_stable(m)
    n2 = m.shape[0]
    lam = _channel_signature(model.n_modes)
    ell = input_coupling_matrix(model)
    a = 1j * omega * np.diag(lam) - m
    gamma = ell @ numerics.lu_solve(a, ell) - np.eye(n2)
    return TransferResult(omega=float(omega), gamma=gamma, psi=psi)


def causal_transfer_matrix(
    model: SystemModel, omega: float, check: bool = True
) -> NDArray[np.complex128]:
    """Causal input-output matrix L (-i w I - M)^{-1} L - I (time-domain convention)."""
    m = build_drift_matrix(model)
    if check:
        require_stable(m)
    n2 = m.shape[0]
    ell = input_coupling_matrix(model)
    a = -1j * omega * np.eye(n2) - m
    return ell @ numerics.lu_solve(a, ell) - np.eye(n2)


def _pair_sum_sq(gamma: NDArray[np.complex128], row_pair: int, col: int) -> float:
    """|Gamma[2r, c] + Gamma[2r+1, c]|^2 for 0-based mode index r and channel c."""
    return float(np.abs(gamma[2 * row_pair, col] + gamma[2 * row_pair + 1, col]) ** 2)


def transmission_du(tr: TransferResult) -> DuTransmission:
    """Self and intermode transmission coefficients of a two-mode unit."""
    g = tr.gamma
    if g.shape != (4, 4):
        raise ValueError("transmission_du requires a 4x4 transfer matrix")
    return DuTransmission(
        t_a=_pair_sum_sq(g, 0, 0),
        t_b=_pair_sum_sq(g, 1, 2),
        b_to_a_plus=_pair_sum_sq(g, 0, 2),
        b_to_a_minus=_pair_sum_sq(g, 0, 3),
        a_to_b_plus=_pair_sum_sq(g, 1, 0),
        a_to_b_minus=_pair_sum_sq(g, 1, 1),
    )


def transmission_three(tr: TransferResult) -> ThreeModeTransmission:
    """Transmission coefficients of the three-mode system (m, b, c ports)."""
    g = tr.gamma
    if g.shape != (6, 6):
        raise ValueError("transmission_three requires a 6x6 transfer matrix")
    return ThreeModeTransmission(
        b_to_m_plus=_pair_sum_sq(g, 0, 2),
        b_to_m_minus=_pair_sum_sq(g, 0, 3),
        m_to_b_plus=_pair_sum_sq(g, 1, 0),
        m_to_b_minus=_pair_sum_sq(g, 1, 1),
        c_to_b_plus=_pair_sum_sq(g, 1, 4),
        c_to_b_minus=_pair_sum_sq(g, 1, 5),
        b_to_c_plus=_pair_sum_sq(g, 2, 2),
        b_to_c_minus=_pair_sum_sq(g, 2, 3),
    )


def asymmetry(t_forward: float, t_backward: float) -> float:
    """Normalized transmission asymmetry (T_f - T_b) / (T_f + T_b) in [-1, 1]."""
    if t_forward < 0 or t_backward < 0:
        raise ValueError("transmission coefficients must be non-negative")
    if t_forward < 1e-300 and t_backward < 1e-300:
        raise UndefinedAsymmetryError("both transmission coefficients vanish (0/0)")
    return (t_forward - t_backward) / (t_forward + t_backward)


def asymmetry_du(tr: TransferResult) -> float:
    """R_ab of a two-mode unit: forward b->a against backward a->b."""
    t = transmission_du(tr)
    return asymmetry(t.b_to_a_plus, t.a_to_b_minus)


def asymmetries_three(tr: TransferResult) -> tuple[float, float]:
    """(R_mb, R_bc) of the three-mode system."""
    t = transmission_three(tr)
    r_mb = asymmetry(t.b_to_m_plus, t.m_to_b_plus)
    r_bc = asymmetry(t.c_to_b_plus, t.b_to_c_plus)
    return r_mb, r_bc


def thermal_occupation(absolute_frequency: float, temperature: float) -> float:
    """Bose-Einstein occupation 1 / (exp(hbar w / kB T) - 1); zero at T=0."""
    if absolute_frequency <= 0:
        raise ValueError("absolute_frequency must be positive")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0.0:
        return 0.0
    x = constants.hbar * absolute_frequency / (constants.k * temperature)
    if x > 700.0:
        return 0.0
    return float(1.0 / math.expm1(x))


def occupations(model: SystemModel) -> NDArray[np.float64]:
    """Per-mode thermal occupations at the model's environment temperature."""
    return np.array(
        [thermal_occupation(m.absolute_frequency, model.temperature) for m in model.modes]
    )


def quadrature_coefficients(
    tr: TransferResult, output_port: int, psi: float | None = None
) -> NDArray[np.complex128]:
    """
    Coefficients C_k of each input channel in the measured output quadrature
    x = (out^dag e^{i psi} + out e^{-i psi}) / sqrt(2) of the chosen port.
    """
    g = tr.gamma
    n_modes = g.shape[0] // 2
    if not 0 <= output_port < n_modes:
        raise ValueError(f"output_port {output_port} out of range")
    phase = tr.psi if psi is None else psi
    row_a = g[2 * output_port, :]
    row_c = g[2 * output_port + 1, :]
    return (row_a * np.exp(-1j * phase) + row_c * np.exp(1j * phase)) / np.sqrt(2.0)


def output_spectrum(
    model: SystemModel, omegas, port: int
) -> SpectrumTable:
    """
    Symmetrized output power spectrum of one port over a frequency grid.

    S_out(w) sums |causal transfer element|^2 times (n_k + 1/2) over all
    input channels; the own-port term is the self contribution and the rest
    are cross contributions. This is the quantity a stationary time-domain
    simulation of the same system estimates via Welch averaging.
    """
    omegas = np.asarray(omegas, dtype=float)
    m = build_drift_matrix(model)
    require_stable(m)
    n_modes = model.n_modes
    if not 0 <= port < n_modes:
        raise ValueError(f"port {port} out of range")
    weights = occupations(model) + 0.5
    values = np.empty_like(omegas)
    for i, w in enumerate(omegas):
        gamma = causal_transfer_matrix(model, w, check=False)
        row = np.abs(gamma[2 * port, :]) ** 2
        values[i] = float(np.sum((row[0::2] + row[1::2]) * weights))
    label = model.modes[port].label
    return SpectrumTable(omega=omegas, columns={f"S_out_{label}": values})


def _signal_and_noise(
    model: SystemModel, omega: float, signal_port: int, readout_port: int, psi: float
) -> tuple[float, float]:
    """(S_AP, homodyne noise power) at one frequency."""
    tr = transfer_matrix(model, omega, psi=psi, check=False)
    c = quadrature_coefficients(tr, readout_port)
    s_ap = float(np.abs(c[2 * signal_port] + c[2 * signal_port + 1]) ** 2)
    weights = occupations(model) + 0.5
    mags = np.abs(c) ** 2
    noise = float(np.sum((mags[0::2] + mags[1::2]) * weights))
    return s_ap, noise


def amplification_spectrum(
    model: SystemModel,
    omegas,
    signal_port: int = 0,
    readout_port: int | None = None,
    psi: float = 0.0,
) -> SpectrumTable:
    """
    Quadrature amplification spectrum S_AP(w) = |C_s(w) + C_s*(w)|^2 of a unit
    Hermitian signal entering at signal_port and read out at readout_port.
    """
    omegas = np.asarray(omegas, dtype=float)
    require_stable(build_drift_matrix(model))
    if readout_port is None:
        readout_port = model.n_modes - 1
    values = np.empty_like(omegas)
    for i, w in enumerate(omegas):
        values[i], _ = _signal_and_noise(model, w, signal_port, readout_port, psi)
    return SpectrumTable(omega=omegas, columns={"S_AP": values})


def snr_spectrum(
    model: SystemModel,
    omegas,
    signal_port: int = 0,
    readout_port: int | None = None,
    psi: float = 0.0,
) -> SpectrumTable:
    """
    Signal-to-noise spectrum: S_AP over the thermally weighted homodyne noise
    sum_j (|C_{j,+}|^2 + |C_{j,-}|^2)(n_j + 1/2).
    """
    omegas = np.asarray(omegas, dtype=float)
    require_stable(build_drift_matrix(model))
    if readout_port is None:
        readout_port = model.n_modes - 1
    values = np.empty_like(omegas)
    for i, w in enumerate(omegas):
        s_ap, noise = _signal_and_noise(model, w, signal_port, readout_port, psi)
        values[i] = s_ap / noise if noise > 0.0 else 0.0
    return SpectrumTable(omega=omegas, columns={"S_SNR": values})


def susceptibility(detuning: float, kappa: float, omega: float) -> complex:
    """Mode susceptibility chi(w) = 1 / (i (Delta - w) + kappa / 2)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return 1.0 / (1j * (detuning - omega) + kappa / 2.0)
