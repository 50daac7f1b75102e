"""Closed-form linearized optomechanics.

Photon numbers, cooperativity, dynamical backaction, thermal occupancies
and the saturable-absorption bath heating model, for a single optical mode
parametrically coupled to a single GHz mechanical mode.

All stored frequencies and rates are angular (rad/s). Use the ``from_hz``
constructors at the boundary; see :mod:`omx.constants`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .constants import HBAR, K_B, angular_to_hz, hz_to_angular

__all__ = [
    "OpticalMode",
    "MechanicalMode",
    "Device",
    "Drive",
    "HeatingParams",
    "BackactionResult",
    "CoolingTable",
    "DEVICE_PRESETS",
    "DEFAULT_HEATING",
    "ZERO_HEATING",
    "thermal_occupancy",
    "temperature_from_occupancy",
    "intracavity_photons",
    "cooperativity",
    "backaction",
    "resolved_sideband_damping",
    "heating_model_occupancy",
    "cooling_curve",
    "device_to_json",
    "device_from_json",
    "load_device",
    "save_device",
]

# Below this temperature exp(hbar*omega/kB*T) overflows double precision for
# GHz modes; physically indistinguishable from T = 0.
_T_CLAMP = 1e-6


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class OpticalMode:
    """Optical cavity mode: resonance ``omega_c``, total/extrinsic decay rates."""

    omega_c: float  # rad/s
    kappa: float  # rad/s, total
    kappa_e: float  # rad/s, extrinsic (waveguide) part

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError("omega_c must be positive")
        if not 0 < self.kappa_e <= self.kappa:
            raise ValueError("require 0 < kappa_e <= kappa")

    @classmethod
    def from_hz(cls, omega_c_hz: float, kappa_hz: float, kappa_e_hz: float) -> OpticalMode:
        return cls(hz_to_angular(omega_c_hz), hz_to_angular(kappa_hz), hz_to_angular(kappa_e_hz))

    @property
    def q_opt(self) -> float:
        return self.omega_c / self.kappa


@dataclass(frozen=True)
class MechanicalMode:
    """Mechanical mode: resonance ``omega_m`` and intrinsic linewidth ``gamma_0``."""

    omega_m: float  # rad/s
    gamma_0: float  # rad/s

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError("omega_m must be positive")
        if not 0 < self.gamma_0 < self.omega_m:
            raise ValueError("require 0 < gamma_0 < omega_m")

    @classmethod
    def from_hz(cls, omega_m_hz: float, gamma0_hz: float) -> MechanicalMode:
        return cls(hz_to_angular(omega_m_hz), hz_to_angular(gamma0_hz))

    @property
    def q_m(self) -> float:
        return self.omega_m / self.gamma_0


@dataclass(frozen=True)
class Device:
    """One optomechanical crystal: optical + mechanical mode and vacuum coupling g0.

    ``g0_alt`` optionally stores a second calibration of the vacuum coupling
    (e.g. from the opposite pump detuning) without changing any formula.
    """

    optical: OpticalMode
    mechanical: MechanicalMode
    g0: float  # rad/s
    label: str = ""
    g0_alt: float | None = None

    def __post_init__(self):
        if not self.g0 > 0:
            raise ValueError("g0 must be positive")

    @property
    def sideband_resolved(self) -> bool:
        return self.mechanical.omega_m > self.optical.kappa

    def with_kappa(self, kappa: float, kappa_e: float | None = None) -> Device:
        """Copy of this device with a different total (and optionally extrinsic) decay rate."""
        opt = replace(
            self.optical,
            kappa=kappa,
            kappa_e=self.optical.kappa_e if kappa_e is None else kappa_e,
        )
        return replace(self, optical=opt)


@dataclass(frozen=True)
class Drive:
    """Coherent laser drive: frequency, detuning from the cavity, and either an
    on-chip power or a direct intracavity photon number override."""

    omega_l: float  # rad/s
    detuning: float  # rad/s, omega_l - omega_c
    on_chip_power: float | None = None  # W
    n_c_override: float | None = None

    def __post_init__(self):
        if not self.omega_l > 0:
            raise ValueError("omega_l must be positive")
        if (self.on_chip_power is None) == (self.n_c_override is None):
            raise ValueError("exactly one of on_chip_power / n_c_override must be set")
        if self.on_chip_power is not None and self.on_chip_power < 0:
            raise ValueError("on_chip_power must be >= 0")
        if self.n_c_override is not None and self.n_c_override < 0:
            raise ValueError("n_c_override must be >= 0")

    @classmethod
    def at_detuning(
        cls,
        optical: OpticalMode,
        detuning: float,
        on_chip_power: float | None = None,
        n_c: float | None = None,
    ) -> Drive:
        """Drive at a given detuning (rad/s) from the cavity resonance."""
        return cls(optical.omega_c + detuning, detuning, on_chip_power, n_c)


@dataclass(frozen=True)
class HeatingParams:
    """Bath model coefficients: base occupancy plus saturable and linear
    absorption-heating terms in the intracavity photon number."""

    n_th0: float
    alpha_sat: float = 0.0
    beta_sat: float = 0.0
    alpha_lin: float = 0.0

    def __post_init__(self):
        for name in ("n_th0", "alpha_sat", "beta_sat", "alpha_lin"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class BackactionResult:
    """Dynamical backaction at one operating point."""

    g: float  # field-enhanced coupling, rad/s
    cooperativity: float
    gamma_opt: float  # optical damping, rad/s, signed (+ cooling, - amplification)
    spring_shift: float  # mechanical frequency shift, rad/s, signed
    gamma_eff: float  # gamma_0 + gamma_opt, rad/s


def thermal_occupancy(frequency: float, temperature: float) -> float:
    """Bose occupancy 1/(exp(hbar*omega/kB*T) - 1) of a mode at ``frequency`` (rad/s).

    Returns 0 at T = 0 (and below the 1 uK double-precision clamp).
    """
    _check_finite("frequency", frequency)
    _check_finite("temperature", temperature)
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature < _T_CLAMP:
        return 0.0
    x = HBAR * frequency / (K_B * temperature)
    if x > 700.0:  # expm1 would overflow; occupancy below ~1e-304
        return 0.0
    return 1.0 / math.expm1(x)


def temperature_from_occupancy(frequency: float, occupancy: float) -> float:
    """Exact inverse of :func:`thermal_occupancy` (kelvin)."""
    _check_finite("frequency", frequency)
    _check_finite("occupancy", occupancy)
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    if occupancy <= 0:
        raise ValueError("occupancy must be positive")
    return HBAR * frequency / (K_B * math.log1p(1.0 / occupancy))


def intracavity_photons(optical: OpticalMode, drive: Drive) -> float:
    """Steady-state intracavity photon number for a coherent drive.

    n_c = P * kappa_e / (hbar * omega_l * ((kappa/2)^2 + Delta^2)); a photon
    number override on the drive passes through unchanged.
    """
    if drive.n_c_override is not None:
        return drive.n_c_override
    lorentz = (optical.kappa / 2.0) ** 2 + drive.detuning**2
    return drive.on_chip_power * optical.kappa_e / (HBAR * drive.omega_l * lorentz)


def cooperativity(device: Device, n_c: float) -> float:
    """C = 4 g0^2 n_c / (kappa * gamma_0)."""
    if n_c < 0:
        raise ValueError("n_c must be >= 0")
    return 4.0 * device.g0**2 * n_c / (device.optical.kappa * device.mechanical.gamma_0)


def resolved_sideband_damping(device: Device, n_c: float) -> float:
    """Optimal-detuning damping rate 4 g^2 / kappa = C * gamma_0 (rad/s).

    This is the deep-sideband-resolved limit of :func:`backaction` at
    ``detuning = -omega_m``; exposed separately for convergence checks.
    """
    return 4.0 * device.g0**2 * n_c / device.optical.kappa


def backaction(device: Device, n_c: float, detuning: float) -> BackactionResult:
    """Dynamical backaction from both motional sidebands (no rotating-wave
    approximation in the sideband weights).

    gamma_opt = g^2 kappa * [S(Delta + omega_m) - S(Delta - omega_m)] with
    S(x) = 1/((kappa/2)^2 + x^2); positive for red detuning (cooling).
    The spring shift is the corresponding dispersive combination.
    """
    if n_c < 0:
        raise ValueError("n_c must be >= 0")
    kappa = device.optical.kappa
    omega_m = device.mechanical.omega_m
    g = device.g0 * math.sqrt(n_c)
    lor_plus = (kappa / 2.0) ** 2 + (detuning + omega_m) ** 2
    lor_minus = (kappa / 2.0) ** 2 + (detuning - omega_m) ** 2
    gamma_opt = g**2 * kappa * (1.0 / lor_plus - 1.0 / lor_minus)
    spring = g**2 * ((detuning + omega_m) / lor_plus + (detuning - omega_m) / lor_minus)
    return BackactionResult(
        g=g,
        cooperativity=cooperativity(device, n_c),
        gamma_opt=gamma_opt,
        spring_shift=spring,
        gamma_eff=device.mechanical.gamma_0 + gamma_opt,
    )


def heating_model_occupancy(device: Device, heating: HeatingParams, n_c: float) -> float:
    """Mechanical occupancy under simultaneous backaction cooling and
    absorption heating of the thermal bath:

    n_m = (n_th0 + alpha_sat*n_c/(1 + beta_sat*n_c) + alpha_lin*n_c) / (1 + C)
    """
    if n_c < 0:
        raise ValueError("n_c must be >= 0")
    bath = (
        heating.n_th0
        + heating.alpha_sat * n_c / (1.0 + heating.beta_sat * n_c)
        + heating.alpha_lin * n_c
    )
    return bath / (1.0 + cooperativity(device, n_c))


@dataclass(frozen=True)
class CoolingTable:
    """Cooling curve sampled on a photon-number grid (arrays share the grid index)."""

    n_c: np.ndarray
    cooperativity: np.ndarray
    gamma_eff: np.ndarray  # rad/s, exact backaction at detuning = -omega_m
    n_m: np.ndarray


def cooling_curve(device: Device, heating: HeatingParams, n_c_grid) -> CoolingTable:
    """Evaluate occupancy, cooperativity and effective linewidth over a photon grid.

    The grid must be strictly positive and sorted ascending.
    """
    grid = np.asarray(n_c_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("n_c grid must be nonempty")
    if np.any(grid <= 0):
        raise ValueError("n_c grid must be strictly positive")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("n_c grid must be strictly increasing")
    coop = np.array([cooperativity(device, n) for n in grid])
    gamma = np.array(
        [backaction(device, n, -device.mechanical.omega_m).gamma_eff for n in grid]
    )
    occ = np.array([heating_model_occupancy(device, heating, n) for n in grid])
    return CoolingTable(n_c=grid, cooperativity=coop, gamma_eff=gamma, n_m=occ)


# --- bundled device presets (measured parameters of the two reference chips) ---

DEVICE_PRESETS: dict[str, Device] = {
    "A": Device(
        optical=OpticalMode.from_hz(191.7e12, 0.8e9, 288e6),
        mechanical=MechanicalMode.from_hz(7.436e9, 206e3),
        g0=hz_to_angular(901e3),  # red-detuned linewidth fit
        g0_alt=hz_to_angular(860e3),  # blue-detuned fit
        label="A",
    ),
    "B": Device(
        optical=OpticalMode.from_hz(193.9e12, 1.1e9, 196e6),
        mechanical=MechanicalMode.from_hz(7.259e9, 715e3),
        g0=hz_to_angular(889e3),
        label="B",
    ),
}

# Bath-model coefficients fitted to the device A cooling run (3 K plate).
DEFAULT_HEATING = HeatingParams(n_th0=7.95, alpha_sat=0.324, beta_sat=0.019, alpha_lin=0.003)
# Backaction-only cooling from the same thermal anchor.
ZERO_HEATING = HeatingParams(n_th0=7.95)


def device_to_json(device: Device) -> dict:
    """Serializable preset dict; numeric fields are cyclic Hz."""
    out = {
        "label": device.label,
        "omega_c_hz": angular_to_hz(device.optical.omega_c),
        "kappa_hz": angular_to_hz(device.optical.kappa),
        "kappa_e_hz": angular_to_hz(device.optical.kappa_e),
        "g0_hz": angular_to_hz(device.g0),
        "omega_m_hz": angular_to_hz(device.mechanical.omega_m),
        "gamma0_hz": angular_to_hz(device.mechanical.gamma_0),
    }
    if device.g0_alt is not None:
        out["g0_alt_hz"] = angular_to_hz(device.g0_alt)
    return out


def device_from_json(data: dict) -> Device:
    g0_alt = data.get("g0_alt_hz")
    return Device(
        optical=OpticalMode.from_hz(data["omega_c_hz"], data["kappa_hz"], data["kappa_e_hz"]),
        mechanical=MechanicalMode.from_hz(data["omega_m_hz"], data["gamma0_hz"]),
        g0=hz_to_angular(data["g0_hz"]),
        g0_alt=None if g0_alt is None else hz_to_angular(g0_alt),
        label=data.get("label", ""),
    )


def save_device(device: Device, path: str | Path) -> None:
    Path(path).write_text(json.dumps(device_to_json(device), indent=2) + "\n")


def load_device(spec: str, search_dir: str | Path | None = None) -> Device:
    """Resolve a device from a preset label, a JSON file path, or a label
    found as ``<label>.json`` under ``search_dir``.

    A ``search_dir`` file shadows a bundled preset with the same label.
    """
    if search_dir is not None:
        candidate = Path(search_dir) / f"{spec}.json"
        if candidate.is_file():
            return device_from_json(json.loads(candidate.read_text()))
    if spec in DEVICE_PRESETS:
        return DEVICE_PRESETS[spec]
    path = Path(spec)
    if path.is_file():
        return device_from_json(json.loads(path.read_text()))
    raise KeyError(f"unknown device preset or file: {spec!r}")
