"""System parameters for the wideband IRS-aided OFDM link."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters shared by the channel model, estimators and harness.

    Angles are handled as normalized cycles per element (half-wavelength
    spacing), subcarrier frequencies as baseband offsets f = n_p * W / Np
    with 0-based n_p.
    """

    M: int = 256            # IRS elements (ULA)
    Np: int = 128           # OFDM subcarriers
    W: float = 510e6        # bandwidth, Hz
    fc: float = 20e9        # carrier frequency, Hz
    Ns: int = 32            # training OFDM symbols
    Np1: int = 6            # pilot subcarriers
    Nd: int = 256           # angular grid size (even)
    Ntau: int = 64          # delay grid size
    Ttau: float = 200e-9    # maximum delay spread, s
    zeta: float = 1e-3      # greedy-pursuit stop threshold
    noise_power: float = 0.0

    def __post_init__(self):
        if self.M < 1 or self.Np < 1 or self.Ns < 1 or self.Np1 < 1:
            raise ValueError("M, Np, Ns and Np1 must be positive")
        if self.Np1 > self.Np:
            raise ValueError(f"Np1={self.Np1} exceeds Np={self.Np}")
        if self.Nd < 2 or self.Nd % 2 != 0:
            raise ValueError(f"Nd must be a positive even integer, got {self.Nd}")
        if self.Ntau < 1:
            raise ValueError("Ntau must be positive")
        if self.W <= 0 or self.fc <= 0 or self.Ttau <= 0:
            raise ValueError("W, fc and Ttau must be positive")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if self.noise_power < 0:
            raise ValueError("noise_power must be nonnegative")

    def subcarrier_freq(self, n_p) -> float:
        """Baseband frequency of subcarrier n_p (0-based)."""
        return n_p * self.W / self.Np

    def squint(self, f) -> float:
        """Frequency-dependent scaling (1 + f/fc) of the spatial angle."""
        return 1.0 + f / self.fc

    def grid_angle(self, idx):
        """Angular dictionary grid point for 0-based column index."""
        return -1.0 + 2.0 * idx / self.Nd

    def grid_delay(self, idx):
        """Delay dictionary grid point for 0-based column index."""
        return idx * self.Ttau / self.Ntau

    def with_(self, **kwargs) -> "SystemConfig":
        """Copy with selected fields replaced."""
        return replace(self, **kwargs)


_CONFIG_FIELDS = {
    "m": ("M", int),
    "np": ("Np", int),
    "w": ("W", float),
    "fc": ("fc", float),
    "ns": ("Ns", int),
    "np1": ("Np1", int),
    "nd": ("Nd", int),
    "ntau": ("Ntau", int),
    "ttau": ("Ttau", float),
    "zeta": ("zeta", float),
    "noise_power": ("noise_power", float),
}


def parse_key_values(text: str) -> dict:
    """Parse line-oriented ``key = value`` text; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def system_config_from_mapping(mapping: dict, base: SystemConfig | None = None) -> SystemConfig:
    """Build a SystemConfig from a key/value mapping, ignoring foreign keys."""
    cfg = base or SystemConfig()
    updates = {}
    for key, raw in mapping.items():
        entry = _CONFIG_FIELDS.get(key)
        if entry is None:
            continue
        field, conv = entry
        updates[field] = conv(float(raw)) if conv is int else conv(raw)
    return cfg.with_(**updates) if updates else cfg
