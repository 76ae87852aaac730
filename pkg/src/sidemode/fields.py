"""Sample-stream containers shared by the whole simulation chain.

Power bookkeeping convention: amplitudes are shot-noise-referenced, i.e. a
steady complex envelope of amplitude ``a`` represents a coherent state whose
quadrature means are ``(2 Re a, 2 Im a)`` in shot noise units.  The "power"
of a band in these units is ``2 <|E|^2>`` (the sum of the two quadrature
second moments), which makes a QPSK stream of symbol amplitude ``alpha``
carry power ``2 alpha^2`` per slot -- the modulation variance of one user.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class OpticalField:
    """Complex envelope of the light at one point in the chain.

    The envelope is relative to the optical carrier; absolute optical
    frequency never appears.  ``scale`` converts |envelope|^2 to shot-noise
    units and is carried through the chain so attenuation can be applied to
    samples while keeping the calibration meaningful.
    """

    samples: np.ndarray
    sample_rate: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def n_samples(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def mean_power(self) -> float:
        """Mean power in SNU-referenced units (2 <|E|^2> * scale)."""
        return 2.0 * self.scale * float(np.mean(np.abs(self.samples) ** 2))

    def energy(self) -> float:
        """Total |E|^2 summed over samples (scale applied)."""
        return self.scale * float(np.sum(np.abs(self.samples) ** 2))

    def band_power(self, f_lo: float, f_hi: float) -> float:
        """Power contained in the envelope frequency band [f_lo, f_hi).

        Frequencies are envelope-relative (can be negative).  Uses a plain
        periodogram; Parseval makes the sum over all bands equal mean_power.
        """
        spec = np.fft.fft(self.samples) / self.samples.size
        freqs = np.fft.fftfreq(self.samples.size, d=1.0 / self.sample_rate)
        mask = (freqs >= f_lo) & (freqs < f_hi)
        return 2.0 * self.scale * float(np.sum(np.abs(spec[mask]) ** 2))

    def copy_with(self, samples: np.ndarray) -> "OpticalField":
        return OpticalField(samples=samples, sample_rate=self.sample_rate, scale=self.scale)

    def export_iq(self, path: str | Path) -> None:
        """Write interleaved little-endian float32 I/Q plus a JSON sidecar."""
        path = Path(path)
        interleaved = np.empty(2 * self.samples.size, dtype="<f4")
        interleaved[0::2] = self.samples.real.astype("<f4")
        interleaved[1::2] = self.samples.imag.astype("<f4")
        interleaved.tofile(path)
        sidecar = {
            "format": "interleaved-float32-le-iq",
            "n_samples": int(self.samples.size),
            "sample_rate_hz": float(self.sample_rate),
            "scale_snu_per_unit2": float(self.scale),
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def load_field_iq(path: str | Path) -> OpticalField:
    """Inverse of :meth:`OpticalField.export_iq`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = np.fromfile(path, dtype="<f4")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return OpticalField(samples=samples, sample_rate=meta["sample_rate_hz"], scale=meta["scale_snu_per_unit2"])


@dataclass
class PhaseTrace:
    """Uniformly sampled phase-vs-time record in radians."""

    samples: np.ndarray
    rate: float
    origin: str = "pilot"  # "pilot" or "probe"
    unwrapped: bool = True
    slipped: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.origin not in ("pilot", "probe"):
            raise ValueError(f"unknown origin {self.origin!r}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.rate

    def export_csv(self, path: str | Path) -> None:
        data = np.column_stack([self.times(), self.samples])
        np.savetxt(path, data, delimiter=",", header="t_s,phi_rad", comments="")

    def export_binary(self, path: str | Path) -> None:
        self.samples.astype("<f8").tofile(path)
