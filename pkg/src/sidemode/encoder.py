"""Multi-user QPSK sidemode encoding through an imperfect IQ modulator.

One laser carrier is modulated so that each user owns a sidemode at
``F_j = A + j * spacing``; user data is a random QPSK stream pulse-shaped
with a root-raised-cosine, and a strong pilot tone rides next to each band
for frequency/phase recovery.  The modulator model keeps the first-order
pair of sidebands: the intended positive line plus a mirror image whose
relative amplitude is the I/Q imbalance ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import upfirdn

from .errors import ConfigurationError, WeakModulationError
from .fields import OpticalField

RRC_ROLLOFF = 0.3
RRC_SPAN_SYMBOLS = 16  # pulse truncated to +-span/2 symbols


@dataclass
class SidemodePlan:
    """Frequency layout and per-user amplitudes for n users on one carrier."""

    n_users: int
    base_freq: float  # Hz, envelope-relative center of user 0
    spacing: float  # Hz between adjacent sidemode centers
    baud: float  # symbols/s per user
    signal_bandwidth: float  # Hz, double-sided band alloted to one user
    amplitudes: np.ndarray  # per-user coherent amplitude (SNU-referenced)
    pilot_offset: float = 75e6  # Hz from each band center
    pilot_amplitude: float | np.ndarray = 0.0  # 0 -> default 10x amplitude

    def __post_init__(self) -> None:
        self.amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=np.float64))
        if self.n_users < 1:
            raise ConfigurationError("need at least one user")
        if self.amplitudes.size == 1 and self.n_users > 1:
            self.amplitudes = np.full(self.n_users, float(self.amplitudes[0]))
        if self.amplitudes.size != self.n_users:
            raise ConfigurationError("one amplitude per user required")
        if np.any(self.amplitudes <= 0):
            raise ConfigurationError("amplitudes must be positive")
        if self.base_freq <= 0 or self.spacing <= 0:
            raise ConfigurationError("sidemode centers must be strictly increasing and positive")
        if self.signal_bandwidth >= self.spacing:
            raise ConfigurationError("signal bandwidth must be below the sidemode spacing")
        if self.baud <= 0:
            raise ConfigurationError("baud must be positive")
        if np.isscalar(self.pilot_amplitude) and self.pilot_amplitude == 0.0:
            self.pilot_amplitude = 10.0 * self.amplitudes
        self.pilot_amplitude = np.broadcast_to(
            np.asarray(self.pilot_amplitude, dtype=np.float64), (self.n_users,)
        ).copy()

    @property
    def centers(self) -> np.ndarray:
        """Sidemode center frequencies F_j."""
        return self.base_freq + np.arange(self.n_users) * self.spacing

    @property
    def pilot_freqs(self) -> np.ndarray:
        return self.centers + self.pilot_offset

    @property
    def modulation_variance(self) -> float:
        """Total modulation variance V_M = sum_j 2 alpha_j^2."""
        return float(np.sum(2.0 * self.amplitudes**2))

    def user_band(self, j: int) -> tuple[float, float]:
        c = self.centers[j]
        return c - self.signal_bandwidth / 2, c + self.signal_bandwidth / 2

    def min_sample_rate(self) -> float:
        return 2.0 * (self.centers[-1] + max(self.pilot_offset, 0.0) + self.signal_bandwidth / 2)


@dataclass
class SymbolFrame:
    """Per-user QPSK symbol indices k in {0,1,2,3}."""

    symbols: np.ndarray  # shape (n_users, n_slots), int8
    seed: int

    def __post_init__(self) -> None:
        self.symbols = np.asarray(self.symbols)
        if self.symbols.ndim != 2:
            raise ConfigurationError("symbols must be (n_users, n_slots)")

    @property
    def n_users(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_slots(self) -> int:
        return self.symbols.shape[1]

    def phases(self) -> np.ndarray:
        """Unit-modulus constellation points exp(i 2 pi k / 4)."""
        return np.exp(0.5j * np.pi * self.symbols)


@dataclass
class IqModulatorModel:
    """First-order sideband model of an imperfect IQ modulator.

    ``depth`` is the mean modulation depth mu (radians) and ``imbalance``
    the I/Q asymmetry sigma; the intended sideband has amplitude ~ mu/2 and
    the mirror image ~ sigma/2.  A bias phase error rotates part of the
    intended line into the mirror as well.
    """

    depth: float = 0.1
    imbalance: float = 0.0
    bias_phase_error: float = 0.0

    def __post_init__(self) -> None:
        if self.depth <= 0:
            raise ConfigurationError("modulation depth must be positive")
        if self.imbalance < 0:
            raise ConfigurationError("imbalance must be non-negative")
        if self.depth > 0.2:
            raise WeakModulationError(f"depth {self.depth} outside weak-modulation regime (mu <= 0.2)")

    @classmethod
    def from_suppression_db(cls, suppression_db: float, depth: float = 0.1) -> "IqModulatorModel":
        """Model whose mirror sideband sits ``suppression_db`` below the signal."""
        ratio = 10.0 ** (-suppression_db / 20.0)  # amplitude ratio sigma/mu
        return cls(depth=depth, imbalance=ratio * depth)

    def mirror_coefficient(self) -> complex:
        """Complex amplitude ratio of the mirror sideband to the intended one."""
        mu_i = self.depth + self.imbalance
        mu_q = self.depth - self.imbalance
        rot = np.exp(1j * self.bias_phase_error)
        return (mu_i - mu_q * rot) / (mu_i + mu_q * rot)

    @property
    def suppression_db(self) -> float:
        r = abs(self.mirror_coefficient())
        if r == 0.0:
            return np.inf
        return -20.0 * np.log10(r)


def generate_symbols(plan: SidemodePlan, n_slots: int, seed: int) -> SymbolFrame:
    """Draw uniform i.i.d. QPSK indices for every user and slot."""
    if n_slots < 1:
        raise ConfigurationError("need at least one slot")
    if plan.n_users < 1:
        raise ConfigurationError("need at least one user")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    symbols = rng.integers(0, 4, size=(plan.n_users, n_slots), dtype=np.int8)
    return SymbolFrame(symbols=symbols, seed=seed)


def root_raised_cosine(sps: int, rolloff: float = RRC_ROLLOFF, span: int = RRC_SPAN_SYMBOLS) -> np.ndarray:
    """Unit-energy RRC filter taps at ``sps`` samples per symbol."""
    n = span * sps
    t = (np.arange(n + 1) - n / 2) / sps
    taps = np.zeros_like(t)
    b = rolloff
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            taps[i] = 1.0 - b + 4.0 * b / np.pi
        elif b > 0 and abs(abs(ti) - 1.0 / (4.0 * b)) < 1e-9:
            taps[i] = (b / np.sqrt(2.0)) * (
                (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
            )
        else:
            num = np.sin(np.pi * ti * (1 - b)) + 4 * b * ti * np.cos(np.pi * ti * (1 + b))
            den = np.pi * ti * (1 - (4 * b * ti) ** 2)
            taps[i] = num / den
    return taps / np.sqrt(np.sum(taps**2))


def build_baseband_waveform(
    frame: SymbolFrame,
    plan: SidemodePlan,
    sample_rate: float,
    pilot_phases: np.ndarray | None = None,
) -> OpticalField:
    """Upconverted sum of the users' shaped QPSK streams plus pilot tones.

    The drive waveform is complex; each user's stream is RRC-shaped at the
    symbol rate, up-shifted to its sidemode center, and a CW pilot is added
    at ``center + pilot_offset``.  Symbol slot centers land at sample index
    ``slot * sps + group_delay`` with ``group_delay = span*sps/2``.
    """
    if frame.n_users != plan.n_users:
        raise ConfigurationError("frame/plan user count mismatch")
    if sample_rate < plan.min_sample_rate():
        raise ConfigurationError(
            f"sample rate {sample_rate:.3g} below required {plan.min_sample_rate():.3g}"
        )
    sps = sample_rate / plan.baud
    if abs(sps - round(sps)) > 1e-9:
        raise ConfigurationError("sample rate must be an integer multiple of the baud")
    sps = int(round(sps))
    taps = root_raised_cosine(sps)
    n_out = frame.n_slots * sps + taps.size - 1
    t = np.arange(n_out) / sample_rate
    if pilot_phases is None:
        pilot_phases = np.zeros(plan.n_users)

    total = np.zeros(n_out, dtype=np.complex128)
    for j in range(plan.n_users):
        sym = plan.amplitudes[j] * frame.phases()[j]
        shaped = upfirdn(taps, sym, up=sps)
        shaped = shaped[:n_out]
        band = np.zeros(n_out, dtype=np.complex128)
        band[: shaped.size] = shaped
        band *= np.exp(2j * np.pi * plan.centers[j] * t)
        band += plan.pilot_amplitude[j] * np.exp(
            1j * (2 * np.pi * plan.pilot_freqs[j] * t + pilot_phases[j])
        )
        total += band
    return OpticalField(samples=total, sample_rate=sample_rate)


def slot_sample_indices(plan: SidemodePlan, n_slots: int, sample_rate: float) -> np.ndarray:
    """Sample indices of the symbol-slot centers in the built waveform."""
    sps = int(round(sample_rate / plan.baud))
    delay = RRC_SPAN_SYMBOLS * sps // 2
    return delay + np.arange(n_slots) * sps


def iq_modulate(drive: OpticalField, model: IqModulatorModel, carrier: OpticalField | None = None) -> OpticalField:
    """Produce the modulated optical field with its mirror-sideband leakage.

    Output = drive + mirror_coefficient * conj(drive); conjugation flips
    every drive line at +f to -f, which is exactly the first-order mirror
    term of the expansion.  Higher-order sidebands are truncated (< -40 dB
    of first order at depth <= 0.2).  Overall gain is normalized so the
    intended sidebands keep the drive's SNU-referenced amplitudes.
    """
    if model.depth > 0.2:
        raise WeakModulationError("modulation depth above weak-modulation bound 0.2")
    mirror = model.mirror_coefficient()
    out = drive.samples + mirror * np.conj(drive.samples)
    result = OpticalField(samples=out, sample_rate=drive.sample_rate, scale=drive.scale)
    if carrier is not None:
        if carrier.sample_rate != drive.sample_rate:
            raise ConfigurationError("carrier/drive sample rate mismatch")
        n = min(carrier.n_samples, result.n_samples)
        result = OpticalField(
            samples=result.samples[:n] * carrier.samples[:n] / np.mean(np.abs(carrier.samples)),
            sample_rate=drive.sample_rate,
            scale=drive.scale,
        )
    return result


def sideband_ratio(model: IqModulatorModel) -> float:
    """g1 = sqrt(P+ / (P+ + P-)), the amplitude fraction kept by the intended line."""
    r2 = abs(model.mirror_coefficient()) ** 2
    return float(np.sqrt(1.0 / (1.0 + r2)))
