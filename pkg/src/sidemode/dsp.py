"""Heterodyne detection and the digital chain that recovers each user.

Conventions (stated once, used everywhere):

* The raw demodulator maps a complex envelope amplitude ``a`` to the
  quadrature pair ``(2 Re a, 2 Im a)`` -- beat gain 2, no noise reference.
* Shot noise is injected as white noise of unit per-sample variance, which
  makes the raw per-quadrature vacuum variance at the matched-filter output
  equal to 2.  The shot-noise-unit normalization therefore divides
  quadratures by sqrt(2): vacuum -> variance 1, a coherent amplitude ``a``
  arriving at the detector -> mean (sqrt(2) Re a, sqrt(2) Im a), and a QPSK
  stream of modulation variance V_A -> signal power V_A/2 per quadrature.
* Electronic noise of v_el SNU is additional white noise of per-sample
  variance v_el.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, fftconvolve, firwin, sosfiltfilt, sosfreqz, freqz

from .encoder import RRC_SPAN_SYMBOLS, root_raised_cosine
from .errors import CalibrationError, ConfigurationError, LockFailureError
from .fields import OpticalField, PhaseTrace

SNU_SCALE = 1.0 / np.sqrt(2.0)  # nominal raw-to-SNU quadrature scale


@dataclass
class LoSpec:
    """Receiver-side local oscillator (the LLO)."""

    frequency_offset: float = 50e6  # Hz between server laser and LO
    linewidth: float = 0.0  # Hz

    def __post_init__(self) -> None:
        if self.frequency_offset <= 0:
            raise ConfigurationError("LO offset must place signal bands at positive IF")
        if self.linewidth < 0:
            raise ConfigurationError("linewidth must be non-negative")


@dataclass
class DetectorSpec:
    """Heterodyne detector imperfections."""

    efficiency: float = 1.0
    electronic_noise: float = 0.0  # SNU
    bandwidth: float = 2.5e9  # Hz

    def __post_init__(self) -> None:
        if not 0.0 < self.efficiency <= 1.0:
            raise ConfigurationError("efficiency must be in (0, 1]")
        if self.electronic_noise < 0:
            raise ConfigurationError("electronic noise must be non-negative")


@dataclass
class RealWaveform:
    """Real detector output stream."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)


@dataclass
class ComplexBaseband:
    """Complex stream after down-conversion."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.complex128)


@dataclass
class QuadratureSamples:
    """Per-slot quadrature pairs in sqrt(SNU), for one user."""

    x: np.ndarray
    p: np.ndarray
    user: int = 0
    times: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.x.shape != self.p.shape:
            raise ConfigurationError("x/p length mismatch")

    @property
    def complex_amplitudes(self) -> np.ndarray:
        return (self.x + 1j * self.p) / np.sqrt(2.0)

    @property
    def n_slots(self) -> int:
        return self.x.size


@dataclass
class FilterDesign:
    """A realized digital filter with its design metadata."""

    kind: str  # "iir-butterworth" | "fir-windowed-cascade"
    band: tuple[float, float]
    rate: float
    order: int = 0
    sos: np.ndarray | None = None
    taps: np.ndarray | None = None
    n_cascades: int = 1

    def is_stable(self) -> bool:
        if self.sos is not None:
            for section in self.sos:
                poles = np.roots(section[3:])
                if np.any(np.abs(poles) >= 1.0):
                    return False
            return True
        return True  # FIR is always stable

    def response(self, freqs: np.ndarray) -> np.ndarray:
        """Single-pass complex response of one cascade stage at ``freqs``."""
        w = 2 * np.pi * np.asarray(freqs) / self.rate
        if self.sos is not None:
            _, h = sosfreqz(self.sos, worN=w)
        else:
            _, h = freqz(self.taps, worN=w)
        return h

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Zero-phase application (cascades included); group delay is nulled."""
        if self.sos is not None:
            return sosfiltfilt(self.sos, x)
        out = np.asarray(x, dtype=np.float64)
        for _ in range(self.n_cascades):
            out = fftconvolve(out, self.taps, mode="same")
        return out


def heterodyne_detect(
    fld: OpticalField,
    lo: LoSpec,
    det: DetectorSpec,
    seed=0,
    include_shot: bool = True,
    max_band_freq: float | None = None,
) -> RealWaveform:
    """Beat the field with the LLO and add shot plus electronic noise.

    The LO sits ``frequency_offset`` below the carrier, so an envelope line
    at +f appears in the detector output at f + offset.  LO phase noise is
    a Wiener walk of the configured linewidth.
    """
    fs = fld.sample_rate
    if max_band_freq is not None and max_band_freq + lo.frequency_offset > det.bandwidth:
        raise ConfigurationError("signal band exceeds the detector bandwidth")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed))
    )
    t = fld.times()
    theta = 0.0
    if lo.linewidth > 0:
        steps = rng.normal(0.0, np.sqrt(2 * np.pi * lo.linewidth / fs), size=fld.n_samples)
        theta = np.cumsum(steps) - steps[0]
    envelope = np.sqrt(det.efficiency * fld.scale) * fld.samples
    y = 2.0 * np.real(envelope * np.exp(1j * (2 * np.pi * lo.frequency_offset * t + theta)))
    if include_shot:
        y = y + rng.normal(0.0, 1.0, size=y.size)
    if det.electronic_noise > 0:
        y = y + rng.normal(0.0, np.sqrt(det.electronic_noise), size=y.size)
    return RealWaveform(samples=y, sample_rate=fs)


def estimate_frequency_offset(
    waveform: RealWaveform | ComplexBaseband,
    band: tuple[float, float],
    min_snr_db: float = 10.0,
) -> float:
    """FFT-peak tone frequency refined by local quadratic interpolation.

    The peak must stand ``min_snr_db`` above the median in-band level or a
    lock failure is raised.  Interpolation error is below rate/(4 N_fft).
    """
    x = waveform.samples
    fs = waveform.sample_rate
    n = x.size
    window = np.hanning(n)
    if np.iscomplexobj(x):
        spec = np.abs(np.fft.fft(x * window)) ** 2
        freqs = np.fft.fftfreq(n, d=1.0 / fs)
    else:
        spec = np.abs(np.fft.rfft(x * window)) ** 2
        freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    mask = (freqs >= band[0]) & (freqs <= band[1])
    if not np.any(mask):
        raise ConfigurationError("empty search band")
    idx = np.flatnonzero(mask)
    sub = spec[idx]
    k = int(np.argmax(sub))
    peak = sub[k]
    floor = np.median(sub) + 1e-300
    if peak / floor < 10.0 ** (min_snr_db / 10.0):
        raise LockFailureError(
            f"no tone above {min_snr_db:.0f} dB over the in-band floor (peak/floor = {10*np.log10(peak/floor):.1f} dB)"
        )
    i = idx[k]
    if 0 < i < spec.size - 1:
        a, b, c = np.log(spec[i - 1] + 1e-300), np.log(spec[i] + 1e-300), np.log(spec[i + 1] + 1e-300)
        denom = a - 2 * b + c
        delta = 0.5 * (a - c) / denom if abs(denom) > 1e-300 else 0.0
        delta = float(np.clip(delta, -0.5, 0.5))
    else:
        delta = 0.0
    return float((i + delta) * fs / n)


def downconvert(
    waveform: RealWaveform | ComplexBaseband,
    f: float,
    cutoff: float | None = None,
    decim: int = 1,
    numtaps: int = 513,
) -> ComplexBaseband:
    """Shift a band at +f to baseband, low-pass and decimate.

    The low-pass is a zero-phase Kaiser FIR with unit passband gain
    (ripple well under 0.1 dB); ``cutoff`` defaults to 40% of the
    post-decimation Nyquist.
    """
    fs = waveform.sample_rate
    if abs(f) > fs / 2:
        raise ConfigurationError("shift frequency outside Nyquist")
    x = waveform.samples
    t = np.arange(x.size) / fs
    z = x * np.exp(-2j * np.pi * f * t)
    if np.isrealobj(waveform.samples):
        z = 2.0 * z  # keep the band's complex amplitude after discarding the image
    out_rate = fs / decim
    if cutoff is None:
        cutoff = 0.4 * out_rate / 2 if decim > 1 else 0.4 * fs / 2
    taps = firwin(numtaps, cutoff, fs=fs, window=("kaiser", 8.6))
    z = fftconvolve(z, taps, mode="same")
    if decim > 1:
        z = z[::decim]
    return ComplexBaseband(samples=z, sample_rate=out_rate)


def design_filter(purpose: str, rate: float, band: tuple[float, float] | None = None) -> FilterDesign:
    """Band filters used by the sensing and QKD chains.

    vib-100Hz   -> order-4 IIR Butterworth band-pass 50-200 Hz
    vib-1kHz    -> two cascaded 513-tap windowed FIR band-pass 0.8-1.2 kHz
    vib-10kHz   -> two cascaded 513-tap windowed FIR band-pass 8-12 kHz
    qkd-band    -> Kaiser FIR low-pass isolating the signal band and
                   rejecting the pilot by >= 60 dB
    """
    if purpose == "vib-100Hz":
        edges = band or (50.0, 200.0)
        if edges[1] >= rate / 2:
            raise ConfigurationError("band above Nyquist")
        sos = butter(4, edges, btype="bandpass", fs=rate, output="sos")
        return FilterDesign(kind="iir-butterworth", band=edges, rate=rate, order=4, sos=sos)
    if purpose in ("vib-1kHz", "vib-10kHz"):
        edges = band or ((800.0, 1200.0) if purpose == "vib-1kHz" else (8e3, 12e3))
        if edges[1] >= rate / 2:
            raise ConfigurationError("band above Nyquist")
        taps = firwin(513, edges, fs=rate, pass_zero=False, window=("kaiser", 7.0))
        return FilterDesign(
            kind="fir-windowed-cascade", band=edges, rate=rate, order=512, taps=taps, n_cascades=2
        )
    if purpose == "qkd-band":
        edges = band or (0.0, 40e6)
        if edges[1] >= rate / 2:
            raise ConfigurationError("band above Nyquist")
        taps = firwin(513, edges[1], fs=rate, window=("kaiser", 8.6))
        return FilterDesign(kind="fir-windowed-cascade", band=edges, rate=rate, order=512, taps=taps)
    raise ConfigurationError(f"unknown filter purpose {purpose!r}")


def estimate_phase(baseband: ComplexBaseband, detrend: bool = True) -> PhaseTrace:
    """Unwrapped pilot phase with the residual frequency removed.

    A linear fit takes out the leftover frequency-offset term; jumps larger
    than pi that survive unwrapping are flagged as slips, not fatal.
    """
    phi = np.unwrap(np.angle(baseband.samples))
    if detrend:
        t = np.arange(phi.size) / baseband.sample_rate
        coef = np.polyfit(t, phi, 1)
        phi = phi - np.polyval(coef, t)
    slipped = bool(np.any(np.abs(np.diff(phi)) > np.pi))
    trace = PhaseTrace(samples=phi, rate=baseband.sample_rate, origin="pilot")
    trace.slipped = slipped
    return trace


def recover_quadratures(
    signal_baseband: ComplexBaseband,
    baud: float,
    n_slots: int,
    phase: PhaseTrace | None = None,
    slot_offset: int | None = None,
    snu_scale: float = SNU_SCALE,
    user: int = 0,
) -> QuadratureSamples:
    """Matched-filter the signal band, sample slot centers, undo the phase.

    Timing is genie-aided: ``slot_offset`` is the sample index of the first
    slot center (defaults to the encoder's RRC group delay).  The recovered
    pair is ``snu_scale * 2 * (Re w, Im w)`` with the pilot phase rotated
    out at each slot time.
    """
    fs = signal_baseband.sample_rate
    sps = fs / baud
    if abs(sps - round(sps)) > 1e-9:
        raise ConfigurationError("baseband rate must be an integer multiple of the baud")
    sps = int(round(sps))
    taps = root_raised_cosine(sps)
    matched = fftconvolve(signal_baseband.samples, taps, mode="full")
    if slot_offset is None:
        slot_offset = RRC_SPAN_SYMBOLS * sps // 2
    idx = slot_offset + taps.size // 2 + np.arange(n_slots) * sps
    if idx[-1] >= matched.size:
        raise ConfigurationError("waveform too short for the requested slot count")
    w = matched[idx]
    if phase is not None:
        t_slots = idx / fs
        phi = np.interp(t_slots, phase.times(), phase.samples)
        w = w * np.exp(-1j * phi)
    w = 2.0 * snu_scale * w
    return QuadratureSamples(x=w.real, p=w.imag, user=user, times=idx / fs)


def calibrate_snu(
    det: DetectorSpec,
    vacuum_record: np.ndarray,
    electronic_record: np.ndarray,
    min_samples: int = 100_000,
) -> float:
    """Scale factor making vacuum-minus-electronic variance 1 per quadrature.

    Records are raw (unscaled) quadrature samples from the same chain, LO on
    with the signal port blocked (vacuum) and LO off (electronic).
    """
    vac = np.asarray(vacuum_record, dtype=np.float64).ravel()
    ele = np.asarray(electronic_record, dtype=np.float64).ravel()
    if vac.size < min_samples or ele.size < min_samples:
        raise CalibrationError(f"calibration records need at least {min_samples} samples")
    var_vac = float(np.var(vac))
    var_ele = float(np.var(ele))
    if var_ele >= var_vac:
        raise CalibrationError("electronic variance is not below vacuum variance")
    return 1.0 / np.sqrt(var_vac - var_ele)


def error_vector_magnitude(received: np.ndarray, reference: np.ndarray) -> float:
    """RMS EVM (fraction) after the optimal complex gain is removed."""
    received = np.asarray(received, dtype=np.complex128)
    reference = np.asarray(reference, dtype=np.complex128)
    gain = np.vdot(reference, received) / np.vdot(reference, reference)
    err = received - gain * reference
    return float(np.sqrt(np.mean(np.abs(err) ** 2) / np.mean(np.abs(gain * reference) ** 2)))
