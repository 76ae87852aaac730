"""Fiber propagation: loss, delay, laser/system phase noise and vibrations.

Two fidelity tiers share one phase model.  The field tier multiplies a
sampled complex envelope by sqrt(T) exp(i phi(t)) for short high-rate
frames; the phase-trace tier evolves only pilot/probe phases at 1e5-1e6
samples/s for seconds-long sensing runs, which is what the localization
chain consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .fields import OpticalField, PhaseTrace
from .filternet import SPEED_OF_LIGHT
from .seeding import rng_for

RAMAN_ANCHOR_SNU = 4.69e-6  # Raman scattering noise of the probe at the anchor power
RAMAN_ANCHOR_DBM = -43.0


@dataclass
class ChannelSpec:
    """Geometry and loss of one fiber link."""

    length_km: float
    loss_db_per_km: float = 0.2
    core_index: float = 1.468
    vibration_position_km: float = 0.0  # distance of the perturbation point from the server

    def __post_init__(self) -> None:
        if self.length_km < 0:
            raise ConfigurationError("length must be non-negative")
        if not 0.0 <= self.vibration_position_km <= self.length_km:
            raise ConfigurationError("vibration point must lie on the link")

    @property
    def transmittance(self) -> float:
        return 10.0 ** (-self.loss_db_per_km * self.length_km / 10.0)

    @property
    def group_delay(self) -> float:
        """One-way propagation delay of the full link, seconds."""
        return self.length_km * 1e3 * self.core_index / SPEED_OF_LIGHT

    def delay_from_server(self, position_km: float) -> float:
        return position_km * 1e3 * self.core_index / SPEED_OF_LIGHT


@dataclass
class VibrationEvent:
    """A mechanical perturbation imprinting phase at one point of the fiber."""

    position_km: float
    frequency: float = 100.0  # Hz (carrier of the burst)
    amplitude: float = 1.0  # rad
    start: float = 0.1  # s
    duration: float = 0.5  # s
    kind: str = "sinusoid"  # "sinusoid" | "tap-burst"

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ConfigurationError("amplitude must be non-negative")
        if self.kind not in ("sinusoid", "tap-burst"):
            raise ConfigurationError(f"unknown vibration kind {self.kind!r}")
        if self.duration <= 0:
            raise ConfigurationError("duration must be positive")

    def waveform(self, t: np.ndarray) -> np.ndarray:
        """Phase in radians imprinted at the vibration point at local time t."""
        rel = (t - self.start) / self.duration
        inside = (rel >= 0.0) & (rel <= 1.0)
        out = np.zeros_like(t)
        if self.kind == "sinusoid":
            # Tukey-tapered tone burst; the taper keeps the correlation peak unique.
            taper = np.ones_like(t)
            edge = 0.15
            r = np.clip(rel, 0.0, 1.0)
            taper = np.where(r < edge, 0.5 * (1 - np.cos(np.pi * r / edge)), taper)
            taper = np.where(r > 1 - edge, 0.5 * (1 - np.cos(np.pi * (1 - r) / edge)), taper)
            out[inside] = (
                self.amplitude
                * taper[inside]
                * np.sin(2 * np.pi * self.frequency * (t[inside] - self.start))
            )
        else:  # tap-burst: decaying oscillation, like a knock on the suspension rod
            tau = self.duration / 4.0
            lt = t[inside] - self.start
            out[inside] = (
                self.amplitude
                * np.exp(-lt / tau)
                * np.sin(2 * np.pi * self.frequency * lt)
                * np.sin(2 * np.pi * 0.31 * self.frequency * lt + 0.7)
            )
        return out


@dataclass
class NoiseSpec:
    """Phase-noise and excess-noise budget of the link and receivers.

    The epsilon components follow the system noise budget: a baseline
    CV-QKD term, Raman scattering from the backward probe, and the
    frequency/filter crosstalk terms, all in SNU at the channel output.
    """

    server_linewidth: float = 100.0  # Hz
    user_linewidth: float = 100.0  # Hz
    system_phase_density: float = 0.0  # rad^2/Hz, white
    epsilon_cvqkd: float = 0.0  # SNU
    epsilon_freq: float = 0.0  # SNU
    epsilon_filt: float = 0.0  # SNU
    probe_power_dbm: float | None = None  # None -> probe off

    def __post_init__(self) -> None:
        for name in ("server_linewidth", "user_linewidth", "system_phase_density",
                     "epsilon_cvqkd", "epsilon_freq", "epsilon_filt"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")


def raman_noise(probe_power_dbm: float | None) -> float:
    """Raman scattering noise of the backward probe, linear in probe power.

    Anchored at 4.69e-6 SNU for a -43 dBm probe; None or -inf means the
    probe is off.
    """
    if probe_power_dbm is None or probe_power_dbm == -math.inf:
        return 0.0
    if probe_power_dbm > 0.0:
        raise ConfigurationError("probe power above 0 dBm is outside the weak-probe regime")
    return RAMAN_ANCHOR_SNU * 10.0 ** ((probe_power_dbm - RAMAN_ANCHOR_DBM) / 10.0)


def excess_noise_budget(noise: NoiseSpec, epsilon_cvqkd: float | None = None) -> float:
    """Total excess noise: baseline + Raman + frequency + filter crosstalk."""
    base = noise.epsilon_cvqkd if epsilon_cvqkd is None else epsilon_cvqkd
    components = (base, raman_noise(noise.probe_power_dbm), noise.epsilon_freq, noise.epsilon_filt)
    if any(c < 0 for c in components):
        raise ConfigurationError("noise components must be non-negative")
    return float(sum(components))


def laser_phase_walk(linewidth: float, duration: float, rate: float, seed) -> PhaseTrace:
    """Wiener-process laser phase: increment variance 2 pi * linewidth * dt."""
    if linewidth < 0:
        raise ConfigurationError("linewidth must be non-negative")
    n = int(round(duration * rate))
    if linewidth == 0.0:
        return PhaseTrace(samples=np.zeros(n), rate=rate)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed))
    )
    steps = rng.normal(0.0, math.sqrt(2.0 * math.pi * linewidth / rate), size=n)
    phi = np.cumsum(steps)
    phi -= steps[0]  # start at zero
    return PhaseTrace(samples=phi, rate=rate)


def _delayed(trace: np.ndarray, rate: float, delay: float) -> np.ndarray:
    """Trace evaluated at t - delay (linear interpolation, zero before start)."""
    t = np.arange(trace.size) / rate
    return np.interp(t - delay, t, trace, left=0.0, right=trace[-1] if trace.size else 0.0)


def propagate(
    fld: OpticalField,
    spec: ChannelSpec,
    noise: NoiseSpec | None = None,
    events: list[VibrationEvent] | None = None,
    direction: str = "forward",
    seed: int = 0,
) -> OpticalField:
    """Field-tier propagation through the link.

    Amplitude scales by sqrt(T); the group delay is applied as an exact
    spectral phase ramp; the multiplicative phase collects the laser walk
    difference, the vibration phase imprinted at the event point (delayed
    by the remaining travel to this end), and white system phase noise.
    Forward means server -> user, backward the probe's user -> server path.
    """
    if direction not in ("forward", "backward"):
        raise ConfigurationError(f"unknown direction {direction!r}")
    events = events or []
    t = fld.times()
    nyq = fld.sample_rate / 2.0
    for ev in events:
        if ev.frequency >= nyq:
            raise ConfigurationError("vibration frequency above the trace Nyquist rate")
        if not 0.0 <= ev.position_km <= spec.length_km:
            raise ConfigurationError("vibration event must lie on the link")

    # exact delay via spectral phase ramp (circular; frames carry guard slots)
    delay = spec.group_delay
    spectrum = np.fft.fft(fld.samples)
    freqs = np.fft.fftfreq(fld.n_samples, d=1.0 / fld.sample_rate)
    delayed = np.fft.ifft(spectrum * np.exp(-2j * np.pi * freqs * delay))

    phase = np.zeros(fld.n_samples)
    if noise is not None:
        if noise.server_linewidth > 0 or noise.user_linewidth > 0:
            walk_s = laser_phase_walk(
                noise.server_linewidth, fld.duration, fld.sample_rate,
                rng_for(seed, "laser-server"),
            ).samples
            walk_u = laser_phase_walk(
                noise.user_linewidth, fld.duration, fld.sample_rate,
                rng_for(seed, "laser-user"),
            ).samples
            # beat phase seen at the receiving end: far laser delayed by the full link
            if direction == "forward":
                phase += _delayed(walk_s, fld.sample_rate, delay) - walk_u
            else:
                phase += _delayed(walk_u, fld.sample_rate, delay) - walk_s
        if noise.system_phase_density > 0:
            sigma = math.sqrt(noise.system_phase_density * fld.sample_rate / 2.0)
            phase += rng_for(seed, f"sys-{direction}").normal(0.0, sigma, size=fld.n_samples)

    for ev in events:
        # remaining travel from the event point to the receiving end
        if direction == "forward":
            tail = spec.length_km - ev.position_km
        else:
            tail = ev.position_km
        phase += ev.waveform(t - spec.delay_from_server(tail))

    out = math.sqrt(spec.transmittance) * delayed * np.exp(1j * phase)
    return OpticalField(samples=out, sample_rate=fld.sample_rate, scale=fld.scale)


@dataclass
class SensingTraces:
    """Phase-trace-tier output: what the two ends recover after their DSP."""

    server: PhaseTrace  # from the backward probe, measured at the server
    user: PhaseTrace  # from the forward pilot, measured at the user
    rate: float


def sensing_phase_pair(
    spec: ChannelSpec,
    noise: NoiseSpec,
    events: list[VibrationEvent],
    rate: float = 1e6,
    duration: float = 1.0,
    seed: int = 0,
    phase_noise_floor: float = 0.0,
) -> SensingTraces:
    """Simulate the forward-pilot and backward-probe phase records.

    Implements the two measured-phase models directly at the trace tier:
    each end sees the far laser's walk delayed by the full link, the
    vibration phase delayed by the travel from the event point to that
    end, and its own broadband system noise.  ``phase_noise_floor`` is an
    additional white phase noise (rad rms per sample) standing in for the
    pilot-SNR-limited estimation floor of the receiver DSP.
    """
    n = int(round(rate * duration))
    t = np.arange(n) / rate
    tau = spec.group_delay
    for ev in events:
        if ev.frequency >= rate / 2.0:
            raise ConfigurationError("vibration frequency above the trace Nyquist rate")

    walk_s = laser_phase_walk(noise.server_linewidth, duration, rate, rng_for(seed, "laser-server")).samples
    walk_u = laser_phase_walk(noise.user_linewidth, duration, rate, rng_for(seed, "laser-user")).samples

    phi_user = _delayed(walk_s, rate, tau) - walk_u
    phi_server = _delayed(walk_u, rate, tau) - walk_s
    for ev in events:
        tau_s = spec.delay_from_server(ev.position_km)
        tau_u = tau - tau_s
        phi_user += ev.waveform(t - tau_u)
        phi_server += ev.waveform(t - tau_s)
    if noise.system_phase_density > 0:
        sigma = math.sqrt(noise.system_phase_density * rate / 2.0)
        phi_server = phi_server + rng_for(seed, "sys-server").normal(0.0, sigma, size=n)
        phi_user = phi_user + rng_for(seed, "sys-user").normal(0.0, sigma, size=n)
    if phase_noise_floor > 0:
        phi_server = phi_server + rng_for(seed, "dsp-floor-server").normal(0.0, phase_noise_floor, size=n)
        phi_user = phi_user + rng_for(seed, "dsp-floor-user").normal(0.0, phase_noise_floor, size=n)

    return SensingTraces(
        server=PhaseTrace(samples=phi_server, rate=rate, origin="probe"),
        user=PhaseTrace(samples=phi_user, rate=rate, origin="pilot"),
        rate=rate,
    )


def split_channel(spec: ChannelSpec, at_km: float) -> tuple[ChannelSpec, ChannelSpec]:
    """Split a link at a point; transmittances and delays compose exactly."""
    if not 0.0 <= at_km <= spec.length_km:
        raise ConfigurationError("split point outside the link")
    first = replace(spec, length_km=at_km, vibration_position_km=min(spec.vibration_position_km, at_km))
    second = replace(
        spec,
        length_km=spec.length_km - at_km,
        vibration_position_km=max(spec.vibration_position_km - at_km, 0.0),
    )
    return first, second
