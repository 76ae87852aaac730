"""Channel parameter estimation from sent/received slot data.

The estimator works in the calibrated SNU frame of the receiver: a complex
least-squares gain against the sent amplitudes yields the transmittance
(after efficiency compensation), and the residual variance beyond shot and
electronic noise gives the channel's output-referred excess noise.
"""

from __future__ import annotations

import numpy as np

from ..dsp import QuadratureSamples
from ..errors import ConfigurationError
from .protocol import ChannelEstimate

MIN_SLOTS = 100_000


def synthetic_quadratures(
    transmittance: float,
    excess_noise_out: float,
    modulation_variance: float,
    n_slots: int,
    seed: int,
    eta: float = 1.0,
    v_el: float = 0.0,
    user: int = 0,
) -> tuple[np.ndarray, QuadratureSamples]:
    """Slot-tier channel surrogate: draws (sent amplitudes, received quads).

    Used for large-sample estimation studies where a full field simulation
    would be wasteful; statistics match the field-tier chain by
    construction (means sqrt(2 eta T) alpha_k, per-quadrature variance
    1 + v_el + (eta/2) eps_out).
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    alpha = np.sqrt(modulation_variance / 2.0)
    symbols = rng.integers(0, 4, size=n_slots)
    sent = alpha * np.exp(0.5j * np.pi * symbols)
    mean = np.sqrt(2.0 * eta * transmittance) * sent
    sigma = np.sqrt(1.0 + v_el + 0.5 * eta * excess_noise_out)
    x = mean.real + rng.normal(0.0, sigma, n_slots)
    p = mean.imag + rng.normal(0.0, sigma, n_slots)
    return sent, QuadratureSamples(x=x, p=p, user=user)


def estimate_channel_params(
    sent: np.ndarray,
    received: QuadratureSamples,
    eta: float = 1.0,
    v_el: float = 0.0,
    enforce_min_slots: bool = True,
) -> ChannelEstimate:
    """Recover (T, excess noise, V_A) from matched sent/received records.

    T comes from |g|^2 / eta with g the complex LS gain of received on
    sent; the excess noise is the residual per-quadrature variance beyond
    shot and electronic noise, scaled back to the channel output by 2/eta.
    A negative raw noise estimate (finite-sample artifact) clamps to zero
    with the ``clamped`` flag set.
    """
    sent = np.asarray(sent, dtype=np.complex128)
    if sent.size != received.n_slots:
        raise ConfigurationError("sent/received length mismatch")
    if enforce_min_slots and sent.size < MIN_SLOTS:
        raise ConfigurationError(f"need at least {MIN_SLOTS} slots for estimation")
    r = (received.x + 1j * received.p) / np.sqrt(2.0)
    gain = np.vdot(sent, r) / np.vdot(sent, sent)
    t_est = float(abs(gain) ** 2 / eta)
    resid = r - gain * sent
    resid_var = float(np.mean(np.abs(resid) ** 2))  # per-quadrature variance
    eps_out = (resid_var - 1.0 - v_el) * 2.0 / eta
    clamped = eps_out < 0.0
    v_a = float(2.0 * np.mean(np.abs(sent) ** 2))
    return ChannelEstimate(
        transmittance=min(max(t_est, 1e-12), 1.0),
        excess_noise_out=max(eps_out, 0.0),
        modulation_variance=v_a,
        user=received.user,
        clamped=clamped,
    )


def excess_noise_confidence(est: ChannelEstimate, n_slots: int, eta: float, z: float = 1.96) -> float:
    """Half-width of the excess-noise CI from the variance-of-variance law."""
    sigma2 = 1.0 + 0.5 * eta * est.excess_noise_out  # electronic noise removed already
    return float(z * sigma2 * np.sqrt(1.0 / n_slots) * 2.0 / eta)
