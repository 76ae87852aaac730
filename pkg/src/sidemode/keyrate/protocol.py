"""Shared protocol objects: channel estimates, rate parameters, key-map stats.

Excess noise bookkeeping: ChannelEstimate stores the noise added by the
channel *at its output* (SNU per quadrature on top of shot noise), which is
what the receiver-side estimator measures directly.  The input-referred
figure -- the convention the security analysis consumes -- is the output
value divided by T; both views are exposed explicitly to keep conversions
out of calling code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ..errors import ConfigurationError


@dataclass
class ChannelEstimate:
    """Per-user channel parameters feeding the key-rate engines."""

    transmittance: float
    excess_noise_out: float  # SNU per quadrature at the channel output
    modulation_variance: float  # V_A of the prepared ensemble, SNU
    user: int = 0
    clamped: bool = False  # negative raw noise estimate clamped to zero

    def __post_init__(self) -> None:
        if not 0.0 < self.transmittance <= 1.0:
            raise ConfigurationError("transmittance must be in (0, 1]")
        if self.excess_noise_out < 0:
            raise ConfigurationError("excess noise must be non-negative")
        if self.modulation_variance <= 0:
            raise ConfigurationError("modulation variance must be positive")

    @classmethod
    def from_input_referred(
        cls, transmittance: float, excess_noise_in: float, modulation_variance: float, user: int = 0
    ) -> "ChannelEstimate":
        return cls(
            transmittance=transmittance,
            excess_noise_out=transmittance * excess_noise_in,
            modulation_variance=modulation_variance,
            user=user,
        )

    @property
    def excess_noise_in(self) -> float:
        return self.excess_noise_out / self.transmittance

    @property
    def alpha(self) -> float:
        """Per-symbol coherent amplitude: V_A = 2 alpha^2."""
        return float(np.sqrt(self.modulation_variance / 2.0))


@dataclass
class KeyRateParams:
    """Everything the rate engines need besides the channel estimate."""

    repetition_rate: float = 50e6  # symbols/s
    beta: float = 0.95
    eta: float = 1.0
    v_el: float = 0.0  # SNU
    p_pass: float = 1.0
    delta_ec: float | None = None  # None -> H(Z) - beta I(X;Z) from the channel model
    fock_cutoff: int = 12
    gap_tol: float = 1e-5
    max_iterations: int = 500

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ConfigurationError("beta must be in (0, 1]")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigurationError("eta must be in (0, 1]")
        if self.v_el < 0:
            raise ConfigurationError("electronic noise must be non-negative")
        if not 0.0 < self.p_pass <= 1.0:
            raise ConfigurationError("p_pass must be in (0, 1]")
        if self.fock_cutoff < 8:
            raise ConfigurationError("Fock cutoff must be at least 8")
        if self.repetition_rate <= 0:
            raise ConfigurationError("repetition rate must be positive")


@dataclass
class KeyRateReport:
    """Outcome of one rate computation."""

    method: str  # "gaussian" | "dm-sdp" | "plob"
    bits_per_symbol: float
    bits_per_second: float
    user: int = 0
    clamped: bool = False
    iterations: int = 0
    gap: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def keyrate_bps(bits_per_symbol: float, params: KeyRateParams) -> float:
    """Convert a per-symbol rate to bits/s (negative rates clamp to zero)."""
    return params.repetition_rate * max(bits_per_symbol, 0.0)


@dataclass
class KeyMapStatistics:
    """Outcome statistics of the quadrant key map under the channel model."""

    conditional: np.ndarray  # P(z | k), shape (4, 4)
    marginal: np.ndarray  # P(z)
    mutual_information: float  # I(X;Z), bits
    key_entropy: float  # H(Z), bits
    snr_per_quadrature: float

    def delta_ec(self, beta: float) -> float:
        """Error-correction leakage per symbol: H(Z) - beta I(X;Z)."""
        return self.key_entropy - beta * self.mutual_information

    def soft_information(self) -> float:
        """Gaussian-channel mutual information over both quadratures, bits."""
        return float(2.0 * np.log2(1.0 + self.snr_per_quadrature))


def key_map_statistics(est: ChannelEstimate, params: KeyRateParams) -> KeyMapStatistics:
    """Closed-form wedge probabilities of the measured QPSK constellation.

    The slot outcome for symbol k is an isotropic Gaussian at radius
    sqrt(2 eta T) alpha with per-quadrature variance
    1 + v_el + (eta/2) eps_out; the quadrant probabilities factor into two
    normal CDFs along the +-45 degree wedge boundaries.
    """
    t, eta, v_el = est.transmittance, params.eta, params.v_el
    rho = np.sqrt(2.0 * eta * t) * est.alpha
    sigma2 = 1.0 + v_el + 0.5 * eta * est.excess_noise_out
    lam = rho / np.sqrt(sigma2)
    cond = np.zeros((4, 4))
    for k in range(4):
        for z in range(4):
            theta = np.pi * (k - z) / 2.0
            cond[k, z] = ndtr(lam * np.cos(theta + np.pi / 4)) * ndtr(lam * np.cos(theta - np.pi / 4))
    cond /= cond.sum(axis=1, keepdims=True)  # guard rounding; rows sum to 1 analytically
    marg = 0.25 * cond.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cond > 0, cond / marg[None, :], 1.0)
        mi = float(np.sum(0.25 * cond * np.log2(ratio)))
        h_z = float(-np.sum(marg * np.log2(np.where(marg > 0, marg, 1.0))))
    snr = 0.5 * eta * t * est.modulation_variance / sigma2
    return KeyMapStatistics(
        conditional=cond,
        marginal=marg,
        mutual_information=mi,
        key_entropy=h_z,
        snr_per_quadrature=float(snr),
    )
