"""Truncated Fock-space operators for the discrete-modulation analysis.

Quadrature convention x = a + a^dag, p = i(a^dag - a): vacuum variance 1
per quadrature (shot noise units), coherent amplitude m has <x> = 2 Re m.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gammaln, ndtr

from ..errors import ConfigurationError


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(np.complex128)


def quadrature_ops(dim: int) -> dict[str, np.ndarray]:
    """x, p, n, d = x^2 - p^2 and the symmetrized cross moment xp + px."""
    a = annihilation(dim)
    ad = a.conj().T
    x = a + ad
    p = 1j * (ad - a)
    return {
        "x": x,
        "p": p,
        "n": ad @ a,
        "d": x @ x - p @ p,
        "c": x @ p + p @ x,
    }


def coherent_vec(alpha: complex, dim: int) -> np.ndarray:
    """Truncated coherent state |alpha>."""
    n = np.arange(dim)
    log_mag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * gammaln(n + 1)
    vec = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    if abs(alpha) < 1e-300:
        vec = np.zeros(dim, dtype=np.complex128)
        vec[0] = 1.0
    return vec.astype(np.complex128)


def coherent_overlap(a: complex, b: complex) -> complex:
    """<a|b> in closed form."""
    return np.exp(-0.5 * (abs(a) ** 2 + abs(b) ** 2) + np.conj(a) * b)


def qpsk_amplitudes(alpha: float | complex) -> np.ndarray:
    """The four prepared amplitudes alpha * i^k."""
    return np.asarray([alpha * 1j**k for k in range(4)], dtype=np.complex128)


def qpsk_reduced_state(alpha: float | complex, probs: np.ndarray | None = None) -> np.ndarray:
    """Gram-matrix reduced state sum sqrt(p_l p_h) <a_h|a_l> |l><h|.

    Positive semidefinite with unit trace by construction; both properties
    are asserted because downstream solvers rely on them.
    """
    probs = np.full(4, 0.25) if probs is None else np.asarray(probs, dtype=np.float64)
    amps = qpsk_amplitudes(alpha)
    rho = np.zeros((4, 4), dtype=np.complex128)
    for l in range(4):
        for h in range(4):
            rho[l, h] = np.sqrt(probs[l] * probs[h]) * coherent_overlap(amps[h], amps[l])
    if abs(np.trace(rho).real - 1.0) > 1e-10:
        raise ConfigurationError("reduced state trace differs from 1")
    eig = np.linalg.eigvalsh(rho)
    if eig.min() < -1e-10:
        raise ConfigurationError("reduced state is not positive semidefinite")
    return rho


def _wedge_weight(r: np.ndarray, theta: np.ndarray, sigma: float) -> np.ndarray:
    """Probability that an outcome at (r, theta) lands in wedge 0 after
    isotropic Gaussian smearing of per-axis std ``sigma``.

    Wedge 0 is {x > |p|}; in the rotated axes u, v at -45/+45 degrees the
    two half-plane conditions are independent, giving a product of normal
    CDFs.  sigma -> 0 recovers the sharp indicator.
    """
    u = r * np.cos(theta + np.pi / 4)
    v = r * np.cos(theta - np.pi / 4)
    if sigma <= 0.0:
        return ((u > 0) & (v > 0)).astype(np.float64)
    return ndtr(u / sigma) * ndtr(v / sigma)


@lru_cache(maxsize=16)
def region_operators(dim: int, sigma_extra: float = 0.0, n_radial: int = 240, n_angular: int = 1024) -> tuple:
    """Quadrant key-map POVM elements of the (possibly noisy) heterodyne.

    Returns the four operators (R_0..R_3) in the Fock basis.  For an ideal
    measurement (sigma_extra = 0) the matrix elements have a closed form;
    detector imperfections smear the quadrant indicator with a Gaussian of
    per-axis std ``sigma_extra`` in the outcome plane normalized so the
    ideal heterodyne noise is 1/sqrt(2) per axis.  The four operators sum
    to the identity.
    """
    sigma_extra = float(sigma_extra)
    if sigma_extra == 0.0:
        r0 = _sharp_region0(dim)
    else:
        # radial Gauss-Legendre x angular trapezoid quadrature of
        # <m|R_0|n> = (1/pi) Int r^(m+n+1) e^{-r^2} e^{i(m-n)theta} w(r,theta)
        r_max = np.sqrt(dim) + 6.0
        nodes, weights = np.polynomial.legendre.leggauss(n_radial)
        r = 0.5 * r_max * (nodes + 1.0)
        wr = 0.5 * r_max * weights
        theta = 2 * np.pi * np.arange(n_angular) / n_angular
        wtheta = 2 * np.pi / n_angular
        wmap = _wedge_weight(r[:, None], theta[None, :], sigma_extra)  # (n_r, n_th)
        # angular Fourier coefficients A_k(r) for k = m - n
        ks = np.arange(-(dim - 1), dim)
        phases = np.exp(1j * np.outer(ks, theta))  # (n_k, n_th)
        ang = wmap @ phases.T * wtheta  # (n_r, n_k)
        logfact = gammaln(np.arange(dim) + 1.0)
        r0 = np.zeros((dim, dim), dtype=np.complex128)
        logr = np.log(r)
        expfac = np.exp(-(r**2))
        for m in range(dim):
            for n in range(dim):
                radial = np.exp((m + n + 1) * logr - r**2 - 0.5 * (logfact[m] + logfact[n]))
                k_idx = (m - n) + (dim - 1)
                r0[m, n] = (1.0 / np.pi) * np.sum(wr * radial * ang[:, k_idx])
    ops = []
    n_idx = np.arange(dim)
    for z in range(4):
        # rotating the wedge by theta_z multiplies <m|R|n> by e^{i(m-n)theta_z}
        rot = np.exp(1j * (n_idx[:, None] - n_idx[None, :]) * (np.pi * z / 2.0))
        ops.append(r0 * rot)
    return tuple(ops)


def _sharp_region0(dim: int) -> np.ndarray:
    """Closed form of the ideal quadrant operator centered on the +x axis."""
    out = np.zeros((dim, dim), dtype=np.complex128)
    logfact = gammaln(np.arange(dim) + 1.0)
    for m in range(dim):
        for n in range(dim):
            radial = np.exp(gammaln((m + n) / 2.0 + 1.0) - 0.5 * (logfact[m] + logfact[n])) / 2.0
            if m == n:
                angular = np.pi / 2.0
            else:
                k = m - n
                angular = 2.0 * np.sin(k * np.pi / 4.0) / k
            out[m, n] = radial * angular / np.pi
    return out


def detector_smearing_sigma(eta: float, v_el: float) -> float:
    """Extra per-axis outcome noise of a trusted imperfect heterodyne.

    In the outcome frame where the pre-detector amplitude appears with unit
    gain, an ideal heterodyne contributes per-axis variance 1/2; efficiency
    eta and electronic noise v_el raise the total to (1 + v_el) / (2 eta).
    """
    if not 0.0 < eta <= 1.0:
        raise ConfigurationError("efficiency must be in (0, 1]")
    extra_var = (1.0 + v_el) / (2.0 * eta) - 0.5
    return float(np.sqrt(max(extra_var, 0.0)))


def lossy_thermal_dyad(
    alpha_ket: complex,
    alpha_bra: complex,
    transmissivity: float,
    eps_out: float,
    dim: int,
    n_gh: int = 12,
) -> np.ndarray:
    """Channel action on |alpha_ket><alpha_bra|: pure loss then thermal noise.

    The loss channel maps the dyad to <b|a>^(1-tau) |sqrt(tau) a><sqrt(tau) b|;
    the added noise (per-quadrature variance eps_out) is a random coherent
    displacement averaged with Gauss-Hermite quadrature.
    """
    tau = transmissivity
    a, b = alpha_ket, alpha_bra
    prefactor = np.exp((1.0 - tau) * (-(abs(a) ** 2 + abs(b) ** 2) / 2.0 + np.conj(b) * a))
    sa, sb = np.sqrt(tau) * a, np.sqrt(tau) * b
    if eps_out <= 0.0:
        ka = coherent_vec(sa, dim)
        kb = coherent_vec(sb, dim)
        return prefactor * np.outer(ka, kb.conj())
    sigma_axis = np.sqrt(eps_out / 4.0)  # Var(Re beta) = W/2 with W = eps_out / 2
    nodes, weights = np.polynomial.hermite.hermgauss(n_gh)
    disp = np.sqrt(2.0) * sigma_axis * nodes
    wnorm = weights / np.sqrt(np.pi)
    out = np.zeros((dim, dim), dtype=np.complex128)
    for i, dre in enumerate(disp):
        for j, dim_ in enumerate(disp):
            beta = dre + 1j * dim_
            phase = np.exp(1j * np.imag(beta * np.conj(sa - sb)))
            ka = coherent_vec(sa + beta, dim)
            kb = coherent_vec(sb + beta, dim)
            out += wnorm[i] * wnorm[j] * phase * np.outer(ka, kb.conj())
    return prefactor * out


def simulated_joint_state(
    alpha: float,
    g: float,
    transmittance: float,
    eps_out: float,
    dim: int,
    probs: np.ndarray | None = None,
) -> np.ndarray:
    """Entanglement-based state of (A, B) after the simulated channel.

    Alice's register holds the corrected ensemble (amplitudes g * alpha);
    the channel transmissivity is scaled down by g^2 so the arriving means
    stay the physically measured sqrt(T) * alpha * i^k.
    """
    probs = np.full(4, 0.25) if probs is None else np.asarray(probs, dtype=np.float64)
    amps = qpsk_amplitudes(g * alpha)
    tau = transmittance / g**2
    if tau > 1.0:
        raise ConfigurationError("corrected transmissivity above 1; correction factor too small")
    rho = np.zeros((4 * dim, 4 * dim), dtype=np.complex128)
    for l in range(4):
        for h in range(4):
            dyad = lossy_thermal_dyad(amps[l], amps[h], tau, eps_out, dim)
            rho[l * dim:(l + 1) * dim, h * dim:(h + 1) * dim] = np.sqrt(probs[l] * probs[h]) * dyad
    return rho
