"""Uplink channel model: turbulence, beam spreading, collection, and sky noise.

Distances and radii are in meters, wavelengths in meters unless a name
says otherwise (spectral filter widths are quoted in nm, following the
experimental convention), rates in counts per second.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import erf

from .errors import NumericError, ValidationError

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
NIGHT_RADIANCE_FACTOR = 1e-6
DEFAULT_TURBULENCE_CEILING_M = 20_000.0


def fwhm_to_sigma(fwhm: float) -> float:
    """Convert a Gaussian full width at half maximum to its sigma."""
    return fwhm * FWHM_TO_SIGMA


def attenuation_db(eta) -> float:
    """Channel efficiency expressed as attenuation in dB (lossless = 0)."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0) or np.any(eta > 1):
        raise ValidationError("efficiency must lie in (0, 1] to express as dB")
    out = -10.0 * np.log10(eta)
    return float(out) if out.ndim == 0 else out


def efficiency_from_db(db) -> float:
    """Inverse of :func:`attenuation_db`."""
    db = np.asarray(db, dtype=float)
    out = 10.0 ** (-db / 10.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TurbulenceProfile:
    """Altitude profile of the refractive-index structure constant.

    The profile is the standard ground-wind parametrization with a
    configurable near-ground strength `a_ground` and rms wind speed.
    """

    a_ground: float = 1.7e-14
    wind_speed: float = 21.0
    ceiling_m: float = DEFAULT_TURBULENCE_CEILING_M

    def __post_init__(self):
        if self.a_ground < 0:
            raise ValidationError("ground turbulence strength must be >= 0")
        if self.wind_speed < 0:
            raise ValidationError("wind speed must be >= 0")
        if self.ceiling_m <= 0:
            raise ValidationError("integration ceiling must be > 0")


DEFAULT_TURBULENCE = TurbulenceProfile()


def cn2(z, profile: TurbulenceProfile = DEFAULT_TURBULENCE):
    """Refractive-index structure constant at altitude z (meters)."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValidationError("altitude must be >= 0")
    high = 0.00594 * (profile.wind_speed / 27.0) ** 2 * (z * 1e-5) ** 10 * np.exp(-z / 1000.0)
    mid = 2.7e-16 * np.exp(-z / 1500.0)
    ground = profile.a_ground * np.exp(-z / 100.0)
    out = high + mid + ground
    return float(out) if out.ndim == 0 else out


def fried_parameter(
    wavelength: float,
    distance: float,
    profile: TurbulenceProfile = DEFAULT_TURBULENCE,
) -> float:
    """Fried coherence length of the uplink path.

    Integrates the turbulence profile along the slant path with the
    uplink weighting ``((L - z)/L)^(5/3)``, truncated at the profile
    ceiling above which the contribution is negligible.

    Parameters
    ----------
    wavelength : float
        Optical wavelength in meters.
    distance : float
        Path length to the receiver in meters.

    Returns
    -------
    float
        Fried parameter in meters.
    """
    if wavelength <= 0:
        raise ValidationError("wavelength must be > 0")
    if distance <= 0:
        raise ValidationError("distance must be > 0")
    return _fried_cached(float(wavelength), float(distance), profile)


@lru_cache(maxsize=4096)
def _fried_cached(wavelength: float, distance: float, profile: TurbulenceProfile) -> float:
    k = 2.0 * math.pi / wavelength
    upper = min(distance, profile.ceiling_m)

    def integrand(z: float) -> float:
        return cn2(z, profile) * ((distance - z) / distance) ** (5.0 / 3.0)

    integral, abserr = quad(integrand, 0.0, upper, epsabs=1e-18, epsrel=1e-10, limit=200)
    if integral <= 0:
        raise NumericError("turbulence integral is not positive; cannot form r0")
    if abserr > max(1e-15, 1e-6 * integral):
        raise NumericError("turbulence integral failed to converge")
    return (0.42 * k**2 * integral) ** (-3.0 / 5.0)


def turbulence_integral(
    distance: float,
    profile: TurbulenceProfile = DEFAULT_TURBULENCE,
    n_points: int | None = None,
) -> float:
    """Path-weighted turbulence integral (exposed for convergence checks).

    With `n_points` set, uses a fixed-step Simpson rule instead of the
    adaptive scheme so refinement behavior can be tested.
    """
    upper = min(distance, profile.ceiling_m)
    if n_points is None:
        val, _ = quad(
            lambda z: cn2(z, profile) * ((distance - z) / distance) ** (5.0 / 3.0),
            0.0,
            upper,
            epsabs=1e-18,
            epsrel=1e-10,
            limit=200,
        )
        return val
    if n_points % 2 == 0:
        n_points += 1
    z = np.linspace(0.0, upper, n_points)
    y = cn2(z, profile) * ((distance - z) / distance) ** (5.0 / 3.0)
    h = z[1] - z[0]
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


@dataclass(frozen=True)
class ChannelParams:
    """Geometry and bulk efficiencies of the uplink optical channel."""

    distance: float
    waist: float = 0.15
    receiver_radius: float = 0.15
    wavelength: float = 785e-9
    eta_ground: float = 0.8
    eta_atmosphere: float = 0.8
    eta_receiver: float = 0.3
    pointing_rms: float = 0.0
    turbulence: TurbulenceProfile = DEFAULT_TURBULENCE
    fried_override: float | None = None

    def __post_init__(self):
        if self.distance <= 0:
            raise ValidationError("distance must be > 0")
        if self.waist <= 0 or self.receiver_radius <= 0:
            raise ValidationError("beam waist and receiver radius must be > 0")
        if self.wavelength <= 0:
            raise ValidationError("wavelength must be > 0")
        for name in ("eta_ground", "eta_atmosphere", "eta_receiver"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValidationError(f"{name} must lie in (0, 1], got {v}")
        if self.pointing_rms < 0:
            raise ValidationError("pointing rms must be >= 0")

    def fried(self) -> float:
        if self.fried_override is not None:
            return self.fried_override
        return fried_parameter(self.wavelength, self.distance, self.turbulence)


def beam_radius(channel: ChannelParams) -> float:
    """Long-term beam radius at the receiver plane, meters.

    Combines diffraction of the launched Gaussian, turbulence-induced
    spreading over the Fried coherence scale, and pointing jitter.  The
    turbulence correction factor gamma can reach zero or below for
    coherence lengths far exceeding the launch aperture; the formula is
    then outside its fitted regime and a warning is emitted, but the
    value is still evaluated as written.
    """
    w0 = channel.waist
    lam = channel.wavelength
    dist = channel.distance
    k = 2.0 * math.pi / lam
    r0 = channel.fried()
    rayleigh = math.pi * w0**2 / lam
    gamma = 1.0 - 0.26 * (r0 / w0) ** (1.0 / 3.0)
    if gamma <= 0:
        warnings.warn(
            "turbulence correction gamma <= 0 (r0 >> waist); beam radius "
            "formula evaluated outside its fitted regime",
            stacklevel=2,
        )
    w_sq = (
        w0**2 * (1.0 + dist**2 / rayleigh**2)
        + 35.28 * dist**2 * gamma**2 / (k**2 * r0**2)
        + 2.0 * channel.pointing_rms**2
    )
    return math.sqrt(w_sq)


def uplink_efficiency(channel: ChannelParams) -> float:
    """End-to-end uplink collection efficiency (no spectral filtering).

    Product of ground-segment optics, one-way atmospheric transmission,
    the geometric capture fraction of the receiver aperture against the
    spread beam, and receiver coupling.
    """
    w = beam_radius(channel)
    capture = 1.0 - math.exp(-2.0 * channel.receiver_radius**2 / w**2)
    return channel.eta_ground * channel.eta_atmosphere * capture * channel.eta_receiver


@dataclass(frozen=True)
class NoiseEnvironment:
    """Sky radiance environment seen by the receiver."""

    fov: float = 10e-6
    albedo: float = 0.3
    solar_spectral_rate: float = 4.6e18
    regime: str = "day"

    def __post_init__(self):
        if self.fov <= 0:
            raise ValidationError("field of view must be > 0")
        if self.albedo < 0:
            raise ValidationError("albedo must be >= 0")
        if self.solar_spectral_rate < 0:
            raise ValidationError("solar spectral rate must be >= 0")
        if self.regime not in ("day", "night"):
            raise ValidationError(f"regime must be 'day' or 'night', got {self.regime!r}")


def collected_sky_rate(env: NoiseEnvironment, receiver_radius: float):
    """Sky photons collected per second and per nm of bandwidth."""
    if receiver_radius <= 0:
        raise ValidationError("receiver radius must be > 0")
    rate = env.albedo * receiver_radius**2 * env.fov**2 * env.solar_spectral_rate
    if env.regime == "night":
        rate = rate * NIGHT_RADIANCE_FACTOR
    return rate


def background_noise_rate(
    env: NoiseEnvironment,
    receiver_radius: float,
    eta_receiver: float,
    delta_lambda_nm,
):
    """Detected background rate per analyzer port, counts per second.

    The spectral filter width `delta_lambda_nm` multiplies the per-nm
    sky rate; the factor 1/2 accounts for the polarization analysis
    splitting unpolarized background between the two ports.
    """
    delta_lambda_nm = np.asarray(delta_lambda_nm, dtype=float)
    if np.any(delta_lambda_nm < 0):
        raise ValidationError("filter width must be >= 0")
    if not 0.0 < eta_receiver <= 1.0:
        raise ValidationError("receiver coupling must lie in (0, 1]")
    out = collected_sky_rate(env, receiver_radius) * eta_receiver * delta_lambda_nm / 2.0
    return float(out) if out.ndim == 0 else out


def snr_detected(eta_s, noise_rate, tau):
    """Detected signal-to-noise ratio of the uplink arm.

    Ratio of the channel efficiency to the expected background counts
    in a coincidence window across both analyzer ports; infinite when
    the noise rate or window vanishes.
    """
    eta_s = np.asarray(eta_s, dtype=float)
    noise_rate = np.asarray(noise_rate, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(eta_s <= 0):
        raise ValidationError("channel efficiency must be > 0")
    if np.any(noise_rate < 0) or np.any(tau < 0):
        raise ValidationError("noise rate and window must be >= 0")
    denom = 2.0 * noise_rate * tau
    with np.errstate(divide="ignore"):
        out = np.where(denom > 0, eta_s / np.where(denom > 0, denom, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def window_efficiency(width, sigma):
    """Fraction of a centered Gaussian inside a symmetric window.

    Works for the coincidence timing window against arrival-time jitter
    and equally for a spectral filter against the photon bandwidth;
    `width` is the full window, `sigma` the Gaussian standard deviation.
    """
    width = np.asarray(width, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(width < 0):
        raise ValidationError("window width must be >= 0")
    if np.any(sigma < 0):
        raise ValidationError("sigma must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(sigma > 0, width / (2.0 * math.sqrt(2.0) * np.where(sigma > 0, sigma, 1.0)), np.inf)
    out = np.where(sigma > 0, erf(arg), 1.0)
    return float(out) if out.ndim == 0 else out


def timing_window_efficiency(sigma_t, tau):
    """Coincidence-window acceptance for Gaussian timing jitter.

    `sigma_t` is the pair arrival-time standard deviation and `tau`
    the full window width, both in seconds.
    """
    return window_efficiency(tau, sigma_t)


def spectral_filter_efficiency(sigma_lambda_nm, delta_lambda_nm):
    """Filter acceptance for a Gaussian photon spectrum (both in nm).

    `sigma_lambda_nm` is the photon spectral standard deviation and
    `delta_lambda_nm` the full filter width.
    """
    return window_efficiency(delta_lambda_nm, sigma_lambda_nm)
