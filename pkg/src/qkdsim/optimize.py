"""End-to-end uplink scenario assembly and operating-point optimization.

An `UplinkScenario` binds the source, the atmospheric channel, the sky
background, and the receiver layout into a single object that can
price any operating point (pump power, spectral filter width,
coincidence window) at any range.  The optimizer then searches that
3-parameter space with a log-spaced grid followed by shrinking grid
refinement, which is robust to the plateaus and cliffs the key-rate
landscape develops near threshold.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .atmosphere import (
    ChannelParams,
    DEFAULT_TURBULENCE,
    NoiseEnvironment,
    TurbulenceProfile,
    background_noise_rate,
    snr_detected,
    spectral_filter_efficiency,
    uplink_efficiency,
)
from .coincidence import CorrelationModel, WindowParams
from .errors import ValidationError
from .keyrate import (
    KEY_OVERHEAD_FACTOR,
    QkdMetrics,
    basis_qber,
    qber,
    raw_key_rate,
    secret_key_rate_value,
)
from .qkd import SCHEMES, model_port_tables, active_rate_table, passive_rate_table

PUMP_BOUNDS_MW = (1e-3, 1e3)
FILTER_BOUNDS_NM = (1e-3, 2.0)
WINDOW_BOUNDS_S = (1e-12, 3e-9)
GRID_POINTS = 25
REFINE_ROUNDS = 3
REFINE_SHRINK = 4.0
DEFAULT_LEO_DISTANCE_M = 160e3


@dataclass(frozen=True)
class OptimizationBounds:
    """Search ranges of the three tunable operating-point axes."""

    pump_mw: tuple[float, float] = PUMP_BOUNDS_MW
    delta_lambda_nm: tuple[float, float] = FILTER_BOUNDS_NM
    tau_s: tuple[float, float] = WINDOW_BOUNDS_S

    def __post_init__(self):
        for name in ("pump_mw", "delta_lambda_nm", "tau_s"):
            lo, hi = getattr(self, name)
            if not 0 < lo < hi:
                raise ValidationError(f"{name} bounds must satisfy 0 < low < high")


@dataclass(frozen=True)
class UplinkScenario:
    """A complete uplink link model, parametric in the operating point.

    The signal photon climbs to the satellite: its efficiency is the
    product of ground optics, atmospheric transmission, geometric
    capture after turbulent spreading, receiver coupling, and the
    spectral filter acceptance.  The idler stays on the ground with a
    fixed detected efficiency.  Sky background enters the signal arm
    through the receiver field of view and the same spectral filter.
    """

    brightness_per_mw: float
    model: CorrelationModel
    waist: float = 0.15
    receiver_radius: float = 0.15
    wavelength: float = 785e-9
    eta_ground: float = 0.8
    eta_atmosphere: float = 0.8
    eta_receiver: float = 0.3
    pointing_rms: float = 0.0
    turbulence: TurbulenceProfile = DEFAULT_TURBULENCE
    fried_override: float | None = None
    fov: float = 10e-6
    albedo: float = 0.3
    solar_spectral_rate: float = 4.6e18
    regime: str = "day"
    spectral_sigma_nm: float = 0.54 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    timing_sigma: float = 350e-12 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    idler_timing_sigma: float = 0.0
    detector_efficiency: float = 1.0
    signal_dark_rate: float = 0.0
    signal_dead_time: float = 0.0
    idler_efficiency: float = 10 ** (-1.6)
    idler_noise_rate: float = 1000.0
    idler_dead_time: float = 0.0
    window_mode: str = "postprocess"
    rep_rate: float | None = None
    scheme: str = "passive"
    overhead: float = KEY_OVERHEAD_FACTOR

    def __post_init__(self):
        if self.brightness_per_mw <= 0:
            raise ValidationError("source brightness must be > 0")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ValidationError("detector efficiency must lie in (0, 1]")
        if not 0.0 < self.idler_efficiency <= 1.0:
            raise ValidationError("idler efficiency must lie in (0, 1]")
        if self.signal_dark_rate < 0 or self.idler_noise_rate < 0:
            raise ValidationError("noise rates must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    def channel_at(self, distance: float) -> ChannelParams:
        return ChannelParams(
            distance=distance,
            waist=self.waist,
            receiver_radius=self.receiver_radius,
            wavelength=self.wavelength,
            eta_ground=self.eta_ground,
            eta_atmosphere=self.eta_atmosphere,
            eta_receiver=self.eta_receiver,
            pointing_rms=self.pointing_rms,
            turbulence=self.turbulence,
            fried_override=self.fried_override,
        )

    def noise_environment(self) -> NoiseEnvironment:
        return NoiseEnvironment(
            fov=self.fov,
            albedo=self.albedo,
            solar_spectral_rate=self.solar_spectral_rate,
            regime=self.regime,
        )

    def pair_rate(self, pump_mw):
        return self.brightness_per_mw * np.asarray(pump_mw, dtype=float)

    def signal_efficiency(self, distance: float, delta_lambda_nm):
        link = uplink_efficiency(self.channel_at(distance)) * self.detector_efficiency
        return link * spectral_filter_efficiency(self.spectral_sigma_nm, delta_lambda_nm)

    def signal_noise_rate(self, delta_lambda_nm):
        sky = background_noise_rate(
            self.noise_environment(), self.receiver_radius, self.eta_receiver, delta_lambda_nm
        )
        return sky * self.detector_efficiency + self.signal_dark_rate

    def window(self, tau) -> WindowParams:
        if self.window_mode == "pulsed_gated":
            return WindowParams(
                tau=tau,
                mode="pulsed_gated",
                signal_sigma=self.timing_sigma,
                idler_sigma=self.idler_timing_sigma,
                rep_rate=self.rep_rate,
            )
        return WindowParams(tau=tau, mode=self.window_mode, timing_sigma=self.timing_sigma)

    def rate_table(self, distance: float, pump_mw, delta_lambda_nm, tau) -> np.ndarray:
        """Detector-pair rate table; operating-point inputs broadcast."""
        p11, marg_s, marg_i = model_port_tables(self.model)
        table_fn = passive_rate_table if self.scheme == "passive" else active_rate_table
        return table_fn(
            self.pair_rate(pump_mw),
            p11,
            marg_s,
            marg_i,
            self.signal_efficiency(distance, delta_lambda_nm),
            self.signal_noise_rate(delta_lambda_nm),
            self.signal_dead_time,
            np.asarray(self.idler_efficiency, dtype=float),
            np.asarray(self.idler_noise_rate, dtype=float),
            self.idler_dead_time,
            self.window(tau),
        )

    def skr_value(self, distance: float, pump_mw, delta_lambda_nm, tau):
        """Signed distilled-key rate; broadcasts like `rate_table`."""
        table = self.rate_table(distance, pump_mw, delta_lambda_nm, tau)
        return secret_key_rate_value(
            raw_key_rate(table), qber(table, undefined=0.5), self.overhead
        )

    def snr_db(self, distance: float, delta_lambda_nm, tau):
        """Detected uplink signal-to-noise ratio in dB."""
        snr = snr_detected(
            self.signal_efficiency(distance, delta_lambda_nm),
            self.signal_noise_rate(delta_lambda_nm),
            tau,
        )
        out = 10.0 * np.log10(snr)
        return float(out) if np.ndim(out) == 0 else out

    def metrics(self, distance: float, pump_mw, delta_lambda_nm, tau) -> QkdMetrics:
        """Full figures of merit at one operating point (scalars only)."""
        table = self.rate_table(distance, pump_mw, delta_lambda_nm, tau)
        rect, diag = basis_qber(table, undefined=0.5)
        avg = 0.5 * (rect + diag)
        skr = secret_key_rate_value(raw_key_rate(table), avg, self.overhead)
        return QkdMetrics(
            raw_rate=float(raw_key_rate(table)),
            qber_rect=float(rect),
            qber_diag=float(diag),
            qber_avg=float(avg),
            apv=float(1.0 - 2.0 * avg),
            snr_d_db=self.snr_db(distance, delta_lambda_nm, tau),
            skr=float(skr) if skr > 0 else None,
        )


@dataclass(frozen=True)
class OperatingPoint:
    pump_mw: float
    delta_lambda_nm: float
    tau: float


@dataclass(frozen=True)
class OptimizeResult:
    point: OperatingPoint
    metrics: QkdMetrics
    skr_value: float

    @property
    def feasible(self) -> bool:
        return self.skr_value > 0


def _log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def maximize_skr(
    scenario: UplinkScenario,
    distance: float,
    bounds: OptimizationBounds = OptimizationBounds(),
    fixed_pump_mw: float | None = None,
    fixed_delta_lambda_nm: float | None = None,
    fixed_tau: float | None = None,
    grid_points: int = GRID_POINTS,
    rounds: int = REFINE_ROUNDS,
    shrink: float = REFINE_SHRINK,
) -> OptimizeResult:
    """Best operating point of a scenario at one range.

    A full log-spaced grid over (pump power, filter width, coincidence
    window) locates the basin; coordinate descent then re-samples each
    free axis around the incumbent with the span shrunk every round,
    clipped to the bounds, and the incumbent only ever improves.  An
    axis pinned by a `fixed_*` value is excluded from the search, which
    is how the unoptimized reference curves are produced.
    """
    limits = [bounds.pump_mw, bounds.delta_lambda_nm, bounds.tau_s]
    fixed = [fixed_pump_mw, fixed_delta_lambda_nm, fixed_tau]
    axes = [
        np.array([pin]) if pin is not None else _log_grid(lo, hi, grid_points)
        for (lo, hi), pin in zip(limits, fixed)
    ]

    def evaluate(pump, dl, tau):
        return scenario.skr_value(
            distance, np.asarray(pump)[:, None, None], np.asarray(dl)[None, :, None],
            np.asarray(tau)[None, None, :]
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value = evaluate(*axes)
        idx = np.unravel_index(np.argmax(value), value.shape)
        best_val = float(value[idx])
        best = [float(ax[i]) for ax, i in zip(axes, idx)]
        spans = [0.0 if pin is not None else math.log(hi / lo) for (lo, hi), pin in zip(limits, fixed)]
        for rnd in range(1, rounds + 1):
            for k in range(3):
                if fixed[k] is not None:
                    continue
                lo, hi = limits[k]
                half = spans[k] / (2.0 * shrink**rnd)
                line = _log_grid(
                    max(lo, best[k] * math.exp(-half)),
                    min(hi, best[k] * math.exp(half)),
                    grid_points,
                )
                probe = [np.array([b]) for b in best]
                probe[k] = line
                value = evaluate(*probe)
                j = int(np.argmax(value))
                flat = value.reshape(-1)
                if flat[j] > best_val:
                    best_val = float(flat[j])
                    best[k] = float(line[j])
    point = OperatingPoint(pump_mw=best[0], delta_lambda_nm=best[1], tau=best[2])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        metrics = scenario.metrics(distance, point.pump_mw, point.delta_lambda_nm, point.tau)
        skr = scenario.skr_value(distance, point.pump_mw, point.delta_lambda_nm, point.tau)
    return OptimizeResult(point=point, metrics=metrics, skr_value=float(skr))


def _bisect_feasibility(feasible, lo, hi_seed, cap, tol):
    """Largest x with feasible(x), found by expansion then bisection.

    Assumes feasibility is monotone decreasing in x.  Returns 0.0 when
    already infeasible at `lo`; saturates at `cap` with a warning.
    """
    if not feasible(lo):
        return 0.0
    hi = hi_seed
    while feasible(hi):
        lo = hi
        hi *= 2.0
        if hi > cap:
            warnings.warn("feasible beyond the search cap; returning the cap", stacklevel=3)
            return cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_distance(
    scenario: UplinkScenario,
    lo: float = 50e3,
    tol: float = 1e3,
    cap: float = 1e9,
    **opt_kwargs,
) -> float:
    """Largest range (m) at which a positive key rate survives.

    The operating point is re-optimized at every probed range, so this
    is the envelope over pump, filter, and window, not a fixed setting.
    """

    def feasible(distance):
        return maximize_skr(scenario, distance, **opt_kwargs).feasible

    return _bisect_feasibility(feasible, lo, 2.0 * lo, cap, tol)


def max_field_of_view(
    scenario: UplinkScenario,
    distance: float = DEFAULT_LEO_DISTANCE_M,
    lo: float = 1e-6,
    tol: float = 0.5e-6,
    cap: float = 0.1,
    **opt_kwargs,
) -> float:
    """Largest receiver field of view (rad) with a positive key rate.

    The sky background grows quadratically with the field of view, so
    feasibility is monotone and bisection applies; the range defaults
    to a low-orbit pass near culmination.
    """

    def feasible(fov):
        widened = dataclasses.replace(scenario, fov=fov)
        return maximize_skr(widened, distance, **opt_kwargs).feasible

    return _bisect_feasibility(feasible, lo, 2.0 * lo, cap, tol)
