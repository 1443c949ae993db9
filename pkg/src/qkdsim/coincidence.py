"""Coincidence rates and measured visibility for an entangled-pair link.

The pipeline follows one convention throughout: a "port" is one output
of a polarization analyzer, a detection on an arm is a photon passing
its port times the arm's detected efficiency, and every rate that a
detector actually sees is reduced by a non-paralyzable dead-time factor
computed in a single forward pass from the zero-dead-time singles load.

True coincidences are pairs whose two photons are both detected inside
the coincidence window.  Accidental coincidences pair the remaining
singles on each arm and are reported in two parts: cross accidentals,
where both clicks are photons but from different emissions, and
background accidentals, where at least one click is noise.

Three window disciplines are supported:

``postprocess``
    Free-running detectors; coincidences are post-selected within a
    window of width tau around zero delay.  Timing jitter of the pair
    reduces the true rate by the window acceptance; accidentals pair
    uniformly in time and are unaffected.
``idler_triggered``
    The locally detected idler opens a gate of width tau for the signal
    arm.  The gate acceptance multiplies the signal efficiency wherever
    it appears.
``pulsed_gated``
    Both arms are gated around the pump pulses with per-arm acceptance.
    Photons from different emissions sit in different gates, so the
    cross-accidental rate is identically zero; the residual accidentals
    are photon-noise cross terms plus a noise-noise term suppressed by
    the gate duty cycle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .atmosphere import timing_window_efficiency
from .errors import ConfigError, NumericError, ValidationError
from .source import (
    MAX_PAIR_ORDER,
    MultiPhotonState,
    SourceFitParams,
    build_multiphoton_state,
    multiphoton_projection_table,
    pair_order_rates,
)
from .states import (
    BasisProjector,
    DIAGONAL,
    RECTILINEAR,
    pair_projector,
    idler_marginal,
    projection_probability,
    signal_marginal,
    validate_state,
)

WINDOW_MODES = ("postprocess", "idler_triggered", "pulsed_gated")


class CorrelationModel:
    """Joint polarization statistics of the photon-pair source.

    Either a signed baseline visibility (the scalar model: positively
    correlated ports, uniform marginals, sinusoidal basis dependence) or
    a full two-qubit density matrix.  Both expose the same queries so
    the rate pipeline does not care which one it was given.
    """

    __slots__ = ("_v0", "_rho")

    def __init__(self, v0: float | None = None, rho: np.ndarray | None = None):
        if (v0 is None) == (rho is None):
            raise ValidationError("provide exactly one of v0 or rho")
        if v0 is not None and not -1.0 <= v0 <= 1.0:
            raise ValidationError(f"baseline visibility must lie in [-1, 1], got {v0}")
        if rho is not None:
            rho = validate_state(np.asarray(rho, dtype=complex))
        self._v0 = None if v0 is None else float(v0)
        self._rho = rho

    @classmethod
    def from_visibility(cls, v0: float) -> "CorrelationModel":
        return cls(v0=v0)

    @classmethod
    def from_state(cls, rho: np.ndarray) -> "CorrelationModel":
        return cls(rho=rho)

    @property
    def is_scalar(self) -> bool:
        return self._rho is None

    @property
    def baseline_visibility(self) -> float | None:
        return self._v0

    @property
    def state(self) -> np.ndarray | None:
        return self._rho

    def joint_probability(self, proj_s: BasisProjector, proj_i: BasisProjector) -> float:
        """Probability that both photons pass the given ports."""
        if self._rho is None:
            sign = -1.0 if (proj_s.outcome + proj_i.outcome) % 2 else 1.0
            return 0.25 * (1.0 + sign * self._v0 * math.cos(2.0 * (proj_s.angle - proj_i.angle)))
        return projection_probability(self._rho, pair_projector(proj_s, proj_i))

    def signal_marginal_probability(self, proj_s: BasisProjector) -> float:
        if self._rho is None:
            return 0.5
        ket = proj_s.ket
        return float(np.real(ket.conj() @ signal_marginal(self._rho) @ ket))

    def idler_marginal_probability(self, proj_i: BasisProjector) -> float:
        if self._rho is None:
            return 0.5
        ket = proj_i.ket
        return float(np.real(ket.conj() @ idler_marginal(self._rho) @ ket))

    def port_table(self, proj_s: BasisProjector, proj_i: BasisProjector) -> np.ndarray:
        """2x2 table over (signal passes, idler passes) for one port pair."""
        p11 = self.joint_probability(proj_s, proj_i)
        ms = self.signal_marginal_probability(proj_s)
        mi = self.idler_marginal_probability(proj_i)
        table = np.array(
            [
                [1.0 - ms - mi + p11, mi - p11],
                [ms - p11, p11],
            ]
        )
        if np.any(table < -1e-9):
            raise ValidationError("inconsistent joint statistics (negative cell)")
        return np.clip(table, 0.0, 1.0)


@dataclass(frozen=True)
class ArmParams:
    """One detection arm: analyzer, detector, and its local noise.

    `efficiency` is the probability that a photon passing the analyzer
    is detected, with every static loss of that arm already folded in.
    `noise_rate` is the detected background-plus-dark rate of the arm
    at zero dead time, in counts per second.
    """

    efficiency: float
    noise_rate: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValidationError(f"arm efficiency must lie in (0, 1], got {self.efficiency}")
        if self.noise_rate < 0:
            raise ValidationError("noise rate must be >= 0")
        if self.dead_time < 0:
            raise ValidationError("dead time must be >= 0")


@dataclass(frozen=True)
class WindowParams:
    """Coincidence window discipline and the jitter it integrates over."""

    tau: float
    mode: str = "postprocess"
    timing_sigma: float = 0.0
    signal_sigma: float = 0.0
    idler_sigma: float = 0.0
    rep_rate: float | None = None

    def __post_init__(self):
        # tau may be an array for vectorized parameter scans
        if np.any(np.asarray(self.tau) <= 0):
            raise ValidationError("coincidence window must be > 0")
        if self.mode not in WINDOW_MODES:
            raise ConfigError(f"unknown window mode {self.mode!r}; expected one of {WINDOW_MODES}")
        for name in ("timing_sigma", "signal_sigma", "idler_sigma"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValidationError(f"{name} must be >= 0")
        if self.mode == "pulsed_gated":
            if self.rep_rate is None or self.rep_rate <= 0:
                raise ConfigError("pulsed_gated mode requires a positive rep_rate")
            if np.any(np.asarray(self.tau) * self.rep_rate > 1.0):
                raise ValidationError("gate width exceeds the pulse period")
        elif self.rep_rate is not None:
            raise ConfigError(f"rep_rate only applies to pulsed_gated mode, not {self.mode!r}")

    def pair_acceptance(self) -> float:
        """Window acceptance applied to the true-coincidence rate."""
        if self.mode == "postprocess":
            return timing_window_efficiency(self.timing_sigma, self.tau)
        return 1.0

    def signal_gate_acceptance(self) -> float:
        """Gate acceptance folded into the signal efficiency."""
        if self.mode == "idler_triggered":
            return timing_window_efficiency(self.timing_sigma, self.tau)
        if self.mode == "pulsed_gated":
            return timing_window_efficiency(self.signal_sigma, self.tau)
        return 1.0

    def idler_gate_acceptance(self) -> float:
        if self.mode == "pulsed_gated":
            return timing_window_efficiency(self.idler_sigma, self.tau)
        return 1.0


@dataclass(frozen=True)
class CoincidenceBreakdown:
    """Coincidence rate split into its physical contributions (cps)."""

    true_rate: float
    cross_accidental_rate: float
    background_accidental_rate: float
    signal_singles: float
    idler_singles: float

    @property
    def accidental_rate(self) -> float:
        return self.cross_accidental_rate + self.background_accidental_rate

    @property
    def total(self) -> float:
        return self.true_rate + self.cross_accidental_rate + self.background_accidental_rate


def dead_time_efficiency(singles_rate, dead_time):
    """Throughput of a non-paralyzable detector under the given load."""
    singles_rate = np.asarray(singles_rate, dtype=float)
    dead_time = np.asarray(dead_time, dtype=float)
    if np.any(singles_rate < 0) or np.any(dead_time < 0):
        raise ValidationError("singles rate and dead time must be >= 0")
    out = 1.0 / (1.0 + singles_rate * dead_time)
    return float(out) if out.ndim == 0 else out


def detection_probability(a: int, b: int, eta_s: float, eta_i: float, outcome: str = "both"):
    """Detection outcome probability for `a` signal and `b` idler photons.

    Each photon is detected independently with its arm efficiency, and
    an arm fires when at least one of its photons is detected.

    Parameters
    ----------
    a, b : int
        Photon numbers entering the signal and idler detectors.
    eta_s, eta_i : float
        Detected efficiencies of the two arms.
    outcome : {"both", "signal_only", "idler_only"}
        Which click pattern to score.
    """
    if a < 0 or b < 0:
        raise ValidationError("photon numbers must be >= 0")
    fire_s = 1.0 - (1.0 - eta_s) ** a
    fire_i = 1.0 - (1.0 - eta_i) ** b
    if outcome == "both":
        return fire_s * fire_i
    if outcome == "signal_only":
        return fire_s * (1.0 - fire_i)
    if outcome == "idler_only":
        return (1.0 - fire_s) * fire_i
    raise ValidationError(f"unknown outcome {outcome!r}")


def accidental_rates(window: WindowParams, photon_s, noise_s, photon_i, noise_i):
    """Cross and background accidental rates from uncorrelated singles.

    `photon_*` are the photon singles available for accidental pairing
    (partner undetected), `noise_*` the detected noise singles; all
    rates are after dead time.  Returns ``(cross, background)`` where
    cross pairs two photons from different emissions and background
    involves at least one noise click.  In pulsed mode different
    emissions occupy different gates, so the cross term vanishes and
    the noise-noise term picks up the gate duty cycle.
    """
    tau = window.tau
    if window.mode == "pulsed_gated":
        duty = tau * window.rep_rate
        background = tau * (photon_s * noise_i + noise_s * photon_i + noise_s * noise_i * duty)
        return 0.0 * background, background
    cross = tau * photon_s * photon_i
    background = tau * (photon_s * noise_i + noise_s * photon_i + noise_s * noise_i)
    return cross, background


def port_coincidence_rate(
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    proj_s: BasisProjector,
    proj_i: BasisProjector,
) -> CoincidenceBreakdown:
    """Coincidence rate between one signal port and one idler port.

    This is the single-detector-per-arm configuration used for
    visibility measurements.  First order in the pair number; use the
    pair-order expansion for bright pumping.

    Parameters
    ----------
    pair_rate : float
        Generated pair rate at the source, pairs per second.
    model : CorrelationModel
        Joint polarization statistics.
    signal_arm, idler_arm : ArmParams
        The two detection arms; the signal arm is the one the window
        discipline gates.
    window : WindowParams
        Coincidence window discipline.
    proj_s, proj_i : BasisProjector
        Analyzer settings of the two arms.
    """
    if pair_rate < 0:
        raise ValidationError("pair rate must be >= 0")
    table = model.port_table(proj_s, proj_i)
    p11 = table[1, 1]
    p10 = table[1, 0]
    p01 = table[0, 1]
    marg_s = p11 + p10
    marg_i = p11 + p01

    load_s = pair_rate * marg_s * signal_arm.efficiency + signal_arm.noise_rate
    load_i = pair_rate * marg_i * idler_arm.efficiency + idler_arm.noise_rate
    df_s = dead_time_efficiency(load_s, signal_arm.dead_time)
    df_i = dead_time_efficiency(load_i, idler_arm.dead_time)

    eta_s = signal_arm.efficiency * df_s * window.signal_gate_acceptance()
    eta_i = idler_arm.efficiency * df_i * window.idler_gate_acceptance()
    noise_s = signal_arm.noise_rate * df_s
    noise_i = idler_arm.noise_rate * df_i

    true_rate = pair_rate * p11 * eta_s * eta_i * window.pair_acceptance()
    photon_s = pair_rate * eta_s * (p10 + p11 * (1.0 - eta_i))
    photon_i = pair_rate * eta_i * (p01 + p11 * (1.0 - eta_s))
    cross, background = accidental_rates(window, photon_s, noise_s, photon_i, noise_i)
    return CoincidenceBreakdown(
        true_rate=true_rate,
        cross_accidental_rate=cross,
        background_accidental_rate=background,
        signal_singles=photon_s + noise_s,
        idler_singles=photon_i + noise_i,
    )


def _port_rates(rate_fn, basis_angle: float) -> np.ndarray:
    rates = np.empty((2, 2))
    for a in (0, 1):
        for b in (0, 1):
            rates[a, b] = rate_fn(BasisProjector(basis_angle, a), BasisProjector(basis_angle, b))
    return rates


def measured_visibility(
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    basis_angle: float = RECTILINEAR,
) -> float:
    """Signed coincidence visibility in one analysis basis.

    Computed the way an experiment would: from the four port-pair
    coincidence rates at the given common analyzer angle, as
    (correlated - uncorrelated) / total.
    """

    def rate(ps, pi):
        return port_coincidence_rate(pair_rate, model, signal_arm, idler_arm, window, ps, pi).total

    c = _port_rates(rate, basis_angle)
    total = c.sum()
    if total <= 0:
        raise NumericError("total coincidence rate vanished; visibility undefined")
    return (c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0]) / total


def average_measured_visibility(
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
) -> float:
    """Mean absolute visibility over the two key-generation bases."""
    vals = [
        abs(measured_visibility(pair_rate, model, signal_arm, idler_arm, window, angle))
        for angle in (RECTILINEAR, DIAGONAL)
    ]
    return float(np.mean(vals))


def cw_visibility_closed_form(v0, pair_rate, eta_s, eta_i, noise_s, tau):
    """Closed-form visibility of the free-running pipeline.

    Valid for zero dead time, noiseless idler, perfect timing
    acceptance, and the scalar correlation model; under those
    assumptions it agrees with the full pipeline to rounding.
    Efficiencies are the detected-arm values, the noise rate the
    detected signal-arm background.  Broadcasts over numpy arrays.
    """
    v0 = np.asarray(v0, dtype=float)
    p_c = (1.0 + v0) / 4.0
    p_uc = (1.0 - v0) / 4.0
    x1 = (eta_s + eta_i - eta_s * eta_i) / 2.0
    x2 = 1.0 - eta_s / 2.0 - eta_i / 2.0 + 2.0 * eta_s * eta_i * (p_c**2 + p_uc**2)
    x3 = (2.0 - eta_s) / eta_s
    n_tau = np.asarray(pair_rate, dtype=float) * np.asarray(tau, dtype=float)
    i_tau = np.asarray(noise_s, dtype=float) * np.asarray(tau, dtype=float)
    out = v0 * (1.0 - n_tau * x1 - i_tau) / (1.0 + n_tau * x2 + i_tau * x3)
    return float(out) if out.ndim == 0 else out


def pulsed_visibility_closed_form(v0, gated_eta_s, noise_s, tau):
    """Closed-form visibility of the pulse-gated pipeline.

    Valid for zero dead time and noiseless idler; `gated_eta_s` is the
    signal efficiency including its gate acceptance.  Independent of
    the pair rate: with pair-pair overlaps deferred to the multi-pair
    expansion, brighter pumping scales true and accidental rates alike.
    """
    i_tau = np.asarray(noise_s, dtype=float) * np.asarray(tau, dtype=float)
    out = np.asarray(v0, dtype=float) * (1.0 - i_tau) / (
        1.0 + i_tau * (2.0 - gated_eta_s) / gated_eta_s
    )
    return float(out) if out.ndim == 0 else out


def snr_visibility_approximation(v0, snr, pair_rate, tau, eta_i, eta_s, eta_tau=1.0):
    """Visibility in terms of the detected signal-to-noise ratio.

    Leading order in the signal-arm efficiency (the uplink regime), so
    the background enters only through the ratio of that efficiency to
    the expected in-window noise.  Exposes the trade-off between pair
    rate and background that fixes the optimum pump power.
    """
    v0 = np.asarray(v0, dtype=float)
    snr = np.asarray(snr, dtype=float)
    n_tau = np.asarray(pair_rate, dtype=float) * np.asarray(tau, dtype=float)
    num = 2.0 * eta_tau - n_tau * eta_i - eta_s / snr
    den = 2.0 * eta_tau + n_tau * (2.0 - eta_i) + 2.0 / snr
    out = v0 * num / den
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=256)
def _cached_state(params: SourceFitParams, n: int, n_cap: int) -> MultiPhotonState:
    return build_multiphoton_state(params, n, n_cap=n_cap)


def _at_least_one(counts: np.ndarray, eta: float) -> np.ndarray:
    """P(at least one of `counts` photons is detected) per count value."""
    return 1.0 - (1.0 - eta) ** counts


def multiphoton_port_coincidence_rate(
    pair_rate: float,
    mu: float,
    params: SourceFitParams,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    proj_s: BasisProjector,
    proj_i: BasisProjector,
    n_max: int = MAX_PAIR_ORDER,
) -> CoincidenceBreakdown:
    """Port-pair coincidence rate including multi-pair emissions.

    Sums the contributions of pair orders 1..n_max with thermal order
    statistics calibrated so order 1 occurs at `pair_rate`.  Within one
    emission all photons share the window, so a coincidence is at least
    one detection on each arm; detections from different emissions (or
    from noise) pair accidentally exactly as at first order, with the
    noise-noise term counted once across orders.
    """
    if pair_rate < 0:
        raise ValidationError("pair rate must be >= 0")
    rates = pair_order_rates(pair_rate, mu, n_max)
    counts = [np.arange(n + 1, dtype=float) for n in range(1, n_max + 1)]
    tables = []
    for n in range(1, n_max + 1):
        state = _cached_state(params, n, n_max)
        tables.append(multiphoton_projection_table(state, proj_s, proj_i))

    # Zero-dead-time singles load per arm: one click per emission with
    # at least one detected photon, plus noise.
    load_s = signal_arm.noise_rate
    load_i = idler_arm.noise_rate
    for n, table in enumerate(tables, start=1):
        k = counts[n - 1]
        load_s += rates[n - 1] * float(table.sum(axis=1) @ _at_least_one(k, signal_arm.efficiency))
        load_i += rates[n - 1] * float(table.sum(axis=0) @ _at_least_one(k, idler_arm.efficiency))
    df_s = dead_time_efficiency(load_s, signal_arm.dead_time)
    df_i = dead_time_efficiency(load_i, idler_arm.dead_time)

    eta_s = signal_arm.efficiency * df_s * window.signal_gate_acceptance()
    eta_i = idler_arm.efficiency * df_i * window.idler_gate_acceptance()
    noise_s = signal_arm.noise_rate * df_s
    noise_i = idler_arm.noise_rate * df_i

    true_rate = 0.0
    photon_s = 0.0
    photon_i = 0.0
    pair_window = window.pair_acceptance()
    for n, table in enumerate(tables, start=1):
        k = counts[n - 1]
        det_s = _at_least_one(k, eta_s)
        det_i = _at_least_one(k, eta_i)
        true_rate += rates[n - 1] * float(det_s @ table @ det_i) * pair_window
        photon_s += rates[n - 1] * float(det_s @ table @ (1.0 - det_i))
        photon_i += rates[n - 1] * float((1.0 - det_s) @ table @ det_i)
    cross, background = accidental_rates(window, photon_s, noise_s, photon_i, noise_i)
    return CoincidenceBreakdown(
        true_rate=true_rate,
        cross_accidental_rate=cross,
        background_accidental_rate=background,
        signal_singles=photon_s + noise_s,
        idler_singles=photon_i + noise_i,
    )


def multiphoton_visibility(
    pair_rate: float,
    mu: float,
    params: SourceFitParams,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    basis_angle: float = RECTILINEAR,
    n_max: int = MAX_PAIR_ORDER,
) -> float:
    """Signed visibility in one basis, multi-pair emissions included."""

    def rate(ps, pi):
        return multiphoton_port_coincidence_rate(
            pair_rate, mu, params, signal_arm, idler_arm, window, ps, pi, n_max=n_max
        ).total

    c = _port_rates(rate, basis_angle)
    total = c.sum()
    if total <= 0:
        raise NumericError("total coincidence rate vanished; visibility undefined")
    return (c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0]) / total
