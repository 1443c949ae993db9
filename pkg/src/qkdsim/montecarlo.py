"""Event-level Monte Carlo oracle for the analytic rate pipeline.

Every simulation here builds an explicit timeline: pair emissions as a
Poisson process (or Bernoulli per pulse when gated), per-photon
analyzer outcomes drawn from the same joint statistics the analytic
model uses, detection thinning, timing jitter, per-detector
non-paralyzable dead time applied to the event stream, and finally the
same coincidence logic the hardware would run.  Nothing is shared with
the closed-form pipeline beyond the joint-probability tables, so
agreement is evidence, not tautology.

Coincidence logic by configuration:

- one detector per arm: greedy earliest-match pairing within the
  window, each event consumed at most once;
- idler-triggered: each accepted idler opens one gate; the earliest
  unconsumed signal event inside it completes a coincidence;
- pulse-gated: a coincidence is a gate holding at least one accepted
  event on each arm;
- multi-detector layouts: detections within a window form a cluster,
  and the logger picks one signal-idler pairing uniformly among the
  cluster's candidates, which is what produces the pairing-ambiguity
  corrections in the analytic tables.

Ensembles run with independent Philox streams spawned from one seed,
and fixtures compare analytic predictions against the ensemble mean at
three standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .coincidence import (
    ArmParams,
    CorrelationModel,
    WindowParams,
    multiphoton_port_coincidence_rate,
    port_coincidence_rate,
)
from .errors import CapabilityError, ValidationError
from .keyrate import qber, raw_key_rate
from .qkd import model_port_tables, qkd_rate_table
from .source import (
    SourceFitParams,
    build_multiphoton_state,
    multiphoton_projection_table,
    pair_order_rates,
)
from .states import BasisProjector, DIAGONAL, RECTILINEAR, werner_state


@njit(cache=True)
def _dead_time_mask(times, delta):
    n = times.size
    keep = np.zeros(n, dtype=np.bool_)
    last = -np.inf
    for i in range(n):
        if times[i] - last >= delta:
            keep[i] = True
            last = times[i]
    return keep


@njit(cache=True)
def _greedy_pair_count(ts, ti, tau):
    half = tau / 2.0
    i = 0
    j = 0
    count = 0
    while i < ts.size and j < ti.size:
        dt = ts[i] - ti[j]
        if dt > half:
            j += 1
        elif dt < -half:
            i += 1
        else:
            count += 1
            i += 1
            j += 1
    return count


@njit(cache=True)
def _triggered_pair_count(triggers, ts, tau):
    half = tau / 2.0
    j = 0
    count = 0
    for k in range(triggers.size):
        lo = triggers[k] - half
        hi = triggers[k] + half
        while j < ts.size and ts[j] < lo:
            j += 1
        if j < ts.size and ts[j] <= hi:
            count += 1
            j += 1
    return count


@njit(cache=True)
def _pulse_gate_count(n_pulses, period, tau, ts, ti):
    half = tau / 2.0
    j = 0
    k = 0
    count = 0
    for p in range(n_pulses):
        center = (p + 0.5) * period
        lo = center - half
        hi = center + half
        while j < ts.size and ts[j] < lo:
            j += 1
        while k < ti.size and ti[k] < lo:
            k += 1
        if j < ts.size and ts[j] <= hi and k < ti.size and ti[k] <= hi:
            count += 1
    return count


@njit(cache=True)
def _find_root(parent, x):
    r = x
    while parent[r] != r:
        r = parent[r]
    while parent[x] != r:
        nxt = parent[x]
        parent[x] = r
        x = nxt
    return r


@njit(cache=True)
def _cluster_table(ts, port_s, ti, port_i, tau, uniforms):
    half = tau / 2.0
    ns = ts.size
    ni = ti.size
    table = np.zeros((4, 4), dtype=np.int64)
    if ns == 0 or ni == 0:
        return table
    # enumerate candidate edges with a two-pointer sweep
    n_edges = 0
    j0 = 0
    for a in range(ns):
        while j0 < ni and ti[j0] < ts[a] - half:
            j0 += 1
        j = j0
        while j < ni and ti[j] <= ts[a] + half:
            n_edges += 1
            j += 1
    if n_edges == 0:
        return table
    es = np.empty(n_edges, dtype=np.int64)
    ei = np.empty(n_edges, dtype=np.int64)
    idx = 0
    j0 = 0
    for a in range(ns):
        while j0 < ni and ti[j0] < ts[a] - half:
            j0 += 1
        j = j0
        while j < ni and ti[j] <= ts[a] + half:
            es[idx] = a
            ei[idx] = j
            idx += 1
            j += 1
    parent = np.arange(ns + ni)
    for e in range(n_edges):
        ra = _find_root(parent, es[e])
        rb = _find_root(parent, ns + ei[e])
        if ra != rb:
            parent[rb] = ra
    roots = np.empty(n_edges, dtype=np.int64)
    for e in range(n_edges):
        roots[e] = _find_root(parent, es[e])
    order = np.argsort(roots)
    g0 = 0
    u_idx = 0
    while g0 < n_edges:
        g1 = g0
        root = roots[order[g0]]
        while g1 < n_edges and roots[order[g1]] == root:
            g1 += 1
        size = g1 - g0
        pick = g0 + min(int(uniforms[u_idx] * size), size - 1)
        u_idx += 1
        e = order[pick]
        table[port_s[es[e]], port_i[ei[e]]] += 1
        g0 = g1
    return table


def _poisson_times(rng, rate, duration):
    n = rng.poisson(rate * duration)
    return np.sort(rng.uniform(0.0, duration, n))


def _categorical(rng, probs: np.ndarray, n: int) -> np.ndarray:
    edges = np.cumsum(np.asarray(probs, dtype=float))
    if not math.isclose(edges[-1], 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValidationError("categorical probabilities must sum to 1")
    draws = np.searchsorted(edges, rng.random(n), side="right")
    return np.minimum(draws, len(edges) - 1)


def _accepted(times: np.ndarray, dead_time: float) -> np.ndarray:
    if dead_time <= 0 or times.size == 0:
        return times
    return times[_dead_time_mask(times, dead_time)]


def _arm_stream(rng, photon_times, arm: ArmParams, duration) -> np.ndarray:
    noise = _poisson_times(rng, arm.noise_rate, duration)
    merged = np.sort(np.concatenate((photon_times, noise)))
    return _accepted(merged, arm.dead_time)


def simulate_port_pair_run(
    rng,
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    proj_s: BasisProjector,
    proj_i: BasisProjector,
    duration: float,
) -> float:
    """One Monte Carlo estimate of a port-pair coincidence rate (cps).

    Single detector per arm.  The pair's relative timing jitter is
    drawn on the signal side, which fixes the arrival-time difference
    statistics the window actually sees.
    """
    if window.mode == "pulsed":
        period = 1.0 / window.rep_rate
        n_pulses = int(duration * window.rep_rate)
        mean_per_pulse = pair_rate * period
        if mean_per_pulse >= 1.0:
            raise ValidationError("more than one pair per pulse; use the pair-order expansion")
        emitted = rng.random(n_pulses) < mean_per_pulse
        emissions = (np.flatnonzero(emitted) + 0.5) * period
    else:
        emissions = _poisson_times(rng, pair_rate, duration)

    table = model.port_table(proj_s, proj_i).ravel()  # cells: 00, 01, 10, 11
    n = emissions.size
    cells = _categorical(rng, table, n)
    s_pass = cells >= 2
    i_pass = (cells == 1) | (cells == 3)
    s_det = s_pass & (rng.random(n) < signal_arm.efficiency)
    i_det = i_pass & (rng.random(n) < idler_arm.efficiency)

    if window.mode == "pulsed":
        s_times = emissions[s_det] + rng.normal(0.0, window.signal_sigma, int(s_det.sum()))
        i_times = emissions[i_det] + rng.normal(0.0, window.idler_sigma, int(i_det.sum()))
        ts = _arm_stream(rng, np.sort(s_times), signal_arm, duration)
        ti = _arm_stream(rng, np.sort(i_times), idler_arm, duration)
        return _pulse_gate_count(n_pulses, period, window.tau, ts, ti) / duration

    sigma = window.timing_sigma
    s_times = emissions[s_det] + (rng.normal(0.0, sigma, int(s_det.sum())) if sigma > 0 else 0.0)
    i_times = emissions[i_det]
    ts = _arm_stream(rng, np.sort(s_times), signal_arm, duration)
    ti = _arm_stream(rng, np.sort(i_times), idler_arm, duration)
    if window.mode == "idler_triggered":
        return _triggered_pair_count(ti, ts, window.tau) / duration
    return _greedy_pair_count(ts, ti, window.tau) / duration


def _per_detector_accept(times, ports, det_ids, n_det, dead_time):
    """Apply per-detector dead time to a merged, time-sorted stream."""
    if dead_time <= 0 or times.size == 0:
        return times, ports
    keep = np.zeros(times.size, dtype=bool)
    for det in range(n_det):
        sel = det_ids == det
        if np.any(sel):
            keep[sel] = _dead_time_mask(times[sel], dead_time)
    return times[keep], ports[keep]


def simulate_qkd_table_run(
    rng,
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    scheme: str,
    duration: float,
) -> np.ndarray:
    """One Monte Carlo estimate of the 4x4 detector-pair rate table.

    Basis selection is drawn per photon (the switch in the active
    layout, the splitter in the passive one), detection thinning uses
    the full arm efficiency since the split is already the basis draw,
    and per-detector dead time acts on each physical detector's stream.
    Only the free-running window discipline is supported here.
    """
    if window.mode != "cw_postprocess":
        raise CapabilityError("table simulation supports cw_postprocess only")
    if scheme not in ("active", "passive"):
        raise ValidationError(f"unknown scheme {scheme!r}")
    p11, _, _ = model_port_tables(model)

    emissions = _poisson_times(rng, pair_rate, duration)
    n = emissions.size
    basis_s = rng.integers(0, 2, n)
    basis_i = rng.integers(0, 2, n)
    # conditional outcome table given the basis pair: each 2x2 block of
    # the joint port table is a complete measurement and sums to one
    ports_s = np.empty(n, dtype=np.int64)
    ports_i = np.empty(n, dtype=np.int64)
    for bs in range(2):
        for bi in range(2):
            sel = (basis_s == bs) & (basis_i == bi)
            count = int(sel.sum())
            if count == 0:
                continue
            block = p11[2 * bs : 2 * bs + 2, 2 * bi : 2 * bi + 2].ravel()
            outcome = _categorical(rng, block / block.sum(), count)
            ports_s[sel] = 2 * bs + outcome // 2
            ports_i[sel] = 2 * bi + outcome % 2

    s_det = rng.random(n) < signal_arm.efficiency
    i_det = rng.random(n) < idler_arm.efficiency
    sigma = window.timing_sigma
    s_times = emissions[s_det] + (rng.normal(0.0, sigma, int(s_det.sum())) if sigma > 0 else 0.0)
    s_ports = ports_s[s_det]
    i_times = emissions[i_det]
    i_ports = ports_i[i_det]

    def side_stream(times, ports, arm):
        # noise: the passive splitter halves the per-port background;
        # an active noise count lands on a physical detector and takes
        # the port of whichever basis is in force at that instant
        chunks_t = [times]
        chunks_p = [ports]
        if scheme == "passive":
            for port in range(4):
                t = _poisson_times(rng, arm.noise_rate / 2.0, duration)
                chunks_t.append(t)
                chunks_p.append(np.full(t.size, port, dtype=np.int64))
        else:
            for det in range(2):
                t = _poisson_times(rng, arm.noise_rate, duration)
                chunks_t.append(t)
                chunks_p.append(2 * rng.integers(0, 2, t.size) + det)
        all_t = np.concatenate(chunks_t)
        all_p = np.concatenate(chunks_p)
        order = np.argsort(all_t, kind="stable")
        all_t = all_t[order]
        all_p = all_p[order]
        if scheme == "passive":
            return _per_detector_accept(all_t, all_p, all_p, 4, arm.dead_time)
        return _per_detector_accept(all_t, all_p, all_p % 2, 2, arm.dead_time)

    ts, ps = side_stream(s_times, s_ports, signal_arm)
    ti, pi = side_stream(i_times, i_ports, idler_arm)
    uniforms = rng.random(max(ts.size + ti.size, 1))
    counts = _cluster_table(ts, ps, ti, pi, window.tau, uniforms)
    return counts / duration


def simulate_multiphoton_port_pair_run(
    rng,
    pair_rate: float,
    mu: float,
    params: SourceFitParams,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    proj_s: BasisProjector,
    proj_i: BasisProjector,
    n_max: int,
    duration: float,
) -> float:
    """One Monte Carlo estimate of a port-pair rate with multi-pair events.

    Each emission carries its pair order; the number of photons passing
    each analyzer is drawn from the joint pass-count table, and a
    detector clicks once if any of its simultaneous photons is
    detected.  Free-running window only.
    """
    if window.mode != "cw_postprocess":
        raise CapabilityError("multiphoton simulation supports cw_postprocess only")
    rates = pair_order_rates(pair_rate, mu, n_max)
    s_chunks = []
    i_chunks = []
    for order, rate in enumerate(rates, start=1):
        emissions = _poisson_times(rng, rate, duration)
        n = emissions.size
        if n == 0:
            continue
        state = build_multiphoton_state(params, order, n_cap=n_max)
        joint = multiphoton_projection_table(state, proj_s, proj_i)
        cells = _categorical(rng, joint.ravel() / joint.sum(), n)
        a_pass = cells // (order + 1)
        b_pass = cells % (order + 1)
        s_click = rng.random(n) < 1.0 - (1.0 - signal_arm.efficiency) ** a_pass
        i_click = rng.random(n) < 1.0 - (1.0 - idler_arm.efficiency) ** b_pass
        sigma = window.timing_sigma
        jitter = rng.normal(0.0, sigma, int(s_click.sum())) if sigma > 0 else 0.0
        s_chunks.append(emissions[s_click] + jitter)
        i_chunks.append(emissions[i_click])
    s_times = np.sort(np.concatenate(s_chunks)) if s_chunks else np.empty(0)
    i_times = np.sort(np.concatenate(i_chunks)) if i_chunks else np.empty(0)
    ts = _arm_stream(rng, s_times, signal_arm, duration)
    ti = _arm_stream(rng, i_times, idler_arm, duration)
    return _greedy_pair_count(ts, ti, window.tau) / duration


def simulate_visibility_run(
    rng,
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    basis_angle: float,
    duration: float,
) -> float:
    """One Monte Carlo estimate of the signed visibility in one basis."""
    rngs = rng.spawn(4)
    rates = np.empty((2, 2))
    for k, (a, b) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        rates[a, b] = simulate_port_pair_run(
            rngs[k],
            pair_rate,
            model,
            signal_arm,
            idler_arm,
            window,
            BasisProjector(basis_angle, a),
            BasisProjector(basis_angle, b),
            duration,
        )
    total = rates.sum()
    if total <= 0:
        raise ValidationError("no coincidences recorded; visibility undefined")
    return (rates[0, 0] + rates[1, 1] - rates[0, 1] - rates[1, 0]) / total


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble mean and standard error of a Monte Carlo statistic."""

    mean: np.ndarray
    stderr: np.ndarray
    n_runs: int


def run_ensemble(run_fn: Callable, n_runs: int = 30, seed: int = 0) -> EnsembleResult:
    """Run `run_fn(rng)` over independent Philox streams.

    The per-run statistic may be a scalar or an array; the standard
    error is the sample standard deviation over runs divided by
    sqrt(n_runs), elementwise.
    """
    if n_runs < 2:
        raise ValidationError("need at least two runs for a standard error")
    children = np.random.SeedSequence(seed).spawn(n_runs)
    values = np.array(
        [np.asarray(run_fn(np.random.Generator(np.random.Philox(child)))) for child in children],
        dtype=float,
    )
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(n_runs)
    return EnsembleResult(mean=mean, stderr=stderr, n_runs=n_runs)


@dataclass(frozen=True)
class ValidationFixture:
    """One analytic-vs-simulation comparison at fixed parameters."""

    name: str
    labels: tuple[str, ...]
    expected: np.ndarray
    run: Callable
    duration: float


@dataclass(frozen=True)
class FixtureOutcome:
    name: str
    labels: tuple[str, ...]
    expected: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    z_scores: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.z_scores) <= 3.0))


def _table_stats(table: np.ndarray) -> np.ndarray:
    table = np.asarray(table, dtype=float)
    rect = table[:2, :2]
    diag = table[2:, 2:]
    errors = rect[0, 1] + rect[1, 0] + diag[0, 1] + diag[1, 0]
    return np.array([table.sum(), errors, rect.sum()])


def _port_pair_fixture(
    name, pair_rate, model, signal_arm, idler_arm, window, proj_s, proj_i, duration
) -> ValidationFixture:
    expected = port_coincidence_rate(
        pair_rate, model, signal_arm, idler_arm, window, proj_s, proj_i
    ).total

    def run(rng):
        return simulate_port_pair_run(
            rng, pair_rate, model, signal_arm, idler_arm, window, proj_s, proj_i, duration
        )

    return ValidationFixture(
        name=name,
        labels=("rate",),
        expected=np.atleast_1d(expected),
        run=run,
        duration=duration,
    )


def _table_fixture(
    name, pair_rate, model, signal_arm, idler_arm, window, scheme, duration
) -> ValidationFixture:
    expected = _table_stats(
        qkd_rate_table(pair_rate, model, signal_arm, idler_arm, window, scheme)
    )

    def run(rng):
        return _table_stats(
            simulate_qkd_table_run(
                rng, pair_rate, model, signal_arm, idler_arm, window, scheme, duration
            )
        )

    return ValidationFixture(
        name=name,
        labels=("total", "errors", "rect_block"),
        expected=expected,
        run=run,
        duration=duration,
    )


def validation_fixtures() -> tuple[ValidationFixture, ...]:
    """The canonical analytic-vs-simulation comparison suite.

    Parameters sit in a lab-like regime chosen so every modeled effect
    (accidentals, dead time, jitter, gating, multi-pair emissions,
    pairing arbitration) moves the compared statistic by well over the
    ensemble resolution.
    """
    scalar = CorrelationModel.from_visibility(0.95)
    state = CorrelationModel.from_state(werner_state(0.85))
    lopsided = 0.7 * werner_state(0.9) + 0.3 * np.diag([1.0, 0.0, 0.0, 0.0])
    asym = CorrelationModel.from_state(lopsided)

    rect0 = BasisProjector(RECTILINEAR, 0)
    rect1 = BasisProjector(RECTILINEAR, 1)
    diag0 = BasisProjector(DIAGONAL, 0)

    clean_s = ArmParams(efficiency=0.4)
    clean_i = ArmParams(efficiency=0.3)
    noisy_s = ArmParams(efficiency=0.4, noise_rate=2e4)
    noisy_i = ArmParams(efficiency=0.3, noise_rate=5e3)
    dt_s = ArmParams(efficiency=0.4, dead_time=2e-6)
    dt_both_s = ArmParams(efficiency=0.4, noise_rate=1e4, dead_time=2e-6)
    dt_both_i = ArmParams(efficiency=0.3, noise_rate=5e3, dead_time=1.5e-6)

    cw = WindowParams(tau=4e-7)
    cw_jitter = WindowParams(tau=4e-7, timing_sigma=1e-7)
    trig = WindowParams(tau=4e-7, mode="idler_triggered")
    trig_jitter = WindowParams(tau=4e-7, mode="idler_triggered", timing_sigma=1.2e-7)
    pulsed = WindowParams(
        tau=1e-7, mode="pulsed", signal_sigma=2e-8, idler_sigma=1.5e-8, rep_rate=1e6
    )

    n_mid = 2e5
    fixtures = [
        _port_pair_fixture("cw_correlated", n_mid, scalar, clean_s, clean_i, cw, rect0, rect0, 0.5),
        _port_pair_fixture(
            "cw_uncorrelated_port", n_mid, scalar, clean_s, clean_i, cw, rect0, rect1, 2.0
        ),
        _port_pair_fixture(
            "cw_cross_basis", n_mid, scalar, clean_s, clean_i, cw, rect0, diag0, 1.0
        ),
        _port_pair_fixture(
            "cw_noise_both", n_mid, scalar, noisy_s, noisy_i, cw, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "cw_dead_time_signal", n_mid, scalar, dt_s, clean_i, cw, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "cw_dead_time_both_noisy", n_mid, scalar, dt_both_s, dt_both_i, cw, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "cw_timing_jitter", n_mid, scalar, clean_s, clean_i, cw_jitter, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "cw_state_model", n_mid, state, clean_s, clean_i, cw, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "cw_lopsided_state", n_mid, asym, clean_s, clean_i, cw, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "triggered_clean", n_mid, scalar, clean_s, clean_i, trig, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "triggered_noise_jitter", n_mid, scalar, noisy_s, noisy_i, trig_jitter, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "pulsed_clean", n_mid, scalar, clean_s, clean_i, pulsed, rect0, rect0, 0.5
        ),
        _port_pair_fixture(
            "pulsed_noisy", n_mid, scalar, noisy_s, noisy_i, pulsed, rect0, rect0, 0.5
        ),
    ]

    fit = SourceFitParams(p_c1_sq=0.5, rel_phase=math.pi)
    mp_s = ArmParams(efficiency=0.4)
    mp_i = ArmParams(efficiency=0.3)
    for name, mu, arm_i in (
        ("multiphoton_dim", 0.05, mp_i),
        ("multiphoton_bright_noisy", 0.15, ArmParams(efficiency=0.3, noise_rate=1e4)),
    ):
        mu_val = mu
        arm_i_val = arm_i
        expected = multiphoton_port_coincidence_rate(
            1e5, mu_val, fit, mp_s, arm_i_val, cw, rect0, rect0, n_max=2
        ).total

        def run(rng, _mu=mu_val, _arm_i=arm_i_val):
            return simulate_multiphoton_port_pair_run(
                rng, 1e5, _mu, fit, mp_s, _arm_i, cw, rect0, rect0, 2, 0.5
            )

        fixtures.append(
            ValidationFixture(
                name=name,
                labels=("rate",),
                expected=np.atleast_1d(expected),
                run=run,
                duration=0.5,
            )
        )

    from .coincidence import measured_visibility

    vis_expected = measured_visibility(n_mid, scalar, noisy_s, clean_i, cw, RECTILINEAR)

    def vis_run(rng):
        return simulate_visibility_run(rng, n_mid, scalar, noisy_s, clean_i, cw, RECTILINEAR, 1.0)

    fixtures.append(
        ValidationFixture(
            name="visibility_cw_noisy",
            labels=("visibility",),
            expected=np.atleast_1d(vis_expected),
            run=vis_run,
            duration=1.0,
        )
    )

    qkd_window = WindowParams(tau=3e-7)
    fixtures.extend(
        [
            _table_fixture("active_clean", n_mid, scalar, clean_s, clean_i, qkd_window, "active", 0.5),
            _table_fixture(
                "active_noise_dead_time",
                n_mid,
                scalar,
                dt_both_s,
                dt_both_i,
                qkd_window,
                "active",
                0.5,
            ),
            _table_fixture("passive_clean", n_mid, scalar, clean_s, clean_i, qkd_window, "passive", 0.5),
            _table_fixture(
                "passive_noise_dead_time",
                n_mid,
                scalar,
                dt_both_s,
                dt_both_i,
                qkd_window,
                "passive",
                0.5,
            ),
            _table_fixture(
                "passive_state_jitter",
                n_mid,
                state,
                clean_s,
                clean_i,
                WindowParams(tau=3e-7, timing_sigma=8e-8),
                "passive",
                0.5,
            ),
        ]
    )
    return tuple(fixtures)


def run_validation(
    n_runs: int = 30,
    base_seed: int = 20240,
    subset: Sequence[str] | None = None,
) -> list[FixtureOutcome]:
    """Run the comparison suite and score each fixture at 3 sigma."""
    outcomes = []
    for idx, fixture in enumerate(validation_fixtures()):
        if subset is not None and fixture.name not in subset:
            continue
        result = run_ensemble(fixture.run, n_runs=n_runs, seed=base_seed + idx)
        stderr = np.where(result.stderr > 0, result.stderr, np.inf)
        z = (result.mean - fixture.expected) / stderr
        outcomes.append(
            FixtureOutcome(
                name=fixture.name,
                labels=fixture.labels,
                expected=np.atleast_1d(fixture.expected),
                mean=np.atleast_1d(result.mean),
                stderr=np.atleast_1d(result.stderr),
                z_scores=np.atleast_1d(z),
            )
        )
    return outcomes
