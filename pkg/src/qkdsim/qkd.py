"""Detector-pair rate tables for the two key-generation receiver layouts.

Both layouts analyze in the rectilinear and diagonal bases on each arm
and log coincidences between every signal detector and every idler
detector, a 4x4 table of rates indexed by analyzer port:

======  ==================
index   port
======  ==================
0       rectilinear, outcome 0
1       rectilinear, outcome 1
2       diagonal, outcome 0
3       diagonal, outcome 1
======  ==================

``active``
    One analyzer per arm whose basis is switched randomly, two
    detectors behind it.  Each basis pair occurs a quarter of the time.
``passive``
    A 50/50 splitter feeds both analyzers at once, four detectors per
    arm, so every detector pair is live continuously at half the
    photon flux and half the background per detector.

Beyond true and accidental coincidences, the tables include the
corrections from windows containing more than two detections, where
the logger must pick one pairing among the candidates: extra singles
dilute a true pair across the window's candidate pairings, and two
true pairs in one window redistribute among four.  The correction
terms are first order in (window x rate) and can drive a predicted
rate negative far outside the model's validity; such entries are
floored at zero with a warning.

All numeric inputs broadcast, so a parameter scan evaluates the whole
table on arrays in one pass.
"""

from __future__ import annotations

import warnings

import numpy as np

from .coincidence import ArmParams, CorrelationModel, WindowParams
from .errors import ValidationError
from .states import BasisProjector, DIAGONAL, RECTILINEAR

PORT_ANGLES = (RECTILINEAR, RECTILINEAR, DIAGONAL, DIAGONAL)
PORT_OUTCOMES = (0, 1, 0, 1)
PORT_LABELS = ("rect0", "rect1", "diag0", "diag1")
SCHEMES = ("active", "passive")


def analyzer_ports() -> tuple[BasisProjector, ...]:
    """The four analyzer ports, in table order."""
    return tuple(
        BasisProjector(angle, outcome) for angle, outcome in zip(PORT_ANGLES, PORT_OUTCOMES)
    )


def model_port_tables(model: CorrelationModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Joint pass probabilities and marginals over the port grid.

    Returns the 4x4 joint table `p11[x, y]` and the per-port marginals
    for each arm.
    """
    ports = analyzer_ports()
    p11 = np.empty((4, 4))
    for x, ps in enumerate(ports):
        for y, pi in enumerate(ports):
            p11[x, y] = model.joint_probability(ps, pi)
    marg_s = np.array([model.signal_marginal_probability(p) for p in ports])
    marg_i = np.array([model.idler_marginal_probability(p) for p in ports])
    return p11, marg_s, marg_i


def _window_arrays(window: WindowParams):
    tau = np.asarray(window.tau, dtype=float)
    return (
        tau,
        np.asarray(window.pair_acceptance(), dtype=float),
        np.asarray(window.signal_gate_acceptance(), dtype=float),
        np.asarray(window.idler_gate_acceptance(), dtype=float),
    )


def _cluster_block(ct, acc, tau, corr_s, corr_i):
    """Assemble one block of simultaneously live detectors.

    `ct` has shape (..., m, n); `corr_*` are the per-detector singles
    entering the pairing-ambiguity corrections (noise only in pulsed
    mode, where stray photons in a gate are a multi-pair effect).
    """
    row = ct.sum(axis=-1, keepdims=True)
    col = ct.sum(axis=-2, keepdims=True)
    tot = ct.sum(axis=(-2, -1), keepdims=True)
    cs = corr_s[..., :, None]
    ci = corr_i[..., None, :]
    other_cs = corr_s.sum(axis=-1)[..., None, None] - cs
    other_ci = corr_i.sum(axis=-1)[..., None, None] - ci
    lin = 0.5 * tau[..., None, None] * (
        (row - ct) * ci + (col - ct) * cs - ct * (other_cs + other_ci)
    )
    quad = 0.25 * tau[..., None, None] * (
        (row - ct) * (col - ct) - 3.0 * ct * (tot - row - col + ct)
    )
    return ct + acc + lin + quad


_floored_entries = 0


def floored_rate_count() -> int:
    """Table entries floored at zero since import, for diagnostics."""
    return _floored_entries


def _floor_rates(rates: np.ndarray) -> np.ndarray:
    global _floored_entries
    negative = int(np.count_nonzero(rates < 0))
    if negative:
        _floored_entries += negative
        warnings.warn(
            "pairing corrections drove a predicted rate negative; flooring at "
            "zero (operating point is outside the perturbative regime)",
            stacklevel=3,
        )
        rates = np.maximum(rates, 0.0)
    return rates


def passive_rate_table(
    pair_rate,
    p11: np.ndarray,
    marg_s: np.ndarray,
    marg_i: np.ndarray,
    eta_s,
    noise_s,
    dead_s,
    eta_i,
    noise_i,
    dead_i,
    window: WindowParams,
) -> np.ndarray:
    """Detector-pair rates for the passive (beam-splitter) receiver pair.

    `eta_*` and `noise_*` are the full-arm efficiency and per-port
    noise before the 50/50 split; the split halves both per detector.
    Scalar or broadcastable arrays; the result gains a trailing (4, 4).
    """
    pair_rate = np.asarray(pair_rate, dtype=float)
    tau, w_pair, gate_s, gate_i = _window_arrays(window)
    eta_det_s = np.asarray(eta_s, dtype=float)[..., None] / 2.0
    eta_det_i = np.asarray(eta_i, dtype=float)[..., None] / 2.0
    noise_det_s = np.asarray(noise_s, dtype=float)[..., None] / 2.0
    noise_det_i = np.asarray(noise_i, dtype=float)[..., None] / 2.0

    load_s = pair_rate[..., None] * marg_s * eta_det_s + noise_det_s
    load_i = pair_rate[..., None] * marg_i * eta_det_i + noise_det_i
    df_s = 1.0 / (1.0 + load_s * np.asarray(dead_s, dtype=float)[..., None])
    df_i = 1.0 / (1.0 + load_i * np.asarray(dead_i, dtype=float)[..., None])

    eff_s = eta_det_s * df_s * gate_s[..., None]
    eff_i = eta_det_i * df_i * gate_i[..., None]
    det_noise_s = noise_det_s * df_s
    det_noise_i = noise_det_i * df_i

    pd_s = (marg_s * eff_s).sum(axis=-1)
    pd_i = (marg_i * eff_i).sum(axis=-1)

    ct = (
        pair_rate[..., None, None]
        * p11
        * eff_s[..., :, None]
        * eff_i[..., None, :]
        * w_pair[..., None, None]
    )
    photon_s = pair_rate[..., None] * marg_s * eff_s * (1.0 - pd_i[..., None])
    photon_i = pair_rate[..., None] * marg_i * eff_i * (1.0 - pd_s[..., None])

    acc = _accidental_block(window, tau, photon_s, det_noise_s, photon_i, det_noise_i)
    if window.mode == "pulsed_gated":
        corr_s, corr_i = det_noise_s, det_noise_i
    else:
        corr_s, corr_i = photon_s + det_noise_s, photon_i + det_noise_i
    rates = _cluster_block(ct, acc, tau, corr_s, corr_i)
    return _floor_rates(rates)


def _accidental_block(window, tau, photon_s, noise_s, photon_i, noise_i):
    ps = photon_s[..., :, None]
    pi = photon_i[..., None, :]
    ns = noise_s[..., :, None]
    ni = noise_i[..., None, :]
    t = tau[..., None, None]
    if window.mode == "pulsed_gated":
        duty = t * window.rep_rate
        return t * (ps * ni + ns * pi + ns * ni * duty)
    return t * (ps + ns) * (pi + ni)


def active_rate_table(
    pair_rate,
    p11: np.ndarray,
    marg_s: np.ndarray,
    marg_i: np.ndarray,
    eta_s,
    noise_s,
    dead_s,
    eta_i,
    noise_i,
    dead_i,
    window: WindowParams,
) -> np.ndarray:
    """Detector-pair rates for the actively switched receiver pair.

    Each arm has two detectors behind one switched analyzer; a given
    basis pair is live a quarter of the time, which scales every entry.
    Detector loads average over the basis choice, so dead time is a
    property of the detector, not of the basis.
    """
    pair_rate = np.asarray(pair_rate, dtype=float)
    tau, w_pair, gate_s, gate_i = _window_arrays(window)
    eta_s = np.asarray(eta_s, dtype=float)
    eta_i = np.asarray(eta_i, dtype=float)
    noise_s = np.asarray(noise_s, dtype=float)
    noise_i = np.asarray(noise_i, dtype=float)

    # marg[basis, detector]: port k maps to basis k // 2, detector k % 2
    marg_s_b = marg_s.reshape(2, 2)
    marg_i_b = marg_i.reshape(2, 2)
    load_s = pair_rate[..., None] * eta_s[..., None] * marg_s_b.mean(axis=0) + noise_s[..., None]
    load_i = pair_rate[..., None] * eta_i[..., None] * marg_i_b.mean(axis=0) + noise_i[..., None]
    df_s = 1.0 / (1.0 + load_s * np.asarray(dead_s, dtype=float)[..., None])
    df_i = 1.0 / (1.0 + load_i * np.asarray(dead_i, dtype=float)[..., None])
    eff_s = eta_s[..., None] * df_s * gate_s[..., None]  # per detector (2,)
    eff_i = eta_i[..., None] * df_i * gate_i[..., None]
    det_noise_s = noise_s[..., None] * df_s
    det_noise_i = noise_i[..., None] * df_i

    shape = np.broadcast_shapes(
        pair_rate.shape, tau.shape, eff_s.shape[:-1], eff_i.shape[:-1]
    )
    out = np.empty(shape + (4, 4))
    for bs in range(2):
        pd_s = (marg_s_b[bs] * eff_s).sum(axis=-1)
        for bi in range(2):
            pd_i = (marg_i_b[bi] * eff_i).sum(axis=-1)
            block_p11 = p11[2 * bs : 2 * bs + 2, 2 * bi : 2 * bi + 2]
            ct = (
                pair_rate[..., None, None]
                * block_p11
                * eff_s[..., :, None]
                * eff_i[..., None, :]
                * w_pair[..., None, None]
            )
            photon_s = pair_rate[..., None] * marg_s_b[bs] * eff_s * (1.0 - pd_i[..., None])
            photon_i = pair_rate[..., None] * marg_i_b[bi] * eff_i * (1.0 - pd_s[..., None])
            acc = _accidental_block(window, tau, photon_s, det_noise_s, photon_i, det_noise_i)
            if window.mode == "pulsed_gated":
                corr_s, corr_i = det_noise_s, det_noise_i
            else:
                corr_s, corr_i = photon_s + det_noise_s, photon_i + det_noise_i
            block = _cluster_block(ct, acc, tau, corr_s, corr_i)
            out[..., 2 * bs : 2 * bs + 2, 2 * bi : 2 * bi + 2] = 0.25 * np.broadcast_to(
                block, shape + (2, 2)
            )
    return _floor_rates(out)


def qkd_rate_table(
    pair_rate: float,
    model: CorrelationModel,
    signal_arm: ArmParams,
    idler_arm: ArmParams,
    window: WindowParams,
    scheme: str = "passive",
) -> np.ndarray:
    """4x4 detector-pair rate table for the chosen receiver layout."""
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if pair_rate < 0:
        raise ValidationError("pair rate must be >= 0")
    p11, marg_s, marg_i = model_port_tables(model)
    table_fn = passive_rate_table if scheme == "passive" else active_rate_table
    return table_fn(
        pair_rate,
        p11,
        marg_s,
        marg_i,
        signal_arm.efficiency,
        signal_arm.noise_rate,
        signal_arm.dead_time,
        idler_arm.efficiency,
        idler_arm.noise_rate,
        idler_arm.dead_time,
        window,
    )
