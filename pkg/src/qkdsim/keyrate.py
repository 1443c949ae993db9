"""Key-rate figures of merit derived from a detector-pair rate table.

Conventions: the raw rate is every logged coincidence across the 4x4
detector-pair table; sifting keeps matched-basis events (half of them
in expectation, hence the factor 1/2 in the distilled rate); an error
is a matched-basis coincidence whose outcomes differ, the convention
for positively correlated pairs.  The distilled-key overhead lumps
error correction and privacy amplification into a single multiplier on
the binary entropy of the error rate, calibrated for the symmetric
two-basis protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .coincidence import snr_visibility_approximation
from .errors import NumericError, ValidationError

KEY_OVERHEAD_FACTOR = 2.1
CHSH_VISIBILITY_FLOOR = 1.0 / math.sqrt(2.0)
INCOHERENT_ATTACK_VISIBILITY_FLOOR = 5.0 / 7.0

_MATCHED = np.zeros((4, 4), dtype=bool)
_MATCHED[:2, :2] = True
_MATCHED[2:, 2:] = True
_ERRORS = _MATCHED & ~np.eye(4, dtype=bool)


def binary_entropy(p):
    """Shannon entropy of a binary variable, in bits; 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValidationError("probability must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
    out = np.where((p == 0) | (p == 1), 0.0, out)
    return float(out) if out.ndim == 0 else out


def raw_key_rate(table):
    """Total logged coincidence rate over all detector pairs."""
    table = np.asarray(table, dtype=float)
    out = table.sum(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def basis_qber(table, undefined: float | None = None):
    """Per-basis error rates of the sifted events.

    Returns ``(rect, diag)``, each the errored fraction of that basis
    block's coincidences.  Where a block's rate vanishes the error rate
    is undefined; by default that raises, but a grid scan can supply
    `undefined` as a fill value (0.5 marks such points as worthless
    without poisoning the rest of the array).
    """
    table = np.asarray(table, dtype=float)
    out = []
    for lo in (0, 2):
        block = table[..., lo : lo + 2, lo : lo + 2]
        total = block.sum(axis=(-2, -1))
        errors = block[..., 0, 1] + block[..., 1, 0]
        bad = total <= 0
        if np.any(bad):
            if undefined is None:
                raise NumericError("no matched-basis coincidences; error rate undefined")
            total = np.where(bad, 1.0, total)
            errors = np.where(bad, undefined, errors)
        q = errors / total
        out.append(float(q) if q.ndim == 0 else q)
    return tuple(out)


def qber(table, undefined: float | None = None):
    """Mean of the two per-basis error rates."""
    rect, diag = basis_qber(table, undefined)
    out = 0.5 * (np.asarray(rect) + np.asarray(diag))
    return float(out) if out.ndim == 0 else out


def qber_from_visibility(v):
    """Error rate implied by a coincidence visibility, (1 - V) / 2."""
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) > 1):
        raise ValidationError("visibility must lie in [-1, 1]")
    out = (1.0 - v) / 2.0
    return float(out) if out.ndim == 0 else out


def visibility_from_qber(q):
    """Inverse of :func:`qber_from_visibility`."""
    q = np.asarray(q, dtype=float)
    out = 1.0 - 2.0 * q
    return float(out) if out.ndim == 0 else out


def secret_key_rate_value(raw_rate, qber_value, overhead: float = KEY_OVERHEAD_FACTOR):
    """Distilled-key rate, possibly negative past the error threshold.

    The signed value is what an optimizer compares; use
    :func:`secret_key_rate` for the user-facing quantity.
    """
    raw_rate = np.asarray(raw_rate, dtype=float)
    out = 0.5 * raw_rate * (1.0 - overhead * binary_entropy(qber_value))
    return float(out) if out.ndim == 0 else out


def secret_key_rate(raw_rate, qber_value, overhead: float = KEY_OVERHEAD_FACTOR):
    """Distilled secret-key rate, or None when no key is extractable."""
    value = secret_key_rate_value(raw_rate, qber_value, overhead)
    if np.ndim(value) == 0:
        return value if value > 0 else None
    raise ValidationError("secret_key_rate is scalar; use secret_key_rate_value for arrays")


def qber_threshold(overhead: float = KEY_OVERHEAD_FACTOR) -> float:
    """Error rate at which the distilled-key rate reaches zero."""
    if overhead <= 1:
        raise ValidationError("overhead must exceed 1 for a finite threshold")
    return brentq(lambda q: 1.0 - overhead * binary_entropy(q), 1e-12, 0.5 - 1e-12, xtol=1e-14)


def visibility_threshold(overhead: float = KEY_OVERHEAD_FACTOR) -> float:
    """Visibility at which the distilled-key rate reaches zero."""
    return visibility_from_qber(qber_threshold(overhead))


@dataclass(frozen=True)
class QkdMetrics:
    """Summary figures for one operating point.

    `skr` is None when the error rate is past the distillation
    threshold and no key is extractable.  `snr_d_db` is the detected
    signal-to-noise ratio of the uplink arm when the caller knows it,
    otherwise nan.
    """

    raw_rate: float
    qber_rect: float
    qber_diag: float
    qber_avg: float
    apv: float
    snr_d_db: float
    skr: float | None

    @property
    def skr_extractable(self) -> bool:
        return self.skr is not None

    def to_dict(self) -> dict:
        """Flat JSON-ready mapping; non-finite SNR serializes as null."""
        return {
            "raw_rate_cps": self.raw_rate,
            "qber_rect": self.qber_rect,
            "qber_diag": self.qber_diag,
            "qber_avg": self.qber_avg,
            "apv": self.apv,
            "snr_d_db": self.snr_d_db if math.isfinite(self.snr_d_db) else None,
            "skr_cps": self.skr,
            "skr_extractable": self.skr_extractable,
        }


def metrics_from_table(
    table,
    snr_d_db: float = math.nan,
    overhead: float = KEY_OVERHEAD_FACTOR,
) -> QkdMetrics:
    """Evaluate all figures of merit from one detector-pair rate table."""
    raw = raw_key_rate(table)
    rect, diag = basis_qber(table)
    avg = 0.5 * (rect + diag)
    apv = 0.5 * (visibility_from_qber(rect) + visibility_from_qber(diag))
    return QkdMetrics(
        raw_rate=raw,
        qber_rect=rect,
        qber_diag=diag,
        qber_avg=avg,
        apv=apv,
        snr_d_db=snr_d_db,
        skr=secret_key_rate(raw, avg, overhead),
    )


def threshold_snr_db(
    v0: float,
    pair_rate: float,
    tau: float,
    eta_i: float,
    eta_s: float,
    eta_tau: float = 1.0,
    floor: float = CHSH_VISIBILITY_FLOOR,
) -> float | None:
    """Detected SNR (dB) at which the measured visibility hits a floor.

    Uses the leading-order visibility/SNR relation of the uplink
    regime, so the answer depends on the pair rate only through the
    product with the coincidence window.  Returns None when the floor
    is never crossed inside the search bracket (the link either cannot
    reach it at any noise level, or sits above it even without signal).
    """

    def gap(log_snr):
        return (
            snr_visibility_approximation(v0, 10.0**log_snr, pair_rate, tau, eta_i, eta_s, eta_tau)
            - floor
        )

    lo, hi = -6.0, 12.0
    if gap(hi) <= 0 or gap(lo) >= 0:
        return None
    log_snr = brentq(gap, lo, hi, xtol=1e-12)
    return 10.0 * log_snr
