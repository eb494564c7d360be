"""Entropy of uniformly quantized transform coefficients under a Cauchy model.

The residual bits of an intra-coded frame track the entropy of its
quantized DCT coefficients, and a zero-mean Cauchy distribution describes
those coefficients well.  Every quantizer bin then has closed-form mass:

    p(n) = arctan(scale*q / (scale^2 + (n^2 - 0.25) q^2)) / pi      |n| >= 1
    p(0) = (2/pi) * arctan(q / (2*scale))                           deadzone

so the entropy H(q) = -sum p*log2(p) can be evaluated for any step size q,
and a scaled H makes a serviceable synthetic rate curve.  QP and step size
convert via qp = 6*log2(q) + 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import RQPCurve, RQPSample

# Adaptive truncation: stop at the first bin whose -p*log2(p) falls below
# the floor; never sum past the cap.
CONTRIBUTION_FLOOR = 1e-12
MAX_TRUNCATION = 100_000

# Bins whose mass underflows below this are treated as empty (0*log 0 == 0).
_P_FLOOR = 1e-300

_EXPLICIT_CHUNK = 1 << 20


@dataclass(frozen=True)
class CauchyParams:
    """Zero-mean Cauchy coefficient model with a symmetric uniform quantizer.

    scale: Cauchy scale parameter; larger means heavier tails, i.e. more
        high-frequency content surviving the transform.
    truncation_n: explicit number of bin pairs to sum, or None to extend
        adaptively until a bin contributes less than CONTRIBUTION_FLOOR
        (capped at MAX_TRUNCATION).
    include_zero_bin: count the deadzone bin around zero so the bin masses
        form a complete probability distribution.  Disable for the strict
        two-sided sum that omits it.
    """

    scale: float
    truncation_n: int | None = None
    include_zero_bin: bool = True

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if self.truncation_n is not None and self.truncation_n < 1:
            raise ValueError(f"truncation_n must be >= 1, got {self.truncation_n}")


def _check_qstep(q: float) -> None:
    if not (q > 0 and math.isfinite(q)):
        raise ValueError(f"quantization step must be positive and finite, got {q}")


def _side_bin_mass(scale: float, q: float, n):
    n2 = np.square(np.asarray(n, dtype=float))
    # An overflowing denominator is fine: the ratio underflows to 0 mass.
    with np.errstate(over="ignore", divide="ignore"):
        return np.arctan(scale * q / (scale * scale + (n2 - 0.25) * q * q)) / math.pi


def _zero_bin_mass(scale: float, q: float) -> float:
    return 2.0 / math.pi * math.atan(q / (2.0 * scale))


def bin_probability(params: CauchyParams, q: float, n) -> float | np.ndarray:
    """Probability mass of quantizer bin `n` at step size `q`.

    Symmetric in n.  Accepts a scalar or an integer array; n = 0 addresses
    the deadzone bin and is only valid when the params include it.
    """
    _check_qstep(q)
    n_arr = np.asarray(n)
    if not params.include_zero_bin and np.any(n_arr == 0):
        raise ValueError("bin n=0 requires include_zero_bin")
    p = _side_bin_mass(params.scale, q, n_arr)
    if np.any(n_arr == 0):
        p = np.where(n_arr == 0, _zero_bin_mass(params.scale, q), p)
    return float(p) if np.isscalar(n) or n_arr.ndim == 0 else p


def _plogp(p: np.ndarray) -> np.ndarray:
    """Elementwise -p*log2(p), zero where the mass underflowed."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.zeros_like(p)
    ok = p >= _P_FLOOR
    out[ok] = -p[ok] * np.log2(p[ok])
    return out


def _plogp_scalar(p: float) -> float:
    return 0.0 if p < _P_FLOOR else -p * math.log2(p)


def _scan_side_bins(params: CauchyParams, q: float) -> tuple[int, float, float]:
    """One pass over the side bins: (kept bin pairs, sum of -p*log2 p, sum of p).

    With an explicit truncation everything up to it is summed; otherwise
    bins accumulate until the first one contributing less than the floor.
    Side-bin contributions decrease in n (every side bin has mass below
    1/e), so that cut keeps exactly the adaptive rule's terms.
    """
    adaptive = params.truncation_n is None
    limit = MAX_TRUNCATION if adaptive else params.truncation_n
    plogp_sum = 0.0
    mass_sum = 0.0
    start, width = 1, 2048
    while start <= limit:
        stop = min(start + width - 1, limit)
        n = np.arange(start, stop + 1, dtype=float)
        p = _side_bin_mass(params.scale, q, n)
        contrib = _plogp(p)
        if adaptive:
            below = contrib < CONTRIBUTION_FLOOR
            if below.any():
                first_below = int(np.argmax(below))
                kept = max(start + first_below - 1, 1)
                keep = max(first_below, 1 if start == 1 else 0)
                plogp_sum += float(contrib[:keep].sum())
                mass_sum += float(p[:keep].sum())
                return kept, plogp_sum, mass_sum
        plogp_sum += float(contrib.sum())
        mass_sum += float(p.sum())
        start = stop + 1
        width = min(width * 8, _EXPLICIT_CHUNK)
    return limit, plogp_sum, mass_sum


def _resolve_truncation(params: CauchyParams, q: float) -> int:
    """Number of bin pairs the adaptive rule keeps at this step size."""
    return _scan_side_bins(params, q)[0]


def entropy(params: CauchyParams, q: float) -> float:
    """Entropy in bits of the quantized coefficient distribution at step q."""
    _check_qstep(q)
    _, plogp_sum, _ = _scan_side_bins(params, q)
    total = 2.0 * plogp_sum
    if params.include_zero_bin:
        total += _plogp_scalar(_zero_bin_mass(params.scale, q))
    return total


def total_probability(params: CauchyParams, q: float, *, analytic_tail: bool = True) -> float:
    """Summed mass of every bin the params cover at step size q.

    Bins up to the truncation limit are summed explicitly; with
    analytic_tail the exact Cauchy mass beyond the last bin edge is added,
    since summing heavy Cauchy tails bin by bin to 1e-6 accuracy would
    take ~1e9 terms at large scale/small step.  A correct bin formula
    therefore returns 1 (up to float accumulation) whenever the zero bin
    is included.
    """
    _check_qstep(q)
    limit, _, mass_sum = _scan_side_bins(params, q)
    total = 2.0 * mass_sum
    if params.include_zero_bin:
        total += _zero_bin_mass(params.scale, q)
    if analytic_tail:
        total += 2.0 / math.pi * math.atan(params.scale / ((limit + 0.5) * q))
    return total


def qstep_to_qp(qstep: float) -> float:
    """QP for a quantization step size: 6*log2(q) + 4."""
    _check_qstep(qstep)
    return 6.0 * math.log2(qstep) + 4.0


def qp_to_qstep(qp: float) -> float:
    """Quantization step size for a QP: 2 ** ((qp - 4) / 6)."""
    if not math.isfinite(qp):
        raise ValueError(f"qp must be finite, got {qp}")
    return 2.0 ** ((qp - 4.0) / 6.0)


def synth_curve(params: CauchyParams, qp_grid, bits_scale: float) -> RQPCurve:
    """Synthetic rate curve: rate = bits_scale * H(qstep(qp)) per grid point.

    The grid must be nonempty and strictly increasing; rates come out
    strictly positive and nonincreasing in QP.
    """
    qps = [float(v) for v in qp_grid]
    if not qps:
        raise ValueError("qp_grid must be nonempty")
    if any(b <= a for a, b in zip(qps, qps[1:])):
        raise ValueError(f"qp_grid must be strictly increasing, got {qps}")
    if not (bits_scale > 0 and math.isfinite(bits_scale)):
        raise ValueError(f"bits_scale must be positive and finite, got {bits_scale}")
    samples = tuple(
        RQPSample(qp, bits_scale * entropy(params, qp_to_qstep(qp))) for qp in qps
    )
    return RQPCurve(samples)


def default_qstep_grid() -> np.ndarray:
    """64 log-spaced step sizes over [1, 256] for entropy-curve studies."""
    return np.geomspace(1.0, 256.0, 64)


def entropy_loglog_curve(params: CauchyParams, q_grid=None) -> RQPCurve:
    """(ln q as the target, H(q) as the rate) samples for log-log fits.

    Feeding the result to the model fitter regresses ln(q) on powers of
    ln(H), which is how the quadratic-versus-linear shape of the H-q
    relationship is judged.
    """
    q_values = default_qstep_grid() if q_grid is None else np.asarray(q_grid, dtype=float)
    if q_values.size == 0:
        raise ValueError("q_grid must be nonempty")
    if np.any(np.diff(q_values) <= 0):
        raise ValueError("q_grid must be strictly increasing")
    samples = tuple(
        RQPSample(math.log(q), entropy(params, float(q))) for q in q_values
    )
    return RQPCurve(samples)
