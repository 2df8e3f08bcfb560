"""Non-zero noise extrapolation: fidelity extrapolation, point selection and noise fits.

The pipeline has two stages. (A) For every noise strength, values from
several bond dimensions are extrapolated linearly in emulation fidelity to
fidelity one. (B) The accepted fidelity-extrapolated values are fitted to
``a exp(-b lam) + c`` and evaluated at the target strength ``lam*``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .engine import EmulationRecord

__all__ = [
    "FidelityExtrapolation",
    "Selection",
    "NzneResult",
    "extrapolate_fidelity",
    "is_converged",
    "select_points",
    "dip_size",
    "fit_weights",
    "fit_weighted_log_linear",
    "fit_exponential",
    "run_nzne",
    "MIN_ABS_VALUE",
    "DIP_THRESHOLD",
]

MIN_ABS_VALUE = 1e-10
DIP_THRESHOLD = 0.99


@dataclass
class FidelityExtrapolation:
    """Straight-line fit of value against emulation fidelity for one ``lam``.

    ``fidelities`` and ``values`` are ordered by increasing bond dimension.
    """

    lam: float
    fidelities: list[float]
    values: list[float]
    slope: float
    intercept: float
    value: float
    converged: bool

    @property
    def max_fidelity(self) -> float:
        return self.fidelities[-1]


def is_converged(v_prev: float, v_last: float, f_prev: float, f_last: float) -> bool:
    """Approximate convergence test on the two largest bond dimensions.

    Checks ``|dv / dF| * (1 - F_last) < |v_last| / 2``. An exact last
    emulation (``F_last == 1``) counts as converged. Otherwise
    ``F_last <= F_prev`` leaves the slope undefined and the test fails.
    """
    if f_last >= 1.0:
        return True
    if f_last <= f_prev:
        return False
    slope = (v_last - v_prev) / (f_last - f_prev)
    return bool(abs(slope) * (1.0 - f_last) < abs(v_last) / 2.0)


def extrapolate_fidelity(points: Sequence[tuple[float, float]], lam: float = float("nan")) -> FidelityExtrapolation:
    """Least-squares line through ``(fidelity, value)`` points, evaluated at fidelity 1.

    Points must be ordered by increasing bond dimension. With a single point,
    or when all fidelities coincide, the slope is undefined and the value at
    the largest bond dimension is returned. Such a result counts as converged
    only if that emulation was exact.
    """
    if not points:
        raise ValueError("no points to extrapolate")
    f = np.array([p[0] for p in points], dtype=float)
    v = np.array([p[1] for p in points], dtype=float)
    if np.any((f <= 0) | (f > 1 + 1e-12)):
        raise ValueError(f"fidelities must lie in (0, 1], got {f.tolist()}")
    if len(points) < 2 or np.ptp(f) == 0.0:
        exact = bool(f[-1] >= 1.0)
        return FidelityExtrapolation(lam, f.tolist(), v.tolist(), float("nan"), float(v[-1]), float(v[-1]), exact)
    slope, intercept = np.polyfit(f, v, 1)
    value = float(slope + intercept)
    conv = is_converged(v[-2], v[-1], f[-2], f[-1])
    return FidelityExtrapolation(lam, f.tolist(), v.tolist(), float(slope), float(intercept), value, conv)


@dataclass
class Selection:
    """Outcome of applying the acceptance criteria to fidelity-extrapolated points."""

    converged: list[float]
    accepted: list[float]
    rejected: dict[float, str] = field(default_factory=dict)


def select_points(extrapolations: dict[float, FidelityExtrapolation], reference: float) -> Selection:
    """Apply the three acceptance criteria.

    1. the extrapolation converged at the largest bond dimension;
    2. ``|value| >= 1e-10``;
    3. the value has the sign of the noiseless ``reference``.

    ``converged`` lists the noise strengths passing criterion 1 only (used
    by the direct exponential fit), ``accepted`` those passing all three.
    """
    converged, accepted, rejected = [], [], {}
    ref_sign = np.sign(reference)
    for lam in sorted(extrapolations):
        ex = extrapolations[lam]
        if not ex.converged:
            rejected[lam] = "not converged"
            continue
        converged.append(lam)
        if abs(ex.value) < MIN_ABS_VALUE:
            rejected[lam] = "too small"
        elif np.sign(ex.value) != ref_sign:
            rejected[lam] = "sign differs from noiseless value"
        else:
            accepted.append(lam)
    return Selection(converged, accepted, rejected)


def dip_size(scan: Iterable[tuple[float, float]], threshold: float = DIP_THRESHOLD) -> tuple[float, bool]:
    """Smallest ``lam > 0`` whose maximal emulation fidelity exceeds ``threshold``.

    Returns ``(d, found)``. When no grid point exceeds the threshold, ``d``
    is the largest grid value and ``found`` is ``False``.
    """
    pts = sorted((float(lam), float(f)) for lam, f in scan if lam > 0)
    if not pts:
        raise ValueError("dip size needs at least one positive noise strength")
    for lam, f in pts:
        if f > threshold:
            return lam, True
    return pts[-1][0], False


def fit_weights(lams, fidelities, target: float, d: float, delta_f: float = 2.0, delta_d: float = 20.0) -> np.ndarray:
    """``w = F^delta_f * exp(-delta_d |lam* - lam| / d)``."""
    lams = np.asarray(lams, dtype=float)
    fidelities = np.asarray(fidelities, dtype=float)
    return fidelities**delta_f * np.exp(-delta_d * np.abs(target - lams) / d)


def fit_weighted_log_linear(lams, values, weights, sign: float) -> tuple[float, float]:
    """Minimize ``sum w^2 (log|v| - log|a| + b lam)^2`` in closed form.

    Returns ``(a, b)`` with the sign of ``a`` set to ``sign``.
    """
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if lams.size < 2 or np.ptp(lams) == 0.0:
        raise ValueError("log-linear fit needs at least two distinct noise strengths")
    if np.any(np.abs(values) < MIN_ABS_VALUE):
        raise ValueError("values too close to zero for a log-linear fit")
    A = np.column_stack([np.ones_like(lams), -lams]) * w[:, None]
    y = np.log(np.abs(values)) * w
    (log_a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    if not np.all(np.isfinite([log_a, b])):
        raise ValueError("log-linear fit is singular")
    return float(np.copysign(np.exp(log_a), sign if sign != 0 else 1.0)), float(b)


@dataclass
class ExponentialFit:
    a: float
    b: float
    c: float
    loss: float
    b_identifiable: bool


def fit_exponential(lams, values, max_iter: int = 2000) -> ExponentialFit:
    """Unweighted least-squares fit of ``a exp(-b lam) + c``.

    Starts from ``c`` at the largest-``lam`` value, ``a`` the residual at the
    smallest ``lam`` and ``b`` from the log ratio of the first two residuals.
    Stops once the relative loss decrease drops below 1e-12. Constant data
    gives ``a = b = 0`` with ``b_identifiable`` false. Raises ``ValueError``
    when the optimizer does not converge.
    """
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(lams)
    lams, values = lams[order], values[order]
    if lams.size < 3:
        raise ValueError("exponential fit needs at least three points")
    scale = max(float(np.max(np.abs(values))), 1e-300)
    if np.ptp(values) <= 1e-14 * scale:
        return ExponentialFit(0.0, 0.0, float(values.mean()), 0.0, False)

    c0 = values[-1]
    r = values - c0
    a0 = r[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = r[1] / r[0] if r[0] != 0 else np.nan
    b0 = -np.log(ratio) / (lams[1] - lams[0]) if np.isfinite(ratio) and ratio > 0 else 1.0 / max(np.ptp(lams), 1e-12)
    span = max(np.ptp(lams), 1e-12)

    # optimise in rescaled variables for conditioning
    def residual(p):
        a, bs, c = p
        return (a * np.exp(-bs * (lams - lams[0]) / span) + c - values) / scale

    p0 = np.array([a0, b0 * span, c0])
    res = least_squares(residual, p0, method="lm", xtol=1e-15, ftol=1e-12, gtol=1e-15, max_nfev=max_iter * 4)
    if not res.success:
        raise ValueError(f"exponential fit did not converge: {res.message}")
    a_s, bs, c = res.x
    b = bs / span
    a = a_s * np.exp(b * lams[0])
    loss = float(np.sum((res.fun * scale) ** 2))
    return ExponentialFit(float(a), float(b), float(c), loss, bool(abs(a) > 1e-12 * scale))


@dataclass
class NzneResult:
    """Extrapolated estimate of one observable with its diagnostics."""

    observable: str
    target: float
    mode: str
    estimate: float
    coefficients: dict[str, float]
    accepted: list[float]
    weights: dict[float, float]
    dip: float
    dip_found: bool
    rejected: dict[float, str]
    extrapolations: dict[float, dict]
    single_emulation: float | None = None
    residuals: dict[float, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("weights", "rejected", "extrapolations", "residuals"):
            d[key] = {repr(k): v for k, v in d[key].items()}
        d["schema"] = "nzne-result/1"
        return d


def _group(records: Iterable[EmulationRecord]) -> dict[float, list[EmulationRecord]]:
    out: dict[float, list[EmulationRecord]] = {}
    for r in records:
        if r.ok:
            out.setdefault(r.lam, []).append(r)
    for lam in out:
        out[lam].sort(key=lambda r: r.max_bond)
    return out


def run_nzne(
    records: Iterable[EmulationRecord],
    observable: str,
    target: float,
    delta_f: float = 2.0,
    delta_d: float = 20.0,
) -> NzneResult:
    """Full extrapolation for one observable from a ``(lam, D)`` grid of records.

    Fit ladder: weighted log-linear on points passing criteria 1-3; if fewer
    than two remain, a direct exponential fit on points passing criterion 1;
    if fewer than three of those remain, the highest-bond-dimension emulation
    at ``target``.
    """
    groups = _group(records)
    if not groups:
        raise ValueError("no successful records")
    if 0.0 not in groups:
        raise ValueError("the record grid must contain lam = 0")
    extraps = {
        lam: extrapolate_fidelity([(r.emulation_fidelity, r.values[observable]) for r in recs], lam)
        for lam, recs in groups.items()
    }
    reference = extraps[0.0].value
    sel = select_points(extraps, reference)
    fmax = {lam: ex.max_fidelity for lam, ex in extraps.items()}
    positive = [(lam, f) for lam, f in fmax.items() if lam > 0]
    d, found = dip_size(positive) if positive else (1.0, False)
    single = None
    if target in groups:
        single = max(groups[target], key=lambda r: r.emulation_fidelity).values[observable]
    ex_json = {lam: asdict(ex) for lam, ex in extraps.items()}

    def result(mode, estimate, coeffs, accepted, weights=None, residuals=None):
        return NzneResult(
            observable, float(target), mode, float(estimate), coeffs, accepted, weights or {}, d, found,
            sel.rejected, ex_json, single, residuals or {},
        )

    if len(sel.accepted) >= 2:
        lams = np.array(sel.accepted)
        vals = np.array([extraps[lam].value for lam in lams])
        w = fit_weights(lams, [fmax[lam] for lam in lams], target, d, delta_f, delta_d)
        a, b = fit_weighted_log_linear(lams, vals, w, np.sign(reference))
        resid = {float(lam): float(np.log(abs(v)) - np.log(abs(a)) + b * lam) for lam, v in zip(lams, vals)}
        return result(
            "weighted_log_linear",
            a * np.exp(-b * target),
            {"a": a, "b": b},
            sel.accepted,
            {float(lam): float(x) for lam, x in zip(lams, w)},
            resid,
        )
    if len(sel.converged) >= 3:
        lams = np.array(sel.converged)
        vals = np.array([extraps[lam].value for lam in lams])
        fit = fit_exponential(lams, vals)
        resid = {float(lam): float(fit.a * np.exp(-fit.b * lam) + fit.c - v) for lam, v in zip(lams, vals)}
        return result(
            "direct_exponential",
            fit.a * np.exp(-fit.b * target) + fit.c,
            {"a": fit.a, "b": fit.b, "c": fit.c, "b_identifiable": float(fit.b_identifiable)},
            sel.converged,
            residuals=resid,
        )
    if single is None:
        raise ValueError("no emulation at the target noise strength to fall back on")
    return result("fallback_single_emulation", single, {}, [])
