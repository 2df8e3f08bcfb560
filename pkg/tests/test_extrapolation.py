from __future__ import annotations

import json

import numpy as np
import pytest

from nzne.engine import EmulationRecord
from nzne.extrapolation import (
    dip_size,
    extrapolate_fidelity,
    fit_exponential,
    fit_weighted_log_linear,
    fit_weights,
    is_converged,
    run_nzne,
    select_points,
)


def test_extrapolate_points_on_identity_line():
    assert extrapolate_fidelity([(0.8, 0.8), (0.9, 0.9)]).value == pytest.approx(1.0, abs=1e-12)


def test_extrapolate_constant_value():
    assert extrapolate_fidelity([(0.5, 0.3), (0.7, 0.3), (0.9, 0.3)]).value == pytest.approx(0.3, abs=1e-12)


def test_extrapolate_linear_recovery():
    pts = [(f, 0.3 + 0.2 * f) for f in (0.7, 0.8, 0.95)]
    assert extrapolate_fidelity(pts).value == pytest.approx(0.5, abs=1e-12)


def test_extrapolate_equal_fidelities_not_converged():
    ex = extrapolate_fidelity([(0.9, 0.1), (0.9, 0.2)])
    assert not ex.converged
    assert ex.value == 0.2
    assert extrapolate_fidelity([(1.0, 0.1), (1.0, 0.1)]).converged


def test_extrapolate_rejects_bad_fidelity():
    with pytest.raises(ValueError):
        extrapolate_fidelity([(0.0, 0.1), (0.5, 0.2)])
    with pytest.raises(ValueError):
        extrapolate_fidelity([])


@pytest.mark.parametrize(
    "v_prev,v_last,f_prev,f_last,want",
    [
        (0.50, 0.52, 0.90, 0.95, True),
        (0.10, 0.30, 0.90, 0.92, False),
        (0.40, 0.40, 0.30, 0.35, True),
        (0.40, 0.50, 0.90, 0.90, False),
        (0.40, 0.50, 0.95, 0.90, False),
        (0.40, 0.90, 0.50, 1.00, True),
    ],
)
def test_is_converged(v_prev, v_last, f_prev, f_last, want):
    assert is_converged(v_prev, v_last, f_prev, f_last) is want


def _ex(lam, value, converged=True):
    pts = [(0.5, value), (0.9, value)] if converged else [(0.5, value - 1.0), (0.52, value)]
    return extrapolate_fidelity(pts, lam)


def test_select_points_criteria():
    exs = {0.0: _ex(0.0, -0.2), 0.01: _ex(0.01, -1e-12), 0.02: _ex(0.02, 0.05), 0.03: _ex(0.03, -0.1, False), 0.04: _ex(0.04, -0.1)}
    sel = select_points(exs, -0.2)
    assert sel.accepted == [0.0, 0.04]
    assert sel.converged == [0.0, 0.01, 0.02, 0.04]
    assert sel.rejected == {0.01: "too small", 0.02: "sign differs from noiseless value", 0.03: "not converged"}


def test_select_points_monotone_in_extra_bond_dimension():
    base = {0.0: extrapolate_fidelity([(0.6, 0.30), (0.9, 0.31)], 0.0), 0.01: extrapolate_fidelity([(0.7, 0.2), (0.95, 0.21)], 0.01)}
    before = select_points(base, 0.3)
    longer = {
        0.0: extrapolate_fidelity([(0.6, 0.30), (0.9, 0.31), (0.97, 0.312)], 0.0),
        0.01: extrapolate_fidelity([(0.7, 0.2), (0.95, 0.21), (0.99, 0.211)], 0.01),
    }
    after = select_points(longer, 0.3)
    assert set(before.converged) <= set(after.converged)
    assert select_points(base, 0.3) == before


def test_dip_size():
    assert dip_size([(0.05, 0.9), (0.1, 0.995), (0.15, 0.999)]) == (0.1, True)
    assert dip_size([(0.02, 0.995), (0.05, 0.999)]) == (0.02, True)
    assert dip_size([(0.02, 0.5), (0.05, 0.9)]) == (0.05, False)
    with pytest.raises(ValueError):
        dip_size([])


def test_weights_formula():
    w = fit_weights([0.01, 0.11], [1.0, 1.0], target=0.01, d=0.1)
    assert w[0] == 1.0
    assert w[1] == pytest.approx(np.exp(-20.0), rel=1e-12)
    assert fit_weights([0.01], [0.5], 0.01, 0.1)[0] == pytest.approx(0.25)


@pytest.mark.parametrize("a,b", [(0.5, 3.0), (-0.2, 1.0)])
def test_log_linear_recovery(a, b):
    lam = np.array([0.0, 0.02, 0.05, 0.1, 0.2])
    w = np.random.default_rng(0).uniform(0.1, 1.0, lam.size)
    fa, fb = fit_weighted_log_linear(lam, a * np.exp(-b * lam), w, np.sign(a))
    assert fa == pytest.approx(a, abs=1e-10)
    assert fb == pytest.approx(b, abs=1e-10)


def test_log_linear_rejects_single_lambda():
    with pytest.raises(ValueError):
        fit_weighted_log_linear([0.1, 0.1], [0.2, 0.3], [1, 1], 1)


def test_exponential_recovery():
    lam = np.linspace(0, 0.5, 8)
    fit = fit_exponential(lam, 0.3 * np.exp(-2 * lam) + 0.1)
    assert (fit.a, fit.b, fit.c) == pytest.approx((0.3, 2.0, 0.1), abs=1e-8)
    assert fit.b_identifiable


def test_exponential_constant_data():
    fit = fit_exponential([0.0, 0.1, 0.2], [0.4, 0.4, 0.4])
    assert fit.a == 0.0 and fit.c == pytest.approx(0.4)
    assert not fit.b_identifiable
    with pytest.raises(ValueError):
        fit_exponential([0.0, 0.1], [0.4, 0.3])


def _records(value_fn, lams, bonds=(4, 8), fid_fn=None):
    fid_fn = fid_fn or (lambda lam, d: min(1.0, 0.6 + 0.04 * d + 2 * lam))
    out = []
    for lam in lams:
        for d in bonds:
            out.append(EmulationRecord(lam, d, "depolarizing", "density", {"O": value_fn(lam, d)}, [fid_fn(lam, d)], fid_fn(lam, d)))
    return out


def test_run_nzne_log_linear_branch():
    lams = [0.0, 0.01, 0.02, 0.05, 0.1]
    res = run_nzne(_records(lambda lam, d: -0.3 * np.exp(-4 * lam), lams), "O", 0.01)
    assert res.mode == "weighted_log_linear"
    assert res.estimate == pytest.approx(-0.3 * np.exp(-0.04), abs=1e-10)
    assert np.sign(res.estimate) == -1
    assert res.accepted == lams
    assert res.single_emulation == pytest.approx(-0.3 * np.exp(-0.04))
    json.dumps(res.to_json())


def test_run_nzne_constant_grid():
    res = run_nzne(_records(lambda lam, d: 0.25, [0.0, 0.05, 0.1]), "O", 0.01)
    assert res.estimate == pytest.approx(0.25, abs=1e-12)


def test_run_nzne_direct_exponential_branch():
    # values cross zero so criterion 3 leaves a single point
    f = lambda lam, d: 0.5 * np.exp(-10 * lam) - 0.2
    res = run_nzne(_records(f, [0.0, 0.1, 0.2, 0.3]), "O", 0.05)
    assert res.mode == "direct_exponential"
    assert res.estimate == pytest.approx(f(0.05, 0), abs=1e-7)
    assert set(res.rejected) == {0.1, 0.2, 0.3}


def test_run_nzne_fallback_branch():
    # strongly D-dependent values fail the convergence test everywhere except lam = 0
    def value(lam, d):
        return 0.1 + (0.0 if lam == 0 else 0.5 * d)

    def fid(lam, d):
        return 1.0 if lam == 0 else 0.5 + 0.01 * d

    res = run_nzne(_records(value, [0.0, 0.01, 0.02], fid_fn=fid), "O", 0.01)
    assert res.mode == "fallback_single_emulation"
    assert res.estimate == pytest.approx(value(0.01, 8))
    assert res.accepted == []


def test_run_nzne_requires_zero_noise_and_records():
    with pytest.raises(ValueError):
        run_nzne([], "O", 0.01)
    with pytest.raises(ValueError):
        run_nzne(_records(lambda lam, d: 0.2, [0.01, 0.02]), "O", 0.01)
