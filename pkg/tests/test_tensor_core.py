from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nzne.tensor_core import as_tensor, contract, qr, truncated_svd


def test_as_tensor_rejects_nan():
    with pytest.raises(ValueError):
        as_tensor([1.0, np.nan])


def test_contract_matches_einsum(rng):
    a = rng.normal(size=(2, 3, 4))
    b = rng.normal(size=(4, 3, 5))
    np.testing.assert_allclose(contract(a, b, [(2, 0), (1, 1)]), np.einsum("abc,cbd->ad", a, b))


def test_contract_extent_mismatch():
    with pytest.raises(ValueError):
        contract(np.ones((2, 3)), np.ones((2, 3)), [(1, 0)])


def test_contract_outer_product():
    assert contract(np.ones(2), np.ones(3)).shape == (2, 3)


def test_svd_of_rank_one_keeps_one_triplet():
    m = np.outer([1, 2, 3], [1, -1])
    res = truncated_svd(m, 5)
    assert res.rank == 1
    assert res.discarded_weight < 1e-30
    np.testing.assert_allclose(res.reconstruct(), m, atol=1e-12)


def test_svd_discarded_weight_is_tail_fraction():
    m = np.diag([3.0, 2.0, 1.0])
    res = truncated_svd(m, 2)
    assert res.discarded_weight == pytest.approx(1.0 / 14.0, rel=1e-14)
    assert res.kept_weight == pytest.approx(13.0 / 14.0, rel=1e-14)


def test_svd_zero_matrix():
    res = truncated_svd(np.zeros((3, 2)), 2)
    assert res.rank == 0 and res.discarded_weight == 0.0


def test_svd_rejects_bad_rank():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.integers(1, 9), st.integers(0, 2**31 - 1))
def test_svd_is_eckart_young_optimal(rows, cols, k, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    res = truncated_svd(m, k)
    s = np.linalg.svd(m, compute_uv=False)
    err = np.linalg.norm(m - res.reconstruct()) ** 2
    assert err == pytest.approx(np.sum(s[res.rank :] ** 2), rel=1e-9, abs=1e-12)
    assert res.discarded_weight == pytest.approx(err / np.sum(s**2), rel=1e-9, abs=1e-15)
    np.testing.assert_allclose(res.u.conj().T @ res.u, np.eye(res.rank), atol=1e-12)


def test_qr_reconstructs(rng):
    m = rng.normal(size=(6, 3))
    q, r = qr(m)
    np.testing.assert_allclose(q @ r, m, atol=1e-12)
