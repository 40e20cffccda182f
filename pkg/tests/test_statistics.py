import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discreteci.statistics import (
    Method,
    chi2_statistic,
    chi_square_quantile,
    chi_square_sf,
    g_statistic,
    omega,
    statistic_T,
    statistic_TW,
    statistic_TW_dagger,
)
from discreteci.tables import Dataset, partition_by_z
from discreteci.ustat import split_bin, weights_from_split
from oracles import brute_force_u, reference_chi2_g


def binned_from(bins, l1, l2):
    triples = [(x, y, m) for m, pairs in enumerate(bins, start=1) for x, y in pairs]
    return partition_by_z(Dataset.from_triples(triples, l1, l2, len(bins)))


def random_dataset(rng, n, l1, l2, d):
    return Dataset(rng.integers(1, l1 + 1, n), rng.integers(1, l2 + 1, n), rng.integers(1, d + 1, n), l1, l2, d)


# ---------------------------------------------------------------- T


def test_T_all_bins_small():
    agg = statistic_T(binned_from([[(1, 1), (2, 2), (1, 2)]] * 3, 2, 2))
    assert agg.value == 0.0
    assert agg.skipped_bins == [1, 2, 3]


def test_T_single_bin():
    agg = statistic_T(binned_from([[(1, 1), (1, 1), (2, 2), (2, 2)]], 2, 2))
    assert agg.value == pytest.approx(8 / 3, rel=1e-12)
    assert agg.method is Method.UCI


def test_T_constant_bins():
    agg = statistic_T(binned_from([[(1, 2)] * 6, [(2, 1)] * 9, [(3, 3)] * 4], 3, 3))
    assert agg.value == 0.0


# ---------------------------------------------------------------- omega


@pytest.mark.parametrize("args, expected", [((10, 20, 20), 10.0), ((100, 20, 5), 10.0), ((0, 5, 5), 0.0)])
def test_omega(args, expected):
    assert omega(*args) == expected


# ---------------------------------------------------------------- T_W


def test_TW_tiny_bins_skipped():
    agg = statistic_TW(binned_from([[(1, 1)] * 3, [(1, 2), (2, 1)]], 2, 2))
    assert agg.value == 0.0 and agg.skipped_bins == [1, 2]


def test_TW_small_bins_use_unit_weights():
    pairs = [(1, 1), (1, 1), (2, 2), (2, 2), (1, 2)]
    agg = statistic_TW(binned_from([pairs], 2, 2))
    assert agg.skipped_bins == []
    assert agg.value == pytest.approx(5 * omega(5, 2, 2) * brute_force_u(pairs, [1, 1], [1, 1]), rel=1e-9)


def test_TW_constant_bin():
    assert statistic_TW(binned_from([[(2, 3)] * 12], 3, 3)).value == 0.0


def test_TW_against_oracle():
    rng = np.random.default_rng(11)
    pairs = [tuple(p) for p in rng.integers(1, 4, (12, 2)).tolist()]
    sb = split_bin(pairs, 3, 3)
    w = weights_from_split(sb, 3, 3)
    expected = 12 * omega(12, 3, 3) * brute_force_u(sb.d_xy, w.eta, w.upsilon)
    assert statistic_TW(binned_from([pairs], 3, 3)).value == pytest.approx(expected, rel=1e-9, abs=1e-12)


# ---------------------------------------------------------------- T_W dagger


def test_TW_dagger_constant():
    assert statistic_TW_dagger(binned_from([[(1, 1)] * 10, [(2, 2)] * 5], 2, 2)).value == 0.0


def test_TW_dagger_two_by_two():
    pairs = [(1, 1), (1, 1), (2, 2), (2, 2)]
    agg = statistic_TW_dagger(binned_from([pairs], 2, 2))
    assert agg.value == pytest.approx(4 * 2 * brute_force_u(pairs, [2, 2], [2, 2]), rel=1e-12)


def test_TW_dagger_huge_domain():
    # with l >= sigma the cap min(sigma, l) is sigma, so b_q is the raw count
    l = 10**6
    pairs = [(1, 1), (1, 1), (2, 2), (2, 2), (3, 1), (1, 3), (3, 3), (2, 1)]
    eta = 1.0 + np.array([3, 3, 2])  # counts of x = 1, 2, 3
    ups = 1.0 + np.array([4, 2, 2])  # counts of y = 1, 2, 3
    agg = statistic_TW_dagger(binned_from([pairs], l, l))
    assert omega(8, l, l) == 8.0
    assert agg.value == pytest.approx(8 * 8 * brute_force_u(pairs, eta, ups), rel=1e-9)


def test_bin_reordering_invariance():
    rng = np.random.default_rng(8)
    data = random_dataset(rng, 300, 4, 3, 5)
    perm = rng.permutation(5) + 1
    relabeled = Dataset(data.x, data.y, perm[data.z - 1], 4, 3, 5)
    for fn in (statistic_T, statistic_TW, statistic_TW_dagger):
        a = fn(partition_by_z(data)).value
        b = fn(partition_by_z(relabeled)).value
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


def test_within_bin_reordering():
    rng = np.random.default_rng(9)
    data = random_dataset(rng, 300, 4, 3, 5)
    order = rng.permutation(300)
    shuffled = Dataset(data.x[order], data.y[order], data.z[order], 4, 3, 5)
    for fn in (statistic_T, statistic_TW_dagger):
        a = fn(partition_by_z(data)).value
        b = fn(partition_by_z(shuffled)).value
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)
    # the split variant depends on order only through the split itself
    b = partition_by_z(shuffled)
    assert statistic_TW(b).value == statistic_TW(b).value


def test_per_bin_sums_to_value():
    rng = np.random.default_rng(10)
    b = partition_by_z(random_dataset(rng, 200, 3, 3, 6))
    for fn in (statistic_T, statistic_TW, statistic_TW_dagger, chi2_statistic, g_statistic):
        agg = fn(b)
        assert agg.value == pytest.approx(math.fsum(agg.per_bin.values()), rel=1e-12, abs=1e-14)


# ---------------------------------------------------------------- chi2 / G


def _slice(table, z=1):
    return [(q + 1, r + 1, z) for q in range(len(table)) for r in range(len(table[0])) for _ in range(table[q][r])]


def test_chi2_g_diagonal_slice():
    data = Dataset.from_triples(_slice([[10, 0], [0, 10]]), 2, 2, 1)
    assert chi2_statistic(data).value == pytest.approx(20.0, rel=1e-12)
    assert g_statistic(data).value == pytest.approx(40 * math.log(2), rel=1e-12)
    ref_chi2, ref_g = reference_chi2_g(data.x, data.y, data.z, 2, 2, 1)
    assert chi2_statistic(data).value == pytest.approx(ref_chi2, rel=1e-12)
    assert g_statistic(data).value == pytest.approx(ref_g, rel=1e-12)


def test_chi2_two_identical_slices():
    data = Dataset.from_triples(_slice([[10, 0], [0, 10]], 1) + _slice([[10, 0], [0, 10]], 2), 2, 2, 2)
    assert chi2_statistic(data).value == pytest.approx(40.0, rel=1e-12)
    assert g_statistic(data).value == pytest.approx(80 * math.log(2), rel=1e-12)


def test_independent_slice_is_zero():
    data = Dataset.from_triples(_slice([[2, 4, 6], [1, 2, 3]]), 2, 3, 1)
    assert chi2_statistic(data).value == pytest.approx(0.0, abs=1e-12)
    assert g_statistic(data).value == pytest.approx(0.0, abs=1e-12)


def test_against_scipy_reference():
    rng = np.random.default_rng(12)
    for _ in range(20):
        l1, l2, d = rng.integers(2, 6, 3)
        data = random_dataset(rng, int(rng.integers(5, 400)), l1, l2, d)
        ref_chi2, ref_g = reference_chi2_g(data.x, data.y, data.z, l1, l2, d)
        assert chi2_statistic(data).value == pytest.approx(ref_chi2, rel=1e-9, abs=1e-10)
        assert g_statistic(data).value == pytest.approx(ref_g, rel=1e-9, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(1, 5),
    st.integers(1, 5),
    st.integers(1, 4),
    st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 4)), max_size=80),
)
def test_classical_nonnegative_and_additive(l1, l2, d, raw):
    triples = [(min(x, l1), min(y, l2), min(z, d)) for x, y, z in raw]
    data = Dataset.from_triples(triples, l1, l2, d)
    chi2 = chi2_statistic(data).value
    g = g_statistic(data).value
    assert chi2 >= 0 and g >= 0
    parts_chi2 = parts_g = 0.0
    for m in range(1, d + 1):
        sub = [(x, y, 1) for x, y, z in triples if z == m]
        one = Dataset.from_triples(sub, l1, l2, 1)
        parts_chi2 += chi2_statistic(one).value
        parts_g += g_statistic(one).value
    assert chi2 == pytest.approx(parts_chi2, rel=1e-12, abs=1e-12)
    assert g == pytest.approx(parts_g, rel=1e-12, abs=1e-12)


def test_g_nonnegative_random_tables():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        l1, l2, d = rng.integers(1, 5, 3)
        data = random_dataset(rng, int(rng.integers(0, 60)), l1, l2, d)
        assert g_statistic(data).value >= 0


# ---------------------------------------------------------------- quantiles


@pytest.mark.parametrize("p, df, expected", [(0.95, 1, 3.84146), (0.95, 10, 18.3070)])
def test_quantile_tables(p, df, expected):
    # published table values, 6 significant digits
    assert chi_square_quantile(p, df) == pytest.approx(expected, abs=5e-5)


def _cdf_by_quadrature(x, df):
    """Integrate the chi-square density numerically (independent of the incomplete gamma)."""
    with mpmath.workdps(40):
        k = mpmath.mpf(df) / 2
        logc = -k * mpmath.log(2) - mpmath.loggamma(k)

        def dens(t):
            return mpmath.exp(logc + (k - 1) * mpmath.log(t) - t / 2)

        if df <= 200:
            return mpmath.quad(dens, [0, x]), dens(x)
        sd = mpmath.sqrt(2 * mpmath.mpf(df))
        lo = max(mpmath.mpf(0), df - 60 * sd)
        pts = [lo + (x - lo) * i / 40 for i in range(41)]
        return mpmath.quad(dens, pts), dens(x)


@pytest.mark.parametrize("df", [1, 3, 10, 100, 10**6])
@pytest.mark.parametrize("p", [1e-6, 0.05, 0.5, 0.95, 0.999999])
def test_quantile_accuracy(p, df):
    x = chi_square_quantile(p, df)
    cdf, dens = _cdf_by_quadrature(mpmath.mpf(x), df)
    # first-order distance from x to the true quantile
    assert abs(float((cdf - p) / dens)) <= 1e-8


def test_quantile_wilson_hilferty_band():
    for df in (100, 1000, 10**5):
        assert abs(chi_square_quantile(0.5, df) - (df - 2 / 3)) <= 0.01 * df


def test_quantile_monotone():
    grid = np.linspace(0.001, 0.999, 200)
    for df in (1, 2, 7, 50, 2048):
        q = [chi_square_quantile(p, df) for p in grid]
        assert all(b > a for a, b in zip(q, q[1:]))


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(p):
    with pytest.raises(ValueError):
        chi_square_quantile(p, 3)


def test_sf_inverts_quantile():
    for df in (1, 6, 2048):
        for p in (0.01, 0.05, 0.5):
            assert chi_square_sf(chi_square_quantile(1 - p, df), df) == pytest.approx(p, rel=1e-9)


def test_asymptotic_null_calibration():
    """Fixed-dimensional null: the asymptotic chi-square test holds its level."""
    rng = np.random.default_rng(14)
    crit = chi_square_quantile(0.95, 2)
    rejections = 0
    for _ in range(2000):
        data = random_dataset(rng, 2000, 2, 2, 2)
        rejections += chi2_statistic(data).value > crit
    assert 0.03 <= rejections / 2000 <= 0.07
