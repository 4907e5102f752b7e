import datetime as dt
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from dynuip.errors import DataError, DataWarning
from dynuip.series_io import (
    AlignedSeries,
    CsvSchema,
    Design,
    RawQuote,
    align,
    build_sample,
    load_csv,
    rolling_windows,
    save_csv,
)


def weekly(n, start=dt.date(2000, 1, 6)):
    return [start + dt.timedelta(days=7 * i) for i in range(n)]


def quotes_from(s, f, dates=None):
    dates = dates or weekly(len(s))
    return [RawQuote(d, float(np.exp(a)), float(np.exp(b))) for d, a, b in zip(dates, s, f)]


def test_load_three_rows(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("date,spot,forward\n2021-01-07,1.30,1.31\n2021-01-14,1.32,1.33\n2021-01-21,1.29,1.30\n")
    q = load_csv(p)
    assert [x.date for x in q] == [dt.date(2021, 1, 7), dt.date(2021, 1, 14), dt.date(2021, 1, 21)]
    assert q[1].spot == 1.32 and q[2].forward == 1.30


def test_negative_spot_names_row_and_field(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("date,spot,forward\n2021-01-07,1.30,1.31\n2021-01-14,-1.2,1.33\n")
    with pytest.raises(DataError) as info:
        load_csv(p)
    assert info.value.line == 3 and info.value.field == "spot"
    assert "line 3" in str(info.value) and "'spot'" in str(info.value)


def test_shuffled_dates_sorted_with_warning(tmp_path):
    rows = ["2021-01-14,1.32,1.33", "2021-01-07,1.30,1.31", "2021-01-21,1.29,1.30"]
    shuffled, ordered = tmp_path / "a.csv", tmp_path / "b.csv"
    shuffled.write_text("date,spot,forward\n" + "\n".join(rows) + "\n")
    ordered.write_text("date,spot,forward\n" + "\n".join(sorted(rows)) + "\n")
    with pytest.warns(DataWarning, match="sorted"):
        got = load_csv(shuffled)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        want = load_csv(ordered)
    assert got == want


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("date,spot,forward\n", "empty"),
        ("", "empty"),
        ("date,spot\n2021-01-07,1.3\n", "column 'forward'"),
        ("date,spot,forward\n2021-01-07,1.3,1.3\n2021-01-07,1.4,1.4\n", "duplicate date"),
        ("date,spot,forward\n2021-01-07,abc,1.3\n", "unparseable number"),
        ("date,spot,forward\n2021-01-07,1,234.5,1.3\n", "thousands separators"),
        ('date,spot,forward\n2021-01-07,"1,234.5",1.3\n', "unparseable number"),
        ("date,spot,forward\nyesterday,1.3,1.3\n", "unparseable date"),
        ("date,spot,forward\n2021-01-07,1.3\n", "expected at least 3 fields"),
        ("date,spot,forward\n2021-01-07,1.3,0\n", "positive"),
    ],
)
def test_load_errors(tmp_path, body, fragment):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DataError, match=fragment):
        load_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="does not exist"):
        load_csv(tmp_path / "nope.csv")


def test_schema_mapping_and_us_dates(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text("Day,S,F\n01/07/2021,1.30,1.31\n01/14/2021,1.32,1.33\n")
    q = load_csv(p, CsvSchema(date="Day", spot="S", forward="F"))
    assert q[0].date == dt.date(2021, 1, 7)
    q2 = load_csv(p, CsvSchema(date="Day", spot="S", forward="F", date_format="%m/%d/%Y"))
    assert q == q2


def test_save_load_round_trip(tmp_path):
    q = quotes_from(np.linspace(0, 0.1, 6), np.linspace(0.01, 0.11, 6))
    save_csv(q, tmp_path / "q.csv")
    assert load_csv(tmp_path / "q.csv") == q


def test_align_logs_of_e_powers():
    q = [RawQuote(d, float(np.e), float(np.e**2)) for d in weekly(8)]
    a = align(q, k=4)
    assert_allclose(a.s, 1.0, rtol=0, atol=1e-15)
    assert_allclose(a.f, 2.0, rtol=0, atol=1e-15)


def test_align_full_length():
    rng = np.random.default_rng(0)
    s = np.cumsum(rng.normal(0, 0.01, 1941))
    a = align(quotes_from(s, s + 0.001), k=4)
    assert a.T == 1941 and a.k == 4


def test_align_gap_warns_once_and_keeps_index():
    dates = weekly(10)
    dates = dates[:5] + [d + dt.timedelta(days=14) for d in dates[5:]]  # one 3-week gap
    q = quotes_from(np.zeros(10), np.zeros(10), dates)
    with pytest.warns(DataWarning) as rec:
        a = align(q, k=4)
    assert len([w for w in rec if "gap of 21 days" in str(w.message)]) == 1
    assert a.T == 10


def test_align_too_few():
    with pytest.raises(DataError, match="too few"):
        align(quotes_from(np.zeros(6), np.zeros(6)), k=4)


def test_aligned_series_is_immutable():
    a = align(quotes_from(np.zeros(8), np.zeros(8)), k=4)
    with pytest.raises(ValueError):
        a.s[0] = 1.0


def test_fama_constant_series():
    a = AlignedSeries(np.array(weekly(10), dtype="datetime64[D]"), np.full(10, 0.2), np.full(10, 0.25), 4)
    smp = build_sample(a, Design.FAMA)
    assert len(smp) == 6
    assert_array_equal(smp.y, 0.0)
    assert_allclose(smp.x, 0.05, rtol=1e-14)


def test_zero_premium_builds():
    s = np.cumsum(np.random.default_rng(3).normal(0, 0.01, 20))
    smp = build_sample(AlignedSeries(np.array(weekly(20), dtype="datetime64[D]"), s, s, 4), "fama")
    assert_array_equal(smp.x, 0.0)


def test_hand_computed_ten_rows():
    s = np.array([0.00, 0.01, 0.03, 0.02, 0.05, 0.04, 0.06, 0.08, 0.07, 0.09])
    f = s + np.array([0.001, 0.002, 0.001, 0.003, 0.002, 0.001, 0.002, 0.003, 0.001, 0.002])
    a = AlignedSeries(np.array(weekly(10), dtype="datetime64[D]"), s, f, 2)
    fama = build_sample(a, Design.FAMA)
    # y_0 = s_2 - s_0 = 0.03, x_0 = f_0 - s_0 = 0.001
    assert fama.y[0] == pytest.approx(0.03) and fama.x[0] == pytest.approx(0.001)
    assert len(fama) == 8 and fama.dates[0] == np.datetime64(weekly(10)[2])
    hh = build_sample(a, Design.HANSEN_HODRICK)
    # t = 2: y = s_4 - f_2 = 0.05 - 0.031 ; x = s_2 - f_0 = 0.03 - 0.001
    assert hh.y[0] == pytest.approx(0.019) and hh.x[0] == pytest.approx(0.029)
    assert len(hh) == 6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(15, 60))
def test_design_identities(seed, k, T):
    rng = np.random.default_rng(seed)
    s = np.cumsum(rng.normal(0, 0.01, T))
    f = s + rng.normal(0, 0.002, T)
    a = AlignedSeries(np.array(weekly(T), dtype="datetime64[D]"), s, f, k)
    fama, hh = build_sample(a, "fama"), build_sample(a, "hh")
    # overlapping range: HH index i corresponds to Fama index i + k
    assert_allclose(hh.y, fama.y[k:] - fama.x[k:], atol=1e-15)
    assert_array_equal(hh.dates, fama.dates[k:])
    # reconstruct k-period spot changes and forwards from the samples
    assert_allclose(fama.y, s[k:] - s[:-k], atol=1e-15)
    assert_allclose(fama.x + s[: T - k], f[: T - k], atol=1e-15)
    assert_allclose(s[k : T - k] - hh.x, f[: T - 2 * k], atol=1e-15)


@pytest.mark.parametrize("n, window, step, expected", [(260, 260, 1, 1), (262, 260, 1, 3), (1937, 260, 1, 1678),
                                                       (300, 260, 7, 6)])
def test_rolling_counts(n, window, step, expected):
    smp = build_sample(AlignedSeries(np.array(weekly(n + 4), dtype="datetime64[D]"), np.zeros(n + 4),
                                     np.zeros(n + 4), 4), "fama")
    ws = rolling_windows(smp, window, step)
    assert len(ws) == expected
    starts = [int(np.where(smp.dates == w.start)[0][0]) for w in ws]
    assert starts == list(range(0, n - window + 1, step))
    assert all(len(w) == window and w.end == smp.dates[s + window - 1] for w, s in zip(ws, starts))


def test_rolling_rejects_large_window():
    smp = build_sample(AlignedSeries(np.array(weekly(20), dtype="datetime64[D]"), np.zeros(20), np.zeros(20), 4),
                       "fama")
    with pytest.raises(ValueError, match="larger than sample"):
        rolling_windows(smp, 17)
    with pytest.raises(ValueError, match="too short for lag order"):
        rolling_windows(smp, 16, max_lag=2)
