import json

import numpy as np
import pytest

from decumulation import IngestError, ModelError, MonthIndex
from decumulation.ingest import (
    DataStore,
    PriceSeries,
    RateSeries,
    bond_returns_from_gs10,
    equity_total_returns,
    load_monthly_csv,
    monthly_cost,
    par_bond_price,
    returns_from_prices,
    sha256_of,
)

from oracles import bond_pv


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestCsv:
    def test_reads_unsorted_rows(self, tmp_path):
        p = write(tmp_path, "r.csv", "date,annual_rate_percent\n2000-03,3\n2000-01,1\n2000-02,2\n")
        tab = load_monthly_csv(p, ["annual_rate_percent"])
        assert tab.start == MonthIndex(2000, 1)
        assert list(tab.columns["annual_rate_percent"]) == [1, 2, 3]

    def test_gap_is_an_error(self, tmp_path):
        p = write(tmp_path, "r.csv", "date,x\n2000-01,1\n2000-03,2\n")
        with pytest.raises(IngestError, match="contiguous"):
            load_monthly_csv(p, ["x"])

    def test_duplicate_month(self, tmp_path):
        p = write(tmp_path, "r.csv", "date,x\n2000-01,1\n2000-01-15,2\n")
        with pytest.raises(IngestError, match=r"r.csv:3: duplicate"):
            load_monthly_csv(p, ["x"])

    def test_bad_value_reports_line(self, tmp_path):
        p = write(tmp_path, "r.csv", "date,x\n2000-01,1\n2000-02,abc\n")
        with pytest.raises(IngestError, match=r"r.csv:3"):
            load_monthly_csv(p, ["x"])

    def test_missing_column(self, tmp_path):
        p = write(tmp_path, "r.csv", "date,y\n2000-01,1\n")
        with pytest.raises(IngestError, match="lacks"):
            load_monthly_csv(p, ["x"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestError):
            load_monthly_csv(tmp_path / "nope.csv", ["x"])

    def test_span_trims_edges_but_not_holes(self, tmp_path):
        p = write(tmp_path, "r.csv", "date,x\n2000-01,\n2000-02,1\n2000-03,2\n2000-04,\n")
        start, (x,) = load_monthly_csv(p, ["x"]).span("x")
        assert start == MonthIndex(2000, 2) and list(x) == [1, 2]
        p = write(tmp_path, "h.csv", "date,x\n2000-01,1\n2000-02,\n2000-03,2\n")
        with pytest.raises(IngestError, match="missing"):
            load_monthly_csv(p, ["x"]).span("x")


class TestReturns:
    def test_price_returns(self):
        r = returns_from_prices(PriceSeries("p", MonthIndex(2000, 1), [100, 110, 99]))
        assert r.start == MonthIndex(2000, 2)
        np.testing.assert_allclose(r.values, [0.1, -0.1], rtol=1e-14)

    def test_drop_first(self):
        r = returns_from_prices(PriceSeries("p", MonthIndex(2000, 1), [100, 110, 99]), drop_first=True)
        assert r.start == MonthIndex(2000, 3) and len(r) == 1

    def test_total_return_uses_monthly_dividend(self):
        r = equity_total_returns("s", MonthIndex(1871, 1), [100.0, 100.0], [6.0, 6.0])
        assert r.values[0] == pytest.approx(0.005, rel=1e-14)
        assert r.start == MonthIndex(1871, 2)

    def test_monthly_cost(self):
        q = monthly_cost(RateSeries("tb", MonthIndex(1934, 1), [1.2, 2.4]), spread_bp_per_year=120)
        np.testing.assert_allclose(q.values, [0.002, 0.003], rtol=1e-14)


class TestBonds:
    @pytest.mark.parametrize("coupon, yld, n", [(4.0, 4.0, 119), (4.0, 3.0, 119), (8.0, 12.5, 60), (3.0, 0.0, 10)])
    def test_price_matches_cash_flow_sum(self, coupon, yld, n):
        assert par_bond_price(coupon, yld, n) == pytest.approx(bond_pv(coupon, yld, n), rel=1e-12)

    def test_par_at_own_yield(self):
        assert par_bond_price(5.0, 5.0, 120) == pytest.approx(100.0, rel=1e-13)

    def test_flat_yield_earns_coupon(self):
        r = bond_returns_from_gs10(RateSeries("g", MonthIndex(1871, 1), [6.0, 6.0, 6.0]))
        # one month's coupon plus the pull of a 119-month par bond (exactly par)
        np.testing.assert_allclose(r.values, 0.005, rtol=1e-12)

    def test_against_oracle(self):
        r = bond_returns_from_gs10(RateSeries("g", MonthIndex(1871, 1), [4.0, 3.0]))
        expected = (bond_pv(4.0, 3.0, 119) + 4.0 / 12 - 100) / 100
        assert r.values[0] == pytest.approx(expected, rel=1e-12)
        assert r.values[0] == pytest.approx(0.089, abs=2e-3)

    def test_rising_yields_lose(self):
        r = bond_returns_from_gs10(RateSeries("g", MonthIndex(1871, 1), [4.0, 5.0]))
        assert r.values[0] < 0

    def test_duration_method_is_first_order_close(self):
        ys = RateSeries("g", MonthIndex(1871, 1), [4.0, 4.05, 3.98, 4.02])
        a = bond_returns_from_gs10(ys, "par").values
        b = bond_returns_from_gs10(ys, "duration").values
        np.testing.assert_allclose(a, b, atol=2e-4)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            bond_returns_from_gs10(RateSeries("g", MonthIndex(1871, 1), [4.0, 4.0]), "zero")


class TestDataStore:
    def test_loads_every_series(self, synthetic_data):
        store = DataStore(synthetic_data)
        stocks, bonds = store.stocks(), store.bonds()
        assert stocks.start == MonthIndex(1871, 2)
        assert bonds.start == MonthIndex(1871, 2)
        assert stocks.end == MonthIndex(2025, 1)  # last two months lack dividends
        assert store.cost("tbill").start == MonthIndex(1934, 1)
        assert store.cost("effr").start == MonthIndex(1954, 7)
        assert store.etf("SPY").start == MonthIndex(1993, 3)

    def test_digest_mismatch(self, tmp_path, synthetic_data):
        root = tmp_path / "d"
        root.mkdir()
        (root / "tbill.csv").write_bytes((synthetic_data / "tbill.csv").read_bytes())
        (root / "MANIFEST.json").write_text(json.dumps({"files": {"tbill.csv": "0" * 64}}))
        with pytest.raises(IngestError, match="sha256"):
            DataStore(root).rate("tbill")
        assert DataStore(root, verify=False).rate("tbill").start == MonthIndex(1934, 1)

    def test_pin_then_verify(self, tmp_path, synthetic_data):
        root = tmp_path / "d"
        root.mkdir()
        (root / "tbill.csv").write_bytes((synthetic_data / "tbill.csv").read_bytes())
        files = DataStore(root).pin()
        assert files == {"tbill.csv": sha256_of(root / "tbill.csv")}
        assert len(DataStore(root).rate("tbill")) > 0
        with open(root / "tbill.csv", "a") as fh:
            fh.write("\n")
        with pytest.raises(IngestError):
            DataStore(root).rate("tbill")

    def test_missing_file_names_the_env_var(self, tmp_path):
        with pytest.raises(IngestError, match="DECUMULATION_DATA"):
            DataStore(tmp_path).stocks()

    def test_rate_with_no_finite_values(self):
        with pytest.raises(ModelError):
            RateSeries("x", MonthIndex(2000, 1), [np.nan])
