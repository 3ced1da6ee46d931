import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_DATA = Path(__file__).resolve().parents[1] / "data"

ETF_STARTS = {
    "SPY": "1993-01", "AGG": "2003-09", "SHV": "2007-01", "SHY": "2002-07",
    "IEI": "2007-01", "IEF": "2002-07", "TLH": "2007-01", "TLT": "2002-07",
}


def _months(start_year, start_month, end_year, end_month):
    out = []
    y, m = start_year, start_month
    while (y, m) <= (end_year, end_month):
        out.append((y, m))
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def write_synthetic_data(root: Path, seed: int = 7) -> Path:
    """A full-shape stand-in for the real data directory (random, not historical)."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    months = _months(1871, 1, 2025, 3)
    n = len(months)
    price = 4.44 * np.exp(np.cumsum(rng.normal(0.0042, 0.04, n)))
    div = 0.045 * price * np.exp(rng.normal(0, 0.02, n))
    gs10 = np.clip(4.0 + np.cumsum(rng.normal(0, 0.12, n)) * 0.3, 1.0, 14.0)
    cpi = 12.0 * np.exp(np.cumsum(rng.normal(0.0025, 0.005, n)))
    with open(root / "shiller.csv", "w") as fh:
        fh.write("date,sp_price,dividend,gs10_yield,cpi\n")
        for k, (y, m) in enumerate(months):
            # trailing months without dividends, as in the real spreadsheet
            d = "" if k >= n - 2 else f"{div[k]:.4f}"
            fh.write(f"{y}.{m:02d},{price[k]:.4f},{d},{gs10[k]:.3f},{cpi[k]:.3f}\n")
    for name, start, level in (("tbill", (1934, 1), 3.3), ("effr", (1954, 7), 4.2)):
        ms = _months(*start, 2025, 3)
        rates = np.clip(level + np.cumsum(rng.normal(0, 0.15, len(ms))) * 0.2, 0.05, 15.0)
        with open(root / f"{name}.csv", "w") as fh:
            fh.write("date,annual_rate_percent\n")
            for (y, m), r in zip(ms, rates):
                fh.write(f"{y}-{m:02d},{r:.2f}\n")
    (root / "etf").mkdir(exist_ok=True)
    for sym, start in ETF_STARTS.items():
        y0, m0 = map(int, start.split("-"))
        ms = _months(y0, m0, 2024, 5)
        vol = 0.045 if sym == "SPY" else 0.012
        p = 50.0 * np.exp(np.cumsum(rng.normal(0.004, vol, len(ms))))
        with open(root / "etf" / f"{sym}.csv", "w") as fh:
            fh.write("date,adjusted_close\n")
            for (y, m), v in zip(ms, p):
                fh.write(f"{y}-{m:02d}-01,{v:.6f}\n")
    return root


@pytest.fixture(scope="session")
def synthetic_data(tmp_path_factory):
    return write_synthetic_data(tmp_path_factory.mktemp("data"))


@pytest.fixture(scope="session")
def real_data_dir():
    return Path(os.environ.get("DECUMULATION_DATA", REPO_DATA))


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
