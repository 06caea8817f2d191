import numpy as np
import pytest

from pso_forecast.pipeline import FeatureMatrix

UCI_HEADER_LINE = "No,year,month,day,hour,pm2.5,DEWP,TEMP,PRES,cbwd,Iws,Is,Ir"


def numeric_grad(f, x, eps=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + eps
        up = f()
        x[idx] = old - eps
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2 * eps)
    return g


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def synthetic_matrix(n, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0, 100, size=(n, 7))
    stamps = np.datetime64("2012-01-01T00", "h") + np.arange(n).astype("timedelta64[h]")
    return FeatureMatrix(values, stamps)


def write_uci(path, rows):
    path.write_text(UCI_HEADER_LINE + "\n" + "\n".join(rows) + "\n")
    return path


@pytest.fixture
def tiny_csv(tmp_path):
    return write_uci(tmp_path / "tiny.csv", [
        "1,2010,1,1,0,NA,-21,-11,1021,NW,1.79,0,0",
        "2,2010,1,1,1,129,-16,-4,1020,SE,1.79,0,0",
        "3,2010,1,1,2,148,-15,-4,1020,SE,2.68,0,1",
    ])


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split()[0]), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
