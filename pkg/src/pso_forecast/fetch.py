"""Download and cache the full UCI Beijing PM2.5 CSV."""

from __future__ import annotations

import hashlib
import io
import logging
import urllib.error
import urllib.request
import zipfile
from pathlib import Path

from .errors import FetchError

log = logging.getLogger(__name__)

CSV_NAME = "PRSA_data_2010.1.1-2014.12.31.csv"
UCI_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/00381/" + CSV_NAME
# ``url#member`` means: download a zip archive and extract ``member``.
DEFAULT_SOURCES = (
    UCI_URL,
    "https://archive.ics.uci.edu/static/public/381/beijing+pm2+5+data.zip#" + CSV_NAME,
    # greykite ships an unmodified copy of the UCI file inside its wheel
    "https://files.pythonhosted.org/packages/f9/a4/e3b33d670170b6fae19f8da67c45ac21fed00b32e41a8ec147a3973d1dcd/"
    "greykite-1.1.0-py2.py3-none-any.whl#greykite/data/hourly/hourly_beijing_pm.csv",
)
KNOWN_SHA256 = "4127f868775e31b3956522adc0ec75af8937dde6a3896e8beed3a376c6d27f1c"


def default_cache_dir() -> Path:
    return Path.home() / ".cache" / "pso_forecast"


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _download(url, timeout):
    base, _, member = url.partition("#")
    with urllib.request.urlopen(base, timeout=timeout) as resp:
        payload = resp.read()
    if member:
        try:
            with zipfile.ZipFile(io.BytesIO(payload)) as zf:
                payload = zf.read(member)
        except (zipfile.BadZipFile, KeyError) as exc:
            raise FetchError(f"{base}: cannot extract {member!r}: {exc}") from None
    # normalize line endings so every source yields the same bytes
    return payload.replace(b"\r\n", b"\n")


def fetch_dataset(url: str | None = None, dest=None, timeout: float = 60.0) -> Path:
    """Return a local path to the dataset, downloading it on the first call.

    ``dest`` is a file path or a directory (default: ``~/.cache/pso_forecast``).
    An existing file is reused without touching the network. With ``url``
    only that source is tried; otherwise the known mirrors in turn. The
    SHA-256 of the stored file is written next to it; a hash different from
    the known one is logged as a warning.
    """
    dest = Path(dest) if dest is not None else default_cache_dir()
    if dest.suffix.lower() != ".csv":
        dest = dest / CSV_NAME
    if dest.exists():
        log.info("using cached dataset %s", dest)
        return dest

    sources = (url,) if url else DEFAULT_SOURCES
    errors = []
    for src in sources:
        try:
            log.info("downloading %s", src)
            payload = _download(src, timeout)
            break
        except (urllib.error.URLError, OSError, FetchError, ValueError) as exc:
            errors.append(f"{src}: {exc}")
    else:
        raise FetchError("could not download the dataset; check network access and retry, or place "
                         f"the CSV at {dest} manually.\n  " + "\n  ".join(errors))

    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_suffix(".part")
    tmp.write_bytes(payload)
    tmp.replace(dest)
    digest = sha256_of(dest)
    dest.with_name(dest.name + ".sha256").write_text(f"{digest}  {dest.name}\n")
    if digest != KNOWN_SHA256:
        log.warning("checksum %s differs from the known %s", digest, KNOWN_SHA256)
    report_counts(dest)
    return dest


def report_counts(path) -> tuple[int, int]:
    """Log record/missing counts of ``path`` next to the reference counts."""
    from .pipeline import count_discrepancies, load_csv

    records = load_csv(path)
    n_missing = sum(r.pm25 is None for r in records)
    log.info("%s: %d records, %d missing pm2.5", path, len(records), n_missing)
    for note in count_discrepancies(len(records), n_missing):
        log.warning(note)
    return len(records), n_missing
