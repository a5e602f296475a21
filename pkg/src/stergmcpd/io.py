"""Series file formats, the returns-to-networks transform and result emission.

Both series formats start with a header line ``# n=<n> T=<T> directed=<bool>``
and may carry ``# attributes=<label>,<label>,...``. In the dense format the
body is T blocks of n rows of 0/1 tokens (blank lines are ignored). In the
edgelist format every body line is ``t i j`` with 1-based time and node
labels; absent dyads are zero.
"""
from __future__ import annotations

import csv
import json
import math
import re
import warnings
from pathlib import Path

import numpy as np

from .detect import DetectionResult
from .evaluate import all_metrics, format_extended
from .network import NetworkError, NetworkSeries, NodalAttributes

FORMATS = ("dense", "edgelist")


class FormatError(NetworkError):
    """A series file that cannot be parsed."""

    def __init__(self, path, lineno: int | None, msg: str):
        where = f"{path}:{lineno}" if lineno is not None else str(path)
        super().__init__(f"{where}: {msg}")
        self.lineno = lineno


_HEADER_KV = re.compile(r"(\w+)\s*=\s*(\S+)")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_lines(path) -> tuple[dict, list[str] | None, list[tuple[int, str]]]:
    header: dict = {}
    labels = None
    body = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                text = line[1:].strip()
                if text.startswith("attributes="):
                    labels = [v.strip() for v in text[len("attributes="):].split(",")]
                    continue
                for key, val in _HEADER_KV.findall(text):
                    header[key] = (val, lineno)
                continue
            body.append((lineno, line))
    return header, labels, body


def _header_fields(path, header) -> tuple[int, int, bool]:
    try:
        n = int(header["n"][0])
        T = int(header["T"][0])
        directed = _parse_bool(header.get("directed", ("true", 0))[0])
    except KeyError as exc:
        raise FormatError(path, None, f"header is missing {exc.args[0]}=") from None
    except ValueError as exc:
        raise FormatError(path, None, f"bad header value: {exc}") from None
    if n < 2 or T < 2:
        raise FormatError(path, None, f"need n >= 2 and T >= 2, got n={n} T={T}")
    return n, T, directed


def _parse_dense(path, n, T, body) -> np.ndarray:
    if len(body) != n * T:
        raise FormatError(path, None, f"expected {n * T} matrix rows, found {len(body)}")
    adj = np.zeros((T, n, n), dtype=np.uint8)
    for k, (lineno, line) in enumerate(body):
        tokens = line.split()
        if len(tokens) != n:
            raise FormatError(path, lineno, f"expected {n} entries, found {len(tokens)}")
        if any(tok not in ("0", "1") for tok in tokens):
            raise FormatError(path, lineno, "entries must be 0 or 1")
        t, i = divmod(k, n)
        adj[t, i] = [int(tok) for tok in tokens]
        if adj[t, i, i]:
            raise FormatError(path, lineno, f"self-loop at node {i + 1}, time {t + 1}")
    return adj


def _parse_edgelist(path, n, T, directed, body) -> np.ndarray:
    adj = np.zeros((T, n, n), dtype=np.uint8)
    for lineno, line in body:
        tokens = line.split()
        if len(tokens) != 3:
            raise FormatError(path, lineno, "expected 't i j'")
        try:
            t, i, j = (int(tok) for tok in tokens)
        except ValueError:
            raise FormatError(path, lineno, "entries must be integers") from None
        if not 1 <= t <= T:
            raise FormatError(path, lineno, f"time {t} outside 1..{T}")
        if not (1 <= i <= n and 1 <= j <= n):
            raise FormatError(path, lineno, f"node label outside 1..{n}")
        if i == j:
            raise FormatError(path, lineno, f"self-loop at node {i}")
        adj[t - 1, i - 1, j - 1] = 1
        if not directed:
            adj[t - 1, j - 1, i - 1] = 1
    return adj


def ingest_series(path, format: str = "dense") -> NetworkSeries:
    """Read a network series from ``path`` in the dense or edgelist format."""
    if format not in FORMATS:
        raise ValueError(f"unknown series format {format!r}")
    header, labels, body = _read_lines(path)
    n, T, directed = _header_fields(path, header)
    if format == "dense":
        adj = _parse_dense(path, n, T, body)
    else:
        adj = _parse_edgelist(path, n, T, directed, body)
    attrs = None
    if labels is not None:
        if len(labels) != n:
            raise FormatError(path, None, f"{len(labels)} attribute labels for {n} nodes")
        attrs = NodalAttributes(tuple(labels))
    try:
        return NetworkSeries(adj, directed=directed, attributes=attrs)
    except NetworkError as exc:
        raise FormatError(path, None, str(exc)) from None


def write_series(series: NetworkSeries, path, format: str = "dense") -> None:
    if format not in FORMATS:
        raise ValueError(f"unknown series format {format!r}")
    lines = [f"# n={series.n} T={series.T} directed={'true' if series.directed else 'false'}"]
    if series.attributes is not None:
        lines.append("# attributes=" + ",".join(str(v) for v in series.attributes.values))
    adj = series.adjacency
    if format == "dense":
        for t in range(series.T):
            lines.extend(" ".join(str(int(v)) for v in row) for row in adj[t])
            lines.append("")
    else:
        for t in range(series.T):
            ii, jj = np.nonzero(adj[t])
            for i, j in zip(ii, jj):
                if series.directed or i < j:
                    lines.append(f"{t + 1} {i + 1} {j + 1}")
    Path(path).write_text("\n".join(lines).rstrip("\n") + "\n", encoding="utf-8")


# --- returns data -------------------------------------------------------------


def read_returns(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a CSV of returns, one row per day and one column per series.

    A first row that does not parse as numbers is taken as column names.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(path, None, "no data rows")
    names = None
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    width = len(rows[0]) if rows else 0
    data = []
    for k, row in enumerate(rows, start=2 if names else 1):
        if len(row) != width:
            raise FormatError(path, k, f"expected {width} columns, found {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError:
            raise FormatError(path, k, "non-numeric entry") from None
    return np.asarray(data, dtype=np.float64), names


def returns_to_networks(returns, window: int = 4) -> NetworkSeries:
    """One undirected network per window end: an edge where correlation < 0.

    Windows of ``window`` consecutive rows slide by one, so the series has
    ``T_raw - window + 1`` snapshots. A column with zero variance inside a
    window has undefined correlations; its dyads get no edge.
    """
    r = np.asarray(returns, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError("returns must be a (days, series) matrix")
    T_raw, m = r.shape
    if window < 2:
        raise ValueError("window must be at least 2")
    if m < 2:
        raise ValueError("need at least two return series")
    if T_raw < window:
        raise ValueError(f"need at least {window} rows, got {T_raw}")
    if not np.isfinite(r).all():
        raise ValueError("returns contain non-finite values")
    T = T_raw - window + 1
    adj = np.zeros((T, m, m), dtype=np.uint8)
    n_flat = 0
    for t in range(T):
        w = r[t : t + window]
        c = w - w.mean(axis=0)
        sd = np.sqrt((c * c).sum(axis=0))
        flat = sd == 0
        n_flat += int(flat.sum())
        sd = np.where(flat, 1.0, sd)
        corr = (c.T @ c) / np.outer(sd, sd)
        neg = corr < 0
        neg[flat, :] = False
        neg[:, flat] = False
        np.fill_diagonal(neg, False)
        adj[t] = neg
    if n_flat:
        warnings.warn(
            f"{n_flat} window columns had zero variance; their dyads were left empty",
            RuntimeWarning,
            stacklevel=2,
        )
    return NetworkSeries(adj, directed=False)


# --- result emission ----------------------------------------------------------


def _num(x):
    # JSON has no infinities, so extended reals become strings
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return format_extended(x) if math.isinf(x) else "nan"
    return float(format(x, ".10g"))


def _fmt(x) -> str:
    x = float(x)
    return "nan" if math.isnan(x) else format_extended(x)


def result_summary(result: DetectionResult) -> dict:
    best = result.best
    return {
        "T": result.T,
        "spec": str(result.spec) if result.spec is not None else None,
        "selected_lambda": _num(best.lam),
        "K": result.K,
        "change_points": list(result.change_points),
        "notes": list(result.notes),
        "fits": [
            {
                "lambda": _num(f.lam),
                "K": len(f.change_points),
                "change_points": list(f.change_points),
                "raw_points": list(f.raw_points),
                "threshold": _num(f.threshold),
                "loglik": _num(f.loglik),
                "bic": _num(f.bic),
                "converged": bool(f.converged),
                "iterations": int(f.n_iter),
                "degenerate": bool(f.degenerate),
                "failed": bool(f.failed),
                "message": f.message,
            }
            for f in result.fits
        ],
    }


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_results(result: DetectionResult, outdir, truth=None) -> list[Path]:
    """Write summary.json, delta_zeta.csv and, given ``truth``, metrics.csv.

    All numbers carry 10 significant digits so reruns are byte-identical.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    summary = out / "summary.json"
    summary.write_text(json.dumps(result_summary(result), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(summary)

    header = ["index", "time"]
    for f in result.fits:
        lam = format_extended(f.lam)
        header += [f"delta_zeta[lambda={lam}]", f"threshold[lambda={lam}]"]
    rows = []
    for i in range(result.T - 2):
        row = [str(i + 1), str(i + 3)]
        for f in result.fits:
            row += [_fmt(f.delta_zeta[i]), _fmt(f.threshold)]
        rows.append(row)
    dz = out / "delta_zeta.csv"
    write_csv(dz, header, rows)
    written.append(dz)

    if truth is not None:
        m = all_metrics(result.change_points, truth, result.T)
        path = out / "metrics.csv"
        write_csv(path, list(m), [[format_extended(v) for v in m.values()]])
        written.append(path)
    return written
