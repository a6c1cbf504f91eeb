"""CSV / JSON / SVG writers. Output is deterministic for fixed inputs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _fmt(v: float) -> str:
    return repr(float(v))


def write_matrix_csv(path, A) -> Path:
    """Coordinate format: row, col, value (nonzeros only)."""
    path = Path(path)
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for i in order:
            if C.data[i] != 0:
                w.writerow([int(C.row[i]), int(C.col[i]), _fmt(C.data[i])])
    return path


def write_eigen_csv(path, decomp) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lambda", "residual"])
        for k, (lam, r) in enumerate(zip(decomp.eigenvalues, decomp.residuals), start=1):
            w.writerow([k, _fmt(lam), _fmt(r)])
    return path


def write_eigenvectors_csv(path, decomp, count: int | None = None) -> Path:
    path = Path(path)
    X = decomp.eigenvectors[:, : count or decomp.count]
    nodes = decomp.system.mesh.nodes
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id"] + [f"x{i}" for i in range(nodes.shape[1])] + [f"e{k + 1}" for k in range(X.shape[1])])
        for j in range(X.shape[0]):
            w.writerow([j] + [_fmt(c) for c in nodes[j]] + [_fmt(v) for v in X[j]])
    return path


def write_trajectory_csv(path, traj) -> Path:
    """Rows (t, node_id, value, component); boundary rows repeat the trace."""
    path = Path(path)
    mesh = traj.system.mesh
    bn = mesh.boundary_nodes
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node_id", "value", "component"])
        for t, u in zip(traj.times, traj.values):
            ts = _fmt(t)
            for j in range(u.size):
                w.writerow([ts, j, _fmt(u[j]), "interior"])
            for j in bn:
                w.writerow([ts, int(j), _fmt(u[j]), "boundary"])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def svg_polylines(path, series, title: str = "", xlabel: str = "", ylabel: str = "",
                  width: int = 640, height: int = 400, logx: bool = False) -> Path:
    """Minimal line plot. ``series`` is a list of (label, x, y)."""
    path = Path(path)
    pad = 50
    xs = [np.log10(np.asarray(x, float)) if logx else np.asarray(x, float) for _, x, _ in series]
    ys = [np.asarray(y, float) for _, _, y in series]
    xmin = min(x.min() for x in xs)
    xmax = max(x.max() for x in xs)
    ymin = min(y.min() for y in ys)
    ymax = max(y.max() for y in ys)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    sx = lambda v: pad + (v - xmin) / (xmax - xmin) * (width - 2 * pad)  # noqa: E731
    sy = lambda v: height - pad - (v - ymin) / (ymax - ymin) * (height - 2 * pad)  # noqa: E731
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})">{ylabel}</text>',
        f'<text x="{pad}" y="{height - pad + 15}" font-size="10">{xmin:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="end">{xmax:.3g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{ymin:.3g}</text>',
        f'<text x="{pad - 4}" y="{pad + 10}" font-size="10" text-anchor="end">{ymax:.3g}</text>',
    ]
    for i, ((label, _, _), x, y) in enumerate(zip(series, xs, ys)):
        c = colors[i % len(colors)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{width - pad - 4}" y="{pad + 14 * (i + 1)}" font-size="10" text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path
