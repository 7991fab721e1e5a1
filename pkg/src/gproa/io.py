"""CSV export with a reproducibility header.

Every file begins with one ``#`` comment line naming the tool version, the
sha256 of the input configuration bytes and the seed. Numbers are written
with 15 significant digits; files are UTF-8 with LF line endings.
"""
import csv
import hashlib
from pathlib import Path

import numpy as np

from . import __version__


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v == 0.0:
        v = 0.0   # drop the sign of negative zero
    return format(v, ".15g")


def digest(*blobs: bytes) -> str:
    h = hashlib.sha256()
    for b in blobs:
        h.update(hashlib.sha256(b).digest())
    return h.hexdigest()


def header_line(config_hash: str, seed: int) -> str:
    return f"# gproa {__version__} config_sha256={config_hash} seed={seed}"


def _write(path, header, columns, rows):
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Return (header_line, columns, rows as list of str lists)."""
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        r = csv.reader(fh)
        columns = next(r)
        return header, columns, list(r)


def write_trajectory(path, header, traj, labels=None):
    n = traj.samples.shape[1]
    labels = list(labels) if labels else [f"x_{i + 1}" for i in range(n)]
    t = traj.times
    return _write(path, header, ["t"] + labels,
                  ([t[k]] + list(traj.samples[k]) for k in range(len(t))))


def write_roa(path, header, est):
    coords = est.coords
    two = coords.shape[1] == 2

    def rows():
        for k in range(coords.shape[0]):
            yield (est.step, coords[k, 0], coords[k, 1] if two else 0.0,
                   est.mu[k], est.sigma[k], bool(est.member[k]))

    return _write(path, header, ["step", "x_axis", "y_axis", "mu", "sigma", "member"], rows())


def write_log(path, header, records, n, timing=False):
    def rows():
        for r in records:
            yield ([r.step] + list(r.point) + [r.accepted, r.v_hat,
                                                r.wall_ms if timing else None])

    cols = ["step"] + [f"x_{i + 1}" for i in range(n)] + ["accepted", "v_hat", "wall_ms"]
    return _write(path, header, cols, rows())
