"""File formats: CSV tables, binary PGM frames, JSON reports and run manifests."""

from __future__ import annotations

import csv
import json
import platform
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def write_csv(path, header, rows) -> Path:
    """Header row, '.' decimals, shortest round-trip float text, LF line ends."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_field_csv(path, values: np.ndarray) -> Path:
    """One row per grid point: multi-index columns then the value."""
    values = np.asarray(values)
    names = ["i", "j", "k"][: values.ndim]
    rows = ((*idx, values[idx]) for idx in np.ndindex(values.shape))
    return write_csv(path, names + ["value"], rows)


ENVELOPE_HEADER = ["t", "min_u", "max_u", "min_v", "max_v", "grad_u_sup", "grad_v_sup"]


def write_envelope_csv(path, envelope: np.ndarray) -> Path:
    return write_csv(path, ENVELOPE_HEADER[: np.shape(envelope)[1]], envelope)


def write_pgm(path, values: np.ndarray, lo: float | None = None, hi: float | None = None) -> Path:
    """Binary P5, maxval 255. The comment line records the value range mapped to 0..255."""
    a = np.atleast_2d(np.asarray(values, dtype=float))
    lo = float(a.min()) if lo is None else lo
    hi = float(a.max()) if hi is None else hi
    span = hi - lo if hi > lo else 1.0
    px = np.clip(np.rint((a - lo) / span * 255.0), 0, 255).astype(np.uint8)
    rows, cols = px.shape
    head = f"P5\n# scale {lo!r} {hi!r}\n{cols} {rows}\n255\n".encode("ascii")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(head + px.tobytes())
    return path


def read_pgm(path):
    """Returns (pixels, (lo, hi))."""
    data = Path(path).read_bytes()
    lines, pos = [], 0
    while len(lines) < 4:
        end = data.index(b"\n", pos)
        lines.append(data[pos:end].decode("ascii"))
        pos = end + 1
    if lines[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    lo, hi = (float(x) for x in lines[1].split()[2:4])
    cols, rows = (int(x) for x in lines[2].split())
    px = np.frombuffer(data[pos:pos + rows * cols], dtype=np.uint8).reshape(rows, cols)
    return px, (lo, hi)


def frame_name(prefix: str, index: int, ext: str = "pgm") -> str:
    return f"{prefix}_{index:06d}.{ext}"


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def versions() -> dict:
    import scipy
    import yaml

    from bzmild import __version__
    return {"bzmild": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pyyaml": yaml.__version__}


def write_manifest(out_dir, command: str, config: dict, seed: int, outputs: list) -> Path:
    """Enough to rerun: full resolved config, seed, versions. No timestamps, so reruns are byte-equal."""
    out_dir = Path(out_dir)
    return write_json(out_dir / "manifest.json", {
        "command": command, "seed": seed, "config": config, "versions": versions(),
        "outputs": sorted(str(Path(o).relative_to(out_dir)) for o in outputs),
    })
