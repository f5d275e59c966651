"""Run manifests and the plain-text/binary output formats.

Every output file embeds the manifest hash; the hash covers the
command, inputs and all numeric parameters but not the timestamp, so
identical runs produce byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import time
from typing import Dict, Iterable, Sequence

import numpy as np

from . import __version__


def build_manifest(command: str, params: Dict, seed=None, germ_source=None) -> Dict:
    manifest = {
        "tool": "petallab",
        "version": __version__,
        "command": command,
        "germ_source": germ_source,
        "seed": seed,
        "params": params,
    }
    manifest["hash"] = manifest_hash(manifest)
    manifest["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return manifest


def manifest_hash(manifest: Dict) -> str:
    core = {k: v for k, v in manifest.items() if k not in ("hash", "timestamp")}
    blob = json.dumps(core, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(path, manifest: Dict):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, default=str)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], mhash: str):
    with open(path, "w") as fh:
        fh.write(f"# manifest {mhash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_orbit_csv(path, trace, mhash: str):
    """The orbit record: j, coordinates, z = (x^m y^n)^d and membership flags."""
    n = trace.steps
    z = trace.z if trace.z is not None else np.zeros(n + 1, complex)
    in_u = trace.in_U if trace.in_U is not None else np.zeros(n + 1, bool)
    in_d = trace.in_D if trace.in_D is not None else np.zeros(n + 1, bool)
    rows = (
        (j, trace.xs[j].real, trace.xs[j].imag, trace.ys[j].real, trace.ys[j].imag,
         z[j].real, z[j].imag, int(in_u[j]), int(in_d[j]))
        for j in range(n + 1)
    )
    write_csv(path, ["j", "re_x", "im_x", "re_y", "im_y", "re_z", "im_z",
                     "in_Uk", "in_Dk"], rows, mhash)


def write_pgm(path, data: np.ndarray, mhash: str, maxval: int = 255):
    """Binary (P5) grayscale raster with the manifest hash as a comment."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    arr = np.clip(arr, 0, maxval).astype(np.uint8 if maxval < 256 else ">u2")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n# manifest {mhash}\n{w} {h}\n{maxval}\n".encode())
        fh.write(arr.tobytes())


def scale_escape_times(times: np.ndarray, bounded_value: int = 255,
                       fixed_value: int = 0) -> np.ndarray:
    """Log-scale escape steps to 1..254; bounded cells map to 255 and
    fixed-set cells to 0."""
    out = np.full(times.shape, bounded_value, dtype=np.uint8)
    esc = times >= 0
    if np.any(esc):
        t = times[esc].astype(float)
        top = max(float(t.max()), 1.0)
        out[esc] = (1.0 + 253.0 * np.log1p(t) / np.log1p(top)).astype(np.uint8)
    out[times == -2] = fixed_value
    return out


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=str)
