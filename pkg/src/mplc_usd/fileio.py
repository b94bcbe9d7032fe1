"""On-disk formats: phase masks, manifests, reports and grayscale images."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .mplc import MPLCSystem, wrap_phase
from .optics import Field, Grid, make_grid

PGM_MAX = 65535


class MaskFileError(OSError):
    """A mask, manifest or image file is missing or malformed."""

    def __init__(self, path, msg):
        super().__init__(f"{path}: {msg}")
        self.path = Path(path)


# -- masks -------------------------------------------------------------------


def write_mask_text(path, mask: np.ndarray) -> None:
    """Phases in radians, one row per line, space-separated, shortest
    round-trip float formatting."""
    with open(path, "w") as fh:
        for row in np.asarray(mask, dtype=float):
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_mask_text(path) -> np.ndarray:
    path = Path(path)
    try:
        rows = [line.split() for line in path.read_text().splitlines() if line.strip()]
        a = np.array(rows, dtype=float)
    except (OSError, ValueError) as exc:
        raise MaskFileError(path, f"cannot read phase mask ({exc})") from exc
    if a.ndim != 2 or not np.all(np.isfinite(a)):
        raise MaskFileError(path, "phase mask is not a finite rectangular matrix")
    return a


def phase_to_pgm_levels(mask: np.ndarray) -> np.ndarray:
    """Linear map of (-pi, pi] onto 0..65535."""
    u = (wrap_phase(mask) + np.pi) / (2 * np.pi)
    return np.clip(np.rint(u * PGM_MAX), 0, PGM_MAX).astype(np.uint16)


def pgm_levels_to_phase(levels: np.ndarray) -> np.ndarray:
    return wrap_phase(levels.astype(float) / PGM_MAX * 2 * np.pi - np.pi)


def write_pgm16(path, levels: np.ndarray) -> None:
    levels = np.asarray(levels, dtype=np.uint16)
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(levels.astype(">u2").tobytes())


def read_pgm(path) -> np.ndarray:
    """Binary PGM (8- or 16-bit) as an integer array; returns ``(levels, maxval)``."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MaskFileError(path, f"cannot read ({exc})") from exc
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MaskFileError(path, "truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise MaskFileError(path, "not a binary PGM (P5) file")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MaskFileError(path, "malformed PGM header") from exc
    if w <= 0 or h <= 0 or not 0 < maxval <= PGM_MAX:
        raise MaskFileError(path, "invalid PGM dimensions or maxval")
    dtype = ">u2" if maxval > 255 else "u1"
    n = w * h * np.dtype(dtype).itemsize
    body = data[pos : pos + n]
    if len(body) != n:
        raise MaskFileError(path, f"PGM payload has {len(body)} bytes, expected {n}")
    levels = np.frombuffer(body, dtype=dtype).reshape(h, w).astype(np.int64)
    if np.any(levels > maxval):
        raise MaskFileError(path, "PGM sample exceeds maxval")
    return levels, maxval


def read_mask_pgm(path) -> np.ndarray:
    levels, maxval = read_pgm(path)
    if maxval != PGM_MAX:
        raise MaskFileError(path, f"phase masks must be 16-bit PGM (maxval {PGM_MAX})")
    return pgm_levels_to_phase(levels)


def save_system(system: MPLCSystem, out_dir, extra: dict | None = None, prefix: str = "mask") -> dict:
    """Write every mask as text and PGM plus ``manifest.json``; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for p, m in enumerate(system.masks):
        txt = f"{prefix}_{p:02d}.txt"
        pgm = f"{prefix}_{p:02d}.pgm"
        write_mask_text(out_dir / txt, m)
        write_pgm16(out_dir / pgm, phase_to_pgm_levels(m))
        files.append({"text": txt, "pgm": pgm})
    manifest = {
        "n_planes": system.n_planes,
        "plane_spacing": system.plane_spacing,
        "lead_in": system.lead_in,
        "lead_out": system.lead_out,
        "guard": system.guard,
        "grid": system.grid.to_dict(),
        "masks": files,
    }
    if extra:
        manifest.update(extra)
    write_json(out_dir / "manifest.json", manifest)
    return manifest


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        return json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise MaskFileError(path, f"cannot read manifest ({exc})") from exc


def load_system(path, mask_format: str = "text") -> tuple[MPLCSystem, dict]:
    """Rebuild a system from a manifest (file or run directory)."""
    path = Path(path)
    root = path if path.is_dir() else path.parent
    man = load_manifest(path)
    try:
        g = man["grid"]
        grid = make_grid(g["nx"], g["ny"], g["pitch"], g["wavelength"])
        masks = []
        for entry in man["masks"]:
            f = root / entry["text" if mask_format == "text" else "pgm"]
            m = read_mask_text(f) if mask_format == "text" else read_mask_pgm(f)
            if m.shape != grid.shape:
                raise MaskFileError(f, f"mask shape {m.shape} does not match grid {grid.shape}")
            masks.append(m)
        system = MPLCSystem(
            grid,
            man["n_planes"],
            man["plane_spacing"],
            man["lead_in"],
            man["lead_out"],
            masks=np.stack(masks),
            guard=man.get("guard", 1),
        )
    except KeyError as exc:
        raise MaskFileError(root / "manifest.json", f"missing key {exc}") from exc
    return system, man


# -- reports -----------------------------------------------------------------


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_matrix_csv(path, m, header=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in np.asarray(m):
            w.writerow([repr(float(v)) for v in row])


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


# -- images ------------------------------------------------------------------


def read_image(path) -> np.ndarray:
    """Grayscale PGM/PNG as floats in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        levels, maxval = read_pgm(path)
        return levels.astype(float) / maxval
    try:
        from PIL import Image

        with Image.open(path) as im:
            a = np.asarray(im)
            if a.ndim == 3:
                a = np.asarray(im.convert("L"))
    except Exception as exc:
        raise MaskFileError(path, f"cannot read image ({exc})") from exc
    maxval = 65535.0 if a.dtype == np.uint16 or a.max() > 255 else 255.0
    return a.astype(float) / maxval


def image_field(img: np.ndarray, grid: Grid, pixels_are: str = "amplitude", scale: int = 1) -> Field:
    """Embed an image at the grid center as a real, non-negative field.

    ``pixels_are="intensity"`` takes the square root first. Each image pixel
    covers ``scale x scale`` grid pixels. The result is normalized.
    """
    if pixels_are not in ("amplitude", "intensity"):
        raise ValueError(f"pixels_are must be 'amplitude' or 'intensity', got {pixels_are!r}")
    a = np.sqrt(np.clip(img, 0, None)) if pixels_are == "intensity" else np.clip(img, 0, None)
    if scale > 1:
        a = np.kron(a, np.ones((scale, scale)))
    h, w = a.shape
    if h > grid.ny or w > grid.nx:
        raise ValueError(f"image {w}x{h} does not fit the {grid.nx}x{grid.ny} grid")
    amp = np.zeros(grid.shape)
    y0 = grid.ny // 2 - h // 2
    x0 = grid.nx // 2 - w // 2
    amp[y0 : y0 + h, x0 : x0 + w] = a
    return Field(grid, amp).normalized()
