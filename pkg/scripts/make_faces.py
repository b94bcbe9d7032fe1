"""Generate the synthetic three-face image set shipped with the package.

Each face is a smooth cartoon (head plus two of three feature groups)
drawn as a real, non-negative amplitude image. The shared head brightness sets the pairwise
fidelity; it is tuned by bisection so that every pair lands at 0.34 after
8-bit quantization. Run from the repository root:

    python3 scripts/make_faces.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.optimize import brentq

SIZE = 32
TARGET = 0.34
OUT = Path(__file__).resolve().parents[1] / "src" / "mplc_usd" / "data" / "faces"

# Three spatially separate feature groups with equal energy. Face k carries
# groups k and k+1 (mod 3), so every pair of faces shares exactly one group
# and the pairwise overlaps are equal by construction.


def _parts() -> list[np.ndarray]:
    y, x = np.mgrid[:SIZE, :SIZE] - (SIZE - 1) / 2
    eyes = ((x - 5.5) ** 2 + (y + 4) ** 2 <= 5) | ((x + 5.5) ** 2 + (y + 4) ** 2 <= 5)
    mouth = (np.abs(np.hypot(x, y + 1) - 9) < 1.1) & (y > 4) & (np.abs(x) < 7)
    brows = ((np.abs(y + 9) < 1) & (np.abs(np.abs(x) - 5.5) < 3)) | ((np.abs(x) < 1) & (y > -1) & (y < 3))
    out = []
    for m in (eyes, mouth, brows):
        p = gaussian_filter(m.astype(float), 0.8)
        out.append(p / np.linalg.norm(p))
    return out


def _head() -> np.ndarray:
    y, x = np.mgrid[:SIZE, :SIZE] - (SIZE - 1) / 2
    h = gaussian_filter(((x / 12) ** 2 + (y / 14.5) ** 2 <= 1).astype(float), 0.8)
    return h / np.linalg.norm(h)


def render(head_level: float) -> list[np.ndarray]:
    head, parts = _head(), _parts()
    out = []
    for k in range(3):
        img = head_level * head + parts[k] + parts[(k + 1) % 3]
        out.append(np.round(255 * img / img.max()).astype(np.uint8))
    return out


def fidelities(imgs) -> np.ndarray:
    v = np.stack([i.astype(float).ravel() for i in imgs])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return (v @ v.T) ** 2


def mean_offdiag(level: float) -> float:
    f = fidelities(render(level))
    return float(f[~np.eye(len(f), dtype=bool)].mean())


def write_pgm8(path: Path, img: np.ndarray) -> None:
    h, w = img.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())


def main() -> int:
    level = brentq(lambda s: mean_offdiag(s) - TARGET, 0.0, 5.0, xtol=1e-6)
    imgs = render(level)
    OUT.mkdir(parents=True, exist_ok=True)
    for k, img in enumerate(imgs):
        write_pgm8(OUT / f"face_{k}.pgm", img)
    f = fidelities(imgs)
    print(f"head level {level:.4f}")
    print(np.array2string(f, precision=4))
    return 0


if __name__ == "__main__":
    sys.exit(main())
