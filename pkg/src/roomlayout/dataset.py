"""On-disk synthetic datasets: a JSON manifest pointing at map containers,
ground-truth layouts and optional grayscale photos."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import EmptyDataset, FormatError, LayoutError
from .featuremaps import NoiseConfig, atomic_write_bytes, load_maps, render_oracle, render_photo, save_maps
from .layout import Layout, check
from .synthetic import SceneSpec, random_layout, stable_seed

MANIFEST_NAME = "manifest.json"


class DataError(LayoutError):
    """A dataset file is missing or unreadable; carries the image id and path."""

    def __init__(self, image_id: str, path, reason: str):
        self.image_id, self.path = image_id, str(path)
        super().__init__(f"image {image_id!r} ({path}): {reason}")


@dataclass(frozen=True)
class Entry:
    image_id: str
    maps_path: str
    gt_layout_path: str
    photo_path: Optional[str] = None


@dataclass
class Manifest:
    width: int
    height: int
    entries: List[Entry] = field(default_factory=list)
    root: Path = Path(".")

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def to_json(self) -> str:
        d = {
            "width": self.width,
            "height": self.height,
            "entries": [
                {k: v for k, v in e.__dict__.items() if v is not None} for e in self.entries
            ],
        }
        return json.dumps(d, indent=2) + "\n"


def load_manifest(path) -> Manifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        d = json.loads(path.read_text())
        entries = [Entry(e["image_id"], e["maps_path"], e["gt_layout_path"], e.get("photo_path")) for e in d["entries"]]
        m = Manifest(int(d["width"]), int(d["height"]), entries, path.parent)
    except OSError as e:
        raise FormatError(f"cannot read manifest {path}: {e}") from None
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed manifest {path}: {e}") from None
    if not m.entries:
        raise EmptyDataset(f"manifest {path} lists no images")
    ids = [e.image_id for e in m.entries]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise FormatError(f"manifest {path} repeats image ids {dup}")
    for e in m.entries:
        for p in (e.maps_path, e.gt_layout_path, e.photo_path):
            if p is not None and not m.resolve(p).exists():
                raise DataError(e.image_id, m.resolve(p), "file not found")
    return m


def read_maps(m: Manifest, e: Entry):
    p = m.resolve(e.maps_path)
    try:
        return load_maps(p)
    except (OSError, LayoutError) as err:
        raise DataError(e.image_id, p, str(err)) from None


def read_layout(path, image_id: str = "") -> Layout:
    try:
        return check(Layout.from_json(Path(path).read_text()))
    except (OSError, KeyError, TypeError, ValueError) as err:
        raise DataError(image_id, path, str(err)) from None


def read_photo(m: Manifest, e: Entry) -> Optional[np.ndarray]:
    if e.photo_path is None:
        return None
    from PIL import Image

    p = m.resolve(e.photo_path)
    try:
        with Image.open(p) as im:
            return np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    except OSError as err:
        raise DataError(e.image_id, p, str(err)) from None


def write_photo(img: np.ndarray, path) -> None:
    from io import BytesIO

    from PIL import Image

    buf = BytesIO()
    Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8), mode="L").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def generate(
    out_dir,
    n_scenes: int,
    walls_min: int,
    walls_max: int,
    noise: NoiseConfig = NoiseConfig(),
    seed: int = 0,
    spec: SceneSpec = SceneSpec(),
    photos: bool = True,
) -> Manifest:
    """Sample ``n_scenes`` random rooms and write their oracle maps."""
    if not 1 <= walls_min <= walls_max <= 8:
        raise ValueError("need 1 <= walls_min <= walls_max <= 8")
    if n_scenes < 1:
        raise ValueError("n_scenes must be >= 1")
    out = Path(out_dir)
    for sub in ("maps", "gt") + (("photo",) if photos else ()):
        (out / sub).mkdir(parents=True, exist_ok=True)
    entries = []
    width = len(str(n_scenes - 1))
    for i in range(n_scenes):
        iid = f"scene{i:0{width}d}"
        s = stable_seed(seed, iid)
        rng = np.random.default_rng(s)
        n = int(rng.integers(walls_min, walls_max + 1))
        gt = random_layout(rng, n, spec)
        maps = render_oracle(gt, NoiseConfig(noise.blur_sigma, noise.additive_noise_sigma,
                                              noise.occlusion_boxes, noise.occlusion_max_frac, s % 2**32))
        e = Entry(iid, f"maps/{iid}.rsnm", f"gt/{iid}.json", f"photo/{iid}.png" if photos else None)
        save_maps(maps, out / e.maps_path)
        atomic_write_bytes(out / e.gt_layout_path, (gt.to_json() + "\n").encode())
        if photos:
            write_photo(render_photo(gt), out / e.photo_path)
        entries.append(e)
    m = Manifest(spec.width, spec.height, entries, out)
    atomic_write_bytes(out / MANIFEST_NAME, m.to_json().encode())
    return m
