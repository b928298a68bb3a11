"""JSON-lines dataset manifest: a header line, then one record per scene."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .atomic import atomic_write_text

FORMAT = "msmr-manifest/1"


class ManifestError(ValueError):
    pass


@dataclass
class ManifestRecord:
    scene: str  # scene directory, relative to the manifest
    seed: int
    mode: str
    object_ids: list[int]
    camera: dict
    meshes: dict[str, str]  # object id -> posed mesh path, relative to the manifest
    visibility: dict[str, float | None] = field(default_factory=dict)  # object id -> VR

    def files(self) -> list[str]:
        return [f"{self.scene}/scene.json", f"{self.scene}/image.ppm", *self.meshes.values()]

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ManifestRecord":
        return cls(
            scene=str(d["scene"]),
            seed=int(d["seed"]),
            mode=str(d["mode"]),
            object_ids=[int(i) for i in d["object_ids"]],
            camera=dict(d["camera"]),
            meshes={str(k): str(v) for k, v in d["meshes"].items()},
            visibility={str(k): v for k, v in d.get("visibility", {}).items()},
        )


@dataclass
class Manifest:
    records: list[ManifestRecord] = field(default_factory=list)
    root: Path = Path(".")

    def __len__(self) -> int:
        return len(self.records)

    def path(self, relative: str) -> Path:
        return self.root / relative


def format_manifest(m: Manifest) -> str:
    lines = [json.dumps({"format": FORMAT, "records": len(m.records)}, sort_keys=True)]
    lines += [json.dumps(r.to_json(), sort_keys=True) for r in m.records]
    return "\n".join(lines) + "\n"


def write_manifest(m: Manifest, path: str | Path) -> None:
    atomic_write_text(Path(path), format_manifest(m))


def parse_manifest(text: str, root: Path = Path(".")) -> Manifest:
    lines = text.splitlines()
    records: list[ManifestRecord] = []
    header_seen = False
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ManifestError(f"line {lineno}: invalid JSON ({e.msg})") from None
        if not header_seen:
            if d.get("format") != FORMAT:
                raise ManifestError(f"line {lineno}: expected a {FORMAT} header, got {d.get('format')!r}")
            header_seen = True
            continue
        try:
            records.append(ManifestRecord.from_json(d))
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ManifestError(f"line {lineno}: malformed record ({e!r})") from None
    seeds: dict[int, str] = {}
    for r in records:
        if r.seed in seeds:
            raise ManifestError(f"record {r.scene}: seed {r.seed} already used by {seeds[r.seed]}")
        seeds[r.seed] = r.scene
    return Manifest(records, root)


def load_manifest(path: str | Path, check_files: bool = True) -> Manifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    if not path.exists():
        raise ManifestError(f"manifest {path} does not exist")
    m = parse_manifest(path.read_text(), path.parent)
    if not m.records:
        warnings.warn(f"manifest {path} has no records; the dataset is empty", RuntimeWarning, stacklevel=2)
    if check_files:
        for r in m.records:
            for rel in r.files():
                if not m.path(rel).exists():
                    raise ManifestError(f"record {r.scene} (seed {r.seed}): missing file {rel}")
    return m
