"""Multi-level mesh pyramid: meshes, resampling matrices and spiral tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from msmr.mesh.mesh import Mesh, MeshError, format_obj, read_obj
from msmr.mesh.regressor import JointRegressor
from msmr.pipeline.atomic import atomic_directory

from .qem import decimate_qem
from .spirals import SpiralTable, enumerate_spirals
from .upsample import build_upsample

DEFAULT_SPIRAL_LENGTHS = (12, 12, 10, 9, 9)


@dataclass(eq=False)
class MeshHierarchy:
    levels: list[Mesh]  # finest first
    down: list[sp.csr_matrix]  # down[l]: (N_{l+1}, N_l)
    up: list[sp.csr_matrix]  # up[l]: (N_l, N_{l+1})
    spirals: list[SpiralTable]
    source_indices: np.ndarray | None = None  # finest-level vertices within the source mesh
    regressors: list[JointRegressor | None] = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def counts(self) -> list[int]:
        return [m.n_vertices for m in self.levels]

    def resample(self, src: int, dst: int) -> sp.csr_matrix:
        """Matrix mapping level ``src`` features to level ``dst`` (chained D or U)."""
        if src == dst:
            return sp.identity(self.levels[src].n_vertices, format="csr")
        m = sp.identity(self.levels[src].n_vertices, format="csr")
        if dst > src:
            for l in range(src, dst):
                m = self.down[l] @ m
        else:
            for l in range(src - 1, dst - 1, -1):
                m = self.up[l] @ m
        return sp.csr_matrix(m)

    def regressor(self, level: int = 0) -> JointRegressor | None:
        if level < len(self.regressors):
            return self.regressors[level]
        return None


def halving_target(n: int) -> int:
    return max(4, math.ceil(n / 2))


def build_hierarchy(
    mesh: Mesh,
    levels: int = 5,
    spiral_lengths: tuple[int, ...] | list[int] | None = None,
    regressor: JointRegressor | None = None,
    finest_count: int | None = None,
) -> MeshHierarchy:
    """Halve the vertex count ``levels - 1`` times by QEM contraction.

    With ``finest_count`` the input is first decimated (by halving steps) to
    that size and the pyramid starts there; ``source_indices`` then records
    which input vertices the finest level kept.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    lengths = list(spiral_lengths or DEFAULT_SPIRAL_LENGTHS)
    if len(lengths) < levels:
        lengths += [lengths[-1]] * (levels - len(lengths))
    source = np.arange(mesh.n_vertices)
    base = mesh
    reg0 = regressor
    if finest_count is not None and finest_count < mesh.n_vertices:
        selection = sp.identity(mesh.n_vertices, format="csr")
        ups = []
        while base.n_vertices > finest_count:
            target = max(finest_count, halving_target(base.n_vertices))
            coarse, D = decimate_qem(base, target)
            ups.append(build_upsample(base, coarse, D))
            selection = D @ selection
            base = coarse
        source = np.asarray(sp.csr_matrix(selection).indices, dtype=np.int64)
        if regressor is not None:
            chain = sp.identity(mesh.n_vertices, format="csr")
            for U in ups:
                chain = chain @ U
            reg0 = regressor.compose(chain)
    need = base.n_vertices
    for _ in range(levels - 1):
        need = halving_target(need)
    if need < 4 or (levels > 1 and base.n_vertices < 8):
        raise MeshError(f"{base.n_vertices} vertices cannot be halved {levels - 1} times")

    meshes, downs, ups = [base], [], []
    for _ in range(levels - 1):
        fine = meshes[-1]
        coarse, D = decimate_qem(fine, halving_target(fine.n_vertices))
        downs.append(sp.csr_matrix(D))
        ups.append(build_upsample(fine, coarse, D))
        meshes.append(coarse)
    spirals = [enumerate_spirals(m, lengths[l]) for l, m in enumerate(meshes)]
    regs: list[JointRegressor | None] = [reg0]
    for l in range(1, levels):
        prev = regs[-1]
        regs.append(prev.compose(ups[l - 1]) if prev is not None else None)
    return MeshHierarchy(meshes, downs, ups, spirals, source, regs)


def _format_coo(m: sp.spmatrix) -> str:
    coo = sp.coo_matrix(m)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"# shape {m.shape[0]} {m.shape[1]}"]
    lines += [f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}" for k in order]
    return "\n".join(lines) + "\n"


def _parse_coo(text: str) -> sp.csr_matrix:
    lines = text.strip().splitlines()
    head = lines[0].split()
    if head[:2] != ["#", "shape"]:
        raise MeshError("sparse matrix file must start with '# shape R C'")
    shape = (int(head[2]), int(head[3]))
    rows, cols, vals = [], [], []
    for line in lines[1:]:
        r, c, v = line.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(float(v))
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def save_hierarchy(h: MeshHierarchy, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    with atomic_directory(out_dir) as d:
        for l, m in enumerate(h.levels):
            (d / f"level_{l}.obj").write_text(format_obj(m))
            (d / f"spirals_{l}.json").write_text(json.dumps(h.spirals[l].to_json()))
            reg = h.regressor(l)
            if reg is not None:
                (d / f"regressor_{l}.json").write_text(json.dumps(reg.to_json()))
        for l in range(h.n_levels - 1):
            (d / f"down_{l}.txt").write_text(_format_coo(h.down[l]))
            (d / f"up_{l}.txt").write_text(_format_coo(h.up[l]))
        meta = {
            "format": "msmr-hierarchy/1",
            "levels": h.n_levels,
            "counts": h.counts,
            "spiral_lengths": [s.length for s in h.spirals],
            "source_indices": None if h.source_indices is None else h.source_indices.tolist(),
        }
        (d / "meta.json").write_text(json.dumps(meta, indent=1))


def load_hierarchy(path: str | Path) -> MeshHierarchy:
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise MeshError(f"{path} is not a hierarchy directory (missing meta.json)")
    meta = json.loads(meta_path.read_text())
    n = int(meta["levels"])
    levels = [read_obj(path / f"level_{l}.obj") for l in range(n)]
    spirals = [SpiralTable.from_json(json.loads((path / f"spirals_{l}.json").read_text())) for l in range(n)]
    down = [_parse_coo((path / f"down_{l}.txt").read_text()) for l in range(n - 1)]
    up = [_parse_coo((path / f"up_{l}.txt").read_text()) for l in range(n - 1)]
    regs = []
    for l in range(n):
        p = path / f"regressor_{l}.json"
        regs.append(JointRegressor.from_json(json.loads(p.read_text())) if p.exists() else None)
    src = meta.get("source_indices")
    return MeshHierarchy(levels, down, up, spirals, None if src is None else np.array(src, dtype=np.int64), regs)
