"""Loading the shipped hand template (or one from ``MSMR_ASSET_ROOT``)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .kinematics import KinematicChain, Skinning
from .mesh import Mesh, read_obj
from .regressor import JointRegressor

ASSET_ENV = "MSMR_ASSET_ROOT"


def asset_root() -> Path:
    env = os.environ.get(ASSET_ENV)
    return Path(env) if env else Path(__file__).with_name("data")


@dataclass(frozen=True, eq=False)
class HandAsset:
    mesh: Mesh
    chain: KinematicChain
    skinning: Skinning
    regressor: JointRegressor

    def mirrored(self) -> "HandAsset":
        """The opposite hand: x negated, face winding reversed."""
        v = self.mesh.vertices.copy()
        v[:, 0] *= -1
        return HandAsset(Mesh(v, self.mesh.faces[:, ::-1]), self.chain.mirrored(), self.skinning, self.regressor)


def load_hand(root: str | Path | None = None) -> HandAsset:
    return _load_hand(str(Path(root) if root else asset_root()))


@lru_cache(maxsize=4)
def _load_hand(root: str) -> HandAsset:
    r = Path(root)
    mesh = read_obj(r / "hand_template.obj")
    chain = KinematicChain.from_json(json.loads((r / "hand_chain.json").read_text()))
    skin = Skinning.from_json(json.loads((r / "hand_skinning.json").read_text()))
    reg = JointRegressor.from_json(json.loads((r / "hand_regressor.json").read_text()))
    return HandAsset(mesh, chain, skin, reg)
