from .kinematics import (
    HAND_PARENTS,
    JOINT_NAMES,
    MIDDLE_MCP,
    ChainError,
    DegenerateFrameError,
    KinematicChain,
    LocalFrame,
    Skinning,
    SkinningError,
    compute_local_frames,
    pose,
    pose_mesh,
)
from .mesh import Mesh, MeshError, parse_obj, read_obj, write_obj
from .regressor import JointRegressor, regress_joints, root_center

__all__ = [
    "HAND_PARENTS",
    "JOINT_NAMES",
    "MIDDLE_MCP",
    "ChainError",
    "DegenerateFrameError",
    "JointRegressor",
    "KinematicChain",
    "LocalFrame",
    "Mesh",
    "MeshError",
    "Skinning",
    "SkinningError",
    "compute_local_frames",
    "parse_obj",
    "pose",
    "pose_mesh",
    "read_obj",
    "regress_joints",
    "root_center",
    "write_obj",
]
