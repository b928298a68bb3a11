from .capsules import (
    CapsuleSet,
    capsules_from_chain,
    capsules_intersect,
    cylinder_capsule,
    pair_distances,
    point_segment_distance,
    posed_capsules,
    segment_distance,
)
from .generate import MODES, GenerationConfig, GenerationError, generate_interaction, hand_models
from .io import (
    Render,
    SceneFormatError,
    read_pgm,
    read_ppm,
    render_scene,
    scene_from_json,
    scene_to_json,
    write_scene,
)
from .raster import Camera, ZBuffer, rasterize_masks, shade
from .scene import Articulated, Scene, SceneModel, model_pair_clear, scene_valid, self_clear

__all__ = [
    "MODES",
    "Articulated",
    "Camera",
    "CapsuleSet",
    "GenerationConfig",
    "GenerationError",
    "Render",
    "Scene",
    "SceneFormatError",
    "SceneModel",
    "ZBuffer",
    "capsules_from_chain",
    "capsules_intersect",
    "cylinder_capsule",
    "generate_interaction",
    "hand_models",
    "model_pair_clear",
    "pair_distances",
    "point_segment_distance",
    "posed_capsules",
    "rasterize_masks",
    "read_pgm",
    "read_ppm",
    "render_scene",
    "scene_from_json",
    "scene_to_json",
    "scene_valid",
    "segment_distance",
    "self_clear",
    "shade",
    "write_scene",
]
