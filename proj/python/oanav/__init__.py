"""Object-aware navigation: scenes, verification and benchmark episodes."""

from ._oanav import (
    Error,
    box_giou,
    box_iou,
    existence_probability,
    generate_scene,
    run_episode,
    variants,
)

__all__ = ["Error", "box_giou", "box_iou", "existence_probability", "generate_scene", "run_episode", "variants"]
