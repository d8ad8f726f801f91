"""Deterministic synthetic semantic videos: labelled shapes translating over a background."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage.draw import ellipse, polygon

__all__ = ["SceneObject", "SyntheticSceneSpec", "generate_corpus", "default_corpus", "SHAPES"]

SHAPES = ("rectangle", "ellipse", "polygon")


@dataclass(frozen=True)
class SceneObject:
    label: int
    shape: str
    size: tuple[int, int]
    position: tuple[int, int]
    velocity: tuple[int, int] = (0, 0)
    # polygon vertices in object-local (row, col) coordinates
    vertices: tuple[tuple[float, float], ...] = ()

    def mask(self) -> np.ndarray:
        h, w = self.size
        m = np.zeros((h, w), dtype=bool)
        if self.shape == "rectangle":
            m[:] = True
        elif self.shape == "ellipse":
            rr, cc = ellipse((h - 1) / 2, (w - 1) / 2, h / 2, w / 2, shape=(h, w))
            m[rr, cc] = True
        elif self.shape == "polygon":
            v = np.asarray(self.vertices, dtype=float)
            rr, cc = polygon(v[:, 0], v[:, 1], shape=(h, w))
            m[rr, cc] = True
        else:
            raise ValueError(f"unknown shape {self.shape!r}")
        return m


@dataclass(frozen=True)
class SyntheticSceneSpec:
    seed: int
    width: int
    height: int
    frame_count: int
    objects: tuple[SceneObject, ...]
    background_label: int = 0

    @classmethod
    def random(
        cls,
        seed: int,
        width: int = 512,
        height: int = 512,
        frame_count: int = 30,
        object_count: tuple[int, int] = (3, 8),
        labels: tuple[int, int] = (1, 20),
        size_range: tuple[int, int] = (40, 140),
        max_speed: int = 4,
        moving: bool = False,
        background_label: int = 0,
    ) -> SyntheticSceneSpec:
        """Draw a scene from ``seed``; ``moving`` forces every velocity non-zero."""
        rng = np.random.default_rng(seed)
        lo_size = min(size_range[0], height, width)
        objects = []
        for _ in range(int(rng.integers(object_count[0], object_count[1] + 1))):
            h = int(rng.integers(lo_size, min(size_range[1], height) + 1))
            w = int(rng.integers(lo_size, min(size_range[1], width) + 1))
            shape = SHAPES[int(rng.integers(len(SHAPES)))]
            vertices = ()
            if shape == "polygon":
                k = int(rng.integers(3, 9))
                ang = np.sort(rng.uniform(0, 2 * np.pi, k))
                rad = rng.uniform(0.55, 1.0, k)
                vertices = tuple(
                    (float((h - 1) / 2 * (1 + r * np.sin(a))), float((w - 1) / 2 * (1 + r * np.cos(a))))
                    for a, r in zip(ang, rad)
                )
            while True:
                v = tuple(int(x) for x in rng.integers(-max_speed, max_speed + 1, 2))
                if not moving or v != (0, 0):
                    break
            label = int(rng.integers(labels[0], labels[1] + 1))
            pos = (int(rng.integers(0, height - h + 1)), int(rng.integers(0, width - w + 1)))
            objects.append(SceneObject(label, shape, (h, w), pos, v, vertices))
        return cls(seed, width, height, frame_count, tuple(objects), background_label)


def generate_corpus(spec: SyntheticSceneSpec) -> list[np.ndarray]:
    """Render the scene; objects clamp at the borders and later ones occlude earlier ones."""
    if spec.width < 1 or spec.height < 1 or spec.frame_count < 1:
        raise ValueError("scene needs positive size and frame count")
    masks = []
    for obj in spec.objects:
        h, w = obj.size
        if h > spec.height or w > spec.width or h < 1 or w < 1:
            raise ValueError(f"object of size {obj.size} does not fit a {spec.height}x{spec.width} frame")
        masks.append(obj.mask())
    frames = []
    for k in range(spec.frame_count):
        frame = np.full((spec.height, spec.width), spec.background_label, dtype=np.uint16)
        for obj, m in zip(spec.objects, masks):
            h, w = obj.size
            r = min(max(obj.position[0] + k * obj.velocity[0], 0), spec.height - h)
            c = min(max(obj.position[1] + k * obj.velocity[1], 0), spec.width - w)
            frame[r : r + h, c : c + w][m] = obj.label
        frames.append(frame)
    return frames


def default_corpus(
    seed: int = 0, videos: int = 25, frame_count: int = 30, size: int = 512, **kwargs
) -> list[list[np.ndarray]]:
    """``videos`` independent scenes (25 x 30 frames of 512x512 by default)."""
    seeds = np.random.SeedSequence(seed).generate_state(videos)
    return [
        generate_corpus(SyntheticSceneSpec.random(int(s), size, size, frame_count, **kwargs))
        for s in seeds
    ]
