"""Procedural test sequences written in the on-disk dataset layout.

Each generator renders an analytic scene at pixel centers for any continuous
time, so ground-truth intermediate frames are exact by construction. Scenes
are rendered at ``oversample`` times the frame rate for event simulation
(threshold crossings need dense sampling) while only every oversample-th
frame is kept as a dataset frame.

Scene kinds:

* ``static``       fixed textured blob, no motion
* ``translate``    blob moving at constant velocity (exact flow.flo written)
* ``accelerate``   blob with constant acceleration
* ``rotate``       textured bar spinning about the image center
* ``illumination`` static scene with a smooth global brightness ramp
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import write_binary
from .images import Frame, save_image
from .simulator import SimulatorConfig, simulate
from .warp import write_flo

CHANNEL_GAINS = (1.0, 0.82, 0.55)  # warm tint so all RGB channels carry signal


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one procedural sequence."""

    name: str
    kind: str
    n_frames: int = 13
    width: int = 64
    height: int = 64
    frame_interval_us: int = 10_000
    oversample: int = 10
    velocity: tuple[float, float] = (0.0, 0.0)  # px per frame interval
    acceleration: tuple[float, float] = (0.0, 0.0)  # px per frame interval^2
    spin: float = 0.0  # radians per frame interval
    background: float = 0.0  # static background texture strength; 0 = black
    center_jitter: float = 0.0  # seed-drawn offset of the trajectory center (px)
    split: str = "test"
    seed: int = 0


def _blob(xx, yy, sigma=7.0):
    """Gaussian-windowed sinusoid texture with exact-zero far background.

    The small floor subtraction cuts the Gaussian tail to true zero, so a
    rigidly translated blob on black background stays exactly representable
    after integer shifts.
    """
    envelope = np.exp(-(xx**2 + yy**2) / (2.0 * sigma * sigma))
    # texture wavelength well above the benchmark displacements, so the
    # mismatch error grows monotonically with shift instead of re-aligning
    texture = 0.55 + 0.45 * np.sin(0.5 * xx) * np.cos(0.62 * yy)
    return np.maximum(0.0, envelope * texture - 0.04) / 0.96


def _bar(xx, yy):
    envelope = np.exp(-(xx**2) / (2.0 * 11.0**2) - (yy**2) / (2.0 * 3.5**2))
    texture = 0.6 + 0.4 * np.sin(0.8 * xx)
    return np.maximum(0.0, envelope * texture - 0.04) / 0.96


def _alpha(xx, yy, sigma=8.0):
    """Soft occupancy mask of the moving object, used to composite it over a
    static background (front object occludes, edges stay smooth)."""
    return np.exp(-(xx**2 + yy**2) / (2.0 * sigma * sigma))


def _background(xs, ys, strength: float, seed: int) -> np.ndarray:
    if strength <= 0:
        return np.zeros_like(xs)
    rng = np.random.default_rng(seed)
    phase_x, phase_y = rng.uniform(0, 2 * math.pi, size=2)
    return strength * (0.5 + 0.28 * np.sin(0.31 * xs + phase_x) * np.sin(0.37 * ys + phase_y))


def render_scene(spec: SceneSpec, t_frames: float) -> np.ndarray:
    """Scene image (H, W, 3 float in [0, 255]) at time ``t_frames``, measured
    in frame intervals from the sequence start."""
    h, w = spec.height, spec.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    span = spec.n_frames - 1
    total_dx = spec.velocity[0] * span + 0.5 * spec.acceleration[0] * span**2
    total_dy = spec.velocity[1] * span + 0.5 * spec.acceleration[1] * span**2
    jx = jy = 0.0
    if spec.center_jitter > 0:
        jitter_rng = np.random.default_rng(spec.seed)
        jx, jy = jitter_rng.uniform(-spec.center_jitter, spec.center_jitter, size=2)
    cx0 = w / 2.0 - total_dx / 2.0 + jx
    cy0 = h / 2.0 - total_dy / 2.0 + jy

    gain = 1.0
    if spec.kind == "static":
        dx, dy = xs - w / 2.0 - jx, ys - h / 2.0 - jy
        pattern, alpha = _blob(dx, dy), _alpha(dx, dy)
    elif spec.kind in ("translate", "accelerate"):
        cx = cx0 + spec.velocity[0] * t_frames + 0.5 * spec.acceleration[0] * t_frames**2
        cy = cy0 + spec.velocity[1] * t_frames + 0.5 * spec.acceleration[1] * t_frames**2
        pattern, alpha = _blob(xs - cx, ys - cy), _alpha(xs - cx, ys - cy)
    elif spec.kind == "rotate":
        theta = spec.spin * t_frames
        dx = xs - w / 2.0 - jx
        dy = ys - h / 2.0 - jy
        xr = math.cos(theta) * dx + math.sin(theta) * dy
        yr = -math.sin(theta) * dx + math.cos(theta) * dy
        pattern = _bar(xr, yr)
        alpha = np.exp(-(xr**2) / (2.0 * 12.0**2) - (yr**2) / (2.0 * 4.5**2))
    elif spec.kind == "illumination":
        dx, dy = xs - w / 2.0 - jx, ys - h / 2.0 - jy
        pattern, alpha = _blob(dx, dy), _alpha(dx, dy)
        gain = 0.55 + 0.40 * math.sin(2.0 * math.pi * t_frames / spec.n_frames)
    else:
        raise ValueError(f"unknown scene kind {spec.kind!r}")

    scene = alpha * pattern + (1.0 - alpha) * _background(xs, ys, spec.background, spec.seed)
    scene = gain * scene
    out = np.empty((h, w, 3), dtype=np.float64)
    for c, channel_gain in enumerate(CHANNEL_GAINS):
        out[:, :, c] = 235.0 * channel_gain * scene
    return np.clip(out, 0.0, 255.0)


def generate_sequence(root, spec: SceneSpec, sim_config: SimulatorConfig | None = None) -> Path:
    """Render one sequence into ``root/<spec.name>`` and return its path."""
    seq_dir = Path(root) / spec.name
    images_dir = seq_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    if sim_config is None:
        sim_config = SimulatorConfig(seed=spec.seed)

    dense = []
    n_dense = (spec.n_frames - 1) * spec.oversample + 1
    for i in range(n_dense):
        t_frames = i / spec.oversample
        t_us = round(t_frames * spec.frame_interval_us)
        pixels = np.clip(np.rint(render_scene(spec, t_frames)), 0, 255).astype(np.uint8)
        dense.append(Frame(t_us, pixels))

    kept = dense[:: spec.oversample]
    for i, frame in enumerate(kept):
        save_image(frame.pixels, images_dir / f"{i:06d}.png")
    (seq_dir / "timestamps.txt").write_text("".join(f"{f.t}\n" for f in kept))

    events = simulate(dense, sim_config)
    write_binary(events, seq_dir / "events.evt1")

    if spec.kind in ("translate", "static"):
        # the exact forward flow per frame interval (zero for static scenes)
        flow = np.empty((spec.height, spec.width, 2), dtype=np.float64)
        flow[:, :, 0] = spec.velocity[0]
        flow[:, :, 1] = spec.velocity[1]
        write_flo(flow, seq_dir / "flow.flo")

    (seq_dir / "meta.txt").write_text(
        f"split={spec.split}\ndescription={spec.kind} scene\n"
    )
    return seq_dir


def make_benchmark_dataset(root, seed: int = 0) -> Path:
    """Small deterministic benchmark set: constant-velocity motion with exact
    flow, plus a static control sequence."""
    root = Path(root)
    generate_sequence(root, SceneSpec(name="translate_int", kind="translate", velocity=(2.0, 0.0), seed=seed))
    generate_sequence(
        root, SceneSpec(name="translate_frac", kind="translate", velocity=(1.5, 1.0), seed=seed + 1)
    )
    generate_sequence(root, SceneSpec(name="static", kind="static", seed=seed + 2))
    return root


def make_toy_training_dataset(root, seed: int = 0) -> Path:
    """Mixed-motion 64x64 set for toy-scale learned backends.

    Train sequences over a textured static background cover slow and fast
    constant-velocity translation, accelerating motion, rotation at several
    rates, global lighting change, and one static anchor (zero flow for
    event-free regions). One held-out sequence per motion kind forms the
    validation split.
    """
    root = Path(root)
    translate_velocities = [
        (1.0, 0.4), (-0.8, 0.9), (0.6, -1.1), (2.2, -1.0), (-2.0, -1.8),
        (2.4, 1.3), (-1.4, 0.2), (0.3, 1.5), (1.7, -1.6), (-1.1, -0.5),
    ]
    train_specs = [
        SceneSpec(name=f"translate_{i:02d}", kind="translate", velocity=vel, seed=seed + i)
        for i, vel in enumerate(translate_velocities)
    ] + [
        SceneSpec(name="accelerate_00", kind="accelerate", velocity=(0.3, -0.2), acceleration=(0.06, 0.05), seed=seed + 10),
        SceneSpec(name="accelerate_01", kind="accelerate", velocity=(-0.2, 0.1), acceleration=(-0.07, 0.06), seed=seed + 11),
        SceneSpec(name="accelerate_02", kind="accelerate", velocity=(0.4, 0.3), acceleration=(0.05, -0.07), seed=seed + 12),
        SceneSpec(name="rotate_00", kind="rotate", spin=0.06, seed=seed + 20),
        SceneSpec(name="rotate_01", kind="rotate", spin=0.10, seed=seed + 21),
        SceneSpec(name="rotate_02", kind="rotate", spin=0.14, seed=seed + 22),
        SceneSpec(name="rotate_03", kind="rotate", spin=0.18, seed=seed + 23),
        SceneSpec(name="illumination_00", kind="illumination", seed=seed + 30),
        SceneSpec(name="illumination_01", kind="illumination", seed=seed + 31),
        SceneSpec(name="static_00", kind="static", seed=seed + 40),
    ]
    val_specs = [
        SceneSpec(name="translate_v0", kind="translate", velocity=(1.1, -0.6), seed=seed + 90),
        SceneSpec(name="translate_v1", kind="translate", velocity=(-2.1, 1.4), seed=seed + 91),
        SceneSpec(name="accelerate_v0", kind="accelerate", velocity=(0.35, 0.2), acceleration=(0.06, -0.05), seed=seed + 92),
        SceneSpec(name="rotate_v0", kind="rotate", spin=0.13, seed=seed + 93),
        SceneSpec(name="illumination_v0", kind="illumination", seed=seed + 94),
    ]
    for spec in train_specs:
        generate_sequence(
            root, dataclasses.replace(spec, background=0.5, center_jitter=6.0, split="train")
        )
    for spec in val_specs:
        generate_sequence(
            root, dataclasses.replace(spec, background=0.5, center_jitter=6.0, split="val")
        )
    return root
