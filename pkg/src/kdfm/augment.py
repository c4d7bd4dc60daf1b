"""Weak and strong stochastic augmentation for vector and flattened-grid samples.

Weak keeps samples close to the original (flip + small shift for grids, light
Gaussian jitter for vectors). Strong draws a subset of heavier ops per sample
and composes them in a fixed order, scaled by a single magnitude knob in
[0, 1]; at magnitude 0 every op collapses to the identity.

Samples are 1-D feature vectors; grid policies reshape to (h, w, c)
internally and flatten again on the way out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

VECTOR_OPS = ("jitter", "scale", "erase")
GRID_OPS = ("jitter", "scale", "rotate", "erase", "channel_shift")

# Composition order for the ops drawn by strong(); scale acts on the clean
# sample, jitter lands on top, erase zeroes last.
_OP_ORDER = ("scale", "rotate", "channel_shift", "jitter", "erase")

_STRONG_JITTER_FACTOR = 10.0
_MAX_ROTATE_DEG = 30.0


@dataclass(frozen=True)
class AugmentPolicy:
    input_kind: str = "vector"
    grid_shape: tuple[int, int, int] | None = None
    flip_prob: float = 0.0
    max_shift_frac: float = 0.0
    jitter_sigma_weak: float = 0.05
    ops_per_sample: int = 2
    magnitude: float = 0.5
    op_pool: tuple[str, ...] = ("jitter", "scale")

    def __post_init__(self):
        if self.input_kind not in ("vector", "grid"):
            raise ConfigError(f"input_kind must be 'vector' or 'grid', got {self.input_kind!r}")
        if self.input_kind == "grid":
            if self.grid_shape is None or len(self.grid_shape) != 3:
                raise ConfigError("grid policies need grid_shape=(h, w, c)")
            allowed = GRID_OPS
        else:
            allowed = VECTOR_OPS
        if not (0.0 <= self.flip_prob <= 1.0):
            raise ConfigError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        if not (0.0 <= self.max_shift_frac <= 0.5):
            raise ConfigError(f"max_shift_frac must be in [0, 0.5], got {self.max_shift_frac}")
        if self.jitter_sigma_weak < 0.0:
            raise ConfigError(f"jitter_sigma_weak must be >= 0, got {self.jitter_sigma_weak}")
        if self.ops_per_sample < 1:
            raise ConfigError(f"ops_per_sample must be >= 1, got {self.ops_per_sample}")
        if not (0.0 <= self.magnitude <= 1.0):
            raise ConfigError(f"magnitude must be in [0, 1], got {self.magnitude}")
        if not self.op_pool:
            raise ConfigError("op_pool must not be empty")
        for op in self.op_pool:
            if op not in allowed:
                raise ConfigError(f"op {op!r} not usable with {self.input_kind} inputs")

    @property
    def sample_size(self) -> int | None:
        if self.grid_shape is None:
            return None
        h, w, c = self.grid_shape
        return h * w * c


def vector_policy(jitter_sigma_weak: float = 0.05, magnitude: float = 0.5,
                  ops_per_sample: int = 2, op_pool=("jitter", "scale")) -> AugmentPolicy:
    return AugmentPolicy(
        input_kind="vector",
        jitter_sigma_weak=jitter_sigma_weak,
        ops_per_sample=ops_per_sample,
        magnitude=magnitude,
        op_pool=tuple(op_pool),
    )


def grid_policy(h: int, w: int, c: int = 1, flip_prob: float = 0.5,
                max_shift_frac: float = 0.125, jitter_sigma_weak: float = 0.05,
                magnitude: float = 0.5, ops_per_sample: int = 2,
                op_pool=GRID_OPS) -> AugmentPolicy:
    return AugmentPolicy(
        input_kind="grid",
        grid_shape=(h, w, c),
        flip_prob=flip_prob,
        max_shift_frac=max_shift_frac,
        jitter_sigma_weak=jitter_sigma_weak,
        ops_per_sample=ops_per_sample,
        magnitude=magnitude,
        op_pool=tuple(op_pool),
    )


def _check_sample(x: np.ndarray, policy: AugmentPolicy) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"samples must be 1-D feature vectors, got shape {x.shape}")
    expected = policy.sample_size
    if expected is not None and x.size != expected:
        raise ShapeError(
            f"sample size {x.size} does not match grid {policy.grid_shape}"
        )
    return x


def _shift_grid(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    out = np.zeros_like(img)
    h, w = img.shape[:2]
    y0, y1 = max(0, dy), min(h, h + dy)
    x0, x1 = max(0, dx), min(w, w + dx)
    if y0 < y1 and x0 < x1:
        out[y0:y1, x0:x1] = img[y0 - dy : y1 - dy, x0 - dx : x1 - dx]
    return out


def _rotate_grid(img: np.ndarray, angle_rad: float) -> np.ndarray:
    """Nearest-neighbour rotation about the image centre, zero fill outside."""
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    cos, sin = np.cos(angle_rad), np.sin(angle_rad)
    sy = cos * (ys - cy) + sin * (xs - cx) + cy
    sx = -sin * (ys - cy) + cos * (xs - cx) + cx
    syi = np.rint(sy).astype(np.intp)
    sxi = np.rint(sx).astype(np.intp)
    valid = (syi >= 0) & (syi < h) & (sxi >= 0) & (sxi < w)
    out = np.zeros_like(img)
    out[valid] = img[syi[valid], sxi[valid]]
    return out


def weak(x: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Light augmentation: flip + shift for grids, Gaussian jitter for vectors."""
    x = _check_sample(x, policy)
    if policy.input_kind == "vector":
        return x + rng.normal(0.0, policy.jitter_sigma_weak, size=x.shape)
    h, w, c = policy.grid_shape
    img = x.reshape(h, w, c)
    if rng.random() < policy.flip_prob:
        img = img[:, ::-1, :]
    max_dy = int(policy.max_shift_frac * h)
    max_dx = int(policy.max_shift_frac * w)
    dy = int(rng.integers(-max_dy, max_dy + 1)) if max_dy else 0
    dx = int(rng.integers(-max_dx, max_dx + 1)) if max_dx else 0
    if dy or dx:
        img = _shift_grid(img, dy, dx)
    return img.reshape(-1).copy()


def _apply_strong_op(op: str, x: np.ndarray, policy: AugmentPolicy,
                     rng: np.random.Generator) -> np.ndarray:
    mag = policy.magnitude
    if op == "jitter":
        sigma = _STRONG_JITTER_FACTOR * policy.jitter_sigma_weak * mag
        return x + rng.normal(0.0, sigma, size=x.shape)
    if op == "scale":
        s = rng.uniform(-0.5 * mag, 0.5 * mag)
        return x * (1.0 + s)
    if op == "erase":
        if policy.input_kind == "vector":
            span = int(0.25 * mag * x.size)
            if span < 1:
                return x
            start = int(rng.integers(0, x.size - span + 1))
            out = x.copy()
            out[start : start + span] = 0.0
            return out
        h, w, c = policy.grid_shape
        eh, ew = int(0.5 * mag * h), int(0.5 * mag * w)
        if eh < 1 or ew < 1:
            return x
        y0 = int(rng.integers(0, h - eh + 1))
        x0 = int(rng.integers(0, w - ew + 1))
        img = x.reshape(h, w, c).copy()
        img[y0 : y0 + eh, x0 : x0 + ew, :] = 0.0
        return img.reshape(-1)
    if op == "rotate":
        angle = np.deg2rad(rng.uniform(-1.0, 1.0) * _MAX_ROTATE_DEG * mag)
        h, w, c = policy.grid_shape
        return _rotate_grid(x.reshape(h, w, c), angle).reshape(-1)
    # channel_shift: constant per-channel offset, data assumed roughly unit scale
    h, w, c = policy.grid_shape
    offsets = rng.uniform(-0.5 * mag, 0.5 * mag, size=c)
    img = x.reshape(h, w, c) + offsets
    return img.reshape(-1)


def strong(x: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator) -> np.ndarray:
    """Heavy augmentation: a random subset of the op pool, composed in a fixed order."""
    x = _check_sample(x, policy)
    n_ops = min(policy.ops_per_sample, len(policy.op_pool))
    if n_ops == len(policy.op_pool):
        chosen = set(policy.op_pool)
    else:
        picks = rng.choice(len(policy.op_pool), size=n_ops, replace=False)
        chosen = {policy.op_pool[i] for i in picks}
    for op in _OP_ORDER:
        if op in chosen:
            x = _apply_strong_op(op, x, policy, rng)
    return x


def augment_batch(xs: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator,
                  strength: str = "weak") -> np.ndarray:
    """Apply weak or strong augmentation row-wise to a [B, d] batch."""
    xs = np.asarray(xs, dtype=np.float64)
    fn = weak if strength == "weak" else strong
    return np.stack([fn(row, policy, rng) for row in xs])
