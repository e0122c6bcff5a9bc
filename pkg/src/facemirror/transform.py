"""Demographic identity transformation and time-based morphing.

The identity shape is re-expressed in a target model's PCA space, uniformly
rescaled into that model's plausibility box when it falls outside, and
reconstructed. Morphing then blends the original and transformed shapes with a
sinusoidal factor driven by a frame counter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch
from .model import MorphableModel


@dataclass(frozen=True)
class TransformSpec:
    """Target model tag plus projection box and morph period."""

    target_tag: str
    box_scale_to_project: float = 3.0
    morph_period: int = 300
    hold_at_target: bool = False

    def __post_init__(self):
        if self.box_scale_to_project <= 0:
            raise ValueError("box_scale_to_project must be positive")
        if self.morph_period < 2:
            raise ValueError("morph_period must be at least 2")


@dataclass(frozen=True)
class MorphState:
    """Frame-counter clock plus the two neutral shapes being blended."""

    frame_counter: int
    active: bool
    source_shape: np.ndarray
    target_shape: np.ndarray

    def __post_init__(self):
        if self.source_shape.shape != self.target_shape.shape:
            raise DimensionMismatch("morph source and target shapes differ in length")
        if self.frame_counter < 0:
            raise ValueError("frame counter cannot be negative")


def project_identity(
    shape: np.ndarray,
    bespoke: MorphableModel,
    box_scale: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Project a 3N identity shape into a target model's constrained PCA space.

    Centers on the target mean, projects onto the target basis, and if the
    worst coefficient-to-sigma ratio exceeds ``box_scale`` rescales the whole
    coefficient vector so that ratio equals ``box_scale`` exactly (direction
    preserved). Returns the reconstructed shape and the projected coefficients.
    """
    shape = np.asarray(shape, dtype=np.float64)
    if shape.shape != bespoke.mean_shape.shape:
        raise DimensionMismatch(
            f"shape length {shape.shape} does not match target model ({bespoke.mean_shape.shape})"
        )
    centered = shape - bespoke.mean_shape
    b = bespoke.identity_basis.T @ centered
    ratio = float(np.max(np.abs(b) / bespoke.identity_sigma)) if b.size else 0.0
    if ratio > box_scale:
        b = b * (box_scale / ratio)
    altered = bespoke.identity_basis @ b + bespoke.mean_shape
    return altered, b


def morph_factor(t: int, period: int) -> float:
    """Sinusoidal blend factor ``(1 + sin(2*pi*t/period)) / 2`` in [0, 1].

    The frame index is reduced modulo the period before evaluating, so the
    factor is exactly periodic in floating point.
    """
    if period < 2:
        raise ValueError("period must be at least 2")
    return (1.0 + math.sin(2.0 * math.pi * ((t % period) / period))) / 2.0


def blend_shapes(source: np.ndarray, target: np.ndarray, p: float) -> np.ndarray:
    """Convex combination ``(1-p)*source + p*target``; exact at the endpoints."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape:
        raise DimensionMismatch("blend inputs differ in length")
    if p == 0.0:
        return source.copy()
    if p == 1.0:
        return target.copy()
    return (1.0 - p) * source + p * target


def advance_morph(state: MorphState, spec: TransformSpec) -> tuple[MorphState, np.ndarray]:
    """Step the morph clock one frame and return the blended shape.

    Inactive states pass the source through unchanged. With ``hold_at_target``
    set, the counter freezes once the factor peaks (a quarter period in) so
    the face stays at the transformed shape instead of oscillating back.
    """
    if not state.active:
        return state, state.source_shape.copy()
    peak = round(spec.morph_period / 4)
    counter = state.frame_counter
    if not (spec.hold_at_target and counter == peak):
        counter += 1
    p = morph_factor(counter, spec.morph_period)
    new_state = replace(state, frame_counter=counter)
    return new_state, blend_shapes(state.source_shape, state.target_shape, p)
