"""Real-time virtual mirror engine: 3D morphable face model fitting from 2D
landmarks, demographic shape transformation, morphing, and collective faces."""

from .errors import FaceMirrorError
from .fitting import FitConfig, FitResult, Pose, calibrate, estimate_pose, estimate_shape, fit_frame, smooth_pose
from .landmarks import AlignmentTransform, LandmarkFrame, alignment_transform, apply_alignment, eye_centers, parse_landmark_stream
from .model import (
    LandmarkCorrespondence,
    MorphableModel,
    generate_bespoke_model,
    generate_synthetic_model,
    load_model,
    save_model,
    synthesize_color,
    synthesize_shape,
    validate_model,
)
from .render import Mesh, assemble_mesh, project_vertices, reprojection_rmse, write_mesh
from .transform import MorphState, TransformSpec, advance_morph, blend_shapes, morph_factor, project_identity

__version__ = "0.1.0"
