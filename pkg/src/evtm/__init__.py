"""evtm: event-guided atmospheric turbulence simulation and mitigation.

Simulates turbulence degradation of frame sequences, synthesizes the
matching event streams, and restores frames using two event-derived priors:
polarity-alternation edge weighting for static scenes and event-tube motion
fitting for dynamic objects.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .core import (
    Event,
    EventStream,
    Frame,
    FrameSequence,
    GradientMap,
    MotionField,
    PaepMap,
    TubeFitMap,
    TubeLabel,
    TurbulenceField,
)
from .epaw import SceneRestoreParams, epaw_restore_scene, epaw_sharpen, scene_mask, temporal_average
from .ettube import (
    TubeParams,
    classify_events,
    edge_masked_motion,
    fit_event_tubes,
    project_to_motion_field,
)
from .evsynth import EvsParams, VoxelGrid, accumulate_voxels, synthesize_events
from .metrics import charbonnier, psnr, rmse, ssim
from .paep import count_paep, epaw_weights, gradient_map, paep_gradient_correlation
from .restore import RestoreParams, motion_compensate, restore_frame
from .turbsim import (
    TurbParams,
    apply_turbulence,
    generate_tilt_field,
    inject_object,
    warp_frame,
)

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventStream",
    "EvsParams",
    "Frame",
    "FrameSequence",
    "GradientMap",
    "KERNEL_BACKEND",
    "MotionField",
    "PaepMap",
    "RestoreParams",
    "SceneRestoreParams",
    "TubeFitMap",
    "TubeLabel",
    "TubeParams",
    "TurbParams",
    "TurbulenceField",
    "VoxelGrid",
    "accumulate_voxels",
    "apply_turbulence",
    "charbonnier",
    "classify_events",
    "count_paep",
    "edge_masked_motion",
    "epaw_restore_scene",
    "epaw_sharpen",
    "epaw_weights",
    "fit_event_tubes",
    "generate_tilt_field",
    "gradient_map",
    "inject_object",
    "motion_compensate",
    "paep_gradient_correlation",
    "project_to_motion_field",
    "psnr",
    "restore_frame",
    "rmse",
    "scene_mask",
    "ssim",
    "synthesize_events",
    "temporal_average",
    "warp_frame",
]
