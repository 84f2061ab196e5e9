"""Key-frame selection, efficient token projection and token budgeting."""

from ._framescope import (  # noqa: F401
    FramescopeError,
    adaptive_avg_pool2d,
    default_config,
    frame_scores,
    gradcheck,
    mac_report,
    project,
    read_features,
    run_pipeline,
    spatial_attention,
    stage_plan,
    synth_image_features,
    synth_video_features,
    token_budget,
    top_k_frames,
    uniform_sample_indices,
    write_features,
)

__all__ = [name for name in dir() if not name.startswith("_")]
