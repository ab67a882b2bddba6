"""Instance-level multi-view fusion and spatial-relation tokens for 3D scenes."""

from .pipeline import PipelineConfig, RunReport, TokenBundle, run_pipeline
from .scene import Scene, load_scene, save_scene
from .synth import synth_scene

__all__ = ["PipelineConfig", "RunReport", "Scene", "TokenBundle", "load_scene", "run_pipeline",
           "save_scene", "synth_scene"]
__version__ = "0.1.0"
