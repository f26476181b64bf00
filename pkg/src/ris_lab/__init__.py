"""Multi-RIS MISO downlink lab: geometric/vision RIS selection plus
unsupervised neural joint power/phase optimization and an AO baseline."""

from .baseline import AOConfig, ao_optimize, grid_oracle
from .config import (RunConfig, SystemConfig, config_hash, load_config,
                     save_config)
from .datagen import generate_dataset, write_dataset
from .geometry import (Point2, Polygon, Scene, load_scene, save_scene,
                       select_ris)
from .policy import TrainConfig, infer, load_params, save_params, train
from .scenes import SceneGenConfig, random_scene
from .transmit import (ChannelBatch, ChannelSet, load_dataset,
                       sample_channels, save_dataset, weighted_sum_rate)
from .vision import recover_scene, render_top_view

__version__ = "0.1.0"

__all__ = [
    "AOConfig", "ao_optimize", "grid_oracle",
    "RunConfig", "SystemConfig", "config_hash", "load_config", "save_config",
    "generate_dataset", "write_dataset",
    "Point2", "Polygon", "Scene", "load_scene", "save_scene", "select_ris",
    "TrainConfig", "infer", "load_params", "save_params", "train",
    "SceneGenConfig", "random_scene",
    "ChannelBatch", "ChannelSet", "load_dataset", "sample_channels",
    "save_dataset", "weighted_sum_rate",
    "recover_scene", "render_top_view",
    "__version__",
]
