from .extractor import FeatureExtractor, extract_features
from .network import (PosePrediction, SprModel, SprModelConfig, SprOutputs,
                      StreamingPredictor, chain_steps, spr_loss,
                      spr_loss_batch)
from .data import (FeatTraj, extractor_for_dataset, load_feat_trajs,
                   split_trajs)
from .training import (TrainConfig, load_spr_model, restore_params,
                       save_spr_model, train_spr, validation_errors,
                       window_loss, write_metrics_csv)

__all__ = [
    "FeatureExtractor", "extract_features", "PosePrediction", "SprModel",
    "SprModelConfig", "SprOutputs", "StreamingPredictor", "chain_steps",
    "spr_loss", "spr_loss_batch", "FeatTraj", "extractor_for_dataset",
    "load_feat_trajs",
    "split_trajs", "TrainConfig", "load_spr_model", "restore_params",
    "save_spr_model", "train_spr", "validation_errors", "window_loss",
    "write_metrics_csv",
]
