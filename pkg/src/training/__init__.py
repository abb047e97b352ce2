from src.training.dataset import (
    Batch,
    Sample,
    SlicedDataset,
    TrainingError,
    augment_heading,
    holdout_indices,
    rotate_heading,
    slice_dataset,
    split_holdout,
)
from src.training.loss import motion_loss, motion_loss_and_grad
from src.training.trainer import Adam, LossCurve, TrainingDivergedError, TrainingResult, train
