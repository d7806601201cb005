//! Feed-forward network engine used by the estimators.

mod checkpoint;
mod mat;
mod mlp;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, FORMAT, VERSION};
pub use mat::{gemm, Mat};
pub use mlp::{
    adam_step, backward, init_he_normal, loss, Activation, AdamConfig, AdamState, ForwardCache, Grads, Layer, LayerSpec, LossKind, MlpParams,
    Mode, Scaler, STD_FLOOR,
};
pub use train::{split_indices, train, EpochRecord, History, PlateauConfig, PlateauScheduler, ScalerFit, TrainConfig, TrainData};
