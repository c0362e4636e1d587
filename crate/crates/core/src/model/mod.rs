//! The hybrid model: conv and PCA branches, fusion, pre-quantum MLP, phase
//! encoder, photonic layer and classifier head; its training loop, the
//! parameter-matched classical baseline and checkpoints.

mod baseline;
mod checkpoint;
mod encoder;
mod network;
mod spec;
mod timing;
mod train;

pub use baseline::{build_classical_baseline, BUDGET_TOLERANCE};
pub use checkpoint::{ModelCheckpoint, TrainingMetadata, CHECKPOINT_FORMAT};
pub use encoder::{phase_encode, PhaseActivation};
pub use network::{count_parameters, ForwardVars, PhotonicModel, Prepared};
pub use spec::{Hyperparams, ModelSpec, QuantumSpec, FRONTEND_CHANNELS, MAX_INPUT_SIZE};
pub use timing::classical_forward_ms;
pub use train::{evaluate, train_model, EpochRecord, Evaluation, TrainBudget, TrainOutcome};
