// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bidirectional recurrent encoder over component tokens, trained jointly on
//! masked-token reconstruction and classification.

mod checkpoint;
mod network;
mod optim;
mod params;
mod train;

pub use checkpoint::Checkpoint;
pub use network::{
    batch_loss, ce_loss, classify, classify_batch, features_batch, forward_features,
    loss_and_gradients, mae_loss, softmax_cross_entropy, BatchItem, Features, LossReport,
};
pub use optim::{clip_grad_norm, Adam};
pub use params::{EncoderDims, EncoderParams, LstmParams};
pub use train::{
    accuracy_on, derive_seed, train, train_from, EpochLog, LabeledSequence, TrainOutcome,
};
