//! Multitask feed-forward network with dropout (DNND): shared ReLU hidden
//! layers and one logistic output per horizon.
//!
//! Dropout masks keep each unit with probability `r`; the input features are
//! masked as well. At test time every masked layer input is scaled by `r`.

mod net;
mod train;

pub use net::{
    backward, forward_dropout, init_network, multitask_loss, sgd_step, zeros_like, Cache, Layer,
    Masks, Mode, NetArchitecture, Network, Params,
};
pub use train::{predict_dnnd, train_dnnd, DnndModel, TaskPrediction, TrainReport, TrainSchedule};
