//! One-dimensional convolutional Wasserstein GAN for noise traces.

mod config;
pub mod gradcheck;
mod model;
mod train;

pub use config::{NgganConfig, SCALE};
pub use gradcheck::{network_grad_check, NetworkCheck};
pub use model::{
    build_model, critic_loss, generator_loss, latent_batch, Critic, CriticCache, GenCache, Generator,
    NgganModel,
};
pub use train::{
    config_hash, from_checkpoint, generate, load_model, save_model, split_holdout, to_checkpoint, train,
    EpochRecord, TrainHistory, TrainOutput,
};
