//! Single-layer LSTM sequence model with a dropout → FC(ReLU) → output head,
//! trained by backpropagation through time with Adam, global-norm gradient
//! clipping and L2 regularization. All arithmetic is `f64`; the model file
//! stores parameters as `f32`.

mod config;
mod format;
mod loss;
mod lstm;
mod model;
mod optim;
mod train;

pub use config::{count_params, Layout, ModelConfig, DEFAULT_DROPOUT, DEFAULT_FC};
pub use format::{load_model, save_model, MAGIC, VERSION};
pub use loss::{loss_rmse, loss_xent, softmax_in_place};
pub use lstm::ForwardCache;
pub use model::{
    init_model, lstm_forward, to_time_major, BatchTargets, Gradients, Mode, Model, Params,
    TrainingMeta,
};
pub use optim::{
    adam_step, add_l2_gradient, clip_gradients, global_norm, AdamState, DEFAULT_BETA1,
    DEFAULT_BETA2, DEFAULT_CLIP_THRESHOLD, DEFAULT_EPSILON, DEFAULT_L2_ALPHA,
    DEFAULT_LEARNING_RATE,
};
pub use train::{
    predict_examples, train, transfer_train, Examples, Targets, TrainOptions, DEFAULT_BATCH,
    DEFAULT_EPOCHS, DEFAULT_TRANSFER_EPOCHS,
};
