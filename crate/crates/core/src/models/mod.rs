//! Windowing, forecasters, the directional loss, training and grid search.

pub mod config;
pub mod features;
pub mod forecaster;
pub mod grid;
pub mod loss;
pub mod nlinear;
pub mod tft;
pub mod train;
pub mod windows;

pub use config::TrainConfig;
pub use features::{known_future_row, FeatureSet, CLOSE_INDEX, KNOWN_FUTURE_WIDTH};
pub use forecaster::{
    forecast_windows, naive_forecast_windows, naive_seasonal_forecast, pooled, Forecast, Forecaster, ModelKind,
};
pub use grid::{grid_search, GridEntry, GridOutcome, GridResult, GridSettings, GridSpace};
pub use loss::{direction_weights, dmse_loss, dmse_loss_with_alpha, loss_node, mse_loss, LossKind, DMSE_ALPHA};
pub use nlinear::NLinear;
pub use tft::{TftLite, TftLiteConfig};
pub use train::{evaluate_loss, mix_seed, train_model, TrainReport};
pub use windows::{
    build_windows, slide_windows, split_index, window_count, FeatureStats, Normalizer, WindowSample, WindowSet,
};
