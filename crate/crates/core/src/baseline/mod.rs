//! Linear stimulus-reconstruction decoder: time-lagged ridge regression from
//! EEG to the attended speech envelope, with the attention decision taken by
//! Pearson correlation against both candidate envelopes.

mod decoder;
mod envelope;

pub use decoder::{
    decide_attention, fit_decoder, max_lag_samples, reconstruct, select_lambda, AttentionDecision,
    LaggedCovariance, LinearDecoder, DEFAULT_LAG_S, LAMBDA_GRID,
};
pub use envelope::Envelope;
