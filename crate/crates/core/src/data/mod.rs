//! Recordings, montages, decision windows, stratified splits and the
//! synthetic cocktail-party generator.

mod montage;
mod recording;
mod split;
mod synth;
mod window;

pub use montage::{Electrode, Hemisphere, Montage};
pub use recording::{subset_channels, AttentionLabel, RawRecording, Trial};
pub use split::{merge_spans, stratified_split, Partition, SplitSet, SPLIT_RATIOS};
pub use synth::{synth_recording, EnvelopeSynth, SynthConfig, SyntheticSubject};
pub use window::{segment_windows, window_count, window_starts, DecisionWindow, WindowOrigin};
