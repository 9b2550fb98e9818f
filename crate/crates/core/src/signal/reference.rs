use alloc::string::ToString;
use alloc::vec::Vec;

use crate::data::RawRecording;
use crate::{Error, Result};

/// Subtracts the per-sample mean of `reference_channels` from every channel,
/// then drops the reference channels.
pub fn rereference(rec: &RawRecording, reference_channels: &[&str]) -> Result<RawRecording> {
    if reference_channels.is_empty() {
        return Err(Error::InvalidConfig("empty reference channel list".into()));
    }
    let idx: Vec<usize> = reference_channels
        .iter()
        .map(|name| {
            rec.channel_index(name)
                .ok_or_else(|| Error::UnknownChannel(name.to_string()))
        })
        .collect::<Result<_>>()?;
    let n = rec.n_samples();
    let k = idx.len() as f64;
    let reference: Vec<f64> = (0..n)
        .map(|t| idx.iter().map(|&i| rec.data[i][t]).sum::<f64>() / k)
        .collect();
    let mut channels = Vec::new();
    let mut data = Vec::new();
    for (ci, (name, row)) in rec.channels.iter().zip(&rec.data).enumerate() {
        if idx.contains(&ci) {
            continue;
        }
        channels.push(name.clone());
        data.push(row.iter().zip(&reference).map(|(x, r)| x - r).collect());
    }
    RawRecording::new(
        rec.subject_id.clone(),
        rec.sample_rate,
        channels,
        data,
        rec.trials.clone(),
    )
}
