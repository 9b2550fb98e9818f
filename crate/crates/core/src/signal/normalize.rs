use crate::data::RawRecording;
use crate::{Error, Result};

/// Shifts and scales every (channel, trial) segment to mean 0 and population
/// variance 1. Samples outside trials are left as they are.
pub fn normalize_trial(rec: &RawRecording) -> Result<RawRecording> {
    let mut out = rec.clone();
    for (ti, trial) in rec.trials.iter().enumerate() {
        for (ci, row) in out.data.iter_mut().enumerate() {
            let seg = &mut row[trial.start..trial.end];
            let zero_var = || Error::ZeroVariance {
                channel: rec.channels[ci].clone(),
                trial: ti,
            };
            if seg.len() < 2 {
                return Err(zero_var());
            }
            let n = seg.len() as f64;
            let mean = seg.iter().sum::<f64>() / n;
            let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if !(var > 0.0) || !var.is_finite() {
                return Err(zero_var());
            }
            let inv_sd = 1.0 / libm::sqrt(var);
            for v in seg.iter_mut() {
                *v = (*v - mean) * inv_sd;
            }
        }
    }
    Ok(out)
}
