//! Spike-train metrics: ERRt, firing rates, ISI statistics.

use thiserror::Error;

use crate::network::SpikeRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("spike times must be finite and strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("{which} train has {count} spikes; at least 2 are needed")]
    InsufficientSpikes { which: &'static str, count: usize },
    #[error("reference inter-spike gap is zero")]
    DegenerateReference,
    #[error("window start {start} ms must precede end {end} ms")]
    InvalidWindow { start: f64, end: f64 },
}

/// Spike times in ms, strictly increasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpikeTrain {
    times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(times: Vec<f64>) -> Result<Self, AnalysisError> {
        for (i, t) in times.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= times[i - 1]) {
                return Err(AnalysisError::NotIncreasing(i));
            }
        }
        Ok(SpikeTrain { times })
    }

    /// Builds a train from strictly increasing step indices.
    pub fn from_steps(steps: &[u64], dt_ms: f64) -> Result<Self, AnalysisError> {
        Self::new(steps.iter().map(|&s| s as f64 * dt_ms).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn isis(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Spikes at or after `t_ms`.
    pub fn after(&self, t_ms: f64) -> SpikeTrain {
        SpikeTrain {
            times: self.times.iter().copied().filter(|&t| t >= t_ms).collect(),
        }
    }

    fn first_gap(&self, which: &'static str) -> Result<f64, AnalysisError> {
        match self.times.as_slice() {
            [t1, t2, ..] => Ok(t2 - t1),
            _ => Err(AnalysisError::InsufficientSpikes {
                which,
                count: self.len(),
            }),
        }
    }
}

/// Relative error, in percent, of the first inter-spike gap of `test`
/// against that of `reference`.
pub fn errt(reference: &SpikeTrain, test: &SpikeTrain) -> Result<f64, AnalysisError> {
    let fl = reference.first_gap("reference")?;
    let x = test.first_gap("test")?;
    if fl == 0.0 {
        return Err(AnalysisError::DegenerateReference);
    }
    Ok(((x - fl) / fl).abs() * 100.0)
}

/// Like [`errt`] but compares the mean inter-spike gap of each train.
/// A diagnostic only.
pub fn errt_mean_gaps(reference: &SpikeTrain, test: &SpikeTrain) -> Result<f64, AnalysisError> {
    reference.first_gap("reference")?;
    test.first_gap("test")?;
    let mean = |t: &SpikeTrain| (t.times[t.len() - 1] - t.times[0]) / (t.len() - 1) as f64;
    let fl = mean(reference);
    if fl == 0.0 {
        return Err(AnalysisError::DegenerateReference);
    }
    Ok(((mean(test) - fl) / fl).abs() * 100.0)
}

/// Spikes in `[start, end)` per second.
pub fn firing_rate(train: &SpikeTrain, window_ms: (f64, f64)) -> Result<f64, AnalysisError> {
    let (start, end) = window_ms;
    if start.partial_cmp(&end) != Some(std::cmp::Ordering::Less) {
        return Err(AnalysisError::InvalidWindow { start, end });
    }
    let n = train
        .times
        .iter()
        .filter(|&&t| t >= start && t < end)
        .count();
    Ok(n as f64 / ((end - start) / 1000.0))
}

/// Mean of the per-neuron rates of one population over `[start, end)`.
/// Neurons that never fire count as 0 Hz.
pub fn population_rate(
    record: &SpikeRecord,
    population: &str,
    dt_ms: f64,
    window_ms: (f64, f64),
) -> Result<f64, AnalysisError> {
    let (start, end) = window_ms;
    if start.partial_cmp(&end) != Some(std::cmp::Ordering::Less) {
        return Err(AnalysisError::InvalidWindow { start, end });
    }
    let (Some(id), Some(size)) = (record.population_id(population), record.size_of(population))
    else {
        return Ok(0.0);
    };
    let n = record
        .events
        .iter()
        .filter(|e| e.population as usize == id)
        .map(|e| e.step as f64 * dt_ms)
        .filter(|&t| t >= start && t < end)
        .count();
    Ok(n as f64 / size as f64 / ((end - start) / 1000.0))
}

/// Coefficient of variation (population standard deviation over mean).
pub fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}
