use std::collections::VecDeque;

use super::LevelingError;

/// Default window of the tilt prefilter.
pub const DEFAULT_WINDOW: usize = 5;

/// One raw roll reading from the IMU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub alpha_raw: f64,
}

/// Sliding-window mean over the most recent raw roll samples.
///
/// Until the window has filled, the output is the mean of the samples seen
/// so far.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingAverageState {
    window: VecDeque<f64>,
    capacity: usize,
    count: u64,
    last_t: Option<f64>,
}

impl Default for MovingAverageState {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl MovingAverageState {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            window: VecDeque::with_capacity(capacity),
            capacity,
            count: 0,
            last_t: None,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn window(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    pub fn push(&mut self, sample: ImuSample) -> Result<f64, LevelingError> {
        if let Some(prev) = self.last_t {
            if sample.t <= prev {
                return Err(LevelingError::NonMonotonicTimestamp {
                    previous: prev,
                    current: sample.t,
                });
            }
        }
        self.last_t = Some(sample.t);
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(sample.alpha_raw);
        self.count += 1;
        Ok(self.mean())
    }

    pub fn mean(&self) -> f64 {
        if self.window.is_empty() {
            return 0.0;
        }
        self.window.iter().sum::<f64>() / self.window.len() as f64
    }

    /// Clears the window but keeps the timestamp ordering.
    pub fn clear(&mut self) {
        self.window.clear();
    }
}

pub fn moving_average_step(
    mut state: MovingAverageState,
    sample: ImuSample,
) -> Result<(MovingAverageState, f64), LevelingError> {
    let out = state.push(sample)?;
    Ok((state, out))
}
