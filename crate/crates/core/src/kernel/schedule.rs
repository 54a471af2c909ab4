use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup to `base_rate` over the first `⌊warmup_fraction·total⌋`
/// steps, then linear decay to zero at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub base_rate: f64,
    pub total_steps: usize,
    pub warmup_fraction: f64,
}

impl LinearSchedule {
    pub fn warmup_steps(&self) -> usize {
        ((self.warmup_fraction * self.total_steps as f64) + 1e-9).floor() as usize
    }

    /// Step 0 returns the first ramp increment (`base/warmup`) rather than 0.
    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::Contract(format!(
                "step {step} outside schedule of {} steps",
                self.total_steps
            )));
        }
        let warmup = self.warmup_steps();
        let base = self.base_rate;
        Ok(if step < warmup {
            base * step.max(1) as f64 / warmup as f64
        } else if warmup >= self.total_steps {
            base
        } else {
            base * (self.total_steps - step) as f64 / (self.total_steps - warmup) as f64
        })
    }
}
