use std::f64::consts::PI;

/// Cosine annealing with warm restarts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub eta_max: f64,
    pub eta_min: f64,
    /// First restart period in steps.
    pub t0: u64,
    /// Period multiplier after each restart.
    pub t_mult: u64,
}

impl LrSchedule {
    pub fn new(eta_max: f64, t0: u64) -> Self {
        Self { eta_max, eta_min: 0.0, t0, t_mult: 1 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 <= self.eta_min && self.eta_min <= self.eta_max) {
            return Err(format!("need 0 <= eta_min <= eta_max (got {} / {})", self.eta_min, self.eta_max));
        }
        if self.t0 < 1 || self.t_mult < 1 {
            return Err("restart period and multiplier must be >= 1".into());
        }
        Ok(())
    }

    /// (steps since the last restart, current period)
    pub fn cycle_position(&self, step: u64) -> (u64, u64) {
        if self.t_mult == 1 {
            return (step % self.t0, self.t0);
        }
        let mut start = 0u64;
        let mut period = self.t0;
        while step >= start + period {
            start += period;
            period *= self.t_mult;
        }
        (step - start, period)
    }

    pub fn lr(&self, step: u64) -> f64 {
        let (t_cur, period) = self.cycle_position(step);
        self.eta_min + 0.5 * (self.eta_max - self.eta_min) * (1.0 + (PI * t_cur as f64 / period as f64).cos())
    }
}

pub fn cosine_warm_restart_lr(step: u64, schedule: &LrSchedule) -> f64 {
    schedule.lr(step)
}
