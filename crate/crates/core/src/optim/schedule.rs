/// Learning-rate schedules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `max(floor_lr, base_lr * 0.5^(iteration / interval))`
    StepHalving { base_lr: f64, interval: usize, floor_lr: f64 },
    /// Geometric from `start_lr` at epoch 0 to `end_lr` at epoch
    /// `total_epochs - 1`, constant afterwards.
    InterpolatedDecay { start_lr: f64, end_lr: f64, total_epochs: usize },
}

/// Pixels in a 240x320 deep-net output.
pub const DEEP_PREDICTIONS_PER_IMAGE: f64 = 320.0 * 240.0;

impl Schedule {
    /// Base rate 0.01 divided by the predictions per image, halved every 100
    /// iterations, floored at base / 1024.
    pub fn deep() -> Self {
        let base_lr = 0.01 / DEEP_PREDICTIONS_PER_IMAGE;
        Schedule::StepHalving {
            base_lr,
            interval: 100,
            floor_lr: base_lr / 1024.0,
        }
    }

    /// 0.03 down to 0.0001 over 1,000 epochs.
    pub fn shallow() -> Self {
        Schedule::InterpolatedDecay {
            start_lr: 0.03,
            end_lr: 0.0001,
            total_epochs: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Schedule::Constant(lr) if !positive(lr) => Err(format!("learning rate {lr} must be positive")),
            Schedule::StepHalving { base_lr, interval, floor_lr } => {
                if !positive(base_lr) || interval == 0 || !(0.0..=base_lr).contains(&floor_lr) {
                    Err(format!(
                        "step halving needs base_lr > 0, interval > 0 and 0 <= floor_lr <= base_lr \
                         (got {base_lr}, {interval}, {floor_lr})"
                    ))
                } else {
                    Ok(())
                }
            }
            Schedule::InterpolatedDecay { start_lr, end_lr, total_epochs } => {
                if !positive(start_lr) || !positive(end_lr) || end_lr > start_lr || total_epochs == 0 {
                    Err(format!(
                        "interpolated decay needs 0 < end_lr <= start_lr and total_epochs > 0 \
                         (got {start_lr}, {end_lr}, {total_epochs})"
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

pub fn lr_at(schedule: &Schedule, iteration: usize, epoch: usize) -> f64 {
    match *schedule {
        Schedule::Constant(lr) => lr,
        Schedule::StepHalving { base_lr, interval, floor_lr } => {
            let halvings = (iteration / interval).min(2048) as i32;
            (base_lr * 0.5f64.powi(halvings)).max(floor_lr)
        }
        Schedule::InterpolatedDecay { start_lr, end_lr, total_epochs } => {
            let last = total_epochs.saturating_sub(1);
            if epoch == 0 {
                start_lr
            } else if epoch >= last {
                end_lr
            } else {
                let f = epoch as f64 / last as f64;
                (start_lr.ln() + f * (end_lr.ln() - start_lr.ln()))
                    .exp()
                    .clamp(end_lr, start_lr)
            }
        }
    }
}
