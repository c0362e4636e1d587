//! Learning-rate schedules, registered by name.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Cosine,
    OneCycle,
    Plateau,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Cosine => "cosine",
            Self::OneCycle => "onecycle",
            Self::Plateau => "plateau",
        }
    }
}

/// Parameters shared by all schedule variants; each reads what it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Peak (or constant) rate.
    pub base_lr: f64,
    pub total_steps: u64,
    /// Cosine floor, as a fraction of `base_lr`.
    pub min_fraction: f64,
    /// One-cycle warm-up share of `total_steps`.
    pub warmup_fraction: f64,
    /// One-cycle start and end rate is `base_lr / div_factor`.
    pub div_factor: f64,
    pub patience: usize,
    pub decay_factor: f64,
}

impl ScheduleConfig {
    pub fn new(base_lr: f64, total_steps: u64) -> Self {
        Self {
            base_lr,
            total_steps,
            min_fraction: 1e-2,
            warmup_fraction: 0.3,
            div_factor: 25.0,
            patience: 5,
            decay_factor: 0.5,
        }
    }
}

pub trait LrPolicy: Send {
    fn name(&self) -> &'static str;

    /// Rate for optimizer step `step` (0-based) within epoch `epoch`.
    fn lr_at(&self, step: u64, epoch: usize) -> f64;

    /// Reports the monitored metric (lower is better) at the end of an epoch.
    fn end_epoch(&mut self, _metric: f64) {}
}

pub type ScheduleFactory = fn(&ScheduleConfig) -> Box<dyn LrPolicy>;

pub fn schedules() -> Registry<ScheduleFactory> {
    Registry::<ScheduleFactory>::new("lr schedule")
        .with("constant", |c| Box::new(Constant(c.base_lr)))
        .with("cosine", |c| {
            Box::new(Cosine {
                max: c.base_lr,
                min: c.base_lr * c.min_fraction,
                total: c.total_steps,
            })
        })
        .with("onecycle", |c| {
            Box::new(OneCycle {
                max: c.base_lr,
                edge: c.base_lr / c.div_factor,
                warmup: c.warmup_fraction * c.total_steps as f64,
                total: c.total_steps as f64,
            })
        })
        .with("plateau", |c| {
            Box::new(Plateau {
                lr: c.base_lr,
                patience: c.patience,
                factor: c.decay_factor,
                best: f64::INFINITY,
                bad_epochs: 0,
            })
        })
}

pub fn build(kind: ScheduleKind, config: &ScheduleConfig) -> Box<dyn LrPolicy> {
    let factory = schedules()
        .get(kind.name())
        .copied()
        .expect("every kind is registered");
    factory(config)
}

struct Constant(f64);

impl LrPolicy for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn lr_at(&self, _: u64, _: usize) -> f64 {
        self.0
    }
}

struct Cosine {
    max: f64,
    min: f64,
    total: u64,
}

impl LrPolicy for Cosine {
    fn name(&self) -> &'static str {
        "cosine"
    }

    fn lr_at(&self, step: u64, _: usize) -> f64 {
        if self.total == 0 {
            return self.max;
        }
        let t = step.min(self.total) as f64 / self.total as f64;
        self.min + 0.5 * (self.max - self.min) * (1.0 + (PI * t).cos())
    }
}

struct OneCycle {
    max: f64,
    edge: f64,
    warmup: f64,
    total: f64,
}

impl LrPolicy for OneCycle {
    fn name(&self) -> &'static str {
        "onecycle"
    }

    fn lr_at(&self, step: u64, _: usize) -> f64 {
        let t = (step as f64).min(self.total);
        if t <= self.warmup {
            if self.warmup == 0.0 {
                return self.max;
            }
            self.edge + (self.max - self.edge) * t / self.warmup
        } else {
            let frac = (t - self.warmup) / (self.total - self.warmup);
            self.edge + 0.5 * (self.max - self.edge) * (1.0 + (PI * frac).cos())
        }
    }
}

struct Plateau {
    lr: f64,
    patience: usize,
    factor: f64,
    best: f64,
    bad_epochs: usize,
}

impl LrPolicy for Plateau {
    fn name(&self) -> &'static str {
        "plateau"
    }

    fn lr_at(&self, _: u64, _: usize) -> f64 {
        self.lr
    }

    fn end_epoch(&mut self, metric: f64) {
        if metric < self.best {
            self.best = metric;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
            }
        }
    }
}
