/// Running-best improvement tracker shared by the scheduler and early stopping.
/// A loss counts as an improvement when it is at least `min_improvement`
/// below the best seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub min_improvement: f64,
    pub best: f64,
    pub bad_epochs: usize,
}

impl Plateau {
    pub fn new(min_improvement: f64) -> Self {
        Self {
            min_improvement,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records a loss; returns whether it improved the running best.
    pub fn observe(&mut self, loss: f64) -> bool {
        if self.best.is_infinite() || self.best - loss >= self.min_improvement {
            self.best = loss;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }
}

/// Multiplies the learning rate by `factor` once `patience` consecutive
/// epochs pass without improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReduceOnPlateau {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub tracker: Plateau,
    pub reductions: usize,
}

impl ReduceOnPlateau {
    pub fn new(lr: f64, factor: f64, patience: usize, min_improvement: f64) -> Self {
        Self {
            lr,
            factor,
            patience: patience.max(1),
            tracker: Plateau::new(min_improvement),
            reductions: 0,
        }
    }

    pub fn step(&mut self, val_loss: f64) -> f64 {
        self.tracker.observe(val_loss);
        if self.tracker.bad_epochs >= self.patience {
            self.lr *= self.factor;
            self.reductions += 1;
            self.tracker.bad_epochs = 0;
        }
        self.lr
    }
}

/// True when the last `patience` epochs all failed to improve the running
/// best by `min_improvement`.
pub fn early_stop(history: &[f64], patience: usize, min_improvement: f64) -> bool {
    let mut t = Plateau::new(min_improvement);
    for v in history {
        t.observe(*v);
    }
    !history.is_empty() && t.bad_epochs >= patience
}
