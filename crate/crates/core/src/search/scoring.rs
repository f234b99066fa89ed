//! Progress scoring and budget adaptation.

/// Subgoals discharged by a step; never negative.
pub fn progress_gain(k_parent: usize, k_child: usize) -> usize {
    k_parent.saturating_sub(k_child)
}

/// Bonus for rarely used method families.
pub fn diversification_reward(usage: u64, gamma_w: f64, gamma_cap: f64) -> f64 {
    gamma_cap.min(gamma_w / (1.0 + (usage as f64).sqrt()))
}

pub fn beam_score(k_child: usize, prefix_len: usize, delta: usize, bonus: f64) -> f64 {
    -(k_child as f64) - 0.01 * prefix_len as f64 + 0.25 * delta as f64 + bonus
}

/// Live beam width and candidate budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    pub beam_width: usize,
    pub candidates: usize,
}

/// Shrink under timeout pressure; widen after a stagnant stretch.
pub fn adapt_budgets(live: Budgets, initial_candidates: usize, timeout_rate: f64, stagnant: bool) -> Budgets {
    if timeout_rate > 0.5 {
        Budgets {
            beam_width: (live.beam_width.saturating_sub(1)).max(live.beam_width.min(2)),
            candidates: (live.candidates * 3 / 4).max(live.candidates.min(4)),
        }
    } else if stagnant {
        Budgets {
            beam_width: live.beam_width,
            candidates: (live.candidates * 5).div_ceil(4).min(2 * initial_candidates).max(live.candidates),
        }
    } else {
        live
    }
}

/// Tracks consecutive depths without progress.
#[derive(Debug, Clone, Default)]
pub struct BudgetController {
    stagnant_depths: usize,
}

impl BudgetController {
    pub fn update(&mut self, live: Budgets, initial_candidates: usize, timeout_rate: f64, progress_rate: f64) -> Budgets {
        if progress_rate == 0.0 {
            self.stagnant_depths += 1;
        } else {
            self.stagnant_depths = 0;
        }
        let stagnant = self.stagnant_depths >= 2;
        let next = adapt_budgets(live, initial_candidates, timeout_rate, stagnant);
        if stagnant && timeout_rate <= 0.5 {
            self.stagnant_depths = 0;
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gains() {
        assert_eq!(progress_gain(3, 1), 2);
        assert_eq!(progress_gain(2, 5), 0);
        assert_eq!(progress_gain(4, 4), 0);
    }

    #[test]
    fn budgets() {
        let live = Budgets { beam_width: 6, candidates: 12 };
        assert_eq!(adapt_budgets(live, 12, 0.6, false), Budgets { beam_width: 5, candidates: 9 });
        assert_eq!(adapt_budgets(live, 12, 0.2, false), live);
        assert_eq!(adapt_budgets(live, 12, 0.0, true), Budgets { beam_width: 6, candidates: 15 });
        let big = Budgets { beam_width: 6, candidates: 23 };
        assert_eq!(adapt_budgets(big, 12, 0.0, true).candidates, 24);
        let small = Budgets { beam_width: 2, candidates: 4 };
        assert_eq!(adapt_budgets(small, 12, 0.9, false), small);
    }

    #[test]
    fn controller_needs_two_stagnant_depths() {
        let mut ctl = BudgetController::default();
        let live = Budgets { beam_width: 6, candidates: 12 };
        let after_one = ctl.update(live, 12, 0.0, 0.0);
        assert_eq!(after_one, live);
        let after_two = ctl.update(after_one, 12, 0.0, 0.0);
        assert_eq!(after_two.candidates, 15);
        let healthy = ctl.update(after_two, 12, 0.0, 0.5);
        assert_eq!(healthy, after_two);
    }
}
