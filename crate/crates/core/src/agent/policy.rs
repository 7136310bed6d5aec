//! Action-selection rules: power-flow weighted exploration, count-normalised
//! exploitation and the ε schedule. Ties go to the lowest branch id.

use super::counts::CountTable;
use crate::error::{Error, Result};

fn visit_discount(count: u32) -> f64 {
    ((count as f64) + 1.0).sqrt()
}

fn masked_argmax(mask: &[bool], score: impl Fn(usize) -> f64) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (a, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let s = score(a);
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((a, s));
        }
    }
    best.map(|(a, _)| a).ok_or(Error::NoAvailableAction)
}

/// argmax over available ℓ of `|flow(ℓ)| / √(count(prefix, ℓ) + 1)`. The
/// normalising sum over candidates is a common positive factor and is omitted.
pub fn select_explore(flows: &[f64], counts: &CountTable, prefix: &[usize], mask: &[bool]) -> Result<usize> {
    let row = counts.row(prefix);
    masked_argmax(mask, |a| flows[a].abs() / visit_discount(row.map_or(0, |r| r[a])))
}

/// argmax over available ℓ of `Q(ℓ) / √(count(prefix, ℓ) + 1)`.
pub fn select_exploit(q_values: &[f64], counts: &CountTable, prefix: &[usize], mask: &[bool]) -> Result<usize> {
    let row = counts.row(prefix);
    masked_argmax(mask, |a| q_values[a] / visit_discount(row.map_or(0, |r| r[a])))
}

/// `max(Σ_j PF_j/√(count(∅, j)+1) / Σ_j PF_j, ε_0)` over the first-stage
/// actions `stage1` with outage-free flows `flows`.
pub fn update_epsilon(flows: &[f64], stage1: &[bool], counts: &CountTable, eps0: f64) -> f64 {
    let row = counts.row(&[]);
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, _) in stage1.iter().enumerate().filter(|(_, &m)| m) {
        let pf = flows[a].abs();
        num += pf / visit_discount(row.map_or(0, |r| r[a]));
        den += pf;
    }
    let ratio = if den > 0.0 { num / den } else { 1.0 };
    ratio.max(eps0)
}
