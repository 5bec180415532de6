pub mod evaluate;
pub mod fit;
pub mod sample;
pub mod simulate;
pub mod transfer;

use judgmix::eval::{shuffled_order, JudgmentRecord};

use crate::output::Reporter;

/// Seeded random subset of `r` records, or all of them in file order when
/// `r` is absent or too large.
pub fn subsample(records: Vec<JudgmentRecord>, r: Option<usize>, seed: u64, out: &Reporter) -> Vec<JudgmentRecord> {
    match r {
        Some(r) if r < records.len() => {
            let order = shuffled_order(records.len(), seed, 0);
            order[..r].iter().map(|&i| records[i].clone()).collect()
        }
        Some(r) => {
            if r > records.len() {
                out.warn(format!("--r {r} exceeds the {} records available; using all", records.len()));
            }
            records
        }
        None => records,
    }
}
