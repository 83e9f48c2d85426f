use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::tensor::seeded_rng;

/// Dev-set size for `n` items: `round(n * fraction)`, halves rounded away
/// from zero.
pub fn dev_size(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Seeded random partition into `(train, dev)`. Both parts keep the
/// original relative order of their items.
pub fn dev_split<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!("dev fraction must lie in (0, 1), got {fraction}")));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    let n_dev = dev_size(items.len(), fraction);
    let mut is_dev = vec![false; items.len()];
    for &i in &order[..n_dev] {
        is_dev[i] = true;
    }
    let mut train = Vec::with_capacity(items.len() - n_dev);
    let mut dev = Vec::with_capacity(n_dev);
    for (item, dev_flag) in items.iter().zip(is_dev) {
        if dev_flag {
            dev.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, dev))
}
