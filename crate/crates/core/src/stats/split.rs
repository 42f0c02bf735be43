use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::util::splitmix64;
use crate::{Error, Result};

/// Half-up rounding of `fraction * n`.
pub fn test_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5 + 1e-9).floor() as usize
}

fn validate(fraction: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) || !fraction.is_finite() {
        return Err(Error::Config(format!("test fraction {fraction} outside [0, 1]")));
    }
    Ok(())
}

/// Label-stratified train/test split. Each stratum contributes
/// `round_half_up(fraction * stratum_size)` rows to the test set, drawn by a
/// seeded shuffle. Both index lists are returned in ascending order.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    validate(test_fraction)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (stratum, class) in [false, true].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(Error::Degenerate(format!("stratum label={} is empty", u8::from(class))));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ splitmix64(stratum as u64));
        members.shuffle(&mut rng);
        let k = test_count(test_fraction, members.len());
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Unstratified variant: one seeded shuffle over all rows.
pub fn random_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    validate(test_fraction)?;
    let mut all: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    let k = test_count(test_fraction, n);
    let mut test = all[..k].to_vec();
    let mut train = all[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
