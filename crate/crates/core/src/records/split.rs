use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Per-class test allocation.
///
/// The test total is `ceil(n * fraction)`; each class receives the floor of
/// its exact quota and the remaining slots go to the largest fractional
/// remainders (ties to the smaller class label).
pub(crate) fn allocate(class_counts: [usize; 2], fraction: f64) -> [usize; 2] {
    let n = class_counts[0] + class_counts[1];
    let target = ((n as f64 * fraction) - 1e-9).ceil().max(0.0) as usize;
    let exact = class_counts.map(|c| c as f64 * fraction);
    let mut alloc = exact.map(|e| (e + 1e-9).floor() as usize);
    for c in 0..2 {
        alloc[c] = alloc[c].min(class_counts[c]);
    }
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - alloc[a] as f64;
        let rb = exact[b] - alloc[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(alloc[0] + alloc[1]);
    for &c in order.iter().cycle().take(4) {
        if remaining == 0 {
            break;
        }
        if alloc[c] < class_counts[c] {
            alloc[c] += 1;
            remaining -= 1;
        }
    }
    alloc
}

/// Seeded stratified split of row indices into (train, test), both sorted.
pub fn stratified_split(labels: &[u8], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        match y {
            0 | 1 => by_class[y as usize].push(i),
            other => return Err(Error::Parameter(format!("label {other} at row {i} is not 0/1"))),
        }
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::Stratification("both classes must be present".into()));
    }
    let alloc = allocate([by_class[0].len(), by_class[1].len()], test_fraction);
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let mut rng = rng_for(seed, "stratified_split", class as u64);
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..alloc[class]]);
        train.extend_from_slice(&members[alloc[class]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
