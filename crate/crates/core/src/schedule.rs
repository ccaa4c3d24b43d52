//! Assignment of domains to an author's problem slots.

use crate::error::{ArenaError, Result};
use crate::types::{BroadArea, DomainTag};

/// Spreads `k` slots over the broad areas present in `taxonomy`, cycling
/// through areas from a seed-dependent starting area and through each area's
/// subfields in order.
pub fn plan_domain_schedule(k: usize, taxonomy: &[DomainTag], seed: u64) -> Result<Vec<DomainTag>> {
    if k == 0 {
        return Err(ArenaError::Config("problems_per_model must be at least 1".into()));
    }
    let mut areas: Vec<(BroadArea, Vec<&DomainTag>)> = Vec::new();
    for tag in taxonomy {
        match areas.iter_mut().find(|(a, _)| *a == tag.broad_area) {
            Some((_, tags)) => tags.push(tag),
            None => areas.push((tag.broad_area, vec![tag])),
        }
    }
    if areas.is_empty() {
        return Err(ArenaError::Config("domain taxonomy is empty".into()));
    }
    let offset = (seed % areas.len() as u64) as usize;
    let mut used = vec![0usize; areas.len()];
    Ok((0..k)
        .map(|i| {
            let a = (offset + i) % areas.len();
            let tags = &areas[a].1;
            let tag = tags[used[a] % tags.len()].clone();
            used[a] += 1;
            tag
        })
        .collect())
}
