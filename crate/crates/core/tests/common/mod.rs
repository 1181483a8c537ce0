#![allow(dead_code)]

use groupoid_ricci::{Grid, GroupoidMetric, HaarWeight, PeriodicField, TwistedField};
use groupoid_ricci_oracles::{TrigSeries, TwistedSeries};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Band-limited series with modes `1..=modes` and coefficients decaying
/// like `amp / m²`.
pub fn random_series(rng: &mut impl Rng, modes: u32, amp: f64) -> TrigSeries {
    let c0 = rng.random_range(-amp..amp);
    let terms = (1..=modes)
        .map(|m| {
            let s = amp / (m * m) as f64;
            (m, rng.random_range(-s..s), rng.random_range(-s..s))
        })
        .collect();
    TrigSeries::new(c0, terms)
}

pub fn periodic(grid: &Grid, s: &TrigSeries) -> PeriodicField {
    PeriodicField::new(s.sample(grid.n()))
}

pub fn metric(grid: &Grid, k: &TwistedSeries, u: &TrigSeries) -> GroupoidMetric {
    let kf = TwistedField::new(periodic(grid, &k.periodic), k.holonomy);
    GroupoidMetric::new(grid.clone(), kf, periodic(grid, u)).unwrap()
}

pub fn haar(grid: &Grid, f: &TrigSeries) -> HaarWeight {
    HaarWeight::new(periodic(grid, f))
}

pub struct Instance {
    pub k: TwistedSeries,
    pub u: TrigSeries,
    pub f: TrigSeries,
}

pub fn random_instance(rng: &mut impl Rng, modes: u32) -> Instance {
    Instance {
        k: TwistedSeries {
            holonomy: rng.random_range(-1.5..1.5),
            periodic: random_series(rng, modes, 0.3),
        },
        u: random_series(rng, modes, 0.3),
        f: random_series(rng, modes, 0.5),
    }
}
