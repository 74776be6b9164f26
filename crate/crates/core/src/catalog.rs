//! The builtin scenario catalog: five baskets, 100 patients, six rate patterns
//! crossed with three sample size layouts.

use alloc::vec::Vec;

use crate::data::{Pattern, Scenario, SizeFamily};

pub const LINEAR_SIZES: [u32; 5] = [10, 15, 20, 25, 30];
pub const GROUPED_SIZES: [u32; 5] = [10, 10, 25, 25, 30];
pub const HIGH_VARIANCE_SIZES: [u32; 5] = [10, 10, 10, 20, 50];

pub fn sizes(family: SizeFamily) -> [u32; 5] {
    match family {
        SizeFamily::Linear => LINEAR_SIZES,
        SizeFamily::Grouped => GROUPED_SIZES,
        SizeFamily::HighVariance => HIGH_VARIANCE_SIZES,
    }
}

pub fn rates(pattern: Pattern) -> [f64; 5] {
    match pattern {
        Pattern::Null => [0.15; 5],
        Pattern::Alternative => [0.35; 5],
        Pattern::Ascending => [0.15, 0.15, 0.25, 0.35, 0.35],
        Pattern::Descending => [0.35, 0.35, 0.25, 0.15, 0.15],
        Pattern::Bgn => [0.15, 0.15, 0.15, 0.15, 0.40],
        Pattern::Sgn => [0.40, 0.15, 0.15, 0.15, 0.15],
    }
}

/// Scenario id for a pattern and size family: patterns in blocks of three,
/// linear/grouped/high-variance within a block.
pub fn scenario_id(pattern: Pattern, family: SizeFamily) -> u32 {
    let p = Pattern::ALL.iter().position(|&q| q == pattern).expect("known pattern") as u32;
    let f = SizeFamily::ALL.iter().position(|&q| q == family).expect("known family") as u32;
    3 * p + f + 1
}

pub fn scenario(pattern: Pattern, family: SizeFamily) -> Scenario {
    Scenario {
        id: scenario_id(pattern, family),
        sample_sizes: sizes(family).to_vec(),
        true_rates: rates(pattern).to_vec(),
        pattern,
        size_family: family,
    }
}

/// All 18 builtin scenarios ordered by id.
pub fn builtin() -> Vec<Scenario> {
    let mut all: Vec<Scenario> = Pattern::ALL
        .iter()
        .flat_map(|&p| SizeFamily::ALL.iter().map(move |&f| scenario(p, f)))
        .collect();
    all.sort_by_key(|s| s.id);
    all
}

pub fn by_id(id: u32) -> Option<Scenario> {
    builtin().into_iter().find(|s| s.id == id)
}

/// The six scenarios of one size family, in pattern order.
pub fn family(family: SizeFamily) -> Vec<Scenario> {
    Pattern::ALL.iter().map(|&p| scenario(p, family)).collect()
}
