//! Counter-based disorder sampling: every coupling is a pure function of
//! `(master_seed, realization_index, site, channel)`, so realizations are
//! reproducible bit-exactly regardless of enumeration order or worker count.

use super::{BoxIndex, ValidatedSpec};
use serde::{Deserialize, Serialize};

/// One sampled disorder configuration on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub box_index: BoxIndex,
    pub fiber: u32,
    pub master_seed: u64,
    pub realization_index: u64,
    /// Site-major, channel-minor couplings.
    values: Vec<f64>,
}

impl DisorderRealization {
    /// Coupling of channel `i` at the site with row-major index `site`.
    #[inline]
    pub fn value(&self, site: usize, channel: usize) -> f64 {
        self.values[site * self.fiber as usize + channel]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entrywise `<=` against another realization on the same box.
    pub fn dominated_by(&self, other: &DisorderRealization) -> bool {
        self.box_index == other.box_index
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a <= b)
    }
}

const DOMAIN_TAG: u64 = 0x6964736c_61623031; // stream domain separator

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Keyed counter hash for one coupling.
#[inline]
fn site_key(master_seed: u64, index: u64, coord: [i64; 2], d: u32, channel: u32) -> u64 {
    let mut h = mix64(DOMAIN_TAG ^ master_seed);
    h = mix64(h ^ index);
    for axis in 0..d as usize {
        h = mix64(h ^ (coord[axis] as u64));
    }
    mix64(h ^ channel as u64)
}

/// Uniform variate in `[0, 1)` from a hashed key.
#[inline]
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Draw the i.i.d. couplings for one realization on `box_index`.
pub fn sample_realization(
    spec: &ValidatedSpec,
    box_index: BoxIndex,
    master_seed: u64,
    realization_index: u64,
) -> DisorderRealization {
    let fiber = spec.fiber;
    let mut values = Vec::with_capacity(box_index.sites() * fiber as usize);
    for site in 0..box_index.sites() {
        let coord = box_index.coord(site);
        for channel in 0..fiber {
            let key = site_key(master_seed, realization_index, coord, box_index.d, channel);
            values.push(spec.nu[channel as usize].quantile(unit(key)));
        }
    }
    DisorderRealization {
        box_index,
        fiber,
        master_seed,
        realization_index,
        values,
    }
}
