//! Initial designs: uniform random points and the unscrambled Sobol sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::Domain;

#[path = "design/joe_kuo.rs"]
mod joe_kuo;

pub use joe_kuo::MAX_DIMENSIONS as SOBOL_MAX_DIMENSIONS;

const BITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    #[serde(alias = "uniform")]
    Random,
    Sobol,
}

/// Gray-code Sobol generator with Joe–Kuo direction numbers. The first
/// point is the origin.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > SOBOL_MAX_DIMENSIONS {
            return Err(Error::Unsupported(format!(
                "Sobol sequence supports 1..={SOBOL_MAX_DIMENSIONS} dimensions, got {dim}"
            )));
        }
        let directions = joe_kuo::DIRECTIONS[..dim]
            .iter()
            .map(|&(poly, m)| {
                let mut v = [0u32; BITS];
                let s = m.len();
                if s == 0 {
                    for (k, vk) in v.iter_mut().enumerate() {
                        *vk = 1 << (BITS - 1 - k);
                    }
                    return v;
                }
                for k in 0..s {
                    v[k] = m[k] << (BITS - 1 - k);
                }
                for k in s..BITS {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (poly >> (s - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    v[k] = x;
                }
                v
            })
            .collect();
        Ok(Sobol {
            directions,
            state: vec![0; dim],
            index: 0,
        })
    }

    /// Next point in `[0, 1)^dim`.
    pub fn next_point(&mut self) -> Vec<f64> {
        let point = self.state.iter().map(|&s| s as f64 / 4_294_967_296.0).collect();
        let c = (!self.index).trailing_zeros() as usize;
        if c < BITS {
            for (s, v) in self.state.iter_mut().zip(&self.directions) {
                *s ^= v[c];
            }
        }
        self.index += 1;
        point
    }
}

fn map_unit(domain: &Domain, u: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(domain.lower().iter().zip(domain.upper()))
        .map(|(t, (l, h))| l + t * (h - l))
        .collect()
}

/// `n` points inside `domain`, deterministic in `seed` (Sobol ignores it).
pub fn init_design(domain: &Domain, n: usize, scheme: InitScheme, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidInput("initial design needs at least one point".into()));
    }
    match scheme {
        InitScheme::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..n)
                .map(|_| {
                    let u: Vec<f64> = (0..domain.dim()).map(|_| rng.gen::<f64>()).collect();
                    map_unit(domain, &u)
                })
                .collect())
        }
        InitScheme::Sobol => {
            let mut sobol = Sobol::new(domain.dim())?;
            Ok((0..n).map(|_| map_unit(domain, &sobol.next_point())).collect())
        }
    }
}
