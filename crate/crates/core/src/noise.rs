// Copyright 2026 The dpsync Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Laplace sampling and the perturbed record fetch.

use std::collections::VecDeque;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::LocalCache;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stream::Record;

/// Seeded randomness for one trial, optionally overridden by fixed values.
///
/// Overrides are returned verbatim in place of Laplace samples, whatever the
/// requested scale: first the scripted values in order, then the tail value
/// forever. Without a tail, sampling falls back to the seeded generator once
/// the script runs out.
#[derive(Clone, Debug)]
pub struct NoiseSource<F> {
    rng: ChaCha8Rng,
    script: VecDeque<F>,
    tail: Option<F>,
}

impl<F: Real> NoiseSource<F> {
    pub fn seeded(seed: u64) -> Self {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            script: VecDeque::new(),
            tail: None,
        }
    }

    /// Every draw returns `value`.
    pub fn constant(value: F) -> Self {
        NoiseSource {
            tail: Some(value),
            ..Self::seeded(0)
        }
    }

    /// Draws return `values` in order, then `then` forever.
    pub fn scripted(values: impl IntoIterator<Item = F>, then: F) -> Self {
        NoiseSource {
            script: values.into_iter().collect(),
            tail: Some(then),
            ..Self::seeded(0)
        }
    }

    pub fn is_overridden(&self) -> bool {
        self.tail.is_some() || !self.script.is_empty()
    }

    /// One draw from `Lap(scale)`.
    pub fn laplace(&mut self, scale: F) -> Result<F> {
        if !scale.is_finite() || scale <= F::zero() {
            return Err(Error::Parameter(format!(
                "Laplace scale must be positive, got {scale}"
            )));
        }
        if let Some(v) = self.script.pop_front().or(self.tail) {
            return Ok(v);
        }
        let x: f64 = self.rng.sample(Open01);
        Ok(F::lit(laplace_inverse_cdf(scale.as_f64(), x - 0.5)))
    }
}

/// Inverse-CDF transform of `u ∈ (-1/2, 1/2)` into a `Lap(scale)` sample.
/// Positive `u` maps to positive output.
pub fn laplace_inverse_cdf(scale: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Integer read size for a noisy count: round half away from zero, clamp at 0.
pub fn noisy_read_size<F: Real>(noisy: F) -> usize {
    let r = noisy.round();
    if r >= F::one() {
        r.to_usize().unwrap_or(usize::MAX)
    } else {
        0
    }
}

/// Reads `round(count + Lap(1/eps))` records from the cache, or nothing when
/// that rounds below one.
pub fn perturb<F: Real>(
    count: usize,
    eps: F,
    cache: &mut LocalCache,
    noise: &mut NoiseSource<F>,
    now: u64,
) -> Result<Vec<Record>> {
    if eps.is_nan() || eps <= F::zero() {
        return Err(Error::Parameter(format!(
            "privacy budget must be positive, got {eps}"
        )));
    }
    let noisy = F::from_count(count) + noise.laplace(F::one() / eps)?;
    let n = noisy_read_size(noisy);
    if n == 0 {
        return Ok(Vec::new());
    }
    Ok(cache.read(n, now))
}
