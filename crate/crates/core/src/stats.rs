//! Seeded, chunked Monte Carlo accumulation and small robust statistics.
//!
//! Work is split into fixed chunks; chunk `i` draws from the ChaCha stream `i`
//! of the master seed and chunk sums are folded in chunk order, so results are
//! bit-identical regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

/// Generator for chunk `stream` of `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sample mean and standard error of each of `K` jointly drawn quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Moments<const K: usize> {
    pub mean: [f64; K],
    pub se: [f64; K],
}

pub(crate) fn mc_moments<const K: usize, F>(n: usize, seed: u64, draw: F) -> Moments<K>
where
    F: Fn(&mut ChaCha8Rng) -> [f64; K] + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<([f64; K], [f64; K])> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut sum = [0.0; K];
            let mut sq = [0.0; K];
            for _ in 0..count {
                let x = draw(&mut rng);
                for k in 0..K {
                    sum[k] += x[k];
                    sq[k] += x[k] * x[k];
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = [0.0; K];
    let mut sq = [0.0; K];
    for (s, q) in &partial {
        for k in 0..K {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let nf = n as f64;
    let mut out = Moments { mean: [0.0; K], se: [0.0; K] };
    for k in 0..K {
        let mean = sum[k] / nf;
        out.mean[k] = mean;
        if n > 1 {
            let var = ((sq[k] - nf * mean * mean) / (nf - 1.0)).max(0.0);
            out.se[k] = (var / nf).sqrt();
        }
    }
    out
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation scaled to the normal standard deviation.
pub(crate) fn robust_sd(xs: &[f64]) -> f64 {
    let m = median(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    1.482_602_218_505_602 * median(&dev)
}

/// Smallest value `b` such that at least `frac` of `xs` are `<= b`.
pub(crate) fn quantile_upper(xs: &[f64], frac: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((frac * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}
