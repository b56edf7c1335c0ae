//! Seeded benchmark systems with known interaction structure.
//!
//! Randomness comes from `ChaCha8Rng` seeded with the caller's seed. Each
//! series draws from its own stream of that generator: stream 0 drives `x`
//! (and the noise added by [`add_noise_snr`]), stream 1 drives `y`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Recording;

pub const X_STREAM: u64 = 0;
pub const Y_STREAM: u64 = 1;

const AR_TRANSIENT: usize = 50;
const HENON_TRANSIENT: usize = 100;
const HENON_BOUND: f64 = 10.0;

/// Generator for one named stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normals(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

/// `x_i` white N(0,1); `y_i = a x_{i-1}` with `y_0 = 0`.
pub fn gen_linear_flow(n: usize, a: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let x = normals(&mut stream_rng(seed, X_STREAM), n, 1.0);
    let mut y = vec![0.0; n];
    for i in 1..n {
        y[i] = a * x[i - 1];
    }
    (x, y)
}

/// Noise scales of the driven AR(1) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArNoise {
    pub u_sd: f64,
    pub v_sd: f64,
}

impl Default for ArNoise {
    fn default() -> Self {
        ArNoise { u_sd: 1.0, v_sd: 0.3 }
    }
}

/// `x_i = 0.5 x_{i-1} + u_i`, `y_i = 0.2 y_{i-1} + 0.8 x_{i-1} + v_i`,
/// started from zero with the first 50 samples discarded.
pub fn gen_ar_driven(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    gen_ar_driven_with(n, seed, ArNoise::default())
}

pub fn gen_ar_driven_with(n: usize, seed: u64, noise: ArNoise) -> (Vec<f64>, Vec<f64>) {
    let total = n + AR_TRANSIENT;
    let u = normals(&mut stream_rng(seed, X_STREAM), total, noise.u_sd);
    let v = normals(&mut stream_rng(seed, Y_STREAM), total, noise.v_sd);
    let mut x = vec![0.0; total];
    let mut y = vec![0.0; total];
    for i in 1..total {
        x[i] = 0.5 * x[i - 1] + u[i];
        y[i] = 0.2 * y[i - 1] + 0.8 * x[i - 1] + v[i];
    }
    (x.split_off(AR_TRANSIENT), y.split_off(AR_TRANSIENT))
}

/// Unidirectionally coupled Hénon maps, `x` driving `y` with strength `c`:
///
/// ```text
/// x_i = 1.4 - x_{i-1}^2 + 0.3 x_{i-2}
/// y_i = 1.4 - (c y_{i-1} x_{i-1} + (1 - c) y_{i-1}^2) + 0.3 y_{i-k}
/// ```
///
/// with `k = 1` by default and `k = 2` when `y_lag2` is set. Both maps start
/// from zero history and the first 100 iterates are discarded.
pub fn gen_henon_coupled(n: usize, c: f64, y_lag2: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidArgument(format!("coupling must lie in [0, 1], got {c}")));
    }
    let total = n + HENON_TRANSIENT;
    let mut x = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..total {
        let xi = 1.4 - x1 * x1 + 0.3 * x2;
        let yi = 1.4 - (c * y1 * x1 + (1.0 - c) * y1 * y1) + 0.3 * if y_lag2 { y2 } else { y1 };
        for v in [xi, yi] {
            if !(v.abs() <= HENON_BOUND) {
                return Err(Error::Divergence { index: i, value: v });
            }
        }
        x.push(xi);
        y.push(yi);
        (x2, x1) = (x1, xi);
        (y2, y1) = (y1, yi);
    }
    Ok((x.split_off(HENON_TRANSIENT), y.split_off(HENON_TRANSIENT)))
}

/// `z_0 = 0`, `z_i = sin(i) + 1.5 sin(z_{i-1}) + 0.6`.
pub fn gen_sine_recursive(n: usize) -> Vec<f64> {
    let mut z = vec![0.0f64; n];
    for i in 1..n {
        z[i] = (i as f64).sin() + 1.5 * z[i - 1].sin() + 0.6;
    }
    z
}

/// Mean of squares.
pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds white Gaussian noise with variance `power(x) / 10^(snr_db / 10)`.
pub fn add_noise_snr(x: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    let p = power(x);
    if !(p > 0.0) {
        return Err(Error::Degenerate("signal has zero power".into()));
    }
    let sd = (p / 10f64.powf(snr_db / 10.0)).sqrt();
    let g = normals(&mut stream_rng(seed, X_STREAM), x.len(), sd);
    Ok(x.iter().zip(g).map(|(a, b)| a + b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Linear,
    Ar,
    Henon,
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub system: SystemKind,
    pub n: usize,
    pub seed: u64,
    pub a: f64,
    pub coupling: f64,
    pub snr_db: Option<f64>,
    pub y_lag2_variant: bool,
}

impl SynthConfig {
    pub fn new(system: SystemKind, n: usize, seed: u64) -> Self {
        SynthConfig {
            system,
            n,
            seed,
            a: 0.5,
            coupling: 0.3,
            snr_db: None,
            y_lag2_variant: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidArgument(format!("length must be at least 10, got {}", self.n)));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::InvalidArgument(format!(
                "coupling must lie in [0, 1], got {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

/// Runs the configured system and returns it as a recording at unit sample
/// rate. Observation noise, when requested, is seeded per channel with
/// `seed + 1 + channel index`.
pub fn simulate(cfg: &SynthConfig) -> Result<Recording> {
    cfg.validate()?;
    let (channels, mut samples): (Vec<&str>, Vec<Vec<f64>>) = match cfg.system {
        SystemKind::Linear => {
            let (x, y) = gen_linear_flow(cfg.n, cfg.a, cfg.seed);
            (vec!["x", "y"], vec![x, y])
        }
        SystemKind::Ar => {
            let (x, y) = gen_ar_driven(cfg.n, cfg.seed);
            (vec!["x", "y"], vec![x, y])
        }
        SystemKind::Henon => {
            let (x, y) = gen_henon_coupled(cfg.n, cfg.coupling, cfg.y_lag2_variant)?;
            (vec!["x", "y"], vec![x, y])
        }
        SystemKind::Sine => (vec!["z"], vec![gen_sine_recursive(cfg.n)]),
    };
    if let Some(snr) = cfg.snr_db {
        for (k, s) in samples.iter_mut().enumerate() {
            *s = add_noise_snr(s, snr, cfg.seed.wrapping_add(1 + k as u64))?;
        }
    }
    Recording::new(channels.into_iter().map(String::from).collect(), samples, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::variance;

    #[test]
    fn linear_flow_ratio_is_exact() {
        let (x, y) = gen_linear_flow(500, 0.5, 7);
        assert_eq!(y[0], 0.0);
        for i in 1..500 {
            assert_eq!(y[i], 0.5 * x[i - 1]);
        }
        let (_, y0) = gen_linear_flow(50, 0.0, 7);
        assert!(y0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_flow_unit_variance() {
        let (x, _) = gen_linear_flow(100_000, 0.5, 11);
        assert!((variance(&x) - 1.0).abs() < 0.02);
    }

    #[test]
    fn ar_stationary_variance() {
        let (x, _) = gen_ar_driven(100_000, 5);
        assert!((variance(&x) - 4.0 / 3.0).abs() < 0.05, "{}", variance(&x));
    }

    #[test]
    fn ar_without_v_noise_is_determined_by_x() {
        let (x, y) = gen_ar_driven_with(300, 9, ArNoise { u_sd: 1.0, v_sd: 0.0 });
        // recompute y from the x path alone
        let mut prev = y[0];
        for i in 1..300 {
            let expected = 0.2 * prev + 0.8 * x[i - 1];
            assert!((y[i] - expected).abs() < 1e-12);
            prev = y[i];
        }
        // and a different v seed cannot change it
        let (x2, y2) = gen_ar_driven_with(300, 9, ArNoise { u_sd: 1.0, v_sd: 0.0 });
        assert_eq!((x, y), (x2, y2));
    }

    #[test]
    fn henon_uncoupled_has_no_x_term() {
        let (x0, y0) = gen_henon_coupled(300, 0.0, false).unwrap();
        // y evolves alone: re-iterate without x
        let mut y = 0.0f64;
        for _ in 0..HENON_TRANSIENT {
            y = 1.4 - y * y + 0.3 * y;
        }
        for &v in &y0 {
            y = 1.4 - y * y + 0.3 * y;
            assert!((v - y).abs() < 1e-12);
        }
        assert_eq!(x0.len(), 300);
    }

    #[test]
    fn henon_is_deterministic_and_matches_reiteration() {
        let a = gen_henon_coupled(50, 0.3, false).unwrap();
        let b = gen_henon_coupled(50, 0.3, false).unwrap();
        assert_eq!(a, b);
        let (mut x1, mut x2, mut y1) = (0.0f64, 0.0f64, 0.0f64);
        let mut first = None;
        for i in 0..=HENON_TRANSIENT {
            let xi = 1.4 - x1 * x1 + 0.3 * x2;
            let yi = 1.4 - (0.3 * y1 * x1 + 0.7 * y1 * y1) + 0.3 * y1;
            (x2, x1, y1) = (x1, xi, yi);
            if i == HENON_TRANSIENT {
                first = Some((xi, yi));
            }
        }
        assert_eq!(first.unwrap(), (a.0[0], a.1[0]));
    }

    #[test]
    fn henon_rejects_bad_coupling() {
        assert!(gen_henon_coupled(10, 1.5, false).is_err());
    }

    #[test]
    fn sine_recursive_values() {
        let z = gen_sine_recursive(1000);
        assert_eq!(z[0], 0.0);
        assert!((z[1] - (1f64.sin() + 0.6)).abs() < 1e-15);
        assert!((z[1] - 1.441_470_984_807_896_5).abs() < 1e-12);
        assert!(z.iter().all(|v| v.abs() <= 3.1));
        assert_eq!(z, gen_sine_recursive(1000));
    }

    #[test]
    fn noise_snr_definition() {
        let x: Vec<f64> = (0..100_000).map(|i| (i as f64 * 0.01).sin()).collect();
        let y = add_noise_snr(&x, 20.0, 3).unwrap();
        let noise: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let snr = 10.0 * (power(&x) / power(&noise)).log10();
        assert!((snr - 20.0).abs() < 0.2, "{snr}");

        let quiet = add_noise_snr(&x, 200.0, 3).unwrap();
        let diff: Vec<f64> = quiet.iter().zip(&x).map(|(a, b)| a - b).collect();
        assert!((power(&diff) / power(&x)).sqrt() < 1e-8);
        assert!(add_noise_snr(&[0.0; 10], 20.0, 1).is_err());
    }

    #[test]
    fn seeds_replay() {
        assert_eq!(gen_ar_driven(200, 42), gen_ar_driven(200, 42));
        assert_ne!(gen_ar_driven(200, 42), gen_ar_driven(200, 43));
    }
}
