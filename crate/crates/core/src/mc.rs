//! Monte Carlo oracle: correlated Gaussian quadrature samples, rescaling, ADC
//! discretization and plug-in estimators for the analytic quantities.
//!
//! Samples are drawn from a ChaCha8 stream seeded with `seed_from_u64`, which is stable
//! across platforms, so batches are reproducible bit for bit.

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::Matrix2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::entropy::AdcSpec;
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Which quadrature of the two-mode state is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    #[default]
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

/// Paired samples of Alice's and Bob's quadrature, optionally discretized.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub count: usize,
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    /// ADC indices in `1..=2^d`; empty until [`discretize`] is applied.
    pub i_a: Vec<u32>,
    pub i_b: Vec<u32>,
    pub seed: u64,
    pub quadrature: Quadrature,
}

/// Sample mean-free second moments of a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
}

/// Deviation of sample moments from their population values, in standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub sample: SampleMoments,
    pub expected: SampleMoments,
    pub z_var_a: f64,
    pub z_var_b: f64,
    pub z_cov: f64,
}

impl MomentCheck {
    pub fn max_abs_z(&self) -> f64 {
        self.z_var_a.abs().max(self.z_var_b.abs()).max(self.z_cov.abs())
    }
}

/// Symmetric square root of a positive semi-definite 2x2 matrix:
/// `sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M))`.
pub fn sqrt_psd_2x2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m.determinant();
    let tr = m.trace();
    let scale = tr.abs().max(1.0);
    if det < -1e-12 * scale * scale || tr < 0.0 || (m[(0, 1)] - m[(1, 0)]).abs() > 0.0 {
        return Err(Error::Degenerate(format!(
            "2x2 block is not symmetric positive semi-definite (det = {det:e}, tr = {tr:e})"
        )));
    }
    let s = det.max(0.0).sqrt();
    let denom = (tr + 2.0 * s).sqrt();
    if denom == 0.0 {
        return Ok(Matrix2::zeros());
    }
    Ok((m + Matrix2::identity() * s) / denom)
}

fn quadrature_block(cm: &CovarianceMatrix, q: Quadrature) -> Result<Matrix2<f64>> {
    if cm.dim() != 4 {
        return Err(Error::Shape {
            expected: "4x4 two-mode covariance".into(),
            got: format!("{0}x{0}", cm.dim()),
        });
    }
    let (a, b) = (q.offset(), 2 + q.offset());
    Ok(Matrix2::new(cm.get(a, a), cm.get(a, b), cm.get(b, a), cm.get(b, b)))
}

/// Draws `count` i.i.d. zero-mean pairs with the covariance of one quadrature of `cm`.
pub fn sample_correlated(
    cm: &CovarianceMatrix,
    count: usize,
    seed: u64,
    quadrature: Quadrature,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::Degenerate("sample count must be at least 1".into()));
    }
    cm.check_physical()?;
    let root = sqrt_psd_2x2(&quadrature_block(cm, quadrature)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x_a = Vec::with_capacity(count);
    let mut x_b = Vec::with_capacity(count);
    for _ in 0..count {
        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        x_a.push(root[(0, 0)] * z0 + root[(0, 1)] * z1);
        x_b.push(root[(1, 0)] * z0 + root[(1, 1)] * z1);
    }
    Ok(SampleBatch {
        count,
        x_a,
        x_b,
        i_a: Vec::new(),
        i_b: Vec::new(),
        seed,
        quadrature,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn centered_sum_sq(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Variance-matching rescale factor `t = sqrt(sum (x_B - mean)^2 / sum (x_A - mean)^2)`.
pub fn estimate_rescale(x_a: &[f64], x_b: &[f64]) -> Result<f64> {
    if x_a.len() < 2 || x_b.len() < 2 {
        return Err(Error::Degenerate("at least two samples per party are needed".into()));
    }
    let den = centered_sum_sq(x_a);
    if den == 0.0 {
        return Err(Error::Degenerate("Alice's samples have zero variance".into()));
    }
    Ok((centered_sum_sq(x_b) / den).sqrt())
}

impl SampleBatch {
    /// Mean-free sample second moments (normalized by `count - 1`).
    pub fn moments(&self) -> SampleMoments {
        let (ma, mb) = (mean(&self.x_a), mean(&self.x_b));
        let k = (self.count.max(2) - 1) as f64;
        let cov = self
            .x_a
            .iter()
            .zip(&self.x_b)
            .map(|(a, b)| (a - ma) * (b - mb))
            .sum::<f64>()
            / k;
        SampleMoments {
            var_a: centered_sum_sq(&self.x_a) / k,
            var_b: centered_sum_sq(&self.x_b) / k,
            cov,
        }
    }

    /// Compares the sample moments with `cm` using Gaussian standard errors:
    /// `SE(var) = sqrt(2/n) var`, `SE(cov) = sqrt((var_a var_b + cov^2) / n)`.
    pub fn check_moments(&self, cm: &CovarianceMatrix) -> Result<MomentCheck> {
        let block = quadrature_block(cm, self.quadrature)?;
        let expected = SampleMoments {
            var_a: block[(0, 0)],
            var_b: block[(1, 1)],
            cov: block[(0, 1)],
        };
        let sample = self.moments();
        let n = self.count as f64;
        let se_var = |v: f64| (2.0 / n).sqrt() * v;
        let se_cov = ((expected.var_a * expected.var_b + expected.cov * expected.cov) / n).sqrt();
        Ok(MomentCheck {
            sample,
            expected,
            z_var_a: (sample.var_a - expected.var_a) / se_var(expected.var_a),
            z_var_b: (sample.var_b - expected.var_b) / se_var(expected.var_b),
            z_cov: (sample.cov - expected.cov) / se_cov,
        })
    }

    /// Rescales Alice's samples by `t`; p-quadrature samples are also sign-flipped so that
    /// the rescaled data is positively correlated with Bob's.
    pub fn rescale_alice(&self, t: f64) -> SampleBatch {
        let sign = match self.quadrature {
            Quadrature::X => 1.0,
            Quadrature::P => -1.0,
        };
        SampleBatch {
            x_a: self.x_a.iter().map(|x| sign * t * x).collect(),
            i_a: Vec::new(),
            i_b: Vec::new(),
            ..self.clone()
        }
    }
}

/// Maps every sample to its ADC index; values beyond `+-alpha` saturate to the end bins.
///
/// A sample exactly on a bin edge belongs to the lower bin, so `0` maps to `2^(d-1)`.
pub fn discretize(batch: &SampleBatch, adc: &AdcSpec) -> SampleBatch {
    SampleBatch {
        i_a: batch.x_a.iter().map(|&x| adc.index_of(x)).collect(),
        i_b: batch.x_b.iter().map(|&x| adc.index_of(x)).collect(),
        ..batch.clone()
    }
}

/// Average index distance `(1/k) sum |i_A - i_B|`.
pub fn empirical_distance(i_a: &[u32], i_b: &[u32]) -> Result<f64> {
    Ok(distance_samples(i_a, i_b)?.0)
}

/// Mean index distance and its standard error.
pub fn empirical_distance_with_se(i_a: &[u32], i_b: &[u32]) -> Result<(f64, f64)> {
    distance_samples(i_a, i_b)
}

fn distance_samples(i_a: &[u32], i_b: &[u32]) -> Result<(f64, f64)> {
    if i_a.len() != i_b.len() {
        return Err(Error::Shape {
            expected: format!("{} indices", i_a.len()),
            got: format!("{} indices", i_b.len()),
        });
    }
    if i_a.is_empty() {
        return Err(Error::Degenerate("empty index streams".into()));
    }
    let k = i_a.len() as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for (&a, &b) in i_a.iter().zip(i_b) {
        let d = (a as f64 - b as f64).abs();
        s += d;
        s2 += d * d;
    }
    let m = s / k;
    let var = if i_a.len() > 1 {
        ((s2 - k * m * m) / (k - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((m, (var / k).sqrt()))
}

/// Plug-in Shannon entropy (bits) of an index stream.
pub fn empirical_entropy(indices: &[u32]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Degenerate("empty index stream".into()));
    }
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for &i in indices {
        *counts.entry(i).or_default() += 1;
    }
    let mut c: Vec<u64> = counts.into_values().collect();
    c.sort_unstable();
    let k = indices.len() as f64;
    Ok(-c
        .iter()
        .map(|&n| {
            let p = n as f64 / k;
            p * p.log2()
        })
        .sum::<f64>())
}

/// Writes a batch as comma-separated text.
///
/// Header lines start with `#` and record the generating covariance (row-major), the ADC
/// and the seed; the body has one `x_a,x_b,i_a,i_b` row per sample (indices are `0` when
/// the batch has not been discretized).
pub fn write_batch<W: Write>(
    w: &mut W,
    batch: &SampleBatch,
    cm: &CovarianceMatrix,
    adc: &AdcSpec,
) -> io::Result<()> {
    writeln!(w, "# cvmdi sample batch v1")?;
    let entries: Vec<String> = cm.matrix().transpose().iter().map(|v| format!("{v:e}")).collect();
    writeln!(w, "# cm {} {}", cm.dim(), entries.join(" "))?;
    writeln!(w, "# adc alpha={} bits={}", adc.alpha(), adc.bits())?;
    writeln!(w, "# seed {} quadrature {:?} count {}", batch.seed, batch.quadrature, batch.count)?;
    writeln!(w, "x_a,x_b,i_a,i_b")?;
    for k in 0..batch.count {
        writeln!(
            w,
            "{:e},{:e},{},{}",
            batch.x_a[k],
            batch.x_b[k],
            batch.i_a.get(k).copied().unwrap_or(0),
            batch.i_b.get(k).copied().unwrap_or(0)
        )?;
    }
    Ok(())
}
