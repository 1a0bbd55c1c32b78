//! ADC geometry, the uncertainty-relation constants `c(delta)` and `gamma(t)`, the
//! finite-sample distance correction, and discretized Gaussian entropies.
//!
//! All logarithms are base 2 except inside `mu`, which uses `ln(1/eps')`.
//! Distances are in alphabet-index units.

use std::f64::consts::{E, PI};

use statrs::function::erf::erfc;

use crate::error::{check_range, Error, Result};
use crate::gaussian::CovarianceMatrix;

/// Detector range `[-alpha, alpha]` split into `2^bits` bins of width `delta = 2 alpha / 2^bits`.
///
/// Bin `i` (1-based) covers `(-alpha + (i-1) delta, -alpha + i delta]`; the first and
/// last bins extend to `-inf` and `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSpec {
    alpha: f64,
    bits: u32,
}

impl AdcSpec {
    pub fn new(alpha: f64, bits: u32) -> Result<Self> {
        check_range("alpha", alpha, "(0, inf)", alpha > 0.0 && alpha.is_finite())?;
        check_range("ADC bits", bits as f64, "[1, 30]", (1..=30).contains(&bits))?;
        Ok(AdcSpec { alpha, bits })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn alphabet_size(&self) -> usize {
        1usize << self.bits
    }

    pub fn delta(&self) -> f64 {
        2.0 * self.alpha / self.alphabet_size() as f64
    }

    /// Index of the bin containing `x`, saturating at `1` and `2^bits`.
    pub fn index_of(&self, x: f64) -> u32 {
        let top = self.alphabet_size() as f64;
        let raw = ((x + self.alpha) / self.delta()).ceil();
        raw.clamp(1.0, top) as u32
    }
}

/// Measurement incompatibility `c(delta) ~ delta^2 / (2 pi)`, valid for `0 < delta <= 0.5`.
pub fn c_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            range: "(0, 0.5]",
        });
    }
    if delta > 0.5 {
        return Err(Error::OutOfValidity(delta));
    }
    Ok(delta * delta / (2.0 * PI))
}

/// `log2 gamma(t)` without overflow.
///
/// Uses `t / (sqrt(t^2+1) - 1) = (sqrt(t^2+1) + 1) / t` to avoid cancellation.
pub fn log2_gamma(t: f64) -> Result<f64> {
    check_range("t", t, "[0, inf)", t >= 0.0 && !t.is_nan())?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let s = t.hypot(1.0);
    // ln((s + 1)/t) = ln(1 + (1 + 1/(s + t)) / t), since s - t = 1/(s + t).
    let ln_ratio = ((1.0 + 1.0 / (s + t)) / t).ln_1p();
    let ln_gamma = (t + s).ln() + t * ln_ratio;
    Ok(ln_gamma / std::f64::consts::LN_2)
}

/// `gamma(t) = (t + sqrt(t^2+1)) [t / (sqrt(t^2+1) - 1)]^t`, with `gamma(0) = 1`.
pub fn gamma_fn(t: f64) -> Result<f64> {
    Ok(log2_gamma(t)?.exp2())
}

/// Finite-sample correction to the estimated distance:
/// `mu = (2 alpha / delta) sqrt(N (k_pe + 1) / (n k_pe^2) ln(1/eps'))`.
pub fn mu_correction(adc: &AdcSpec, n_total: u64, k_pe: u64, n: u64, eps_prime: f64) -> Result<f64> {
    if n_total == 0 || k_pe == 0 || n == 0 {
        return Err(Error::Degenerate(format!(
            "block counts must be positive (N = {n_total}, k_pe = {k_pe}, n = {n})"
        )));
    }
    if !(eps_prime > 0.0) {
        return Err(Error::InfeasibleBudget(format!("eps' = {eps_prime:e} <= 0")));
    }
    check_range("eps'", eps_prime, "(0, 1)", eps_prime < 1.0)?;
    let (nt, k, n) = (n_total as f64, k_pe as f64, n as f64);
    let ratio = nt * (k + 1.0) / (n * k * k);
    Ok(adc.alphabet_size() as f64 * (ratio * (1.0 / eps_prime).ln()).sqrt())
}

/// `f(p_alpha, n) = sqrt(2 (1 - (1 - p_alpha)^n))`.
pub fn tail_penalty(p_alpha: f64, n: u64) -> f64 {
    if p_alpha <= 0.0 {
        return 0.0;
    }
    let escape = -(n as f64 * (-p_alpha).ln_1p()).exp_m1();
    (2.0 * escape).sqrt()
}

/// Smoothing parameter of the max-entropy bound,
/// `eps' = eps_s / (4 p_pass) - 2 f(p_alpha, n) / sqrt(p_pass)`.
pub fn eps_prime(eps_s: f64, p_pass: f64, p_alpha: f64, n: u64) -> Result<f64> {
    check_range("eps_s", eps_s, "(0, 1)", eps_s > 0.0 && eps_s < 1.0)?;
    check_range("p_pass", p_pass, "(0, 1]", p_pass > 0.0 && p_pass <= 1.0)?;
    check_range("p_alpha", p_alpha, "[0, 1)", (0.0..1.0).contains(&p_alpha))?;
    if n == 0 {
        return Err(Error::Degenerate("n must be at least 1".into()));
    }
    let value = eps_s / (4.0 * p_pass) - 2.0 * tail_penalty(p_alpha, n) / p_pass.sqrt();
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InfeasibleBudget(format!(
            "eps' = {value:e} <= 0 (p_alpha = {p_alpha:e} too large for n = {n})"
        )))
    }
}

/// Two-sided Gaussian tail `P(|x| > alpha) = erfc(alpha / sqrt(2 variance))`.
pub fn p_alpha_gaussian(alpha: f64, variance: f64) -> Result<f64> {
    check_range("alpha", alpha, "[0, inf)", alpha >= 0.0)?;
    check_range("variance", variance, "(0, inf)", variance > 0.0)?;
    Ok(erfc(alpha / (2.0 * variance).sqrt()))
}

/// Probability of every ADC bin under a distribution given by its CDF and survival function.
pub fn bin_probabilities(
    adc: &AdcSpec,
    cdf: impl Fn(f64) -> f64,
    sf: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let m = adc.alphabet_size();
    let delta = adc.delta();
    (1..=m)
        .map(|i| {
            let lo = -adc.alpha + (i - 1) as f64 * delta;
            let hi = -adc.alpha + i as f64 * delta;
            if i == 1 {
                cdf(hi)
            } else if i == m {
                sf(lo)
            } else if hi <= 0.0 {
                cdf(hi) - cdf(lo)
            } else {
                sf(lo) - sf(hi)
            }
        })
        .map(|p| p.max(0.0))
        .collect()
}

/// `-sum p log2 p` over positive entries.
pub fn shannon_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Exact entropy of a zero-mean Gaussian of standard deviation `sigma` after ADC binning.
pub fn discrete_entropy_exact(sigma: f64, adc: &AdcSpec) -> Result<f64> {
    check_range("sigma", sigma, "(0, inf)", sigma > 0.0 && sigma.is_finite())?;
    let scale = sigma * std::f64::consts::SQRT_2;
    let probs = bin_probabilities(
        adc,
        |x| 0.5 * erfc(-x / scale),
        |x| 0.5 * erfc(x / scale),
    );
    Ok(shannon_bits(&probs))
}

/// Small-bin approximation `log2 sqrt(2 pi e variance) - log2 delta`.
pub fn discrete_entropy_approx(variance: f64, delta: f64) -> Result<f64> {
    check_range("variance", variance, "(0, inf)", variance > 0.0)?;
    check_range("delta", delta, "(0, inf)", delta > 0.0)?;
    Ok(0.5 * (2.0 * PI * E * variance).log2() - delta.log2())
}

/// `I = 1/2 log2((V_A + chi) / (chi + 1/V_A))` with `chi = 1/T - 1 + e`.
pub fn mutual_information(v_a: f64, t: f64, e: f64) -> Result<f64> {
    if !(v_a >= 1.0) {
        return Err(Error::InvalidVariance(v_a));
    }
    check_range("T", t, "(0, 1]", t > 0.0 && t <= 1.0)?;
    check_range("e", e, "[0, inf)", e >= 0.0)?;
    let chi = 1.0 / t - 1.0 + e;
    Ok(0.5 * ((v_a + chi) / (chi + 1.0 / v_a)).log2())
}

/// Distance statistics of rescaled Alice data against Bob data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceStats {
    /// `E|t X_A - X_B| / delta`.
    pub mean: f64,
    /// Standard deviation of a single `|t X_A - X_B| / delta`.
    pub std_dev: f64,
    /// Variance-matching factor `t = sqrt(V_B / V_A)`.
    pub rescale: f64,
    /// Standard deviation of `t X_A - X_B` in shot-noise units.
    pub sigma_diff: f64,
}

/// Expected per-symbol index distance for a 4x4 `(A, B)` covariance matrix.
///
/// The x quadrature is used; the p quadrature gives the same statistics once its
/// sign-flipped correlation is undone.
pub fn distance_stats(cm: &CovarianceMatrix, adc: &AdcSpec) -> Result<DistanceStats> {
    if cm.dim() != 4 {
        return Err(Error::Shape {
            expected: "4x4 two-mode covariance".into(),
            got: format!("{0}x{0}", cm.dim()),
        });
    }
    let (va, vb, cov) = (cm.get(0, 0), cm.get(2, 2), cm.get(0, 2).abs());
    if !(va > 0.0 && vb > 0.0) {
        return Err(Error::Degenerate("non-positive quadrature variance".into()));
    }
    let t = (vb / va).sqrt();
    let mut var = t * t * va + vb - 2.0 * t * cov;
    let scale = vb.max(t * t * va);
    if var < 0.0 {
        if var < -1e-12 * scale {
            return Err(Error::Degenerate(format!(
                "negative difference variance {var:e}"
            )));
        }
        var = 0.0;
    }
    let sigma = var.sqrt();
    let delta = adc.delta();
    Ok(DistanceStats {
        mean: sigma * (2.0 / PI).sqrt() / delta,
        std_dev: sigma * (1.0 - 2.0 / PI).sqrt() / delta,
        rescale: t,
        sigma_diff: sigma,
    })
}

/// `E[d] = sigma_diff sqrt(2/pi) / delta`.
pub fn expected_distance(cm: &CovarianceMatrix, adc: &AdcSpec) -> Result<f64> {
    Ok(distance_stats(cm, adc)?.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::equivalent_cm;
    use nalgebra::DMatrix;

    fn paper_adc() -> AdcSpec {
        AdcSpec::new(52.0, 13).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn adc_geometry() {
        let adc = paper_adc();
        assert_eq!(adc.alphabet_size(), 8192);
        assert_eq!(adc.delta(), 0.012_695_312_5);
        assert_eq!(adc.delta() * adc.alphabet_size() as f64, 104.0);
        assert_eq!(adc.index_of(0.0), 4096);
        assert_eq!(adc.index_of(1e-12), 4097);
        assert_eq!(adc.index_of(62.0), 8192);
        assert_eq!(adc.index_of(-1e9), 1);
        assert_eq!(adc.index_of(-52.0), 1);
        assert!(AdcSpec::new(0.0, 13).is_err());
        assert!(AdcSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn c_delta_values() {
        let c = c_delta(0.012_695_312_5).unwrap();
        assert!(rel(c, 2.565_115_488_293_677_5e-5) < 1e-12);
        assert!(rel(c_delta(0.1).unwrap(), 1.591_549_430_918_953_4e-3) < 1e-12);
        assert_eq!(c_delta((2.0 * PI).sqrt()), Err(Error::OutOfValidity((2.0 * PI).sqrt())));
        assert!(c_delta(0.0).is_err());
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_fn(0.0).unwrap(), 1.0);
        assert!(rel(gamma_fn(1.0).unwrap(), 5.828_427_124_746_19) < 1e-13);
        let t = 1e6;
        assert!((gamma_fn(t).unwrap() / (2.0 * t * E) - 1.0).abs() < 1e-4);
        assert!(gamma_fn(-1.0).is_err());
        // continuity at 0
        assert!((gamma_fn(1e-9).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gamma_matches_direct_formula() {
        for &t in &[0.01, 0.3, 2.0, 17.5, 41.7] {
            let s = (t * t + 1.0f64).sqrt();
            let direct = (t + s) * (t / (s - 1.0)).powf(t);
            assert!(rel(gamma_fn(t).unwrap(), direct) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn mu_values() {
        let adc = paper_adc();
        let mu = mu_correction(&adc, 10_000_000_000, 1_000_000_000, 8_900_000_000, 1e-22).unwrap();
        assert!(rel(mu, 1.954_403_021_066_561) < 1e-12);
        let half = mu_correction(&adc, 10_000_000_000, 2_000_000_000, 8_900_000_000, 1e-22).unwrap();
        assert!((mu / half - 2f64.sqrt()).abs() < 1e-9);
        // k_pe -> inf with N / n fixed: mu falls like 1 / sqrt(k_pe).
        let mus: Vec<f64> = [1e10, 1e12, 1e14, 1e16]
            .iter()
            .map(|&k: &f64| mu_correction(&adc, 10 * k as u64, k as u64, 9 * k as u64, 1e-22).unwrap())
            .collect();
        for w in mus.windows(2) {
            assert!((w[0] / w[1] - 10.0).abs() < 1e-6);
        }
        assert!(mus[3] < 1e-3);
        assert!(matches!(
            mu_correction(&adc, 10, 1, 9, 0.0),
            Err(Error::InfeasibleBudget(_))
        ));
    }

    #[test]
    fn mu_scales_with_log_eps() {
        let adc = paper_adc();
        let a = mu_correction(&adc, 1 << 30, 1 << 26, 1 << 29, 1e-10).unwrap();
        let b = mu_correction(&adc, 1 << 30, 1 << 26, 1 << 29, 1e-20).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eps_prime_values() {
        assert_eq!(eps_prime(1e-21, 0.99, 0.0, 100).unwrap(), 1e-21 / (4.0 * 0.99));
        assert!(rel(eps_prime(1e-21, 0.99, 0.0, 7).unwrap(), 2.525_252_525_252_525e-22) < 1e-14);
        assert!(matches!(
            eps_prime(1e-21, 0.99, 1e-3, 1_000_000),
            Err(Error::InfeasibleBudget(_))
        ));
        let a = eps_prime(1e-10, 0.9, 0.0, 10).unwrap();
        let b = eps_prime(3e-10, 0.9, 0.0, 10).unwrap();
        assert!(rel(b, 3.0 * a) < 1e-14);
    }

    #[test]
    fn tail_penalty_small_p() {
        // 1 - (1 - p)^n ~ n p for n p << 1
        let f = tail_penalty(1e-30, 1_000_000);
        assert!(rel(f, (2.0 * 1e-24f64).sqrt()) < 1e-9);
        assert_eq!(tail_penalty(0.0, 10), 0.0);
    }

    #[test]
    fn p_alpha_values() {
        assert_eq!(p_alpha_gaussian(0.0, 3.0).unwrap(), 1.0);
        assert!(p_alpha_gaussian(52.0, 6.04).unwrap() < 1e-50);
        assert!(rel(p_alpha_gaussian(52.0, 1e5).unwrap(), 0.869_386_005_988_022) < 1e-9);
    }

    #[test]
    fn exact_entropy_limits() {
        let adc = paper_adc();
        // Zero sits on a bin edge, so a vanishing zero-mean Gaussian splits evenly
        // between the two central bins.
        let narrow = discrete_entropy_exact(adc.delta() / 1000.0, &adc).unwrap();
        assert!((narrow - 1.0).abs() < 1e-12);
        // Centred inside a bin, all of the mass lands in that bin.
        let (mean, sigma) = (adc.delta() / 2.0, adc.delta() / 1000.0);
        let scale = sigma * std::f64::consts::SQRT_2;
        let probs = bin_probabilities(
            &adc,
            |x| 0.5 * erfc(-(x - mean) / scale),
            |x| 0.5 * erfc((x - mean) / scale),
        );
        assert!(shannon_bits(&probs) < 1e-6);

        let exact = discrete_entropy_exact(1.0, &adc).unwrap();
        let approx = discrete_entropy_approx(1.0, adc.delta()).unwrap();
        // Second-order binning correction: delta^2 / (24 sigma^2 ln 2).
        let correction = adc.delta().powi(2) / (24.0 * std::f64::consts::LN_2);
        assert!((exact - 8.346_665_555_330_486).abs() < 1e-9);
        assert!((exact - approx - correction).abs() < 1e-9);
        assert!((exact - approx).abs() < 1e-5);
    }

    #[test]
    fn uniform_density_gives_full_alphabet() {
        let adc = AdcSpec::new(4.0, 10).unwrap();
        let a = adc.alpha();
        let probs = bin_probabilities(
            &adc,
            |x| ((x + a) / (2.0 * a)).clamp(0.0, 1.0),
            |x| ((a - x) / (2.0 * a)).clamp(0.0, 1.0),
        );
        assert!((shannon_bits(&probs) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn approx_entropy_values() {
        assert!((discrete_entropy_approx(1.0, 1.0).unwrap() - 2.047_095_585_180_641).abs() < 1e-14);
        let a = discrete_entropy_approx(3.0, 0.02).unwrap();
        let b = discrete_entropy_approx(3.0, 0.01).unwrap();
        assert!((b - a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn approx_tracks_exact_for_fine_bins() {
        // |exact - approx| ~ delta^2 / (24 sigma^2 ln 2) < 1e-4 once delta <= sigma / 25.
        for (sigma, bits) in [(1.0, 13), (2.0, 12), (0.5, 14)] {
            let adc = AdcSpec::new(10.0 * sigma, bits).unwrap();
            assert!(adc.delta() <= sigma / 25.0);
            let exact = discrete_entropy_exact(sigma, &adc).unwrap();
            let approx = discrete_entropy_approx(sigma * sigma, adc.delta()).unwrap();
            assert!((exact - approx).abs() < 1e-4, "sigma = {sigma}");
        }
    }

    #[test]
    fn exact_entropy_converges_as_bins_shrink() {
        let target = 0.5 * (2.0 * PI * E).log2();
        let errs: Vec<f64> = [9, 10, 11]
            .iter()
            .map(|&bits| {
                let adc = AdcSpec::new(12.0, bits).unwrap();
                (discrete_entropy_exact(1.0, &adc).unwrap() + adc.delta().log2() - target).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn mutual_information_values() {
        assert!((mutual_information(37.0, 1.0, 0.0).unwrap() - 37f64.log2()).abs() < 1e-12);
        assert_eq!(mutual_information(1.0, 0.4, 0.1).unwrap(), 0.0);
        let i = mutual_information(1e5, 0.562, 0.005_558_7).unwrap();
        assert!((i - 8.479_509_664_444_606).abs() < 1e-9);
    }

    #[test]
    fn expected_distance_values() {
        let adc = AdcSpec::new(0.5 * 1024.0, 10).unwrap();
        assert_eq!(adc.delta(), 1.0);
        let d = expected_distance(&equivalent_cm(1.0, 1.0, 0.0).unwrap(), &adc).unwrap();
        assert!((d - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-12);
        let perfect = crate::gaussian::CovarianceMatrix::new(
            DMatrix::from_row_slice(4, 4, &[
                3.0, 0.0, 3.0, 0.0, //
                0.0, 3.0, 0.0, -3.0, //
                3.0, 0.0, 3.0, 0.0, //
                0.0, -3.0, 0.0, 3.0,
            ]),
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        assert_eq!(expected_distance(&perfect, &adc).unwrap(), 0.0);
    }
}
