//! Gaussian covariance-matrix algebra for the entanglement-based picture.
//!
//! Conventions: shot-noise units (vacuum = identity), quadrature ordering
//! `(x1, p1, x2, p2, ...)`, symplectic form `Omega = diag([[0, 1], [-1, 0]], ...)`.
//!
//! The Alice-Bob state after the relay is available through two routes:
//!
//! * [`build_pre_measurement_state`] writes the 8x8 matrix over
//!   `(A1, C, D, B1)` in closed form, and
//! * [`compose_pre_measurement_state`] builds the same matrix by composing
//!   two-mode squeezed vacua, entangling-cloner beam splitters and the
//!   balanced relay beam splitter.
//!
//! [`relay_and_displace`] then conditions on the relay's homodyne outcomes and
//! applies Bob's displacement, and the result must coincide with
//! [`equivalent_cm`] evaluated on the equivalent channel.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::channel::{ChannelScenario, EveModel};
use crate::error::{check_range, Error, Result};

/// Tolerance of the physicality test `min eig(gamma + i Omega) >= -PHYSICAL_TOL`.
pub const PHYSICAL_TOL: f64 = 1e-9;

/// Tolerance of `S Omega S^T = Omega`, per entry.
pub const SYMPLECTIC_TOL: f64 = 1e-12;

/// Symplectic form on `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn sigma_z() -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, -1.0)
}

/// Symmetric matrix of quadrature second moments over labelled modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
}

impl CovarianceMatrix {
    /// Wraps a matrix, checking shape, label count and exact symmetry.
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(Error::Shape {
                expected: "square matrix of even positive dimension".into(),
                got: format!("{rows}x{cols}"),
            });
        }
        if labels.len() != rows / 2 {
            return Err(Error::Shape {
                expected: format!("{} mode labels", rows / 2),
                got: format!("{} labels", labels.len()),
            });
        }
        for i in 0..rows {
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::Degenerate(format!(
                        "covariance matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(CovarianceMatrix { matrix, labels })
    }

    /// Symmetrizes `matrix` as `(M + M^T) / 2` before wrapping it.
    pub fn from_symmetrized(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Self::new(sym, labels)
    }

    pub fn vacuum(labels: &[&str]) -> Self {
        let n = 2 * labels.len();
        CovarianceMatrix {
            matrix: DMatrix::identity(n, n),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Single-mode thermal state of variance `w`.
    pub fn thermal(w: f64, label: &str) -> Result<Self> {
        if !(w >= 1.0) {
            return Err(Error::InvalidVariance(w));
        }
        Ok(CovarianceMatrix {
            matrix: DMatrix::identity(2, 2) * w,
            labels: vec![label.to_string()],
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn modes(&self) -> usize {
        self.labels.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mode_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// 2x2 block coupling mode `a` (rows) to mode `b` (columns).
    pub fn block(&self, a: usize, b: usize) -> Matrix2<f64> {
        Matrix2::new(
            self.matrix[(2 * a, 2 * b)],
            self.matrix[(2 * a, 2 * b + 1)],
            self.matrix[(2 * a + 1, 2 * b)],
            self.matrix[(2 * a + 1, 2 * b + 1)],
        )
    }

    /// Block-diagonal direct sum; labels are concatenated.
    pub fn direct_sum(&self, other: &CovarianceMatrix) -> CovarianceMatrix {
        let (n, m) = (self.dim(), other.dim());
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
        out.view_mut((n, n), (m, m)).copy_from(&other.matrix);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        CovarianceMatrix { matrix: out, labels }
    }

    /// Reduced state on the listed modes, in the listed order.
    pub fn select_modes(&self, modes: &[usize]) -> CovarianceMatrix {
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let k = idx.len();
        let matrix = DMatrix::from_fn(k, k, |i, j| self.matrix[(idx[i], idx[j])]);
        CovarianceMatrix {
            matrix,
            labels: modes.iter().map(|&m| self.labels[m].clone()).collect(),
        }
    }

    pub fn relabel(mut self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.modes() {
            return Err(Error::Shape {
                expected: format!("{} labels", self.modes()),
                got: format!("{} labels", labels.len()),
            });
        }
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    /// `S gamma S^T`, symmetrized against rounding.
    pub fn transform(&self, op: &SymplecticOp) -> Result<CovarianceMatrix> {
        if op.dim() != self.dim() {
            return Err(Error::Shape {
                expected: format!("{0}x{0} symplectic", self.dim()),
                got: format!("{0}x{0}", op.dim()),
            });
        }
        let s = op.matrix();
        CovarianceMatrix::from_symmetrized(s * &self.matrix * s.transpose(), self.labels.clone())
    }

    /// Adds `noise * I2` to one mode (classical additive Gaussian noise channel).
    pub fn add_mode_noise(&mut self, mode: usize, noise: f64) {
        self.matrix[(2 * mode, 2 * mode)] += noise;
        self.matrix[(2 * mode + 1, 2 * mode + 1)] += noise;
    }

    /// Smallest eigenvalue of the Hermitian matrix `gamma + i Omega`.
    ///
    /// Computed from the real symmetric embedding `[[gamma, -Omega], [Omega, gamma]]`,
    /// whose spectrum is that of `gamma + i Omega` with every eigenvalue doubled.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let omega = symplectic_form(self.modes());
        let mut emb = DMatrix::zeros(2 * n, 2 * n);
        emb.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
        emb.view_mut((n, n), (n, n)).copy_from(&self.matrix);
        emb.view_mut((0, n), (n, n)).copy_from(&(-&omega));
        emb.view_mut((n, 0), (n, n)).copy_from(&omega);
        SymmetricEigen::new(emb).eigenvalues.min()
    }

    pub fn is_physical(&self) -> bool {
        self.min_uncertainty_eigenvalue() >= -PHYSICAL_TOL
    }

    pub fn check_physical(&self) -> Result<()> {
        let min = self.min_uncertainty_eigenvalue();
        if min >= -PHYSICAL_TOL {
            Ok(())
        } else {
            Err(Error::NonPhysical(min))
        }
    }

    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        (&self.matrix - &other.matrix).amax()
    }
}

/// Real symplectic matrix acting on quadrature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOp {
    matrix: DMatrix<f64>,
}

impl SymplecticOp {
    /// Wraps `matrix` after checking `S Omega S^T = Omega`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(Error::Shape {
                expected: "square matrix of even positive dimension".into(),
                got: format!("{rows}x{cols}"),
            });
        }
        let op = SymplecticOp { matrix };
        let defect = op.symplectic_defect();
        if defect > SYMPLECTIC_TOL {
            return Err(Error::Degenerate(format!(
                "matrix is not symplectic (defect {defect:e})"
            )));
        }
        Ok(op)
    }

    pub fn identity(modes: usize) -> Self {
        SymplecticOp {
            matrix: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `max |S Omega S^T - Omega|`.
    pub fn symplectic_defect(&self) -> f64 {
        let omega = symplectic_form(self.dim() / 2);
        (&self.matrix * &omega * self.matrix.transpose() - omega).amax()
    }

    /// The operation `self` applied after `first`.
    pub fn after(&self, first: &SymplecticOp) -> SymplecticOp {
        SymplecticOp {
            matrix: &self.matrix * &first.matrix,
        }
    }
}

/// Two-mode squeezed vacuum of variance `v`: blocks `v I2` and `sqrt(v^2 - 1) sigma_z`.
pub fn tmsv(v: f64) -> Result<CovarianceMatrix> {
    if !(v >= 1.0) || !v.is_finite() {
        return Err(Error::InvalidVariance(v));
    }
    let c = (v * v - 1.0).sqrt();
    let mut m = DMatrix::zeros(4, 4);
    for q in 0..2 {
        let sign = if q == 0 { 1.0 } else { -1.0 };
        m[(q, q)] = v;
        m[(2 + q, 2 + q)] = v;
        m[(q, 2 + q)] = sign * c;
        m[(2 + q, q)] = sign * c;
    }
    CovarianceMatrix::new(m, vec!["1".into(), "2".into()])
}

/// Beam splitter of transmittance `t` on `pair = (a, b)` inside a `modes`-mode system:
/// `a' = sqrt(t) a + sqrt(1-t) b`, `b' = -sqrt(1-t) a + sqrt(t) b` for both quadratures.
pub fn beamsplitter_op(t: f64, modes: usize, pair: (usize, usize)) -> Result<SymplecticOp> {
    check_range("transmittance", t, "[0, 1]", (0.0..=1.0).contains(&t))?;
    let (a, b) = pair;
    if a == b || a >= modes || b >= modes {
        return Err(Error::Shape {
            expected: format!("two distinct modes below {modes}"),
            got: format!("({a}, {b})"),
        });
    }
    let (ct, st) = (t.sqrt(), (1.0 - t).sqrt());
    let mut s = DMatrix::identity(2 * modes, 2 * modes);
    for q in 0..2 {
        let (ia, ib) = (2 * a + q, 2 * b + q);
        s[(ia, ia)] = ct;
        s[(ia, ib)] = st;
        s[(ib, ia)] = -st;
        s[(ib, ib)] = ct;
    }
    SymplecticOp::new(s)
}

fn set_block(m: &mut DMatrix<f64>, a: usize, b: usize, blk: Matrix2<f64>) {
    for i in 0..2 {
        for j in 0..2 {
            m[(2 * a + i, 2 * b + j)] = blk[(i, j)];
            m[(2 * b + j, 2 * a + i)] = blk[(i, j)];
        }
    }
}

fn checked_chi(t: f64, eps: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(Error::SingularChannel(t));
    }
    Ok(1.0 / t - 1.0 + eps)
}

/// Closed-form 8x8 covariance matrix over `(A1, C, D, B1)` before the relay's homodyne
/// measurements, with `chi_i = 1/T_i - 1 + eps_i`.
///
/// The Bob couplings follow `C = (A' - B')/sqrt(2)`, `D = (A' + B')/sqrt(2)`, so the
/// `(C, B1)` block is `-sqrt(T2 (V_B^2 - 1) / 2) sigma_z` and `(D, B1)` is its negative.
/// Under the correlated attack the Bell outputs also pick up the Eve cross-moment:
/// `C` gains `-kappa * diag(c, -c)`, `D` gains `+kappa * diag(c, -c)` with
/// `kappa = sqrt((1-T1)(1-T2))`.
pub fn build_pre_measurement_state(s: &ChannelScenario) -> Result<CovarianceMatrix> {
    if s.t1 == 0.0 {
        return Err(Error::SingularChannel(s.t1));
    }
    if s.t2 == 0.0 {
        return Err(Error::SingularChannel(s.t2));
    }
    s.validate()?;
    let eve = s.eve_model()?;
    let (t1, t2, va, vb) = (s.t1, s.t2, s.v_a, s.v_b);
    let chi1 = checked_chi(t1, eve.eps1)?;
    let chi2 = checked_chi(t2, eve.eps2)?;
    let a_arm = 0.5 * t1 * (va + chi1);
    let b_arm = 0.5 * t2 * (vb + chi2);
    let ca = (0.5 * t1 * (va * va - 1.0)).sqrt();
    let cb = (0.5 * t2 * (vb * vb - 1.0)).sqrt();
    let kappa = ((1.0 - t1) * (1.0 - t2)).sqrt() * eve.correlation;
    let corr = Matrix2::new(kappa, 0.0, 0.0, -kappa);

    let mut m = DMatrix::zeros(8, 8);
    let eye = Matrix2::identity();
    set_block(&mut m, 0, 0, eye * va);
    set_block(&mut m, 0, 1, sigma_z() * ca);
    set_block(&mut m, 0, 2, sigma_z() * ca);
    set_block(&mut m, 1, 1, eye * (a_arm + b_arm) - corr);
    set_block(&mut m, 1, 2, eye * (a_arm - b_arm));
    set_block(&mut m, 2, 2, eye * (a_arm + b_arm) + corr);
    set_block(&mut m, 1, 3, sigma_z() * -cb);
    set_block(&mut m, 2, 3, sigma_z() * cb);
    set_block(&mut m, 3, 3, eye * vb);
    CovarianceMatrix::new(m, labels(&["A1", "C", "D", "B1"]))
}

fn labels(ls: &[&str]) -> Vec<String> {
    ls.iter().map(|s| s.to_string()).collect()
}

/// Ancilla state feeding the two cloner beam splitters.
fn ancilla_state(t1: f64, t2: f64, eve: &EveModel) -> Result<CovarianceMatrix> {
    let w = |t: f64, eps: f64| {
        if t < 1.0 {
            1.0 + t * eps / (1.0 - t)
        } else {
            1.0
        }
    };
    let (w1, w2) = (w(t1, eve.eps1), w(t2, eve.eps2));
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = w1;
    m[(1, 1)] = w1;
    m[(2, 2)] = w2;
    m[(3, 3)] = w2;
    if t1 < 1.0 && t2 < 1.0 {
        m[(0, 2)] = eve.correlation;
        m[(2, 0)] = eve.correlation;
        m[(1, 3)] = -eve.correlation;
        m[(3, 1)] = -eve.correlation;
    }
    let state = CovarianceMatrix::new(m, labels(&["E2", "E3"]))?;
    state.check_physical()?;
    Ok(state)
}

/// Symplectic-composition route to the same 8x8 matrix as
/// [`build_pre_measurement_state`].
///
/// Modes: `A1 A2 B1 B2 E2 E3`. Each channel is an entangling cloner: a beam splitter of
/// transmittance `T_i` mixing the travelling mode with an ancilla of variance
/// `W_i = 1 + T_i eps_i / (1 - T_i)`. A channel with `T_i = 1` has no ancilla; its
/// excess noise enters as additive Gaussian noise `eps_i I2`.
pub fn compose_pre_measurement_state(s: &ChannelScenario) -> Result<CovarianceMatrix> {
    if s.t1 == 0.0 {
        return Err(Error::SingularChannel(s.t1));
    }
    if s.t2 == 0.0 {
        return Err(Error::SingularChannel(s.t2));
    }
    s.validate()?;
    let eve = s.eve_model()?;
    let (a1, a2, b2, e2, e3) = (0, 1, 3, 4, 5);
    let state = tmsv(s.v_a)?
        .direct_sum(&tmsv(s.v_b)?)
        .direct_sum(&ancilla_state(s.t1, s.t2, &eve)?);

    let channels = beamsplitter_op(s.t2, 6, (b2, e3))?.after(&beamsplitter_op(s.t1, 6, (a2, e2))?);
    let mut state = state.transform(&channels)?;
    if s.t1 == 1.0 {
        state.add_mode_noise(a2, eve.eps1);
    }
    if s.t2 == 1.0 {
        state.add_mode_noise(b2, eve.eps2);
    }
    // Balanced relay on (B', A'): the A' slot becomes C = (A' - B')/sqrt(2) and the
    // B' slot becomes D = (A' + B')/sqrt(2).
    let relay = beamsplitter_op(0.5, 6, (b2, a2))?;
    let state = state.transform(&relay)?;
    state
        .select_modes(&[a1, a2, b2, 2])
        .relabel(&["A1", "C", "D", "B1"])
}

/// Conditions the 8x8 `(A1, C, D, B1)` state on the relay outcomes `x_C`, `p_D` and
/// displaces Bob's mode by `g x_C` (x quadrature) and `g p_D` (p quadrature).
///
/// Returns the outcome-averaged covariance matrix of `(A1, B1')`: the Schur-complement
/// conditional covariance plus the spread of the displaced conditional mean.
pub fn relay_and_displace(pre: &CovarianceMatrix, g: f64) -> Result<CovarianceMatrix> {
    if pre.dim() != 8 {
        return Err(Error::Shape {
            expected: "8x8 (A1, C, D, B1) covariance".into(),
            got: format!("{0}x{0}", pre.dim()),
        });
    }
    check_range("gain", g, "(0, inf)", g > 0.0 && g.is_finite())?;
    let kept = [0usize, 1, 6, 7];
    let measured = [2usize, 5];
    let m = pre.matrix();
    let skk = DMatrix::from_fn(4, 4, |i, j| m[(kept[i], kept[j])]);
    let skm = DMatrix::from_fn(4, 2, |i, j| m[(kept[i], measured[j])]);
    let smm = DMatrix::from_fn(2, 2, |i, j| m[(measured[i], measured[j])]);
    let smm_inv = smm
        .clone()
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Degenerate(e.to_string()))?;

    let gain_cond = &skm * &smm_inv;
    let conditional = &skk - &gain_cond * skm.transpose();
    let mut shift = gain_cond;
    shift[(2, 0)] += g;
    shift[(3, 1)] += g;
    let total = conditional + &shift * smm * shift.transpose();
    let out = CovarianceMatrix::from_symmetrized(total, labels(&["A1", "B1'"]))?;
    Ok(out)
}

/// Alice-Bob covariance matrix of the equivalent one-way channel `(T, e)`.
pub fn equivalent_cm(v_a: f64, t: f64, e: f64) -> Result<CovarianceMatrix> {
    if !(v_a >= 1.0) || !v_a.is_finite() {
        return Err(Error::InvalidVariance(v_a));
    }
    check_range("equivalent transmittance", t, "(0, 1]", t > 0.0 && t <= 1.0)?;
    check_range("equivalent excess noise", e, "[0, inf)", e >= 0.0 && e.is_finite())?;
    let c = (t * (v_a * v_a - 1.0)).sqrt();
    let vb = t * (v_a - 1.0) + 1.0 + t * e;
    let mut m = DMatrix::zeros(4, 4);
    let eye = Matrix2::identity();
    set_block(&mut m, 0, 0, eye * v_a);
    set_block(&mut m, 0, 1, sigma_z() * c);
    set_block(&mut m, 1, 1, eye * vb);
    CovarianceMatrix::new(m, labels(&["A1", "B1'"]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Attack, GainPolicy};

    #[test]
    fn tmsv_vacuum_is_identity() {
        let cm = tmsv(1.0).unwrap();
        assert_eq!(cm.matrix(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn tmsv_blocks() {
        let cm = tmsv(2.0).unwrap();
        assert_eq!(cm.block(0, 0), Matrix2::identity() * 2.0);
        assert_eq!(cm.block(1, 1), Matrix2::identity() * 2.0);
        assert_eq!(cm.block(0, 1), sigma_z() * 3f64.sqrt());
        let cm = tmsv(5.04).unwrap();
        assert!((cm.get(0, 2) - 4.939_797_566_702_506).abs() < 1e-14);
        assert!(cm.is_physical());
    }

    #[test]
    fn tmsv_rejects_sub_vacuum_variance() {
        assert_eq!(tmsv(0.99), Err(Error::InvalidVariance(0.99)));
        assert!(tmsv(f64::NAN).is_err());
    }

    #[test]
    fn beamsplitter_limits() {
        let id = beamsplitter_op(1.0, 2, (0, 1)).unwrap();
        assert_eq!(id.matrix(), &DMatrix::<f64>::identity(4, 4));
        let swap = beamsplitter_op(0.0, 2, (0, 1)).unwrap();
        let m = swap.matrix();
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(2, 0)], -1.0);
        assert_eq!(m[(1, 3)], 1.0);
        assert_eq!(m[(3, 1)], -1.0);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn beamsplitter_errors() {
        assert!(matches!(
            beamsplitter_op(1.2, 2, (0, 1)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            beamsplitter_op(-0.1, 2, (0, 1)),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(beamsplitter_op(0.5, 2, (1, 1)), Err(Error::Shape { .. })));
        assert!(matches!(beamsplitter_op(0.5, 2, (0, 2)), Err(Error::Shape { .. })));
    }

    #[test]
    fn symplectic_op_rejects_non_symplectic() {
        let m = DMatrix::identity(2, 2) * 2.0;
        assert!(SymplecticOp::new(m).is_err());
    }

    #[test]
    fn non_physical_matrix_detected() {
        let m = DMatrix::identity(2, 2) * 0.5;
        let cm = CovarianceMatrix::new(m, vec!["a".into()]).unwrap();
        assert!(!cm.is_physical());
        assert!(matches!(cm.check_physical(), Err(Error::NonPhysical(_))));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = 0.1;
        assert!(CovarianceMatrix::new(m, vec!["a".into()]).is_err());
    }

    fn scenario(t1: f64, t2: f64, eps: f64, v: f64) -> ChannelScenario {
        ChannelScenario::new(t1, t2, eps, eps, v, v).unwrap()
    }

    #[test]
    fn lossless_vacuum_is_identity() {
        let s = scenario(1.0, 1.0, 0.0, 1.0);
        let pre = build_pre_measurement_state(&s).unwrap();
        assert!(pre.max_abs_diff(&CovarianceMatrix::vacuum(&["A1", "C", "D", "B1"])) < 1e-15);
    }

    #[test]
    fn lossless_a1_c_block() {
        let s = scenario(1.0, 1.0, 0.0, 2.0);
        let pre = build_pre_measurement_state(&s).unwrap();
        assert_eq!(pre.block(0, 1), sigma_z() * 1.5f64.sqrt());
    }

    #[test]
    fn closed_form_matches_composition() {
        let s = scenario(0.7, 0.9, 0.01, 5.0);
        let closed = build_pre_measurement_state(&s).unwrap();
        let composed = compose_pre_measurement_state(&s).unwrap();
        assert!(closed.max_abs_diff(&composed) < 1e-12);
        assert!(closed.is_physical());
    }

    #[test]
    fn zero_transmittance_is_singular() {
        let s = ChannelScenario {
            t1: 0.0,
            ..scenario(0.5, 0.5, 0.0, 2.0)
        };
        assert_eq!(build_pre_measurement_state(&s), Err(Error::SingularChannel(0.0)));
    }

    #[test]
    fn relay_requires_eight_modes_worth() {
        let cm = tmsv(2.0).unwrap();
        assert!(matches!(relay_and_displace(&cm, 1.0), Err(Error::Shape { .. })));
    }

    #[test]
    fn relay_with_vacuum_bob_adds_displacement_noise() {
        // V_B = 1 leaves nothing to cancel: e = 2 at g = sqrt(2) on lossless channels.
        let s = scenario(1.0, 1.0, 0.0, 1.0);
        let pre = build_pre_measurement_state(&s).unwrap();
        let out = relay_and_displace(&pre, 2f64.sqrt()).unwrap();
        let expect = equivalent_cm(1.0, 1.0, 2.0).unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn relay_large_bob_variance_gives_identity_channel() {
        let v = 1e8;
        let s = ChannelScenario::new(1.0, 1.0, 0.0, 0.0, 1.0, v).unwrap();
        let pre = build_pre_measurement_state(&s).unwrap();
        let out = relay_and_displace(&pre, 2f64.sqrt()).unwrap();
        let expect = equivalent_cm(1.0, 1.0, 0.0).unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-7);
    }

    #[test]
    fn relay_practical_bob_variance() {
        let s = ChannelScenario::new(0.5, 1.0, 0.002, 0.002, 5.04, 5.04).unwrap();
        let ch = s.equivalent_channel().unwrap();
        let out = relay_and_displace(&build_pre_measurement_state(&s).unwrap(), ch.g).unwrap();
        let vb = ch.t * (5.04 - 1.0) + 1.0 + ch.t * ch.e;
        assert!((out.get(2, 2) - vb).abs() < 1e-12);
        assert!((out.get(3, 3) - vb).abs() < 1e-12);
    }

    #[test]
    fn equivalent_cm_forms() {
        assert_eq!(
            equivalent_cm(1.0, 1.0, 0.0).unwrap().matrix(),
            &DMatrix::<f64>::identity(4, 4)
        );
        let cm = equivalent_cm(7.5, 1.0, 0.0).unwrap();
        assert_eq!(cm.matrix(), tmsv(7.5).unwrap().matrix());
        let cm = equivalent_cm(1e5, 0.562, 0.005_558_718_861_209_964).unwrap();
        assert!((cm.get(2, 2) - 56_200.441_124).abs() < 1e-8);
    }

    #[test]
    fn equivalent_cm_preconditions() {
        assert!(equivalent_cm(0.5, 0.5, 0.0).is_err());
        assert!(equivalent_cm(2.0, 0.0, 0.0).is_err());
        assert!(equivalent_cm(2.0, 1.1, 0.0).is_err());
        assert!(equivalent_cm(2.0, 0.5, -0.1).is_err());
    }

    #[test]
    fn correlated_composition_matches_closed_form() {
        let s = ChannelScenario::new(0.5, 0.5, 0.002, 0.002, 1e5, 1e5)
            .unwrap()
            .with_attack(Attack::CorrelatedMaximal)
            .with_gain(GainPolicy::Optimal);
        let closed = build_pre_measurement_state(&s).unwrap();
        let composed = compose_pre_measurement_state(&s).unwrap();
        assert!(closed.max_abs_diff(&composed) < 1e-7 * 1e5);
    }
}
