//! Hermitian operator algebra, quantum channels and the conditional-entropy
//! objective with its gradient.
//!
//! Composite indices are ordered A, B, announcement/flag registers last; a
//! basis index `i` on `A (x) B` decodes as `i = i_A * dim_B + i_B`. All values
//! are immutable after construction and all operations are pure, so they can
//! be evaluated concurrently from independent workers.
//!
//! Entropies are reported in bits. Internally everything is computed in nats
//! and converted at a single point to avoid repeated log-base errors.

use crate::error::{Error, Result};
use crate::Label;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::LN_2;

pub type CMat = DMatrix<Complex64>;

/// Relative tolerance for the Hermiticity check of constructed operators.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Allowed negativity of density-matrix eigenvalues.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed deviation of density-matrix traces from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues below this floor are clamped before matrix logarithms.
pub const LOG_EIG_FLOOR: f64 = 1e-14;
/// Mixing weight of the maximally mixed state applied to states before the
/// entropy objective is evaluated: rho -> (1-delta) rho + delta I/d.
pub const STATE_PERTURBATION: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Finite-dimensional Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    dim: usize,
    mat: CMat,
}

impl HermitianOp {
    /// Validates Hermiticity relative to the largest entry magnitude.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "expected a nonempty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max)
            .max(1.0);
        let mut max_dev = 0.0_f64;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                let dev = (mat[(i, j)] - mat[(j, i)].conj()).norm();
                max_dev = max_dev.max(dev);
            }
        }
        if max_dev > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian {
                max_dev,
                tol: HERMITICITY_TOL * scale,
            });
        }
        // Symmetrize so downstream eigendecompositions see an exactly
        // Hermitian matrix.
        let herm = (&mat + mat.adjoint()).scale(0.5);
        Ok(Self {
            dim: herm.nrows(),
            mat: herm,
        })
    }

    pub fn from_real(entries: &[f64], dim: usize) -> Result<Self> {
        assert_eq!(entries.len(), dim * dim);
        let mat = CMat::from_iterator(dim, dim, entries.iter().map(|&x| c(x)))
            .transpose();
        Self::new(mat)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            mat: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: CMat::identity(dim, dim),
        }
    }

    /// Projector |i><i| on a `dim`-dimensional space.
    pub fn basis_projector(dim: usize, i: usize) -> Self {
        let mut mat = CMat::zeros(dim, dim);
        mat[(i, i)] = c(1.0);
        Self { dim, mat }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn add(&self, other: &HermitianOp) -> Result<HermitianOp> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "cannot add operators of dims {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(HermitianOp {
            dim: self.dim,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn scale(&self, s: f64) -> HermitianOp {
        HermitianOp {
            dim: self.dim,
            mat: self.mat.scale(s),
        }
    }

    pub fn kron(&self, other: &HermitianOp) -> HermitianOp {
        HermitianOp {
            dim: self.dim * other.dim,
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Block direct sum `self (+) other`.
    pub fn direct_sum(&self, other: &HermitianOp) -> HermitianOp {
        let d = self.dim + other.dim;
        let mut mat = CMat::zeros(d, d);
        mat.view_mut((0, 0), (self.dim, self.dim)).copy_from(&self.mat);
        mat.view_mut((self.dim, self.dim), (other.dim, other.dim))
            .copy_from(&other.mat);
        HermitianOp { dim: d, mat }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Hilbert-Schmidt inner product Tr[self * other]; real for Hermitian
    /// arguments.
    pub fn inner(&self, other: &HermitianOp) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += (self.mat[(i, j)] * other.mat[(j, i)]).re;
            }
        }
        acc
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .mat
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// True when all imaginary parts vanish within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.mat.iter().all(|z| z.im.abs() <= tol)
    }
}

/// Positive-semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOp,
}

impl DensityMatrix {
    pub fn new(op: HermitianOp) -> Result<Self> {
        let min_eig = op.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd { min_eig });
        }
        let trace = op.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::BadTrace {
                trace,
                tol: TRACE_TOL,
            });
        }
        Ok(Self { op })
    }

    pub fn from_mat(mat: CMat) -> Result<Self> {
        Self::new(HermitianOp::new(mat)?)
    }

    /// Nearest valid state: clips negative eigenvalues and renormalizes.
    /// Used to clean up solver output that satisfies PSD only to solver
    /// tolerance.
    pub fn project(op: &HermitianOp) -> Result<Self> {
        let eig = op.mat.clone().symmetric_eigen();
        let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotPsd {
                min_eig: op.min_eigenvalue(),
            });
        }
        let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            clipped.len(),
            clipped.iter().map(|&l| c(l / total)),
        ));
        let mat = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
        Self::from_mat(mat)
    }

    /// Pure state |psi><psi| from an unnormalized state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if n <= 0.0 {
            return Err(Error::Argument("zero state vector".into()));
        }
        let d = psi.len();
        let mut mat = CMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = psi[i] * psi[j].conj() / n;
            }
        }
        Self::from_mat(mat)
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn mat(&self) -> &CMat {
        &self.op.mat
    }

    /// Tr[gamma rho].
    pub fn expectation(&self, gamma: &HermitianOp) -> f64 {
        gamma.inner(&self.op)
    }
}

/// Partial trace over the subsystems listed in `traced_indices`.
///
/// `subsystem_dims` lists the tensor factors in order (A first); their
/// product must equal the matrix dimension.
pub fn partial_trace_mat(
    mat: &CMat,
    subsystem_dims: &[usize],
    traced_indices: &[usize],
) -> Result<CMat> {
    let total: usize = subsystem_dims.iter().product();
    if total != mat.nrows() || mat.nrows() != mat.ncols() {
        return Err(Error::Dimension(format!(
            "subsystem dims {:?} give total {} but matrix is {}x{}",
            subsystem_dims,
            total,
            mat.nrows(),
            mat.ncols()
        )));
    }
    for &t in traced_indices {
        if t >= subsystem_dims.len() {
            return Err(Error::Dimension(format!(
                "traced index {} out of range for {} subsystems",
                t,
                subsystem_dims.len()
            )));
        }
    }
    let keep: Vec<usize> = (0..subsystem_dims.len())
        .filter(|i| !traced_indices.contains(i))
        .collect();
    let keep_dim: usize = keep.iter().map(|&i| subsystem_dims[i]).product::<usize>().max(1);
    let traced_dim: usize = traced_indices
        .iter()
        .map(|&i| subsystem_dims[i])
        .product::<usize>()
        .max(1);

    // Strides of each subsystem in the flattened index.
    let n_sub = subsystem_dims.len();
    let mut strides = vec![1usize; n_sub];
    for i in (0..n_sub.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * subsystem_dims[i + 1];
    }

    let flat = |multi_keep: usize, multi_tr: usize| -> usize {
        let mut idx = 0;
        let mut mk = multi_keep;
        // decode keep part (row-major over kept subsystems)
        for (pos, &sub) in keep.iter().enumerate() {
            let radix: usize = keep[pos + 1..].iter().map(|&s| subsystem_dims[s]).product::<usize>().max(1);
            let digit = mk / radix;
            mk %= radix;
            idx += digit * strides[sub];
        }
        let mut mt = multi_tr;
        for (pos, &sub) in traced_indices.iter().enumerate() {
            let radix: usize = traced_indices[pos + 1..]
                .iter()
                .map(|&s| subsystem_dims[s])
                .product::<usize>()
                .max(1);
            let digit = mt / radix;
            mt %= radix;
            idx += digit * strides[sub];
        }
        idx
    };

    let mut out = CMat::zeros(keep_dim, keep_dim);
    for r in 0..keep_dim {
        for s in 0..keep_dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..traced_dim {
                acc += mat[(flat(r, t), flat(s, t))];
            }
            out[(r, s)] = acc;
        }
    }
    Ok(out)
}

/// Partial trace of a state; the result is again a valid state.
pub fn partial_trace(
    state: &DensityMatrix,
    subsystem_dims: &[usize],
    traced_indices: &[usize],
) -> Result<DensityMatrix> {
    let out = partial_trace_mat(state.mat(), subsystem_dims, traced_indices)?;
    DensityMatrix::from_mat(out)
}

/// Completely positive, trace-non-increasing map given by Kraus operators,
/// together with the orthogonal key projectors acting on its output.
///
/// Trace-non-increasing maps are allowed because sifting discards rounds.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    kraus: Vec<CMat>,
    key_projectors: Vec<HermitianOp>,
    input_dim: usize,
    output_dim: usize,
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMat>, key_projectors: Vec<HermitianOp>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Argument("need at least one Kraus operator".into()))?;
        let (output_dim, input_dim) = (first.nrows(), first.ncols());
        for (i, k) in kraus.iter().enumerate() {
            if k.nrows() != output_dim || k.ncols() != input_dim {
                return Err(Error::Dimension(format!(
                    "Kraus operator {} is {}x{}, expected {}x{}",
                    i,
                    k.nrows(),
                    k.ncols(),
                    output_dim,
                    input_dim
                )));
            }
        }
        // sum_i K_i^dag K_i <= 1 within tolerance
        let mut sum = CMat::zeros(input_dim, input_dim);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let slack = CMat::identity(input_dim, input_dim) - sum;
        let min_eig = HermitianOp::new(slack)?.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::Argument(format!(
                "Kraus operators exceed trace preservation: min eig of 1 - sum K^dag K is {min_eig:.3e}"
            )));
        }
        if key_projectors.is_empty() {
            return Err(Error::Argument("need at least one key projector".into()));
        }
        let mut proj_sum = HermitianOp::zeros(output_dim);
        for (j, z) in key_projectors.iter().enumerate() {
            if z.dim() != output_dim {
                return Err(Error::Dimension(format!(
                    "key projector {} has dim {}, expected {}",
                    j,
                    z.dim(),
                    output_dim
                )));
            }
            let idem = z.mat() * z.mat() - z.mat();
            if idem.iter().map(|x| x.norm()).fold(0.0, f64::max) > 1e-10 {
                return Err(Error::Argument(format!("key projector {j} is not idempotent")));
            }
            for (j2, z2) in key_projectors.iter().enumerate() {
                if j2 != j {
                    let prod = z.mat() * z2.mat();
                    if prod.iter().map(|x| x.norm()).fold(0.0, f64::max) > 1e-10 {
                        return Err(Error::Argument(format!(
                            "key projectors {j} and {j2} are not orthogonal"
                        )));
                    }
                }
            }
            proj_sum = proj_sum.add(z)?;
        }
        let dev = (proj_sum.mat() - CMat::identity(output_dim, output_dim))
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::Argument(format!(
                "key projectors do not sum to identity (max deviation {dev:.3e})"
            )));
        }
        Ok(Self {
            kraus,
            key_projectors,
            input_dim,
            output_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn num_key_symbols(&self) -> usize {
        self.key_projectors.len()
    }

    pub fn kraus_ops(&self) -> &[CMat] {
        &self.kraus
    }

    /// G(rho) = sum_i K_i rho K_i^dag.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.output_dim, self.output_dim);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// Adjoint map G^dag(sigma) = sum_i K_i^dag sigma K_i.
    pub fn apply_adjoint(&self, sigma: &CMat) -> CMat {
        let mut out = CMat::zeros(self.input_dim, self.input_dim);
        for k in &self.kraus {
            out += k.adjoint() * sigma * k;
        }
        out
    }

    /// Pinching by the key projectors: Z(sigma) = sum_j Z_j sigma Z_j.
    pub fn pinch(&self, sigma: &CMat) -> CMat {
        let mut out = CMat::zeros(self.output_dim, self.output_dim);
        for z in &self.key_projectors {
            out += z.mat() * sigma * z.mat();
        }
        out
    }
}

/// POVM elements (or general observation operators) indexed by announcement
/// label. When `complete` is set the operators must sum to identity.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    ops: BTreeMap<Label, HermitianOp>,
    dim: usize,
    complete: bool,
}

impl ObservableSet {
    pub fn new(ops: BTreeMap<Label, HermitianOp>, complete: bool) -> Result<Self> {
        let dim = ops
            .values()
            .next()
            .ok_or_else(|| Error::Argument("empty observable set".into()))?
            .dim();
        let mut sum = HermitianOp::zeros(dim);
        for (label, op) in &ops {
            if op.dim() != dim {
                return Err(Error::Dimension(format!(
                    "observable {label} has dim {}, expected {dim}",
                    op.dim()
                )));
            }
            if !op.is_psd(1e-10) {
                return Err(Error::NotPsd {
                    min_eig: op.min_eigenvalue(),
                });
            }
            sum = sum.add(op)?;
        }
        if complete {
            let dev = (sum.mat() - CMat::identity(dim, dim))
                .iter()
                .map(|x| x.norm())
                .fold(0.0, f64::max);
            if dev > 1e-10 {
                return Err(Error::Argument(format!(
                    "observables declared complete but sum deviates from identity by {dev:.3e}"
                )));
            }
        }
        Ok(Self { ops, dim, complete })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn complete(&self) -> bool {
        self.complete
    }

    pub fn get(&self, label: &Label) -> Option<&HermitianOp> {
        self.ops.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &HermitianOp)> {
        self.ops.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.ops.keys()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// rho -> (1-delta) rho + delta I/d.
pub fn perturb(rho: &CMat, delta: f64) -> CMat {
    let d = rho.nrows();
    let mut out = rho.scale(1.0 - delta);
    let w = delta / d as f64;
    for i in 0..d {
        out[(i, i)] += c(w);
    }
    out
}

struct EigH {
    vals: Vec<f64>,
    vecs: CMat,
}

fn eigh(h: &CMat) -> EigH {
    let eig = h.clone().symmetric_eigen();
    EigH {
        vals: eig.eigenvalues.iter().copied().collect(),
        vecs: eig.eigenvectors,
    }
}

/// Matrix natural logarithm with eigenvalues clamped at [`LOG_EIG_FLOOR`].
fn log_clamped(e: &EigH) -> CMat {
    let d = e.vals.len();
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        e.vals.iter().map(|&l| c(l.max(LOG_EIG_FLOOR).ln())),
    ));
    &e.vecs * diag * e.vecs.adjoint()
}

fn check_conditioning(e: &EigH, what: &str) -> Result<()> {
    let min = e.vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min < -1e-9 {
        return Err(Error::Conditioning(format!(
            "{what} has eigenvalue {min:.3e} beyond tolerance"
        )));
    }
    Ok(())
}

/// Conditional-entropy objective f(rho) = D(G(rho) || Z(G(rho))) in bits,
/// evaluated at the regularized state (1-delta) rho + delta I/d.
///
/// This equals H(Z|EC) of the key register produced by `channel`, with
/// discarded rounds contributing zero.
pub fn entropy_objective(channel: &KrausChannel, state: &DensityMatrix) -> Result<f64> {
    if channel.input_dim() != state.dim() {
        return Err(Error::Dimension(format!(
            "channel input dim {} but state dim {}",
            channel.input_dim(),
            state.dim()
        )));
    }
    let rho = perturb(state.mat(), STATE_PERTURBATION);
    objective_impl(channel, &rho)
}

fn objective_impl(channel: &KrausChannel, rho: &CMat) -> Result<f64> {
    let sigma = channel.apply(rho);
    let tau = channel.pinch(&sigma);
    let es = eigh(&sigma);
    let et = eigh(&tau);
    check_conditioning(&es, "G(rho)")?;
    check_conditioning(&et, "Z(G(rho))")?;

    // Tr[sigma ln sigma] over the support.
    let mut tr_s_ln_s = 0.0;
    for &l in &es.vals {
        if l > LOG_EIG_FLOOR {
            tr_s_ln_s += l * l.ln();
        }
    }
    // Tr[sigma ln tau] in tau's eigenbasis; support of sigma is contained in
    // the support of its pinching, so weights on tiny eigenvalues vanish.
    let mut tr_s_ln_t = 0.0;
    for (i, &m) in et.vals.iter().enumerate() {
        let u = et.vecs.column(i);
        let w = (u.adjoint() * &sigma * u)[(0, 0)].re;
        if m > LOG_EIG_FLOOR {
            tr_s_ln_t += w * m.ln();
        } else if w > 1e-9 {
            return Err(Error::Conditioning(format!(
                "pinched state has weight {w:.3e} on a vanishing eigenvalue"
            )));
        }
    }
    Ok(((tr_s_ln_s - tr_s_ln_t) / LN_2).max(0.0))
}

/// Gradient of [`entropy_objective`] with respect to the state, as a
/// Hermitian operator in bits: directional derivatives satisfy
/// d/dt f(rho + t Delta) = Tr[grad * Delta].
pub fn entropy_gradient(channel: &KrausChannel, state: &DensityMatrix) -> Result<HermitianOp> {
    if channel.input_dim() != state.dim() {
        return Err(Error::Dimension(format!(
            "channel input dim {} but state dim {}",
            channel.input_dim(),
            state.dim()
        )));
    }
    let rho = perturb(state.mat(), STATE_PERTURBATION);
    gradient_impl(channel, &rho)
}

fn gradient_impl(channel: &KrausChannel, rho: &CMat) -> Result<HermitianOp> {
    let sigma = channel.apply(rho);
    let tau = channel.pinch(&sigma);
    let es = eigh(&sigma);
    let et = eigh(&tau);
    check_conditioning(&es, "G(rho)")?;
    check_conditioning(&et, "Z(G(rho))")?;
    let diff = log_clamped(&es) - log_clamped(&et);
    // Chain rule through the perturbation map rho -> (1-delta) rho + ...
    let grad = channel
        .apply_adjoint(&diff)
        .scale((1.0 - STATE_PERTURBATION) / LN_2);
    HermitianOp::new(grad)
}

/// Objective and gradient at the same point, sharing the eigendecompositions.
pub fn entropy_value_and_gradient(
    channel: &KrausChannel,
    rho_raw: &CMat,
) -> Result<(f64, HermitianOp)> {
    let rho = perturb(rho_raw, STATE_PERTURBATION);
    let value = objective_impl(channel, &rho)?;
    let grad = gradient_impl(channel, &rho)?;
    Ok((value, grad))
}

/// Quantum relative entropy D(a || b) in bits via eigendecomposition, with
/// the usual support conventions. Exposed for spectral-oracle tests.
pub fn relative_entropy_bits(a: &HermitianOp, b: &HermitianOp) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension("relative entropy dims differ".into()));
    }
    let ea = eigh(a.mat());
    let eb = eigh(b.mat());
    let mut acc = 0.0;
    for &l in &ea.vals {
        if l > LOG_EIG_FLOOR {
            acc += l * l.ln();
        }
    }
    for (i, &m) in eb.vals.iter().enumerate() {
        let u = eb.vecs.column(i);
        let w = (u.adjoint() * a.mat() * u)[(0, 0)].re;
        if m > LOG_EIG_FLOOR {
            acc -= w * m.ln();
        } else if w > 1e-9 {
            return Err(Error::Conditioning(
                "support of first argument not contained in second".into(),
            ));
        }
    }
    Ok(acc / LN_2)
}
