//! Binomial concentration machinery: exact CDF evaluation through the
//! regularized incomplete beta function, fixed-length variational bounds,
//! Clopper-Pearson confidence radii, and Gaussian (Zubkov-Serov) bounds that
//! remain finite for tail probabilities far below double-precision range.
//!
//! All bound-producing functions are deterministic for fixed inputs. Root
//! finding uses bisection on the monotone tail functions (200 iterations,
//! absolute tolerance 1e-12); Newton would need derivatives that are
//! inconvenient here and bisection is unconditionally safe.

use crate::error::{Error, Result};
use crate::Label;
use statrs::function::erf;
use statrs::function::gamma::ln_gamma;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{LN_2, PI};

/// Evaluation mode for tail probabilities. `Extended` performs log-domain
/// arithmetic and must handle epsilons down to 1e-3000 without underflow.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PrecisionMode {
    Standard,
    Extended,
}

/// Probability in (0,1] stored as its natural logarithm, so that values such
/// as 1e-3000 survive end-to-end.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Eps {
    ln: f64,
}

impl Eps {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::Argument(format!(
                "epsilon must lie in (0,1), got {value}"
            )));
        }
        Ok(Self { ln: value.ln() })
    }

    pub fn from_ln(ln: f64) -> Result<Self> {
        if !(ln < 0.0) {
            return Err(Error::Argument(format!(
                "ln(epsilon) must be negative, got {ln}"
            )));
        }
        Ok(Self { ln })
    }

    pub fn from_log10(log10: f64) -> Result<Self> {
        Self::from_ln(log10 * std::f64::consts::LN_10)
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// log2(1/eps), the cost this epsilon contributes to key-length formulas.
    pub fn log2_inv(&self) -> f64 {
        -self.ln / LN_2
    }

    /// f64 value; underflows to 0 below ~1e-308.
    pub fn value(&self) -> f64 {
        self.ln.exp()
    }

    pub fn scale_ln(&self, ln_factor: f64) -> Result<Self> {
        Self::from_ln(self.ln + ln_factor)
    }
}

/// Tail probability together with its natural logarithm. `value` underflows
/// to zero where `ln` stays finite.
#[derive(Clone, Copy, Debug)]
pub struct TailProb {
    ln: f64,
}

impl TailProb {
    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    pub fn value(&self) -> f64 {
        self.ln.exp()
    }
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta function
// ---------------------------------------------------------------------------

const BETA_CF_MAX_ITER: usize = 1200;

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz), returning the
/// CF part only; caller applies the (log-domain) prefactor.
fn betainc_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence(format!(
        "incomplete beta continued fraction (a={a}, b={b}, x={x})"
    )))
}

/// ln I_x(a, b) on the directly-convergent side (x below the CF switch
/// point).
fn ln_betainc_direct(a: f64, b: f64, x: f64) -> Result<f64> {
    let ln_prefix = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b) - a.ln();
    let cf = betainc_cf(a, b, x)?;
    Ok(ln_prefix + cf.ln())
}

/// Natural log of the regularized incomplete beta I_x(a, b).
///
/// Stays finite for astronomically small tails; `exp` of the result
/// reproduces the standard value where representable.
pub fn ln_betainc(a: f64, b: f64, x: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 {
        return Err(Error::Argument(format!("beta shapes must be >= 0, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Argument(format!("beta argument x={x} outside [0,1]")));
    }
    // Degenerate shapes: Beta(0, b) is a point mass at 0, Beta(a, 0) at 1.
    if a == 0.0 {
        return Ok(0.0);
    }
    if b == 0.0 {
        return Ok(if x >= 1.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x == 1.0 {
        return Ok(0.0);
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_betainc_direct(a, b, x)
    } else {
        let ln_comp = ln_betainc_direct(b, a, 1.0 - x)?;
        // I = 1 - comp
        if ln_comp > -1e-17 {
            // complement indistinguishable from 1; I underflows
            Ok(f64::NEG_INFINITY)
        } else {
            Ok((-ln_comp.exp()).ln_1p())
        }
    }
}

/// Regularized incomplete beta I_x(a, b) in double precision.
pub fn betainc(a: f64, b: f64, x: f64) -> Result<f64> {
    Ok(ln_betainc(a, b, x)?.exp())
}

// ---------------------------------------------------------------------------
// Binomial CDF
// ---------------------------------------------------------------------------

/// Pr[X <= m] for X ~ Bin(n, p), evaluated as I_{1-p}(n-m, m+1).
pub fn binomial_cdf(n: u64, p: f64, m: i64) -> Result<f64> {
    Ok(ln_binomial_cdf(n, p, m)?.exp())
}

/// ln Pr[X <= m]; finite in the deep tail.
pub fn ln_binomial_cdf(n: u64, p: f64, m: i64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Argument("binomial needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("binomial p={p} outside [0,1]")));
    }
    if m < 0 || m as u64 > n {
        return Err(Error::Argument(format!(
            "binomial CDF argument m={m} outside 0..={n}"
        )));
    }
    let m = m as u64;
    if m == n {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    ln_betainc((n - m) as f64, (m + 1) as f64, 1.0 - p)
}

// ---------------------------------------------------------------------------
// Acceptance spec and bound sets
// ---------------------------------------------------------------------------

/// Expected frequencies and tolerances defining the acceptance set, together
/// with the expected sifted count.
#[derive(Clone, Debug)]
pub struct AcceptanceSpec {
    /// Expected frequency per announcement label (complete over Sigma).
    pub expected: BTreeMap<Label, f64>,
    /// Tolerated fluctuation per label; the sift entry is t_sift.
    pub tolerance: BTreeMap<Label, f64>,
    /// Expected number of sifted generation rounds.
    pub n_sift: f64,
    /// Total number of protocol rounds N.
    pub total_rounds: f64,
}

impl AcceptanceSpec {
    pub fn new(
        expected: BTreeMap<Label, f64>,
        tolerance: BTreeMap<Label, f64>,
        n_sift: f64,
        total_rounds: f64,
    ) -> Result<Self> {
        for (label, &f) in &expected {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Argument(format!(
                    "expected frequency for {label} is {f}, outside [0,1]"
                )));
            }
        }
        for (label, &t) in &tolerance {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Argument(format!(
                    "tolerance for {label} is {t}, outside [0,1]"
                )));
            }
        }
        if n_sift > total_rounds {
            return Err(Error::Argument(format!(
                "n_sift = {n_sift} exceeds N = {total_rounds}"
            )));
        }
        Ok(Self {
            expected,
            tolerance,
            n_sift,
            total_rounds,
        })
    }

    pub fn t_sift(&self) -> f64 {
        self.tolerance.get(&Label::Sift).copied().unwrap_or(0.0)
    }

    pub fn f_sift(&self) -> f64 {
        self.expected.get(&Label::Sift).copied().unwrap_or(0.0)
    }

    pub fn tol(&self, label: &Label) -> f64 {
        self.tolerance.get(label).copied().unwrap_or(0.0)
    }

    /// Clipped acceptance window [F-t, F+t] for a label.
    pub fn window(&self, label: &Label) -> (f64, f64) {
        let f = self.expected[label];
        let t = self.tol(label);
        ((f - t).max(0.0), (f + t).min(1.0))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BoundKind {
    /// Variational radii (Thm-1 style, fixed length).
    Variational,
    /// Confidence radii (Clopper-Pearson style, variable length).
    Confidence,
}

/// Per-label statistical radii turning observed or expected frequencies into
/// linear density-matrix constraints.
#[derive(Clone, Debug)]
pub struct BoundSet {
    pub kind: BoundKind,
    pub lower: BTreeMap<Label, f64>,
    pub upper: BTreeMap<Label, f64>,
    /// Labels whose radius saturated at the [0,1] boundary because no root of
    /// C(nu) = eps exists; the corresponding one-sided constraint is vacuous.
    pub saturated: BTreeSet<Label>,
}

impl BoundSet {
    /// Per-label symmetrization nu := max(nu^U, nu^L) applied to both sides.
    pub fn symmetrized(&self) -> BoundSet {
        let mut lower = BTreeMap::new();
        let mut upper = BTreeMap::new();
        for (label, &lo) in &self.lower {
            let hi = self.upper[label];
            let m = lo.max(hi);
            lower.insert(*label, m);
            upper.insert(*label, m);
        }
        BoundSet {
            kind: self.kind,
            lower,
            upper,
            saturated: self.saturated.clone(),
        }
    }

    pub fn upper_of(&self, label: &Label) -> f64 {
        self.upper.get(label).copied().unwrap_or(0.0)
    }

    pub fn lower_of(&self, label: &Label) -> f64 {
        self.lower.get(label).copied().unwrap_or(0.0)
    }

    /// All-zero radii (asymptotic limit).
    pub fn zero(labels: impl Iterator<Item = Label>, kind: BoundKind) -> BoundSet {
        let mut lower = BTreeMap::new();
        let mut upper = BTreeMap::new();
        for l in labels {
            lower.insert(l, 0.0);
            upper.insert(l, 0.0);
        }
        BoundSet {
            kind,
            lower,
            upper,
            saturated: BTreeSet::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Variational bounds (fixed length)
// ---------------------------------------------------------------------------

const BISECT_TOL: f64 = 1e-12;
const BISECT_MAX_ITER: usize = 200;

/// Smallest x in [lo, hi] with f(x) <= target, for f nonincreasing. Assumes
/// f(hi) <= target; if f(lo) <= target returns lo.
fn bisect_nonincreasing(
    mut lo: f64,
    mut hi: f64,
    target: f64,
    f: &mut dyn FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    if f(lo)? <= target {
        return Ok(lo);
    }
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// ln of the upper-branch acceptance probability
/// C^U(nu) = Pr[X <= floor(N F^U)] at p = F^U + nu.
fn ln_c_upper(n: u64, f_upper: f64, nu: f64) -> Result<f64> {
    let m = (n as f64 * f_upper).floor() as i64;
    let p = (f_upper + nu).min(1.0);
    ln_binomial_cdf(n, p, m)
}

/// ln of the lower-branch acceptance probability
/// C^L(nu) = Pr[X >= ceil(N F^L)] at p = F^L - nu.
fn ln_c_lower(n: u64, f_lower: f64, nu: f64) -> Result<f64> {
    let m = (n as f64 * f_lower).ceil() as i64;
    let p = (f_lower - nu).max(0.0);
    // Pr[X >= m] = 1 - Pr[X <= m-1]
    let ln_cdf = ln_binomial_cdf(n, p, m - 1)?;
    if ln_cdf > -1e-17 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((-ln_cdf.exp()).ln_1p())
}

/// Variational radii of the fixed-length feasible set: per label the smallest
/// nu with C^{U/L}(nu) <= eps_at, found by bisection on the monotone C
/// functions; saturates (and flags) where no radius in [0,1] achieves the
/// target.
pub fn variational_bounds(
    spec: &AcceptanceSpec,
    eps_at: Eps,
    _mode: PrecisionMode,
) -> Result<BoundSet> {
    let n = spec.total_rounds as u64;
    if n == 0 {
        return Err(Error::Argument("total_rounds must be positive".into()));
    }
    let ln_eps = eps_at.ln();
    let mut lower = BTreeMap::new();
    let mut upper = BTreeMap::new();
    let mut saturated = BTreeSet::new();

    for (label, _) in &spec.expected {
        let (f_lo, f_hi) = spec.window(label);

        // Upper radius: vacuous when the window already reaches 1.
        let nu_u = if f_hi >= 1.0 {
            saturated.insert(*label);
            (1.0 - f_hi).max(0.0)
        } else {
            let boundary = 1.0 - f_hi;
            if ln_c_upper(n, f_hi, boundary)? > ln_eps {
                // even p = 1 keeps the acceptance probability above eps
                saturated.insert(*label);
                boundary
            } else {
                bisect_nonincreasing(0.0, boundary, ln_eps, &mut |nu| ln_c_upper(n, f_hi, nu))?
            }
        };

        // Lower radius: vacuous when the window already reaches 0.
        let nu_l = if f_lo <= 0.0 {
            saturated.insert(*label);
            f_lo.max(0.0)
        } else {
            let boundary = f_lo;
            if ln_c_lower(n, f_lo, boundary)? > ln_eps {
                saturated.insert(*label);
                boundary
            } else {
                bisect_nonincreasing(0.0, boundary, ln_eps, &mut |nu| ln_c_lower(n, f_lo, nu))?
            }
        };

        upper.insert(*label, nu_u);
        lower.insert(*label, nu_l);
    }
    Ok(BoundSet {
        kind: BoundKind::Variational,
        lower,
        upper,
        saturated,
    })
}

// ---------------------------------------------------------------------------
// Clopper-Pearson radii (variable length)
// ---------------------------------------------------------------------------

/// p-th quantile of the Beta(a, b) distribution given ln(p) of the target
/// probability, by bisection on ln I_x(a, b).
fn beta_quantile_ln(ln_p: f64, a: f64, b: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = ln_betainc(a, b, mid)?;
        if v < ln_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Same but for a target probability 1 - q with ln(q) given (upper quantile).
fn beta_upper_quantile_ln(ln_q: f64, a: f64, b: f64) -> Result<f64> {
    // B(1-q; a, b) = 1 - B(q; b, a) by the reflection symmetry of the Beta
    // distribution.
    Ok(1.0 - beta_quantile_ln(ln_q, b, a)?)
}

/// Clopper-Pearson radii (kappa^L, kappa^U) for one observed frequency, with
/// per-entry budget eps_at / (2 |Sigma|).
///
/// Requires N * f_obs to be integral within 1e-9; use
/// [`clopper_pearson_guarded`] for model-derived frequencies.
pub fn clopper_pearson(
    f_obs: f64,
    n: u64,
    eps_at: Eps,
    sigma_size: usize,
    mode: PrecisionMode,
) -> Result<(f64, f64)> {
    let m = n as f64 * f_obs;
    if (m - m.round()).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "N * f_obs = {m} is not integral; use the floor/ceil guarded variant"
        )));
    }
    let m = m.round();
    cp_radii(f_obs, m, m, n, eps_at, sigma_size, mode)
}

/// Clopper-Pearson radii with the floor/ceil guard: brackets the unknown
/// integer count by floor(N f_obs) <= m <= ceil(N f_obs) and takes the
/// conservative (wider) interval endpoints.
pub fn clopper_pearson_guarded(
    f_obs: f64,
    n: u64,
    eps_at: Eps,
    sigma_size: usize,
    mode: PrecisionMode,
) -> Result<(f64, f64)> {
    let m = n as f64 * f_obs;
    cp_radii(f_obs, m.floor(), m.ceil(), n, eps_at, sigma_size, mode)
}

fn cp_radii(
    f_obs: f64,
    m_low: f64,
    m_high: f64,
    n: u64,
    eps_at: Eps,
    sigma_size: usize,
    _mode: PrecisionMode,
) -> Result<(f64, f64)> {
    if sigma_size == 0 {
        return Err(Error::Argument("sigma_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&f_obs) {
        return Err(Error::Argument(format!("f_obs={f_obs} outside [0,1]")));
    }
    let nf = n as f64;
    // per-entry two-sided budget eps_at / (2 |Sigma|)
    let ln_alpha = eps_at.ln() - (2.0 * sigma_size as f64).ln();
    // lower endpoint: alpha-quantile of Beta(m, N - m + 1), using the smaller
    // bracketed count
    let p_lo = beta_quantile_ln(ln_alpha, m_low, nf - m_low + 1.0)?;
    // upper endpoint: (1-alpha)-quantile of Beta(m + 1, N - m), larger count
    let p_hi = beta_upper_quantile_ln(ln_alpha, m_high + 1.0, nf - m_high)?;
    let kappa_l = (f_obs - p_lo).max(0.0);
    let kappa_u = (p_hi - f_obs).max(0.0).min(1.0 - f_obs);
    Ok((kappa_l, kappa_u))
}

/// Clopper-Pearson radii for every label of an observed frequency vector,
/// with |Sigma| taken from the map size.
pub fn clopper_pearson_set(
    f_obs: &BTreeMap<Label, f64>,
    n: u64,
    eps_at: Eps,
    mode: PrecisionMode,
) -> Result<BoundSet> {
    let sigma = f_obs.len();
    let mut lower = BTreeMap::new();
    let mut upper = BTreeMap::new();
    for (label, &f) in f_obs {
        let (kl, ku) = clopper_pearson_guarded(f, n, eps_at, sigma, mode)?;
        lower.insert(*label, kl);
        upper.insert(*label, ku);
    }
    Ok(BoundSet {
        kind: BoundKind::Confidence,
        lower,
        upper,
        saturated: BTreeSet::new(),
    })
}

// ---------------------------------------------------------------------------
// Gaussian (Zubkov-Serov) bounds
// ---------------------------------------------------------------------------

/// ln erfc(t) for t >= 0, finite far beyond double-precision underflow.
fn ln_erfc(t: f64) -> f64 {
    if t < 8.0 {
        erf::erfc(t).ln()
    } else {
        // asymptotic series erfc(t) = exp(-t^2)/(t sqrt(pi)) (1 - 1/(2t^2) + ...)
        let inv2 = 1.0 / (2.0 * t * t);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -(2.0 * k as f64 - 1.0) * inv2;
            if term.abs() < 1e-18 {
                break;
            }
            sum += term;
        }
        -t * t - t.ln() - 0.5 * PI.ln() + sum.ln()
    }
}

/// Inverse complementary error function from ln(y): solves erfc(t) = y.
/// Series start plus Newton polish on the log-domain residual.
fn erfc_inv_from_ln(ln_y: f64) -> Result<f64> {
    if ln_y >= 0.0 {
        return Err(Error::Argument(format!(
            "erfc inverse needs y in (0,1), got ln y = {ln_y}"
        )));
    }
    if ln_y > (1e-4_f64).ln() {
        // comfortably in double range
        return Ok(erf::erfc_inv(ln_y.exp()));
    }
    // erfc(t) ~ exp(-t^2)/(t sqrt(pi)) => t0 = sqrt(-ln y - 0.5 ln(-ln y * pi))
    let l = -ln_y;
    let mut t = (l - 0.5 * (l * PI).ln()).max(1.0).sqrt();
    for _ in 0..60 {
        let g = ln_erfc(t) - ln_y;
        // d/dt ln erfc(t) = -2 exp(-t^2) / (sqrt(pi) erfc(t))
        let dg = -2.0 * (-t * t - ln_erfc(t)).exp() / PI.sqrt();
        let step = g / dg;
        t -= step;
        if step.abs() < 1e-13 * t.max(1.0) {
            return Ok(t);
        }
    }
    Err(Error::NonConvergence(format!(
        "inverse erfc at ln y = {ln_y}"
    )))
}

/// Upper-tail Gaussian quantile from ln(eps): z with Q(z) = eps where Q is
/// the standard normal upper tail.
fn normal_upper_quantile_ln(ln_eps: f64) -> Result<f64> {
    // Q(z) = erfc(z / sqrt 2) / 2
    Ok(erfc_inv_from_ln(ln_eps + LN_2)? * std::f64::consts::SQRT_2)
}

/// Relative entropy between Bernoulli(x) and Bernoulli(p), natural log.
fn bernoulli_divergence(x: f64, p: f64) -> f64 {
    let mut h = 0.0;
    if x > 0.0 {
        h += x * (x / p).ln();
    }
    if x < 1.0 {
        h += (1.0 - x) * ((1.0 - x) / (1.0 - p)).ln();
    }
    h
}

/// Zubkov-Serov normal bound C_{N,p}(k) = Phi(sign(k/N - p) sqrt(2N H(k/N, p)))
/// with H the Bernoulli relative entropy; upper-bounds Pr[X <= k-1] and
/// lower-bounds Pr[X <= k].
pub fn zubkov_c(n: u64, p: f64, k: i64, mode: PrecisionMode) -> Result<TailProb> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("zubkov bound needs p in (0,1), got {p}")));
    }
    if k <= 0 || k as u64 >= n {
        return Err(Error::Argument(format!(
            "zubkov bound needs 0 < k < N for the divergence; use the exact binomial CDF for k={k}"
        )));
    }
    let x = k as f64 / n as f64;
    let arg = (2.0 * n as f64 * bernoulli_divergence(x, p)).sqrt() * (x - p).signum();
    match mode {
        PrecisionMode::Standard => {
            let v = 0.5 * erf::erfc(-arg / std::f64::consts::SQRT_2);
            Ok(TailProb::from_ln(v.ln()))
        }
        PrecisionMode::Extended => {
            if arg >= 0.0 {
                // Phi(arg) = 1 - Q(arg)
                let ln_q = ln_erfc(arg / std::f64::consts::SQRT_2) - LN_2;
                Ok(TailProb::from_ln((-ln_q.exp()).ln_1p()))
            } else {
                Ok(TailProb::from_ln(
                    ln_erfc(-arg / std::f64::consts::SQRT_2) - LN_2,
                ))
            }
        }
    }
}

/// Solve H(x, p) = target for p on the branch p >= x (increasing side).
fn solve_divergence_above(x: f64, target: f64) -> f64 {
    let mut lo = x;
    let mut hi = 1.0;
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if bernoulli_divergence(x, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // conservative side: larger p gives a smaller acceptance bound, so return
    // the upper end of the bracket
    hi
}

/// Solve H(x, p) = target for p on the branch p <= x (increasing as p
/// decreases).
fn solve_divergence_below(x: f64, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = x;
    for _ in 0..BISECT_MAX_ITER {
        if hi - lo <= BISECT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if bernoulli_divergence(x, mid) < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Gaussian-bound Clopper-Pearson replacement: radii valid (possibly looser
/// than the exact Beta quantiles) at any epsilon, including far below double
/// range in extended mode.
pub fn gaussian_confidence_bounds(
    f_obs: f64,
    n: u64,
    eps_at: Eps,
    sigma_size: usize,
    _mode: PrecisionMode,
) -> Result<(f64, f64)> {
    if sigma_size == 0 {
        return Err(Error::Argument("sigma_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&f_obs) {
        return Err(Error::Argument(format!("f_obs={f_obs} outside [0,1]")));
    }
    let nf = n as f64;
    let ln_alpha = eps_at.ln() - (2.0 * sigma_size as f64).ln();
    let z = normal_upper_quantile_ln(ln_alpha)?;
    let target = z * z / (2.0 * nf);

    // kappa^U from C_{N,p}(ceil(N f) + 1) = alpha on the p > x branch
    let k_hi = (nf * f_obs).ceil() + 1.0;
    let kappa_u = if k_hi >= nf {
        1.0 - f_obs
    } else {
        let x = k_hi / nf;
        let p_max = solve_divergence_above(x, target);
        (p_max - f_obs).clamp(0.0, 1.0 - f_obs)
    };

    // kappa^L from 1 - C_{N,p}(floor(N f) - 1) = alpha on the p < x branch
    let k_lo = (nf * f_obs).floor() - 1.0;
    let kappa_l = if k_lo <= 0.0 {
        f_obs
    } else {
        let x = k_lo / nf;
        let p_min = solve_divergence_below(x, target);
        (f_obs - p_min).clamp(0.0, f_obs)
    };
    Ok((kappa_l, kappa_u))
}

/// Gaussian-bound variational radii: conservative replacements for
/// [`variational_bounds`] valid at any epsilon.
pub fn gaussian_variational_bounds(
    spec: &AcceptanceSpec,
    eps_at: Eps,
    _mode: PrecisionMode,
) -> Result<BoundSet> {
    let nf = spec.total_rounds;
    if nf < 1.0 {
        return Err(Error::Argument("total_rounds must be positive".into()));
    }
    let z = normal_upper_quantile_ln(eps_at.ln())?;
    let target = z * z / (2.0 * nf);
    let mut lower = BTreeMap::new();
    let mut upper = BTreeMap::new();
    let mut saturated = BTreeSet::new();

    for (label, _) in &spec.expected {
        let (f_lo, f_hi) = spec.window(label);

        // nu^U solves C_{N, F^U + nu}(floor(N F^U) + 1) = eps on p > x
        let k_hi = (nf * f_hi).floor() + 1.0;
        let nu_u = if k_hi >= nf || f_hi >= 1.0 {
            saturated.insert(*label);
            1.0 - f_hi
        } else {
            let x = k_hi / nf;
            let p = solve_divergence_above(x, target);
            (p - f_hi).clamp(0.0, 1.0 - f_hi)
        };

        // nu^L solves 1 - C_{N, F^L - nu}(ceil(N F^L) - 1) = eps on p < x
        let k_lo = (nf * f_lo).ceil() - 1.0;
        let nu_l = if k_lo <= 0.0 || f_lo <= 0.0 {
            saturated.insert(*label);
            f_lo
        } else {
            let x = k_lo / nf;
            let p = solve_divergence_below(x, target);
            (f_lo - p).clamp(0.0, f_lo)
        };

        upper.insert(*label, nu_u);
        lower.insert(*label, nu_l);
    }
    Ok(BoundSet {
        kind: BoundKind::Variational,
        lower,
        upper,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Label;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn eps(v: f64) -> Eps {
        Eps::new(v).unwrap()
    }

    fn one_label_spec(n: u64, f: f64, t: f64) -> AcceptanceSpec {
        let mut expected = BTreeMap::new();
        let mut tol = BTreeMap::new();
        expected.insert(Label::test(0, 0), f);
        tol.insert(Label::test(0, 0), t);
        AcceptanceSpec::new(expected, tol, 0.0, n as f64).unwrap()
    }

    // direct pmf summation oracle
    fn cdf_by_summation(n: u64, p: f64, m: u64) -> f64 {
        let mut term = (1.0 - p).powi(n as i32);
        let mut acc = term;
        for k in 0..m {
            term *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
            acc += term;
        }
        acc
    }

    #[test]
    fn binomial_cdf_trivials() {
        assert_abs_diff_eq!(binomial_cdf(17, 0.3, 17).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(binomial_cdf(2, 0.5, 0).unwrap(), 0.25, epsilon = 1e-13);
        assert!(binomial_cdf(10, 0.5, -1).is_err());
        assert!(binomial_cdf(10, 0.5, 11).is_err());
    }

    #[test]
    fn binomial_cdf_matches_direct_summation() {
        let v = binomial_cdf(1000, 0.1, 100).unwrap();
        let oracle = cdf_by_summation(1000, 0.1, 100);
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-10);
        // also cross-check statrs' beta as an independent implementation
        let statrs = statrs::function::beta::beta_reg(900.0, 101.0, 0.9);
        assert_abs_diff_eq!(v, statrs, epsilon = 1e-11);
    }

    #[test]
    fn ln_binomial_cdf_deep_tail_finite() {
        // double precision underflows here; the log stays finite
        let ln = ln_binomial_cdf(1_000_000, 0.5, 100_000).unwrap();
        assert!(ln.is_finite());
        assert!(ln < -2000.0);
        let ln2 = ln_binomial_cdf(1000, 0.1, 100).unwrap();
        assert_abs_diff_eq!(ln2.exp(), cdf_by_summation(1000, 0.1, 100), epsilon = 1e-10);
    }

    #[test]
    fn variational_bounds_eps_near_one_gives_zero() {
        let spec = one_label_spec(1000, 0.1, 0.01);
        let b = variational_bounds(&spec, eps(0.999), PrecisionMode::Standard).unwrap();
        let l = Label::test(0, 0);
        assert!(b.upper[&l] < 1e-9, "nu^U = {}", b.upper[&l]);
        assert!(b.lower[&l] < 1e-9);
    }

    #[test]
    fn variational_bounds_monotone_in_eps() {
        let spec = one_label_spec(10_000, 0.1, 0.0);
        let tight = variational_bounds(&spec, eps(1e-10), PrecisionMode::Standard).unwrap();
        let loose = variational_bounds(&spec, eps(1e-3), PrecisionMode::Standard).unwrap();
        let l = Label::test(0, 0);
        assert!(tight.upper[&l] >= loose.upper[&l]);
        assert!(tight.lower[&l] >= loose.lower[&l]);
    }

    #[test]
    fn variational_bounds_bracket_verified() {
        let spec = one_label_spec(10_000, 0.1, 0.0);
        let e = eps(1e-2);
        let b = variational_bounds(&spec, e, PrecisionMode::Standard).unwrap();
        let l = Label::test(0, 0);
        let nu = b.upper[&l];
        assert!(ln_c_upper(10_000, 0.1, nu).unwrap() <= e.ln());
        assert!(ln_c_upper(10_000, 0.1, nu - 1e-11).unwrap() > e.ln());
        let nul = b.lower[&l];
        assert!(ln_c_lower(10_000, 0.1, nul).unwrap() <= e.ln());
        assert!(ln_c_lower(10_000, 0.1, nul - 1e-11).unwrap() > e.ln());
    }

    #[test]
    fn variational_bounds_saturate_at_boundary() {
        let spec = one_label_spec(100, 1.0, 0.0);
        let b = variational_bounds(&spec, eps(1e-6), PrecisionMode::Standard).unwrap();
        let l = Label::test(0, 0);
        assert!(b.saturated.contains(&l));
        assert_eq!(b.upper[&l], 0.0);
    }

    #[test]
    fn variational_bounds_monte_carlo_soundness() {
        // N = 1e4, F = 0.1, t = 0, eps = 1e-2: at p = F + nu^U the shifted
        // test Pr[F_obs <= 0.1] stays below eps + 3 sigma.
        let n = 10_000u64;
        let spec = one_label_spec(n, 0.1, 0.0);
        let e = 1e-2;
        let b = variational_bounds(&spec, eps(e), PrecisionMode::Standard).unwrap();
        let nu = b.upper[&Label::test(0, 0)];
        let p = 0.1 + nu;
        let trials = 100_000u64;
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
        let dist = rand_distr::Binomial::new(n, p).unwrap();
        let mut accepts = 0u64;
        for _ in 0..trials {
            let x: u64 = dist.sample(&mut rng);
            if x as f64 <= 0.1 * n as f64 {
                accepts += 1;
            }
        }
        let freq = accepts as f64 / trials as f64;
        let sigma = (e * (1.0 - e) / trials as f64).sqrt();
        assert!(
            freq <= e + 3.0 * sigma,
            "accept frequency {freq} exceeds {e} + 3 sigma"
        );
    }

    #[test]
    fn clopper_pearson_zero_count_closed_form() {
        let n = 500u64;
        let e = eps(0.01);
        let sigma = 4usize;
        let (kl, ku) = clopper_pearson(0.0, n, e, sigma, PrecisionMode::Standard).unwrap();
        assert_eq!(kl, 0.0);
        let alpha = 0.01 / (2.0 * sigma as f64);
        let closed_form = 1.0 - alpha.powf(1.0 / n as f64);
        assert_abs_diff_eq!(ku, closed_form, epsilon = 1e-10);
    }

    #[test]
    fn clopper_pearson_full_count_clips() {
        let (_, ku) = clopper_pearson(1.0, 300, eps(0.05), 3, PrecisionMode::Standard).unwrap();
        assert_eq!(ku, 0.0);
    }

    #[test]
    fn clopper_pearson_requires_integral_counts() {
        assert!(clopper_pearson(0.1234567, 1000, eps(0.05), 3, PrecisionMode::Standard).is_err());
        assert!(
            clopper_pearson_guarded(0.1234567, 1000, eps(0.05), 3, PrecisionMode::Standard)
                .is_ok()
        );
    }

    #[test]
    fn clopper_pearson_guard_is_conservative() {
        let n = 1000u64;
        let e = eps(0.05);
        let f = 123.0 / 1000.0;
        let exact = clopper_pearson(f, n, e, 5, PrecisionMode::Standard).unwrap();
        let off = 123.4 / 1000.0;
        let guarded = clopper_pearson_guarded(off, n, e, 5, PrecisionMode::Standard).unwrap();
        // guarded interval at a nearby non-integral frequency must cover at
        // least as much parameter space on each side of its center
        assert!(guarded.0 >= exact.0 - 0.4 / 1000.0 - 1e-12);
        assert!(guarded.1 >= exact.1 - 0.4 / 1000.0 - 1e-12);
    }

    #[test]
    fn clopper_pearson_monte_carlo_coverage() {
        // p = 0.3, N = 2000, eps = 0.05, |Sigma| = 5: coverage of the
        // per-entry interval must be >= 1 - 0.05/5 - 3 sigma.
        let n = 2000u64;
        let p = 0.3;
        let e = eps(0.05);
        let sigma_size = 5usize;
        let trials = 10_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE);
        let dist = rand_distr::Binomial::new(n, p).unwrap();
        // memoize intervals per count
        let mut cache: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        let mut covered = 0usize;
        for _ in 0..trials {
            let x: u64 = dist.sample(&mut rng);
            let (kl, ku) = *cache.entry(x).or_insert_with(|| {
                let f = x as f64 / n as f64;
                clopper_pearson(f, n, e, sigma_size, PrecisionMode::Standard).unwrap()
            });
            let f = x as f64 / n as f64;
            if p >= f - kl - 1e-15 && p <= f + ku + 1e-15 {
                covered += 1;
            }
        }
        let target = 1.0 - 0.05 / sigma_size as f64;
        let sd = (target * (1.0 - target) / trials as f64).sqrt();
        let coverage = covered as f64 / trials as f64;
        assert!(
            coverage >= target - 3.0 * sd,
            "coverage {coverage} below {target} - 3 sigma"
        );
    }

    #[test]
    fn zubkov_at_mean_is_half() {
        let t = zubkov_c(1000, 0.25, 250, PrecisionMode::Standard).unwrap();
        assert_abs_diff_eq!(t.value(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zubkov_rejects_degenerate_k() {
        assert!(zubkov_c(100, 0.5, 0, PrecisionMode::Standard).is_err());
        assert!(zubkov_c(100, 0.5, 100, PrecisionMode::Standard).is_err());
    }

    #[test]
    fn zubkov_sandwiches_exact_cdf() {
        // C_{N,p}(k) <= Pr[X <= k] <= C_{N,p}(k+1)
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..200 {
            let n = rng.random_range(10u64..=500);
            let p: f64 = rng.random_range(0.05..0.95);
            let k = rng.random_range(1i64..n as i64 - 1);
            let exact = binomial_cdf(n, p, k).unwrap();
            let above = zubkov_c(n, p, k + 1, PrecisionMode::Standard).unwrap().value();
            assert!(
                above >= exact - 1e-12,
                "C(k+1) = {above} < CDF(k) = {exact} at n={n}, p={p}, k={k}"
            );
            let below = zubkov_c(n, p, k, PrecisionMode::Standard).unwrap().value();
            assert!(
                below <= exact + 1e-12,
                "C(k) = {below} > CDF(k) = {exact} at n={n}, p={p}, k={k}"
            );
        }
    }

    #[test]
    fn zubkov_extended_survives_underflow() {
        // deep tail where the double-precision value is exactly 0
        let t = zubkov_c(10_000_000, 0.5, 100, PrecisionMode::Extended).unwrap();
        assert!(t.ln().is_finite());
        assert!(t.ln() < -1700.0);
        assert_eq!(t.value(), 0.0);
        // against log-domain recomputation: ln Phi(-z) = ln(Q(z))
        let x = 100.0 / 10_000_000.0;
        let z = (2.0 * 10_000_000.0 * bernoulli_divergence(x, 0.5)).sqrt();
        let oracle = ln_erfc(z / std::f64::consts::SQRT_2) - LN_2;
        assert_abs_diff_eq!(t.ln(), oracle, epsilon = 1e-9 * oracle.abs());
    }

    #[test]
    fn gaussian_confidence_never_tighter_than_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let e = eps(1e-3);
        for _ in 0..40 {
            let n = rng.random_range(200u64..=20_000);
            let m = rng.random_range(1..n - 1);
            let f = m as f64 / n as f64;
            let (el, eu) = clopper_pearson(f, n, e, 5, PrecisionMode::Standard).unwrap();
            let (gl, gu) = gaussian_confidence_bounds(f, n, e, 5, PrecisionMode::Standard).unwrap();
            assert!(gl >= el - 1e-10, "gl={gl} el={el} n={n} m={m}");
            assert!(gu >= eu - 1e-10, "gu={gu} eu={eu} n={n} m={m}");
        }
    }

    #[test]
    fn gaussian_confidence_tiny_eps_finite() {
        let e = Eps::from_log10(-300.0).unwrap();
        let (kl, ku) =
            gaussian_confidence_bounds(0.1, 1_000_000_000, e, 5, PrecisionMode::Extended).unwrap();
        assert!(kl.is_finite() && ku.is_finite());
        assert!(kl > 0.0 && kl < 1.0);
        assert!(ku > 0.0 && ku < 1.0);
    }

    #[test]
    fn gaussian_confidence_radii_shrink_with_n() {
        let e = eps(1e-6);
        let mut prev = f64::INFINITY;
        for n in [1_000u64, 10_000, 100_000, 1_000_000] {
            let (_, ku) = gaussian_confidence_bounds(0.1, n, e, 5, PrecisionMode::Standard).unwrap();
            assert!(ku <= prev + 1e-12);
            prev = ku;
        }
    }

    #[test]
    fn gaussian_variational_dominates_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let e = eps(1e-8);
        for _ in 0..50 {
            let f: f64 = rng.random_range(0.01..0.5);
            let t: f64 = rng.random_range(0.0..0.01);
            let spec = one_label_spec(1_000_000, f, t);
            let exact = variational_bounds(&spec, e, PrecisionMode::Standard).unwrap();
            let gauss = gaussian_variational_bounds(&spec, e, PrecisionMode::Standard).unwrap();
            let l = Label::test(0, 0);
            assert!(
                gauss.upper[&l] >= exact.upper[&l] - 1e-10,
                "f={f} t={t}: gaussian {} < exact {}",
                gauss.upper[&l],
                exact.upper[&l]
            );
            assert!(gauss.lower[&l] >= exact.lower[&l] - 1e-10);
        }
    }

    #[test]
    fn gaussian_variational_monotone_in_eps_and_finite_at_tiny_eps() {
        let spec = one_label_spec(1_000_000_000_000, 0.1, 0.0);
        let l = Label::test(0, 0);
        let mut prev = 0.0;
        for log10 in [-15.0, -300.0, -3000.0] {
            let e = Eps::from_log10(log10).unwrap();
            let b = gaussian_variational_bounds(&spec, e, PrecisionMode::Extended).unwrap();
            let nu = b.upper[&l];
            assert!(nu.is_finite() && nu > 0.0 && nu < 1.0);
            assert!(nu >= prev, "nu should grow as eps shrinks");
            prev = nu;
        }
    }

    #[test]
    fn bound_set_symmetrization() {
        let spec = one_label_spec(100_000, 0.2, 0.001);
        let b = variational_bounds(&spec, eps(1e-6), PrecisionMode::Standard).unwrap();
        let s = b.symmetrized();
        let l = Label::test(0, 0);
        assert_eq!(s.lower[&l], s.upper[&l]);
        assert_eq!(s.lower[&l], b.lower[&l].max(b.upper[&l]));
    }

    #[test]
    fn deterministic_repeated_calls() {
        let spec = one_label_spec(100_000, 0.123, 0.0005);
        let a = variational_bounds(&spec, eps(1e-7), PrecisionMode::Standard).unwrap();
        let b = variational_bounds(&spec, eps(1e-7), PrecisionMode::Standard).unwrap();
        let l = Label::test(0, 0);
        assert_eq!(a.upper[&l].to_bits(), b.upper[&l].to_bits());
        assert_eq!(a.lower[&l].to_bits(), b.lower[&l].to_bits());
    }
}
