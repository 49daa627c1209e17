//! Closed-form distributions and moments of the fractional pure birth
//! process.
//!
//! General rates: the state probabilities are Mittag–Leffler mixtures
//! with partial-fraction weights `1 / prod_{l != m} (lambda_l -
//! lambda_m)`. Linear rates `lambda_k = lambda k` reduce the weights to
//! alternating binomial coefficients.
//!
//! The alternating sums lose digits fast as `k` grows, so every linear
//! evaluator tracks its own cancellation and, past roughly twelve decimal
//! digits of loss, switches to the subordination mixture
//!
//! `p_k(t) = C(k-1, k-n0) int_0^inf e^{-lambda s n0}
//!           (1 - e^{-lambda s})^{k-n0} f_T(s, t) ds`,
//!
//! whose integrand is positive. The same mixture, evaluated on one shared
//! quadrature grid, builds whole PMF tables in O(active nodes) per state.

use crate::error::{Error, Result};
use crate::quad;
use crate::random_time::RandomTimeLaw;
use crate::rates::{RateSchedule, ValidatedSchedule};
use crate::special::{mittag_leffler, mittag_leffler_neg_with_err, recip_gamma, MlEvalConfig};
use statrs::function::gamma::ln_gamma;

/// Width of the clamping band at the [0, 1] boundaries: inside it a value
/// is roundoff, outside it is a genuine breakdown.
const CLAMP_BAND: f64 = 1e-9;

/// Condition number `sum |terms| / |result|` beyond which an alternating
/// sum has no significant digits left in f64.
const CONDITION_LIMIT: f64 = 1e12;

fn ml_cfg() -> MlEvalConfig {
    MlEvalConfig::default()
}

/// Tighter kernel accuracy for terms that enter amplifying sums: binomial
/// or partial-fraction weights multiply each term's error by factors in
/// the hundreds.
fn term_cfg() -> MlEvalConfig {
    MlEvalConfig {
        abs_tol: 1e-13,
        ..MlEvalConfig::default()
    }
}

/// `E_{nu,1}(x)` for `x <= 0` with an error bound; `nu = 1` is exact.
fn ml_term(nu: f64, x: f64, cfg: &MlEvalConfig) -> Result<(f64, f64)> {
    if nu == 1.0 {
        return Ok((x.exp(), 0.0));
    }
    mittag_leffler_neg_with_err(nu, x, cfg)
}

/// Amplified-error budget for an alternating evaluation to count as
/// trustworthy.
const SUM_ERR_BUDGET: f64 = 3e-11;

fn clamp_probability(p: f64, context: &str) -> Result<f64> {
    if (-CLAMP_BAND..=1.0 + CLAMP_BAND).contains(&p) {
        Ok(p.clamp(0.0, 1.0))
    } else {
        Err(Error::NumericalBreakdown(format!(
            "{context}: value {p} outside [0, 1] beyond the roundoff band"
        )))
    }
}

/// Partial-fraction data of the general-rate solution at level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionCoeffs {
    pub k: usize,
    /// `prod_{j < k} lambda_j` (empty product = 1).
    pub prefactor: f64,
    /// `weights[m-1] = 1 / prod_{l != m} (lambda_l - lambda_m)`.
    pub weights: Vec<f64>,
}

impl PartialFractionCoeffs {
    /// `sum_m weights_m`; zero for `k >= 2` by the Vandermonde identity.
    pub fn weight_sum(&self) -> f64 {
        let mut s = 0.0;
        let mut c = 0.0;
        for &w in &self.weights {
            let y = w - c;
            let t = s + y;
            c = (t - s) - y;
            s = t;
        }
        s
    }
}

/// Weights and prefactor of the general-rate solution.
pub fn partial_fraction_coeffs(
    schedule: &ValidatedSchedule,
    k: usize,
) -> Result<PartialFractionCoeffs> {
    if k == 0 || k > schedule.k_max() {
        return Err(Error::Domain(format!(
            "k = {k} outside validated range 1..={}",
            schedule.k_max()
        )));
    }
    let rates: Vec<f64> = (1..=k).map(|i| schedule.rate_at(i)).collect::<Result<_>>()?;
    let mut prefactor = 1.0;
    for &r in &rates[..k - 1] {
        prefactor *= r;
    }
    let mut weights = Vec::with_capacity(k);
    for m in 0..k {
        let mut denom = 1.0;
        for l in 0..k {
            if l != m {
                let diff = rates[l] - rates[m];
                if diff == 0.0 {
                    return Err(Error::DegenerateRates(format!(
                        "lambda_{} - lambda_{} underflowed to zero",
                        l + 1,
                        m + 1
                    )));
                }
                denom *= diff;
            }
        }
        weights.push(1.0 / denom);
    }
    Ok(PartialFractionCoeffs {
        k,
        prefactor,
        weights,
    })
}

/// `Pr{N_nu(t) = k}` for a general validated schedule, single progenitor.
pub fn pmf_general(schedule: &ValidatedSchedule, nu: f64, t: f64, k: usize) -> Result<f64> {
    check_nu_t(nu, t)?;
    if k == 0 {
        return Err(Error::Domain("states are one-based".into()));
    }
    if t == 0.0 {
        return Ok(if k == 1 { 1.0 } else { 0.0 });
    }
    let cfg = term_cfg();
    if k == 1 {
        let lambda1 = schedule.rate_at(1)?;
        let (e, _) = ml_term(nu, -lambda1 * t.powf(nu), &cfg)?;
        return clamp_probability(e, "pmf_general k=1");
    }
    let pf = partial_fraction_coeffs(schedule, k)?;
    let tn = t.powf(nu);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (m, &w) in pf.weights.iter().enumerate() {
        let lam = schedule.rate_at(m + 1)?;
        let (e, _) = ml_term(nu, -lam * tn, &cfg)?;
        let term = w * e;
        let y = term - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    clamp_probability(pf.prefactor * sum, "pmf_general")
}

/// `Pr{N_nu(t) = k}` for the linear (Yule–Furry) family, one progenitor.
pub fn pmf_linear(lambda: f64, nu: f64, t: f64, k: usize) -> Result<f64> {
    pmf_linear_n0(lambda, nu, t, 1, k)
}

/// Linear-family PMF started from `n0` progenitors, `k >= n0`.
pub fn pmf_linear_n0(lambda: f64, nu: f64, t: f64, n0: usize, k: usize) -> Result<f64> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    if n0 == 0 {
        return Err(Error::Domain("n0 must be >= 1".into()));
    }
    if k < n0 {
        return Err(Error::Domain(format!("k = {k} below initial size {n0}")));
    }
    if t == 0.0 {
        return Ok(if k == n0 { 1.0 } else { 0.0 });
    }
    if nu == 1.0 {
        // Exact classical reduction: negative-binomial form.
        let q = -(-lambda * t).exp_m1();
        let ln_p =
            ln_binomial(k - 1, k - n0) - lambda * t * n0 as f64 + (k - n0) as f64 * q.ln();
        return clamp_probability(ln_p.exp(), "pmf_linear nu=1");
    }
    if k <= 512 {
        if let Some(p) = linear_alternating_sum(lambda, nu, t, n0, k)? {
            return clamp_probability(p, "pmf_linear alternating");
        }
    }
    let p = linear_mixture_single(lambda, nu, t, n0, k)?;
    clamp_probability(p, "pmf_linear mixture")
}

/// Alternating Mittag–Leffler sum with compensated summation. Returns
/// `Ok(None)` when the tracked condition number says the digits are gone.
fn linear_alternating_sum(
    lambda: f64,
    nu: f64,
    t: f64,
    n0: usize,
    k: usize,
) -> Result<Option<f64>> {
    let cfg = term_cfg();
    let tn = t.powf(nu);
    let d = k - n0;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut abs_sum = 0.0;
    let mut err_amp = 0.0;
    let mut binom = 1.0f64; // C(d, r)
    for r in 0..=d {
        let (e, err) = ml_term(nu, -((n0 + r) as f64) * lambda * tn, &cfg)?;
        let term = if r % 2 == 0 { binom * e } else { -binom * e };
        let y = term - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        abs_sum += binom * e;
        err_amp += binom * err;
        binom *= (d - r) as f64 / (r + 1) as f64;
    }
    let front = ln_binomial(k - 1, d).exp();
    let value = front * sum;
    let cond = front * abs_sum / value.abs().max(f64::MIN_POSITIVE);
    let rounding = f64::EPSILON * front * abs_sum * 4.0;
    if cond > CONDITION_LIMIT || rounding > 1e-12 || front * err_amp > SUM_ERR_BUDGET {
        return Ok(None);
    }
    Ok(Some(value))
}

/// Subordination mixture for one state: positive integrand, no
/// cancellation at any `k`.
fn linear_mixture_single(lambda: f64, nu: f64, t: f64, n0: usize, k: usize) -> Result<f64> {
    let law = RandomTimeLaw::new(nu, t)?;
    let ln_front = ln_binomial(k - 1, k - n0);
    let d = (k - n0) as f64;
    let n0f = n0 as f64;
    law.integrate_against(
        |s| {
            let q = -(-lambda * s).exp_m1();
            if q <= 0.0 {
                return 0.0;
            }
            let ln_val = ln_front - lambda * s * n0f + d * q.ln();
            if ln_val < -745.0 {
                0.0
            } else {
                ln_val.exp()
            }
        },
        1e-12,
    )
}

/// All of `p_{n0}, ..., p_{k_max}` at once, reusing one set of
/// Mittag–Leffler values; states whose alternating sum breaks down are
/// recomputed through the mixture.
pub fn pmf_linear_prefix(
    lambda: f64,
    nu: f64,
    t: f64,
    n0: usize,
    k_max: usize,
) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    if n0 == 0 || k_max < n0 {
        return Err(Error::Domain("need n0 >= 1 and k_max >= n0".into()));
    }
    if t == 0.0 {
        let mut v = vec![0.0; k_max - n0 + 1];
        v[0] = 1.0;
        return Ok(v);
    }
    if nu == 1.0 {
        return (n0..=k_max)
            .map(|k| pmf_linear_n0(lambda, nu, t, n0, k))
            .collect();
    }
    let cfg = term_cfg();
    let tn = t.powf(nu);
    let d_max = k_max - n0;
    let ml: Vec<(f64, f64)> = (0..=d_max)
        .map(|r| ml_term(nu, -((n0 + r) as f64) * lambda * tn, &cfg))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(d_max + 1);
    for k in n0..=k_max {
        let d = k - n0;
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut abs_sum = 0.0;
        let mut err_amp = 0.0;
        let mut binom = 1.0f64;
        for (r, &(e, err)) in ml.iter().take(d + 1).enumerate() {
            let term = if r % 2 == 0 { binom * e } else { -binom * e };
            let y = term - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            abs_sum += binom * e;
            err_amp += binom * err;
            binom *= (d - r) as f64 / (r + 1) as f64;
        }
        let front = ln_binomial(k - 1, d).exp();
        let value = front * sum;
        let rounding = f64::EPSILON * front * abs_sum * 4.0;
        if rounding > 1e-12
            || front * err_amp > SUM_ERR_BUDGET
            || !(-CLAMP_BAND..=1.0 + CLAMP_BAND).contains(&value)
        {
            out.push(clamp_probability(
                linear_mixture_single(lambda, nu, t, n0, k)?,
                "pmf_linear_prefix mixture",
            )?);
        } else {
            out.push(value.clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// Power-series form of the linear PMF:
///
/// `(lambda t^nu)^{k-1} (k-1)! / Gamma(nu(k-1)+1) + sum_{m >= k}
///  (-lambda t^nu)^m / Gamma(nu m + 1) * sum_j C(k-1, j) (-1)^j (j+1)^m`.
///
/// Valid while `lambda t^nu` is small enough for the outer series to
/// converge within budget; the cross-check against [`pmf_linear`] is the
/// point of keeping it.
pub fn pmf_linear_alt(lambda: f64, nu: f64, t: f64, k: usize) -> Result<f64> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    if k == 0 {
        return Err(Error::Domain("states are one-based".into()));
    }
    if t == 0.0 {
        return Ok(if k == 1 { 1.0 } else { 0.0 });
    }
    let x = lambda * t.powf(nu);
    let ln_x = x.ln();
    let lead = ((k - 1) as f64 * ln_x + ln_gamma(k as f64)).exp()
        * recip_gamma(nu * (k - 1) as f64 + 1.0);
    let binom = binomial_row(k - 1);
    let mut sum = 0.0;
    let mut abs_sum = lead.abs();
    let mut converged = false;
    let mut small_streak = 0u32;
    for m in k..(k + 900) {
        // S(k, m) = sum_j C(k-1, j) (-1)^j (j+1)^m
        let mut s_km = 0.0;
        for (j, &b) in binom.iter().enumerate() {
            let v = b * ((j + 1) as f64).powi(m as i32);
            s_km += if j % 2 == 0 { v } else { -v };
        }
        let ln_mag = m as f64 * ln_x;
        if ln_mag > 640.0 || s_km.abs() > 1e280 {
            return Err(Error::NonConvergence(
                "alternative series left its practical domain".into(),
            ));
        }
        let term = ln_mag.exp()
            * recip_gamma(nu * m as f64 + 1.0)
            * s_km
            * if m % 2 == 0 { 1.0 } else { -1.0 };
        sum += term;
        abs_sum += term.abs();
        if term.abs() < 1e-14 {
            small_streak += 1;
            if small_streak >= 3 {
                converged = true;
                break;
            }
        } else {
            small_streak = 0;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(
            "alternative series needs more than 900 terms".into(),
        ));
    }
    let value = lead + sum;
    if f64::EPSILON * abs_sum * 4.0 > 1e-9 {
        return Err(Error::NonConvergence(
            "alternative series cancelled past its accuracy budget".into(),
        ));
    }
    clamp_probability(value, "pmf_linear_alt")
}

/// Mean population size `E N_nu(t) = E_{nu,1}(lambda t^nu)`.
pub fn mean_linear(lambda: f64, nu: f64, t: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    mittag_leffler(nu, lambda * t.powf(nu), &ml_cfg())
}

/// Variance `2 E_{nu,1}(2 lambda t^nu) - E_{nu,1}(lambda t^nu) -
/// E_{nu,1}(lambda t^nu)^2`.
pub fn variance_linear(lambda: f64, nu: f64, t: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    let cfg = ml_cfg();
    let tn = t.powf(nu);
    let e1 = mittag_leffler(nu, lambda * tn, &cfg)?;
    let e2 = mittag_leffler(nu, 2.0 * lambda * tn, &cfg)?;
    let v = 2.0 * e2 - e1 - e1 * e1;
    if v < -1e-8 {
        return Err(Error::NumericalBreakdown(format!(
            "variance {v} negative beyond the cancellation band"
        )));
    }
    Ok(v.max(0.0))
}

/// Second factorial moment `E N(N-1) = 2 E_{nu,1}(2 lambda t^nu) -
/// 2 E_{nu,1}(lambda t^nu)`.
pub fn second_factorial_moment_linear(lambda: f64, nu: f64, t: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    let cfg = ml_cfg();
    let tn = t.powf(nu);
    let e1 = mittag_leffler(nu, lambda * tn, &cfg)?;
    let e2 = mittag_leffler(nu, 2.0 * lambda * tn, &cfg)?;
    let v = 2.0 * e2 - 2.0 * e1;
    if v < -1e-8 {
        return Err(Error::NumericalBreakdown(format!(
            "second factorial moment {v} negative beyond the cancellation band"
        )));
    }
    Ok(v.max(0.0))
}

/// First-offspring probability over a short window `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementProbability {
    /// `n0 [E_{nu,1}(-n0 lambda dt^nu) - E_{nu,1}(-(n0+1) lambda dt^nu)]`.
    pub exact: f64,
    /// Leading order `lambda n0 dt^nu / Gamma(nu + 1)`.
    pub asymptotic: f64,
}

pub fn increment_probability(
    lambda: f64,
    nu: f64,
    n0: usize,
    dt: f64,
) -> Result<IncrementProbability> {
    check_lambda(lambda)?;
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!("nu must lie in (0, 1], got {nu}")));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain("dt must be positive".into()));
    }
    if n0 == 0 {
        return Err(Error::Domain("n0 must be >= 1".into()));
    }
    let cfg = ml_cfg();
    let dtn = dt.powf(nu);
    let n0f = n0 as f64;
    let a = mittag_leffler(nu, -n0f * lambda * dtn, &cfg)?;
    let b = mittag_leffler(nu, -(n0f + 1.0) * lambda * dtn, &cfg)?;
    Ok(IncrementProbability {
        exact: n0f * (a - b),
        asymptotic: lambda * n0f * dtn * recip_gamma(nu + 1.0),
    })
}

/// Which extreme of the i.i.d. sample indexed by `N_nu(t)` is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeMode {
    /// `Pr{max(X_1..X_N) < x}` given `F = Pr{X < x}`.
    Max,
    /// `Pr{min(X_1..X_N) > x}` given `F = Pr{X < x}`.
    Min,
}

/// Law of the extreme of `N_nu(t)` i.i.d. variables with CDF value `F`,
/// mixed over the random time:
/// `int F e^{-lambda s} / (1 - F (1 - e^{-lambda s})) dP_T(s)` for the
/// maximum, with `F -> 1 - F` for the minimum's survival function.
pub fn extreme_cdf(
    f_value: f64,
    lambda: f64,
    nu: f64,
    t: f64,
    mode: ExtremeMode,
    law: &RandomTimeLaw,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    if !(0.0..=1.0).contains(&f_value) {
        return Err(Error::Domain(format!("F must lie in [0, 1], got {f_value}")));
    }
    if law.nu() != nu || law.t() != t {
        return Err(Error::Domain(
            "random-time law configured for different (nu, t)".into(),
        ));
    }
    let g = match mode {
        ExtremeMode::Max => f_value,
        ExtremeMode::Min => 1.0 - f_value,
    };
    if g == 0.0 {
        return Ok(0.0);
    }
    if g == 1.0 {
        return Ok(1.0);
    }
    let v = law.integrate_against(
        |s| {
            let es = (-lambda * s).exp();
            // 1 - g (1 - es) written as (1 - g) + g es: exact as g -> 1.
            g * es / ((1.0 - g) + g * es)
        },
        1e-7,
    )?;
    clamp_probability(v, "extreme_cdf")
}

/// Truncation policy for [`PmfTable`] construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TablePolicy {
    /// Stop once running mass reaches `1 - tail_tol`.
    pub tail_tol: f64,
    /// Hard cap on the number of stored states.
    pub k_max_hard: usize,
}

impl Default for TablePolicy {
    fn default() -> Self {
        Self {
            tail_tol: 1e-6,
            k_max_hard: 10_000,
        }
    }
}

/// Truncated PMF with its diagnostics. `probs[i]` is the probability of
/// state `n0 + i`; every entry is clamped to [0, 1] after a roundoff-band
/// check, and `sum(probs) + tail_mass = 1` holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    pub nu: f64,
    pub t: f64,
    pub n0: usize,
    probs: Vec<f64>,
    pub tail_mass: f64,
    pub k_cut: usize,
    /// Estimated `sum_{k > k_cut} k p_k` (diagnostic; exact per node for
    /// the single-progenitor constructions, zero at t = 0).
    pub tail_mean: f64,
}

impl PmfTable {
    pub fn prob(&self, k: usize) -> f64 {
        if k < self.n0 || k > self.k_cut {
            0.0
        } else {
            self.probs[k - self.n0]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.n0 + i, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Compensated sum of the stored probabilities.
    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.probs.iter().copied())
    }

    /// `sum k p_k` over the stored range.
    pub fn mean(&self) -> f64 {
        kahan_sum(self.iter().map(|(k, p)| k as f64 * p))
    }

    /// `sum k p_k` including the estimated contribution beyond `k_cut`.
    pub fn mean_with_tail(&self) -> f64 {
        self.mean() + self.tail_mean
    }

    fn from_probs(nu: f64, t: f64, n0: usize, probs: Vec<f64>, tail_mean: f64) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !(-CLAMP_BAND..=1.0 + CLAMP_BAND).contains(&p) {
                return Err(Error::NumericalBreakdown(format!(
                    "table entry k={} value {p} outside the roundoff band",
                    n0 + i
                )));
            }
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        let mass = kahan_sum(probs.iter().copied());
        let k_cut = n0 + probs.len() - 1;
        Ok(PmfTable {
            nu,
            t,
            n0,
            probs,
            tail_mass: 1.0 - mass,
            k_cut,
            tail_mean,
        })
    }
}

fn kahan_sum<I: Iterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in it {
        let y = v - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Build the linear-family table under `policy`.
///
/// `nu = 1` uses the negative-binomial recursion; fractional orders use
/// the subordination mixture on one shared Kronrod grid. Cost is
/// O(active nodes) per state, which keeps even million-state tables
/// (small `nu`, long horizons) tractable.
pub fn pmf_table_linear(
    lambda: f64,
    nu: f64,
    t: f64,
    n0: usize,
    policy: TablePolicy,
) -> Result<PmfTable> {
    check_lambda(lambda)?;
    check_nu_t(nu, t)?;
    if n0 == 0 {
        return Err(Error::Domain("n0 must be >= 1".into()));
    }
    if !(policy.tail_tol > 0.0 && policy.tail_tol < 1.0) {
        return Err(Error::Domain("tail_tol must lie in (0, 1)".into()));
    }
    if policy.k_max_hard == 0 {
        return Err(Error::Domain("k_max_hard must be >= 1".into()));
    }
    if t == 0.0 {
        return PmfTable::from_probs(nu, t, n0, vec![1.0], 0.0);
    }
    if nu == 1.0 {
        return table_linear_classical(lambda, t, n0, policy);
    }

    let law = RandomTimeLaw::new(nu, t)?;
    // The grid tail must sit far below tail_tol or the mass target can
    // never be certified.
    let eps_cut = (policy.tail_tol * 1e-4).max(1e-14);
    let s_max = law.tail_cutoff(eps_cut);
    let panels = ((s_max / 0.22).ceil() as usize).clamp(48, 640);
    let (xs, ws) = quad::panel_nodes(0.0, s_max, panels);
    let density: Vec<f64> = xs
        .iter()
        .map(|&s| law.density(s))
        .collect::<Result<Vec<f64>>>()?;

    // Per-node pieces of C(k-1, k-n0) e^{-lambda s n0} q^{k-n0} f(s) ds.
    let n = xs.len();
    let mut coef = vec![0.0f64; n];
    let mut q = vec![0.0f64; n];
    for i in 0..n {
        let e = (-lambda * xs[i]).exp();
        q[i] = -(-lambda * xs[i]).exp_m1();
        coef[i] = ws[i] * density[i] * e.powi(n0 as i32);
    }

    let mut probs = Vec::with_capacity(1024);
    let mut pow = vec![1.0f64; n]; // q_i^{k - n0}
    let mut binom = 1.0f64; // C(k-1, k-n0)
    let mut mass = 0.0f64;
    let mut mass_comp = 0.0f64;
    let mut lo = 0usize; // nodes below lo have irrecoverably dead powers
    let target = 1.0 - policy.tail_tol;
    let mut k = n0;
    loop {
        let mut p = 0.0;
        for i in lo..n {
            p += coef[i] * pow[i];
        }
        let p = binom * p;
        probs.push(p);
        let y = p - mass_comp;
        let s = mass + y;
        mass_comp = (s - mass) - y;
        mass = s;
        if mass >= target {
            break;
        }
        if probs.len() >= policy.k_max_hard {
            return Err(Error::TruncationFailure { k_cut: k, mass });
        }
        // Advance to k + 1.
        let d = (k - n0) as f64;
        binom *= k as f64 / (d + 1.0);
        for i in lo..n {
            pow[i] *= q[i];
        }
        while lo < n && pow[lo] < 1e-280 {
            lo += 1;
        }
        k += 1;
    }

    // Tail mean diagnostic: exact per node for n0 = 1, scaled estimate
    // otherwise.
    let k_cut = k;
    let tail_mean = if n0 == 1 {
        let kk = k_cut as f64;
        let mut s = 0.0;
        for i in 0..n {
            let e = 1.0 - q[i];
            if e <= 0.0 {
                continue;
            }
            let qk = pow_int(q[i], k_cut);
            s += ws[i] * density[i] * qk * ((kk + 1.0) * e + q[i]) / e;
        }
        s
    } else {
        (1.0 - mass).max(0.0) * (k_cut + 1) as f64
    };

    PmfTable::from_probs(nu, t, n0, probs, tail_mean)
}

fn pow_int(base: f64, mut n: usize) -> f64 {
    let mut b = base;
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= b;
        }
        b *= b;
        n >>= 1;
        if acc == 0.0 {
            return 0.0;
        }
    }
    acc
}

fn table_linear_classical(lambda: f64, t: f64, n0: usize, policy: TablePolicy) -> Result<PmfTable> {
    let q = -(-lambda * t).exp_m1();
    let e = 1.0 - q;
    let mut probs = Vec::new();
    let mut p = pow_int(e, n0); // p_{n0}
    let mut mass = 0.0;
    let target = 1.0 - policy.tail_tol;
    let mut k = n0;
    loop {
        probs.push(p);
        mass += p;
        if mass >= target {
            break;
        }
        if probs.len() >= policy.k_max_hard {
            return Err(Error::TruncationFailure { k_cut: k, mass });
        }
        p *= q * k as f64 / (k + 1 - n0) as f64;
        k += 1;
    }
    let k_cut = k;
    let tail_mean = if n0 == 1 {
        let kk = k_cut as f64;
        pow_int(q, k_cut) * ((kk + 1.0) * e + q) / e
    } else {
        (1.0 - mass).max(0.0) * (k_cut + 1) as f64
    };
    PmfTable::from_probs(1.0, t, n0, probs, tail_mean)
}

/// Build the table for a general validated schedule (single progenitor)
/// by per-state partial fractions. The reachable range is bounded by the
/// validated prefix.
pub fn pmf_table_general(
    schedule: &ValidatedSchedule,
    nu: f64,
    t: f64,
    policy: TablePolicy,
) -> Result<PmfTable> {
    check_nu_t(nu, t)?;
    if t == 0.0 {
        return PmfTable::from_probs(nu, t, 1, vec![1.0], 0.0);
    }
    if let RateSchedule::Linear { lambda } = schedule.schedule() {
        return pmf_table_linear(*lambda, nu, t, 1, policy);
    }
    let k_reach = schedule.k_max().min(policy.k_max_hard);
    let mut probs = Vec::new();
    let mut mass = 0.0;
    let target = 1.0 - policy.tail_tol;
    for k in 1..=k_reach {
        let p = pmf_general(schedule, nu, t, k)?;
        probs.push(p);
        mass += p;
        if mass >= target {
            break;
        }
    }
    if mass < target {
        return Err(Error::TruncationFailure {
            k_cut: probs.len(),
            mass,
        });
    }
    let tail_mean = (1.0 - mass).max(0.0) * (probs.len() + 1) as f64;
    PmfTable::from_probs(nu, t, 1, probs, tail_mean)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

fn check_nu_t(nu: f64, t: f64) -> Result<()> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!("nu must lie in (0, 1], got {nu}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    Ok(())
}

/// `ln C(n, j)` via log-gamma.
pub(crate) fn ln_binomial(n: usize, j: usize) -> f64 {
    debug_assert!(j <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0)
}

/// Row `C(n, 0), ..., C(n, n)` by the multiplicative recurrence.
pub(crate) fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = 1.0f64;
    for j in 0..=n {
        row.push(c);
        c *= (n - j) as f64 / (j + 1) as f64;
    }
    row
}
