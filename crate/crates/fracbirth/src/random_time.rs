//! The random-time law `T_{2 nu}(t)`: the folded solution of the
//! fractional diffusion equation, i.e. the inverse `nu`-stable
//! subordinator at time `t`.
//!
//! Its defining property is the Laplace pair
//! `E exp(-mu T_{2 nu}(t)) = E_{nu,1}(-mu t^nu)`, which fixes every
//! normalization constant below and is asserted by the tests.
//!
//! Representations dispatched by structure:
//!
//! - `nu = 1`: point mass at `t` (no density);
//! - `nu = 1/2`: folded Gaussian `exp(-s^2/(4t)) / sqrt(pi t)`;
//! - `nu = 1/2^n`, `n in {2, 3}`: folded `(n-1)`-times iterated Brownian
//!   motion, evaluated by nested quadrature;
//! - `nu = 1/3`: Airy density `3 (3t)^{-1/3} Ai(s (3t)^{-1/3})`;
//! - otherwise: M-Wright series `t^{-nu} sum_m (-s t^{-nu})^m /
//!   (m! Gamma(1 - nu(m+1)))`, with an integral fallback through the
//!   one-sided stable density where the series cancels catastrophically.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{self, recip_gamma};
use rand::Rng;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Structural representation serving a given order `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// `nu = 1`: degenerate point mass at `t`.
    Classical,
    /// `nu = 1/2^n`: folded `(n-1)`-times iterated Brownian motion.
    HalfPower { n: u32 },
    /// `nu = 1/3`: Airy density.
    OneThird,
    /// Any other `nu` in (0, 1): M-Wright series density.
    GeneralSeries,
}

impl Structure {
    /// Human-readable tag reported by the CLI.
    pub fn label(&self) -> String {
        match self {
            Structure::Classical => "point-mass".into(),
            Structure::HalfPower { n: 1 } => "folded-gaussian".into(),
            Structure::HalfPower { n } => format!("iterated-bm n={n}"),
            Structure::OneThird => "airy".into(),
            Structure::GeneralSeries => "mwright-series".into(),
        }
    }
}

/// Nested-quadrature depth beyond which the series density is both
/// faster and more accurate than iterating Gaussian convolutions.
const MAX_ITERATED_DEPTH: u32 = 3;

/// The law of `T_{2 nu}(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTimeLaw {
    nu: f64,
    t: f64,
    structure: Structure,
}

impl RandomTimeLaw {
    pub fn new(nu: f64, t: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Domain(format!("nu must lie in (0, 1], got {nu}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("t must be positive, got {t}")));
        }
        let structure = classify(nu);
        Ok(Self { nu, t, structure })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    /// Density of `T_{2 nu}(t)` at `s > 0`.
    ///
    /// Errors with [`Error::PointMass`] at `nu = 1`, where no density
    /// exists.
    pub fn density(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("s must be positive, got {s}")));
        }
        match self.structure {
            Structure::Classical => Err(Error::PointMass),
            Structure::HalfPower { n: 1 } => Ok(folded_gaussian(s, self.t)),
            Structure::HalfPower { n } => density_iterated_bm(n, s, self.t),
            Structure::OneThird => {
                let c = (3.0 * self.t).cbrt();
                Ok(3.0 / c * special::airy_ai(s / c)?)
            }
            Structure::GeneralSeries => general_density(self.nu, s, self.t),
        }
    }

    /// One draw of `T_{2 nu}(t)`.
    ///
    /// For `nu < 1` the inverse-stable representation `(t / S)^nu` is
    /// exact, with `S` a standard positive `nu`-stable variable; `nu = 1`
    /// returns `t` itself.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if self.nu == 1.0 {
            return Ok(self.t);
        }
        let s = special::stable_positive_sample(self.nu, rng)?;
        Ok((self.t / s).powf(self.nu))
    }

    /// Upper point `s_max` with `Pr{T > s_max} <= eps`, from the
    /// stretched-exponential tail of the inverse stable law.
    pub fn tail_cutoff(&self, eps: f64) -> f64 {
        debug_assert!(eps > 0.0 && eps < 1.0);
        if self.nu == 1.0 {
            return self.t;
        }
        let nu = self.nu;
        let c = (1.0 - nu) * nu.powf(nu / (1.0 - nu));
        let budget = (1.0 / eps).ln() / c;
        1.3 * self.t.powf(nu) * budget.powf(1.0 - nu) + self.t.powf(nu)
    }

    /// `int_0^inf f(s) dP_{T}(s)` by adaptive quadrature against the
    /// density; collapses to `f(t)` for the classical point mass.
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        if self.structure == Structure::Classical {
            return Ok(f(self.t));
        }
        let s_max = self.tail_cutoff(1e-9 * tol.min(1.0));
        let pts = split_points(s_max);
        let r = quad::adaptive_split(
            |s| f(s) * self.density(s).unwrap_or(0.0),
            &pts,
            tol,
            1e-12,
            600_000,
        )?;
        Ok(r.value)
    }

    /// Laplace functional `E exp(-mu T)`; equals `E_{nu,1}(-mu t^nu)`.
    pub fn laplace(&self, mu: f64, tol: f64) -> Result<f64> {
        self.integrate_against(|s| (-mu * s).exp(), tol)
    }
}

fn classify(nu: f64) -> Structure {
    if nu == 1.0 {
        return Structure::Classical;
    }
    // Exact binary matches for 1/2^n; these are representable floats.
    let mut half = 0.5;
    for n in 1..=MAX_ITERATED_DEPTH {
        if nu == half {
            return Structure::HalfPower { n };
        }
        half *= 0.5;
    }
    if (nu - 1.0 / 3.0).abs() < 1e-12 {
        return Structure::OneThird;
    }
    Structure::GeneralSeries
}

/// Density of the folded Brownian motion with volatility 2:
/// `exp(-s^2/(4t)) / sqrt(pi t)`.
fn folded_gaussian(s: f64, t: f64) -> f64 {
    (-s * s / (4.0 * t)).exp() / (PI * t).sqrt()
}

/// Density of the folded `(n-1)`-times iterated Brownian motion at `s`,
/// by one adaptive quadrature per composition level:
///
/// `f_n(s, t) = int_0^inf exp(-s^2/(4 w)) / sqrt(pi w) * f_{n-1}(w, t) dw`.
pub fn density_iterated_bm(n: u32, s: f64, t: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "iterated representation needs n >= 2, got {n}"
        )));
    }
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::Domain("s and t must be positive".into()));
    }
    iterated_level(n, s, t, 1e-8)
}

fn iterated_level(n: u32, s: f64, t: f64, tol: f64) -> Result<f64> {
    if n == 1 {
        return Ok(folded_gaussian(s, t));
    }
    // Kernel in w peaks at w* = s^2/2; the inner law bounds the range.
    let inner_nu = 0.5f64.powi(n as i32 - 1);
    let inner_law = RandomTimeLaw {
        nu: inner_nu,
        t,
        structure: Structure::GeneralSeries,
    };
    let w_star = (s * s / 2.0).max(1e-6);
    let w_max = inner_law.tail_cutoff(1e-14).max(8.0 * w_star);
    let mut pts = vec![
        0.0,
        w_star * 0.05,
        w_star * 0.25,
        w_star,
        4.0 * w_star,
        w_max,
    ];
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| *a <= *b);
    let f = |w: f64| {
        let kernel = (-s * s / (4.0 * w)).exp() / (PI * w).sqrt();
        if kernel == 0.0 {
            return 0.0;
        }
        kernel * iterated_level(n - 1, w, t, tol * 4.0).unwrap_or(0.0)
    };
    let r = quad::adaptive_split(f, &pts, tol, 1e-10, 400_000)?;
    Ok(r.value)
}

/// General-`nu` density `t^{-nu} M_nu(s t^{-nu})` via the M-Wright series,
/// falling back to the positive Zolotarev integral when the alternating
/// series cannot deliver relative accuracy.
fn general_density(nu: f64, s: f64, t: f64) -> Result<f64> {
    let z = s * t.powf(-nu);
    let scale = t.powf(-nu);
    if let Some(m) = mwright_series(nu, z) {
        return Ok(scale * m);
    }
    zolotarev_density(nu, s, t)
}

/// M-Wright function `M_nu(z) = sum_m (-z)^m / (m! Gamma(1 - nu(m+1)))`.
///
/// Returns `None` when accumulated rounding exceeds the relative-accuracy
/// budget, signalling the caller to switch representation.
fn mwright_series(nu: f64, z: f64) -> Option<f64> {
    debug_assert!(z >= 0.0);
    if z == 0.0 {
        return Some(recip_gamma(1.0 - nu));
    }
    let ln_z = z.ln();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs_sum = 0.0f64;
    let mut prev_nonzero = f64::INFINITY;
    let mut small_streak = 0u32;
    let mut converged = false;
    for m in 0..400usize {
        let rg = recip_gamma(1.0 - nu * (m as f64 + 1.0));
        let ln_mag = m as f64 * ln_z - ln_gamma(m as f64 + 1.0);
        if ln_mag > 700.0 {
            return None;
        }
        let term = ln_mag.exp() * rg;
        let t_abs = term.abs();
        let signed = if m % 2 == 0 { term } else { -term };
        let y = signed - comp;
        let snew = sum + y;
        comp = (snew - sum) - y;
        sum = snew;
        abs_sum += t_abs;
        // Gamma poles zero out individual terms (e.g. every other one at
        // nu = 1/2), so convergence needs a short streak of vanishing or
        // decreasing-below-threshold magnitudes, not a single small term.
        let threshold = 1e-16 * abs_sum.max(1e-300);
        let is_small = t_abs == 0.0 || (t_abs < prev_nonzero && t_abs < threshold);
        if is_small {
            small_streak += 1;
            if small_streak >= 3 {
                converged = true;
                break;
            }
        } else {
            small_streak = 0;
        }
        if t_abs > 0.0 {
            prev_nonzero = t_abs;
        }
    }
    if !converged {
        return None;
    }
    let err = 4.0 * f64::EPSILON * abs_sum;
    // Densities must come out with honest relative accuracy; give up on
    // the series once cancellation eats past ~1e-9 of the value.
    if sum <= 0.0 || err > 1e-9 * sum {
        return None;
    }
    Some(sum)
}

/// Zolotarev integral route: `T = (t/S)^nu` with `S` one-sided stable
/// transforms the stable density, itself the positive integral
///
/// `g_nu(x) = nu/(1-nu) x^{-1/(1-nu)-nu/(1-nu)...}` — in the collapsed
/// form used here
///
/// `f_T(s, t) = rho / ((1-nu) pi s) int_0^pi Z(phi) exp(-Z(phi) rho) dphi`
///
/// with `rho = s^{1/(1-nu)} t^{-nu/(1-nu)}` and the Kanter function
/// `Z(phi) = sin(nu phi)^{nu/(1-nu)} sin((1-nu) phi) / sin(phi)^{1/(1-nu)}`.
/// Every factor is positive, so the route is cancellation-free.
fn zolotarev_density(nu: f64, s: f64, t: f64) -> Result<f64> {
    let rho = s.powf(1.0 / (1.0 - nu)) * t.powf(-nu / (1.0 - nu));
    if rho == 0.0 || !rho.is_finite() {
        return Err(Error::Domain(format!(
            "rho degenerate at nu={nu}, s={s}, t={t}"
        )));
    }
    let ln_rho = rho.ln();
    let integrand = move |phi: f64| {
        let ln_z = (nu * (nu * phi).sin().ln() - phi.sin().ln()) / (1.0 - nu)
            + ((1.0 - nu) * phi).sin().ln();
        if ln_z + ln_rho > 690.0 {
            return 0.0; // exp(-Z rho) underflows regardless of Z
        }
        let z = ln_z.exp();
        let zr = z * rho;
        if zr > 700.0 {
            0.0
        } else {
            z * (-zr).exp()
        }
    };
    // Boundary layer accumulates at phi -> pi where Z blows up.
    let mut pts = vec![0.0, PI * 0.25, PI * 0.5, PI * 0.75];
    let mut off = 0.1 * PI;
    while off > 1e-12 {
        pts.push(PI - off);
        off *= 0.1;
    }
    pts.push(PI);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| *a <= *b);
    let r = quad::adaptive_split(integrand, &pts, 1e-300, 1e-11, 600_000)?;
    Ok(rho / ((1.0 - nu) * PI * s) * r.value)
}

fn split_points(s_max: f64) -> Vec<f64> {
    // Geometric near zero (densities can peak there), linear after.
    let mut pts = vec![0.0, s_max * 1e-4, s_max * 1e-3, s_max * 0.01];
    let mut x = s_max * 0.05;
    while x < s_max {
        pts.push(x);
        x += s_max * 0.05;
    }
    pts.push(s_max);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| *a <= *b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{mittag_leffler, MlEvalConfig};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use statrs::function::erf::erf;

    #[test]
    fn classify_dispatch() {
        assert_eq!(classify(1.0), Structure::Classical);
        assert_eq!(classify(0.5), Structure::HalfPower { n: 1 });
        assert_eq!(classify(0.25), Structure::HalfPower { n: 2 });
        assert_eq!(classify(0.125), Structure::HalfPower { n: 3 });
        assert_eq!(classify(1.0 / 3.0), Structure::OneThird);
        assert_eq!(classify(0.7), Structure::GeneralSeries);
        assert_eq!(classify(0.0625), Structure::GeneralSeries);
    }

    #[test]
    fn half_density_at_origin() {
        let law = RandomTimeLaw::new(0.5, 1.0).unwrap();
        let v = law.density(1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0 / PI.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(v, 0.564190, epsilon = 1e-6);
    }

    #[test]
    fn half_density_normalizes() {
        let law = RandomTimeLaw::new(0.5, 1.0).unwrap();
        let total = law.integrate_against(|_| 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn classical_density_refused() {
        let law = RandomTimeLaw::new(1.0, 2.0).unwrap();
        assert!(matches!(law.density(1.0), Err(Error::PointMass)));
    }

    #[test]
    fn classical_sample_is_t() {
        let law = RandomTimeLaw::new(1.0, 3.7).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        assert_eq!(law.sample(&mut rng).unwrap(), 3.7);
    }

    #[test]
    fn airy_density_vs_series_band() {
        // Dual representation: Airy closed form against the M-Wright
        // series for nu = 1/3 on s in [0.1, 3].
        let t = 1.0;
        let law = RandomTimeLaw::new(1.0 / 3.0, t).unwrap();
        assert_eq!(law.structure(), Structure::OneThird);
        for i in 1..=30 {
            let s = 0.1 * i as f64;
            let airy = law.density(s).unwrap();
            let series = general_density(1.0 / 3.0, s, t).unwrap();
            assert_abs_diff_eq!(airy, series, epsilon = 1e-5);
        }
    }

    #[test]
    fn iterated_bm_matches_series_quarter() {
        // n = 2 nested integral against the series at nu = 1/4, s = t = 1.
        let nested = density_iterated_bm(2, 1.0, 1.0).unwrap();
        let series = general_density(0.25, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(nested, series, epsilon = 1e-5);
    }

    #[test]
    fn iterated_bm_normalizes() {
        let law = RandomTimeLaw::new(0.25, 1.0).unwrap();
        let total = law.integrate_against(|_| 1.0, 1e-7).unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn iterated_bm_tail_monotone_beyond_mode() {
        let mut prev = f64::INFINITY;
        for i in 4..=20 {
            let s = 0.5 * i as f64;
            let v = density_iterated_bm(2, s, 1.0).unwrap();
            assert!(v >= 0.0);
            assert!(v <= prev + 1e-12, "density rose at s={s}");
            prev = v;
        }
    }

    #[test]
    fn iterated_bm_requires_depth_two() {
        assert!(density_iterated_bm(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn zolotarev_matches_folded_gaussian_at_half() {
        for s in [0.3, 1.0, 2.5, 5.0] {
            let z = zolotarev_density(0.5, s, 1.0).unwrap();
            assert_abs_diff_eq!(z, folded_gaussian(s, 1.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn zolotarev_matches_series_band() {
        // Band chosen so the series path is self-admissibly accurate;
        // at nu = 0.9 the density collapses past z ~ 1.5 and the series
        // rightly refuses there.
        let cases: [(f64, &[f64]); 4] = [
            (0.3, &[0.25, 0.5, 1.0, 2.0, 4.0]),
            (0.6, &[0.25, 0.5, 1.0, 2.0]),
            (0.7, &[0.25, 0.5, 1.0, 2.0]),
            (0.9, &[0.25, 0.5, 1.0, 1.3]),
        ];
        for (nu, zs) in cases {
            for &s in zs {
                let series = mwright_series(nu, s).expect("series fine on this band");
                let z = zolotarev_density(nu, s, 1.0).unwrap();
                assert_abs_diff_eq!(z, series, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn series_fallback_kicks_in_deep_tail() {
        // nu = 0.7, z = 15: the raw series is hopeless; the density path
        // must still return a sane (tiny, nonnegative) value.
        assert!(mwright_series(0.7, 15.0).is_none());
        let v = general_density(0.7, 15.0, 1.0).unwrap();
        assert!(v >= 0.0 && v < 1e-10, "got {v}");
    }

    #[test]
    fn laplace_identity_all_structures() {
        // int e^{-mu s} f(s) ds = E_{nu,1}(-mu t^nu): the arbiter for all
        // normalization conventions.
        let cfg = MlEvalConfig::default();
        let t = 1.0;
        for nu in [0.25, 1.0 / 3.0, 0.5, 0.7] {
            let law = RandomTimeLaw::new(nu, t).unwrap();
            for mu in [0.5, 1.0, 2.0] {
                let lhs = law.laplace(mu, 1e-7).unwrap();
                let rhs = mittag_leffler(nu, -mu * t.powf(nu), &cfg).unwrap();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn sampler_ks_against_folded_gaussian() {
        // nu = 1/2, t = 1: CDF is erf(s / 2).
        let law = RandomTimeLaw::new(0.5, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 100_000usize;
        let mut draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng).unwrap()).collect();
        draws.sort_by(f64::total_cmp);
        let mut d = 0.0f64;
        for (i, &s) in draws.iter().enumerate() {
            let f = erf(s / 2.0);
            d = d.max((f - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - f).abs());
        }
        let crit = (-(0.0005f64).ln() / 2.0).sqrt() / (n as f64).sqrt();
        assert!(d < crit, "KS {d} above critical {crit}");
    }

    #[test]
    fn sampler_laplace_functional_general_nu() {
        // E e^{-mu T} vs E_{0.7,1}(-mu) within 4 standard errors.
        let law = RandomTimeLaw::new(0.7, 1.0).unwrap();
        let cfg = MlEvalConfig::default();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng).unwrap()).collect();
        for mu in [0.5, 1.0, 2.0] {
            let vals: Vec<f64> = draws.iter().map(|&s| (-mu * s).exp()).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            let target = mittag_leffler(0.7, -mu, &cfg).unwrap();
            assert!(
                (mean - target).abs() < 4.0 * se,
                "mu={mu}: {mean} vs {target} (se {se})"
            );
        }
    }

    #[test]
    fn sampler_density_chi_square() {
        // Bin 1e5 draws against the density for each structural case.
        for (seed, nu) in [(21u64, 0.25), (22, 1.0 / 3.0), (23, 0.5), (24, 0.7)] {
            let law = RandomTimeLaw::new(nu, 1.0).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = 100_000usize;
            let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng).unwrap()).collect();
            let s_hi = law.tail_cutoff(1e-4);
            let bins = 25usize;
            let mut observed = vec![0usize; bins + 1];
            for &d in &draws {
                let idx = ((d / s_hi) * bins as f64).floor() as usize;
                observed[idx.min(bins)] += 1;
            }
            let mut chi2 = 0.0;
            let mut dof = 0i64;
            let mut running_p = 0.0;
            for b in 0..bins {
                let lo = s_hi * b as f64 / bins as f64;
                let hi = s_hi * (b + 1) as f64 / bins as f64;
                let p = quad::adaptive(
                    |s| law.density(s).unwrap_or(0.0),
                    lo.max(1e-12),
                    hi,
                    1e-10,
                    1e-9,
                    200_000,
                )
                .unwrap()
                .value;
                running_p += p;
                let expected = p * n as f64;
                if expected >= 5.0 {
                    let diff = observed[b] as f64 - expected;
                    chi2 += diff * diff / expected;
                    dof += 1;
                }
            }
            // Pooled tail bin.
            let tail_p = (1.0 - running_p).max(1e-12);
            let tail_exp = tail_p * n as f64;
            if tail_exp >= 5.0 {
                let tail_obs = observed[bins] as f64;
                chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / tail_exp;
                dof += 1;
            }
            dof -= 1;
            assert!(dof > 5, "grid too coarse for nu={nu}");
            let p_value =
                statrs::function::gamma::gamma_ur(dof as f64 / 2.0, chi2.max(0.0) / 2.0);
            assert!(
                p_value > 0.001,
                "nu={nu}: chi2={chi2:.2} dof={dof} p={p_value:.5}"
            );
        }
    }

    #[test]
    fn density_nonnegative_everywhere_sampled() {
        for nu in [0.25, 1.0 / 3.0, 0.5, 0.61, 0.7, 0.9] {
            let law = RandomTimeLaw::new(nu, 1.3).unwrap();
            for i in 1..=40 {
                let s = 0.25 * i as f64;
                let v = law.density(s).unwrap();
                assert!(v >= 0.0, "nu={nu} s={s} gave {v}");
            }
        }
    }
}
