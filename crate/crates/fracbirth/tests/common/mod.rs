//! Test-only oracles, independent of the library's evaluation paths.
//!
//! - double-double (~31 significant digits) arithmetic driving an
//!   extended-precision Mittag–Leffler series at nu = 1/2 and the
//!   ascending Airy series;
//! - an implicit L1 solver for the governing fractional system on a
//!   graded mesh (classical RK4 at nu = 1), used as the
//!   fractional-ODE oracle for the general-rate solution.

#![allow(dead_code)]

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(Dd {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from_f64(q1)));
        let q2 = r.hi / o.hi;
        let (hi, lo) = two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn scale(self, x: f64) -> Dd {
        self.mul(Dd::from_f64(x))
    }
}

/// sqrt(pi) to double-double precision.
pub const SQRT_PI_DD: Dd = Dd {
    hi: 1.772453850905516,
    lo: -7.666586499825799e-17,
};

/// `E_{1/2,1}(x)` by the plain series in double-double arithmetic.
///
/// Gamma at half-integer arguments follows the exact recurrence
/// `Gamma(z + 1) = z Gamma(z)` from `Gamma(1) = 1`, `Gamma(3/2) =
/// sqrt(pi)/2`, so every term is accurate to ~1e-31 and the alternating
/// cancellation (up to ~1e13 at x = -5) still leaves ~18 good digits.
pub fn ml_half_dd(x: f64, terms: usize) -> f64 {
    let mut sum = Dd::from_f64(0.0);
    let mut xpow = Dd::from_f64(1.0);
    // g_even = Gamma(h/2 + 1) for even h, g_odd for odd h.
    let mut g_even = Dd::from_f64(1.0); // Gamma(1)
    let mut g_odd = SQRT_PI_DD.scale(0.5); // Gamma(3/2)
    for h in 0..terms {
        let gamma_h = if h % 2 == 0 { g_even } else { g_odd };
        sum = sum.add(xpow.div(gamma_h));
        xpow = xpow.mul(Dd::from_f64(x));
        // Advance the matching recurrence: Gamma(h/2 + 2) =
        // (h/2 + 1) Gamma(h/2 + 1).
        if h % 2 == 0 {
            g_even = g_even.scale(h as f64 / 2.0 + 1.0);
        } else {
            g_odd = g_odd.scale(h as f64 / 2.0 + 1.0);
        }
    }
    sum.to_f64()
}

/// Ai(0) = 3^{-2/3}/Gamma(2/3) in double-double.
const AIRY_C1_DD: Dd = Dd {
    hi: 0.3550280538878172,
    lo: 2.05233632436212e-17,
};
/// -Ai'(0) = 3^{-1/3}/Gamma(1/3) in double-double.
const AIRY_C2_DD: Dd = Dd {
    hi: 0.2588194037928068,
    lo: -2.522243111610832e-17,
};

/// Ascending Airy series `Ai(x) = c1 f(x) - c2 g(x)` in double-double.
pub fn airy_dd(x: f64, terms: usize) -> f64 {
    let x3 = Dd::from_f64(x).mul(Dd::from_f64(x)).mul(Dd::from_f64(x));
    let mut f_term = Dd::from_f64(1.0);
    let mut f_sum = f_term;
    let mut g_term = Dd::from_f64(x);
    let mut g_sum = g_term;
    for k in 0..terms {
        let kf = k as f64;
        f_term = f_term
            .mul(x3)
            .div(Dd::from_f64((3.0 * kf + 2.0) * (3.0 * kf + 3.0)));
        g_term = g_term
            .mul(x3)
            .div(Dd::from_f64((3.0 * kf + 3.0) * (3.0 * kf + 4.0)));
        f_sum = f_sum.add(f_term);
        g_sum = g_sum.add(g_term);
    }
    AIRY_C1_DD.mul(f_sum).sub(AIRY_C2_DD.mul(g_sum)).to_f64()
}

/// Forward solve of the governing system
/// `d^nu p_k / dt^nu = -lambda_k p_k + lambda_{k-1} p_{k-1}`,
/// `p_k(0) = [k == 1]`, returning `p_1..p_k_top` at `t_end`.
///
/// Fractional orders use the implicit L1 scheme on a graded mesh
/// `t_i = T (i/n)^gamma`, `gamma = (2 - nu)/nu`, which restores the full
/// convergence order against the `t^nu` boundary layer. `nu = 1` falls
/// back to classical RK4.
pub fn solve_fractional_birth(
    rates: &[f64],
    nu: f64,
    t_end: f64,
    n_steps: usize,
    k_top: usize,
) -> Vec<f64> {
    assert!(k_top <= rates.len());
    assert!(nu > 0.0 && nu <= 1.0 && t_end > 0.0);
    if nu == 1.0 {
        return solve_classical_rk4(rates, t_end, n_steps, k_top);
    }
    let gamma_mesh: f64 = ((2.0 - nu) / nu).max(1.0);
    let ts: Vec<f64> = (0..=n_steps)
        .map(|i| t_end * (i as f64 / n_steps as f64).powf(gamma_mesh))
        .collect();
    // Gamma(2 - nu) via statrs.
    let gam = statrs::function::gamma::gamma(2.0 - nu);

    // p[i][k-1] = p_k(t_i); lower-triangular, solved state by state.
    let mut p = vec![vec![0.0f64; k_top]; n_steps + 1];
    p[0][0] = 1.0;
    for n in 1..=n_steps {
        let tn = ts[n];
        // Cell weights w_i = [(tn-t_i)^{1-nu} - (tn-t_{i+1})^{1-nu}] /
        // (h_i Gamma(2-nu)).
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let hi = ts[i + 1] - ts[i];
                ((tn - ts[i]).powf(1.0 - nu) - (tn - ts[i + 1]).powf(1.0 - nu)) / (hi * gam)
            })
            .collect();
        for k in 1..=k_top {
            // History part excluding the (p_n - p_{n-1}) jump.
            let mut hist = 0.0;
            for i in 0..n - 1 {
                hist += w[i] * (p[i + 1][k - 1] - p[i][k - 1]);
            }
            let inflow = if k == 1 {
                0.0
            } else {
                rates[k - 2] * p[n][k - 2]
            };
            // w_{n-1}(p_n - p_{n-1}) + hist = -l_k p_n + inflow.
            p[n][k - 1] =
                (w[n - 1] * p[n - 1][k - 1] - hist + inflow) / (w[n - 1] + rates[k - 1]);
        }
    }
    p[n_steps].clone()
}

fn solve_classical_rk4(rates: &[f64], t_end: f64, n_steps: usize, k_top: usize) -> Vec<f64> {
    let h = t_end / n_steps as f64;
    let deriv = |p: &[f64]| -> Vec<f64> {
        (0..k_top)
            .map(|k| {
                let inflow = if k == 0 { 0.0 } else { rates[k - 1] * p[k - 1] };
                -rates[k] * p[k] + inflow
            })
            .collect()
    };
    let mut p = vec![0.0f64; k_top];
    p[0] = 1.0;
    for _ in 0..n_steps {
        let k1 = deriv(&p);
        let p2: Vec<f64> = p.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = deriv(&p2);
        let p3: Vec<f64> = p.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = deriv(&p3);
        let p4: Vec<f64> = p.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = deriv(&p4);
        for i in 0..k_top {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p
}
