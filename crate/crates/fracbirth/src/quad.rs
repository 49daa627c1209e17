//! Adaptive Gauss–Kronrod quadrature.
//!
//! A 7-point Gauss / 15-point Kronrod pair drives worst-interval-first
//! bisection. The Kronrod value is the estimate; |Kronrod − Gauss| scaled
//! per interval is the error model. Integrands are expected to be finite
//! on the open interval; endpoints are never evaluated.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

// 15-point Kronrod nodes on [0, 1] side of the symmetric rule.
const XGK: [f64; 8] = [
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
];

const WGK: [f64; 8] = [
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
];

// 7-point Gauss weights for the even Kronrod indices 0, 2, 4, 6.
const WG: [f64; 4] = [
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

/// One G7K15 application on [a, b]: (kronrod, |kronrod − gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(mid);
    let mut kron = WGK[0] * fc;
    let mut gauss = WG[0] * fc;

    for i in 1..8 {
        let dx = half * XGK[i];
        let fsum = f(mid - dx) + f(mid + dx);
        kron += WGK[i] * fsum;
        if i % 2 == 0 {
            gauss += WG[i / 2] * fsum;
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

#[derive(Debug)]
struct Interval {
    err: f64,
    a: f64,
    b: f64,
    value: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `abs_tol` or relative
/// tolerance `rel_tol`, whichever is weaker, bisecting the worst interval
/// first.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    adaptive_split(f, &[a, b], abs_tol, rel_tol, max_evals)
}

/// Same as [`adaptive`] but with caller-supplied initial breakpoints,
/// for integrands with known spikes or scale changes.
pub fn adaptive_split<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::Domain("need at least two breakpoints".into()));
    }
    for w in points.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Domain(format!(
                "breakpoints not increasing: {} >= {}",
                w[0], w[1]
            )));
        }
    }

    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;

    for w in points.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        evals += 15;
        total += v;
        total_err += e;
        heap.push(Interval {
            err: e,
            a: w[0],
            b: w[1],
            value: v,
        });
    }

    loop {
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol {
            return Ok(QuadResult {
                value: total,
                abs_err: total_err,
                evals,
            });
        }
        if evals + 30 > max_evals {
            return Err(Error::QuadratureFailure(format!(
                "tolerance {tol:.3e} not reached: err {total_err:.3e} after {evals} evals"
            )));
        }
        let worst = heap.pop().expect("heap non-empty while error above tol");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Interval no longer splittable in f64: accept its contribution.
            total_err -= worst.err;
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Interval {
            err: e1,
            a: worst.a,
            b: mid,
            value: v1,
        });
        heap.push(Interval {
            err: e2,
            a: mid,
            b: worst.b,
            value: v2,
        });
    }
}

/// Fixed-rule K15 panels over `[a, b]`: nodes and weights for reuse when
/// many similar integrands share one grid. Panel count is chosen by the
/// caller; accuracy follows from panel width against integrand scale.
pub fn panel_nodes(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(panels > 0 && b > a);
    let width = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * 15);
    let mut ws = Vec::with_capacity(panels * 15);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        // Emit in ascending order: reflected nodes, center, direct nodes.
        for i in (1..8).rev() {
            xs.push(mid - half * XGK[i]);
            ws.push(WGK[i] * half);
        }
        xs.push(mid);
        ws.push(WGK[0] * half);
        for i in 1..8 {
            xs.push(mid + half * XGK[i]);
            ws.push(WGK[i] * half);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_exact() {
        let r = adaptive(|x| x * x, 0.0, 1.0, 1e-12, 0.0, 1000).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_tail() {
        // int_0^10 e^{-x^2} dx = sqrt(pi)/2 to machine precision.
        let r = adaptive(|x| (-x * x).exp(), 0.0, 10.0, 1e-13, 0.0, 100_000).unwrap();
        assert_abs_diff_eq!(r.value, std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2; endpoint never evaluated.
        let r = adaptive(|x| x.powf(-0.5), 0.0, 1.0, 1e-9, 0.0, 2_000_000).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-7);
    }

    #[test]
    fn budget_exhaustion_reports_failure() {
        let r = adaptive(|x| (1e6 * x).sin() / x.abs().sqrt(), 0.0, 1.0, 1e-14, 0.0, 300);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }

    #[test]
    fn split_points_must_increase() {
        let r = adaptive_split(|x| x, &[0.0, 0.0, 1.0], 1e-9, 0.0, 1000);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn panel_nodes_integrate_smooth() {
        let (xs, ws) = panel_nodes(0.0, 2.0, 8);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.exp()).sum();
        assert_abs_diff_eq!(s, 2.0f64.exp() - 1.0, epsilon = 1e-12);
        // Nodes ascend strictly.
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }
}
