use fracbirth::analytic::{pmf_table_linear, TablePolicy};
use std::time::Instant;

fn main() {
    for (nu, t) in [(0.3f64, 0.5f64), (0.3, 1.0), (0.3, 2.0), (0.5, 2.0), (0.7, 2.0)] {
        let start = Instant::now();
        let policy = TablePolicy { tail_tol: 1e-6, k_max_hard: 8_000_000 };
        match pmf_table_linear(1.0, nu, t, 1, policy) {
            Ok(tb) => println!(
                "nu={nu} t={t}: k_cut={} mass={:.9} tail={:.3e} elapsed={:?}",
                tb.k_cut, tb.total_mass(), tb.tail_mass, start.elapsed()
            ),
            Err(e) => println!("nu={nu} t={t}: ERROR {e} after {:?}", start.elapsed()),
        }
    }
}
