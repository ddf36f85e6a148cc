//! Exact optimal transport with dual certificates.
//!
//! ```text
//! cargo run --example transport_lp
//! ```

use ndarray::array;
use nested_sinkhorn::{solve_transport_lp, Result};

fn main() -> Result<()> {
    let p = [0.2, 0.5, 0.3];
    let q = [0.4, 0.1, 0.25, 0.25];
    let cost = array![
        [1.0, 3.0, 2.0, 4.0],
        [2.0, 1.0, 5.0, 2.0],
        [3.0, 2.0, 1.0, 1.0],
    ];
    let lp = solve_transport_lp(&p, &q, &cost)?;
    println!("optimal cost {:.6} after {} pivots", lp.value, lp.pivots);
    println!("plan:\n{:.3}", lp.plan.matrix);
    println!("row potentials    {:?}", lp.dual_row);
    println!("column potentials {:?}", lp.dual_col);

    let cert = lp.certificate(&cost);
    println!(
        "duality gap {:.1e}, dual violation {:.1e}, complementary slackness {:.1e}",
        cert.duality_gap, cert.dual_violation, cert.slackness_residual
    );
    assert!(cert.holds());
    Ok(())
}
