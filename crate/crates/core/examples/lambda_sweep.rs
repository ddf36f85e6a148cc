//! Nested Sinkhorn values over the regularization grid 0.5, 1, 2, ..., 30,
//! written as CSV for plotting.
//!
//! ```text
//! cargo run --release --example lambda_sweep > sweep.csv
//! ```

use nested_sinkhorn::nested::default_lambda_grid;
use nested_sinkhorn::{fixtures, lambda_sweep, Result};

fn main() -> Result<()> {
    let (a, b) = fixtures::three_stage_pair();
    let rows = lambda_sweep(&a, &b, 1.0, &default_lambda_grid(), Default::default())?;
    println!("lambda,nd_s,nde_s,nd_w,gap_upper,gap_lower");
    for r in rows {
        println!(
            "{},{:.10},{:.10},{:.10},{:.3e},{:.3e}",
            r.lambda,
            r.nd_s,
            r.nde_s,
            r.nd_w,
            r.nd_s - r.nd_w,
            r.nd_w - r.nde_s
        );
    }
    Ok(())
}
