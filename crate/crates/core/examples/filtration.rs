//! Two processes with the same leaf distribution but different information
//! flow: the flat distance barely sees a difference, the nested one does.
//!
//! ```text
//! cargo run --example filtration
//! ```

use nested_sinkhorn::{fixtures, nested_exact, wasserstein_distance, Result};

fn main() -> Result<()> {
    println!("{:>6} {:>12} {:>12}", "eps", "wasserstein", "nested");
    for eps in [0.0, 0.1, 0.5, 1.0] {
        let (a, b) = fixtures::information_pair(eps);
        let flat = wasserstein_distance(&a, &b, 1.0)?;
        let nested = nested_exact(&a, &b, 1.0)?;
        println!("{eps:>6.2} {flat:>12.6} {:>12.6}", nested.value);
    }

    let (a, b) = fixtures::information_pair(0.1);
    let res = nested_exact(&a, &b, 1.0)?;
    println!("\nnested coupling of the leaves (eps = 0.1):");
    for row in res.composed_plan.matrix.rows() {
        println!("  {row:.3}");
    }
    Ok(())
}
