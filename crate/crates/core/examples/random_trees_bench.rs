//! Exact against entropic nested distance on random trees of growing height.
//!
//! ```text
//! cargo run --release --example random_trees_bench
//! ```

use nested_sinkhorn::{bench, Result};

fn main() -> Result<()> {
    let rows = bench(
        &[1, 2, 3, 2, 3, 4],
        &[1, 2, 2, 1, 3, 2],
        0,
        20.0,
        1.0,
        Default::default(),
    )?;
    println!(
        "{:>2} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "T", "leaves", "nd_W", "nde_S", "diff", "exact s", "sinkhorn s", "ratio"
    );
    for r in rows {
        println!(
            "{:>2} {:>7} {:>10.5} {:>10.5} {:>10.5} {:>10.2e} {:>10.2e} {:>10.2}",
            r.stages,
            format!("{}x{}", r.leaves_a, r.leaves_b),
            r.nd_w,
            r.nde_s,
            r.difference,
            r.time_exact,
            r.time_sinkhorn,
            r.acceleration
        );
    }
    Ok(())
}
