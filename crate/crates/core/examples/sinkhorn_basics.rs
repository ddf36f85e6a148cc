//! Entropic transport on a small instance: how the regularized plan and its
//! values approach the exact solution as lambda grows.
//!
//! ```text
//! cargo run --example sinkhorn_basics
//! ```

use ndarray::array;
use nested_sinkhorn::{
    bound_certificates, dual_from_scalings, sinkhorn_auto, solve_transport_lp, Result,
    SinkhornOptions,
};

fn main() -> Result<()> {
    let p = [0.45, 0.35, 0.2];
    let q = [0.2, 0.3, 0.5];
    let cost = array![[0.0, 2.0, 1.0], [1.5, 0.0, 2.5], [0.5, 1.0, 0.0]];
    let exact = solve_transport_lp(&p, &q, &cost)?;
    println!("exact value d_W = {:.6}\n", exact.value);

    let opts = SinkhornOptions {
        tol: 1e-12,
        ..Default::default()
    };
    println!(
        "{:>7} {:>10} {:>10} {:>9} {:>6} {:>11} {:>10}",
        "lambda", "d_S", "de_S", "H", "iters", "mode", "converged"
    );
    for lambda in [0.5, 2.0, 10.0, 50.0, 1000.0] {
        let s = sinkhorn_auto(&p, &q, &cost, lambda, opts)?;
        println!(
            "{lambda:>7} {:>10.6} {:>10.6} {:>9.5} {:>6} {:>11?} {:>10}",
            s.d_s, s.de_s, s.entropy, s.iterations, s.mode, s.converged
        );
        let report = bound_certificates(&p, &q, &cost, lambda, &s, &exact)?;
        assert!(report.all_passed(), "{report}");
    }

    let s = sinkhorn_auto(&p, &q, &cost, 2.0, opts)?;
    let dual = dual_from_scalings(&s)?;
    println!(
        "\nlambda = 2 duals: beta {:.4?}, gamma {:.4?}",
        dual.beta, dual.gamma
    );
    println!(
        "dual objective less 1/lambda: {:.9}",
        dual.lagrangian_value(&cost)
    );
    println!("primal entropic objective:    {:.9}", s.de_s);
    Ok(())
}
