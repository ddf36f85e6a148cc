//! Entropy-regularized transport.
//!
//! Minimizes `Σ π_ij c_ij − H(π)/λ` over couplings of `p` and `q` by
//! alternately rescaling the rows and columns of the Gibbs kernel
//! `k_ij = exp(−λ c_ij)`. The optimal plan is `diag(β̃) K diag(γ̃)`.
//!
//! Two iterations share one contract: [`sinkhorn`] works on the kernel
//! directly, [`sinkhorn_stabilized`] keeps `log β̃`, `log γ̃` and evaluates
//! the products by log-sum-exp. [`sinkhorn_auto`] picks between them.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::report::{Check, Report};
use crate::transport::{dot, validate_problem, LpSolution, TransportPlan};

/// `λ · max |c|` above which the plain kernel risks underflow.
pub const STABILIZE_THRESHOLD: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Stop once the ∞-norm marginal violation is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkhornMode {
    Plain,
    Stabilized,
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub plan: TransportPlan,
    /// `β̃`, normalized so that its largest entry is 1.
    pub scaling_row: Vec<f64>,
    /// `γ̃`. May overflow to infinity in stabilized mode; the log form is exact.
    pub scaling_col: Vec<f64>,
    pub log_scaling_row: Vec<f64>,
    pub log_scaling_col: Vec<f64>,
    /// `Σ π_ij c_ij`.
    pub d_s: f64,
    pub entropy: f64,
    /// `d_s − entropy / λ`; may be negative.
    pub de_s: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub marginal_error: f64,
    pub converged: bool,
    pub mode: SinkhornMode,
}

/// `exp(−λ c)` elementwise.
pub fn gibbs_kernel(cost: &Array2<f64>, lambda: f64) -> Array2<f64> {
    cost.mapv(|c| (-lambda * c).exp())
}

/// `H(π) = −Σ π log π` in nats, with `0 log 0 = 0`.
pub fn entropy(plan: &Array2<f64>) -> Result<f64> {
    let mut h = 0.0;
    for &x in plan {
        if !(-1e-12..=1.0 + 1e-12).contains(&x) || x.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "plan entry {x} outside [0, 1]"
            )));
        }
        let x = x.clamp(0.0, 1.0);
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    Ok(h.max(0.0))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveLambda(lambda))
    }
}

/// Sinkhorn's iteration on the Gibbs kernel.
///
/// Starts from `γ̃ = 1` and updates `β̃` then `γ̃` until the assembled plan
/// matches both marginals within `opts.tol`. Running out of iterations is
/// reported through `converged = false`, not as an error.
pub fn sinkhorn(
    p: &[f64],
    q: &[f64],
    cost: &Array2<f64>,
    lambda: f64,
    opts: SinkhornOptions,
) -> Result<SinkhornResult> {
    check_lambda(lambda)?;
    validate_problem(p, q, cost)?;
    let (n, m) = cost.dim();
    let kernel = gibbs_kernel(cost, lambda);
    if let Some(i) = (0..n).find(|&i| kernel.row(i).iter().all(|&k| k == 0.0)) {
        return Err(Error::KernelUnderflow(format!("row {i}")));
    }
    if let Some(j) = (0..m).find(|&j| kernel.column(j).iter().all(|&k| k == 0.0)) {
        return Err(Error::KernelUnderflow(format!("column {j}")));
    }

    let mut beta = vec![0.0; n];
    let mut gamma = vec![1.0; m];
    let mut k_gamma = kernel.dot(&ndarray::aview1(&gamma)).to_vec();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..n {
            beta[i] = p[i] / k_gamma[i];
        }
        let k_beta = kernel.t().dot(&ndarray::aview1(&beta));
        for j in 0..m {
            gamma[j] = q[j] / k_beta[j];
        }
        k_gamma = kernel.dot(&ndarray::aview1(&gamma)).to_vec();
        if k_gamma
            .iter()
            .chain(&gamma)
            .any(|x| !x.is_finite() || *x == 0.0)
        {
            return Err(Error::KernelUnderflow("scaling update".into()));
        }
        let err = (0..n)
            .map(|i| (beta[i] * k_gamma[i] - p[i]).abs())
            .fold(0.0, f64::max);
        if err <= opts.tol {
            converged = true;
            break;
        }
    }

    let gauge = beta.iter().copied().fold(0.0, f64::max);
    beta.iter_mut().for_each(|b| *b /= gauge);
    gamma.iter_mut().for_each(|g| *g *= gauge);
    let plan = Array2::from_shape_fn((n, m), |(i, j)| beta[i] * kernel[[i, j]] * gamma[j]);
    finish(
        p,
        q,
        cost,
        lambda,
        plan,
        beta.iter().map(|b| b.ln()).collect(),
        gamma.iter().map(|g| g.ln()).collect(),
        iterations,
        converged,
        SinkhornMode::Plain,
    )
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain variant of [`sinkhorn`] with the same fixed point.
pub fn sinkhorn_stabilized(
    p: &[f64],
    q: &[f64],
    cost: &Array2<f64>,
    lambda: f64,
    opts: SinkhornOptions,
) -> Result<SinkhornResult> {
    check_lambda(lambda)?;
    validate_problem(p, q, cost)?;
    let (n, m) = cost.dim();
    let log_k = cost.mapv(|c| -lambda * c);
    let log_p: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let log_q: Vec<f64> = q.iter().map(|x| x.ln()).collect();

    let log_k = &log_k;
    let row_lse = |g: &[f64], i: usize| log_sum_exp(log_k.row(i).iter().zip(g).map(|(k, g)| k + g));
    let col_lse =
        |f: &[f64], j: usize| log_sum_exp(log_k.column(j).iter().zip(f).map(|(k, f)| k + f));

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut row_logsum: Vec<f64> = (0..n).map(|i| row_lse(&g, i)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..n {
            f[i] = log_p[i] - row_logsum[i];
        }
        for j in 0..m {
            g[j] = log_q[j] - col_lse(&f, j);
        }
        row_logsum = (0..n).map(|i| row_lse(&g, i)).collect();
        let err = (0..n)
            .map(|i| ((f[i] + row_logsum[i]).exp() - p[i]).abs())
            .fold(0.0, f64::max);
        if err <= opts.tol {
            converged = true;
            break;
        }
    }

    let gauge = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    f.iter_mut().for_each(|x| *x -= gauge);
    g.iter_mut().for_each(|x| *x += gauge);
    let plan = Array2::from_shape_fn((n, m), |(i, j)| (f[i] + log_k[[i, j]] + g[j]).exp());
    finish(
        p,
        q,
        cost,
        lambda,
        plan,
        f,
        g,
        iterations,
        converged,
        SinkhornMode::Stabilized,
    )
}

/// Plain iteration unless `λ · max |c|` exceeds [`STABILIZE_THRESHOLD`] or
/// the kernel underflows anyway.
pub fn sinkhorn_auto(
    p: &[f64],
    q: &[f64],
    cost: &Array2<f64>,
    lambda: f64,
    opts: SinkhornOptions,
) -> Result<SinkhornResult> {
    let spread = cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if lambda * spread > STABILIZE_THRESHOLD {
        return sinkhorn_stabilized(p, q, cost, lambda, opts);
    }
    match sinkhorn(p, q, cost, lambda, opts) {
        Err(Error::KernelUnderflow(_)) => sinkhorn_stabilized(p, q, cost, lambda, opts),
        other => other,
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: &[f64],
    q: &[f64],
    cost: &Array2<f64>,
    lambda: f64,
    matrix: Array2<f64>,
    log_scaling_row: Vec<f64>,
    log_scaling_col: Vec<f64>,
    iterations: usize,
    converged: bool,
    mode: SinkhornMode,
) -> Result<SinkhornResult> {
    let plan = TransportPlan {
        matrix,
        row_marginal: p.to_vec(),
        col_marginal: q.to_vec(),
    };
    let d_s = plan.cost(cost);
    let h = entropy(&plan.matrix)?;
    Ok(SinkhornResult {
        marginal_error: plan.marginal_error(),
        plan,
        scaling_row: log_scaling_row.iter().map(|x| x.exp()).collect(),
        scaling_col: log_scaling_col.iter().map(|x| x.exp()).collect(),
        log_scaling_row,
        log_scaling_col,
        d_s,
        entropy: h,
        de_s: d_s - h / lambda,
        lambda,
        iterations,
        converged,
        mode,
    })
}

/// Dual multipliers `β`, `γ` of the entropic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `Σ p_i β_i + Σ q_j γ_j`, the objective of the normalized dual.
    pub dual_value: f64,
    pub lambda: f64,
}

impl DualCertificate {
    /// `Σ_ij exp(−λ(c_ij − β_i − γ_j) − 1)`; equals 1 at the optimum.
    pub fn normalization(&self, cost: &Array2<f64>) -> f64 {
        cost.indexed_iter()
            .map(|((i, j), c)| (-self.lambda * (c - self.beta[i] - self.gamma[j]) - 1.0).exp())
            .sum()
    }

    /// `max(β_i + γ_j − c_ij − 1/λ)`; nonpositive when feasible.
    pub fn max_violation(&self, cost: &Array2<f64>) -> f64 {
        cost.indexed_iter()
            .map(|((i, j), c)| self.beta[i] + self.gamma[j] - c - 1.0 / self.lambda)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lagrangian dual value `dual_value − normalization / λ`, which matches
    /// the entropic objective `de_s` at the optimum.
    pub fn lagrangian_value(&self, cost: &Array2<f64>) -> f64 {
        self.dual_value - self.normalization(cost) / self.lambda
    }

    pub fn check(&self, cost: &Array2<f64>) -> Report {
        Report {
            checks: vec![
                Check::le("dual feasibility", self.max_violation(cost), 0.0, 1e-8),
                Check::small("dual normalization", self.normalization(cost) - 1.0, 1e-8),
            ],
        }
    }
}

/// Recovers `β = (log β̃ + ½)/λ` and `γ = (log γ̃ + ½)/λ`.
pub fn dual_from_scalings(result: &SinkhornResult) -> Result<DualCertificate> {
    if !result.converged {
        return Err(Error::Unconverged(format!(
            "sinkhorn stopped after {} iterations at marginal error {:.3e}",
            result.iterations, result.marginal_error
        )));
    }
    let logs = result.log_scaling_row.iter().chain(&result.log_scaling_col);
    if logs.clone().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("nonpositive scaling".into()));
    }
    let lambda = result.lambda;
    let beta: Vec<f64> = result
        .log_scaling_row
        .iter()
        .map(|x| (x + 0.5) / lambda)
        .collect();
    let gamma: Vec<f64> = result
        .log_scaling_col
        .iter()
        .map(|x| (x + 0.5) / lambda)
        .collect();
    let dual_value = dot(&result.plan.row_marginal, &beta) + dot(&result.plan.col_marginal, &gamma);
    Ok(DualCertificate {
        beta,
        gamma,
        dual_value,
        lambda,
    })
}

/// Checks the comparison bounds between the entropic and exact solutions of
/// one instance, each within `1e-8`:
///
/// * `0 ≤ d_S − d_W ≤ (H(π^S) − H(π^W))/λ`
/// * `0 ≤ d_W − de_S ≤ H(π^S)/λ`
/// * `H(π^S) ≤ H(p qᵀ)` and `H(π^S) ≤ log n + log ñ`
pub fn bound_certificates(
    p: &[f64],
    q: &[f64],
    cost: &Array2<f64>,
    lambda: f64,
    sink: &SinkhornResult,
    lp: &LpSolution,
) -> Result<Report> {
    let dim = (p.len(), q.len());
    if cost.dim() != dim || sink.plan.dim() != dim || lp.plan.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "cost {:?}, sinkhorn plan {:?}, exact plan {:?}",
            cost.dim(),
            sink.plan.dim(),
            lp.plan.dim()
        )));
    }
    let d_w = lp.value;
    let h_s = sink.entropy;
    let h_w = entropy(&lp.plan.matrix)?;
    let product = Array2::from_shape_fn(dim, |(i, j)| p[i] * q[j]);
    let h_pq = entropy(&product)?;
    Ok(entropic_bounds(
        d_w,
        sink.d_s,
        sink.de_s,
        h_s,
        h_w,
        h_pq,
        (dim.0 as f64).ln() + (dim.1 as f64).ln(),
        lambda,
    ))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn entropic_bounds(
    d_w: f64,
    d_s: f64,
    de_s: f64,
    h_s: f64,
    h_w: f64,
    h_product: f64,
    log_support: f64,
    lambda: f64,
) -> Report {
    const TOL: f64 = 1e-8;
    Report {
        checks: vec![
            Check::le("d_S - d_W >= 0", 0.0, d_s - d_w, TOL),
            Check::le(
                "d_S - d_W <= (H_S - H_W)/lambda",
                d_s - d_w,
                (h_s - h_w) / lambda,
                TOL,
            ),
            Check::le("d_W - de_S >= 0", 0.0, d_w - de_s, TOL),
            Check::le("d_W - de_S <= H_S/lambda", d_w - de_s, h_s / lambda, TOL),
            Check::le("H_S <= H(p q^T)", h_s, h_product, TOL),
            Check::le("H_S <= log n + log m", h_s, log_support, TOL),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::solve_transport_lp;
    use ndarray::array;
    use proptest::prelude::*;

    fn swap_cost() -> Array2<f64> {
        array![[0.0, 1.0], [1.0, 0.0]]
    }

    fn closed_form_diag(lambda: f64) -> f64 {
        1.0 / (2.0 * (1.0 + (-lambda).exp()))
    }

    const HALF: [f64; 2] = [0.5, 0.5];

    #[test]
    fn symmetric_two_by_two() {
        let res = sinkhorn(&HALF, &HALF, &swap_cost(), 1.0, Default::default()).unwrap();
        let a = closed_form_diag(1.0);
        assert!((a - 0.3655293).abs() < 1e-7);
        assert!((res.plan.matrix[[0, 0]] - a).abs() < 1e-9);
        assert!((res.plan.matrix[[1, 1]] - a).abs() < 1e-9);
        assert!((res.plan.matrix[[0, 1]] - (0.5 - a)).abs() < 1e-9);
        assert!((res.d_s - 0.2689414).abs() < 1e-7);
        assert!(res.converged);
    }

    #[test]
    fn one_by_one_is_forced() {
        let cost = array![[3.25]];
        for &lambda in &[0.1, 1.0, 40.0] {
            let res = sinkhorn(&[1.0], &[1.0], &cost, lambda, Default::default()).unwrap();
            assert_eq!(res.plan.matrix[[0, 0]], 1.0);
            assert_eq!(res.d_s, 3.25);
            assert_eq!(res.entropy, 0.0);
            assert_eq!(res.de_s, 3.25);
            let st =
                sinkhorn_stabilized(&[1.0], &[1.0], &cost, lambda, Default::default()).unwrap();
            assert!((st.plan.matrix[[0, 0]] - 1.0).abs() < 1e-15);
            assert!((st.d_s - res.d_s).abs() < 1e-15);
        }
    }

    #[test]
    fn large_lambda_closed_form() {
        let res = sinkhorn(&HALF, &HALF, &swap_cost(), 50.0, Default::default()).unwrap();
        let expected = (-50.0f64).exp() / (1.0 + (-50.0f64).exp());
        assert!(res.d_s < 1e-21);
        assert!((res.d_s - expected).abs() < 1e-30);
        assert!((res.plan.matrix[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stabilized_survives_huge_lambda() {
        let res =
            sinkhorn_stabilized(&HALF, &HALF, &swap_cost(), 2000.0, Default::default()).unwrap();
        assert!(res.converged);
        assert!(res.d_s < 1e-15);
        assert!(res.plan.matrix.iter().all(|x| x.is_finite()));
        let auto = sinkhorn_auto(&HALF, &HALF, &swap_cost(), 2000.0, Default::default()).unwrap();
        assert_eq!(auto.mode, SinkhornMode::Stabilized);
    }

    #[test]
    fn plain_reports_kernel_underflow() {
        let cost = array![[1000.0, 1000.0], [0.0, 1.0]];
        let err = sinkhorn(&HALF, &HALF, &cost, 1.0, Default::default()).unwrap_err();
        assert!(matches!(err, Error::KernelUnderflow(_)));
        let res = sinkhorn_auto(&HALF, &HALF, &cost, 1.0, Default::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.mode, SinkhornMode::Stabilized);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        for lambda in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                sinkhorn(&HALF, &HALF, &swap_cost(), lambda, Default::default()),
                Err(Error::NonPositiveLambda(_))
            ));
            assert!(
                sinkhorn_stabilized(&HALF, &HALF, &swap_cost(), lambda, Default::default())
                    .is_err()
            );
        }
    }

    #[test]
    fn exhausting_iterations_is_flagged() {
        let cost = array![[0.0, 1.0, 2.0], [2.0, 0.0, 1.0], [1.0, 3.0, 0.0]];
        let p = [0.2, 0.3, 0.5];
        let opts = SinkhornOptions {
            tol: 1e-15,
            max_iter: 2,
        };
        let res = sinkhorn(&p, &p, &cost, 5.0, opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        assert!(dual_from_scalings(&res).is_err());
    }

    #[test]
    fn entropy_examples() {
        let uniform = Array2::from_elem((2, 2), 0.25);
        assert!((entropy(&uniform).unwrap() - 4.0f64.ln()).abs() < 1e-15);
        assert!((entropy(&uniform).unwrap() - 1.3862944).abs() < 1e-7);
        assert_eq!(entropy(&array![[1.0, 0.0], [0.0, 0.0]]).unwrap(), 0.0);
        let h = entropy(&array![[0.5, 0.25], [0.25, 0.0]]).unwrap();
        let direct = -(0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((h - direct).abs() < 1e-15);
        assert!((h - 1.0397208).abs() < 1e-7);
        assert!(entropy(&array![[1.5]]).is_err());
        assert!(entropy(&array![[-0.1]]).is_err());
    }

    #[test]
    fn dual_symmetric_two_by_two() {
        let cost = swap_cost();
        let res = sinkhorn(&HALF, &HALF, &cost, 1.0, Default::default()).unwrap();
        let dual = dual_from_scalings(&res).unwrap();
        assert!((dual.beta[0] - dual.beta[1]).abs() < 1e-9);
        assert!((dual.gamma[0] - dual.gamma[1]).abs() < 1e-9);
        // At the diagonal, β + γ = c + (log π + 1)/λ.
        let a = closed_form_diag(1.0);
        assert!((dual.beta[0] + dual.gamma[0] - (a.ln() + 1.0)).abs() < 1e-8);
        assert!(dual.check(&cost).all_passed());
        // The normalized dual omits the constant −1/λ.
        assert!((dual.lagrangian_value(&cost) - res.de_s).abs() < 1e-8);
        assert!((dual.dual_value - 1.0 - res.de_s).abs() < 1e-8);
    }

    #[test]
    fn dual_one_by_one_gap() {
        let c = 2.5;
        let cost = array![[c]];
        for lambda in [0.5, 3.0, 17.0] {
            let res = sinkhorn(&[1.0], &[1.0], &cost, lambda, Default::default()).unwrap();
            let dual = dual_from_scalings(&res).unwrap();
            assert!((dual.beta[0] + dual.gamma[0] - (c + 1.0 / lambda)).abs() < 1e-12);
            assert!((dual.dual_value - res.de_s - 1.0 / lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_power_identity() {
        let cost = array![[0.3, 1.7, 4.0], [2.2, 0.0, 0.9]];
        let k1 = gibbs_kernel(&cost, 1.3);
        let k2 = gibbs_kernel(&cost, 2.6);
        for (a, b) in k1.iter().zip(k2.iter()) {
            assert!((a * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_bounds() {
        let cost = swap_cost();
        let sink = sinkhorn(&HALF, &HALF, &cost, 1.0, Default::default()).unwrap();
        let lp = solve_transport_lp(&HALF, &HALF, &cost).unwrap();
        assert_eq!(lp.value, 0.0);
        let a = closed_form_diag(1.0);
        let b = 0.5 - a;
        let h = -(2.0 * a * a.ln() + 2.0 * b * b.ln());
        assert!((sink.entropy - h).abs() < 1e-8);
        assert!((sink.entropy - 1.2753503).abs() < 1e-7);
        assert!((sink.de_s + 1.0064089).abs() < 1e-7);
        let report = bound_certificates(&HALF, &HALF, &cost, 1.0, &sink, &lp).unwrap();
        assert!(report.all_passed(), "{report}");
    }

    #[test]
    fn bounds_reject_mismatched_dimensions() {
        let cost = swap_cost();
        let sink = sinkhorn(&HALF, &HALF, &cost, 1.0, Default::default()).unwrap();
        let lp = solve_transport_lp(&[1.0], &HALF, &array![[0.0, 1.0]]).unwrap();
        assert!(bound_certificates(&HALF, &HALF, &cost, 1.0, &sink, &lp).is_err());
    }

    fn prob(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, len).prop_map(|w| {
            let s: f64 = w.iter().sum();
            let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
            let head: f64 = v[..v.len() - 1].iter().sum();
            *v.last_mut().unwrap() = 1.0 - head;
            v
        })
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Array2<f64>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
            (
                prob(n),
                prob(m),
                prop::collection::vec(0.0f64..3.0, n * m)
                    .prop_map(move |c| Array2::from_shape_vec((n, m), c).unwrap()),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn plain_and_stabilized_agree((p, q, cost) in instance(), lambda in 0.5f64..10.0) {
            let opts = SinkhornOptions { tol: 1e-12, max_iter: 100_000 };
            let plain = sinkhorn(&p, &q, &cost, lambda, opts).unwrap();
            let stab = sinkhorn_stabilized(&p, &q, &cost, lambda, opts).unwrap();
            prop_assert!(plain.converged && stab.converged);
            prop_assert!((plain.d_s - stab.d_s).abs() <= 1e-8);
        }

        #[test]
        fn result_invariants((p, q, cost) in instance(), lambda in 0.5f64..10.0) {
            let opts = SinkhornOptions::default();
            let res = sinkhorn(&p, &q, &cost, lambda, opts).unwrap();
            prop_assert!(res.converged);
            prop_assert!(res.marginal_error <= opts.tol);
            let kernel = gibbs_kernel(&cost, lambda);
            for ((i, j), &x) in res.plan.matrix.indexed_iter() {
                prop_assert!(x > 0.0);
                let gibbs = res.scaling_row[i] * kernel[[i, j]] * res.scaling_col[j];
                prop_assert!((x - gibbs).abs() <= 1e-10 * x);
            }
            prop_assert!(res.scaling_row.iter().copied().fold(0.0, f64::max) == 1.0);
            prop_assert!(res.de_s <= res.d_s);
            let support = (p.len() * q.len()) as f64;
            prop_assert!(res.entropy >= 0.0 && res.entropy <= support.ln() + 1e-12);

            // One more update moves the scalings by the residual marginal error only.
            let k_gamma = kernel.dot(&ndarray::aview1(&res.scaling_col));
            for i in 0..p.len() {
                let next = p[i] / k_gamma[i];
                let rel = (next - res.scaling_row[i]).abs() / res.scaling_row[i];
                prop_assert!(rel <= res.marginal_error / p[i] * (1.0 + 1e-6) + 1e-14);
            }

            let dual = dual_from_scalings(&res).unwrap();
            prop_assert!(dual.check(&cost).all_passed());
        }

        #[test]
        fn ordering_and_bounds((p, q, cost) in instance(), lambda in prop::sample::select(vec![1.0, 10.0, 100.0])) {
            let opts = SinkhornOptions { tol: 1e-11, max_iter: 1_000_000 };
            let sink = sinkhorn_auto(&p, &q, &cost, lambda, opts).unwrap();
            let lp = solve_transport_lp(&p, &q, &cost).unwrap();
            prop_assert!(sink.de_s <= lp.value + 1e-8);
            prop_assert!(lp.value <= sink.d_s + 1e-8);
            if sink.converged {
                let report = bound_certificates(&p, &q, &cost, lambda, &sink, &lp).unwrap();
                prop_assert!(report.all_passed(), "{}", report);
            }
        }
    }

    #[test]
    fn random_five_by_seven_bounds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut normalized = |len: usize| {
            let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let p = normalized(5);
        let q = normalized(7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let cost = Array2::from_shape_fn((5, 7), |_| rng.random_range(0.0..2.0));
        let lp = solve_transport_lp(&p, &q, &cost).unwrap();
        for lambda in [1.0, 10.0, 100.0] {
            let opts = SinkhornOptions {
                tol: 1e-12,
                max_iter: 1_000_000,
            };
            let sink = sinkhorn_auto(&p, &q, &cost, lambda, opts).unwrap();
            assert!(sink.converged, "lambda {lambda}");
            let report = bound_certificates(&p, &q, &cost, lambda, &sink, &lp).unwrap();
            assert!(report.all_passed(), "lambda {lambda}\n{report}");
        }
    }

    #[test]
    fn gap_shrinks_on_lambda_grid() {
        let cost = array![[0.0, 2.0, 1.0], [1.5, 0.0, 2.5], [0.5, 1.0, 0.0]];
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.3, 0.5];
        let d_w = solve_transport_lp(&p, &q, &cost).unwrap().value;
        let grid: Vec<f64> = std::iter::once(0.5)
            .chain((1..=30).map(f64::from))
            .collect();
        let opts = SinkhornOptions {
            tol: 1e-12,
            max_iter: 1_000_000,
        };
        let gaps: Vec<f64> = grid
            .iter()
            .map(|&l| (sinkhorn_auto(&p, &q, &cost, l, opts).unwrap().d_s - d_w).abs())
            .collect();
        for w in gaps.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{gaps:?}");
        }
    }
}
