//! Process distances between scenario trees.
//!
//! Both methods run the same backward recursion over node pairs. At every
//! pair `(i, j)` of stage `t` a transport problem between the conditional
//! successor distributions is solved, with the values of the child pairs at
//! stage `t + 1` as costs. The leaf-level costs are the `r`-th powers of the
//! path distances, and all values stay in that power domain until the root.
//!
//! [`nested_exact`] solves each subproblem as a linear program,
//! [`nested_sinkhorn`] replaces it by its entropic relaxation and propagates
//! the entropic objective. The leaf coupling is recovered by multiplying the
//! conditional plans along every pair of paths.

use std::ops::Range;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::solve_standard_form;
use crate::report::{Check, Report};
use crate::sinkhorn::{entropic_bounds, entropy, sinkhorn_auto, SinkhornOptions};
use crate::transport::{solve_transport_lp, TransportPlan};
use crate::tree::{check_order, cost_matrix, generate_random_tree, ScenarioTree};

/// Default cap on leaf pairs for [`flat_nested_lp`].
pub const FLAT_LP_MAX_PAIRS: usize = 200 * 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Sinkhorn,
}

/// Solution of the conditional problem at one node pair.
#[derive(Debug, Clone)]
pub struct PairSolution {
    /// Node indices in the two trees.
    pub node_a: usize,
    pub node_b: usize,
    /// Conditional plan over the children of `node_a` × children of `node_b`.
    pub plan: Array2<f64>,
    /// Optimal value of the subproblem; the entropic objective for Sinkhorn.
    pub value: f64,
    pub dual_row: Vec<f64>,
    pub dual_col: Vec<f64>,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    pub iterations: usize,
    pub marginal_error: f64,
    pub converged: bool,
}

/// All node-pair solutions of one stage, indexed by stage positions.
#[derive(Debug, Clone)]
pub struct StageTable {
    pub stage: usize,
    pub rows: usize,
    pub cols: usize,
    pub pairs: Vec<PairSolution>,
}

impl StageTable {
    pub fn get(&self, pos_a: usize, pos_b: usize) -> &PairSolution {
        &self.pairs[pos_a * self.cols + pos_b]
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct NestedResult {
    /// Distance of order `r`: the `r`-th root of `cost_power`.
    pub value: f64,
    /// Signed `r`-th root of `entropic_power`; equals `value` for the exact method.
    pub value_with_entropy: f64,
    /// `Σ π_ij d_ij^r` over the composed plan.
    pub cost_power: f64,
    /// Root value of the recursion.
    pub entropic_power: f64,
    /// `stage_tables[t]` holds the pairs at stage `t`, for `t < T`.
    pub stage_tables: Vec<StageTable>,
    pub composed_plan: TransportPlan,
    pub method: Method,
    pub lambda: Option<f64>,
    /// `H` of the composed plan.
    pub total_entropy: f64,
    pub r: f64,
    pub converged: bool,
    pub tree_a: ScenarioTree,
    pub tree_b: ScenarioTree,
}

impl NestedResult {
    pub fn stages(&self) -> usize {
        self.tree_a.height()
    }

    pub fn total_iterations(&self) -> usize {
        self.stage_tables
            .iter()
            .flat_map(|s| &s.pairs)
            .map(|p| p.iterations)
            .sum()
    }

    pub fn subproblems_per_stage(&self) -> Vec<usize> {
        self.stage_tables.iter().map(StageTable::len).collect()
    }
}

pub(crate) fn signed_root(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else {
        x.signum() * x.abs().powf(1.0 / r)
    }
}

fn check_pair(a: &ScenarioTree, b: &ScenarioTree, r: f64) -> Result<()> {
    check_order(r)?;
    if a.height() != b.height() {
        return Err(Error::HeightMismatch(a.height(), b.height()));
    }
    Ok(())
}

/// Solves one conditional subproblem.
type Solver<'s> = dyn Fn(&[f64], &[f64], &Array2<f64>) -> Result<Solved> + Sync + 's;

struct Solved {
    plan: Array2<f64>,
    value: f64,
    dual_row: Vec<f64>,
    dual_col: Vec<f64>,
    iterations: usize,
    marginal_error: f64,
    converged: bool,
}

fn recurse(
    a: &ScenarioTree,
    b: &ScenarioTree,
    r: f64,
    method: Method,
    lambda: Option<f64>,
    solve: &Solver<'_>,
) -> Result<NestedResult> {
    check_pair(a, b, r)?;
    let height = a.height();
    let mut values = cost_matrix(a, b, r)?;
    let mut tables = Vec::with_capacity(height);
    for t in (0..height).rev() {
        let (nodes_a, nodes_b) = (a.stage_nodes(t), b.stage_nodes(t));
        let cols = nodes_b.len();
        let next = &values;
        let pairs = (0..nodes_a.len() * cols)
            .into_par_iter()
            .map(|k| {
                let (na, nb) = (nodes_a[k / cols], nodes_b[k % cols]);
                let (ca, cb) = (a.children(na), b.children(nb));
                let cost = Array2::from_shape_fn((ca.len(), cb.len()), |(x, y)| {
                    next[[a.stage_position(ca[x]), b.stage_position(cb[y])]]
                });
                let p = a.child_probs(na);
                let q = b.child_probs(nb);
                let s = solve(&p, &q, &cost)?;
                Ok(PairSolution {
                    node_a: na,
                    node_b: nb,
                    plan: s.plan,
                    value: s.value,
                    dual_row: s.dual_row,
                    dual_col: s.dual_col,
                    row_marginal: p,
                    col_marginal: q,
                    iterations: s.iterations,
                    marginal_error: s.marginal_error,
                    converged: s.converged,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        values = Array2::from_shape_fn((nodes_a.len(), cols), |(x, y)| pairs[x * cols + y].value);
        tables.push(StageTable {
            stage: t,
            rows: nodes_a.len(),
            cols,
            pairs,
        });
    }
    tables.reverse();
    let entropic_power = values[[0, 0]];

    let plan = compose(a, b, &tables);
    let cost = cost_matrix(a, b, r)?;
    let cost_power = plan.cost(&cost);
    let total_entropy = entropy(&plan.matrix)?;
    let converged = tables.iter().flat_map(|s| &s.pairs).all(|p| p.converged);
    let (value, value_with_entropy) = match method {
        Method::Exact => {
            let v = signed_root(entropic_power.max(0.0), r);
            (v, v)
        }
        Method::Sinkhorn => (
            signed_root(cost_power.max(0.0), r),
            signed_root(entropic_power, r),
        ),
    };
    Ok(NestedResult {
        value,
        value_with_entropy,
        cost_power,
        entropic_power,
        stage_tables: tables,
        composed_plan: plan,
        method,
        lambda,
        total_entropy,
        r,
        converged,
        tree_a: a.clone(),
        tree_b: b.clone(),
    })
}

/// Pushes unit mass from the root pair through the conditional plans.
fn compose(a: &ScenarioTree, b: &ScenarioTree, tables: &[StageTable]) -> TransportPlan {
    let mut mass = Array2::from_elem((1, 1), 1.0);
    for (t, table) in tables.iter().enumerate() {
        let mut next = Array2::zeros((a.stage_nodes(t + 1).len(), b.stage_nodes(t + 1).len()));
        for pair in &table.pairs {
            let m = mass[[a.stage_position(pair.node_a), b.stage_position(pair.node_b)]];
            let (ca, cb) = (a.children(pair.node_a), b.children(pair.node_b));
            for (x, &ka) in ca.iter().enumerate() {
                for (y, &kb) in cb.iter().enumerate() {
                    next[[a.stage_position(ka), b.stage_position(kb)]] = m * pair.plan[[x, y]];
                }
            }
        }
        mass = next;
    }
    TransportPlan {
        matrix: mass,
        row_marginal: a.leaf_probs(),
        col_marginal: b.leaf_probs(),
    }
}

/// Exact nested distance of order `r` by backward recursion.
pub fn nested_exact(a: &ScenarioTree, b: &ScenarioTree, r: f64) -> Result<NestedResult> {
    let solve = |p: &[f64], q: &[f64], cost: &Array2<f64>| {
        let lp = solve_transport_lp(p, q, cost)?;
        Ok(Solved {
            marginal_error: lp.plan.marginal_error(),
            plan: lp.plan.matrix,
            value: lp.value,
            dual_row: lp.dual_row,
            dual_col: lp.dual_col,
            iterations: lp.pivots,
            converged: true,
        })
    };
    recurse(a, b, r, Method::Exact, None, &solve)
}

/// Nested Sinkhorn divergence of order `r`.
///
/// Every conditional problem is solved to `opts.tol / T` so that the composed
/// plan meets the flat constraints to `opts.tol` overall. Subproblems that
/// exhaust `opts.max_iter` leave `converged = false` on the result.
pub fn nested_sinkhorn(
    a: &ScenarioTree,
    b: &ScenarioTree,
    r: f64,
    lambda: f64,
    opts: SinkhornOptions,
) -> Result<NestedResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let sub = SinkhornOptions {
        tol: opts.tol / a.height().max(1) as f64,
        ..opts
    };
    let solve = |p: &[f64], q: &[f64], cost: &Array2<f64>| {
        let s = sinkhorn_auto(p, q, cost, lambda, sub)?;
        let dual = |logs: &[f64]| logs.iter().map(|x| (x + 0.5) / lambda).collect();
        Ok(Solved {
            dual_row: dual(&s.log_scaling_row),
            dual_col: dual(&s.log_scaling_col),
            plan: s.plan.matrix,
            value: s.de_s,
            iterations: s.iterations,
            marginal_error: s.marginal_error,
            converged: s.converged,
        })
    };
    recurse(a, b, r, Method::Sinkhorn, Some(lambda), &solve)
}

/// Leaf-position range below every node.
fn leaf_ranges(tree: &ScenarioTree) -> Vec<Range<usize>> {
    let mut ranges = vec![0..0; tree.len()];
    for (pos, &leaf) in tree.leaves().iter().enumerate() {
        ranges[leaf] = pos..pos + 1;
    }
    for t in (0..tree.height()).rev() {
        for &k in tree.stage_nodes(t) {
            let ch = tree.children(k);
            ranges[k] = ranges[ch[0]].start..ranges[ch[ch.len() - 1]].end;
        }
    }
    ranges
}

#[derive(Debug, Clone)]
pub struct FlatSolution {
    /// Distance of order `r`.
    pub value: f64,
    pub value_power: f64,
    pub plan: Array2<f64>,
    pub constraints: usize,
}

/// Linear constraints of nested-feasible leaf couplings, one row per
/// non-redundant successor condition plus total mass one.
fn flat_constraints(a: &ScenarioTree, b: &ScenarioTree) -> (Array2<f64>, Vec<f64>) {
    let (ra, rb) = (leaf_ranges(a), leaf_ranges(b));
    let m = b.leaves().len();
    let vars = a.leaves().len() * m;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for t in 0..a.height() {
        for &i in a.stage_nodes(t) {
            for &j in b.stage_nodes(t) {
                let ci = a.children(i);
                for &child in &ci[..ci.len() - 1] {
                    let mut row = vec![0.0; vars];
                    let prob = a.node(child).cond_prob;
                    for x in ra[i].clone() {
                        let inside = ra[child].contains(&x);
                        for y in rb[j].clone() {
                            row[x * m + y] = if inside { 1.0 - prob } else { -prob };
                        }
                    }
                    rows.push(row);
                }
                let cj = b.children(j);
                for &child in &cj[..cj.len() - 1] {
                    let mut row = vec![0.0; vars];
                    let prob = b.node(child).cond_prob;
                    for x in ra[i].clone() {
                        for y in rb[j].clone() {
                            row[x * m + y] = if rb[child].contains(&y) {
                                1.0 - prob
                            } else {
                                -prob
                            };
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    rows.push(vec![1.0; vars]);
    let mut rhs = vec![0.0; rows.len()];
    *rhs.last_mut().unwrap() = 1.0;
    let flat: Vec<f64> = rows.concat();
    (
        Array2::from_shape_vec((rhs.len(), vars), flat).unwrap(),
        rhs,
    )
}

/// Nested distance as one linear program over leaf pairs, solved by a dense
/// simplex. Slow; an independent reference for [`nested_exact`].
pub fn flat_nested_lp(a: &ScenarioTree, b: &ScenarioTree, r: f64) -> Result<FlatSolution> {
    flat_nested_lp_capped(a, b, r, FLAT_LP_MAX_PAIRS)
}

pub fn flat_nested_lp_capped(
    a: &ScenarioTree,
    b: &ScenarioTree,
    r: f64,
    max_pairs: usize,
) -> Result<FlatSolution> {
    check_pair(a, b, r)?;
    let (n, m) = (a.leaves().len(), b.leaves().len());
    if n * m > max_pairs {
        return Err(Error::TooLarge {
            pairs: n * m,
            cap: max_pairs,
        });
    }
    let cost = cost_matrix(a, b, r)?;
    let (matrix, rhs) = flat_constraints(a, b);
    let out = solve_standard_form(&matrix, &rhs, cost.as_slice().unwrap())?;
    Ok(FlatSolution {
        value: out.value.max(0.0).powf(1.0 / r),
        value_power: out.value,
        plan: Array2::from_shape_vec((n, m), out.x).unwrap(),
        constraints: rhs.len(),
    })
}

/// Block sums of a leaf coupling over every node pair of every stage.
fn aggregate(a: &ScenarioTree, b: &ScenarioTree, plan: &Array2<f64>) -> Vec<Array2<f64>> {
    let height = a.height();
    let mut levels = vec![plan.clone()];
    for t in (0..height).rev() {
        let finer = levels.last().unwrap();
        let coarse = Array2::from_shape_fn(
            (a.stage_nodes(t).len(), b.stage_nodes(t).len()),
            |(x, y)| {
                let (i, j) = (a.stage_nodes(t)[x], b.stage_nodes(t)[y]);
                a.children(i)
                    .iter()
                    .flat_map(|&ci| {
                        b.children(j)
                            .iter()
                            .map(move |&cj| finer[[a.stage_position(ci), b.stage_position(cj)]])
                    })
                    .sum()
            },
        );
        levels.push(coarse);
    }
    levels.reverse();
    levels
}

/// Largest violation of the nested (conditional-marginal) constraints by a
/// leaf coupling, including the total-mass condition.
pub fn flat_constraint_residual(a: &ScenarioTree, b: &ScenarioTree, plan: &Array2<f64>) -> f64 {
    let levels = aggregate(a, b, plan);
    let mut worst = (plan.sum() - 1.0).abs();
    for t in 0..a.height() {
        for (x, &i) in a.stage_nodes(t).iter().enumerate() {
            for (y, &j) in b.stage_nodes(t).iter().enumerate() {
                let mass = levels[t][[x, y]];
                let fine = &levels[t + 1];
                for &ci in a.children(i) {
                    let px = a.stage_position(ci);
                    let s: f64 = b
                        .children(j)
                        .iter()
                        .map(|&cj| fine[[px, b.stage_position(cj)]])
                        .sum();
                    worst = worst.max((s - a.node(ci).cond_prob * mass).abs());
                }
                for &cj in b.children(j) {
                    let py = b.stage_position(cj);
                    let s: f64 = a
                        .children(i)
                        .iter()
                        .map(|&ci| fine[[a.stage_position(ci), py]])
                        .sum();
                    worst = worst.max((s - b.node(cj).cond_prob * mass).abs());
                }
            }
        }
    }
    worst
}

/// Checks that a nested Sinkhorn result solves the flat entropic program:
/// feasibility of the composed plan, equality of the flat entropic objective
/// with the recursion value, and the Gibbs form of the composed plan.
pub fn verify_entropic_equivalence(result: &NestedResult) -> Result<Report> {
    let lambda = match (result.method, result.lambda) {
        (Method::Sinkhorn, Some(l)) => l,
        _ => {
            return Err(Error::InvalidArgument(
                "entropic equivalence needs a nested Sinkhorn result".into(),
            ))
        }
    };
    if !result.converged {
        return Err(Error::Unconverged("nested Sinkhorn subproblems".into()));
    }
    let (a, b) = (&result.tree_a, &result.tree_b);
    let plan = &result.composed_plan.matrix;
    let cost = cost_matrix(a, b, result.r)?;

    let feasibility = flat_constraint_residual(a, b, plan);
    let flat_objective = result.composed_plan.cost(&cost) - entropy(plan)? / lambda;

    // log π_ij + λ d_ij^r against the stagewise potentials along both paths.
    let height = a.height();
    let leaf_paths_a: Vec<Vec<usize>> = a.leaves().iter().map(|&k| a.path(k)).collect();
    let leaf_paths_b: Vec<Vec<usize>> = b.leaves().iter().map(|&k| b.path(k)).collect();
    let mut gibbs = 0.0f64;
    for ((x, y), &pi) in plan.indexed_iter() {
        if pi == 0.0 {
            continue;
        }
        let (pa, pb) = (&leaf_paths_a[x], &leaf_paths_b[y]);
        let mut rhs = 0.0;
        for t in 0..height {
            let pair = result.stage_tables[t].get(a.stage_position(pa[t]), b.stage_position(pb[t]));
            let ix = a
                .children(pa[t])
                .iter()
                .position(|&c| c == pa[t + 1])
                .unwrap();
            let iy = b
                .children(pb[t])
                .iter()
                .position(|&c| c == pb[t + 1])
                .unwrap();
            rhs += lambda * (pair.dual_row[ix] + pair.dual_col[iy]) - 1.0;
            if t > 0 {
                rhs -= lambda * pair.value;
            }
        }
        gibbs = gibbs.max((pi.ln() + lambda * cost[[x, y]] - rhs).abs());
    }

    Ok(Report {
        checks: vec![
            Check::small("composed plan is nested-feasible", feasibility, 1e-7),
            Check::small(
                "flat entropic objective equals recursion value",
                flat_objective - result.entropic_power,
                1e-7,
            ),
            Check::small("composed plan has Gibbs form", gibbs, 1e-6),
        ],
    })
}

/// Largest successor count over the inner nodes of either tree, as used by
/// the entropy bound of nested couplings.
fn branching_log_bound(a: &ScenarioTree, b: &ScenarioTree) -> f64 {
    let m = a.max_branching().max(1) as f64;
    let mt = b.max_branching().max(1) as f64;
    a.height() as f64 * (m.ln() + mt.ln())
}

/// Comparison bounds between an exact and an entropic nested result on the
/// same pair of trees, in the power domain.
pub fn bound_report(exact: &NestedResult, sink: &NestedResult) -> Result<Report> {
    let lambda = sink
        .lambda
        .ok_or_else(|| Error::InvalidArgument("second result must be entropic".into()))?;
    if exact.method != Method::Exact {
        return Err(Error::InvalidArgument("first result must be exact".into()));
    }
    let (a, b) = (&sink.tree_a, &sink.tree_b);
    let (p, q) = (a.leaf_probs(), b.leaf_probs());
    let product = Array2::from_shape_fn((p.len(), q.len()), |(i, j)| p[i] * q[j]);
    let nd_w = exact.entropic_power;
    let (nd_s, nde_s) = (sink.cost_power, sink.entropic_power);
    let mut report = entropic_bounds(
        nd_w,
        nd_s,
        nde_s,
        sink.total_entropy,
        exact.total_entropy,
        entropy(&product)?,
        (p.len() as f64).ln() + (q.len() as f64).ln(),
        lambda,
    );
    report.push(Check::le(
        "max gap <= T (log m + log m~)/lambda",
        (nd_s - nd_w).max(nd_w - nde_s),
        branching_log_bound(a, b) / lambda,
        1e-8,
    ));
    Ok(report)
}

/// Solves both methods and checks all comparison bounds.
pub fn nested_bound_report(
    a: &ScenarioTree,
    b: &ScenarioTree,
    r: f64,
    lambda: f64,
    opts: SinkhornOptions,
) -> Result<Report> {
    let exact = nested_exact(a, b, r)?;
    let sink = nested_sinkhorn(a, b, r, lambda, opts)?;
    bound_report(&exact, &sink)
}

#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub report: Report,
    /// Starting value `E β + E γ` at the root pair, less `1/λ` for entropic results.
    pub m0: f64,
    /// The recursion's root value, for comparison with `m0`.
    pub root_value: f64,
    /// `M_t` per stage, indexed by stage positions.
    pub process: Vec<Array2<f64>>,
}

/// Builds the dual process `M_t` from the stored conditional multipliers and
/// checks that it is a martingale under the composed plan.
///
/// At each pair the multipliers are centered by their conditional means, so
/// every increment has zero projection on the preceding stage.
pub fn martingale_check(result: &NestedResult) -> Result<MartingaleReport> {
    if !result.converged {
        return Err(Error::Unconverged("nested subproblems".into()));
    }
    let (a, b) = (&result.tree_a, &result.tree_b);
    let levels = aggregate(a, b, &result.composed_plan.matrix);
    let mean = |w: &[f64], v: &[f64]| w.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();

    let m0 = match result.stage_tables.first() {
        Some(table) => {
            let root = table.get(0, 0);
            mean(&root.row_marginal, &root.dual_row) + mean(&root.col_marginal, &root.dual_col)
                - result.lambda.map_or(0.0, |l| 1.0 / l)
        }
        None => 0.0,
    };

    let mut process = vec![Array2::from_elem((1, 1), m0)];
    let mut projection = 0.0f64;
    let mut drift = 0.0f64;
    for (t, table) in result.stage_tables.iter().enumerate() {
        let current = &process[t];
        let mut next = Array2::zeros(levels[t + 1].dim());
        for pair in &table.pairs {
            let (x, y) = (a.stage_position(pair.node_a), b.stage_position(pair.node_b));
            let eb = mean(&pair.row_marginal, &pair.dual_row);
            let eg = mean(&pair.col_marginal, &pair.dual_col);
            let beta: Vec<f64> = pair.dual_row.iter().map(|v| v - eb).collect();
            let gamma: Vec<f64> = pair.dual_col.iter().map(|v| v - eg).collect();
            projection = projection
                .max(mean(&pair.row_marginal, &beta).abs())
                .max(mean(&pair.col_marginal, &gamma).abs());

            let mass = levels[t][[x, y]];
            let mut expected = 0.0;
            for (u, &ca) in a.children(pair.node_a).iter().enumerate() {
                for (v, &cb) in b.children(pair.node_b).iter().enumerate() {
                    let (cx, cy) = (a.stage_position(ca), b.stage_position(cb));
                    let value = current[[x, y]] + beta[u] + gamma[v];
                    next[[cx, cy]] = value;
                    expected += levels[t + 1][[cx, cy]] * value;
                }
            }
            if mass > 0.0 {
                drift = drift.max((expected / mass - current[[x, y]]).abs());
            }
        }
        process.push(next);
    }

    Ok(MartingaleReport {
        report: Report {
            checks: vec![
                Check::small("conditional expectation of M_t+1 equals M_t", drift, 1e-6),
                Check::small("increments have zero projection", projection, 1e-8),
            ],
        },
        m0,
        root_value: result.entropic_power,
        process,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub nd_s: f64,
    pub nde_s: f64,
    pub nd_w: f64,
    pub time_exact: f64,
    pub time_sinkhorn: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nested Sinkhorn values over a list of regularization parameters, next to
/// the exact value (computed once). Times are wall-clock seconds.
pub fn lambda_sweep(
    a: &ScenarioTree,
    b: &ScenarioTree,
    r: f64,
    lambdas: &[f64],
    opts: SinkhornOptions,
) -> Result<Vec<SweepRow>> {
    if let Some(&l) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::NonPositiveLambda(l));
    }
    let start = Instant::now();
    let exact = nested_exact(a, b, r)?;
    let time_exact = start.elapsed().as_secs_f64();
    lambdas
        .iter()
        .map(|&lambda| {
            let start = Instant::now();
            let s = nested_sinkhorn(a, b, r, lambda, opts)?;
            Ok(SweepRow {
                lambda,
                nd_s: s.value,
                nde_s: s.value_with_entropy,
                nd_w: exact.value,
                time_exact,
                time_sinkhorn: start.elapsed().as_secs_f64(),
                iterations: s.total_iterations(),
                converged: s.converged,
            })
        })
        .collect()
}

/// The regularization grid `0.5, 1, 2, …, 30`.
pub fn default_lambda_grid() -> Vec<f64> {
    std::iter::once(0.5)
        .chain((1..=30).map(f64::from))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub stages: usize,
    pub leaves_a: usize,
    pub leaves_b: usize,
    pub nd_w: f64,
    pub time_exact: f64,
    pub nd_s: f64,
    pub nde_s: f64,
    pub time_sinkhorn: f64,
    /// `nd_w − nde_s`.
    pub difference: f64,
    /// `time_exact / time_sinkhorn`.
    pub acceleration: f64,
    pub converged: bool,
}

/// Exact versus entropic nested distance on random trees of growing height.
///
/// The trees for `T` stages use the first `T + 1` entries of each branching
/// vector, generated from `seed` and `seed + 1`; with a fixed seed the tree
/// for `T` is the tree for `T + 1` cut off at stage `T`.
pub fn bench(
    branching_a: &[usize],
    branching_b: &[usize],
    seed: u64,
    lambda: f64,
    r: f64,
    opts: SinkhornOptions,
) -> Result<Vec<BenchRow>> {
    if branching_a.len() != branching_b.len() {
        return Err(Error::InvalidArgument(format!(
            "branching vectors have {} and {} entries",
            branching_a.len(),
            branching_b.len()
        )));
    }
    (1..branching_a.len())
        .map(|t| {
            let a = generate_random_tree(&branching_a[..=t], seed)?;
            let b = generate_random_tree(&branching_b[..=t], seed.wrapping_add(1))?;
            let start = Instant::now();
            let exact = nested_exact(&a, &b, r)?;
            let time_exact = start.elapsed().as_secs_f64();
            let start = Instant::now();
            let s = nested_sinkhorn(&a, &b, r, lambda, opts)?;
            let time_sinkhorn = start.elapsed().as_secs_f64();
            Ok(BenchRow {
                stages: t,
                leaves_a: a.leaves().len(),
                leaves_b: b.leaves().len(),
                nd_w: exact.value,
                time_exact,
                nd_s: s.value,
                nde_s: s.value_with_entropy,
                time_sinkhorn,
                difference: exact.value - s.value_with_entropy,
                acceleration: time_exact / time_sinkhorn,
                converged: s.converged,
            })
        })
        .collect()
}
