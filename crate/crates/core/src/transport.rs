//! Exact discrete optimal transport.
//!
//! The transportation problem is solved with a dense transportation simplex:
//! north-west-corner start, potentials from the spanning-tree basis, and
//! Bland's rule for both the entering and the leaving cell. The final basis
//! yields the dual potentials, which certify optimality on their own.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tree::{cost_matrix, ScenarioTree};

/// Marginals must sum to one within this tolerance.
pub const MARGINAL_SUM_TOL: f64 = 1e-12;

/// A joint distribution together with the marginals it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Array2<f64>,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub fn dim(&self) -> (usize, usize) {
        self.matrix.dim()
    }

    /// `Σ π_ij c_ij`.
    pub fn cost(&self, cost: &Array2<f64>) -> f64 {
        self.matrix
            .iter()
            .zip(cost.iter())
            .map(|(x, c)| x * c)
            .sum()
    }

    /// ∞-norm violation of the row and column marginals.
    pub fn marginal_error(&self) -> f64 {
        let rows = self
            .matrix
            .rows()
            .into_iter()
            .zip(&self.row_marginal)
            .map(|(row, p)| (row.sum() - p).abs());
        let cols = self
            .matrix
            .columns()
            .into_iter()
            .zip(&self.col_marginal)
            .map(|(col, q)| (col.sum() - q).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        self.matrix.sum()
    }
}

/// Optimal transport plan with dual potentials from the final basis.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub plan: TransportPlan,
    pub dual_row: Vec<f64>,
    pub dual_col: Vec<f64>,
    pub pivots: usize,
}

/// Residuals of the primal-dual optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpCertificate {
    /// `max(λ_i + μ_j − c_ij, 0)` over all cells.
    pub dual_violation: f64,
    /// `max |λ_i + μ_j − c_ij|` over cells carrying mass above 1e-12.
    pub slackness_residual: f64,
    /// `|Σ p λ + Σ q μ − value|`.
    pub duality_gap: f64,
    pub marginal_error: f64,
    pub min_entry: f64,
}

impl LpCertificate {
    pub fn holds(&self) -> bool {
        self.dual_violation <= 1e-9
            && self.slackness_residual <= 1e-8
            && self.duality_gap <= 1e-8
            && self.marginal_error <= 1e-10
            && self.min_entry >= 0.0
    }
}

impl LpSolution {
    pub fn certificate(&self, cost: &Array2<f64>) -> LpCertificate {
        let mut dual_violation = 0.0f64;
        let mut slackness_residual = 0.0f64;
        for ((i, j), &c) in cost.indexed_iter() {
            let reduced = self.dual_row[i] + self.dual_col[j] - c;
            dual_violation = dual_violation.max(reduced);
            if self.plan.matrix[[i, j]] > 1e-12 {
                slackness_residual = slackness_residual.max(reduced.abs());
            }
        }
        let dual_value: f64 = dot(&self.plan.row_marginal, &self.dual_row)
            + dot(&self.plan.col_marginal, &self.dual_col);
        LpCertificate {
            dual_violation,
            slackness_residual,
            duality_gap: (dual_value - self.value).abs(),
            marginal_error: self.plan.marginal_error(),
            min_entry: self
                .plan
                .matrix
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn validate_marginal(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidMarginal(format!("{name} is empty")));
    }
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidMarginal(format!(
            "{name} has a nonpositive entry {x}"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > MARGINAL_SUM_TOL {
        return Err(Error::InvalidMarginal(format!("{name} sums to {sum}")));
    }
    Ok(())
}

pub(crate) fn validate_problem(p: &[f64], q: &[f64], cost: &Array2<f64>) -> Result<()> {
    validate_marginal("row marginal", p)?;
    validate_marginal("column marginal", q)?;
    if cost.dim() != (p.len(), q.len()) {
        return Err(Error::DimensionMismatch(format!(
            "cost is {:?}, marginals are {} and {}",
            cost.dim(),
            p.len(),
            q.len()
        )));
    }
    if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::NonFiniteCost(i, j));
    }
    Ok(())
}

/// Solves `min Σ π_ij c_ij` over couplings of `p` and `q`.
pub fn solve_transport_lp(p: &[f64], q: &[f64], cost: &Array2<f64>) -> Result<LpSolution> {
    validate_problem(p, q, cost)?;
    TransportSimplex::new(p, q, cost).solve()
}

/// Plain (filtration-blind) Wasserstein distance of order `r` between the
/// leaf distributions of two trees.
pub fn wasserstein_distance(a: &ScenarioTree, b: &ScenarioTree, r: f64) -> Result<f64> {
    let cost = cost_matrix(a, b, r)?;
    let lp = solve_transport_lp(&a.leaf_probs(), &b.leaf_probs(), &cost)?;
    Ok(lp.value.max(0.0).powf(1.0 / r))
}

struct TransportSimplex<'a> {
    p: &'a [f64],
    q: &'a [f64],
    cost: &'a Array2<f64>,
    flow: Array2<f64>,
    basic: Array2<bool>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> TransportSimplex<'a> {
    fn new(p: &'a [f64], q: &'a [f64], cost: &'a Array2<f64>) -> Self {
        let (n, m) = cost.dim();
        let mut s = Self {
            p,
            q,
            cost,
            flow: Array2::zeros((n, m)),
            basic: Array2::from_elem((n, m), false),
            u: vec![0.0; n],
            v: vec![0.0; m],
        };
        s.north_west_corner();
        s
    }

    /// Staircase start: always exactly n + m − 1 basic cells forming a
    /// spanning tree, degenerate cells included.
    fn north_west_corner(&mut self) {
        let (n, m) = self.cost.dim();
        let mut supply = self.p.to_vec();
        let mut demand = self.q.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = supply[i].min(demand[j]);
            self.flow[[i, j]] = x;
            self.basic[[i, j]] = true;
            supply[i] -= x;
            demand[j] -= x;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let (n, m) = self.cost.dim();
        let mut row_adj = vec![Vec::new(); n];
        let mut col_adj = vec![Vec::new(); m];
        for ((i, j), &b) in self.basic.indexed_iter() {
            if b {
                row_adj[i].push(j);
                col_adj[j].push(i);
            }
        }
        (row_adj, col_adj)
    }

    /// Potentials with `u[0] = 0` and `u_i + v_j = c_ij` on the basis.
    fn potentials(&mut self, row_adj: &[Vec<usize>], col_adj: &[Vec<usize>]) {
        let (n, m) = self.cost.dim();
        let mut row_done = vec![false; n];
        let mut col_done = vec![false; m];
        // Tree nodes: rows are 0..n, columns n..n+m.
        let mut stack = vec![0usize];
        self.u[0] = 0.0;
        row_done[0] = true;
        while let Some(node) = stack.pop() {
            if node < n {
                let i = node;
                for &j in &row_adj[i] {
                    if !col_done[j] {
                        self.v[j] = self.cost[[i, j]] - self.u[i];
                        col_done[j] = true;
                        stack.push(n + j);
                    }
                }
            } else {
                let j = node - n;
                for &i in &col_adj[j] {
                    if !row_done[i] {
                        self.u[i] = self.cost[[i, j]] - self.v[j];
                        row_done[i] = true;
                        stack.push(i);
                    }
                }
            }
        }
        debug_assert!(row_done.iter().chain(&col_done).all(|&d| d));
    }

    /// Basis cells on the tree path from column `j` to row `i`, starting
    /// next to column `j`.
    fn cycle(
        &self,
        i: usize,
        j: usize,
        row_adj: &[Vec<usize>],
        col_adj: &[Vec<usize>],
    ) -> Vec<(usize, usize)> {
        let n = self.cost.nrows();
        let total = n + self.cost.ncols();
        let mut prev = vec![usize::MAX; total];
        let mut queue = std::collections::VecDeque::from([i]);
        prev[i] = i;
        while let Some(node) = queue.pop_front() {
            if node == n + j {
                break;
            }
            let next: Box<dyn Iterator<Item = usize>> = if node < n {
                Box::new(row_adj[node].iter().map(|&c| n + c))
            } else {
                Box::new(col_adj[node - n].iter().copied())
            };
            for nb in next {
                if prev[nb] == usize::MAX {
                    prev[nb] = node;
                    queue.push_back(nb);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = n + j;
        while node != i {
            let p = prev[node];
            let cell = if node < n {
                (node, p - n)
            } else {
                (p, node - n)
            };
            cells.push(cell);
            node = p;
        }
        cells
    }

    fn solve(mut self) -> Result<LpSolution> {
        let (n, m) = self.cost.dim();
        let scale = self.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let tol = 1e-12 * scale;
        let max_pivots = 50 * n * m + 1000;
        let mut pivots = 0;
        loop {
            let (row_adj, col_adj) = self.adjacency();
            self.potentials(&row_adj, &col_adj);

            // Bland: lowest-index cell with negative reduced cost enters.
            let entering = self
                .cost
                .indexed_iter()
                .find(|&((i, j), &c)| !self.basic[[i, j]] && c - self.u[i] - self.v[j] < -tol);
            let Some(((ei, ej), _)) = entering.map(|(ix, c)| (ix, *c)) else {
                break;
            };
            if pivots == max_pivots {
                return Err(Error::LpFailure(format!(
                    "transportation simplex did not terminate after {pivots} pivots"
                )));
            }
            pivots += 1;

            let path = self.cycle(ei, ej, &row_adj, &col_adj);
            // Cells at even positions lose flow, odd positions gain it.
            let theta = path
                .iter()
                .step_by(2)
                .map(|&c| self.flow[c])
                .fold(f64::INFINITY, f64::min);
            let leaving = path
                .iter()
                .step_by(2)
                .filter(|&&c| self.flow[c] <= theta)
                .min_by_key(|&&(i, j)| i * m + j)
                .copied()
                .expect("cycle has a decreasing cell");
            for (k, &c) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[c] = (self.flow[c] - theta).max(0.0);
                } else {
                    self.flow[c] += theta;
                }
            }
            self.flow[[ei, ej]] = theta;
            self.flow[leaving] = 0.0;
            self.basic[leaving] = false;
            self.basic[[ei, ej]] = true;
        }

        let value = self
            .flow
            .iter()
            .zip(self.cost.iter())
            .map(|(x, c)| x * c)
            .sum();
        Ok(LpSolution {
            value,
            plan: TransportPlan {
                matrix: self.flow,
                row_marginal: self.p.to_vec(),
                col_marginal: self.q.to_vec(),
            },
            dual_row: self.u,
            dual_col: self.v,
            pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lp::solve_standard_form;
    use ndarray::array;
    use proptest::prelude::*;

    /// Enumerates every vertex of the transportation polytope by trying all
    /// spanning sets of n + m − 1 cells and solving for the flows.
    fn brute_force_value(p: &[f64], q: &[f64], cost: &Array2<f64>) -> f64 {
        let (n, m) = cost.dim();
        let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
        let k = n + m - 1;
        let mut best = f64::INFINITY;
        let total = cells.len();
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let chosen: Vec<_> = (0..total)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| cells[b])
                .collect();
            // Peel leaves: a row or column with a single chosen cell fixes its flow.
            let mut flow = vec![None; total];
            let mut sup = p.to_vec();
            let mut dem = q.to_vec();
            let mut remaining = chosen.clone();
            let mut ok = true;
            while !remaining.is_empty() {
                let pick = remaining.iter().position(|&(i, j)| {
                    remaining.iter().filter(|c| c.0 == i).count() == 1
                        || remaining.iter().filter(|c| c.1 == j).count() == 1
                });
                let Some(idx) = pick else {
                    ok = false;
                    break;
                };
                let (i, j) = remaining.remove(idx);
                let row_single = !remaining.iter().any(|c| c.0 == i);
                let x = if row_single { sup[i] } else { dem[j] };
                sup[i] -= x;
                dem[j] -= x;
                flow[i * m + j] = Some(x);
            }
            if !ok
                || sup.iter().chain(&dem).any(|r| r.abs() > 1e-12)
                || flow.iter().flatten().any(|&x| x < -1e-12)
            {
                continue;
            }
            let value: f64 = flow
                .iter()
                .enumerate()
                .filter_map(|(idx, x)| x.map(|x| x * cost[[idx / m, idx % m]]))
                .sum();
            best = best.min(value);
        }
        best
    }

    #[test]
    fn information_pair_flat_plan() {
        let cost = array![[0.1, 2.1], [2.0, 0.0]];
        let lp = solve_transport_lp(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((lp.value - 0.05).abs() < 1e-12);
        assert_eq!(lp.plan.matrix, array![[0.5, 0.0], [0.0, 0.5]]);
        assert!(lp.certificate(&cost).holds());
    }

    #[test]
    fn zero_diagonal_cost_gives_diagonal_plan() {
        let p = [0.2, 0.5, 0.3];
        let cost = array![[0.0, 1.0, 4.0], [2.0, 0.0, 1.0], [3.0, 5.0, 0.0]];
        let lp = solve_transport_lp(&p, &p, &cost).unwrap();
        assert_eq!(lp.value, 0.0);
        for (i, &pi) in p.iter().enumerate() {
            for j in 0..3 {
                let expected = if i == j { pi } else { 0.0 };
                assert!((lp.plan.matrix[[i, j]] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_by_two_against_vertex_enumeration() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let (p, q) = ([0.3, 0.7], [0.4, 0.6]);
        let lp = solve_transport_lp(&p, &q, &cost).unwrap();
        assert!((lp.value - 0.1).abs() < 1e-12);
        assert!((brute_force_value(&p, &q, &cost) - 0.1).abs() < 1e-12);
        let expected = array![[0.3, 0.0], [0.1, 0.6]];
        for (x, y) in lp.plan.matrix.iter().zip(expected.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            solve_transport_lp(&[0.5, 0.6], &[0.5, 0.5], &cost),
            Err(Error::InvalidMarginal(_))
        ));
        assert!(matches!(
            solve_transport_lp(&[1.0, 0.0], &[0.5, 0.5], &cost),
            Err(Error::InvalidMarginal(_))
        ));
        let bad = array![[0.0, f64::NAN], [1.0, 0.0]];
        assert!(matches!(
            solve_transport_lp(&[0.5, 0.5], &[0.5, 0.5], &bad),
            Err(Error::NonFiniteCost(0, 1))
        ));
        assert!(matches!(
            solve_transport_lp(&[1.0], &[0.5, 0.5], &cost),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn wasserstein_on_trees() {
        let (l, r) = fixtures::information_pair(0.1);
        assert!((wasserstein_distance(&l, &r, 1.0).unwrap() - 0.05).abs() < 1e-12);
        let (a, _) = fixtures::three_stage_pair();
        assert!(wasserstein_distance(&a, &a, 2.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn three_stage_pair_against_generic_lp() {
        let (a, b) = fixtures::three_stage_pair();
        let cost = cost_matrix(&a, &b, 1.0).unwrap();
        let (p, q) = (a.leaf_probs(), b.leaf_probs());
        let lp = solve_transport_lp(&p, &q, &cost).unwrap();
        assert!(lp.certificate(&cost).holds());

        let (n, m) = cost.dim();
        let mut rows = Array2::zeros((n + m, n * m));
        for i in 0..n {
            for j in 0..m {
                rows[[i, i * m + j]] = 1.0;
                rows[[n + j, i * m + j]] = 1.0;
            }
        }
        let b_vec: Vec<f64> = p.iter().chain(&q).copied().collect();
        let c: Vec<f64> = cost.iter().copied().collect();
        let generic = solve_standard_form(&rows, &b_vec, &c).unwrap();
        assert!((generic.value - lp.value).abs() < 1e-10);
        assert!(wasserstein_distance(&a, &b, 1.0).unwrap() > 0.0);
    }

    fn probability_vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, len).prop_map(move |w| {
            let s: f64 = w.iter().sum();
            let mut v: Vec<f64> = w.iter().map(|x| x / s).collect();
            let head: f64 = v[..len - 1].iter().sum();
            v[len - 1] = 1.0 - head;
            v
        })
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Array2<f64>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, m)| {
            (
                probability_vector(n),
                probability_vector(m),
                prop::collection::vec(0.0f64..10.0, n * m)
                    .prop_map(move |c| Array2::from_shape_vec((n, m), c).unwrap()),
            )
        })
    }

    proptest! {
        #[test]
        fn certificate_holds((p, q, cost) in instance()) {
            let lp = solve_transport_lp(&p, &q, &cost).unwrap();
            let cert = lp.certificate(&cost);
            prop_assert!(cert.holds(), "{cert:?}");
        }

        #[test]
        fn small_instances_match_enumeration(
            (p, q, cost) in (2usize..=2, 2usize..=3).prop_flat_map(|(n, m)| (
                probability_vector(n),
                probability_vector(m),
                prop::collection::vec(0.0f64..10.0, n * m)
                    .prop_map(move |c| Array2::from_shape_vec((n, m), c).unwrap()),
            ))
        ) {
            let lp = solve_transport_lp(&p, &q, &cost).unwrap();
            prop_assert!((lp.value - brute_force_value(&p, &q, &cost)).abs() < 1e-12);
        }

        #[test]
        fn scaling_and_row_permutation((p, q, cost) in instance(), c in 0.1f64..10.0) {
            let base = solve_transport_lp(&p, &q, &cost).unwrap().value;
            let scaled = solve_transport_lp(&p, &q, &(&cost * c)).unwrap().value;
            prop_assert!((scaled - c * base).abs() < 1e-9 * (1.0 + c * base));

            let n = p.len();
            let perm: Vec<usize> = (0..n).rev().collect();
            let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let pc = Array2::from_shape_fn(cost.dim(), |(i, j)| cost[[perm[i], j]]);
            let permuted = solve_transport_lp(&pp, &q, &pc).unwrap().value;
            prop_assert!((permuted - base).abs() < 1e-10);
        }
    }
}
