//! Exact solver for the balanced transportation problem.
//!
//! Primal transportation simplex on the spanning-tree basis: northwest-corner
//! start, potentials from the tree, Bland's rule for both the entering cell
//! (first lexicographic cell with negative reduced cost) and the leaving cell
//! (smallest flow on the cycle, lowest `(i, j)` on ties). Bland's rule rules
//! out cycling on degenerate bases and makes plans reproducible.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("transport problem needs at least one source and one sink")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what} at {index} is negative or not finite")]
    BadEntry { what: &'static str, index: String },
    #[error("infeasible masses: supply {supply} vs demand {demand}")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("no optimum after {0} pivots")]
    IterationLimit(usize),
}

/// Balanced transportation instance: move mass `p` onto `q` at unit costs `cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem<S> {
    cost: Array2<S>,
    p: Vec<S>,
    q: Vec<S>,
}

/// Optimal flow and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<S> {
    pub gamma: Array2<S>,
    pub total_cost: S,
}

fn finite<S: Scalar>(x: S) -> bool {
    x.to_f64().is_some_and(f64::is_finite)
}

impl<S: Scalar> TransportProblem<S> {
    pub fn new(cost: Array2<S>, p: Vec<S>, q: Vec<S>) -> Result<Self, SolverError> {
        let (n, m) = cost.dim();
        if n == 0 || m == 0 {
            return Err(SolverError::Empty);
        }
        if p.len() != n || q.len() != m {
            return Err(SolverError::Shape(format!("cost is {n}x{m} but p has {} and q has {} entries", p.len(), q.len())));
        }
        let bad = |x: S| !finite(x) || x < S::zero();
        if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, &c)| bad(c)) {
            return Err(SolverError::BadEntry {
                what: "cost",
                index: format!("({i}, {j})"),
            });
        }
        if let Some(i) = p.iter().position(|&x| bad(x)) {
            return Err(SolverError::BadEntry { what: "p", index: i.to_string() });
        }
        if let Some(j) = q.iter().position(|&x| bad(x)) {
            return Err(SolverError::BadEntry { what: "q", index: j.to_string() });
        }
        let supply: S = p.iter().copied().sum();
        let demand: S = q.iter().copied().sum();
        if supply.abs_diff(demand) > S::mass_tolerance() {
            return Err(SolverError::Unbalanced {
                supply: supply.to_f64().unwrap_or(f64::NAN),
                demand: demand.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(TransportProblem { cost, p, q })
    }

    /// Uniform marginals `1/N` and `1/M`.
    pub fn uniform(cost: Array2<S>) -> Result<Self, SolverError> {
        let (n, m) = cost.dim();
        if n == 0 || m == 0 {
            return Err(SolverError::Empty);
        }
        let p = vec![S::one() / S::from_count(n); n];
        let q = vec![S::one() / S::from_count(m); m];
        Self::new(cost, p, q)
    }

    pub fn cost(&self) -> &Array2<S> {
        &self.cost
    }

    pub fn p(&self) -> &[S] {
        &self.p
    }

    pub fn q(&self) -> &[S] {
        &self.q
    }

    pub fn dim(&self) -> (usize, usize) {
        self.cost.dim()
    }

    pub fn solve(&self) -> Result<TransportPlan<S>, SolverError> {
        solve_transport(self)
    }

    /// `Σ γ_ij · cost_ij`
    pub fn cost_of(&self, gamma: &Array2<S>) -> S {
        gamma.iter().zip(self.cost.iter()).map(|(&g, &c)| g * c).sum()
    }
}

impl<S: Scalar> TransportPlan<S> {
    pub fn row_sums(&self) -> Vec<S> {
        self.gamma.rows().into_iter().map(|r| r.iter().copied().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<S> {
        self.gamma.columns().into_iter().map(|c| c.iter().copied().sum()).collect()
    }

    /// Largest deviation of a row or column sum from its marginal.
    pub fn marginal_error(&self, problem: &TransportProblem<S>) -> S {
        let rows = self.row_sums().into_iter().zip(problem.p()).map(|(a, &b)| a.abs_diff(b));
        let cols = self.col_sums().into_iter().zip(problem.q()).map(|(a, &b)| a.abs_diff(b));
        rows.chain(cols).fold(S::zero(), |acc, x| if x > acc { x } else { acc })
    }
}

struct Basis<S> {
    n: usize,
    m: usize,
    flow: Array2<S>,
    basic: Array2<bool>,
}

impl<S: Scalar> Basis<S> {
    fn northwest(p: &[S], q: &[S]) -> Self {
        let (n, m) = (p.len(), q.len());
        let mut flow = Array2::from_elem((n, m), S::zero());
        let mut basic = Array2::from_elem((n, m), false);
        let (mut a, mut b) = (p.to_vec(), q.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let f = a[i].min_of(b[j]);
            flow[(i, j)] = f;
            basic[(i, j)] = true;
            a[i] -= f;
            b[j] -= f;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i < n - 1 && (a[i] <= S::pivot_tolerance() || j == m - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Basis { n, m, flow, basic }
    }

    /// Tree adjacency: node `i < n` is row `i`, node `n + j` is column `j`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for ((i, j), &b) in self.basic.indexed_iter() {
            if b {
                adj[i].push(self.n + j);
                adj[self.n + j].push(i);
            }
        }
        adj
    }

    fn cell(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.n {
            (a, b - self.n)
        } else {
            (b, a - self.n)
        }
    }

    fn potentials(&self, cost: &Array2<S>, adj: &[Vec<usize>]) -> (Vec<S>, Vec<S>) {
        let mut pot = vec![S::zero(); self.n + self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    let c = cost[self.cell(a, b)];
                    pot[b] = c - pot[a];
                    queue.push_back(b);
                }
            }
        }
        let v = pot.split_off(self.n);
        (pot, v)
    }

    /// Tree path from row `i` to column `j` as the list of basic cells from the column end.
    fn path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<(usize, usize)> {
        let target = self.n + j;
        let mut parent = vec![usize::MAX; self.n + self.m];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        while let Some(a) = queue.pop_front() {
            if a == target {
                break;
            }
            for &b in &adj[a] {
                if parent[b] == usize::MAX {
                    parent[b] = a;
                    queue.push_back(b);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let up = parent[node];
            cells.push(self.cell(node, up));
            node = up;
        }
        cells
    }
}

pub fn solve_transport<S: Scalar>(problem: &TransportProblem<S>) -> Result<TransportPlan<S>, SolverError> {
    let (n, m) = problem.dim();
    let cost = problem.cost();
    let mut basis = Basis::northwest(problem.p(), problem.q());
    let limit = 10_000usize.max(50 * n * m * (n + m));
    let tol = S::pivot_tolerance();

    for _ in 0..limit {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(cost, &adj);
        let entering = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .find(|&(i, j)| !basis.basic[(i, j)] && cost[(i, j)] - u[i] - v[j] < S::zero() - tol);
        let Some((ei, ej)) = entering else {
            for x in basis.flow.iter_mut() {
                if *x < S::zero() {
                    *x = S::zero();
                }
            }
            let total_cost = problem.cost_of(&basis.flow);
            return Ok(TransportPlan {
                gamma: basis.flow,
                total_cost,
            });
        };

        // Cells on the cycle alternate -, +, -, ... starting from the column end.
        let path = basis.path(&adj, ei, ej);
        let leaving = path
            .iter()
            .step_by(2)
            .copied()
            .min_by(|a, b| basis.flow[*a].partial_cmp(&basis.flow[*b]).expect("comparable flows").then(a.cmp(b)))
            .expect("cycle has a decreasing cell");
        let theta = basis.flow[leaving];
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis.flow[c] -= theta;
            } else {
                basis.flow[c] += theta;
            }
        }
        basis.flow[(ei, ej)] = theta;
        basis.flow[leaving] = S::zero();
        basis.basic[leaving] = false;
        basis.basic[(ei, ej)] = true;
    }
    Err(SolverError::IterationLimit(limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_rational::Rational64;

    #[test]
    fn single_cell() {
        let plan = TransportProblem::uniform(array![[0.7_f64]]).unwrap().solve().unwrap();
        assert_eq!(plan.gamma, array![[1.0]]);
        assert!((plan.total_cost - 0.7).abs() < 1e-12);
    }

    #[test]
    fn perfect_matching() {
        let plan = TransportProblem::uniform(array![[0.0, 1.0], [1.0, 0.0]]).unwrap().solve().unwrap();
        assert_eq!(plan.total_cost, 0.0);
        assert_eq!(plan.gamma, array![[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn constant_objective_family() {
        let plan = TransportProblem::uniform(array![[1.0, 2.0], [3.0, 4.0]]).unwrap().solve().unwrap();
        assert_eq!(plan.total_cost, 2.5);
        let r = |a, b| Rational64::new(a, b);
        let exact = TransportProblem::uniform(array![[r(1, 1), r(2, 1)], [r(3, 1), r(4, 1)]]).unwrap().solve().unwrap();
        assert_eq!(exact.total_cost, r(5, 2));
    }

    #[test]
    fn one_source_two_sinks() {
        let prob = TransportProblem::new(array![[0.2_f64, 0.4]], vec![1.0], vec![0.5, 0.5]).unwrap();
        let plan = prob.solve().unwrap();
        assert_eq!(plan.gamma, array![[0.5, 0.5]]);
        assert!((plan.total_cost - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(TransportProblem::new(array![[1.0]], vec![1.0], vec![0.5]).unwrap_err(), SolverError::Unbalanced { supply: 1.0, demand: 0.5 });
        assert!(matches!(TransportProblem::new(array![[-1.0]], vec![1.0], vec![1.0]), Err(SolverError::BadEntry { what: "cost", .. })));
        assert!(matches!(TransportProblem::new(array![[f64::NAN]], vec![1.0], vec![1.0]), Err(SolverError::BadEntry { .. })));
        assert!(matches!(TransportProblem::new(array![[1.0]], vec![1.0, 0.0], vec![1.0]), Err(SolverError::Shape(_))));
        assert_eq!(TransportProblem::<f64>::uniform(Array2::zeros((0, 3))).unwrap_err(), SolverError::Empty);
    }

    #[test]
    fn rectangular_f32() {
        let cost: Array2<f32> = array![[0.0, 1.0, 1.0], [1.0, 1.0, 0.0]];
        let plan = TransportProblem::uniform(cost).unwrap().solve().unwrap();
        // The middle column costs 1 from both rows and must receive 1/3.
        assert!((plan.total_cost - 1.0 / 3.0).abs() < 1e-6);
    }
}
