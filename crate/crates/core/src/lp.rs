//! LP relaxation of SPSC.
//!
//! ```text
//! max  Σ_k w_k y_k
//! s.t. y_k ≤ Σ_{j∈Θ_k} x[u_k][j]        for every user k
//!      Σ_i s_i x[i][j] ≤ c_j             for every node j
//!      0 ≤ x, y ≤ 1,  x[i][j] = 0 if s_i > c_j
//! ```
//!
//! Only `x[i][j]` that can matter get a column: the service fits on the node,
//! the pair is not forbidden, and some user demanding `i` accepts `j`. Users
//! with the same service and node set share one `y` column with their summed
//! weight. The solver output is cleaned before it is returned, so the
//! invariants on [`LpSolution`] hold exactly.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use log::debug;
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::model::{Placement, Resources, SpscInstance};

/// Values below this are treated as zero after solving.
pub const ZERO_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Pairs `(service, node)` whose `x` is fixed to 0.
    pub forbidden: HashSet<(usize, usize)>,
    /// Feasibility tolerance applied to the raw solver output.
    pub tolerance: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { forbidden: HashSet::new(), tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    n_nodes: usize,
    /// Row-major `x[i][j]`.
    x: Vec<f64>,
    pub y: Vec<f64>,
    pub r_hat: f64,
}

impl LpSolution {
    pub fn zero(n_services: usize, n_nodes: usize, n_users: usize) -> Self {
        LpSolution { n_nodes, x: vec![0.0; n_services * n_nodes], y: vec![0.0; n_users], r_hat: 0.0 }
    }

    /// Builds a solution from raw `x`, deriving `y = min(1, Σ x)` and `R̂`.
    pub fn from_x(inst: &SpscInstance, x: Vec<f64>) -> Self {
        let n_nodes = inst.nodes.len();
        assert_eq!(x.len(), inst.services.len() * n_nodes, "x has the wrong shape");
        let mut sol = LpSolution { n_nodes, x, y: Vec::new(), r_hat: 0.0 };
        sol.recompute_y(inst);
        sol
    }

    /// The integral solution induced by a placement.
    pub fn from_placement(inst: &SpscInstance, p: &Placement) -> Self {
        let n_nodes = inst.nodes.len();
        let mut x = vec![0.0; inst.services.len() * n_nodes];
        for (i, j) in p.pairs() {
            x[i * n_nodes + j] = 1.0;
        }
        Self::from_x(inst, x)
    }

    pub fn x(&self, service: usize, node: usize) -> f64 {
        self.x[service * self.n_nodes + node]
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_services(&self) -> usize {
        self.x.len().checked_div(self.n_nodes).unwrap_or(0)
    }

    /// `(node, x)` pairs with positive mass for one service.
    pub fn support(&self, service: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = &self.x[service * self.n_nodes..(service + 1) * self.n_nodes];
        row.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(j, v)| (j, *v))
    }

    fn coverage(&self, inst: &SpscInstance, k: usize) -> f64 {
        let u = &inst.users[k];
        u.node_set.iter().map(|&j| self.x(u.demand, j)).sum()
    }

    fn recompute_y(&mut self, inst: &SpscInstance) {
        self.y = (0..inst.users.len()).map(|k| self.coverage(inst, k).min(1.0)).collect();
        self.r_hat = self.y.iter().zip(&inst.users).map(|(y, u)| y * u.weight).sum();
    }

    /// Checks every LP constraint within `tol`; returns the first violation.
    pub fn check_constraints(&self, inst: &SpscInstance, tol: f64) -> std::result::Result<(), String> {
        let n_nodes = inst.nodes.len();
        if self.x.len() != inst.services.len() * n_nodes || self.y.len() != inst.users.len() {
            return Err("solution shape does not match the instance".into());
        }
        let mut load = vec![0.0; n_nodes];
        for i in 0..inst.services.len() {
            for (j, node_load) in load.iter_mut().enumerate() {
                let v = self.x(i, j);
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(format!("x[{i}][{j}] = {v} outside [0, 1]"));
                }
                if inst.size(i) > inst.capacity(j) && v != 0.0 {
                    return Err(format!("x[{i}][{j}] = {v} but the service does not fit"));
                }
                *node_load += inst.size(i) * v;
            }
        }
        for (j, l) in load.iter().enumerate() {
            if *l > inst.capacity(j) * (1.0 + tol) {
                return Err(format!("node {j} load {l} exceeds capacity {}", inst.capacity(j)));
            }
        }
        for (k, y) in self.y.iter().enumerate() {
            let cov = self.coverage(inst, k).min(1.0);
            if !(-tol..=1.0 + tol).contains(y) || *y > cov + tol {
                return Err(format!("y[{k}] = {y} exceeds coverage {cov}"));
            }
        }
        let obj: f64 = self.y.iter().zip(&inst.users).map(|(y, u)| y * u.weight).sum();
        if (obj - self.r_hat).abs() > tol * obj.abs().max(1.0) {
            return Err(format!("r_hat {} differs from objective {obj}", self.r_hat));
        }
        Ok(())
    }
}

/// Column layout of the LP.
struct Layout {
    /// `(service, node)` per x column.
    x_cols: Vec<(usize, usize)>,
    x_index: BTreeMap<(usize, usize), usize>,
    /// `(demand, node_set, weight)` per y column.
    y_cols: Vec<(usize, Vec<usize>, f64)>,
}

fn layout(inst: &SpscInstance, opts: &LpOptions) -> Layout {
    let mut groups: BTreeMap<(usize, &[usize]), f64> = BTreeMap::new();
    for u in &inst.users {
        *groups.entry((u.demand, &u.node_set[..])).or_insert(0.0) += u.weight;
    }
    let useful = |i: usize, j: usize| inst.size(i) <= inst.capacity(j) && !opts.forbidden.contains(&(i, j));
    let mut x_index = BTreeMap::new();
    let mut y_cols = Vec::new();
    for (&(i, set), &w) in &groups {
        let mut any = false;
        for &j in set.iter().filter(|&&j| useful(i, j)) {
            x_index.entry((i, j)).or_insert(0);
            any = true;
        }
        if any {
            y_cols.push((i, set.to_vec(), w));
        }
    }
    let x_cols: Vec<(usize, usize)> = x_index.keys().copied().collect();
    for (c, key) in x_cols.iter().enumerate() {
        x_index.insert(*key, c);
    }
    Layout { x_cols, x_index, y_cols }
}

/// Solves the relaxation and returns the cleaned solution.
pub fn build_and_solve(inst: &SpscInstance, opts: &LpOptions) -> Result<LpSolution> {
    inst.validate()?;
    let n_nodes = inst.nodes.len();
    let lay = layout(inst, opts);
    if lay.y_cols.is_empty() {
        return Ok(LpSolution::zero(inst.services.len(), n_nodes, inst.users.len()));
    }

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let xv: Vec<_> = lay.x_cols.iter().map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
    let yv: Vec<_> = lay.y_cols.iter().map(|(_, _, w)| problem.add_var(*w, (0.0, 1.0))).collect();
    for ((i, set, _), y) in lay.y_cols.iter().zip(&yv) {
        let mut expr = LinearExpr::empty();
        expr.add(*y, 1.0);
        for j in set {
            if let Some(&c) = lay.x_index.get(&(*i, *j)) {
                expr.add(xv[c], -1.0);
            }
        }
        problem.add_constraint(expr, ComparisonOp::Le, 0.0);
    }
    for j in 0..n_nodes {
        let mut expr = LinearExpr::empty();
        let mut any = false;
        for (c, &(i, jj)) in lay.x_cols.iter().enumerate() {
            if jj == j {
                expr.add(xv[c], inst.size(i));
                any = true;
            }
        }
        if any {
            problem.add_constraint(expr, ComparisonOp::Le, inst.capacity(j));
        }
    }
    debug!("LP with {} x columns and {} y columns", xv.len(), yv.len());

    let outcome = problem.solve().map_err(|e| Error::Solver(format!("simplex failed: {e}")))?;
    let sol = outcome.solution().ok_or_else(|| Error::Solver("simplex stopped before reaching a solution".into()))?;

    let mut x = vec![0.0; inst.services.len() * n_nodes];
    for (c, &(i, j)) in lay.x_cols.iter().enumerate() {
        x[i * n_nodes + j] = sol.var_value(xv[c]);
    }
    let raw_y: Vec<f64> = yv.iter().map(|&v| sol.var_value(v)).collect();
    check_raw(inst, &lay, &x, &raw_y, opts.tolerance)?;

    let raw_obj = sol.objective();
    let cleaned = clean(inst, x);
    if cleaned.r_hat + opts.tolerance * raw_obj.abs().max(1.0) < raw_obj {
        return Err(Error::Solver(format!("cleaning lost objective: raw {raw_obj}, cleaned {}", cleaned.r_hat)));
    }
    Ok(cleaned)
}

fn check_raw(inst: &SpscInstance, lay: &Layout, x: &[f64], y: &[f64], tol: f64) -> Result<()> {
    let n_nodes = inst.nodes.len();
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite() || **v < -tol || **v > 1.0 + tol) {
        return Err(Error::Solver(format!("variable value {v} outside [0, 1]")));
    }
    for j in 0..n_nodes {
        let load: f64 = (0..inst.services.len()).map(|i| inst.size(i) * x[i * n_nodes + j]).sum();
        if load > inst.capacity(j) * (1.0 + tol) + tol {
            return Err(Error::Solver(format!("node {j} load {load} exceeds capacity {}", inst.capacity(j))));
        }
    }
    for ((i, set, _), yv) in lay.y_cols.iter().zip(y) {
        let cov: f64 = set.iter().map(|&j| x[i * n_nodes + j]).sum();
        if *yv > cov + tol {
            return Err(Error::Solver(format!("coverage {yv} exceeds mass {cov} for service {i}")));
        }
    }
    Ok(())
}

/// Clamp, zero tiny values, scale overloaded node columns, recompute `y` and `R̂`.
fn clean(inst: &SpscInstance, mut x: Vec<f64>) -> LpSolution {
    let n_nodes = inst.nodes.len();
    for v in &mut x {
        *v = v.clamp(0.0, 1.0);
        if *v < ZERO_CUTOFF {
            *v = 0.0;
        }
    }
    for j in 0..n_nodes {
        let load: f64 = (0..inst.services.len()).map(|i| inst.size(i) * x[i * n_nodes + j]).sum();
        if load > inst.capacity(j) {
            let scale = inst.capacity(j) / load;
            for i in 0..inst.services.len() {
                x[i * n_nodes + j] *= scale;
            }
        }
    }
    LpSolution::from_x(inst, x)
}

/// True iff `r_hat` is at least the integral optimum up to 1e-6 relative slack.
pub fn verify_bound(sol: &LpSolution, opt: f64) -> bool {
    sol.r_hat >= opt - 1e-6 * opt.max(1.0)
}

/// Renders the relaxation in CPLEX LP format, one `x_i_j` per useful pair and
/// one `y_g` per user group (users sharing service and node set).
pub fn write_lp(inst: &SpscInstance, opts: &LpOptions) -> String {
    let lay = layout(inst, opts);
    let mut out = String::from("\\ SPSC LP relaxation\nMaximize\n obj:");
    if lay.y_cols.is_empty() {
        out.push_str(" 0 y_empty");
    }
    for (g, (_, _, w)) in lay.y_cols.iter().enumerate() {
        let _ = write!(out, " + {w} y_{g}");
    }
    out.push_str("\nSubject To\n");
    for (g, (i, set, _)) in lay.y_cols.iter().enumerate() {
        let _ = write!(out, " cover_{g}: y_{g}");
        for j in set.iter().filter(|j| lay.x_index.contains_key(&(*i, **j))) {
            let _ = write!(out, " - x_{i}_{j}");
        }
        out.push_str(" <= 0\n");
    }
    for j in 0..inst.nodes.len() {
        let terms: Vec<String> =
            lay.x_cols.iter().filter(|c| c.1 == j).map(|&(i, _)| format!("{} x_{i}_{j}", inst.size(i))).collect();
        if !terms.is_empty() {
            let _ = writeln!(out, " cap_{j}: {} <= {}", terms.join(" + "), inst.capacity(j));
        }
    }
    out.push_str("Bounds\n");
    for &(i, j) in &lay.x_cols {
        let _ = writeln!(out, " 0 <= x_{i}_{j} <= 1");
    }
    for g in 0..lay.y_cols.len() {
        let _ = writeln!(out, " 0 <= y_{g} <= 1");
    }
    out.push_str("End\n");
    out
}
