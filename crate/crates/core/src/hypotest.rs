//! Consistency tests for two-period joint choice data.
//!
//! Two equivalent formulations are implemented. The extreme-point test
//! stacks one 0/1 row per deterministic choice pattern (a first-period
//! order plus one order per possible first consumption) and asks whether
//! the observed frequencies lie in the cone spanned by those rows. The
//! Möbius-constraint test instead searches for a nonnegative Möbius
//! inverse on the full menu-product domain subject to consistency with the
//! observed cells, the marginality recursion, and flow rows for unobserved
//! first-period menus. Feasibility is decided by the exact-rational
//! simplex; the equivalent nonnegative-least-squares objective is reported
//! alongside, with certificates re-verified against the raw data.

use crate::error::{Error, Result};
use crate::jointchoice::RandomJointChoiceRule;
use crate::lattice::{nonempty_menus, Alt, Menu, OrderSpace};
use crate::lp;
use crate::mat::{solve_system, Mat, SolveOutcome};
use crate::num::Scalar;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

/// Objectives below this are reported as exact zeros.
pub const OBJECTIVE_ZERO_TOL: f64 = 1e-12;
/// KKT residual bound for the nonnegative least-squares solver.
pub const KKT_TOL: f64 = 1e-9;

/// Number of deterministic two-period choice patterns as counted by the
/// closed form `n (n!)²`.
pub fn extreme_point_row_count(n: u64) -> u64 {
    let fact: u64 = (1..=n).product();
    n * fact * fact
}

/// Rows of the Möbius system at full observation:
/// `(n 2^{n-1})² + n 2^{2n-1} − n 2^n`.
pub fn mobius_system_row_count(n: u64) -> u64 {
    let cells = n * (1 << (n - 1));
    cells * cells + n * (1 << (2 * n - 1)) - n * (1 << n)
}

/// A two-period observation cell `(x, y, A, B)`, ordered menus-first.
pub type Cell = (Menu, Menu, Alt, Alt);

fn observed_pairs<T: Scalar>(p: &RandomJointChoiceRule<T>) -> Result<Vec<(Menu, Menu)>> {
    if p.periods() != 2 {
        return Err(Error::DimensionMismatch(
            "hypothesis tests operate on two-period rules".into(),
        ));
    }
    Ok(p.observed().iter().map(|m| (m[0], m[1])).collect())
}

fn cells_of_pairs(pairs: &[(Menu, Menu)]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &(a, b) in pairs {
        for x in a.iter() {
            for y in b.iter() {
                cells.push((a, b, x, y));
            }
        }
    }
    cells
}

/// Deterministic two-period choice patterns restricted to the observed
/// cells, deduplicated with multiplicity.
#[derive(Debug, Clone)]
pub struct ExtremePointMatrix {
    pub n: usize,
    pub observed: Vec<(Menu, Menu)>,
    pub columns: Vec<Cell>,
    /// Distinct rows as sorted hit-column lists, with the number of order
    /// tuples inducing each.
    pub rows: Vec<(Vec<u32>, u64)>,
    /// Total number of enumerated index tuples, `(n!)^{n+1}`.
    pub enumerated_rows: u64,
    /// The closed-form count `n (n!)²`.
    pub formula_rows: u64,
}

impl ExtremePointMatrix {
    pub fn distinct_rows(&self) -> usize {
        self.rows.len()
    }
}

fn extreme_cap() -> usize {
    std::env::var("CDRU_MAX_N")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(4)
}

/// Enumerates every tuple `(≻, ≻_1, …, ≻_n)` of orders and records which
/// observed cells it hits: `x = M(≻, A)`, then `y = M(≻_x, B)`.
pub fn build_extreme_matrix(n: usize, observed: &[(Menu, Menu)]) -> Result<ExtremePointMatrix> {
    if observed.is_empty() {
        return Err(Error::IncompleteDomain("no observed menu pairs".into()));
    }
    let cap = extreme_cap();
    if n > cap {
        return Err(Error::SizeCap(format!(
            "extreme-point matrix is built for n <= {cap}"
        )));
    }
    let space = OrderSpace::new(n);
    let count = space.count();
    let columns = cells_of_pairs(observed);
    let col_index: BTreeMap<Cell, u32> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, i as u32))
        .collect();
    // Odometer over (n+1) order indices.
    let mut tuple = vec![0usize; n + 1];
    let mut dedup: HashMap<Vec<u32>, u64> = HashMap::new();
    let total = (count as u64).pow(n as u32 + 1);
    loop {
        let mut hits: Vec<u32> = Vec::with_capacity(observed.len());
        for &(a, b) in observed {
            let x = space.maximizer_id(tuple[0], a)?;
            let second = tuple[1 + x.index()];
            let y = space.maximizer_id(second, b)?;
            hits.push(col_index[&(a, b, x, y)]);
        }
        hits.sort_unstable();
        *dedup.entry(hits).or_insert(0) += 1;
        // Advance the odometer.
        let mut pos = 0;
        loop {
            if pos > n {
                break;
            }
            tuple[pos] += 1;
            if tuple[pos] < count {
                break;
            }
            tuple[pos] = 0;
            pos += 1;
        }
        if pos > n {
            break;
        }
    }
    let mut rows: Vec<(Vec<u32>, u64)> = dedup.into_iter().collect();
    rows.sort();
    Ok(ExtremePointMatrix {
        n,
        observed: observed.to_vec(),
        columns,
        rows,
        enumerated_rows: total,
        formula_rows: extreme_point_row_count(n as u64),
    })
}

/// Which flow rows the Möbius system carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowRows {
    /// Conservation at every nonempty proper first-period menu plus the
    /// normalization row.
    Full,
    /// Only for first-period menus with no observed pair (the normalization
    /// row only when no pair with the full first menu is observed).
    Limited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Consistency,
    Recursivity,
    Flow,
    Normalization,
}

/// One equality row: kind, sparse integer coefficients, right-hand side.
pub type ConstraintRow = (RowKind, Vec<(usize, i64)>, BigRational);

/// Sparse equality system over the full-domain Möbius variables.
#[derive(Debug, Clone)]
pub struct MobiusConstraintSystem {
    pub n: usize,
    pub observed: Vec<(Menu, Menu)>,
    pub variables: Vec<Cell>,
    pub rows: Vec<ConstraintRow>,
    pub flow_mode: FlowRows,
}

impl MobiusConstraintSystem {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }
}

/// Assembles the constraint system for the observed part of `p`.
pub fn build_mobius_system(
    p: &RandomJointChoiceRule<BigRational>,
    flow_mode: FlowRows,
) -> Result<MobiusConstraintSystem> {
    let observed = observed_pairs(p)?;
    let n = p.n();
    let menus = nonempty_menus(n);
    let full = Menu::full(n);
    // Variables: every (x, y, A, B) on the full domain.
    let mut variables = Vec::new();
    for &a in &menus {
        for &b in &menus {
            for x in a.iter() {
                for y in b.iter() {
                    variables.push((a, b, x, y));
                }
            }
        }
    }
    let var_index: BTreeMap<Cell, usize> =
        variables.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let mut rows = Vec::new();
    // Consistency on observed cells: the superset sum reproduces p.
    for &(a, b) in &observed {
        for x in a.iter() {
            for y in b.iter() {
                let mut coeffs = Vec::new();
                for a2 in a.supersets(n) {
                    for b2 in b.supersets(n) {
                        coeffs.push((var_index[&(a2, b2, x, y)], 1i64));
                    }
                }
                let rhs = p
                    .get(&[a, b], &[x, y])
                    .ok_or_else(|| Error::IncompleteDomain("observed cell missing".into()))?;
                rows.push((RowKind::Consistency, coeffs, rhs));
            }
        }
    }
    // Recursivity: for every x ∈ A and nonempty proper B,
    // Σ_{y∈B} q(x,y,A,B) − Σ_{z∉B} q(x,z,A,B∪{z}) = 0.
    for &a in &menus {
        for x in a.iter() {
            for &b in &menus {
                if b == full {
                    continue;
                }
                let mut coeffs = Vec::new();
                for y in b.iter() {
                    coeffs.push((var_index[&(a, b, x, y)], 1i64));
                }
                for z in full.iter() {
                    if b.contains(z) {
                        continue;
                    }
                    coeffs.push((var_index[&(a, b.insert(z), x, z)], -1i64));
                }
                rows.push((RowKind::Recursivity, coeffs, BigRational::zero()));
            }
        }
    }
    // Flow rows over first-period menus.
    let first_observed: std::collections::BTreeSet<Menu> =
        observed.iter().map(|&(a, _)| a).collect();
    for &a in &menus {
        if a == full {
            continue;
        }
        if flow_mode == FlowRows::Limited && first_observed.contains(&a) {
            continue;
        }
        let mut coeffs = Vec::new();
        for x in a.iter() {
            for y in full.iter() {
                coeffs.push((var_index[&(a, full, x, y)], 1i64));
            }
        }
        for z in full.iter() {
            if a.contains(z) {
                continue;
            }
            for y in full.iter() {
                coeffs.push((var_index[&(a.insert(z), full, z, y)], -1i64));
            }
        }
        rows.push((RowKind::Flow, coeffs, BigRational::zero()));
    }
    if flow_mode == FlowRows::Full || !first_observed.contains(&full) {
        let mut coeffs = Vec::new();
        for x in full.iter() {
            for y in full.iter() {
                coeffs.push((var_index[&(full, full, x, y)], 1i64));
            }
        }
        rows.push((RowKind::Normalization, coeffs, BigRational::one()));
    }
    Ok(MobiusConstraintSystem {
        n,
        observed,
        variables,
        rows,
        flow_mode,
    })
}

/// Outcome of one consistency test.
#[derive(Debug, Clone)]
pub struct TestVerdict {
    pub consistent: bool,
    /// Minimized weighted quadratic objective (0 exactly when below the
    /// reporting threshold).
    pub objective: f64,
    /// Feasible weights over the test's variables when consistent.
    pub certificate: Option<Vec<BigRational>>,
    pub rows: usize,
    pub cols: usize,
    pub duration: Duration,
}

impl TestVerdict {
    /// The exact verdict and the quadratic objective must tell one story.
    pub fn internally_consistent(&self) -> bool {
        self.consistent == (self.objective < OBJECTIVE_ZERO_TOL)
    }
}

/// Extreme-point test: is `p` a nonnegative combination of deterministic
/// patterns on its observed cells?
pub fn test_extreme_points(p: &RandomJointChoiceRule<BigRational>) -> Result<TestVerdict> {
    let start = Instant::now();
    let observed = observed_pairs(p)?;
    let matrix = build_extreme_matrix(p.n(), &observed)?;
    let cells = cells_of_pairs(&observed);
    let cell_index: BTreeMap<Cell, usize> =
        cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let rhs: Vec<BigRational> = cells
        .iter()
        .map(|&(a, b, x, y)| p.get(&[a, b], &[x, y]).expect("observed cell"))
        .collect();
    // Exact feasibility: one equality per cell.
    let mut sys = lp::RationalMatrixSystem::all_nonneg(matrix.rows.len());
    let mut per_cell: Vec<Vec<(usize, BigRational)>> = vec![Vec::new(); cells.len()];
    for (vi, (hits, _mult)) in matrix.rows.iter().enumerate() {
        for &c in hits {
            per_cell[c as usize].push((vi, BigRational::one()));
        }
    }
    for (c, coeffs) in per_cell.iter().enumerate() {
        sys.add_eq(coeffs.clone(), rhs[c].clone());
    }
    let certificate = lp::feasible(&sys)?;
    let consistent = certificate.is_some();
    if let Some(r) = &certificate {
        // Independent re-verification against the raw rule.
        let mut recon = vec![BigRational::zero(); cells.len()];
        for (vi, (hits, _)) in matrix.rows.iter().enumerate() {
            if r[vi].is_zero() {
                continue;
            }
            for &c in hits {
                recon[c as usize] += r[vi].clone();
            }
        }
        if recon != rhs || r.iter().any(|v| v.is_negative()) {
            return Err(Error::Internal("extreme-point certificate failed".into()));
        }
    }
    // Quadratic objective.
    let conic = ConicSystem {
        num_vars: matrix.rows.len(),
        num_cells: cells.len(),
        cols: matrix
            .rows
            .iter()
            .map(|(hits, _)| hits.iter().map(|&c| (c as usize, 1.0)).collect())
            .collect(),
        target: rhs.iter().map(|v| v.approx()).collect(),
    };
    let omega = vec![1.0; cells.len()];
    let nnls = nnls_minimize(&conic, &omega)?;
    let _ = cell_index;
    Ok(TestVerdict {
        consistent,
        objective: nnls.objective,
        certificate,
        rows: matrix.rows.len(),
        cols: cells.len(),
        duration: start.elapsed(),
    })
}

/// Möbius-constraint test with the chosen flow rows.
pub fn test_mobius_system(
    p: &RandomJointChoiceRule<BigRational>,
    flow_mode: FlowRows,
) -> Result<TestVerdict> {
    let start = Instant::now();
    let system = build_mobius_system(p, flow_mode)?;
    let mut sys = lp::RationalMatrixSystem::all_nonneg(system.var_count());
    for (_, coeffs, rhs) in &system.rows {
        sys.add_eq(
            coeffs
                .iter()
                .map(|&(j, c)| (j, BigRational::from_integer(c.into())))
                .collect(),
            rhs.clone(),
        );
    }
    let certificate = lp::feasible(&sys)?;
    let consistent = certificate.is_some();
    if let Some(q) = &certificate {
        if q.iter().any(|v| v.is_negative()) {
            return Err(Error::Internal("negative Möbius certificate".into()));
        }
        for (_, coeffs, rhs) in &system.rows {
            let mut acc = BigRational::zero();
            for &(j, c) in coeffs {
                if !q[j].is_zero() {
                    acc += BigRational::from_integer(c.into()) * q[j].clone();
                }
            }
            if &acc != rhs {
                return Err(Error::Internal("Möbius certificate failed".into()));
            }
        }
    }
    let conic = ConicSystem {
        num_vars: system.var_count(),
        num_cells: system.row_count(),
        cols: {
            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); system.var_count()];
            for (ri, (_, coeffs, _)) in system.rows.iter().enumerate() {
                for &(j, c) in coeffs {
                    cols[j].push((ri, c as f64));
                }
            }
            cols
        },
        target: system.rows.iter().map(|(_, _, rhs)| rhs.approx()).collect(),
    };
    let omega = vec![1.0; system.row_count()];
    let nnls = nnls_minimize(&conic, &omega)?;
    Ok(TestVerdict {
        consistent,
        objective: nnls.objective,
        certificate,
        rows: system.row_count(),
        cols: system.var_count(),
        duration: start.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// Nonnegative least squares
// ---------------------------------------------------------------------------

/// The conic system `{x ≥ 0 : x G = target}` with `G` stored by variable.
#[derive(Debug, Clone)]
pub struct ConicSystem {
    pub num_vars: usize,
    pub num_cells: usize,
    /// Per variable: (cell index, coefficient).
    pub cols: Vec<Vec<(usize, f64)>>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NnlsOutcome {
    /// Minimized quadratic `(xG − target) Ω (xG − target)ᵀ`, reported as
    /// exactly zero below the threshold.
    pub objective: f64,
    pub solution: Vec<f64>,
}

/// Minimizes the weighted residual over the nonnegative orthant by the
/// active-set method, with a KKT re-verification of the result.
pub fn nnls_minimize(sys: &ConicSystem, omega: &[f64]) -> Result<NnlsOutcome> {
    if omega.len() != sys.num_cells {
        return Err(Error::DimensionMismatch("weight vector length".into()));
    }
    if omega.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let scale: Vec<f64> = omega.iter().map(|w| w.sqrt()).collect();
    // Dense design matrix: cells x vars, rows pre-scaled by sqrt(omega).
    let mut a = Mat::<f64>::zeros(sys.num_cells, sys.num_vars);
    for (j, col) in sys.cols.iter().enumerate() {
        for &(i, v) in col {
            a[(i, j)] = v * scale[i];
        }
    }
    let b: Vec<f64> = sys.target.iter().zip(&scale).map(|(t, s)| t * s).collect();
    let x = lawson_hanson(&a, &b)?;
    // Residual and KKT check.
    let mut resid = b.clone();
    for j in 0..sys.num_vars {
        if x[j] == 0.0 {
            continue;
        }
        for &(i, v) in &sys.cols[j] {
            resid[i] -= v * scale[i] * x[j];
        }
    }
    let objective_raw: f64 = resid.iter().map(|r| r * r).sum();
    // Gradient of ||Ax - b||^2 is -2 Aᵀ resid.
    for j in 0..sys.num_vars {
        let mut g = 0.0;
        for &(i, v) in &sys.cols[j] {
            g -= 2.0 * v * scale[i] * resid[i];
        }
        let ok = if x[j] > 0.0 {
            g.abs() <= KKT_TOL
        } else {
            g >= -KKT_TOL
        };
        if !ok {
            return Err(Error::Internal(format!(
                "KKT residual {g} at variable {j} exceeds bound"
            )));
        }
    }
    let objective = if objective_raw < OBJECTIVE_ZERO_TOL {
        0.0
    } else {
        objective_raw
    };
    Ok(NnlsOutcome {
        objective,
        solution: x,
    })
}

/// Textbook active-set nonnegative least squares.
fn lawson_hanson(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut x = vec![0.0f64; n];
    let mut passive = vec![false; n];
    let max_outer = 6 * n + 60;
    for _ in 0..max_outer {
        // Dual vector w = Aᵀ(b − Ax).
        let mut resid = b.to_vec();
        for j in 0..n {
            if x[j] == 0.0 {
                continue;
            }
            for i in 0..m {
                resid[i] -= a[(i, j)] * x[j];
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if passive[j] {
                continue;
            }
            let mut w = 0.0;
            for i in 0..m {
                w += a[(i, j)] * resid[i];
            }
            if w > KKT_TOL / 4.0 && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        let Some((enter, _)) = best else {
            return Ok(x);
        };
        passive[enter] = true;
        // Inner loop: least squares on the passive set, stepping back and
        // dropping variables that would turn negative.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = ls_on_subset(a, b, &idx)?;
            if z.iter().all(|v| *v > 1e-13) {
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            // Step toward z until the first variable hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 1e-13 {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
            }
            for &j in &idx {
                if x[j] <= 1e-13 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if idx.iter().all(|&j| !passive[j]) {
                break;
            }
        }
    }
    Err(Error::Internal(
        "nonnegative least squares did not converge".into(),
    ))
}

/// Unconstrained least squares on the chosen columns via normal equations.
fn ls_on_subset(a: &Mat<f64>, b: &[f64], idx: &[usize]) -> Result<Vec<f64>> {
    let m = a.nrows();
    let k = idx.len();
    let mut gram = Mat::<f64>::zeros(k, k);
    let mut rhs = vec![0.0f64; k];
    for (p, &jp) in idx.iter().enumerate() {
        for (q, &jq) in idx.iter().enumerate().skip(p) {
            let mut dot = 0.0;
            for i in 0..m {
                dot += a[(i, jp)] * a[(i, jq)];
            }
            gram[(p, q)] = dot;
            gram[(q, p)] = dot;
        }
        let mut dot = 0.0;
        for i in 0..m {
            dot += a[(i, jp)] * b[i];
        }
        rhs[p] = dot;
    }
    match solve_system(&gram, &rhs, 1e-13) {
        SolveOutcome::Unique(z) => Ok(z),
        SolveOutcome::Underdetermined { particular, .. } => Ok(particular),
        SolveOutcome::Inconsistent => Err(Error::Internal("normal equations inconsistent".into())),
    }
}
