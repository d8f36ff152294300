//! Exact-rational linear programming: feasibility, maximization, and Farkas
//! certificates, via a two-phase primal simplex with Bland's rule.
//!
//! Every answer is re-verified by substitution before it crosses the module
//! boundary; certificates of infeasibility are checked against the sign
//! conditions they claim. Arbitrary-precision rationals make the verdicts
//! tolerance-free and run-to-run identical.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, BigRational)>,
    pub rhs: BigRational,
}

/// A system of exact linear constraints over rational variables.
#[derive(Debug, Clone)]
pub struct RationalMatrixSystem {
    num_vars: usize,
    nonneg: Vec<bool>,
    eq: Vec<SparseRow>,
    ge: Vec<SparseRow>,
}

impl RationalMatrixSystem {
    pub fn new(num_vars: usize, nonneg: Vec<bool>) -> Self {
        assert_eq!(nonneg.len(), num_vars);
        RationalMatrixSystem {
            num_vars,
            nonneg,
            eq: Vec::new(),
            ge: Vec::new(),
        }
    }

    pub fn all_nonneg(num_vars: usize) -> Self {
        Self::new(num_vars, vec![true; num_vars])
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn eq_rows(&self) -> &[SparseRow] {
        &self.eq
    }

    pub fn ge_rows(&self) -> &[SparseRow] {
        &self.ge
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, BigRational)>, rhs: BigRational) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.num_vars));
        self.eq.push(SparseRow { coeffs, rhs });
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, BigRational)>, rhs: BigRational) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.num_vars));
        self.ge.push(SparseRow { coeffs, rhs });
    }

    /// `a·x ≤ rhs` stored as the negated `≥` row.
    pub fn add_le(&mut self, coeffs: Vec<(usize, BigRational)>, rhs: BigRational) {
        let neg = coeffs.into_iter().map(|(j, c)| (j, -c)).collect();
        self.add_ge(neg, -rhs);
    }

    /// Exact feasibility check of a candidate point.
    pub fn satisfied_by(&self, x: &[BigRational]) -> bool {
        if x.len() != self.num_vars {
            return false;
        }
        for (i, flag) in self.nonneg.iter().enumerate() {
            if *flag && x[i].is_negative() {
                return false;
            }
        }
        for row in &self.eq {
            if row_value(row, x) != row.rhs {
                return false;
            }
        }
        for row in &self.ge {
            if row_value(row, x) < row.rhs {
                return false;
            }
        }
        true
    }
}

fn row_value(row: &SparseRow, x: &[BigRational]) -> BigRational {
    let mut v = BigRational::zero();
    for (j, c) in &row.coeffs {
        if !x[*j].is_zero() {
            v += c.clone() * x[*j].clone();
        }
    }
    v
}

/// Multipliers proving infeasibility: `eq` entries are free-signed, `ge`
/// entries nonnegative, the combined row is ≤ 0 on nonnegative variables and
/// 0 on free ones, and the combined right-hand side is positive.
#[derive(Debug, Clone)]
pub struct FarkasCertificate {
    pub eq_multipliers: Vec<BigRational>,
    pub ge_multipliers: Vec<BigRational>,
}

impl FarkasCertificate {
    pub fn verify(&self, sys: &RationalMatrixSystem) -> bool {
        if self.eq_multipliers.len() != sys.eq.len() || self.ge_multipliers.len() != sys.ge.len() {
            return false;
        }
        if self.ge_multipliers.iter().any(|v| v.is_negative()) {
            return false;
        }
        let mut combined = vec![BigRational::zero(); sys.num_vars];
        let mut rhs = BigRational::zero();
        for (mult, row) in self.eq_multipliers.iter().zip(&sys.eq) {
            for (j, c) in &row.coeffs {
                combined[*j] += mult.clone() * c.clone();
            }
            rhs += mult.clone() * row.rhs.clone();
        }
        for (mult, row) in self.ge_multipliers.iter().zip(&sys.ge) {
            for (j, c) in &row.coeffs {
                combined[*j] += mult.clone() * c.clone();
            }
            rhs += mult.clone() * row.rhs.clone();
        }
        for (j, v) in combined.iter().enumerate() {
            if sys.nonneg[j] {
                if v.is_positive() {
                    return false;
                }
            } else if !v.is_zero() {
                return false;
            }
        }
        rhs.is_positive()
    }
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal {
        value: BigRational,
        point: Vec<BigRational>,
    },
    Infeasible {
        farkas: FarkasCertificate,
    },
}

/// Returns a verified feasible point, or `None` when the system has none.
pub fn feasible(sys: &RationalMatrixSystem) -> Result<Option<Vec<BigRational>>> {
    let mut tab = Tableau::standardize(sys);
    if !tab.phase_one() {
        return Ok(None);
    }
    let x = tab.extract_point(sys);
    if !sys.satisfied_by(&x) {
        return Err(Error::Internal(
            "simplex returned an infeasible point".into(),
        ));
    }
    Ok(Some(x))
}

/// Certificate of infeasibility, or `None` when the system is feasible.
pub fn farkas_certificate(sys: &RationalMatrixSystem) -> Result<Option<FarkasCertificate>> {
    let mut tab = Tableau::standardize(sys);
    if tab.phase_one() {
        return Ok(None);
    }
    let cert = tab.farkas(sys);
    if !cert.verify(sys) {
        return Err(Error::Internal(
            "farkas certificate failed verification".into(),
        ));
    }
    Ok(Some(cert))
}

/// Maximizes `objective · x` over the system. Errors with `Unbounded` when
/// the objective is unbounded above.
pub fn maximize(sys: &RationalMatrixSystem, objective: &[BigRational]) -> Result<LpOutcome> {
    assert_eq!(objective.len(), sys.num_vars);
    let mut tab = Tableau::standardize(sys);
    if !tab.phase_one() {
        let cert = tab.farkas(sys);
        if !cert.verify(sys) {
            return Err(Error::Internal(
                "farkas certificate failed verification".into(),
            ));
        }
        return Ok(LpOutcome::Infeasible { farkas: cert });
    }
    tab.prepare_phase_two(objective);
    if !tab.phase_two() {
        return Err(Error::Unbounded);
    }
    let point = tab.extract_point(sys);
    if !sys.satisfied_by(&point) {
        return Err(Error::Internal(
            "simplex returned an infeasible optimum".into(),
        ));
    }
    let value: BigRational = objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c.clone() * x.clone())
        .sum();
    Ok(LpOutcome::Optimal { value, point })
}

/// Column metadata in standard form.
#[derive(Debug, Clone, Copy)]
enum ColKind {
    /// Original variable with the given sign factor (x = +col or part of a
    /// free split x = pos - neg).
    VarPos(usize),
    VarNeg(usize),
    Surplus,
    Artificial,
}

/// Fraction-free simplex tableau: every stored entry is `scale` times the
/// true tableau entry, with `scale > 0` the current basis determinant (up
/// to sign bookkeeping). Pivot updates are integer two-term products with
/// an exact division, so no rational gcd is ever paid.
struct Tableau {
    /// Constraint rows, each of width `ncols + 1` (rhs last).
    rows: Vec<Vec<BigInt>>,
    /// Reduced-cost row of the current phase, same width; the rhs entry is
    /// minus `scale` times the current objective value.
    cost: Vec<BigInt>,
    scale: BigInt,
    cols: Vec<ColKind>,
    basis: Vec<usize>,
    /// Sign applied to each original constraint during rhs normalization,
    /// ordered eq rows then ge rows.
    row_sign: Vec<i8>,
    /// Positive factor each original row was multiplied by to clear its
    /// denominators; dual multipliers must absorb it.
    row_scale: Vec<BigInt>,
    n_real: usize,
    m: usize,
    /// Consecutive degenerate pivots; beyond a threshold the pivot rule
    /// falls back to Bland's rule until the objective strictly improves.
    degenerate_streak: usize,
}

impl Tableau {
    fn standardize(sys: &RationalMatrixSystem) -> Tableau {
        let mut cols: Vec<ColKind> = Vec::new();
        let mut var_cols: Vec<(usize, Option<usize>)> = Vec::with_capacity(sys.num_vars);
        for v in 0..sys.num_vars {
            let pos = cols.len();
            cols.push(ColKind::VarPos(v));
            let neg = if sys.nonneg[v] {
                None
            } else {
                cols.push(ColKind::VarNeg(v));
                Some(pos + 1)
            };
            var_cols.push((pos, neg));
        }
        for _ in 0..sys.ge.len() {
            cols.push(ColKind::Surplus);
        }
        let n_real = cols.len();
        let m = sys.eq.len() + sys.ge.len();
        for _ in 0..m {
            cols.push(ColKind::Artificial);
        }
        let ncols = cols.len();

        let mut rows = vec![vec![BigInt::zero(); ncols + 1]; m];
        let mut row_sign = vec![1i8; m];
        let mut row_scale = vec![BigInt::one(); m];
        let fill = |ri: usize,
                    coeffs: &[(usize, BigRational)],
                    rhs: &BigRational,
                    surplus: Option<usize>,
                    rows: &mut Vec<Vec<BigInt>>,
                    row_sign: &mut Vec<i8>,
                    row_scale: &mut Vec<BigInt>| {
            // Clear denominators row-wise and normalize the rhs sign.
            let mut denom_lcm = rhs.denom().clone();
            for (_, c) in coeffs {
                denom_lcm = denom_lcm.lcm(c.denom());
            }
            let flip = rhs.is_negative();
            row_sign[ri] = if flip { -1 } else { 1 };
            row_scale[ri] = denom_lcm.clone();
            let sign = if flip { -BigInt::one() } else { BigInt::one() };
            let to_int =
                |r: &BigRational| -> BigInt { r.numer() * (&denom_lcm / r.denom()) * &sign };
            for (v, c) in coeffs {
                let (pos, neg) = var_cols[*v];
                let val = to_int(c);
                rows[ri][pos] += &val;
                if let Some(ncol) = neg {
                    rows[ri][ncol] -= &val;
                }
            }
            if let Some(gi) = surplus {
                let scol = n_real - sys.ge.len() + gi;
                rows[ri][scol] = -(&sign * &denom_lcm);
            }
            rows[ri][ncols] = to_int(rhs);
        };
        for (i, row) in sys.eq.iter().enumerate() {
            fill(
                i,
                &row.coeffs,
                &row.rhs,
                None,
                &mut rows,
                &mut row_sign,
                &mut row_scale,
            );
        }
        for (gi, row) in sys.ge.iter().enumerate() {
            fill(
                sys.eq.len() + gi,
                &row.coeffs,
                &row.rhs,
                Some(gi),
                &mut rows,
                &mut row_sign,
                &mut row_scale,
            );
        }
        // Artificial identity block and initial basis.
        let mut basis = Vec::with_capacity(m);
        for (ri, row) in rows.iter_mut().enumerate() {
            row[n_real + ri] = BigInt::one();
            basis.push(n_real + ri);
        }
        // Phase-1 reduced costs: cost 1 on artificials priced out against
        // the artificial basis.
        let mut cost = vec![BigInt::zero(); ncols + 1];
        for row in &rows {
            for (j, v) in row.iter().enumerate() {
                cost[j] -= v;
            }
        }
        for ri in 0..m {
            cost[n_real + ri] += BigInt::one();
        }
        Tableau {
            rows,
            cost,
            scale: BigInt::one(),
            cols,
            basis,
            row_sign,
            row_scale,
            n_real,
            m,
            degenerate_streak: 0,
        }
    }

    fn ncols(&self) -> usize {
        self.cols.len()
    }

    /// Test helper: every basis column must be `scale` times a unit vector.
    #[cfg(test)]
    #[allow(dead_code)]
    fn check_invariant(&self) {
        for (r, &b) in self.basis.iter().enumerate() {
            for r2 in 0..self.m {
                let expect = if r2 == r {
                    self.scale.clone()
                } else {
                    BigInt::zero()
                };
                assert_eq!(
                    self.rows[r2][b], expect,
                    "basis column {b} corrupt at row {r2} (basic row {r})"
                );
            }
        }
    }

    /// Integer pivot: the pivot row is left unscaled; every other row
    /// becomes `(piv * row - lead * pivot_row) / scale`, an exact division
    /// by the previous scale.
    fn pivot(&mut self, row: usize, col: usize) {
        let ncols = self.ncols();
        let pivot_row = self.rows[row].clone();
        let piv = pivot_row[col].clone();
        debug_assert!(!piv.is_zero());
        let update = |target: &mut Vec<BigInt>, scale: &BigInt| {
            let lead = std::mem::take(&mut target[col]);
            for j in 0..=ncols {
                if j == col {
                    continue;
                }
                let old_zero = target[j].is_zero();
                let piv_zero = pivot_row[j].is_zero();
                if old_zero && piv_zero {
                    continue;
                }
                let mut cur = if old_zero {
                    BigInt::zero()
                } else {
                    &piv * &target[j]
                };
                if !lead.is_zero() && !piv_zero {
                    cur -= &lead * &pivot_row[j];
                }
                target[j] = if cur.is_zero() { cur } else { cur / scale };
            }
        };
        let scale = self.scale.clone();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            update(&mut self.rows[r], &scale);
        }
        update(&mut self.cost, &scale);
        self.scale = piv;
        self.basis[row] = col;
        // A negative pivot (possible only in degenerate clean-up pivots)
        // flips the sign of the representation; renormalize globally so the
        // scale stays positive.
        if self.scale.is_negative() {
            self.scale = -std::mem::take(&mut self.scale);
            for r in 0..self.m {
                for v in self.rows[r].iter_mut() {
                    if !v.is_zero() {
                        *v = -std::mem::take(v);
                    }
                }
            }
            for v in self.cost.iter_mut() {
                if !v.is_zero() {
                    *v = -std::mem::take(v);
                }
            }
        }
    }

    /// Simplex iteration on the current cost row over columns `< limit`,
    /// using most-negative-reduced-cost pivoting with a Bland's-rule
    /// fallback after degenerate stalls (anti-cycling). Returns false when
    /// the objective is unbounded below.
    fn iterate(&mut self, limit: usize) -> bool {
        const STALL_LIMIT: usize = 25;
        loop {
            let entering = if self.degenerate_streak > STALL_LIMIT {
                (0..limit).find(|&j| self.cost[j].is_negative())
            } else {
                let mut best: Option<usize> = None;
                for j in 0..limit {
                    if self.cost[j].is_negative()
                        && best.is_none_or(|b| self.cost[j] < self.cost[b])
                    {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(entering) = entering else {
                return true;
            };
            let ncols = self.ncols();
            // Ratio test on rhs/entry over positive entries, integer
            // cross-multiplied; ties resolved by the smallest basis index.
            let mut leaving: Option<usize> = None;
            let mut best_num = BigInt::zero();
            let mut best_den = BigInt::one();
            for r in 0..self.m {
                let a = &self.rows[r][entering];
                if !a.is_positive() {
                    continue;
                }
                let b = &self.rows[r][ncols];
                let better = match leaving {
                    None => true,
                    Some(cur) => {
                        let lhs = b * &best_den;
                        let rhs = &best_num * a;
                        lhs < rhs || (lhs == rhs && self.basis[r] < self.basis[cur])
                    }
                };
                if better {
                    best_num = b.clone();
                    best_den = a.clone();
                    leaving = Some(r);
                }
            }
            let Some(leaving) = leaving else {
                return false;
            };
            if best_num.is_zero() {
                self.degenerate_streak += 1;
            } else {
                self.degenerate_streak = 0;
            }
            self.pivot(leaving, entering);
        }
    }

    /// Runs phase one; true when a feasible basis was found.
    fn phase_one(&mut self) -> bool {
        let ok = self.iterate(self.ncols());
        debug_assert!(ok, "phase-1 objective is bounded by construction");
        let ncols = self.ncols();
        if self.cost[ncols].is_negative() {
            // Objective value is -cost_rhs / scale > 0: infeasible.
            return false;
        }
        // Drive leftover zero-value artificials out of the basis where a
        // real pivot exists; fully zero rows are redundant and harmless
        // because phase two never reprices artificial columns.
        for r in 0..self.m {
            if !matches!(self.cols[self.basis[r]], ColKind::Artificial) {
                continue;
            }
            if let Some(col) = (0..self.n_real).find(|&j| !self.rows[r][j].is_zero()) {
                // Degenerate pivot (the row's rhs is zero), so feasibility
                // is preserved regardless of the entry's sign.
                self.pivot(r, col);
            }
        }
        true
    }

    fn prepare_phase_two(&mut self, objective: &[BigRational]) {
        // Minimize -objective, scaled to integers by the objective lcm.
        let ncols = self.ncols();
        let mut obj_lcm = BigInt::one();
        for c in objective {
            obj_lcm = obj_lcm.lcm(c.denom());
        }
        let mut c_int = vec![BigInt::zero(); ncols + 1];
        for (j, kind) in self.cols.iter().enumerate() {
            match kind {
                ColKind::VarPos(v) => {
                    c_int[j] = -(objective[*v].numer() * (&obj_lcm / objective[*v].denom()));
                }
                ColKind::VarNeg(v) => {
                    c_int[j] = objective[*v].numer() * (&obj_lcm / objective[*v].denom());
                }
                _ => {}
            }
        }
        // Scaled pricing: cost = scale * c - sum_i c_B[i] * row_i.
        let mut cost: Vec<BigInt> = c_int.iter().map(|c| c * &self.scale).collect();
        for r in 0..self.m {
            let cb = c_int[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..=ncols {
                if self.rows[r][j].is_zero() {
                    continue;
                }
                cost[j] -= &cb * &self.rows[r][j];
            }
        }
        self.cost = cost;
        self.degenerate_streak = 0;
    }

    /// Runs phase two over the real columns; false when unbounded.
    fn phase_two(&mut self) -> bool {
        self.iterate(self.n_real)
    }

    fn extract_point(&self, sys: &RationalMatrixSystem) -> Vec<BigRational> {
        let ncols = self.ncols();
        let mut x = vec![BigRational::zero(); sys.num_vars];
        for (r, &bcol) in self.basis.iter().enumerate() {
            let val = BigRational::new(self.rows[r][ncols].clone(), self.scale.clone());
            match self.cols[bcol] {
                ColKind::VarPos(v) => x[v] += val,
                ColKind::VarNeg(v) => x[v] -= val,
                _ => {}
            }
        }
        x
    }

    /// Reads Farkas multipliers off the optimal phase-1 cost row: the dual
    /// value of standardized row `i` is `1 - rc(artificial_i)`; undoing the
    /// standardization multiplies by the row's sign and denominator-clearing
    /// factor. (The stored cost row is scale times the true one.)
    fn farkas(&self, sys: &RationalMatrixSystem) -> FarkasCertificate {
        let mut y = Vec::with_capacity(self.m);
        for ri in 0..self.m {
            let rc = BigRational::new(self.cost[self.n_real + ri].clone(), self.scale.clone());
            let mut v =
                (BigRational::one() - rc) * BigRational::from_integer(self.row_scale[ri].clone());
            if self.row_sign[ri] < 0 {
                v = -v;
            }
            y.push(v);
        }
        let eq_multipliers = y[..sys.eq.len()].to_vec();
        let ge_multipliers = y[sys.eq.len()..].to_vec();
        FarkasCertificate {
            eq_multipliers,
            ge_multipliers,
        }
    }
}


#[cfg(test)]
mod fuzz_tests {
    use super::*;
    use crate::num::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every random system either yields a point that satisfies all
    /// constraints or a Farkas certificate that verifies.
    #[test]
    fn feasibility_answers_always_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut feasible_seen = 0;
        let mut infeasible_seen = 0;
        for _ in 0..400 {
            let vars = rng.gen_range(1..=4);
            let mut sys =
                RationalMatrixSystem::new(vars, (0..vars).map(|_| rng.gen_bool(0.8)).collect());
            for _ in 0..rng.gen_range(1..=4) {
                let coeffs: Vec<(usize, BigRational)> = (0..vars)
                    .filter_map(|j| {
                        if rng.gen_bool(0.7) {
                            Some((j, rat(rng.gen_range(-4..=4), rng.gen_range(1..=3))))
                        } else {
                            None
                        }
                    })
                    .collect();
                let rhs = rat(rng.gen_range(-4..=4), 1);
                if rng.gen_bool(0.5) {
                    sys.add_eq(coeffs, rhs);
                } else {
                    sys.add_ge(coeffs, rhs);
                }
            }
            match feasible(&sys).unwrap() {
                Some(x) => {
                    feasible_seen += 1;
                    assert!(sys.satisfied_by(&x));
                    assert!(farkas_certificate(&sys).unwrap().is_none());
                }
                None => {
                    infeasible_seen += 1;
                    let cert = farkas_certificate(&sys).unwrap().expect("certificate");
                    assert!(cert.verify(&sys));
                }
            }
        }
        assert!(feasible_seen > 20 && infeasible_seen > 20);
    }
}
