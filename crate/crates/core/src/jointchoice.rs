//! Multi-period joint choice rules: axioms, history graphs, and recovery of
//! a representation.
//!
//! A `T`-period rule records how often each stream of choices is made from
//! each stream of menus. Consistency with first-period random utility plus
//! history-indexed transition kernels is characterized by two axioms:
//! complete monotonicity (the Möbius inverse on the product menu lattice is
//! nonnegative) and marginality (earlier choices do not depend on later
//! menus). State independence adds choice-set independence. The
//! constructive direction runs a path-flow decomposition on one
//! subset-lattice graph per history of choices and reads distributions over
//! orders off the extracted paths.

use crate::error::{Error, Result};
use crate::lattice::{
    mobius_invert, nonempty_menus, product_cells, superset_tuples, Alt, CellKey, LinearOrder, Menu,
    MobiusTable, OrderDistribution, OrderSpace, RandomChoiceRule,
};
use crate::num::Scalar;
use num_rational::BigRational;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// History-indexed kernel lookup used by forward generation.
pub type KernelLookup<'a, T> = dyn Fn(&[Alt], &[Menu]) -> OrderDistribution<T> + 'a;

/// Default cap on alternatives for full-domain operations (domain size
/// grows as `(n 2^{n-1})^T`). Overridable through `CDRU_MAX_N`.
pub const MAX_FULL_DOMAIN_ALTERNATIVES: usize = 4;
/// Hard cap on the number of periods.
pub const MAX_PERIODS: usize = 4;

/// Mode-dependent tolerances.
pub const CM_TOL: f64 = 1e-10;
pub const MARGINALITY_TOL: f64 = 1e-10;
pub const CSI_TOL: f64 = 1e-9;
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Float-mode threshold governing "strictly positive path".
pub const PATH_TOL: f64 = 1e-10;

fn effective_max_n() -> usize {
    std::env::var("CDRU_MAX_N")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(MAX_FULL_DOMAIN_ALTERNATIVES)
        .min(crate::lattice::MAX_ALTERNATIVES)
}

fn enforce_caps(n: usize, periods: usize) -> Result<()> {
    if periods == 0 || periods > MAX_PERIODS {
        return Err(Error::SizeCap(format!(
            "periods {periods} outside 1..={MAX_PERIODS}"
        )));
    }
    let max_n = effective_max_n();
    if n > max_n {
        return Err(Error::SizeCap(format!(
            "{n} alternatives exceed the full-domain cap {max_n}"
        )));
    }
    Ok(())
}

/// A (possibly partially observed) `T`-period choice-frequency table.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomJointChoiceRule<T> {
    n: usize,
    periods: usize,
    cells: BTreeMap<CellKey, T>,
    observed: BTreeSet<Vec<Menu>>,
}

impl<T: Scalar> RandomJointChoiceRule<T> {
    /// Builds a rule from explicit cells. Every distinct menu tuple among
    /// the keys counts as observed and its cells must be nonnegative and
    /// sum to one; missing in-tuple cells default to zero.
    pub fn from_cells(n: usize, periods: usize, cells: BTreeMap<CellKey, T>) -> Result<Self> {
        if periods == 0 {
            return Err(Error::DimensionMismatch("at least one period".into()));
        }
        let mut observed = BTreeSet::new();
        for ((menus, alts), v) in &cells {
            if menus.len() != periods || alts.len() != periods {
                return Err(Error::DimensionMismatch(format!(
                    "cell arity must be {periods}"
                )));
            }
            for (m, a) in menus.iter().zip(alts) {
                if m.is_empty() {
                    return Err(Error::EmptyMenu);
                }
                if !m.contains(*a) {
                    return Err(Error::NotInMenu {
                        alt: a.index(),
                        menu: m.0,
                    });
                }
            }
            if !v.is_nonneg_tol(crate::lattice::DISTRIBUTION_SUM_TOL) {
                return Err(Error::InvalidDistribution(format!(
                    "negative cell probability {v}"
                )));
            }
            observed.insert(menus.clone());
        }
        let rule = RandomJointChoiceRule {
            n,
            periods,
            cells,
            observed,
        };
        for menus in &rule.observed {
            let mut total = T::zero();
            for alts in tuple_alts(menus) {
                total += rule.value(menus, &alts);
            }
            if !total.eq_tol(&T::one(), crate::lattice::DISTRIBUTION_SUM_TOL) {
                return Err(Error::InvalidDistribution(format!(
                    "menu tuple {menus:?} sums to {total}"
                )));
            }
        }
        Ok(rule)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn observed(&self) -> &BTreeSet<Vec<Menu>> {
        &self.observed
    }

    pub fn is_observed(&self, menus: &[Menu]) -> bool {
        self.observed.contains(menus)
    }

    pub fn is_full_domain(&self) -> bool {
        let per_period = nonempty_menus(self.n).len();
        self.observed.len() == per_period.pow(self.periods as u32)
    }

    /// Cell value; zero for unobserved combinations inside an observed menu
    /// tuple, `None` when the menu tuple itself is unobserved.
    pub fn get(&self, menus: &[Menu], alts: &[Alt]) -> Option<T> {
        if !self.observed.contains(menus) {
            return None;
        }
        Some(self.value(menus, alts))
    }

    fn value(&self, menus: &[Menu], alts: &[Alt]) -> T {
        self.cells
            .get(&(menus.to_vec(), alts.to_vec()))
            .cloned()
            .unwrap_or_else(T::zero)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &T)> {
        self.cells.iter()
    }

    pub fn map_approx(&self) -> RandomJointChoiceRule<f64> {
        RandomJointChoiceRule {
            n: self.n,
            periods: self.periods,
            cells: self
                .cells
                .iter()
                .map(|(k, v)| (k.clone(), v.approx()))
                .collect(),
            observed: self.observed.clone(),
        }
    }

    /// Joint rule obtained from a first-period rule and consumption-indexed
    /// conditional choice probabilities:
    /// `p(x, y, A, B) = p₁(x, A) · cond[x](y, B)`. Marginality holds by
    /// construction.
    pub fn from_conditional(
        first: &RandomChoiceRule<T>,
        cond: &BTreeMap<Alt, RandomChoiceRule<T>>,
    ) -> Result<Self> {
        let n = first.n();
        let mut cells = BTreeMap::new();
        for a in first.menus() {
            for b in nonempty_menus(n) {
                for x in a.iter() {
                    let px = first.prob(x, a).unwrap_or_else(T::zero);
                    let row = cond.get(&x).ok_or_else(|| {
                        Error::IncompleteDomain(format!("no conditional rule for alternative {x}"))
                    })?;
                    for y in b.iter() {
                        let Some(py) = row.prob(y, b) else {
                            return Err(Error::IncompleteDomain(format!(
                                "conditional rule for {x} misses menu {:#04x}",
                                b.0
                            )));
                        };
                        cells.insert((vec![a, b], vec![x, y]), px.clone() * py);
                    }
                }
            }
        }
        Self::from_cells(n, 2, cells)
    }
}

/// All choice tuples inside a menu tuple, deterministic order.
fn tuple_alts(menus: &[Menu]) -> Vec<Vec<Alt>> {
    let mut tuples: Vec<Vec<Alt>> = vec![vec![]];
    for menu in menus {
        let mut next = Vec::with_capacity(tuples.len() * menu.len());
        for t in &tuples {
            for a in menu.iter() {
                let mut t2 = t.clone();
                t2.push(a);
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples
}

/// Truncated rules `p^τ` for τ = 1..periods, derived by summing the last
/// period out against the full menu. Requires the full domain.
fn truncated_rules<T: Scalar>(p: &RandomJointChoiceRule<T>) -> Result<Vec<BTreeMap<CellKey, T>>> {
    if !p.is_full_domain() {
        return Err(Error::IncompleteDomain(
            "truncation requires choice data on every menu tuple".into(),
        ));
    }
    let n = p.n;
    let full = Menu::full(n);
    let mut per_arity: Vec<BTreeMap<CellKey, T>> = Vec::with_capacity(p.periods);
    let top: BTreeMap<CellKey, T> = product_cells(n, p.periods)
        .into_iter()
        .map(|(menus, alts)| {
            let v = p.value(&menus, &alts);
            ((menus, alts), v)
        })
        .collect();
    per_arity.push(top);
    for tau in (1..p.periods).rev() {
        let longer = per_arity.last().expect("nonempty");
        let mut table = BTreeMap::new();
        for (menus, alts) in product_cells(n, tau) {
            let mut menus_x = menus.clone();
            menus_x.push(full);
            let mut total = T::zero();
            for y in full.iter() {
                let mut alts_y = alts.clone();
                alts_y.push(y);
                if let Some(v) = longer.get(&(menus_x.clone(), alts_y)) {
                    total += v.clone();
                }
            }
            table.insert((menus, alts), total);
        }
        per_arity.push(table);
    }
    per_arity.reverse(); // index τ-1 holds the arity-τ table
    Ok(per_arity)
}

// ---------------------------------------------------------------------------
// Axioms
// ---------------------------------------------------------------------------

/// One negative Möbius cell.
#[derive(Debug, Clone)]
pub struct CmViolation<T> {
    pub menus: Vec<Menu>,
    pub alts: Vec<Alt>,
    pub value: T,
}

/// Two-period increasing-differences failure (diagnostic).
#[derive(Debug, Clone)]
pub struct IncreasingDifferencesViolation<T> {
    pub alts: Vec<Alt>,
    pub small: Vec<Menu>,
    pub large: Vec<Menu>,
    pub gap: T,
}

#[derive(Debug, Clone)]
pub struct CompleteMonotonicityReport<T> {
    pub violations: Vec<CmViolation<T>>,
    /// Cells whose Möbius value was computable from the observed data.
    pub checked_cells: usize,
    /// Secondary diagnostic, evaluated for two-period rules only.
    pub increasing_differences: Vec<IncreasingDifferencesViolation<T>>,
}

impl<T> CompleteMonotonicityReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks nonnegativity of the Möbius inverse on every cell whose superset
/// tuples are all observed (the full check when the domain is complete).
pub fn check_complete_monotonicity<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
) -> Result<CompleteMonotonicityReport<T>> {
    enforce_caps(p.n, p.periods)?;
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for (menus, alts) in product_cells(p.n, p.periods) {
        let sups = superset_tuples(p.n, &menus);
        if !sups.iter().all(|s| p.is_observed(s)) {
            continue;
        }
        let mut q = T::zero();
        for sup in sups {
            let extra: usize = sup
                .iter()
                .zip(&menus)
                .map(|(s, m)| (s.0 & !m.0).count_ones() as usize)
                .sum();
            let v = p.value(&sup, &alts);
            if extra.is_multiple_of(2) {
                q += v;
            } else {
                q -= v;
            }
        }
        checked += 1;
        if q.is_negative_scalar() && !q.is_zero_tol(CM_TOL) {
            violations.push(CmViolation {
                menus: menus.clone(),
                alts: alts.clone(),
                value: q,
            });
        }
    }
    // Increasing differences across periods, two-period rules only:
    // p(x,y,A,B) − p(x,y,A,B′) ≥ p(x,y,A′,B) − p(x,y,A′,B′) whenever
    // A ⊆ A′ and B ⊆ B′.
    let mut increasing_differences = Vec::new();
    if p.periods == 2 {
        let menus = nonempty_menus(p.n);
        for &a in &menus {
            for &a2 in &menus {
                if a == a2 || !a.is_subset_of(a2) {
                    continue;
                }
                for &b in &menus {
                    for &b2 in &menus {
                        if b == b2 || !b.is_subset_of(b2) {
                            continue;
                        }
                        let pairs = [vec![a, b], vec![a, b2], vec![a2, b], vec![a2, b2]];
                        if !pairs.iter().all(|t| p.is_observed(t)) {
                            continue;
                        }
                        for x in a.iter() {
                            for y in b.iter() {
                                let alts = vec![x, y];
                                let lhs = p.value(&pairs[0], &alts) - p.value(&pairs[1], &alts);
                                let rhs = p.value(&pairs[2], &alts) - p.value(&pairs[3], &alts);
                                let gap = lhs - rhs;
                                if gap.is_negative_scalar() && !gap.is_zero_tol(CM_TOL) {
                                    increasing_differences.push(IncreasingDifferencesViolation {
                                        alts,
                                        small: pairs[0].clone(),
                                        large: pairs[3].clone(),
                                        gap,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CompleteMonotonicityReport {
        violations,
        checked_cells: checked,
        increasing_differences,
    })
}

#[derive(Debug, Clone)]
pub struct MarginalityViolation<T> {
    pub history_alts: Vec<Alt>,
    pub history_menus: Vec<Menu>,
    pub menu_b: Menu,
    pub menu_c: Menu,
    pub gap: T,
}

#[derive(Debug, Clone)]
pub struct MarginalityReport<T> {
    pub violations: Vec<MarginalityViolation<T>>,
    /// Violations of the equivalent Möbius identity
    /// `Σ_{y∈B} q(x⃗,y,A⃗,B) = Σ_{z∉B} q(x⃗,z,A⃗,B∪{z})` (full domain only).
    pub mobius_violations: Vec<MarginalityViolation<T>>,
    pub mobius_checked: bool,
}

impl<T> MarginalityReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Marginality: for every history and every pair of next-period menus, the
/// summed-out next-period choice frequencies agree. Independently verifies
/// the Möbius-identity form on full domains; the two verdicts must agree.
pub fn check_marginality<T: Scalar>(p: &RandomJointChoiceRule<T>) -> Result<MarginalityReport<T>> {
    enforce_caps(p.n, p.periods)?;
    let menus = nonempty_menus(p.n);
    let mut violations = Vec::new();
    for tau in 1..p.periods {
        for (hist_menus, hist_alts) in product_cells(p.n, tau) {
            for (bi, &b) in menus.iter().enumerate() {
                for &c in &menus[bi + 1..] {
                    // Compare the summed next-period mass between b and c,
                    // with the remaining periods (if any) summed against
                    // arbitrary-but-equal continuations: truncate by
                    // summing all later periods over the full menu.
                    let (Some(vb), Some(vc)) = (
                        truncated_mass(p, &hist_menus, &hist_alts, b),
                        truncated_mass(p, &hist_menus, &hist_alts, c),
                    ) else {
                        continue;
                    };
                    let gap = vb - vc;
                    if !gap.is_zero_tol(MARGINALITY_TOL) {
                        violations.push(MarginalityViolation {
                            history_alts: hist_alts.clone(),
                            history_menus: hist_menus.clone(),
                            menu_b: b,
                            menu_c: c,
                            gap,
                        });
                    }
                }
            }
        }
    }
    // Möbius-identity form on full domains.
    let mut mobius_violations = Vec::new();
    let mut mobius_checked = false;
    if p.is_full_domain() {
        mobius_checked = true;
        let tables = truncated_rules(p)?;
        for tau in 1..p.periods {
            let table = &tables[tau];
            let q = mobius_invert(p.n, tau + 1, |m, a| {
                table.get(&(m.to_vec(), a.to_vec())).cloned()
            })?;
            // For each history cell (x⃗, A⃗) of arity tau and each proper
            // nonempty B: Σ_{y∈B} q(x⃗ y, A⃗ B) = Σ_{z∉B} q(x⃗ z, A⃗ B∪{z}).
            for (hist_menus, hist_alts) in product_cells(p.n, tau) {
                for &b in &menus {
                    if b == Menu::full(p.n) {
                        continue;
                    }
                    let mut lhs = T::zero();
                    for y in b.iter() {
                        let mut m2 = hist_menus.clone();
                        m2.push(b);
                        let mut a2 = hist_alts.clone();
                        a2.push(y);
                        lhs += q.get(&m2, &a2).cloned().unwrap_or_else(T::zero);
                    }
                    let mut rhs = T::zero();
                    for z in Menu::full(p.n).iter() {
                        if b.contains(z) {
                            continue;
                        }
                        let mut m2 = hist_menus.clone();
                        m2.push(b.insert(z));
                        let mut a2 = hist_alts.clone();
                        a2.push(z);
                        rhs += q.get(&m2, &a2).cloned().unwrap_or_else(T::zero);
                    }
                    let gap = lhs - rhs;
                    if !gap.is_zero_tol(MARGINALITY_TOL) {
                        mobius_violations.push(MarginalityViolation {
                            history_alts: hist_alts.clone(),
                            history_menus: hist_menus.clone(),
                            menu_b: b,
                            menu_c: b,
                            gap,
                        });
                    }
                }
            }
        }
        if violations.is_empty() != mobius_violations.is_empty() {
            return Err(Error::Internal(
                "marginality and its Möbius form disagree".into(),
            ));
        }
    }
    Ok(MarginalityReport {
        violations,
        mobius_violations,
        mobius_checked,
    })
}

/// Mass of history `(x⃗, A⃗)` extended by one period at menu `b`, with all
/// later periods summed out; `None` when the needed tuples are unobserved.
fn truncated_mass<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
    hist_menus: &[Menu],
    hist_alts: &[Alt],
    b: Menu,
) -> Option<T> {
    let full = Menu::full(p.n);
    let mut menus = hist_menus.to_vec();
    menus.push(b);
    while menus.len() < p.periods {
        menus.push(full);
    }
    if !p.is_observed(&menus) {
        return None;
    }
    let mut total = T::zero();
    for tail in tuple_alts(&menus[hist_alts.len()..]) {
        let mut alts = hist_alts.to_vec();
        alts.extend(tail);
        total += p.value(&menus, &alts);
    }
    Some(total)
}

#[derive(Debug, Clone)]
pub struct CsiViolation<T> {
    pub history_alts: Vec<Alt>,
    pub menus_a: Vec<Menu>,
    pub menus_b: Vec<Menu>,
    pub next_alt: Alt,
    pub next_menu: Menu,
    pub gap: T,
}

#[derive(Debug, Clone)]
pub struct CsiReport<T> {
    pub violations: Vec<CsiViolation<T>>,
}

impl<T> CsiReport<T> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Choice-set independence: conditional on a consumption history, the next
/// period's choice distribution does not depend on the history's menus.
pub fn check_choice_set_independence<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
) -> Result<CsiReport<T>> {
    enforce_caps(p.n, p.periods)?;
    let menus = nonempty_menus(p.n);
    let mut violations = Vec::new();
    for tau in 1..p.periods {
        // Histories grouped by consumption tuple.
        let mut by_consumption: BTreeMap<Vec<Alt>, Vec<(Vec<Menu>, T)>> = BTreeMap::new();
        for (hist_menus, hist_alts) in product_cells(p.n, tau) {
            if let Some(mass) = history_mass(p, &hist_menus, &hist_alts) {
                if mass.approx() > 0.0 {
                    by_consumption
                        .entry(hist_alts)
                        .or_default()
                        .push((hist_menus, mass));
                }
            }
        }
        for (hist_alts, variants) in by_consumption {
            if variants.len() < 2 {
                continue;
            }
            let (ref_menus, ref_mass) = variants[0].clone();
            for (other_menus, other_mass) in &variants[1..] {
                for &b in &menus {
                    for y in b.iter() {
                        let (Some(pa), Some(pb)) = (
                            extension_mass(p, &ref_menus, &hist_alts, b, y),
                            extension_mass(p, other_menus, &hist_alts, b, y),
                        ) else {
                            continue;
                        };
                        let lhs = pa / ref_mass.clone();
                        let rhs = pb / other_mass.clone();
                        let gap = lhs - rhs;
                        if !gap.is_zero_tol(CSI_TOL) {
                            violations.push(CsiViolation {
                                history_alts: hist_alts.clone(),
                                menus_a: ref_menus.clone(),
                                menus_b: other_menus.clone(),
                                next_alt: y,
                                next_menu: b,
                                gap,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(CsiReport { violations })
}

/// Probability of a history with all later periods summed out; `None` when
/// unobserved.
fn history_mass<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
    hist_menus: &[Menu],
    hist_alts: &[Alt],
) -> Option<T> {
    let full = Menu::full(p.n);
    let mut menus = hist_menus.to_vec();
    while menus.len() < p.periods {
        menus.push(full);
    }
    if !p.is_observed(&menus) {
        // Fall back to any observed extension; marginality makes the
        // choice irrelevant on consistent data.
        let candidates: Vec<&Vec<Menu>> = p
            .observed
            .iter()
            .filter(|m| m[..hist_menus.len()] == *hist_menus)
            .collect();
        let menus = candidates.first()?.to_vec();
        let mut total = T::zero();
        for tail in tuple_alts(&menus[hist_alts.len()..]) {
            let mut alts = hist_alts.to_vec();
            alts.extend(tail);
            total += p.value(&menus, &alts);
        }
        return Some(total);
    }
    let mut total = T::zero();
    for tail in tuple_alts(&menus[hist_alts.len()..]) {
        let mut alts = hist_alts.to_vec();
        alts.extend(tail);
        total += p.value(&menus, &alts);
    }
    Some(total)
}

/// Probability of the history followed by choosing `y` from `b`, later
/// periods summed out.
fn extension_mass<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
    hist_menus: &[Menu],
    hist_alts: &[Alt],
    b: Menu,
    y: Alt,
) -> Option<T> {
    let mut menus = hist_menus.to_vec();
    menus.push(b);
    let mut alts = hist_alts.to_vec();
    alts.push(y);
    let full = Menu::full(p.n);
    let mut menus_ext = menus.clone();
    while menus_ext.len() < p.periods {
        menus_ext.push(full);
    }
    if !p.is_observed(&menus_ext) {
        let candidates: Vec<&Vec<Menu>> = p
            .observed
            .iter()
            .filter(|m| m[..menus.len()] == *menus)
            .collect();
        let menus_ext = candidates.first()?.to_vec();
        let mut total = T::zero();
        for tail in tuple_alts(&menus_ext[alts.len()..]) {
            let mut alts2 = alts.clone();
            alts2.extend(tail);
            total += p.value(&menus_ext, &alts2);
        }
        return Some(total);
    }
    let mut total = T::zero();
    for tail in tuple_alts(&menus_ext[alts.len()..]) {
        let mut alts2 = alts.clone();
        alts2.extend(tail);
        total += p.value(&menus_ext, &alts2);
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// History graphs and the decomposition
// ---------------------------------------------------------------------------

/// Subset-lattice flow graph attached to a (possibly null) history: nodes
/// are subsets of the ground set, the edge `B → B∖{y}` carries the
/// truncated Möbius weight of choosing `y` next from `B`.
#[derive(Debug, Clone)]
pub struct HistoryGraph<T> {
    pub history: Option<(Vec<Alt>, Vec<Menu>)>,
    pub n: usize,
    /// Edge `B → B∖{y}` keyed by `(y, B)`.
    pub capacities: BTreeMap<(Alt, Menu), T>,
}

impl<T: Scalar> HistoryGraph<T> {
    pub fn edge_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn node_count(&self) -> usize {
        1 << self.n
    }

    pub fn outflow(&self, node: Menu) -> T {
        node.iter()
            .map(|y| {
                self.capacities
                    .get(&(y, node))
                    .cloned()
                    .unwrap_or_else(T::zero)
            })
            .sum()
    }

    pub fn inflow(&self, node: Menu) -> T {
        Menu::full(self.n)
            .iter()
            .filter(|z| !node.contains(*z))
            .map(|z| {
                self.capacities
                    .get(&(z, node.insert(z)))
                    .cloned()
                    .unwrap_or_else(T::zero)
            })
            .sum()
    }

    /// Inflow equals outflow at every interior node.
    pub fn check_conservation(&self, tol: f64) -> Result<()> {
        let full = Menu::full(self.n);
        for mask in 1..full.0 {
            let node = Menu(mask);
            let gap = self.inflow(node) - self.outflow(node);
            if !gap.is_zero_tol(tol) {
                return Err(Error::Internal(format!(
                    "flow conservation fails at node {mask:#04x} by {gap}"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the graph family: one graph for the null history and one per
/// positive-probability history of each length below `periods`. Requires
/// the full domain and marginality.
pub fn build_history_graphs<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
) -> Result<Vec<HistoryGraph<T>>> {
    enforce_caps(p.n, p.periods)?;
    let marginality = check_marginality(p)?;
    if !marginality.holds() {
        return Err(Error::AxiomViolated(format!(
            "marginality fails at {} histories",
            marginality.violations.len()
        )));
    }
    let tables = truncated_rules(p)?;
    let mobius: Vec<MobiusTable<T>> = (0..p.periods)
        .map(|tau| {
            mobius_invert(p.n, tau + 1, |m, a| {
                tables[tau].get(&(m.to_vec(), a.to_vec())).cloned()
            })
        })
        .collect::<Result<_>>()?;
    let mut graphs = Vec::new();
    graphs.push(HistoryGraph {
        history: None,
        n: p.n,
        capacities: first_period_capacities(p.n, &mobius[0]),
    });
    for tau in 1..p.periods {
        for (hist_menus, hist_alts) in product_cells(p.n, tau) {
            let mass = mobius[tau - 1]
                .get(&hist_menus, &hist_alts)
                .cloned()
                .unwrap_or_else(T::zero);
            if mass.is_zero_tol(PATH_TOL) || mass.is_negative_scalar() {
                continue;
            }
            let mut capacities = BTreeMap::new();
            for b in nonempty_menus(p.n) {
                for y in b.iter() {
                    let mut m2 = hist_menus.clone();
                    m2.push(b);
                    let mut a2 = hist_alts.clone();
                    a2.push(y);
                    let v = mobius[tau].get(&m2, &a2).cloned().unwrap_or_else(T::zero);
                    capacities.insert((y, b), v);
                }
            }
            graphs.push(HistoryGraph {
                history: Some((hist_alts, hist_menus)),
                n: p.n,
                capacities,
            });
        }
    }
    for g in &graphs {
        g.check_conservation(MARGINALITY_TOL)?;
    }
    Ok(graphs)
}

fn first_period_capacities<T: Scalar>(n: usize, q1: &MobiusTable<T>) -> BTreeMap<(Alt, Menu), T> {
    let mut capacities = BTreeMap::new();
    for b in nonempty_menus(n) {
        for y in b.iter() {
            let v = q1.get(&[b], &[y]).cloned().unwrap_or_else(T::zero);
            capacities.insert((y, b), v);
        }
    }
    capacities
}

/// Path-flow decomposition of one history graph into a distribution over
/// orders. Zero total outflow yields the uniform distribution. Each
/// iteration peels the lexicographically smallest strictly positive path
/// from the full set to the empty set and zeroes at least one edge, so the
/// loop runs at most `edge count` times.
pub fn decompose_graph<T: Scalar>(
    graph: &HistoryGraph<T>,
    space: &OrderSpace,
) -> Result<OrderDistribution<T>> {
    let n = graph.n;
    let full = Menu::full(n);
    let total = graph.outflow(full);
    if total.is_zero_tol(PATH_TOL) {
        return Ok(OrderDistribution::uniform(space.count()));
    }
    let mut caps = graph.capacities.clone();
    for v in caps.values_mut() {
        *v = v.clone() / total.clone();
    }
    let mut weights = vec![T::zero(); space.count()];
    let positive = |v: &T| {
        if T::EXACT {
            !v.is_zero() && !v.is_negative_scalar()
        } else {
            v.approx() > PATH_TOL
        }
    };
    let max_iters = caps.len() + 1;
    for _ in 0..max_iters {
        // Lexicographically smallest positive path: at each node remove the
        // highest-indexed alternative with positive capacity, which yields
        // the smallest next bitmask.
        if !positive(
            &caps
                .iter()
                .filter(|((_, b), _)| *b == full)
                .map(|(_, v)| v.clone())
                .sum(),
        ) {
            break;
        }
        let mut node = full;
        let mut path: Vec<(Alt, Menu)> = Vec::with_capacity(n);
        while !node.is_empty() {
            let mut chosen: Option<Alt> = None;
            for y in node.iter() {
                if caps.get(&(y, node)).map(positive).unwrap_or(false) {
                    chosen = Some(y); // keep scanning: highest index wins
                }
            }
            let Some(y) = chosen else {
                return Err(Error::Internal(
                    "positive outflow without a positive path (conservation breach)".into(),
                ));
            };
            path.push((y, node));
            node = node.remove(y);
        }
        let r = path
            .iter()
            .map(|k| caps[k].clone())
            .min_by(|a, b| a.partial_cmp(b).expect("comparable"))
            .expect("nonempty path");
        let ranking: Vec<Alt> = path.iter().map(|(y, _)| *y).collect();
        let order = LinearOrder::new(ranking).expect("path is a permutation");
        let id = space.id_of(&order).expect("enumerated order");
        weights[id] += r.clone();
        for key in &path {
            let v = caps.get_mut(key).expect("edge on path");
            *v = v.clone() - r.clone();
            if v.is_zero_tol(PATH_TOL) {
                *v = T::zero();
            }
        }
    }
    // All capacity must be consumed.
    for (key, v) in &caps {
        if positive(v) {
            return Err(Error::Internal(format!(
                "decomposition terminated with positive capacity at {key:?}"
            )));
        }
    }
    OrderDistribution::new(weights)
}

// ---------------------------------------------------------------------------
// Representation
// ---------------------------------------------------------------------------

/// A first-period distribution over orders plus history-indexed kernels.
///
/// Kernels are keyed by the consumption history together with the chain of
/// first-period-style order classes (each class is the menu on which the
/// consumed alternative was exactly maximal); in state-independent mode the
/// class chain is dropped. Histories without an entry (unreachable under
/// the rule) are served the uniform distribution on demand.
#[derive(Debug, Clone)]
pub struct CdruRepresentation<T> {
    pub n: usize,
    pub periods: usize,
    pub initial: OrderDistribution<T>,
    pub kernels: BTreeMap<(Vec<Alt>, Vec<Menu>), OrderDistribution<T>>,
    pub state_independent: bool,
}

impl<T: Scalar> CdruRepresentation<T> {
    /// Kernel for the given consumption history and class chain.
    pub fn kernel_for(&self, consumed: &[Alt], classes: &[Menu]) -> OrderDistribution<T> {
        let key = if self.state_independent {
            (consumed.to_vec(), Vec::new())
        } else {
            (consumed.to_vec(), classes.to_vec())
        };
        self.kernels
            .get(&key)
            .cloned()
            .unwrap_or_else(|| OrderDistribution::uniform(factorial(self.n)))
    }

    /// Forward generation of the full-domain rule this representation
    /// induces.
    pub fn forward_rule(&self, space: &Arc<OrderSpace>) -> Result<RandomJointChoiceRule<T>> {
        forward_from(
            self.n,
            self.periods,
            space,
            &self.initial,
            &|consumed: &[Alt], classes: &[Menu]| self.kernel_for(consumed, classes),
        )
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Forward generation: `p(x⃗, A⃗) = Σ ν(≻₁) ∏ t(x⃗, ≻⃗)(≻_{τ+1})` over order
/// tuples in the product of upper sets. Orders are grouped by their class
/// (the menu on which the period's choice is exactly maximal), which keeps
/// the recursion branching on menus rather than orders.
fn forward_from<T: Scalar>(
    n: usize,
    periods: usize,
    space: &Arc<OrderSpace>,
    initial: &OrderDistribution<T>,
    kernel: &KernelLookup<'_, T>,
) -> Result<RandomJointChoiceRule<T>> {
    enforce_caps(n, periods)?;
    let mut cells = BTreeMap::new();
    for (menus, alts) in product_cells(n, periods) {
        let mut total = T::zero();
        let mut classes: Vec<Menu> = Vec::with_capacity(periods);
        cell_mass(
            space,
            initial,
            kernel,
            &menus,
            &alts,
            0,
            &mut classes,
            T::one(),
            &mut total,
        );
        cells.insert((menus, alts), total);
    }
    RandomJointChoiceRule::from_cells(n, periods, cells)
}

#[allow(clippy::too_many_arguments)]
fn cell_mass<T: Scalar>(
    space: &Arc<OrderSpace>,
    initial: &OrderDistribution<T>,
    kernel: &KernelLookup<'_, T>,
    menus: &[Menu],
    alts: &[Alt],
    depth: usize,
    classes: &mut Vec<Menu>,
    weight: T,
    total: &mut T,
) {
    if depth == menus.len() {
        *total += weight;
        return;
    }
    let dist = if depth == 0 {
        initial.clone()
    } else {
        kernel(&alts[..depth], classes)
    };
    let x = alts[depth];
    for class in menus[depth].supersets(space.n()) {
        let ids = space.strict_set(x, class).expect("x in class");
        let mass = dist.mass_of(&ids);
        if mass.is_zero() {
            continue;
        }
        classes.push(class);
        cell_mass(
            space,
            initial,
            kernel,
            menus,
            alts,
            depth + 1,
            classes,
            weight.clone() * mass,
            total,
        );
        classes.pop();
    }
}

/// Forward generation from an explicit first-period distribution and a
/// one-period Markov kernel applied at every later period.
pub fn forward_from_markov<T: Scalar>(
    nu: &OrderDistribution<T>,
    t: &crate::dynamics::TransitionFunction<T>,
    periods: usize,
) -> Result<RandomJointChoiceRule<T>> {
    let space = Arc::clone(t.space());
    if nu.len() != space.count() {
        return Err(Error::DimensionMismatch("distribution size".into()));
    }
    enforce_caps(space.n(), periods)?;
    let n = space.n();
    let mut cells = BTreeMap::new();
    // The kernel is Markovian, so tracking the current order suffices.
    // `depth` is the period whose order is `current`; once it reaches the
    // final period the accumulated weight is the tuple's mass.
    #[allow(clippy::too_many_arguments)]
    fn rec<T: Scalar>(
        space: &OrderSpace,
        t: &crate::dynamics::TransitionFunction<T>,
        menus: &[Menu],
        alts: &[Alt],
        depth: usize,
        current: crate::lattice::OrderId,
        weight: T,
        total: &mut T,
    ) {
        if depth + 1 == menus.len() {
            *total += weight;
            return;
        }
        let dist = t.row(alts[depth], current);
        for next in space
            .upper_set(alts[depth + 1], menus[depth + 1])
            .expect("member")
        {
            let w = dist.weight(next);
            if w.is_zero() {
                continue;
            }
            rec(
                space,
                t,
                menus,
                alts,
                depth + 1,
                next,
                weight.clone() * w.clone(),
                total,
            );
        }
    }
    for (menus, alts) in product_cells(n, periods) {
        let mut total = T::zero();
        for first in space.upper_set(alts[0], menus[0])? {
            let w = nu.weight(first);
            if w.is_zero() {
                continue;
            }
            rec(&space, t, &menus, &alts, 0, first, w.clone(), &mut total);
        }
        cells.insert((menus, alts), total);
    }
    RandomJointChoiceRule::from_cells(n, periods, cells)
}

/// Recovers a representation by decomposing every history graph.
///
/// With `state_independent` set, choice-set independence is additionally
/// required and kernels are keyed by consumption history alone (the
/// decompositions across menu histories are checked to coincide).
pub fn decompose<T: Scalar>(
    p: &RandomJointChoiceRule<T>,
    state_independent: bool,
) -> Result<CdruRepresentation<T>> {
    enforce_caps(p.n, p.periods)?;
    let cm = check_complete_monotonicity(p)?;
    if !cm.holds() {
        return Err(Error::AxiomViolated(format!(
            "complete monotonicity fails at {} cells",
            cm.violations.len()
        )));
    }
    if state_independent {
        let csi = check_choice_set_independence(p)?;
        if !csi.holds() {
            return Err(Error::AxiomViolated(format!(
                "choice-set independence fails at {} cells",
                csi.violations.len()
            )));
        }
    }
    let space = Arc::new(OrderSpace::new(p.n));
    let graphs = build_history_graphs(p)?;
    let mut initial = None;
    let mut kernels: BTreeMap<(Vec<Alt>, Vec<Menu>), OrderDistribution<T>> = BTreeMap::new();
    for graph in &graphs {
        let dist = decompose_graph(graph, &space)?;
        match &graph.history {
            None => initial = Some(dist),
            Some((alts, menus)) => {
                let key = if state_independent {
                    (alts.clone(), Vec::new())
                } else {
                    (alts.clone(), menus.clone())
                };
                if let Some(existing) = kernels.get(&key) {
                    // State independence promises menu-history-free kernels.
                    let agree = existing
                        .weights()
                        .iter()
                        .zip(dist.weights())
                        .all(|(a, b)| a.eq_tol(b, RECONSTRUCTION_TOL));
                    if !agree {
                        return Err(Error::Internal(
                            "state-independent kernels differ across menu histories".into(),
                        ));
                    }
                } else {
                    kernels.insert(key, dist);
                }
            }
        }
    }
    let rep = CdruRepresentation {
        n: p.n,
        periods: p.periods,
        initial: initial.ok_or_else(|| Error::Internal("missing null history".into()))?,
        kernels,
        state_independent,
    };
    // The recovered representation must reproduce the data.
    if !verify_representation(&rep, p)? {
        return Err(Error::Internal(
            "decomposition failed to reconstruct the rule".into(),
        ));
    }
    Ok(rep)
}

/// Whether the representation's forward rule reproduces `p` cellwise
/// (exactly in rational mode, within tolerance in float mode).
pub fn verify_representation<T: Scalar>(
    rep: &CdruRepresentation<T>,
    p: &RandomJointChoiceRule<T>,
) -> Result<bool> {
    if rep.n != p.n || rep.periods != p.periods {
        return Err(Error::DimensionMismatch(
            "representation and rule disagree on the domain".into(),
        ));
    }
    let space = Arc::new(OrderSpace::new(rep.n));
    let forward = rep.forward_rule(&space)?;
    for (menus, alts) in product_cells(p.n, p.periods) {
        let Some(expected) = p.get(&menus, &alts) else {
            continue;
        };
        let got = forward.value(&menus, &alts);
        if !got.eq_tol(&expected, RECONSTRUCTION_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone)]
pub struct IdentificationMismatch<T> {
    pub menus: Vec<Menu>,
    pub alts: Vec<Alt>,
    pub mobius: T,
    pub representation: T,
}

#[derive(Debug, Clone)]
pub struct IdentificationReport<T> {
    pub mismatches: Vec<IdentificationMismatch<T>>,
    pub checked_cells: usize,
}

impl<T> IdentificationReport<T> {
    pub fn holds(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Cellwise identification identity: the Möbius inverse of the rule must
/// equal the representation's mass on the product of exact-maximality
/// classes, `Σ_{≻ᵢ ∈ I(xᵢ, Aᵢ)} ν(≻₁) ∏ t(x⃗, classes)(≻_{τ+1})`.
pub fn identification_check<T: Scalar>(
    rep: &CdruRepresentation<T>,
    p: &RandomJointChoiceRule<T>,
) -> Result<IdentificationReport<T>> {
    if rep.n != p.n || rep.periods != p.periods {
        return Err(Error::DimensionMismatch(
            "representation and rule disagree on the domain".into(),
        ));
    }
    if !p.is_full_domain() {
        return Err(Error::IncompleteDomain(
            "identification requires the full domain".into(),
        ));
    }
    let space = Arc::new(OrderSpace::new(p.n));
    let q = mobius_invert(p.n, p.periods, |m, a| p.get(m, a))?;
    let mut mismatches = Vec::new();
    let mut checked = 0usize;
    for (menus, alts) in product_cells(p.n, p.periods) {
        // Inside I(xᵢ, Aᵢ) the class chain is exactly the menu chain, so
        // the multiple sum collapses into a product of class masses.
        let mut value = rep.initial.mass_of(&space.strict_set(alts[0], menus[0])?);
        for tau in 1..p.periods {
            if value.is_zero() {
                break;
            }
            let dist = rep.kernel_for(&alts[..tau], &menus[..tau]);
            value *= dist.mass_of(&space.strict_set(alts[tau], menus[tau])?);
        }
        let mob = q.get(&menus, &alts).cloned().unwrap_or_else(T::zero);
        checked += 1;
        if !value.eq_tol(&mob, RECONSTRUCTION_TOL) {
            mismatches.push(IdentificationMismatch {
                menus,
                alts,
                mobius: mob,
                representation: value,
            });
        }
    }
    Ok(IdentificationReport {
        mismatches,
        checked_cells: checked,
    })
}

/// A generated instance: first-period distribution, Markov kernel, and the
/// full-domain rule they induce.
pub type GeneratedInstance = (
    OrderDistribution<BigRational>,
    crate::dynamics::TransitionFunction<BigRational>,
    RandomJointChoiceRule<BigRational>,
);

/// Random joint choice rule generated by a seeded rational pair
/// (first-period distribution, Markov kernel). Used heavily by the test
/// suites.
pub fn random_cdru_instance(
    n: usize,
    periods: usize,
    state_independent: bool,
    rng: &mut impl rand::Rng,
) -> Result<GeneratedInstance> {
    use crate::behaviors::random_simplex_weights;
    let space = Arc::new(OrderSpace::new(n));
    let count = space.count();
    let denom = 8 * count as i64;
    let nu = OrderDistribution::new(random_simplex_weights(count, denom, rng))?;
    let t = if state_independent {
        let rows: Vec<OrderDistribution<BigRational>> = (0..n)
            .map(|_| OrderDistribution::new(random_simplex_weights(count, denom, rng)))
            .collect::<Result<_>>()?;
        crate::dynamics::TransitionFunction::build(Arc::clone(&space), |x, _from| {
            Ok(rows[x.index()].clone())
        })?
    } else {
        crate::dynamics::TransitionFunction::build(Arc::clone(&space), |_x, _from| {
            OrderDistribution::new(random_simplex_weights(count, denom, rng))
        })?
    };
    let p = forward_from_markov(&nu, &t, periods)?;
    Ok((nu, t, p))
}
