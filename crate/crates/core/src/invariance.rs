//! Menu-invariance testing.
//!
//! A transition function admits a classical random-utility reading exactly
//! when a single distribution over orders is invariant for every menu chain.
//! This module decides that three ways and proves they agree:
//!
//! 1. directly, by comparing per-menu stationary distributions (or, without
//!    full support, by searching for a common invariant distribution);
//! 2. through local invariance: the average next-period kernel after
//!    choosing `x` from `A` must match the average after being forced into
//!    `A ∖ {x}` while preferring `x`;
//! 3. through a no-investment condition: no nonnegative, not identically
//!    zero investment plan across menus is strictly profitable in every
//!    preference state. Certificates for either branch are produced in exact
//!    arithmetic and re-verified before being returned.
//!
//! The residual machinery also quantifies *how far* invariance fails: the
//! residual vector, weighted by mean passage times of the reduced chain,
//! reproduces the stationary distribution of the reduced menu exactly.

use crate::dynamics::{
    all_menu_chains, best_common_invariant, chain_from_matrix, joint_chain, joint_stationary,
    menu_chain, rho, stationary, ArrivalFunction, InvariantOutcome, MenuChain, PassageMatrix,
    TransitionFunction,
};
use crate::error::{Error, Result};
use crate::lattice::{menus_size2, Alt, Menu, OrderDistribution, OrderSpace};
use crate::lp;
use crate::mat::Mat;
use crate::num::Scalar;
use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::sync::Arc;

/// Float-mode tolerance for distribution comparisons.
pub const INVARIANCE_TOL: f64 = 1e-10;
/// Float-mode tolerance on the residual identities.
pub const RESIDUAL_IDENTITY_TOL: f64 = 1e-9;
/// Singular values below this count as zero in the rank check.
pub const RANK_TOL: f64 = 1e-9;

/// Signed residual `ε_A = ν [M_A − M_{A∖{x}}]` measuring how the average
/// next-period distribution changes when `x` is removed from the menu.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalResidual<T> {
    pub menu: Menu,
    pub removed: Alt,
    pub values: Vec<T>,
}

impl<T: Scalar> LocalResidual<T> {
    /// Both sides of the defining equation carry the same mass, so the
    /// entries always sum to zero.
    pub fn mass_balance(&self) -> T {
        self.values.iter().cloned().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.abs_val().approx())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.is_zero_tol(tol))
    }
}

/// Residual of removing `x` from `menu` under distribution `nu`, computed as
/// the conditional double sum and cross-checked against the matrix form.
pub fn local_residual<T: Scalar>(
    t: &TransitionFunction<T>,
    nu: &OrderDistribution<T>,
    menu: Menu,
    x: Alt,
) -> Result<LocalResidual<T>> {
    if !menu.contains(x) {
        return Err(Error::NotInMenu {
            alt: x.index(),
            menu: menu.0,
        });
    }
    if menu.len() < 3 {
        return Err(Error::MenuTooSmall {
            menu: menu.0,
            need: 3,
        });
    }
    let space = t.space();
    let count = space.count();
    let reduced = menu.remove(x);
    let chooses_x = space.upper_set(x, menu)?;
    // Average next-period weights after choosing x from the full menu.
    let mut lhs = vec![T::zero(); count];
    for &o in &chooses_x {
        let w = nu.weight(o);
        if w.is_zero() {
            continue;
        }
        let row = t.row(x, o);
        for to in 0..count {
            lhs[to] += w.clone() * row.weight(to).clone();
        }
    }
    // Average after the same orders are forced into the reduced menu.
    let mut rhs = vec![T::zero(); count];
    for &o in &chooses_x {
        let w = nu.weight(o);
        if w.is_zero() {
            continue;
        }
        let y = space.maximizer_id(o, reduced)?;
        let row = t.row(y, o);
        for to in 0..count {
            rhs[to] += w.clone() * row.weight(to).clone();
        }
    }
    let values: Vec<T> = lhs.into_iter().zip(rhs).map(|(l, r)| l - r).collect();
    // Matrix form: ν [M_A − M_{A∖{x}}].
    let full_row = menu_chain(t, menu)?.matrix().vec_mul(nu.weights());
    let red_row = menu_chain(t, reduced)?.matrix().vec_mul(nu.weights());
    for ((v, f), r) in values.iter().zip(&full_row).zip(&red_row) {
        let matrix_form = f.clone() - r.clone();
        if !v.eq_tol(&matrix_form, RESIDUAL_IDENTITY_TOL) {
            return Err(Error::Internal(
                "conditional and matrix residual forms disagree".into(),
            ));
        }
    }
    Ok(LocalResidual {
        menu,
        removed: x,
        values,
    })
}

/// Whether every removal residual vanishes for `nu`, over menus with at
/// least three members.
pub fn is_locally_invariant<T: Scalar>(
    t: &TransitionFunction<T>,
    nu: &OrderDistribution<T>,
) -> Result<bool> {
    for menu in menus_size2(t.n()) {
        if menu.len() < 3 {
            continue;
        }
        for x in menu.iter() {
            if !local_residual(t, nu, menu, x)?.is_zero(INVARIANCE_TOL) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Witness accompanying a direct menu-invariance verdict.
#[derive(Debug, Clone)]
pub enum InvarianceWitness<T> {
    /// A distribution invariant for every size-2+ menu chain.
    CommonDistribution(OrderDistribution<T>),
    /// Two menus whose stationary distributions differ.
    MismatchedPair { reference: Menu, other: Menu },
    /// No common invariant distribution exists (established by LP).
    NoCommonInvariant,
}

#[derive(Debug, Clone)]
pub struct MenuInvariance<T> {
    pub invariant: bool,
    pub witness: InvarianceWitness<T>,
}

/// Direct test: with full support, compares all per-menu stationary
/// distributions against the full-menu one; otherwise searches for a common
/// invariant distribution in exact arithmetic.
pub fn is_menu_invariant_direct(
    t: &TransitionFunction<BigRational>,
) -> Result<MenuInvariance<BigRational>> {
    if t.full_support() {
        return direct_by_comparison(t);
    }
    match crate::dynamics::invariant_distribution_common(t)? {
        Some(nu) => Ok(MenuInvariance {
            invariant: true,
            witness: InvarianceWitness::CommonDistribution(nu),
        }),
        None => {
            // Prefer a concrete mismatched pair when per-menu stationary
            // distributions exist.
            if let Ok(out) = direct_by_comparison(t) {
                return Ok(out);
            }
            Ok(MenuInvariance {
                invariant: false,
                witness: InvarianceWitness::NoCommonInvariant,
            })
        }
    }
}

fn direct_by_comparison<T: Scalar>(t: &TransitionFunction<T>) -> Result<MenuInvariance<T>> {
    let full = Menu::full(t.n());
    let reference = stationary(&menu_chain(t, full)?)?;
    for menu in menus_size2(t.n()) {
        if menu == full {
            continue;
        }
        let nu = stationary(&menu_chain(t, menu)?)?;
        let same = nu
            .weights()
            .iter()
            .zip(reference.weights())
            .all(|(a, b)| a.eq_tol(b, INVARIANCE_TOL));
        if !same {
            return Ok(MenuInvariance {
                invariant: false,
                witness: InvarianceWitness::MismatchedPair {
                    reference: full,
                    other: menu,
                },
            });
        }
    }
    Ok(MenuInvariance {
        invariant: true,
        witness: InvarianceWitness::CommonDistribution(reference),
    })
}

/// Cross-check of the local and direct characterizations from a single
/// reference menu (the full set by default).
#[derive(Debug, Clone)]
pub struct InvarianceReport<T> {
    pub reference_menu: Menu,
    pub reference_distribution: OrderDistribution<T>,
    pub locally_invariant: bool,
    pub menu_invariant: bool,
    pub max_residual: f64,
}

/// Computes the stationary distribution at `reference` (default: full menu),
/// tests local invariance with respect to it, runs the direct test, and
/// insists the verdicts agree.
pub fn invariance_report(
    t: &TransitionFunction<BigRational>,
    reference: Option<Menu>,
) -> Result<InvarianceReport<BigRational>> {
    let reference_menu = reference.unwrap_or(Menu::full(t.n()));
    let reference_distribution = stationary(&menu_chain(t, reference_menu)?)?;
    let mut max_residual = 0.0f64;
    let mut locally_invariant = true;
    for menu in menus_size2(t.n()) {
        if menu.len() < 3 {
            continue;
        }
        for x in menu.iter() {
            let eps = local_residual(t, &reference_distribution, menu, x)?;
            max_residual = max_residual.max(eps.max_abs());
            if !eps.is_zero(INVARIANCE_TOL) {
                locally_invariant = false;
            }
        }
    }
    let direct = is_menu_invariant_direct(t)?;
    if direct.invariant != locally_invariant {
        return Err(Error::Internal(format!(
            "local and direct menu-invariance verdicts disagree: local={locally_invariant} direct={}",
            direct.invariant
        )));
    }
    Ok(InvarianceReport {
        reference_menu,
        reference_distribution,
        locally_invariant,
        menu_invariant: direct.invariant,
        max_residual,
    })
}

/// Both residuals of a menu pair plus the identity
/// `ε_A − ε_{A∖{x}} = (ν_A − ν_{A∖{x}}) [M_A − M_{A∖{x}}]`.
#[derive(Debug, Clone)]
pub struct ResidualPair<T> {
    pub eps_full: Vec<T>,
    pub eps_reduced: Vec<T>,
    /// Worst entrywise gap between the two evaluation routes.
    pub identity_gap: f64,
}

/// Evaluates `ε_A`, `ε_{A∖{x}}`, and checks the difference identity by
/// computing both sides independently.
pub fn residual_pair_identity<T: Scalar>(
    nu_full: &OrderDistribution<T>,
    nu_reduced: &OrderDistribution<T>,
    chain_full: &MenuChain<T>,
    chain_reduced: &MenuChain<T>,
) -> ResidualPair<T> {
    let diff = chain_full.matrix().sub(chain_reduced.matrix());
    let eps_full = diff.vec_mul(nu_full.weights());
    let eps_reduced = diff.vec_mul(nu_reduced.weights());
    let nu_diff: Vec<T> = nu_full
        .weights()
        .iter()
        .zip(nu_reduced.weights())
        .map(|(a, b)| a.clone() - b.clone())
        .collect();
    let rhs = diff.vec_mul(&nu_diff);
    let identity_gap = eps_full
        .iter()
        .zip(&eps_reduced)
        .zip(&rhs)
        .map(|((f, r), rh)| ((f.clone() - r.clone()) - rh.clone()).abs_val().approx())
        .fold(0.0, f64::max);
    ResidualPair {
        eps_full,
        eps_reduced,
        identity_gap,
    }
}

/// Recovers `ν_A − ν_{A∖{x}}` from the residual difference by multiplying
/// with the Moore–Penrose inverse of the chain difference.
///
/// The inversion is only meaningful when the difference matrix has full
/// rank. A difference of two row-stochastic matrices annihilates the
/// all-ones vector, so genuine menu-chain inputs always land in the
/// `RankDeficient` error; the routine stays total for general matrices.
pub fn stationary_gap_pseudoinverse(
    eps_full: &[f64],
    eps_reduced: &[f64],
    m_full: &Mat<f64>,
    m_reduced: &Mat<f64>,
) -> Result<Vec<f64>> {
    let n = m_full.nrows();
    if m_full.ncols() != n || m_reduced.nrows() != n || m_reduced.ncols() != n {
        return Err(Error::DimensionMismatch(
            "difference matrix must be square".into(),
        ));
    }
    let diff = m_full.sub(m_reduced);
    let d = DMatrix::from_fn(n, n, |i, j| diff[(i, j)]);
    let svd = d.clone().svd(false, false);
    if svd.singular_values.iter().any(|s| *s <= RANK_TOL) {
        return Err(Error::RankDeficient);
    }
    let pinv = d
        .pseudo_inverse(RANK_TOL)
        .map_err(|_| Error::RankDeficient)?;
    let eps_diff: Vec<f64> = eps_full
        .iter()
        .zip(eps_reduced)
        .map(|(a, b)| a - b)
        .collect();
    let mut out = vec![0.0; n];
    for j in 0..n {
        for (i, e) in eps_diff.iter().enumerate() {
            out[j] += e * pinv[(i, j)];
        }
    }
    Ok(out)
}

/// Prediction of the reduced-menu stationary distribution from the full-menu
/// one, the local residual, and mean passage times of the reduced chain.
#[derive(Debug, Clone)]
pub struct RemovalPrediction<T> {
    /// Predicted `ν_{A∖{x}}`, one entry per order.
    pub predicted: Vec<T>,
    /// `ν_A − ν_{A∖{x}}` from the matrix form `ε_A (N^d − N)(N^d)⁻¹`.
    pub matrix_difference: Vec<T>,
}

/// `ν_{A∖{x}}(≻) = ν_A(≻) / (1 − Σ_{≻′≠≻} ε_A(≻′) n(≻′,≻))`, with the
/// matrix form reported alongside.
pub fn predict_removed_stationary<T: Scalar>(
    nu_full: &OrderDistribution<T>,
    eps: &LocalResidual<T>,
    passage_reduced: &PassageMatrix<T>,
) -> Result<RemovalPrediction<T>> {
    let count = nu_full.len();
    if eps.values.len() != count || passage_reduced.matrix().nrows() != count {
        return Err(Error::DimensionMismatch(
            "residual and passage matrix must live on the same order space".into(),
        ));
    }
    let mut predicted = Vec::with_capacity(count);
    for j in 0..count {
        let mut denom = T::one();
        for i in 0..count {
            if i == j {
                continue;
            }
            denom -= eps.values[i].clone() * passage_reduced.time(i, j).clone();
        }
        if denom.is_zero_tol(1e-12) {
            return Err(Error::DegenerateDenominator);
        }
        predicted.push(nu_full.weight(j).clone() / denom);
    }
    // Entrywise −Σ_{i≠j} ε_i n(i,j) ν_{A∖{x}}(j), with ν_{A∖{x}}(j)
    // read off the diagonal return times.
    let mut matrix_difference = Vec::with_capacity(count);
    for j in 0..count {
        let mut acc = T::zero();
        for i in 0..count {
            if i == j {
                continue;
            }
            acc -= eps.values[i].clone() * passage_reduced.time(i, j).clone();
        }
        matrix_difference.push(acc / passage_reduced.time(j, j).clone());
    }
    Ok(RemovalPrediction {
        predicted,
        matrix_difference,
    })
}

/// A nonnegative, not identically zero investment plan whose expected
/// return strictly exceeds its cost in every preference state.
#[derive(Debug, Clone)]
pub struct InvestmentPlan {
    pub menus: Vec<Menu>,
    /// Amount for column `(menu, order)` at `menu_idx * order_count + order`.
    pub amounts: Vec<BigRational>,
    order_count: usize,
}

impl InvestmentPlan {
    pub fn amount(&self, menu_idx: usize, order: usize) -> &BigRational {
        &self.amounts[menu_idx * self.order_count + order]
    }

    pub fn order_count(&self) -> usize {
        self.order_count
    }
}

/// Outcome of the no-investment test: either a verified invariant
/// distribution (no profitable plan exists) or a verified strict plan.
#[derive(Debug, Clone)]
pub enum InvestmentCertificate {
    Invariant {
        distribution: OrderDistribution<BigRational>,
        /// Whether the witness is strictly positive everywhere, as the
        /// full-support theory produces; otherwise it is a boundary
        /// (semipositive) witness for the general definition.
        strictly_positive: bool,
    },
    Plan(InvestmentPlan),
}

impl InvestmentCertificate {
    pub fn is_invariant(&self) -> bool {
        matches!(self, InvestmentCertificate::Invariant { .. })
    }
}

/// Decides menu invariance through the investment alternative: maximizes the
/// minimum weight of a common invariant distribution, and when none exists
/// assembles and verifies a strictly profitable plan.
pub fn no_investment_test(t: &TransitionFunction<BigRational>) -> Result<InvestmentCertificate> {
    let chains = all_menu_chains(t)?;
    investment_alternative(t.space(), &chains)
}

/// Shared machinery for the fixed-menu and menu-varying settings. `chains`
/// holds one matrix per size-2+ menu; plan columns are indexed by
/// (menu, next order).
fn investment_alternative(
    space: &Arc<OrderSpace>,
    chains: &[MenuChain<BigRational>],
) -> Result<InvestmentCertificate> {
    match best_common_invariant(chains)? {
        InvariantOutcome::Best { eta, nu } if !eta.is_negative() => {
            let distribution = OrderDistribution::new(nu)?;
            for chain in chains {
                let image = chain.matrix().vec_mul(distribution.weights());
                if image != distribution.weights() {
                    return Err(Error::Internal(
                        "invariant witness failed exact verification".into(),
                    ));
                }
            }
            Ok(InvestmentCertificate::Invariant {
                strictly_positive: eta.is_positive(),
                distribution,
            })
        }
        _ => {
            let plan = profitable_plan(space, chains)?;
            Ok(InvestmentCertificate::Plan(plan))
        }
    }
}

/// Finds a plan with `(M i)(≻) ≥ 1` in every state, where the system
/// matrix has rows indexed by current orders and columns by (menu, next
/// order) with entries `t_{≻′}(M(≻, A), ≻) − 1{≻ = ≻′}`. Any strictly
/// profitable plan rescales into this form, so phase-1 feasibility decides.
fn profitable_plan(
    space: &Arc<OrderSpace>,
    chains: &[MenuChain<BigRational>],
) -> Result<InvestmentPlan> {
    let count = space.count();
    let cols = chains.len() * count;
    let mut sys = lp::RationalMatrixSystem::all_nonneg(cols);
    for row in 0..count {
        let mut coeffs: Vec<(usize, BigRational)> = Vec::new();
        for (ci, chain) in chains.iter().enumerate() {
            let m = chain.matrix();
            for to in 0..count {
                let mut v = m[(row, to)].clone();
                if row == to {
                    v -= BigRational::one();
                }
                if !v.is_zero() {
                    coeffs.push((ci * count + to, v));
                }
            }
        }
        sys.add_ge(coeffs, BigRational::one());
    }
    let Some(amounts) = lp::feasible(&sys)? else {
        return Err(Error::Internal(
            "no strict plan found although no invariant distribution exists".into(),
        ));
    };
    if amounts.iter().any(|a| a.is_negative()) || amounts.iter().all(|a| a.is_zero()) {
        return Err(Error::Internal("plan verification failed".into()));
    }
    for row in 0..count {
        let mut net = BigRational::zero();
        for (ci, chain) in chains.iter().enumerate() {
            let m = chain.matrix();
            for to in 0..count {
                let a = &amounts[ci * count + to];
                if a.is_zero() {
                    continue;
                }
                let mut v = m[(row, to)].clone();
                if row == to {
                    v -= BigRational::one();
                }
                net += a.clone() * v;
            }
        }
        if !net.is_positive() {
            return Err(Error::Internal(
                "plan is not strictly profitable in every state".into(),
            ));
        }
    }
    Ok(InvestmentPlan {
        menus: chains.iter().map(|c| c.menu()).collect(),
        amounts,
        order_count: count,
    })
}

/// Joint menu invariance of a transition/arrival pair: whether the joint
/// stationary distribution factors into the product of its marginals.
#[derive(Debug, Clone)]
pub struct JointInvariance<T> {
    pub invariant: bool,
    pub menu_marginal: Vec<T>,
    pub order_marginal: Vec<T>,
    pub max_gap: f64,
}

pub fn is_jointly_menu_invariant<T: Scalar>(
    t: &TransitionFunction<T>,
    s: &ArrivalFunction<T>,
) -> Result<JointInvariance<T>> {
    let chain = joint_chain(t, s)?;
    let psi = joint_stationary(&chain)?;
    let menu_marginal = psi.menu_marginal();
    let order_marginal = psi.order_marginal();
    let mut max_gap = 0.0f64;
    let mut invariant = true;
    for mi in 0..menu_marginal.len() {
        for o in 0..order_marginal.len() {
            let product = menu_marginal[mi].clone() * order_marginal[o].clone();
            let gap = (psi.weight(mi, o).clone() - product).abs_val();
            max_gap = max_gap.max(gap.approx());
            if !gap.is_zero_tol(INVARIANCE_TOL) {
                invariant = false;
            }
        }
    }
    Ok(JointInvariance {
        invariant,
        menu_marginal,
        order_marginal,
        max_gap,
    })
}

/// Investment test for the menu-varying model. The effective chain at menu
/// `A` mixes the fixed-menu chains with the backward menu probabilities:
/// rows `Σ_B ρ_s(B|A) t_{≻′}(M(≻, B), ≻) − 1{≻ = ≻′}`.
pub fn joint_no_investment_test(
    t: &TransitionFunction<BigRational>,
    s: &ArrivalFunction<BigRational>,
) -> Result<InvestmentCertificate> {
    let base = all_menu_chains(t)?;
    let backward = rho(s)?;
    let menus = s.menus().to_vec();
    let count = t.space().count();
    let mut mixed = Vec::with_capacity(menus.len());
    for &a in &menus {
        let mut matrix = Mat::zeros(count, count);
        for (bi, &b) in menus.iter().enumerate() {
            let Some(weight) = backward.get(&(a, b)) else {
                continue;
            };
            if weight.is_zero() {
                continue;
            }
            let mb = base[bi].matrix();
            for i in 0..count {
                for j in 0..count {
                    if mb[(i, j)].is_zero() {
                        continue;
                    }
                    let upd = weight.clone() * mb[(i, j)].clone();
                    matrix[(i, j)] += upd;
                }
            }
        }
        mixed.push(chain_from_matrix(Arc::clone(t.space()), a, matrix));
    }
    investment_alternative(t.space(), &mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::{
        cravings_transition, default_strength, example_kernel, random_craving_spec,
        random_full_support_kernel, ExampleClass,
    };
    use crate::dynamics::mean_passage;
    use crate::lattice::LinearOrder;
    use crate::num::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn consumption_independent(n: usize, seed: u64) -> TransitionFunction<BigRational> {
        let space = Arc::new(OrderSpace::new(n));
        let count = space.count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dists: Vec<OrderDistribution<BigRational>> = (0..count)
            .map(|_| {
                let raw: Vec<i64> = (0..count).map(|_| rng.gen_range(1..6)).collect();
                let total: i64 = raw.iter().sum();
                OrderDistribution::new(raw.into_iter().map(|w| rat(w, total)).collect()).unwrap()
            })
            .collect();
        TransitionFunction::build(space, |_x, from| Ok(dists[from].clone())).unwrap()
    }

    #[test]
    fn two_preference_kernel_is_invariant_three_ways() {
        let t = example_kernel(
            &ExampleClass::TwoPreferenceInvariant,
            3,
            0,
            &default_strength(),
        )
        .unwrap();
        let direct = is_menu_invariant_direct(&t).unwrap();
        assert!(direct.invariant);
        let nu = stationary(&menu_chain(&t, Menu::full(3)).unwrap()).unwrap();
        assert!(is_locally_invariant(&t, &nu).unwrap());
        let cert = no_investment_test(&t).unwrap();
        assert!(cert.is_invariant());
        // The kernel is not full support, so the witness sits on the
        // boundary of the simplex.
        if let InvestmentCertificate::Invariant {
            strictly_positive, ..
        } = cert
        {
            assert!(!strictly_positive);
        }
        // Removal residuals vanish identically.
        for x in 0..3u8 {
            let eps = local_residual(&t, &nu, Menu::full(3), Alt(x)).unwrap();
            assert!(eps.is_zero(0.0));
        }
    }

    #[test]
    fn cravings_fail_all_three_tests() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = random_craving_spec(3, &mut rng).unwrap();
        let space = Arc::new(OrderSpace::new(3));
        let t = cravings_transition(&spec, space).unwrap();
        let direct = is_menu_invariant_direct(&t).unwrap();
        assert!(!direct.invariant);
        match direct.witness {
            InvarianceWitness::MismatchedPair { reference, other } => {
                assert_eq!(reference, Menu::full(3));
                assert_eq!(other.len(), 2);
            }
            other => panic!("expected mismatched pair, got {other:?}"),
        }
        let nu = stationary(&menu_chain(&t, Menu::full(3)).unwrap()).unwrap();
        assert!(!is_locally_invariant(&t, &nu).unwrap());
        let cert = no_investment_test(&t).unwrap();
        assert!(!cert.is_invariant());
    }

    #[test]
    fn deterministic_switching_is_not_invariant() {
        let t = example_kernel(
            &ExampleClass::DeterministicSwitching,
            3,
            0,
            &default_strength(),
        )
        .unwrap();
        let direct = is_menu_invariant_direct(&t).unwrap();
        assert!(!direct.invariant);
        assert!(!no_investment_test(&t).unwrap().is_invariant());
    }

    #[test]
    fn consumption_independent_kernels_are_invariant() {
        let t = consumption_independent(3, 5);
        assert!(is_menu_invariant_direct(&t).unwrap().invariant);
        let cert = no_investment_test(&t).unwrap();
        match cert {
            InvestmentCertificate::Invariant {
                strictly_positive,
                distribution,
            } => {
                assert!(strictly_positive);
                let direct = stationary(&menu_chain(&t, Menu::full(3)).unwrap()).unwrap();
                assert_eq!(distribution.weights(), direct.weights());
            }
            other => panic!("expected invariant branch, got {other:?}"),
        }
    }

    #[test]
    fn state_independent_distinct_rows_admit_a_plan() {
        let space = Arc::new(OrderSpace::new(3));
        let count = space.count();
        let t = TransitionFunction::build(Arc::clone(&space), |x, _from| {
            let mut w = vec![rat(1, 12); count];
            w[x.index()] = rat(7, 12);
            OrderDistribution::new(w)
        })
        .unwrap();
        let cert = no_investment_test(&t).unwrap();
        let InvestmentCertificate::Plan(plan) = cert else {
            panic!("expected a plan");
        };
        assert!(plan.amounts.iter().any(|a| a.is_positive()));
    }

    #[test]
    fn craving_residual_closed_form() {
        // Base a > b > c, weights (1/2, 3/10, 1/5), persistence 1/2:
        // removing c at the full menu gives ε(craving-c) =
        // −φ(a,c)·ν_c·(1−ν_c) = −2/25.
        let base = LinearOrder::from_indices(&[0, 1, 2]).unwrap();
        let weights = vec![rat(1, 2), rat(3, 10), rat(1, 5)];
        let mut phi = vec![vec![rat(0, 1); 3]; 3];
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    phi[x][y] = rat(1, 2);
                }
            }
        }
        let spec = crate::behaviors::CravingSpec::new(base, weights, phi).unwrap();
        let space = Arc::new(OrderSpace::new(3));
        let t = cravings_transition(&spec, Arc::clone(&space)).unwrap();
        let nu = stationary(&menu_chain(&t, Menu::full(3)).unwrap()).unwrap();
        let eps = local_residual(&t, &nu, Menu::full(3), Alt(2)).unwrap();
        let id_c = space.id_of(&spec.craving_order(Alt(2))).unwrap();
        assert_eq!(eps.values[id_c], rat(-2, 25));
        assert_eq!(eps.mass_balance(), BigRational::zero());
        assert!(!eps.is_zero(0.0));
    }

    #[test]
    fn consumption_independent_residuals_vanish() {
        let t = consumption_independent(3, 9);
        let nu = OrderDistribution::<BigRational>::uniform(6);
        for x in 0..3u8 {
            let eps = local_residual(&t, &nu, Menu::full(3), Alt(x)).unwrap();
            assert!(eps.is_zero(0.0));
        }
    }

    #[test]
    fn residual_rejects_small_menus() {
        let t = consumption_independent(3, 1);
        let nu = OrderDistribution::<BigRational>::uniform(6);
        let ab = Menu::from_alts(&[Alt(0), Alt(1)]);
        assert!(matches!(
            local_residual(&t, &nu, ab, Alt(0)),
            Err(Error::MenuTooSmall { .. })
        ));
        assert!(local_residual(&t, &nu, Menu::full(3), Alt(0)).is_ok());
        assert!(matches!(
            local_residual(
                &t,
                &nu,
                Menu::from_alts(&[Alt(0), Alt(1), Alt(2)]).remove(Alt(2)),
                Alt(2)
            ),
            Err(Error::NotInMenu { .. })
        ));
    }

    #[test]
    fn verdicts_agree_on_random_full_support_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for n in [3usize, 4] {
            for _ in 0..6 {
                let t = random_full_support_kernel(n, &mut rng, 8);
                let report = invariance_report(&t, None).unwrap();
                let cert = no_investment_test(&t).unwrap();
                assert_eq!(report.menu_invariant, cert.is_invariant());
            }
        }
    }

    #[test]
    fn residual_pair_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = random_full_support_kernel(3, &mut rng, 8);
        let full = Menu::full(3);
        let reduced = full.remove(Alt(1));
        let chain_full = menu_chain(&t, full).unwrap();
        let chain_reduced = menu_chain(&t, reduced).unwrap();
        let nu_full = stationary(&chain_full).unwrap();
        let nu_reduced = stationary(&chain_reduced).unwrap();
        let pair = residual_pair_identity(&nu_full, &nu_reduced, &chain_full, &chain_reduced);
        assert_eq!(pair.identity_gap, 0.0);
        // Menu-invariant kernels have both residuals identically zero.
        let t_inv = consumption_independent(3, 20);
        let cf = menu_chain(&t_inv, full).unwrap();
        let cr = menu_chain(&t_inv, reduced).unwrap();
        let nu = stationary(&cf).unwrap();
        let pair = residual_pair_identity(&nu, &nu, &cf, &cr);
        assert!(pair.eps_full.iter().all(|v| v.is_zero()));
        assert!(pair.eps_reduced.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn pseudoinverse_branch_detects_stochastic_rank_deficiency() {
        // Differences of menu chains annihilate the ones vector, so the
        // branch must report rank deficiency...
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let t = random_full_support_kernel(3, &mut rng, 8).map_approx();
        let full = Menu::full(3);
        let reduced = full.remove(Alt(0));
        let cf = menu_chain(&t, full).unwrap();
        let cr = menu_chain(&t, reduced).unwrap();
        let nu_f = stationary(&cf).unwrap();
        let nu_r = stationary(&cr).unwrap();
        let pair = residual_pair_identity(&nu_f, &nu_r, &cf, &cr);
        assert!(matches!(
            stationary_gap_pseudoinverse(
                &pair.eps_full,
                &pair.eps_reduced,
                cf.matrix(),
                cr.matrix()
            ),
            Err(Error::RankDeficient)
        ));
        // ... and the all-zero difference is rank deficient as well.
        let zero = Mat::<f64>::zeros(6, 6);
        assert!(matches!(
            stationary_gap_pseudoinverse(&[0.0; 6], &[0.0; 6], &zero, &zero),
            Err(Error::RankDeficient)
        ));
        // On a synthetic full-rank difference the recovery is exact: with
        // M_full = 2I and M_reduced = I the difference is the identity.
        let mut two_eye = Mat::<f64>::zeros(3, 3);
        let mut eye = Mat::<f64>::zeros(3, 3);
        for i in 0..3 {
            two_eye[(i, i)] = 2.0;
            eye[(i, i)] = 1.0;
        }
        let nu_diff = [0.25, -0.5, 0.25];
        // eps difference equals nu_diff * I = nu_diff.
        let recovered = stationary_gap_pseudoinverse(&nu_diff, &[0.0; 3], &two_eye, &eye).unwrap();
        for (a, b) in recovered.iter().zip(&nu_diff) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn removal_prediction_matches_direct_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..5 {
            let t = random_full_support_kernel(3, &mut rng, 8);
            let full = Menu::full(3);
            for x in 0..3u8 {
                let reduced = full.remove(Alt(x));
                let chain_full = menu_chain(&t, full).unwrap();
                let chain_reduced = menu_chain(&t, reduced).unwrap();
                let nu_full = stationary(&chain_full).unwrap();
                let nu_reduced = stationary(&chain_reduced).unwrap();
                let eps = local_residual(&t, &nu_full, full, Alt(x)).unwrap();
                let passage = mean_passage(&chain_reduced).unwrap();
                let pred = predict_removed_stationary(&nu_full, &eps, &passage).unwrap();
                for (p, d) in pred.predicted.iter().zip(nu_reduced.weights()) {
                    assert_eq!(p, d, "single-order form is exact in rational mode");
                }
                for (j, diff) in pred.matrix_difference.iter().enumerate() {
                    let expected = nu_full.weight(j).clone() - nu_reduced.weight(j).clone();
                    assert_eq!(diff, &expected, "matrix form entry {j}");
                }
            }
        }
    }

    #[test]
    fn removal_prediction_is_identity_for_invariant_kernels() {
        let t = consumption_independent(3, 30);
        let full = Menu::full(3);
        let reduced = full.remove(Alt(1));
        let nu = stationary(&menu_chain(&t, full).unwrap()).unwrap();
        let eps = local_residual(&t, &nu, full, Alt(1)).unwrap();
        let passage = mean_passage(&menu_chain(&t, reduced).unwrap()).unwrap();
        let pred = predict_removed_stationary(&nu, &eps, &passage).unwrap();
        assert_eq!(pred.predicted, nu.weights());
        assert!(pred.matrix_difference.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn craving_removal_prediction_on_the_recurrent_class() {
        // Standard spec, remove c: restrict the reduced chain to the three
        // craving orders and check the predicted weight 1/3 for craving-c.
        let base = LinearOrder::from_indices(&[0, 1, 2]).unwrap();
        let weights = vec![rat(1, 2), rat(3, 10), rat(1, 5)];
        let mut phi = vec![vec![rat(0, 1); 3]; 3];
        for x in 0..3 {
            for y in 0..3 {
                if x != y {
                    phi[x][y] = rat(1, 2);
                }
            }
        }
        let spec = crate::behaviors::CravingSpec::new(base, weights, phi).unwrap();
        let space = Arc::new(OrderSpace::new(3));
        let t = cravings_transition(&spec, Arc::clone(&space)).unwrap();
        let full = Menu::full(3);
        let reduced = full.remove(Alt(2));
        let ids: Vec<usize> = (0..3u8)
            .map(|x| space.id_of(&spec.craving_order(Alt(x))).unwrap())
            .collect();
        // Restricted chain over the craving orders.
        let big = menu_chain(&t, reduced).unwrap();
        let mut small = Mat::zeros(3, 3);
        for (i, &oi) in ids.iter().enumerate() {
            for (j, &oj) in ids.iter().enumerate() {
                small[(i, j)] = big.matrix()[(oi, oj)].clone();
            }
        }
        let small_chain = crate::dynamics::chain_from_matrix(Arc::clone(&space), reduced, small);
        let passage = mean_passage(&small_chain).unwrap();
        let nu_full = OrderDistribution::new(vec![rat(1, 2), rat(3, 10), rat(1, 5)]).unwrap();
        let eps_big = local_residual(
            &t,
            &stationary(&menu_chain(&t, full).unwrap()).unwrap(),
            full,
            Alt(2),
        )
        .unwrap();
        let eps = LocalResidual {
            menu: full,
            removed: Alt(2),
            values: ids.iter().map(|&o| eps_big.values[o].clone()).collect(),
        };
        let pred = predict_removed_stationary(&nu_full, &eps, &passage).unwrap();
        assert_eq!(pred.predicted[2], rat(1, 3));
        // Against the directly computed reduced stationary.
        let direct = stationary(&big).unwrap();
        assert_eq!(pred.predicted[2], direct.weight(ids[2]).clone());
    }

    #[test]
    fn joint_invariance_for_consumption_independent_kernels() {
        let t = consumption_independent(3, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let k = menus_size2(3).len();
        let rows: Vec<Vec<BigRational>> = (0..k)
            .map(|_| {
                let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..5)).collect();
                let total: i64 = raw.iter().sum();
                raw.into_iter().map(|w| rat(w, total)).collect()
            })
            .collect();
        let s = ArrivalFunction::from_rows(3, rows).unwrap();
        let joint = is_jointly_menu_invariant(&t, &s).unwrap();
        assert!(joint.invariant);
        assert!(joint_no_investment_test(&t, &s).unwrap().is_invariant());
    }

    #[test]
    fn iid_arrival_makes_any_kernel_jointly_invariant() {
        // With an i.i.d. arrival process today's menu is independent of the
        // preference state, so even a craving kernel is jointly invariant.
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let spec = random_craving_spec(3, &mut rng).unwrap();
        let space = Arc::new(OrderSpace::new(3));
        let t = cravings_transition(&spec, space).unwrap();
        let s = ArrivalFunction::<BigRational>::uniform(3);
        let joint = is_jointly_menu_invariant(&t, &s).unwrap();
        assert!(joint.invariant);
        assert!(joint_no_investment_test(&t, &s).unwrap().is_invariant());
    }

    #[test]
    fn cravings_with_sticky_arrival_are_not_jointly_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let spec = random_craving_spec(3, &mut rng).unwrap();
        let space = Arc::new(OrderSpace::new(3));
        let t = cravings_transition(&spec, space).unwrap();
        // Sticky menus: stay with probability 3/4, otherwise uniform.
        let k = menus_size2(3).len();
        let rows: Vec<Vec<BigRational>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if i == j {
                            rat(3, 4) + rat(1, 4 * k as i64)
                        } else {
                            rat(1, 4 * k as i64)
                        }
                    })
                    .collect()
            })
            .collect();
        let s = ArrivalFunction::from_rows(3, rows).unwrap();
        let joint = is_jointly_menu_invariant(&t, &s).unwrap();
        assert!(!joint.invariant);
        assert!(!joint_no_investment_test(&t, &s).unwrap().is_invariant());
    }

    #[test]
    fn iid_pair_is_jointly_invariant() {
        // Consumption- and state-independent kernel plus i.i.d. arrival.
        let space = Arc::new(OrderSpace::new(3));
        let count = space.count();
        let t = TransitionFunction::build(Arc::clone(&space), |_x, _from| {
            let mut w = vec![rat(1, 12); count];
            w[0] = rat(7, 12);
            OrderDistribution::new(w)
        })
        .unwrap();
        let s = ArrivalFunction::<BigRational>::uniform(3);
        assert!(is_jointly_menu_invariant(&t, &s).unwrap().invariant);
        assert!(joint_no_investment_test(&t, &s).unwrap().is_invariant());
    }
}
