//! Closed-form behavioral models and seeded kernel generators.
//!
//! Two parametric families are implemented in full: persistent cravings
//! (a base order plus cravings that survive unsated consumption) and a
//! habit-formation logit whose last-period consumption boosts utility.
//! Both break classical random-utility axioms in quantifiable ways, and the
//! closed forms here are cross-checked against the chain machinery.
//!
//! The generator section samples kernels from several behavioral classes
//! (learning, habit formation, preference for variety, status-quo bias,
//! intertemporal complements/substitutes) and provides two fixed kernels
//! used throughout the test suites.

use crate::dynamics::{menu_chain, stationary, time_average_rcr, TransitionFunction};
use crate::error::{Error, Result};
use crate::lattice::{
    Alt, LinearOrder, Menu, OrderDistribution, OrderId, OrderSpace, RandomChoiceRule,
};
use crate::num::{rat, Scalar};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Tolerance for regularity comparisons.
pub const REGULARITY_TOL: f64 = 1e-12;
/// Tolerance for ratio mismatches in the IIA report.
pub const IIA_TOL: f64 = 1e-9;
/// Agreement tolerance between closed forms and chain computations.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Persistent cravings
// ---------------------------------------------------------------------------

/// Parameters of the persistent-craving kernel.
///
/// `craving_weights[x]` is the probability of craving alternative `x`
/// (weight on the order that tops `x` and otherwise agrees with `base`);
/// `persistence[consumed][craved]` is the chance an unsated craving
/// survives the period.
#[derive(Debug, Clone)]
pub struct CravingSpec<T> {
    base: LinearOrder,
    craving_weights: Vec<T>,
    persistence: Vec<Vec<T>>,
}

impl<T: Scalar> CravingSpec<T> {
    pub fn new(
        base: LinearOrder,
        craving_weights: Vec<T>,
        persistence: Vec<Vec<T>>,
    ) -> Result<Self> {
        let n = base.n();
        if craving_weights.len() != n || persistence.len() != n {
            return Err(Error::InvalidSpec("craving parameter shapes".into()));
        }
        if persistence.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpec("persistence must be n x n".into()));
        }
        let total: T = craving_weights.iter().cloned().sum();
        if !total.eq_tol(&T::one(), crate::lattice::DISTRIBUTION_SUM_TOL) {
            return Err(Error::InvalidSpec(format!(
                "craving weights sum to {total}"
            )));
        }
        // Craving monotonicity is strict: better-ranked alternatives are
        // craved strictly more often, and every weight is positive.
        for w in base.ranking().windows(2) {
            let diff =
                craving_weights[w[0].index()].clone() - craving_weights[w[1].index()].clone();
            if diff.is_zero() || diff.is_negative_scalar() {
                return Err(Error::InvalidSpec(
                    "craving weights must strictly follow the base order".into(),
                ));
            }
        }
        if craving_weights
            .iter()
            .any(|w| w.is_zero() || w.is_negative_scalar())
        {
            return Err(Error::InvalidSpec(
                "craving weights must be positive".into(),
            ));
        }
        for (x, row) in persistence.iter().enumerate() {
            for (y, phi) in row.iter().enumerate() {
                if x == y {
                    if !phi.is_zero() {
                        return Err(Error::InvalidSpec("sated cravings never persist".into()));
                    }
                } else {
                    let headroom = T::one() - phi.clone();
                    if phi.is_zero()
                        || phi.is_negative_scalar()
                        || headroom.is_zero()
                        || headroom.is_negative_scalar()
                    {
                        return Err(Error::InvalidSpec(
                            "persistence must lie strictly inside (0, 1) off the diagonal".into(),
                        ));
                    }
                }
            }
        }
        Ok(CravingSpec {
            base,
            craving_weights,
            persistence,
        })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn base(&self) -> &LinearOrder {
        &self.base
    }

    pub fn craving_weight(&self, x: Alt) -> &T {
        &self.craving_weights[x.index()]
    }

    pub fn persistence(&self, consumed: Alt, craved: Alt) -> &T {
        &self.persistence[consumed.index()][craved.index()]
    }

    /// The order that tops `x` and otherwise agrees with the base order.
    pub fn craving_order(&self, x: Alt) -> LinearOrder {
        let mut ranking = vec![x];
        ranking.extend(self.base.ranking().iter().copied().filter(|&a| a != x));
        LinearOrder::new(ranking).expect("permutation")
    }
}

/// Dense kernel of the persistent-craving model: from a craving state
/// `≻_y`, consuming `x` keeps the craving alive with probability `φ(x, y)`
/// and otherwise redraws from the craving distribution; every off-support
/// state redraws immediately.
pub fn cravings_transition<T: Scalar>(
    spec: &CravingSpec<T>,
    space: Arc<OrderSpace>,
) -> Result<TransitionFunction<T>> {
    let n = spec.n();
    if space.n() != n {
        return Err(Error::DimensionMismatch("order space size".into()));
    }
    let count = space.count();
    let craving_ids: Vec<OrderId> = (0..n as u8)
        .map(|x| {
            space
                .id_of(&spec.craving_order(Alt(x)))
                .expect("craving order enumerated")
        })
        .collect();
    let mut redraw_weights = vec![T::zero(); count];
    for (x, &id) in craving_ids.iter().enumerate() {
        redraw_weights[id] = spec.craving_weights[x].clone();
    }
    let redraw = OrderDistribution::new(redraw_weights)?;
    TransitionFunction::build(space, |consumed, from| {
        let craved = craving_ids.iter().position(|&id| id == from);
        match craved {
            Some(y) => {
                let phi = spec.persistence(consumed, Alt(y as u8)).clone();
                if phi.is_zero() {
                    return Ok(redraw.clone());
                }
                let keep = T::one() - phi.clone();
                let mut w: Vec<T> = redraw
                    .weights()
                    .iter()
                    .map(|r| keep.clone() * r.clone())
                    .collect();
                w[from] += phi;
                OrderDistribution::new(w)
            }
            None => Ok(redraw.clone()),
        }
    })
}

/// Long-run choice frequencies of the craving model.
pub fn cravings_rcr<T: Scalar>(
    spec: &CravingSpec<T>,
    space: Arc<OrderSpace>,
) -> Result<RandomChoiceRule<T>> {
    let t = cravings_transition(spec, space)?;
    time_average_rcr(&t)
}

/// Regularity violations of the craving model's long-run frequencies.
pub fn cravings_regularity_report<T: Scalar>(
    spec: &CravingSpec<T>,
    space: Arc<OrderSpace>,
) -> Result<Vec<RegularityViolation<T>>> {
    Ok(regularity_report(&cravings_rcr(spec, space)?))
}

/// Closed form for the craving weight after dropping `x` from the full
/// menu: `ν(≻_x) / (1 − φ(M(⊳, X∖{x}), x)(1 − ν(≻_x)))`. The value is
/// cross-checked against the stationary distribution of the reduced chain
/// before being returned.
pub fn craving_removal_closed_form<T: Scalar>(
    spec: &CravingSpec<T>,
    space: Arc<OrderSpace>,
    x: Alt,
) -> Result<T> {
    let n = spec.n();
    let reduced = Menu::full(n).remove(x);
    let consumed = crate::lattice::maximizer(spec.base(), reduced)?;
    let nu_x = spec.craving_weight(x).clone();
    let phi = spec.persistence(consumed, x).clone();
    let denom = T::one() - phi * (T::one() - nu_x.clone());
    if denom.is_zero_tol(1e-12) {
        return Err(Error::DegenerateDenominator);
    }
    let closed = nu_x / denom;
    let t = cravings_transition(spec, Arc::clone(&space))?;
    let chain = menu_chain(&t, reduced)?;
    let direct = stationary(&chain)?;
    let id = space.id_of(&spec.craving_order(x)).expect("craving order");
    if !closed.eq_tol(direct.weight(id), CLOSED_FORM_TOL) {
        return Err(Error::Internal(format!(
            "closed form {closed} disagrees with direct stationary {}",
            direct.weight(id)
        )));
    }
    Ok(closed)
}

// ---------------------------------------------------------------------------
// Reports shared by the behavioral models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityViolation<T> {
    pub alt: Alt,
    pub smaller_menu: Menu,
    pub larger_menu: Menu,
    pub p_smaller: T,
    pub p_larger: T,
}

/// All `(y, A ⊂ B)` with `p(y, A) < p(y, B)`, i.e. adding options raises
/// the choice probability of an incumbent.
pub fn regularity_report<T: Scalar>(rule: &RandomChoiceRule<T>) -> Vec<RegularityViolation<T>> {
    let menus: Vec<Menu> = rule.menus().collect();
    let mut out = Vec::new();
    for &small in &menus {
        for &large in &menus {
            if small == large || !small.is_subset_of(large) {
                continue;
            }
            for y in small.iter() {
                let (Some(ps), Some(pl)) = (rule.prob(y, small), rule.prob(y, large)) else {
                    continue;
                };
                let diff = ps.clone() - pl.clone();
                if diff.is_negative_scalar() && !diff.is_zero_tol(REGULARITY_TOL) {
                    out.push(RegularityViolation {
                        alt: y,
                        smaller_menu: small,
                        larger_menu: large,
                        p_smaller: ps,
                        p_larger: pl,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct IiaViolation {
    pub x: Alt,
    pub y: Alt,
    pub menu_a: Menu,
    pub menu_b: Menu,
    pub ratio_gap: f64,
}

/// Quadruples `(x, y, A, B)` whose choice-probability ratios differ across
/// the two menus.
pub fn iia_report<T: Scalar>(rule: &RandomChoiceRule<T>) -> Vec<IiaViolation> {
    let menus: Vec<Menu> = rule.menus().collect();
    let mut out = Vec::new();
    for (ai, &a) in menus.iter().enumerate() {
        for &b in &menus[ai + 1..] {
            let both = Menu(a.0 & b.0);
            for x in both.iter() {
                for y in both.iter() {
                    if x >= y {
                        continue;
                    }
                    let probs = (
                        rule.prob(x, a).map(|v| v.approx()),
                        rule.prob(y, a).map(|v| v.approx()),
                        rule.prob(x, b).map(|v| v.approx()),
                        rule.prob(y, b).map(|v| v.approx()),
                    );
                    let (Some(pxa), Some(pya), Some(pxb), Some(pyb)) = probs else {
                        continue;
                    };
                    if pya <= 0.0 || pyb <= 0.0 {
                        continue;
                    }
                    let gap = (pxa / pya - pxb / pyb).abs();
                    if gap > IIA_TOL {
                        out.push(IiaViolation {
                            x,
                            y,
                            menu_a: a,
                            menu_b: b,
                            ratio_gap: gap,
                        });
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Habit-formation logit
// ---------------------------------------------------------------------------

/// Logit over alternatives where last period's consumption adds a utility
/// boost. One alternative is a mandatory outside option with zero utility
/// and zero boost, present in every menu.
#[derive(Debug, Clone)]
pub struct HabitLogitSpec {
    utilities: Vec<f64>,
    boosts: Vec<f64>,
    outside: Alt,
}

impl HabitLogitSpec {
    pub fn new(utilities: Vec<f64>, boosts: Vec<f64>, outside: Alt) -> Result<Self> {
        Self::build(utilities, boosts, outside, false)
    }

    /// Variant allowing negative boosts (a taste for variation).
    pub fn new_allowing_negative(
        utilities: Vec<f64>,
        boosts: Vec<f64>,
        outside: Alt,
    ) -> Result<Self> {
        Self::build(utilities, boosts, outside, true)
    }

    fn build(
        utilities: Vec<f64>,
        boosts: Vec<f64>,
        outside: Alt,
        allow_negative: bool,
    ) -> Result<Self> {
        let n = utilities.len();
        if boosts.len() != n || outside.index() >= n || n < 2 {
            return Err(Error::InvalidSpec("habit logit shapes".into()));
        }
        if utilities[outside.index()] != 0.0 || boosts[outside.index()] != 0.0 {
            return Err(Error::InvalidSpec(
                "outside option must have zero utility and zero boost".into(),
            ));
        }
        if !allow_negative && boosts.iter().any(|c| *c < 0.0) {
            return Err(Error::InvalidSpec("boosts must be nonnegative".into()));
        }
        if utilities.iter().chain(&boosts).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("parameters must be finite".into()));
        }
        Ok(HabitLogitSpec {
            utilities,
            boosts,
            outside,
        })
    }

    pub fn n(&self) -> usize {
        self.utilities.len()
    }

    pub fn outside(&self) -> Alt {
        self.outside
    }

    pub fn utility(&self, x: Alt) -> f64 {
        self.utilities[x.index()]
    }

    pub fn boost(&self, x: Alt) -> f64 {
        self.boosts[x.index()]
    }

    /// Menus of the model: every menu containing the outside option.
    pub fn menus(&self) -> Vec<Menu> {
        crate::lattice::nonempty_menus(self.n())
            .into_iter()
            .filter(|m| m.contains(self.outside))
            .collect()
    }
}

/// One conditional choice row: probabilities over `menu` given that `last`
/// was consumed in the previous period.
pub fn habit_logit_ccp(spec: &HabitLogitSpec, menu: Menu, last: Alt) -> Result<Vec<(Alt, f64)>> {
    if !menu.contains(spec.outside()) {
        return Err(Error::NotInMenu {
            alt: spec.outside().index(),
            menu: menu.0,
        });
    }
    if !menu.contains(last) {
        return Err(Error::NotInMenu {
            alt: last.index(),
            menu: menu.0,
        });
    }
    let weight = |x: Alt| {
        let boost = if x == last { spec.boost(x) } else { 0.0 };
        (spec.utility(x) + boost).exp()
    };
    let total: f64 = menu.iter().map(weight).sum();
    Ok(menu.iter().map(|x| (x, weight(x) / total)).collect())
}

/// The per-menu chain over alternatives, rows and columns in ascending
/// alternative order within the menu.
pub fn habit_logit_chain(spec: &HabitLogitSpec, menu: Menu) -> Result<crate::mat::Mat<f64>> {
    let members: Vec<Alt> = menu.iter().collect();
    let k = members.len();
    let mut m = crate::mat::Mat::zeros(k, k);
    for (i, &last) in members.iter().enumerate() {
        let row = habit_logit_ccp(spec, menu, last)?;
        for (j, &(alt, p)) in row.iter().enumerate() {
            debug_assert_eq!(alt, members[j]);
            m[(i, j)] = p;
        }
    }
    Ok(m)
}

/// Stationary choice frequencies in closed form:
/// `p(x, A) ∝ e^{v(x)} Σ_{y ∈ A} e^{v(y) + c(y) 1{x = y}}`. Verified to be
/// a fixed point of the conditional chain on every menu.
pub fn habit_logit_rcr(spec: &HabitLogitSpec) -> Result<RandomChoiceRule<f64>> {
    let mut rule = RandomChoiceRule::new(spec.n());
    for menu in spec.menus() {
        let members: Vec<Alt> = menu.iter().collect();
        let score = |x: Alt| {
            let inner: f64 = members
                .iter()
                .map(|&y| {
                    let boost = if y == x { spec.boost(y) } else { 0.0 };
                    (spec.utility(y) + boost).exp()
                })
                .sum();
            spec.utility(x).exp() * inner
        };
        let total: f64 = members.iter().map(|&x| score(x)).sum();
        let row: BTreeMap<Alt, f64> = members.iter().map(|&x| (x, score(x) / total)).collect();
        // Fixed-point sanity: row · P = row.
        let p = habit_logit_chain(spec, menu)?;
        let v: Vec<f64> = members.iter().map(|x| row[x]).collect();
        let image = p.vec_mul(&v);
        for (a, b) in image.iter().zip(&v) {
            if (a - b).abs() > 1e-12 {
                return Err(Error::Internal(
                    "habit logit closed form is not stationary".into(),
                ));
            }
        }
        rule.insert_row(menu, row)?;
    }
    Ok(rule)
}

fn softplus(a: f64) -> f64 {
    // log(1 + e^a) without overflow.
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// The binary-menu log-odds estimator `log(p(x,{x,o}) / p(o,{x,o}))`.
pub fn habit_logit_log_odds(spec: &HabitLogitSpec, x: Alt) -> Result<f64> {
    if x == spec.outside() {
        return Err(Error::InvalidSpec("log odds of the outside option".into()));
    }
    let menu = Menu::singleton(x).insert(spec.outside());
    let rule = habit_logit_rcr(spec)?;
    let px = rule.prob(x, menu).expect("menu present");
    let po = rule.prob(spec.outside(), menu).expect("menu present");
    if po <= 0.0 {
        return Err(Error::InvalidDistribution("zero outside share".into()));
    }
    Ok((px / po).ln())
}

/// What the log-odds estimator over-reports relative to the true utility:
/// `log(1 + e^{v + c}) − log(1 + e^{v})`.
pub fn habit_logit_estimator_bias(spec: &HabitLogitSpec, x: Alt) -> f64 {
    softplus(spec.utility(x) + spec.boost(x)) - softplus(spec.utility(x))
}

// ---------------------------------------------------------------------------
// Kernel generators
// ---------------------------------------------------------------------------

/// Behavioral kernel families with seeded sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExampleClass {
    /// Consuming `x` leaves the ranking of the other alternatives intact
    /// and can only improve the standing of `x` (optimistic learning).
    Learning,
    /// Consuming `x` weakly promotes `x` and preserves all other
    /// comparisons.
    HabitFormation,
    /// Consuming `x` weakly demotes `x` and preserves all other
    /// comparisons.
    PreferenceForVariety,
    /// State-independent kernel tilted toward the consumed alternative.
    StatusQuoBias,
    /// Consuming `cause` weakly promotes `target`; everything else is free.
    Complements { cause: Alt, target: Alt },
    /// Consuming `cause` weakly demotes `target`.
    Substitutes { cause: Alt, target: Alt },
    /// Fixed three-alternative kernel supported on two opposite orders
    /// whose menu chains all coincide; consuming the middle good acts as if
    /// the currently best good had been consumed.
    TwoPreferenceInvariant,
    /// Fixed deterministic three-alternative kernel that flips between two
    /// orders depending on what was consumed.
    DeterministicSwitching,
}

/// Default share of row mass placed on the strict-effect orders.
pub fn default_strength() -> BigRational {
    rat(9, 10)
}

/// Samples a kernel from the class. Random classes obey the class's support
/// restriction exactly and place `strength` of each row's mass on the
/// orders realizing the strict effect (when any exist). Fixed classes
/// ignore the seed and strength.
pub fn example_kernel(
    class: &ExampleClass,
    n: usize,
    seed: u64,
    strength: &BigRational,
) -> Result<TransitionFunction<BigRational>> {
    if strength.is_negative() || strength > &BigRational::one() {
        return Err(Error::InvalidSpec("strength must lie in [0, 1]".into()));
    }
    let space = Arc::new(OrderSpace::new(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match class {
        ExampleClass::TwoPreferenceInvariant => two_preference_invariant(),
        ExampleClass::DeterministicSwitching => deterministic_switching(),
        ExampleClass::StatusQuoBias => status_quo_bias(space, &mut rng, strength),
        _ => {
            let space2 = Arc::clone(&space);
            let mut rows = Vec::new();
            for x in 0..n as u8 {
                for from in 0..space.count() {
                    let (allowed, strict) = class_support(class, &space, Alt(x), from);
                    rows.push(sample_row(
                        space.count(),
                        &allowed,
                        &strict,
                        strength,
                        &mut rng,
                    )?);
                }
            }
            TransitionFunction::from_rows(space2, rows)
        }
    }
}

/// Allowed and strict-effect destination orders for one kernel row.
fn class_support(
    class: &ExampleClass,
    space: &OrderSpace,
    consumed: Alt,
    from: OrderId,
) -> (Vec<OrderId>, Vec<OrderId>) {
    let cur = space.order(from);
    let preserves_others = |to: &LinearOrder| {
        cur.ranking().iter().filter(|&&a| a != consumed).all(|&a| {
            cur.ranking()
                .iter()
                .filter(|&&b| b != consumed && b != a)
                .all(|&b| cur.prefers(a, b) == to.prefers(a, b))
        })
    };
    let rank_now = cur.rank_of(consumed);
    let mut allowed = Vec::new();
    let mut strict = Vec::new();
    for id in 0..space.count() {
        let to = space.order(id);
        let ok = match class {
            ExampleClass::Learning => preserves_others(to),
            ExampleClass::HabitFormation => {
                preserves_others(to) && to.rank_of(consumed) <= rank_now
            }
            ExampleClass::PreferenceForVariety => {
                preserves_others(to) && to.rank_of(consumed) >= rank_now
            }
            ExampleClass::Complements { cause, target } => {
                consumed != *cause
                    || cur
                        .ranking()
                        .iter()
                        .filter(|&&z| z != *target)
                        .all(|&z| !cur.prefers(*target, z) || to.prefers(*target, z))
            }
            ExampleClass::Substitutes { cause, target } => {
                consumed != *cause
                    || cur
                        .ranking()
                        .iter()
                        .filter(|&&z| z != *target)
                        .all(|&z| !cur.prefers(z, *target) || to.prefers(z, *target))
            }
            _ => unreachable!("fixed classes handled separately"),
        };
        if !ok {
            continue;
        }
        allowed.push(id);
        let stricter = match class {
            ExampleClass::Learning | ExampleClass::HabitFormation => {
                to.rank_of(consumed) < rank_now
            }
            ExampleClass::PreferenceForVariety => to.rank_of(consumed) > rank_now,
            ExampleClass::Complements { cause, target } => {
                consumed == *cause && to.rank_of(*target) < cur.rank_of(*target)
            }
            ExampleClass::Substitutes { cause, target } => {
                consumed == *cause && to.rank_of(*target) > cur.rank_of(*target)
            }
            _ => false,
        };
        if stricter {
            strict.push(id);
        }
    }
    (allowed, strict)
}

/// Dirichlet-style integer weights over `allowed`, with `strength` of the
/// mass concentrated on `strict` when that set is nonempty.
fn sample_row(
    count: usize,
    allowed: &[OrderId],
    strict: &[OrderId],
    strength: &BigRational,
    rng: &mut ChaCha8Rng,
) -> Result<OrderDistribution<BigRational>> {
    if allowed.is_empty() {
        return Err(Error::Internal("class admits no destination order".into()));
    }
    let mut weights = vec![BigRational::zero(); count];
    let mut spread = |ids: &[OrderId], mass: BigRational, rng: &mut ChaCha8Rng| {
        let raw: Vec<i64> = ids.iter().map(|_| rng.gen_range(1..9)).collect();
        let total: i64 = raw.iter().sum();
        for (&id, w) in ids.iter().zip(raw) {
            weights[id] += mass.clone() * rat(w, total);
        }
    };
    if strict.is_empty() {
        spread(allowed, BigRational::one(), rng);
    } else {
        spread(strict, strength.clone(), rng);
        spread(allowed, BigRational::one() - strength.clone(), rng);
    }
    OrderDistribution::new(weights)
}

/// State-independent kernel `t(x) = (1 − α) μ + α · uniform(x-top orders)`,
/// which makes the consumed alternative weakly likelier to beat any rival
/// than any other consumption does. The tilt is re-verified before
/// returning.
fn status_quo_bias(
    space: Arc<OrderSpace>,
    rng: &mut ChaCha8Rng,
    strength: &BigRational,
) -> Result<TransitionFunction<BigRational>> {
    let n = space.n();
    let count = space.count();
    let raw: Vec<i64> = (0..count).map(|_| rng.gen_range(1..9)).collect();
    let total: i64 = raw.iter().sum();
    let mu: Vec<BigRational> = raw.iter().map(|&w| rat(w, total)).collect();
    let alpha = strength.clone();
    let mut per_alt: Vec<Vec<BigRational>> = Vec::with_capacity(n);
    for x in 0..n as u8 {
        let tops: Vec<OrderId> = (0..count)
            .filter(|&o| space.order(o).ranking()[0] == Alt(x))
            .collect();
        let mut row: Vec<BigRational> = mu
            .iter()
            .map(|m| (BigRational::one() - alpha.clone()) * m.clone())
            .collect();
        let share = alpha.clone() * rat(1, tops.len() as i64);
        for &o in &tops {
            row[o] += share.clone();
        }
        per_alt.push(row);
    }
    // prob(x ≻ y | t(x)) ≥ prob(x ≻ y | t(z)) for all triples.
    let beat = |dist: &[BigRational], x: Alt, y: Alt| -> BigRational {
        (0..count)
            .filter(|&o| space.order(o).prefers(x, y))
            .map(|o| dist[o].clone())
            .sum()
    };
    for x in 0..n as u8 {
        for y in 0..n as u8 {
            if x == y {
                continue;
            }
            let own = beat(&per_alt[x as usize], Alt(x), Alt(y));
            for z in 0..n {
                if beat(&per_alt[z], Alt(x), Alt(y)) > own {
                    return Err(Error::Internal("status-quo tilt failed".into()));
                }
            }
        }
    }
    TransitionFunction::build(space, |x, _from| {
        OrderDistribution::new(per_alt[x.index()].clone())
    })
}

/// The fixed two-preference kernel on three alternatives. Orders `x y z`
/// and `z y x` carry all the mass; consuming the middle good mimics
/// consuming whichever extreme good currently tops the order.
fn two_preference_invariant() -> Result<TransitionFunction<BigRational>> {
    let space = Arc::new(OrderSpace::new(3));
    let xyz = space
        .id_of(&LinearOrder::from_indices(&[0, 1, 2]).unwrap())
        .expect("order");
    let zyx = space
        .id_of(&LinearOrder::from_indices(&[2, 1, 0]).unwrap())
        .expect("order");
    let count = space.count();
    let dist = |wx: BigRational, wz: BigRational| {
        let mut w = vec![BigRational::zero(); count];
        w[xyz] = wx;
        w[zyx] = wz;
        OrderDistribution::new(w)
    };
    TransitionFunction::build(space, |consumed, from| match consumed.index() {
        0 => dist(rat(2, 3), rat(1, 3)),
        2 => dist(rat(1, 3), rat(2, 3)),
        _ => {
            if from == zyx {
                dist(rat(1, 3), rat(2, 3))
            } else if from == xyz {
                dist(rat(2, 3), rat(1, 3))
            } else {
                dist(rat(1, 2), rat(1, 2))
            }
        }
    })
}

/// The fixed deterministic kernel on three alternatives: consuming the
/// first good installs `b ≻ c ≻ a`, consuming either other good installs
/// `a ≻ c ≻ b`.
fn deterministic_switching() -> Result<TransitionFunction<BigRational>> {
    let space = Arc::new(OrderSpace::new(3));
    let bca = space
        .id_of(&LinearOrder::from_indices(&[1, 2, 0]).unwrap())
        .expect("order");
    let acb = space
        .id_of(&LinearOrder::from_indices(&[0, 2, 1]).unwrap())
        .expect("order");
    let count = space.count();
    TransitionFunction::build(space, |consumed, _from| {
        let target = if consumed.index() == 0 { bca } else { acb };
        Ok(OrderDistribution::delta(target, count))
    })
}

/// Random point of the probability simplex with all weights positive
/// multiples of `1/denominator` (a uniform composition). A common, small
/// denominator keeps downstream exact linear algebra fast.
pub fn random_simplex_weights(
    count: usize,
    denominator: i64,
    rng: &mut impl Rng,
) -> Vec<BigRational> {
    assert!(denominator >= count as i64);
    let mut cuts = std::collections::BTreeSet::new();
    while cuts.len() < count - 1 {
        cuts.insert(rng.gen_range(1..denominator));
    }
    let mut parts = Vec::with_capacity(count);
    let mut prev = 0i64;
    for &c in &cuts {
        parts.push(c - prev);
        prev = c;
    }
    parts.push(denominator - prev);
    parts.into_iter().map(|p| rat(p, denominator)).collect()
}

/// Uniformly random full-support rational kernel, used across the test
/// suites. `granularity` multiplies the order count to form the common
/// row denominator.
pub fn random_full_support_kernel(
    n: usize,
    rng: &mut impl Rng,
    granularity: i64,
) -> TransitionFunction<BigRational> {
    let space = Arc::new(OrderSpace::new(n));
    let count = space.count();
    let denom = granularity * count as i64;
    TransitionFunction::build(space, |_x, _from| {
        OrderDistribution::new(random_simplex_weights(count, denom, rng))
    })
    .expect("valid random kernel")
}

/// Random craving specification with strictly monotone weights.
pub fn random_craving_spec(n: usize, rng: &mut impl Rng) -> Result<CravingSpec<BigRational>> {
    let mut perm: Vec<u8> = (0..n as u8).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let base = LinearOrder::from_indices(&perm)?;
    // Strictly decreasing weights along the base order via cumulative sums.
    let mut raw: Vec<i64> = (0..n).map(|_| rng.gen_range(1..6)).collect();
    for i in (0..n - 1).rev() {
        raw[i] = raw[i + 1] + rng.gen_range(1..6);
    }
    let total: i64 = raw.iter().sum();
    let mut weights = vec![BigRational::zero(); n];
    for (rank, &alt) in base.ranking().iter().enumerate() {
        weights[alt.index()] = rat(raw[rank], total);
    }
    let mut persistence = vec![vec![BigRational::zero(); n]; n];
    for (x, row) in persistence.iter_mut().enumerate() {
        for (y, cell) in row.iter_mut().enumerate() {
            if x != y {
                *cell = rat(rng.gen_range(1..10), 10);
            }
        }
    }
    CravingSpec::new(base, weights, persistence)
}
