//! Transition functions, per-menu Markov chains, stationary and invariant
//! distributions, mean passage times, and the joint (preference, menu) chain.
//!
//! For a transition function `t` and a fixed menu `A`, the induced chain has
//! entries `m_A(≻, ≻′) = t_{≻′}(M(≻, A), ≻)`. Stationary distributions are
//! solved as a linear system rather than iterated, so they are exact in
//! rational mode and well defined for periodic single-class chains (where
//! they coincide with the Cesàro time average). Power iteration is kept as a
//! test oracle only.

use crate::error::{Error, Result};
use crate::lattice::{
    menus_size2, nonempty_menus, Alt, Menu, OrderDistribution, OrderId, OrderSpace,
    RandomChoiceRule,
};
use crate::lp;
use crate::mat::{solve_system, Mat, SolveOutcome};
use crate::num::Scalar;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Float-mode threshold for treating a transition probability as an edge.
const EDGE_TOL: f64 = 0.0;
/// Residual bound on `νM = ν` checks in float mode.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-12;

/// Kernel mapping (consumed alternative, current order) to a distribution
/// over next-period orders. Dense over all pairs.
#[derive(Debug, Clone)]
pub struct TransitionFunction<T> {
    space: Arc<OrderSpace>,
    /// Row for pair `(x, ≻)` lives at `x.index() * count + order`.
    rows: Vec<OrderDistribution<T>>,
    full_support: bool,
}

impl<T: Scalar> TransitionFunction<T> {
    pub fn from_rows(space: Arc<OrderSpace>, rows: Vec<OrderDistribution<T>>) -> Result<Self> {
        let expect = space.n() * space.count();
        if rows.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "kernel has {} rows, expected {}",
                rows.len(),
                expect
            )));
        }
        for r in &rows {
            if r.len() != space.count() {
                return Err(Error::DimensionMismatch(
                    "kernel row length must be the order count".into(),
                ));
            }
        }
        let full_support = rows.iter().all(|r| r.full_support());
        Ok(TransitionFunction {
            space,
            rows,
            full_support,
        })
    }

    /// Builds the dense kernel from a closure over `(x, ≻)`.
    pub fn build(
        space: Arc<OrderSpace>,
        mut f: impl FnMut(Alt, OrderId) -> Result<OrderDistribution<T>>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(space.n() * space.count());
        for x in 0..space.n() as u8 {
            for o in 0..space.count() {
                rows.push(f(Alt(x), o)?);
            }
        }
        Self::from_rows(space, rows)
    }

    pub fn space(&self) -> &Arc<OrderSpace> {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn order_count(&self) -> usize {
        self.space.count()
    }

    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn row(&self, x: Alt, from: OrderId) -> &OrderDistribution<T> {
        &self.rows[x.index() * self.space.count() + from]
    }

    /// `t_{to}(x, from)`.
    pub fn prob(&self, x: Alt, from: OrderId, to: OrderId) -> &T {
        self.row(x, from).weight(to)
    }

    pub fn is_consumption_independent(&self) -> bool {
        let count = self.space.count();
        (0..count).all(|o| (1..self.space.n()).all(|x| self.rows[x * count + o] == self.rows[o]))
    }

    pub fn is_state_independent(&self) -> bool {
        let count = self.space.count();
        (0..self.space.n())
            .all(|x| (1..count).all(|o| self.rows[x * count + o] == self.rows[x * count]))
    }

    pub fn map_approx(&self) -> TransitionFunction<f64> {
        TransitionFunction {
            space: Arc::clone(&self.space),
            rows: self.rows.iter().map(|r| r.map_approx()).collect(),
            full_support: self.full_support,
        }
    }
}

/// Markov kernel governing exogenous menu evolution over the menus with at
/// least two members.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalFunction<T> {
    n: usize,
    menus: Vec<Menu>,
    /// `rows[i][j]` is the probability of moving from `menus[i]` to `menus[j]`.
    rows: Vec<Vec<T>>,
    full_support: bool,
}

impl<T: Scalar> ArrivalFunction<T> {
    pub fn from_rows(n: usize, rows: Vec<Vec<T>>) -> Result<Self> {
        let menus = menus_size2(n);
        if rows.len() != menus.len() || rows.iter().any(|r| r.len() != menus.len()) {
            return Err(Error::DimensionMismatch(format!(
                "arrival kernel must be {0}x{0} over the size-2+ menus",
                menus.len()
            )));
        }
        for row in &rows {
            let total: T = row.iter().cloned().sum();
            if !total.eq_tol(&T::one(), crate::lattice::DISTRIBUTION_SUM_TOL) {
                return Err(Error::InvalidDistribution(format!(
                    "arrival row sums to {total}"
                )));
            }
            if row
                .iter()
                .any(|w| !w.is_nonneg_tol(crate::lattice::DISTRIBUTION_SUM_TOL))
            {
                return Err(Error::InvalidDistribution("negative arrival weight".into()));
            }
        }
        let full_support = rows
            .iter()
            .all(|r| r.iter().all(|w| !w.is_zero() && !w.is_negative_scalar()));
        Ok(ArrivalFunction {
            n,
            menus,
            rows,
            full_support,
        })
    }

    pub fn uniform(n: usize) -> Self {
        let menus = menus_size2(n);
        let k = menus.len();
        let w = T::from_usize_ratio(1, k);
        ArrivalFunction {
            n,
            menus: menus.clone(),
            rows: vec![vec![w; k]; k],
            full_support: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn menus(&self) -> &[Menu] {
        &self.menus
    }

    pub fn menu_index(&self, menu: Menu) -> Option<usize> {
        self.menus.iter().position(|&m| m == menu)
    }

    /// `s_B(A)`: probability that tomorrow's menu is `B` given today's is `A`.
    pub fn prob(&self, from: Menu, to: Menu) -> Option<&T> {
        let i = self.menu_index(from)?;
        let j = self.menu_index(to)?;
        Some(&self.rows[i][j])
    }

    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn matrix(&self) -> Mat<T> {
        Mat::from_rows(self.rows.clone())
    }

    pub fn map_approx(&self) -> ArrivalFunction<f64> {
        ArrivalFunction {
            n: self.n,
            menus: self.menus.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|w| w.approx()).collect())
                .collect(),
            full_support: self.full_support,
        }
    }
}

/// The preference chain induced by a transition function at a fixed menu.
#[derive(Debug, Clone)]
pub struct MenuChain<T> {
    space: Arc<OrderSpace>,
    menu: Menu,
    matrix: Mat<T>,
}

impl<T: Scalar> MenuChain<T> {
    pub fn menu(&self) -> Menu {
        self.menu
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<OrderSpace> {
        &self.space
    }

    pub fn states(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Wraps an explicit matrix as a chain tagged with a menu; used for the
/// backward-mixed chains of the menu-varying investment test.
pub fn chain_from_matrix<T: Scalar>(
    space: Arc<OrderSpace>,
    menu: Menu,
    matrix: Mat<T>,
) -> MenuChain<T> {
    MenuChain {
        space,
        menu,
        matrix,
    }
}

/// Builds `M_A` with entries `t_{≻′}(M(≻, A), ≻)`.
pub fn menu_chain<T: Scalar>(t: &TransitionFunction<T>, menu: Menu) -> Result<MenuChain<T>> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let space = Arc::clone(t.space());
    let count = space.count();
    let mut m = Mat::zeros(count, count);
    for from in 0..count {
        let chosen = space.maximizer_id(from, menu)?;
        let row = t.row(chosen, from);
        for to in 0..count {
            m[(from, to)] = row.weight(to).clone();
        }
    }
    Ok(MenuChain {
        space,
        menu,
        matrix: m,
    })
}

/// Communication structure of a finite chain.
#[derive(Debug, Clone)]
pub struct ChainStructure {
    /// Strongly connected components, each sorted; indexed by component id.
    pub components: Vec<Vec<usize>>,
    /// Ids of components with no outgoing edges.
    pub recurrent: Vec<usize>,
    /// gcd of cycle lengths per recurrent component.
    pub periods: Vec<usize>,
}

impl ChainStructure {
    pub fn single_recurrent_class(&self) -> bool {
        self.recurrent.len() == 1
    }

    pub fn irreducible(&self) -> bool {
        self.components.len() == 1
    }

    pub fn is_ergodic(&self) -> bool {
        self.irreducible() && self.periods.first().is_some_and(|&p| p == 1)
    }

    /// Period of the unique recurrent class, if there is exactly one.
    pub fn recurrent_period(&self) -> Option<usize> {
        if self.single_recurrent_class() {
            Some(self.periods[0])
        } else {
            None
        }
    }
}

/// Tarjan strongly-connected components on the positive-entry digraph, plus
/// gcd-of-cycle-length periods for the recurrent classes.
pub fn chain_structure<T: Scalar>(matrix: &Mat<T>) -> ChainStructure {
    let n = matrix.nrows();
    let edge = |i: usize, j: usize| matrix[(i, j)].approx() > EDGE_TOL && !matrix[(i, j)].is_zero();

    // Iterative Tarjan.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp_of = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut advanced = false;
            while *next < n {
                let w = *next;
                *next += 1;
                if !edge(v, w) {
                    continue;
                }
                if index[w] == usize::MAX {
                    call.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp_of[w] = components.len();
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
            call.pop();
            if let Some(&mut (parent, _)) = call.last_mut() {
                low[parent] = low[parent].min(low[v]);
            }
        }
    }

    let mut recurrent = Vec::new();
    let mut periods = Vec::new();
    for (cid, comp) in components.iter().enumerate() {
        let leaves = comp
            .iter()
            .any(|&v| (0..n).any(|w| edge(v, w) && comp_of[w] != cid));
        if leaves {
            continue;
        }
        recurrent.push(cid);
        // Period: gcd over in-class edges of level[u] + 1 - level[v].
        let root = comp[0];
        let mut level = vec![None::<i64>; n];
        level[root] = Some(0);
        let mut queue = std::collections::VecDeque::from([root]);
        let mut g: i64 = 0;
        while let Some(u) = queue.pop_front() {
            for w in 0..n {
                if !edge(u, w) || comp_of[w] != cid {
                    continue;
                }
                match level[w] {
                    None => {
                        level[w] = Some(level[u].unwrap() + 1);
                        queue.push_back(w);
                    }
                    Some(lw) => {
                        let diff = level[u].unwrap() + 1 - lw;
                        g = gcd_i64(g, diff.abs());
                    }
                }
            }
        }
        periods.push(if g == 0 { 1 } else { g as usize });
    }
    ChainStructure {
        components,
        recurrent,
        periods,
    }
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd_i64(b, a % b)
    }
}

/// Unique invariant distribution of a chain with a single recurrent class.
///
/// For an aperiodic class this is the stationary (limit) distribution; for a
/// periodic class it is the Cesàro time average, which is the object the
/// long-run choice frequencies are built from. Errors with `NotErgodic` when
/// the chain has several recurrent classes.
pub fn stationary<T: Scalar>(chain: &MenuChain<T>) -> Result<OrderDistribution<T>> {
    stationary_of_matrix(chain.matrix()).map_err(|e| match e {
        Error::NotErgodic(msg) => Error::NotErgodic(format!("menu {:#04x}: {msg}", chain.menu().0)),
        other => other,
    })
}

/// Same as [`stationary`] but also demands aperiodicity.
pub fn stationary_strict<T: Scalar>(chain: &MenuChain<T>) -> Result<OrderDistribution<T>> {
    let s = chain_structure(chain.matrix());
    if !s.single_recurrent_class() {
        return Err(Error::NotErgodic(format!(
            "menu {:#04x}: {} recurrent classes",
            chain.menu().0,
            s.recurrent.len()
        )));
    }
    if s.recurrent_period() != Some(1) {
        return Err(Error::NotErgodic(format!(
            "menu {:#04x}: recurrent class has period {}",
            chain.menu().0,
            s.recurrent_period().unwrap_or(0)
        )));
    }
    stationary(chain)
}

pub(crate) fn stationary_of_matrix<T: Scalar>(matrix: &Mat<T>) -> Result<OrderDistribution<T>> {
    let s = chain_structure(matrix);
    if !s.single_recurrent_class() {
        return Err(Error::NotErgodic(format!(
            "{} recurrent classes",
            s.recurrent.len()
        )));
    }
    let n = matrix.nrows();
    // Rows: (M^T - I) ν = 0 stacked with Σν = 1.
    let mut a = Mat::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = matrix[(i, j)].clone();
        }
    }
    for i in 0..n {
        let d = a[(i, i)].clone() - T::one();
        a[(i, i)] = d;
        a[(n, i)] = T::one();
    }
    let mut b = vec![T::zero(); n + 1];
    b[n] = T::one();
    match solve_system(&a, &b, STATIONARY_RESIDUAL_TOL) {
        SolveOutcome::Unique(nu) => {
            let residual = residual_inf(matrix, &nu);
            if residual > STATIONARY_RESIDUAL_TOL {
                return Err(Error::Internal(format!(
                    "stationary residual {residual} exceeds bound"
                )));
            }
            // Tiny float negatives are legitimate zeros.
            let cleaned: Vec<T> = nu
                .into_iter()
                .map(|w| {
                    if w.is_negative_scalar() && w.is_zero_tol(1e-12) {
                        T::zero()
                    } else {
                        w
                    }
                })
                .collect();
            OrderDistribution::new(cleaned)
        }
        SolveOutcome::Underdetermined { .. } => Err(Error::NotErgodic(
            "invariant distribution is not unique".into(),
        )),
        SolveOutcome::Inconsistent => Err(Error::Internal(
            "stochastic matrix without invariant distribution".into(),
        )),
    }
}

fn residual_inf<T: Scalar>(matrix: &Mat<T>, nu: &[T]) -> f64 {
    let image = matrix.vec_mul(nu);
    image
        .iter()
        .zip(nu)
        .map(|(a, b)| (a.clone() - b.clone()).abs_val().approx())
        .fold(0.0, f64::max)
}

/// Power iteration oracle; converges for aperiodic single-class chains.
pub fn power_iteration(matrix: &Mat<f64>, tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = matrix.nrows();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let next = matrix.vec_mul(&v);
        let diff = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if diff < tol {
            return Some(v);
        }
    }
    None
}

/// Searches for a single distribution invariant for every size-2+ menu chain.
///
/// Exact-rational feasibility: row-reduces the stacked invariance equations
/// and, when the solution space has positive dimension, maximizes the
/// minimum weight by LP. Returns `None` when no distribution works.
pub fn invariant_distribution_common(
    t: &TransitionFunction<BigRational>,
) -> Result<Option<OrderDistribution<BigRational>>> {
    let chains: Vec<MenuChain<BigRational>> = menus_size2(t.n())
        .into_iter()
        .map(|m| menu_chain(t, m))
        .collect::<Result<_>>()?;
    match best_common_invariant(&chains)? {
        InvariantOutcome::NoSolution => Ok(None),
        InvariantOutcome::Best { eta, nu } => {
            if eta.is_negative_scalar() {
                Ok(None)
            } else {
                Ok(Some(OrderDistribution::new(nu)?))
            }
        }
    }
}

/// Result of maximizing the minimum entry over the affine set
/// `{ν : νM_A = ν for all A, Σν = 1}`.
#[derive(Debug, Clone)]
pub(crate) enum InvariantOutcome {
    /// The equality system has no solution at all (not even signed).
    NoSolution,
    /// `eta` is the best achievable minimum entry and `nu` attains it.
    Best {
        eta: BigRational,
        nu: Vec<BigRational>,
    },
}

pub(crate) fn best_common_invariant(chains: &[MenuChain<BigRational>]) -> Result<InvariantOutcome> {
    let count = chains
        .first()
        .map(|c| c.states())
        .ok_or_else(|| Error::DimensionMismatch("no chains supplied".into()))?;
    // Stacked equations: for every chain and every column j,
    // Σ_i ν_i (m_ij − δ_ij) = 0, then the normalization row.
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(chains.len() * count + 1);
    for chain in chains {
        let m = chain.matrix();
        for j in 0..count {
            let mut row = Vec::with_capacity(count);
            for i in 0..count {
                let mut v = m[(i, j)].clone();
                if i == j {
                    v -= BigRational::one();
                }
                row.push(v);
            }
            if row.iter().any(|v| !v.is_zero()) {
                rows.push(row);
            }
        }
    }
    rows.push(vec![BigRational::one(); count]);
    let mut b = vec![BigRational::zero(); rows.len()];
    *b.last_mut().expect("nonempty") = BigRational::one();
    let a = Mat::from_rows(rows);
    match solve_system(&a, &b, 0.0) {
        SolveOutcome::Inconsistent => Ok(InvariantOutcome::NoSolution),
        SolveOutcome::Unique(nu) => {
            let eta = nu.iter().min().cloned().expect("nonempty");
            Ok(InvariantOutcome::Best { eta, nu })
        }
        SolveOutcome::Underdetermined {
            particular,
            nullspace,
        } => {
            // Maximize η subject to particular + Σ α_k null_k ≥ η 1.
            let d = nullspace.len();
            let mut sys = lp::RationalMatrixSystem::new(d + 1, vec![false; d + 1]);
            for i in 0..count {
                let mut coeffs: Vec<(usize, BigRational)> = Vec::with_capacity(d + 1);
                for (k, basis) in nullspace.iter().enumerate() {
                    if !basis[i].is_zero() {
                        coeffs.push((k, basis[i].clone()));
                    }
                }
                coeffs.push((d, -BigRational::one()));
                sys.add_ge(coeffs, -particular[i].clone());
            }
            let mut obj = vec![BigRational::zero(); d + 1];
            obj[d] = BigRational::one();
            match lp::maximize(&sys, &obj)? {
                lp::LpOutcome::Optimal { value, point } => {
                    let mut nu = particular;
                    for (k, basis) in nullspace.iter().enumerate() {
                        for i in 0..count {
                            let upd = point[k].clone() * basis[i].clone();
                            nu[i] += upd;
                        }
                    }
                    Ok(InvariantOutcome::Best { eta: value, nu })
                }
                lp::LpOutcome::Infeasible { .. } => {
                    Err(Error::Internal("eta program cannot be infeasible".into()))
                }
            }
        }
    }
}

/// Probe helper exposing the common-invariant search outcome (true when a
/// nonnegative common invariant exists); used by the profiling example.
pub fn best_common_invariant_probe(chains: &[MenuChain<BigRational>]) -> bool {
    matches!(
        best_common_invariant(chains),
        Ok(InvariantOutcome::Best { eta, .. }) if !eta.is_negative_scalar()
    )
}

/// Mean first-passage times of an irreducible chain.
///
/// Diagonal entries are mean return times `1/ν(j)`. Aperiodic chains go
/// through the fundamental matrix `Z = (I − M + 1ν)⁻¹` with
/// `n(i,j) = (z_jj − z_ij)/ν_j`; periodic ones fall back to the first-step
/// linear system, where the same quantities remain well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageMatrix<T> {
    times: Mat<T>,
}

impl<T: Scalar> PassageMatrix<T> {
    pub fn time(&self, from: OrderId, to: OrderId) -> &T {
        &self.times[(from, to)]
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.times
    }
}

pub fn mean_passage<T: Scalar>(chain: &MenuChain<T>) -> Result<PassageMatrix<T>> {
    let s = chain_structure(chain.matrix());
    if !s.irreducible() {
        return Err(Error::NotErgodic(format!(
            "menu {:#04x}: chain is not irreducible",
            chain.menu().0
        )));
    }
    let m = chain.matrix();
    let n = m.nrows();
    let nu = stationary(chain)?;
    let times = if s.recurrent_period() == Some(1) {
        // Fundamental matrix route.
        let mut core = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = -m[(i, j)].clone() + nu.weight(j).clone();
                if i == j {
                    v += T::one();
                }
                core[(i, j)] = v;
            }
        }
        let z = core
            .inverse(1e-14)
            .ok_or_else(|| Error::Internal("fundamental matrix is singular".into()))?;
        let mut times = Mat::zeros(n, n);
        for j in 0..n {
            let nu_j = nu.weight(j).clone();
            for i in 0..n {
                times[(i, j)] = if i == j {
                    T::one() / nu_j.clone()
                } else {
                    (z[(j, j)].clone() - z[(i, j)].clone()) / nu_j.clone()
                };
            }
        }
        times
    } else {
        // First-step equations, one linear solve per target state.
        let mut times = Mat::zeros(n, n);
        for j in 0..n {
            let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            let k = others.len();
            let mut a = Mat::zeros(k, k);
            let b = vec![T::one(); k];
            for (r, &i) in others.iter().enumerate() {
                for (c, &l) in others.iter().enumerate() {
                    let mut v = -m[(i, l)].clone();
                    if i == l {
                        v += T::one();
                    }
                    a[(r, c)] = v;
                }
            }
            match solve_system(&a, &b, 1e-14) {
                SolveOutcome::Unique(x) => {
                    for (r, &i) in others.iter().enumerate() {
                        times[(i, j)] = x[r].clone();
                    }
                    let mut ret = T::one();
                    for (r, &l) in others.iter().enumerate() {
                        ret += m[(j, l)].clone() * x[r].clone();
                    }
                    times[(j, j)] = ret;
                }
                _ => {
                    return Err(Error::Internal(
                        "first-step passage system is singular".into(),
                    ))
                }
            }
        }
        times
    };
    Ok(PassageMatrix { times })
}

/// Long-run choice frequencies `p(x, A) = Σ_{≻ ∈ N(x,A)} ν_A(≻)` over every
/// nonempty menu. Singleton menus are forced choices.
pub fn time_average_rcr<T: Scalar>(t: &TransitionFunction<T>) -> Result<RandomChoiceRule<T>> {
    let space = t.space();
    let mut rule = RandomChoiceRule::new(t.n());
    for menu in nonempty_menus(t.n()) {
        let mut row = BTreeMap::new();
        if menu.len() == 1 {
            row.insert(menu.iter().next().expect("singleton"), T::one());
        } else {
            let chain = menu_chain(t, menu)?;
            let nu = stationary(&chain)?;
            for x in menu.iter() {
                let ids = space.upper_set(x, menu)?;
                row.insert(x, nu.mass_of(&ids));
            }
        }
        rule.insert_row(menu, row)?;
    }
    Ok(rule)
}

/// Chain over (menu, order) pairs driven jointly by an arrival function and
/// a transition function.
#[derive(Debug, Clone)]
pub struct JointChain<T> {
    space: Arc<OrderSpace>,
    menus: Vec<Menu>,
    matrix: Mat<T>,
}

impl<T: Scalar> JointChain<T> {
    /// State index for `(menu, order)`.
    pub fn state(&self, menu_idx: usize, order: OrderId) -> usize {
        menu_idx * self.space.count() + order
    }

    pub fn menus(&self) -> &[Menu] {
        &self.menus
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<OrderSpace> {
        &self.space
    }
}

/// Transition probability from `(A, ≻)` to `(B, ≻′)` is
/// `s_B(A) · t_{≻′}(M(≻, A), ≻)`.
pub fn joint_chain<T: Scalar>(
    t: &TransitionFunction<T>,
    s: &ArrivalFunction<T>,
) -> Result<JointChain<T>> {
    if s.n() != t.n() {
        return Err(Error::DimensionMismatch(
            "arrival and transition functions disagree on the ground set".into(),
        ));
    }
    let space = Arc::clone(t.space());
    let menus = s.menus().to_vec();
    let count = space.count();
    let states = menus.len() * count;
    let mut matrix = Mat::zeros(states, states);
    for (ai, &a) in menus.iter().enumerate() {
        for from in 0..count {
            let chosen = space.maximizer_id(from, a)?;
            let trow = t.row(chosen, from);
            for (bi, _) in menus.iter().enumerate() {
                let sab = s.prob(a, menus[bi]).expect("menu indexed").clone();
                if sab.is_zero() {
                    continue;
                }
                for to in 0..count {
                    let w = trow.weight(to);
                    if w.is_zero() {
                        continue;
                    }
                    matrix[(ai * count + from, bi * count + to)] = sab.clone() * w.clone();
                }
            }
        }
    }
    Ok(JointChain {
        space,
        menus,
        matrix,
    })
}

/// Stationary distribution of the joint chain, as a map state -> mass.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStationary<T> {
    pub menus: Vec<Menu>,
    pub order_count: usize,
    /// `weights[menu_idx * order_count + order]`.
    pub weights: Vec<T>,
}

impl<T: Scalar> JointStationary<T> {
    pub fn weight(&self, menu_idx: usize, order: OrderId) -> &T {
        &self.weights[menu_idx * self.order_count + order]
    }

    /// Marginal over menus.
    pub fn menu_marginal(&self) -> Vec<T> {
        (0..self.menus.len())
            .map(|mi| {
                (0..self.order_count)
                    .map(|o| self.weights[mi * self.order_count + o].clone())
                    .sum()
            })
            .collect()
    }

    /// Marginal over orders.
    pub fn order_marginal(&self) -> Vec<T> {
        (0..self.order_count)
            .map(|o| {
                (0..self.menus.len())
                    .map(|mi| self.weights[mi * self.order_count + o].clone())
                    .sum()
            })
            .collect()
    }
}

pub fn joint_stationary<T: Scalar>(chain: &JointChain<T>) -> Result<JointStationary<T>> {
    let nu = stationary_of_matrix(chain.matrix())?;
    Ok(JointStationary {
        menus: chain.menus.clone(),
        order_count: chain.space.count(),
        weights: nu.weights().to_vec(),
    })
}

/// Backward menu probabilities `ρ_s(B | A) = π(B) s_A(B) / π(A)`, defined on
/// menus with positive stationary mass.
pub fn rho<T: Scalar>(s: &ArrivalFunction<T>) -> Result<BTreeMap<(Menu, Menu), T>> {
    let pi = stationary_of_matrix(&s.matrix())?;
    let menus = s.menus();
    let mut out = BTreeMap::new();
    for (ai, &a) in menus.iter().enumerate() {
        let pa = pi.weight(ai);
        if pa.is_zero() {
            continue;
        }
        for (bi, &b) in menus.iter().enumerate() {
            let val = pi.weight(bi).clone() * s.prob(b, a).expect("indexed").clone() / pa.clone();
            out.insert((a, b), val);
        }
    }
    Ok(out)
}

/// Stationary distribution of the arrival chain itself.
pub fn arrival_stationary<T: Scalar>(s: &ArrivalFunction<T>) -> Result<Vec<T>> {
    Ok(stationary_of_matrix(&s.matrix())?.weights().to_vec())
}

/// Simulates the per-menu choice process and reports empirical choice
/// frequencies. Deterministic given the RNG state.
pub fn simulate_choice_frequencies<T: Scalar>(
    t: &TransitionFunction<T>,
    menu: Menu,
    steps: usize,
    rng: &mut impl Rng,
) -> Result<BTreeMap<Alt, f64>> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    let space = t.space();
    let count = space.count();
    // Cumulative rows in f64 for sampling.
    let mut cumul: Vec<Vec<f64>> = Vec::with_capacity(t.n() * count);
    for x in 0..t.n() as u8 {
        for o in 0..count {
            let mut acc = 0.0;
            let row = t
                .row(Alt(x), o)
                .weights()
                .iter()
                .map(|w| {
                    acc += w.approx();
                    acc
                })
                .collect();
            cumul.push(row);
        }
    }
    let mut counts: BTreeMap<Alt, u64> = menu.iter().map(|a| (a, 0)).collect();
    let mut state: OrderId = rng.gen_range(0..count);
    for _ in 0..steps {
        let chosen = space.maximizer_id(state, menu)?;
        *counts.get_mut(&chosen).expect("menu member") += 1;
        let u: f64 = rng.gen();
        let row = &cumul[chosen.index() * count + state];
        state = row.partition_point(|c| *c < u).min(count - 1);
    }
    Ok(counts
        .into_iter()
        .map(|(a, c)| (a, c as f64 / steps as f64))
        .collect())
}

/// Helper: builds every size-2+ menu chain.
pub fn all_menu_chains<T: Scalar>(t: &TransitionFunction<T>) -> Result<Vec<MenuChain<T>>> {
    menus_size2(t.n())
        .into_iter()
        .map(|m| menu_chain(t, m))
        .collect()
}

/// Builds an exact distribution from sparse (order, weight) pairs.
pub fn rational_distribution(
    weights: &[(OrderId, BigRational)],
    count: usize,
) -> Result<OrderDistribution<BigRational>> {
    let mut w = vec![BigRational::zero(); count];
    for (id, v) in weights {
        w[*id] = v.clone();
    }
    OrderDistribution::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize) -> Arc<OrderSpace> {
        Arc::new(OrderSpace::new(n))
    }

    /// n = 2 kernel whose every menu chain is [[2/3,1/3],[1/3,2/3]].
    fn symmetric_sticky() -> TransitionFunction<BigRational> {
        let sp = space(2);
        TransitionFunction::build(Arc::clone(&sp), |x, _from| {
            let stay = rat(2, 3);
            let leave = rat(1, 3);
            // Order 0 is x-first, order 1 is y-first.
            let w = if x == Alt(0) {
                vec![stay, leave]
            } else {
                vec![leave, stay]
            };
            OrderDistribution::new(w)
        })
        .unwrap()
    }

    fn identity_kernel(n: usize) -> TransitionFunction<BigRational> {
        let sp = space(n);
        let count = sp.count();
        TransitionFunction::build(Arc::clone(&sp), |_x, from| {
            Ok(OrderDistribution::delta(from, count))
        })
        .unwrap()
    }

    fn random_full_support(n: usize, rng: &mut impl Rng) -> TransitionFunction<BigRational> {
        let sp = space(n);
        let count = sp.count();
        TransitionFunction::build(Arc::clone(&sp), |_x, _from| {
            let weights: Vec<i64> = (0..count).map(|_| rng.gen_range(1..9)).collect();
            let total: i64 = weights.iter().sum();
            OrderDistribution::new(weights.into_iter().map(|w| rat(w, total)).collect())
        })
        .unwrap()
    }

    #[test]
    fn consumption_independent_kernels_share_one_chain() {
        let sp = space(3);
        let count = sp.count();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dists: Vec<OrderDistribution<BigRational>> = (0..count)
            .map(|_| {
                let weights: Vec<i64> = (0..count).map(|_| rng.gen_range(1..5)).collect();
                let total: i64 = weights.iter().sum();
                OrderDistribution::new(weights.into_iter().map(|w| rat(w, total)).collect())
                    .unwrap()
            })
            .collect();
        let t =
            TransitionFunction::build(Arc::clone(&sp), |_x, from| Ok(dists[from].clone())).unwrap();
        assert!(t.is_consumption_independent());
        let chains = all_menu_chains(&t).unwrap();
        for c in &chains[1..] {
            assert_eq!(c.matrix(), chains[0].matrix());
        }
    }

    #[test]
    fn stationary_of_symmetric_chain_is_uniform() {
        let t = symmetric_sticky();
        for menu in menus_size2(2) {
            let chain = menu_chain(&t, menu).unwrap();
            assert_eq!(chain.matrix()[(0, 0)], rat(2, 3));
            assert_eq!(chain.matrix()[(0, 1)], rat(1, 3));
            let nu = stationary(&chain).unwrap();
            assert_eq!(nu.weights(), &[rat(1, 2), rat(1, 2)]);
        }
    }

    #[test]
    fn identity_chain_is_not_ergodic() {
        let t = identity_kernel(2);
        let chain = menu_chain(&t, Menu::full(2)).unwrap();
        assert!(matches!(stationary(&chain), Err(Error::NotErgodic(_))));
    }

    #[test]
    fn periodic_single_class_chain_keeps_its_invariant() {
        // Deterministic two-cycle over the two orders of n = 2.
        let sp = space(2);
        let t = TransitionFunction::<BigRational>::build(Arc::clone(&sp), |_x, from| {
            Ok(OrderDistribution::delta(1 - from, 2))
        })
        .unwrap();
        let chain = menu_chain(&t, Menu::full(2)).unwrap();
        let structure = chain_structure(chain.matrix());
        assert_eq!(structure.recurrent_period(), Some(2));
        let nu = stationary(&chain).unwrap();
        assert_eq!(nu.weights(), &[rat(1, 2), rat(1, 2)]);
        assert!(matches!(
            stationary_strict(&chain),
            Err(Error::NotErgodic(_))
        ));
        // Forced alternation passes through the first-step solver.
        let passage = mean_passage(&chain).unwrap();
        assert_eq!(passage.time(0, 1), &rat(1, 1));
        assert_eq!(passage.time(1, 0), &rat(1, 1));
        assert_eq!(passage.time(0, 0), &rat(2, 1));
    }

    #[test]
    fn mean_passage_of_symmetric_chain() {
        let t = symmetric_sticky();
        let chain = menu_chain(&t, Menu::full(2)).unwrap();
        let p = mean_passage(&chain).unwrap();
        assert_eq!(p.time(0, 1), &rat(3, 1));
        assert_eq!(p.time(1, 0), &rat(3, 1));
        assert_eq!(p.time(0, 0), &rat(2, 1));
        assert_eq!(p.time(1, 1), &rat(2, 1));
    }

    #[test]
    fn mean_passage_of_iid_chain_is_inverse_mass() {
        // Both rows equal to (3/10, 7/10): passage time to j is 1/nu_j
        // regardless of the starting state.
        let sp = space(2);
        let t = TransitionFunction::build(Arc::clone(&sp), |_x, _from| {
            OrderDistribution::new(vec![rat(3, 10), rat(7, 10)])
        })
        .unwrap();
        let chain = menu_chain(&t, Menu::full(2)).unwrap();
        let p = mean_passage(&chain).unwrap();
        for i in 0..2 {
            assert_eq!(p.time(i, 0), &rat(10, 3));
            assert_eq!(p.time(i, 1), &rat(10, 7));
        }
    }

    #[test]
    fn mean_passage_satisfies_first_step_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let t = random_full_support(3, &mut rng);
            let chain = menu_chain(&t, Menu::full(3)).unwrap();
            let p = mean_passage(&chain).unwrap();
            let m = chain.matrix();
            let nu = stationary(&chain).unwrap();
            let count = chain.states();
            for i in 0..count {
                for j in 0..count {
                    let mut rhs = BigRational::one();
                    for k in 0..count {
                        if k != j {
                            rhs += m[(i, k)].clone() * p.time(k, j).clone();
                        }
                    }
                    assert_eq!(p.time(i, j), &rhs, "first-step equation at ({i},{j})");
                }
            }
            for j in 0..count {
                assert_eq!(
                    p.time(j, j),
                    &(BigRational::one() / nu.weight(j).clone()),
                    "diagonal is the mean return time"
                );
            }
        }
    }

    #[test]
    fn stationary_matches_power_iteration_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            for _ in 0..5 {
                let t = random_full_support(n, &mut rng);
                let tf = t.map_approx();
                for menu in menus_size2(n) {
                    let chain = menu_chain(&tf, menu).unwrap();
                    let nu = stationary(&chain).unwrap();
                    let pi = power_iteration(chain.matrix(), 1e-12, 100_000).unwrap();
                    for (a, b) in nu.weights().iter().zip(&pi) {
                        assert!((a - b).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rcr_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = random_full_support(3, &mut rng);
        let rule = time_average_rcr(&t).unwrap();
        for menu in nonempty_menus(3) {
            let total: BigRational = menu.iter().map(|x| rule.prob(x, menu).unwrap()).sum();
            assert_eq!(total, BigRational::one());
        }
    }

    #[test]
    fn common_invariant_for_consumption_independent_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = space(3);
        let count = sp.count();
        let dists: Vec<OrderDistribution<BigRational>> = (0..count)
            .map(|_| {
                let weights: Vec<i64> = (0..count).map(|_| rng.gen_range(1..5)).collect();
                let total: i64 = weights.iter().sum();
                OrderDistribution::new(weights.into_iter().map(|w| rat(w, total)).collect())
                    .unwrap()
            })
            .collect();
        let t =
            TransitionFunction::build(Arc::clone(&sp), |_x, from| Ok(dists[from].clone())).unwrap();
        let common = invariant_distribution_common(&t).unwrap().unwrap();
        let direct = stationary(&menu_chain(&t, Menu::full(3)).unwrap()).unwrap();
        assert_eq!(common.weights(), direct.weights());
    }

    #[test]
    fn no_common_invariant_for_distinct_state_independent_rows() {
        // State independent with t(x) != t(y) on n = 3.
        let sp = space(3);
        let count = sp.count();
        let t = TransitionFunction::build(Arc::clone(&sp), |x, _from| {
            let mut w = vec![rat(1, 12); count];
            w[x.index()] = rat(7, 12);
            OrderDistribution::new(w)
        })
        .unwrap();
        assert!(t.is_state_independent());
        assert!(invariant_distribution_common(&t).unwrap().is_none());
    }

    #[test]
    fn uniform_arrival_rho_is_flat() {
        let s = ArrivalFunction::<BigRational>::uniform(3);
        let k = s.menus().len();
        let r = rho(&s).unwrap();
        for (_, v) in r {
            assert_eq!(v, rat(1, k as i64));
        }
    }

    #[test]
    fn two_state_arrival_chain_rho() {
        // Arrival chain living on {x,y} and {x,z} with switch probability
        // 1/4; other menus feed into those two.
        let menus = menus_size2(3);
        let ixy = menus.iter().position(|m| m.0 == 0b011).unwrap();
        let ixz = menus.iter().position(|m| m.0 == 0b101).unwrap();
        let k = menus.len();
        let mut rows = vec![vec![rat(0, 1); k]; k];
        for (i, row) in rows.iter_mut().enumerate() {
            if i == ixy {
                row[ixy] = rat(3, 4);
                row[ixz] = rat(1, 4);
            } else if i == ixz {
                row[ixy] = rat(1, 4);
                row[ixz] = rat(3, 4);
            } else {
                row[ixy] = rat(1, 2);
                row[ixz] = rat(1, 2);
            }
        }
        let s = ArrivalFunction::from_rows(3, rows).unwrap();
        let pi = arrival_stationary(&s).unwrap();
        assert_eq!(pi[ixy], rat(1, 2));
        assert_eq!(pi[ixz], rat(1, 2));
        let r = rho(&s).unwrap();
        let xy = menus[ixy];
        let xz = menus[ixz];
        assert_eq!(r[&(xy, xy)], rat(3, 4));
        assert_eq!(r[&(xy, xz)], rat(1, 4));
        assert_eq!(r[&(xz, xy)], rat(1, 4));
        // Rows condition out of the transient menus entirely.
        assert!(!r.contains_key(&(menus[2], xy)) || menus[2] == xy || menus[2] == xz);
    }

    #[test]
    fn consumption_independent_joint_chain_has_product_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sp = space(3);
        let count = sp.count();
        let dists: Vec<OrderDistribution<BigRational>> = (0..count)
            .map(|_| {
                let weights: Vec<i64> = (0..count).map(|_| rng.gen_range(1..5)).collect();
                let total: i64 = weights.iter().sum();
                OrderDistribution::new(weights.into_iter().map(|w| rat(w, total)).collect())
                    .unwrap()
            })
            .collect();
        let t =
            TransitionFunction::build(Arc::clone(&sp), |_x, from| Ok(dists[from].clone())).unwrap();
        // Random full-support arrival function.
        let k = menus_size2(3).len();
        let rows: Vec<Vec<BigRational>> = (0..k)
            .map(|_| {
                let w: Vec<i64> = (0..k).map(|_| rng.gen_range(1..5)).collect();
                let total: i64 = w.iter().sum();
                w.into_iter().map(|v| rat(v, total)).collect()
            })
            .collect();
        let s = ArrivalFunction::from_rows(3, rows).unwrap();
        let chain = joint_chain(&t, &s).unwrap();
        let psi = joint_stationary(&chain).unwrap();
        let pi = arrival_stationary(&s).unwrap();
        let nu = stationary(&menu_chain(&t, Menu::full(3)).unwrap()).unwrap();
        for (mi, _) in psi.menus.clone().iter().enumerate() {
            for o in 0..count {
                assert_eq!(
                    psi.weight(mi, o),
                    &(pi[mi].clone() * nu.weight(o).clone()),
                    "product form at ({mi},{o})"
                );
            }
        }
        // Marginal over orders equals the arrival stationary.
        assert_eq!(psi.menu_marginal(), pi);
    }

    #[test]
    fn simulation_tracks_stationary_frequencies() {
        let t = symmetric_sticky();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let freqs = simulate_choice_frequencies(&t, Menu::full(2), 200_000, &mut rng).unwrap();
        assert!((freqs[&Alt(0)] - 0.5).abs() < 5e-3);
        assert!((freqs[&Alt(1)] - 0.5).abs() < 5e-3);
    }
}
