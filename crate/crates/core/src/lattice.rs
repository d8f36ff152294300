//! Alternatives, menus, linear orders, and Möbius inversion.
//!
//! Menus are bitmasks over alternative indices; iterating menus by ascending
//! mask value keeps every downstream computation deterministic. Orders are
//! stored as best-first permutations.

use crate::error::{Error, Result};
use crate::num::Scalar;
use std::collections::{BTreeMap, HashMap};

/// Largest supported alternative count.
pub const MAX_ALTERNATIVES: usize = 7;

/// Index of an alternative within an [`AlternativeSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Alt(pub u8);

impl Alt {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for Alt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A subset of alternatives encoded as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Menu(pub u16);

impl Menu {
    pub fn empty() -> Self {
        Menu(0)
    }

    pub fn full(n: usize) -> Self {
        Menu(((1u32 << n) - 1) as u16)
    }

    pub fn singleton(a: Alt) -> Self {
        Menu(1 << a.0)
    }

    pub fn from_alts(alts: &[Alt]) -> Self {
        Menu(alts.iter().fold(0, |m, a| m | (1 << a.0)))
    }

    pub fn contains(self, a: Alt) -> bool {
        self.0 & (1 << a.0) != 0
    }

    pub fn insert(self, a: Alt) -> Self {
        Menu(self.0 | (1 << a.0))
    }

    pub fn remove(self, a: Alt) -> Self {
        Menu(self.0 & !(1 << a.0))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Menu) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Alt> {
        (0..16u8).filter(move |b| self.0 & (1 << b) != 0).map(Alt)
    }

    /// Supersets of `self` within the ground set of `n` alternatives,
    /// ascending by mask.
    pub fn supersets(self, n: usize) -> Vec<Menu> {
        let full = Menu::full(n).0;
        let extra = full & !self.0;
        // Enumerate submasks of `extra` in ascending order.
        let mut out = Vec::with_capacity(1 << extra.count_ones());
        let mut sub: u16 = 0;
        loop {
            out.push(Menu(self.0 | sub));
            if sub == extra {
                break;
            }
            sub = (sub.wrapping_sub(extra)) & extra;
        }
        out.sort();
        out
    }
}

/// All nonempty menus, ascending by mask.
pub fn nonempty_menus(n: usize) -> Vec<Menu> {
    (1..(1u32 << n)).map(|m| Menu(m as u16)).collect()
}

/// Menus with at least two members, ascending by mask.
pub fn menus_size2(n: usize) -> Vec<Menu> {
    nonempty_menus(n)
        .into_iter()
        .filter(|m| m.len() >= 2)
        .collect()
}

/// The ground set of alternatives with display labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlternativeSet {
    labels: Vec<String>,
}

impl AlternativeSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if !(2..=MAX_ALTERNATIVES).contains(&n) {
            return Err(Error::BadAlternativeCount {
                n,
                max: MAX_ALTERNATIVES,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if l.is_empty() || !seen.insert(l.clone()) {
                return Err(Error::BadLabels);
            }
        }
        Ok(AlternativeSet { labels })
    }

    /// Convenience constructor with labels `a`, `b`, `c`, ...
    pub fn with_default_labels(n: usize) -> Result<Self> {
        let labels = (0..n)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect();
        Self::new(labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, a: Alt) -> &str {
        &self.labels[a.index()]
    }

    pub fn alt_by_label(&self, label: &str) -> Option<Alt> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| Alt(i as u8))
    }

    pub fn alts(&self) -> impl Iterator<Item = Alt> {
        (0..self.labels.len() as u8).map(Alt)
    }

    pub fn full_menu(&self) -> Menu {
        Menu::full(self.n())
    }
}

/// A strict total ranking, best first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearOrder {
    ranking: Vec<Alt>,
}

impl LinearOrder {
    pub fn new(ranking: Vec<Alt>) -> Result<Self> {
        let n = ranking.len();
        let mut seen = vec![false; n];
        for a in &ranking {
            if a.index() >= n || seen[a.index()] {
                return Err(Error::NotAPermutation);
            }
            seen[a.index()] = true;
        }
        Ok(LinearOrder { ranking })
    }

    pub fn from_indices(idx: &[u8]) -> Result<Self> {
        Self::new(idx.iter().map(|&i| Alt(i)).collect())
    }

    pub fn ranking(&self) -> &[Alt] {
        &self.ranking
    }

    pub fn n(&self) -> usize {
        self.ranking.len()
    }

    /// Position of `a`, zero is best.
    pub fn rank_of(&self, a: Alt) -> usize {
        self.ranking
            .iter()
            .position(|&x| x == a)
            .expect("alt in order")
    }

    pub fn prefers(&self, a: Alt, b: Alt) -> bool {
        self.rank_of(a) < self.rank_of(b)
    }
}

/// All `n!` orders in lexicographic sequence of their best-first rankings.
pub fn enumerate_orders(n: usize) -> Vec<LinearOrder> {
    let mut perm: Vec<u8> = (0..n as u8).collect();
    let mut out = Vec::new();
    loop {
        out.push(LinearOrder::from_indices(&perm).expect("permutation"));
        // Next lexicographic permutation.
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| perm[i] < perm[i + 1])
        else {
            break;
        };
        let j = (i + 1..n)
            .rev()
            .find(|&j| perm[j] > perm[i])
            .expect("successor");
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    out
}

/// The best-ranked member of `menu` under `order`.
pub fn maximizer(order: &LinearOrder, menu: Menu) -> Result<Alt> {
    if menu.is_empty() {
        return Err(Error::EmptyMenu);
    }
    order
        .ranking()
        .iter()
        .copied()
        .find(|&a| menu.contains(a))
        .ok_or(Error::EmptyMenu)
}

/// Identifier of an order inside an [`OrderSpace`].
pub type OrderId = usize;

/// Precomputed order enumeration with maximizer tables.
#[derive(Debug, Clone)]
pub struct OrderSpace {
    n: usize,
    orders: Vec<LinearOrder>,
    index: HashMap<Vec<Alt>, OrderId>,
    /// `max_table[order][menu.0]` is the maximizer, `u8::MAX` for empty menus.
    max_table: Vec<Vec<u8>>,
}

impl OrderSpace {
    pub fn new(n: usize) -> Self {
        let orders = enumerate_orders(n);
        let index = orders
            .iter()
            .enumerate()
            .map(|(i, o)| (o.ranking().to_vec(), i))
            .collect();
        let masks = 1usize << n;
        let max_table = orders
            .iter()
            .map(|o| {
                (0..masks)
                    .map(|m| maximizer(o, Menu(m as u16)).map(|a| a.0).unwrap_or(u8::MAX))
                    .collect()
            })
            .collect();
        OrderSpace {
            n,
            orders,
            index,
            max_table,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self, id: OrderId) -> &LinearOrder {
        &self.orders[id]
    }

    pub fn orders(&self) -> &[LinearOrder] {
        &self.orders
    }

    pub fn id_of(&self, order: &LinearOrder) -> Option<OrderId> {
        self.index.get(order.ranking()).copied()
    }

    pub fn maximizer_id(&self, order: OrderId, menu: Menu) -> Result<Alt> {
        let v = self.max_table[order][menu.0 as usize];
        if v == u8::MAX {
            Err(Error::EmptyMenu)
        } else {
            Ok(Alt(v))
        }
    }

    /// `N(x, A)`: ids of orders whose maximizer in `A` is `x`.
    pub fn upper_set(&self, x: Alt, menu: Menu) -> Result<Vec<OrderId>> {
        if !menu.contains(x) {
            return Err(Error::NotInMenu {
                alt: x.index(),
                menu: menu.0,
            });
        }
        Ok((0..self.count())
            .filter(|&o| self.max_table[o][menu.0 as usize] == x.0)
            .collect())
    }

    /// `I(x, A)`: orders ranking everything outside `A` above `x` and `x`
    /// above the rest of `A`.
    pub fn strict_set(&self, x: Alt, menu: Menu) -> Result<Vec<OrderId>> {
        if !menu.contains(x) {
            return Err(Error::NotInMenu {
                alt: x.index(),
                menu: menu.0,
            });
        }
        Ok((0..self.count())
            .filter(|&o| self.lower_contour(x, o) == menu)
            .collect())
    }

    /// The unique menu `A` with `order ∈ I(x, A)`: `x` together with
    /// everything ranked below it.
    pub fn lower_contour(&self, x: Alt, order: OrderId) -> Menu {
        let ranking = self.orders[order].ranking();
        let pos = self.orders[order].rank_of(x);
        Menu::from_alts(&ranking[pos..])
    }
}

/// A probability distribution over the orders of an [`OrderSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrderDistribution<T> {
    weights: Vec<T>,
}

/// Float-mode tolerance on distribution mass sums.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

impl<T: Scalar> OrderDistribution<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        for w in &weights {
            if !w.is_nonneg_tol(DISTRIBUTION_SUM_TOL) {
                return Err(Error::InvalidDistribution(format!("negative weight {w}")));
            }
        }
        let total: T = weights.iter().cloned().sum();
        let one = T::one();
        if !total.eq_tol(&one, DISTRIBUTION_SUM_TOL) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(OrderDistribution { weights })
    }

    pub fn uniform(count: usize) -> Self {
        OrderDistribution {
            weights: vec![T::from_usize_ratio(1, count); count],
        }
    }

    pub fn delta(id: OrderId, count: usize) -> Self {
        let mut weights = vec![T::zero(); count];
        weights[id] = T::one();
        OrderDistribution { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, id: OrderId) -> &T {
        &self.weights[id]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn full_support(&self) -> bool {
        self.weights
            .iter()
            .all(|w| !w.is_zero() && !w.is_negative_scalar())
    }

    /// Mass assigned to a set of orders.
    pub fn mass_of(&self, ids: &[OrderId]) -> T {
        ids.iter().map(|&i| self.weights[i].clone()).sum()
    }

    pub fn map_approx(&self) -> OrderDistribution<f64> {
        OrderDistribution {
            weights: self.weights.iter().map(|w| w.approx()).collect(),
        }
    }
}

/// A menu-indexed choice frequency table.
///
/// The domain may be restricted (behavioral models only define choice on
/// menus containing their outside option), so rows are stored per menu.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomChoiceRule<T> {
    n: usize,
    rows: BTreeMap<Menu, BTreeMap<Alt, T>>,
}

impl<T: Scalar> RandomChoiceRule<T> {
    pub fn new(n: usize) -> Self {
        RandomChoiceRule {
            n,
            rows: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert_row(&mut self, menu: Menu, row: BTreeMap<Alt, T>) -> Result<()> {
        if menu.is_empty() {
            return Err(Error::EmptyMenu);
        }
        let mut total = T::zero();
        for (a, w) in &row {
            if !menu.contains(*a) {
                return Err(Error::NotInMenu {
                    alt: a.index(),
                    menu: menu.0,
                });
            }
            if !w.is_nonneg_tol(DISTRIBUTION_SUM_TOL) {
                return Err(Error::InvalidDistribution(format!(
                    "negative probability {w}"
                )));
            }
            total += w.clone();
        }
        if !total.eq_tol(&T::one(), DISTRIBUTION_SUM_TOL) {
            return Err(Error::InvalidDistribution(format!(
                "menu {:#04x} row sums to {total}",
                menu.0
            )));
        }
        self.rows.insert(menu, row);
        Ok(())
    }

    pub fn menus(&self) -> impl Iterator<Item = Menu> + '_ {
        self.rows.keys().copied()
    }

    pub fn row(&self, menu: Menu) -> Option<&BTreeMap<Alt, T>> {
        self.rows.get(&menu)
    }

    pub fn prob(&self, x: Alt, menu: Menu) -> Option<T> {
        self.rows
            .get(&menu)
            .map(|r| r.get(&x).cloned().unwrap_or_else(T::zero))
    }

    pub fn map_approx(&self) -> RandomChoiceRule<f64> {
        let rows = self
            .rows
            .iter()
            .map(|(m, r)| (*m, r.iter().map(|(a, w)| (*a, w.approx())).collect()))
            .collect();
        RandomChoiceRule { n: self.n, rows }
    }
}

/// Key of a cell in an arity-`T` choice table: alternatives then menus,
/// ordered menu-tuple first so iteration groups cells by menu product.
pub type CellKey = (Vec<Menu>, Vec<Alt>);

/// Signed Möbius inverse of a (joint) choice table on the product lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MobiusTable<T> {
    n: usize,
    periods: usize,
    entries: BTreeMap<CellKey, T>,
}

/// Enumerates the full arity-`periods` cell domain: every tuple of nonempty
/// menus and every choice tuple inside the menu product, deterministically.
pub fn product_cells(n: usize, periods: usize) -> Vec<CellKey> {
    let menus = nonempty_menus(n);
    let mut menu_tuples: Vec<Vec<Menu>> = vec![vec![]];
    for _ in 0..periods {
        let mut next = Vec::with_capacity(menu_tuples.len() * menus.len());
        for t in &menu_tuples {
            for &m in &menus {
                let mut t2 = t.clone();
                t2.push(m);
                next.push(t2);
            }
        }
        menu_tuples = next;
    }
    let mut cells = Vec::new();
    for mt in menu_tuples {
        let mut alt_tuples: Vec<Vec<Alt>> = vec![vec![]];
        for &menu in &mt {
            let mut next = Vec::new();
            for t in &alt_tuples {
                for a in menu.iter() {
                    let mut t2 = t.clone();
                    t2.push(a);
                    next.push(t2);
                }
            }
            alt_tuples = next;
        }
        for at in alt_tuples {
            cells.push((mt.clone(), at));
        }
    }
    cells
}

/// Componentwise superset tuples of a menu tuple, ascending.
pub fn superset_tuples(n: usize, menus: &[Menu]) -> Vec<Vec<Menu>> {
    let mut tuples: Vec<Vec<Menu>> = vec![vec![]];
    for &m in menus {
        let sups = m.supersets(n);
        let mut next = Vec::with_capacity(tuples.len() * sups.len());
        for t in &tuples {
            for &s in &sups {
                let mut t2 = t.clone();
                t2.push(s);
                next.push(t2);
            }
        }
        tuples = next;
    }
    tuples
}

impl<T: Scalar> MobiusTable<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn get(&self, menus: &[Menu], alts: &[Alt]) -> Option<&T> {
        self.entries.get(&(menus.to_vec(), alts.to_vec()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&CellKey, &T)> {
        self.entries.iter()
    }

    /// Recovers the source table: `p(x⃗, A⃗) = Σ_{A⃗′ ⊇ A⃗} q(x⃗, A⃗′)`.
    pub fn forward_sum(&self, menus: &[Menu], alts: &[Alt]) -> T {
        let mut total = T::zero();
        for sup in superset_tuples(self.n, menus) {
            if let Some(v) = self.entries.get(&(sup, alts.to_vec())) {
                total += v.clone();
            }
        }
        total
    }
}

/// Möbius inversion on the product menu lattice:
/// `q(x⃗, A⃗) = Σ_{A⃗′ ⊇ A⃗} ∏_i (−1)^{|A′_i ∖ A_i|} p(x⃗, A⃗′)`.
///
/// `value` must return the table entry for every cell of the full domain;
/// `None` aborts with `IncompleteDomain`.
pub fn mobius_invert<T: Scalar>(
    n: usize,
    periods: usize,
    value: impl Fn(&[Menu], &[Alt]) -> Option<T>,
) -> Result<MobiusTable<T>> {
    let cells = product_cells(n, periods);
    let mut entries = BTreeMap::new();
    for (menus, alts) in cells {
        let mut q = T::zero();
        for sup in superset_tuples(n, &menus) {
            let extra: usize = sup
                .iter()
                .zip(&menus)
                .map(|(s, m)| (s.0 & !m.0).count_ones() as usize)
                .sum();
            let p = value(&sup, &alts).ok_or_else(|| {
                Error::IncompleteDomain(format!("missing cell {sup:?} / {alts:?}"))
            })?;
            if extra.is_multiple_of(2) {
                q += p;
            } else {
                q -= p;
            }
        }
        entries.insert((menus, alts), q);
    }
    Ok(MobiusTable {
        n,
        periods,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, Scalar};
    use num_rational::BigRational;
    use num_traits::Zero;

    fn order(ids: &[u8]) -> LinearOrder {
        LinearOrder::from_indices(ids).unwrap()
    }

    #[test]
    fn order_enumeration_counts() {
        assert_eq!(enumerate_orders(2).len(), 2);
        assert_eq!(enumerate_orders(3).len(), 6);
        let five = enumerate_orders(5);
        assert_eq!(five.len(), 120);
        let distinct: std::collections::HashSet<_> =
            five.iter().map(|o| o.ranking().to_vec()).collect();
        assert_eq!(distinct.len(), 120);
    }

    #[test]
    fn maximizer_picks_best_member() {
        // a ≻ c ≻ b with indices a=0, b=1, c=2.
        let o = order(&[0, 2, 1]);
        let bc = Menu::from_alts(&[Alt(1), Alt(2)]);
        assert_eq!(maximizer(&o, bc).unwrap(), Alt(2));
        assert_eq!(maximizer(&o, Menu::full(3)).unwrap(), Alt(0));
        assert_eq!(maximizer(&o, Menu::singleton(Alt(1))).unwrap(), Alt(1));
        assert_eq!(maximizer(&o, Menu::empty()), Err(Error::EmptyMenu));
    }

    #[test]
    fn maximizer_agrees_with_naive_argmax() {
        let space = OrderSpace::new(4);
        for o in 0..space.count() {
            for menu in nonempty_menus(4) {
                let fast = space.maximizer_id(o, menu).unwrap();
                let naive = menu
                    .iter()
                    .min_by_key(|&a| space.order(o).rank_of(a))
                    .unwrap();
                assert_eq!(fast, naive);
            }
        }
    }

    #[test]
    fn upper_and_strict_sets_match_brute_force() {
        let space = OrderSpace::new(3);
        let ab = Menu::from_alts(&[Alt(0), Alt(1)]);
        // N(a, {a,b}) = {abc, acb, cab}.
        let n_set = space.upper_set(Alt(0), ab).unwrap();
        let rankings: Vec<Vec<u8>> = n_set
            .iter()
            .map(|&i| space.order(i).ranking().iter().map(|a| a.0).collect())
            .collect();
        assert_eq!(n_set.len(), 3);
        assert!(rankings.contains(&vec![0, 1, 2]));
        assert!(rankings.contains(&vec![0, 2, 1]));
        assert!(rankings.contains(&vec![2, 0, 1]));
        // I(a, {a,b}) = {cab}.
        let i_set = space.strict_set(Alt(0), ab).unwrap();
        assert_eq!(i_set.len(), 1);
        assert_eq!(space.order(i_set[0]).ranking(), &[Alt(2), Alt(0), Alt(1)]);
        // I(x, X) = N(x, X).
        for x in 0..3u8 {
            let full = Menu::full(3);
            assert_eq!(
                space.upper_set(Alt(x), full).unwrap(),
                space.strict_set(Alt(x), full).unwrap()
            );
        }
        assert!(space.upper_set(Alt(2), ab).is_err());
    }

    #[test]
    fn strict_sets_partition_upper_sets() {
        for n in 2..=5 {
            let space = OrderSpace::new(n);
            for menu in nonempty_menus(n) {
                for x in menu.iter() {
                    let n_set = space.upper_set(x, menu).unwrap();
                    let mut union: Vec<OrderId> = Vec::new();
                    for sup in menu.supersets(n) {
                        union.extend(space.strict_set(x, sup).unwrap());
                    }
                    union.sort_unstable();
                    let mut expected = n_set.clone();
                    expected.sort_unstable();
                    assert_eq!(union.len(), expected.len(), "disjointness");
                    assert_eq!(union, expected);
                }
            }
        }
    }

    #[test]
    fn mobius_inverse_of_uniform_rule() {
        // p(x, A) = 1/|A| over n = 3.
        let q =
            mobius_invert::<BigRational>(3, 1, |menus, _alts| Some(rat(1, menus[0].len() as i64)))
                .unwrap();
        let full = Menu::full(3);
        let ab = Menu::from_alts(&[Alt(0), Alt(1)]);
        let a = Menu::singleton(Alt(0));
        assert_eq!(q.get(&[full], &[Alt(0)]).unwrap(), &rat(1, 3));
        assert_eq!(q.get(&[ab], &[Alt(0)]).unwrap(), &rat(1, 6));
        assert_eq!(q.get(&[a], &[Alt(0)]).unwrap(), &rat(1, 3));
    }

    #[test]
    fn mobius_inverse_of_single_order_rule() {
        let space = OrderSpace::new(3);
        let fixed = space.id_of(&order(&[1, 0, 2])).unwrap();
        let q = mobius_invert::<BigRational>(3, 1, |menus, alts| {
            let max = space.maximizer_id(fixed, menus[0]).unwrap();
            Some(if max == alts[0] { rat(1, 1) } else { rat(0, 1) })
        })
        .unwrap();
        for (key, v) in q.entries() {
            let (menus, alts) = key;
            let in_strict = space
                .strict_set(alts[0], menus[0])
                .unwrap()
                .contains(&fixed);
            let expected = if in_strict { rat(1, 1) } else { rat(0, 1) };
            assert_eq!(v, &expected, "cell {key:?}");
        }
    }

    #[test]
    fn mobius_of_zero_table_is_zero() {
        let q = mobius_invert::<BigRational>(3, 1, |_, _| Some(BigRational::zero())).unwrap();
        assert!(q.entries().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn mobius_roundtrip_exact() {
        // Arity-2 rational table with arbitrary values; forward sum of the
        // inverse must reproduce it exactly.
        let n = 2;
        let table = |menus: &[Menu], alts: &[Alt]| {
            let h = (menus[0].0 as i64 * 7
                + menus[1].0 as i64 * 3
                + alts[0].0 as i64 * 11
                + alts[1].0 as i64 * 5)
                % 13;
            Some(rat(h + 1, 17))
        };
        let q = mobius_invert::<BigRational>(n, 2, table).unwrap();
        for (menus, alts) in product_cells(n, 2) {
            assert_eq!(q.forward_sum(&menus, &alts), table(&menus, &alts).unwrap());
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(OrderDistribution::new(vec![rat(1, 2), rat(1, 2)]).is_ok());
        assert!(OrderDistribution::new(vec![rat(1, 2), rat(1, 3)]).is_err());
        assert!(OrderDistribution::new(vec![rat(3, 2), rat(-1, 2)]).is_err());
        let u = OrderDistribution::<f64>::uniform(4);
        assert!(u.weights().iter().sum::<f64>().eq_tol(&1.0, 1e-12));
    }
}
