//! JSON input schemas and parsing into core types.
//!
//! One self-describing document per input kind (`kind` field). Orders are
//! serialized as best-first label lists; probabilities are accepted as
//! `"num/den"` strings, decimal strings, or JSON numbers (snapped to a
//! rational with denominator at most 10^6).

use cdru_core::behaviors::{CravingSpec, HabitLogitSpec};
use cdru_core::dynamics::{ArrivalFunction, TransitionFunction};
use cdru_core::jointchoice::RandomJointChoiceRule;
use cdru_core::lattice::{
    Alt, AlternativeSet, LinearOrder, Menu, OrderDistribution, OrderSpace, RandomChoiceRule,
};
use cdru_core::num::{parse_probability, snap_to_rational};
use num_rational::BigRational;
use num_traits::Zero;
use serde_json::Value;
use std::collections::BTreeMap;
use std::sync::Arc;

pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 3,
        }
    }
}

impl From<cdru_core::Error> for CliError {
    fn from(e: cdru_core::Error) -> Self {
        match e {
            cdru_core::Error::Internal(_) => CliError::internal(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn load_json(path: &str) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {path}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{path} is not valid JSON: {e}")))
}

pub fn kind_of(doc: &Value) -> CliResult<&str> {
    doc.get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::validation("input needs a string `kind` field"))
}

fn prob_value(v: &Value) -> CliResult<BigRational> {
    match v {
        Value::String(s) => parse_probability(s).map_err(|e| CliError::validation(e.to_string())),
        Value::Number(num) => {
            let f = num
                .as_f64()
                .ok_or_else(|| CliError::validation("unrepresentable number"))?;
            snap_to_rational(f, 1_000_000).map_err(|e| CliError::validation(e.to_string()))
        }
        other => Err(CliError::validation(format!(
            "probability must be a string or number, got {other}"
        ))),
    }
}

pub fn labels_of(doc: &Value) -> CliResult<AlternativeSet> {
    let labels = doc
        .get("labels")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::validation("input needs a `labels` array"))?
        .iter()
        .map(|l| {
            l.as_str()
                .map(str::to_string)
                .ok_or_else(|| CliError::validation("labels must be strings"))
        })
        .collect::<CliResult<Vec<String>>>()?;
    AlternativeSet::new(labels).map_err(CliError::from)
}

fn order_of(alts: &AlternativeSet, v: &Value) -> CliResult<LinearOrder> {
    let names = v
        .as_array()
        .ok_or_else(|| CliError::validation("an order must be an array of labels"))?;
    let ranking = names
        .iter()
        .map(|name| {
            let label = name
                .as_str()
                .ok_or_else(|| CliError::validation("order entries must be labels"))?;
            alts.alt_by_label(label)
                .ok_or_else(|| CliError::validation(format!("unknown label {label:?}")))
        })
        .collect::<CliResult<Vec<Alt>>>()?;
    LinearOrder::new(ranking).map_err(CliError::from)
}

fn menu_of(alts: &AlternativeSet, v: &Value) -> CliResult<Menu> {
    let names = v
        .as_array()
        .ok_or_else(|| CliError::validation("a menu must be an array of labels"))?;
    let mut menu = Menu::empty();
    for name in names {
        let label = name
            .as_str()
            .ok_or_else(|| CliError::validation("menu entries must be labels"))?;
        let alt = alts
            .alt_by_label(label)
            .ok_or_else(|| CliError::validation(format!("unknown label {label:?}")))?;
        menu = menu.insert(alt);
    }
    if menu.is_empty() {
        return Err(CliError::validation("menus must be nonempty"));
    }
    Ok(menu)
}

/// Parses a transition-function document into a dense rational kernel.
pub fn parse_transition(
    doc: &Value,
) -> CliResult<(AlternativeSet, TransitionFunction<BigRational>)> {
    let alts = labels_of(doc)?;
    let n = alts.n();
    let space = Arc::new(OrderSpace::new(n));
    let entries = doc
        .get("kernel")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::validation("transition input needs a `kernel` array"))?;
    let mut table: BTreeMap<(Alt, usize), Vec<BigRational>> = BTreeMap::new();
    for entry in entries {
        let consumed_label = entry
            .get("consumed")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::validation("kernel entries need `consumed`"))?;
        let consumed = alts
            .alt_by_label(consumed_label)
            .ok_or_else(|| CliError::validation(format!("unknown label {consumed_label:?}")))?;
        let state = order_of(
            &alts,
            entry
                .get("state")
                .ok_or_else(|| CliError::validation("kernel entries need `state`"))?,
        )?;
        let state_id = space
            .id_of(&state)
            .ok_or_else(|| CliError::validation("state is not an order of the labels"))?;
        let mut weights = vec![BigRational::zero(); space.count()];
        let rows = entry
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::validation("kernel entries need `weights`"))?;
        for w in rows {
            let order = order_of(
                &alts,
                w.get("order")
                    .ok_or_else(|| CliError::validation("weights need `order`"))?,
            )?;
            let id = space
                .id_of(&order)
                .ok_or_else(|| CliError::validation("weight order is not a valid order"))?;
            let prob = prob_value(
                w.get("prob")
                    .ok_or_else(|| CliError::validation("weights need `prob`"))?,
            )?;
            weights[id] = prob;
        }
        table.insert((consumed, state_id), weights);
    }
    let t = TransitionFunction::build(Arc::clone(&space), |x, from| {
        let weights =
            table
                .get(&(x, from))
                .cloned()
                .ok_or(cdru_core::Error::MissingKernelEntry {
                    alt: x.index(),
                    order: from,
                })?;
        OrderDistribution::new(weights)
    })
    .map_err(CliError::from)?;
    Ok((alts, t))
}

pub fn parse_arrival(doc: &Value) -> CliResult<(AlternativeSet, ArrivalFunction<BigRational>)> {
    let alts = labels_of(doc)?;
    let n = alts.n();
    let menus = cdru_core::lattice::menus_size2(n);
    let entries = doc
        .get("kernel")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::validation("arrival input needs a `kernel` array"))?;
    let mut rows: BTreeMap<Menu, Vec<BigRational>> = BTreeMap::new();
    for entry in entries {
        let from = menu_of(
            &alts,
            entry
                .get("from")
                .ok_or_else(|| CliError::validation("arrival entries need `from`"))?,
        )?;
        let mut row = vec![BigRational::zero(); menus.len()];
        for w in entry
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::validation("arrival entries need `weights`"))?
        {
            let to = menu_of(
                &alts,
                w.get("menu")
                    .ok_or_else(|| CliError::validation("weights need `menu`"))?,
            )?;
            let idx = menus
                .iter()
                .position(|&m| m == to)
                .ok_or_else(|| CliError::validation("arrival menus need two members"))?;
            row[idx] = prob_value(
                w.get("prob")
                    .ok_or_else(|| CliError::validation("weights need `prob`"))?,
            )?;
        }
        rows.insert(from, row);
    }
    let row_vec = menus
        .iter()
        .map(|m| {
            rows.get(m).cloned().ok_or_else(|| {
                CliError::validation(format!("arrival kernel misses a row for {m:?}"))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let s = ArrivalFunction::from_rows(n, row_vec).map_err(CliError::from)?;
    Ok((alts, s))
}

pub fn parse_craving(doc: &Value) -> CliResult<(AlternativeSet, CravingSpec<BigRational>)> {
    let alts = labels_of(doc)?;
    let n = alts.n();
    let base = order_of(
        &alts,
        doc.get("base")
            .ok_or_else(|| CliError::validation("craving input needs `base`"))?,
    )?;
    let weights_obj = doc
        .get("craving_weights")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::validation("craving input needs `craving_weights`"))?;
    let mut weights = vec![BigRational::zero(); n];
    for (label, v) in weights_obj {
        let alt = alts
            .alt_by_label(label)
            .ok_or_else(|| CliError::validation(format!("unknown label {label:?}")))?;
        weights[alt.index()] = prob_value(v)?;
    }
    let mut persistence = vec![vec![BigRational::zero(); n]; n];
    for entry in doc
        .get("persistence")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::validation("craving input needs `persistence`"))?
    {
        let consumed = entry
            .get("consumed")
            .and_then(Value::as_str)
            .and_then(|l| alts.alt_by_label(l))
            .ok_or_else(|| CliError::validation("persistence entries need `consumed`"))?;
        let craved = entry
            .get("craved")
            .and_then(Value::as_str)
            .and_then(|l| alts.alt_by_label(l))
            .ok_or_else(|| CliError::validation("persistence entries need `craved`"))?;
        persistence[consumed.index()][craved.index()] = prob_value(
            entry
                .get("prob")
                .ok_or_else(|| CliError::validation("persistence entries need `prob`"))?,
        )?;
    }
    let spec = CravingSpec::new(base, weights, persistence).map_err(CliError::from)?;
    Ok((alts, spec))
}

pub fn parse_habit_logit(doc: &Value) -> CliResult<(AlternativeSet, HabitLogitSpec)> {
    let alts = labels_of(doc)?;
    let n = alts.n();
    let outside = doc
        .get("outside")
        .and_then(Value::as_str)
        .and_then(|l| alts.alt_by_label(l))
        .ok_or_else(|| CliError::validation("habit logit input needs `outside`"))?;
    let mut utilities = vec![0.0f64; n];
    let mut boosts = vec![0.0f64; n];
    let read_map = |field: &str, target: &mut Vec<f64>| -> CliResult<()> {
        if let Some(map) = doc.get(field).and_then(Value::as_object) {
            for (label, v) in map {
                let alt = alts
                    .alt_by_label(label)
                    .ok_or_else(|| CliError::validation(format!("unknown label {label:?}")))?;
                target[alt.index()] = v
                    .as_f64()
                    .ok_or_else(|| CliError::validation(format!("{field} must be numbers")))?;
            }
        }
        Ok(())
    };
    read_map("utilities", &mut utilities)?;
    read_map("boosts", &mut boosts)?;
    let spec = HabitLogitSpec::new(utilities, boosts, outside).map_err(CliError::from)?;
    Ok((alts, spec))
}

pub fn parse_joint_rule(
    doc: &Value,
) -> CliResult<(AlternativeSet, RandomJointChoiceRule<BigRational>)> {
    let alts = labels_of(doc)?;
    let periods = doc
        .get("periods")
        .and_then(Value::as_u64)
        .ok_or_else(|| CliError::validation("joint rule input needs `periods`"))?
        as usize;
    let mut cells = BTreeMap::new();
    for cell in doc
        .get("cells")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::validation("joint rule input needs `cells`"))?
    {
        let menus = cell
            .get("menus")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::validation("cells need `menus`"))?
            .iter()
            .map(|m| menu_of(&alts, m))
            .collect::<CliResult<Vec<Menu>>>()?;
        let alts_vec = cell
            .get("alts")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::validation("cells need `alts`"))?
            .iter()
            .map(|a| {
                a.as_str()
                    .and_then(|l| alts.alt_by_label(l))
                    .ok_or_else(|| CliError::validation("cell alts must be labels"))
            })
            .collect::<CliResult<Vec<Alt>>>()?;
        let prob = prob_value(
            cell.get("prob")
                .ok_or_else(|| CliError::validation("cells need `prob`"))?,
        )?;
        cells.insert((menus, alts_vec), prob);
    }
    let rule =
        RandomJointChoiceRule::from_cells(alts.n(), periods, cells).map_err(CliError::from)?;
    Ok((alts, rule))
}

/// A first-period rule plus consumption-indexed conditionals, merged into a
/// two-period joint rule.
pub fn parse_conditional(
    doc: &Value,
) -> CliResult<(AlternativeSet, RandomJointChoiceRule<BigRational>)> {
    let alts = labels_of(doc)?;
    let first = parse_choice_rows(
        &alts,
        doc.get("first_period")
            .ok_or_else(|| CliError::validation("conditional input needs `first_period`"))?,
    )?;
    let cond_obj = doc
        .get("conditional")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::validation("conditional input needs `conditional`"))?;
    let mut cond = BTreeMap::new();
    for (label, rows) in cond_obj {
        let alt = alts
            .alt_by_label(label)
            .ok_or_else(|| CliError::validation(format!("unknown label {label:?}")))?;
        cond.insert(alt, parse_choice_rows(&alts, rows)?);
    }
    let rule = RandomJointChoiceRule::from_conditional(&first, &cond).map_err(CliError::from)?;
    Ok((alts, rule))
}

fn parse_choice_rows(alts: &AlternativeSet, v: &Value) -> CliResult<RandomChoiceRule<BigRational>> {
    let mut rule = RandomChoiceRule::new(alts.n());
    let mut by_menu: BTreeMap<Menu, BTreeMap<Alt, BigRational>> = BTreeMap::new();
    for cell in v
        .as_array()
        .ok_or_else(|| CliError::validation("choice rows must be an array"))?
    {
        let menu = menu_of(
            alts,
            cell.get("menu")
                .ok_or_else(|| CliError::validation("cells need `menu`"))?,
        )?;
        let alt = cell
            .get("alt")
            .and_then(Value::as_str)
            .and_then(|l| alts.alt_by_label(l))
            .ok_or_else(|| CliError::validation("cells need `alt`"))?;
        let prob = prob_value(
            cell.get("prob")
                .ok_or_else(|| CliError::validation("cells need `prob`"))?,
        )?;
        by_menu.entry(menu).or_default().insert(alt, prob);
    }
    for (menu, row) in by_menu {
        rule.insert_row(menu, row).map_err(CliError::from)?;
    }
    Ok(rule)
}

/// Formats a menu as its sorted label list.
pub fn menu_labels(alts: &AlternativeSet, menu: Menu) -> Vec<String> {
    menu.iter().map(|a| alts.label(a).to_string()).collect()
}

/// Formats an order id as its best-first label list.
pub fn order_labels(alts: &AlternativeSet, space: &OrderSpace, id: usize) -> Vec<String> {
    space
        .order(id)
        .ranking()
        .iter()
        .map(|a| alts.label(*a).to_string())
        .collect()
}
