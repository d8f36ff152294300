//! Command-line front end for the consumption-dependent choice toolkit.
//!
//! Exit codes: 0 success, 1 model-rejection verdict, 2 input validation
//! error, 3 internal invariant breach.

mod io;

use clap::{Parser, Subcommand, ValueEnum};
use io::{CliError, CliResult};
use num_rational::BigRational;
use num_traits::Zero;
use serde_json::{json, Value};
use std::sync::Arc;

use cdru_core::behaviors::{
    self, cravings_transition, example_kernel, habit_logit_chain, habit_logit_rcr, ExampleClass,
};
use cdru_core::dynamics::{simulate_choice_frequencies, time_average_rcr};
use cdru_core::hypotest::{test_extreme_points, test_mobius_system, FlowRows};
use cdru_core::invariance::{
    invariance_report, is_jointly_menu_invariant, is_menu_invariant_direct,
    joint_no_investment_test, no_investment_test, InvarianceWitness, InvestmentCertificate,
};
use cdru_core::jointchoice::{
    check_choice_set_independence, check_complete_monotonicity, check_marginality, decompose,
    verify_representation,
};
use cdru_core::lattice::{Menu, OrderSpace};
use cdru_core::num::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "cdru",
    about = "Menu-indexed preference dynamics: invariance tests, joint-choice axioms, representation recovery, and consistency tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Rational,
    Float,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Extreme,
    Mobius,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Flow {
    Full,
    Limited,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    TwoPreferenceInvariant,
    DeterministicSwitching,
    Craving,
    HabitLogit,
}

#[derive(Subcommand)]
enum Command {
    /// Menu-invariance analysis of a transition function (plus the joint
    /// variant when an arrival function is supplied).
    Invariance {
        #[arg(long)]
        input: String,
        #[arg(long)]
        arrival: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Rational)]
        mode: Mode,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<String>,
    },
    /// Axiom checks (complete monotonicity, marginality, choice-set
    /// independence) on a joint choice rule.
    Axioms {
        #[arg(long)]
        input: String,
        /// Treat the input as first-period + conditional choice data.
        #[arg(long, default_value_t = false)]
        conditional: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<String>,
    },
    /// Recovers a first-period distribution and history kernels from a
    /// full-domain joint choice rule.
    Decompose {
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = false)]
        state_independent: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<String>,
    },
    /// Consistency tests for (possibly partially observed) two-period data.
    Hypotest {
        #[arg(long)]
        input: String,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[arg(long, value_enum, default_value_t = Flow::Limited)]
        flow: Flow,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<String>,
    },
    /// Simulates a model and compares empirical choice frequencies with
    /// the analytic stationary ones.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
        /// Parameter file for the craving and habit-logit models.
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Menu as comma-separated labels; defaults to every menu.
        #[arg(long)]
        menu: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<String>,
    },
    /// Prints the extreme-point and Möbius-system row counts.
    MatrixSizes {
        #[arg(long, default_value_t = 2)]
        min: u64,
        #[arg(long, default_value_t = 7)]
        max: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}

fn emit(report: &Value, format: Format, out: Option<&str>) -> CliResult<()> {
    let body = match format {
        Format::Json => serde_json::to_string_pretty(report).expect("serializable"),
        Format::Text => render_text(report, 0),
    };
    match out {
        Some(path) => std::fs::write(path, body + "\n")
            .map_err(|e| CliError::validation(format!("cannot write {path}: {e}"))),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

/// Plain-text mirror of the JSON report.
fn render_text(v: &Value, indent: usize) -> String {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => map
            .iter()
            .map(|(k, val)| match val {
                Value::Object(_) | Value::Array(_) => {
                    format!("{pad}{k}:\n{}", render_text(val, indent + 1))
                }
                _ => format!("{pad}{k}: {val}"),
            })
            .collect::<Vec<_>>()
            .join("\n"),
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::Object(_) | Value::Array(_) => render_text(item, indent),
                _ => format!("{pad}- {item}"),
            })
            .collect::<Vec<_>>()
            .join("\n"),
        other => format!("{pad}{other}"),
    }
}

fn rational_str(r: &BigRational) -> String {
    r.to_string()
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Invariance {
            input,
            arrival,
            mode,
            tol,
            format,
            out,
        } => cmd_invariance(
            &input,
            arrival.as_deref(),
            mode,
            tol,
            format,
            out.as_deref(),
        ),
        Command::Axioms {
            input,
            conditional,
            format,
            out,
        } => cmd_axioms(&input, conditional, format, out.as_deref()),
        Command::Decompose {
            input,
            state_independent,
            format,
            out,
        } => cmd_decompose(&input, state_independent, format, out.as_deref()),
        Command::Hypotest {
            input,
            method,
            flow,
            format,
            out,
        } => cmd_hypotest(&input, method, flow, format, out.as_deref()),
        Command::Simulate {
            model,
            input,
            length,
            seed,
            menu,
            format,
            out,
        } => cmd_simulate(
            model,
            input.as_deref(),
            length,
            seed,
            menu.as_deref(),
            format,
            out.as_deref(),
        ),
        Command::MatrixSizes {
            min,
            max,
            format,
            out,
        } => cmd_matrix_sizes(min, max, format, out.as_deref()),
    }
}

fn cmd_invariance(
    input: &str,
    arrival: Option<&str>,
    mode: Mode,
    tol: f64,
    format: Format,
    out: Option<&str>,
) -> CliResult<i32> {
    if tol <= 0.0 {
        return Err(CliError::validation("tolerance must be positive"));
    }
    let doc = io::load_json(input)?;
    let (alts, t) = match io::kind_of(&doc)? {
        "transition" => io::parse_transition(&doc)?,
        "craving" => {
            let (alts, spec) = io::parse_craving(&doc)?;
            let space = Arc::new(OrderSpace::new(alts.n()));
            let t = cravings_transition(&spec, space)?;
            (alts, t)
        }
        other => {
            return Err(CliError::validation(format!(
                "invariance expects a `transition` or `craving` input, got {other:?}"
            )))
        }
    };
    let space = Arc::clone(t.space());

    let direct = is_menu_invariant_direct(&t)?;
    let report = invariance_report(&t, None)?;
    let certificate = no_investment_test(&t)?;

    if direct.invariant != report.menu_invariant || direct.invariant != certificate.is_invariant() {
        return Err(CliError::internal("invariance deciders disagree"));
    }

    let witness_json = match &direct.witness {
        InvarianceWitness::CommonDistribution(nu) => json!({
            "type": "common_distribution",
            "weights": dist_json(&alts, &space, nu.weights()),
        }),
        InvarianceWitness::MismatchedPair { reference, other } => json!({
            "type": "mismatched_pair",
            "reference": io::menu_labels(&alts, *reference),
            "other": io::menu_labels(&alts, *other),
        }),
        InvarianceWitness::NoCommonInvariant => json!({"type": "no_common_invariant"}),
    };
    let certificate_json = match &certificate {
        InvestmentCertificate::Invariant {
            distribution,
            strictly_positive,
        } => json!({
            "branch": "invariant",
            "strictly_positive": strictly_positive,
            "distribution": dist_json(&alts, &space, distribution.weights()),
        }),
        InvestmentCertificate::Plan(plan) => {
            let mut entries = Vec::new();
            for (mi, &menu) in plan.menus.iter().enumerate() {
                for o in 0..plan.order_count() {
                    let amount = plan.amount(mi, o);
                    if !amount.is_zero() {
                        entries.push(json!({
                            "menu": io::menu_labels(&alts, menu),
                            "order": io::order_labels(&alts, &space, o),
                            "amount": rational_str(amount),
                        }));
                    }
                }
            }
            json!({"branch": "plan", "entries": entries})
        }
    };
    let mut body = json!({
        "input": input,
        "mode": match mode { Mode::Rational => "rational", Mode::Float => "float" },
        "tolerance": tol,
        "menu_invariant": direct.invariant,
        "direct": {"invariant": direct.invariant, "witness": witness_json},
        "local": {
            "locally_invariant": report.locally_invariant,
            "reference_menu": io::menu_labels(&alts, report.reference_menu),
            "max_residual": report.max_residual,
        },
        "no_investment": certificate_json,
        "agreement": true,
    });
    let mut rejected = !direct.invariant;
    if let Some(path) = arrival {
        let sdoc = io::load_json(path)?;
        if io::kind_of(&sdoc)? != "arrival" {
            return Err(CliError::validation(
                "arrival input must have kind `arrival`",
            ));
        }
        let (salts, s) = io::parse_arrival(&sdoc)?;
        if salts.labels() != alts.labels() {
            return Err(CliError::validation(
                "arrival and transition inputs must share labels",
            ));
        }
        let joint = match mode {
            Mode::Rational => {
                let j = is_jointly_menu_invariant(&t, &s)?;
                (j.invariant, j.max_gap)
            }
            Mode::Float => {
                let j = is_jointly_menu_invariant(&t.map_approx(), &s.map_approx())?;
                (j.max_gap <= tol, j.max_gap)
            }
        };
        let joint_cert = joint_no_investment_test(&t, &s)?;
        if joint.0 != joint_cert.is_invariant() {
            return Err(CliError::internal("joint invariance deciders disagree"));
        }
        body["joint"] = json!({
            "jointly_menu_invariant": joint.0,
            "max_product_gap": joint.1,
            "no_investment_branch": if joint_cert.is_invariant() { "invariant" } else { "plan" },
        });
        rejected = rejected || !joint.0;
    }
    emit(&body, format, out)?;
    Ok(if rejected { 1 } else { 0 })
}

fn dist_json(
    alts: &cdru_core::lattice::AlternativeSet,
    space: &Arc<OrderSpace>,
    weights: &[BigRational],
) -> Value {
    let mut entries = Vec::new();
    for (id, w) in weights.iter().enumerate() {
        if !w.is_zero() {
            entries.push(json!({
                "order": io::order_labels(alts, space, id),
                "prob": rational_str(w),
            }));
        }
    }
    Value::Array(entries)
}

fn load_rule(
    input: &str,
    conditional: bool,
) -> CliResult<(
    cdru_core::lattice::AlternativeSet,
    cdru_core::jointchoice::RandomJointChoiceRule<BigRational>,
    bool,
)> {
    let doc = io::load_json(input)?;
    let kind = io::kind_of(&doc)?;
    match kind {
        "conditional_rule" => {
            let (alts, rule) = io::parse_conditional(&doc)?;
            Ok((alts, rule, true))
        }
        "joint_rule" if conditional => Err(CliError::validation(
            "--conditional expects a `conditional_rule` input",
        )),
        "joint_rule" => {
            let (alts, rule) = io::parse_joint_rule(&doc)?;
            Ok((alts, rule, false))
        }
        other => Err(CliError::validation(format!(
            "expected a joint_rule or conditional_rule input, got {other:?}"
        ))),
    }
}

fn cmd_axioms(input: &str, conditional: bool, format: Format, out: Option<&str>) -> CliResult<i32> {
    let (alts, rule, from_conditional) = load_rule(input, conditional)?;
    let cm = check_complete_monotonicity(&rule)?;
    let marginality = check_marginality(&rule)?;
    let csi = check_choice_set_independence(&rule)?;
    let cm_json = json!({
        "holds": cm.holds(),
        "checked_cells": cm.checked_cells,
        "violations": cm.violations.iter().take(50).map(|v| json!({
            "menus": v.menus.iter().map(|&m| io::menu_labels(&alts, m)).collect::<Vec<_>>(),
            "alts": v.alts.iter().map(|a| alts.label(*a)).collect::<Vec<_>>(),
            "value": rational_str(&v.value),
        })).collect::<Vec<_>>(),
        "increasing_differences_violations": cm.increasing_differences.len(),
    });
    let marg_json = json!({
        "holds": marginality.holds(),
        "violations": marginality.violations.len(),
        "mobius_form_checked": marginality.mobius_checked,
        "skipped_as_automatic": from_conditional,
    });
    let csi_json = json!({
        "holds": csi.holds(),
        "violations": csi.violations.iter().take(50).map(|v| json!({
            "history": v.history_alts.iter().map(|a| alts.label(*a)).collect::<Vec<_>>(),
            "menus_a": v.menus_a.iter().map(|&m| io::menu_labels(&alts, m)).collect::<Vec<_>>(),
            "menus_b": v.menus_b.iter().map(|&m| io::menu_labels(&alts, m)).collect::<Vec<_>>(),
            "next": alts.label(v.next_alt),
            "gap": v.gap.approx(),
        })).collect::<Vec<_>>(),
    });
    let body = json!({
        "input": input,
        "complete_monotonicity": cm_json,
        "marginality": marg_json,
        "choice_set_independence": csi_json,
        "consumption_dependent_random_utility": cm.holds() && marginality.holds(),
        "state_independent_variant": cm.holds() && marginality.holds() && csi.holds(),
    });
    emit(&body, format, out)?;
    Ok(if cm.holds() && marginality.holds() && csi.holds() {
        0
    } else {
        1
    })
}

fn cmd_decompose(
    input: &str,
    state_independent: bool,
    format: Format,
    out: Option<&str>,
) -> CliResult<i32> {
    let (alts, rule, _) = load_rule(input, false)?;
    let rep = match decompose(&rule, state_independent) {
        Ok(rep) => rep,
        Err(cdru_core::Error::AxiomViolated(msg)) => {
            let body = json!({
                "input": input,
                "representable": false,
                "reason": msg,
            });
            emit(&body, format, out)?;
            return Ok(1);
        }
        Err(e) => return Err(e.into()),
    };
    let verified = verify_representation(&rep, &rule)?;
    if !verified {
        return Err(CliError::internal(
            "reconstruction failed after decomposition",
        ));
    }
    let space = Arc::new(OrderSpace::new(rule.n()));
    let kernels: Vec<Value> = rep
        .kernels
        .iter()
        .map(|((consumed, classes), dist)| {
            json!({
                "consumed": consumed.iter().map(|a| alts.label(*a)).collect::<Vec<_>>(),
                "classes": classes.iter().map(|&m| io::menu_labels(&alts, m)).collect::<Vec<_>>(),
                "distribution": dist_json(&alts, &space, dist.weights()),
            })
        })
        .collect();
    let body = json!({
        "input": input,
        "representable": true,
        "state_independent": rep.state_independent,
        "initial": dist_json(&alts, &space, rep.initial.weights()),
        "kernels": kernels,
        "reconstruction_verified": verified,
    });
    emit(&body, format, out)?;
    Ok(0)
}

fn cmd_hypotest(
    input: &str,
    method: Method,
    flow: Flow,
    format: Format,
    out: Option<&str>,
) -> CliResult<i32> {
    let (_alts, rule, _) = load_rule(input, false)?;
    let mut results = Vec::new();
    let mut verdicts = Vec::new();
    if method == Method::Extreme || method == Method::Both {
        let v = test_extreme_points(&rule)?;
        if !v.internally_consistent() {
            return Err(CliError::internal(
                "extreme-point LP and quadratic objective disagree",
            ));
        }
        verdicts.push(v.consistent);
        results.push(json!({
            "method": "extreme_points",
            "consistent": v.consistent,
            "objective": v.objective,
            "rows": v.rows,
            "cols": v.cols,
            "milliseconds": v.duration.as_millis() as u64,
            "certificate": certificate_json(&v.certificate),
        }));
    }
    if method == Method::Mobius || method == Method::Both {
        let flow_mode = match flow {
            Flow::Full => FlowRows::Full,
            Flow::Limited => FlowRows::Limited,
        };
        let v = test_mobius_system(&rule, flow_mode)?;
        if !v.internally_consistent() {
            return Err(CliError::internal(
                "Möbius LP and quadratic objective disagree",
            ));
        }
        verdicts.push(v.consistent);
        results.push(json!({
            "method": "mobius_system",
            "flow_rows": match flow { Flow::Full => "full", Flow::Limited => "limited" },
            "consistent": v.consistent,
            "objective": v.objective,
            "rows": v.rows,
            "cols": v.cols,
            "milliseconds": v.duration.as_millis() as u64,
            "certificate": certificate_json(&v.certificate),
        }));
    }
    let agree = verdicts.windows(2).all(|w| w[0] == w[1]);
    if !agree {
        return Err(CliError::internal("the two test formulations disagree"));
    }
    let consistent = verdicts.first().copied().unwrap_or(true);
    let body = json!({
        "input": input,
        "results": results,
        "consistent": consistent,
    });
    emit(&body, format, out)?;
    Ok(if consistent { 0 } else { 1 })
}

/// Nonzero certificate weights as (variable index, value) pairs.
fn certificate_json(cert: &Option<Vec<BigRational>>) -> Value {
    match cert {
        None => Value::Null,
        Some(weights) => Value::Array(
            weights
                .iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(|(i, w)| json!({"index": i, "weight": rational_str(w)}))
                .collect(),
        ),
    }
}

fn cmd_simulate(
    model: Model,
    input: Option<&str>,
    length: usize,
    seed: u64,
    menu_arg: Option<&str>,
    format: Format,
    out: Option<&str>,
) -> CliResult<i32> {
    if length == 0 {
        return Err(CliError::validation("length must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = match model {
        Model::TwoPreferenceInvariant | Model::DeterministicSwitching | Model::Craving => {
            let (alts, t) = match model {
                Model::TwoPreferenceInvariant => (
                    cdru_core::lattice::AlternativeSet::new(
                        ["x", "y", "z"].map(str::to_string).to_vec(),
                    )?,
                    example_kernel(
                        &ExampleClass::TwoPreferenceInvariant,
                        3,
                        seed,
                        &behaviors::default_strength(),
                    )?,
                ),
                Model::DeterministicSwitching => (
                    cdru_core::lattice::AlternativeSet::with_default_labels(3)?,
                    example_kernel(
                        &ExampleClass::DeterministicSwitching,
                        3,
                        seed,
                        &behaviors::default_strength(),
                    )?,
                ),
                Model::Craving => {
                    let path = input
                        .ok_or_else(|| CliError::validation("craving simulation needs --input"))?;
                    let doc = io::load_json(path)?;
                    if io::kind_of(&doc)? != "craving" {
                        return Err(CliError::validation("expected a `craving` input"));
                    }
                    let (alts, spec) = io::parse_craving(&doc)?;
                    let space = Arc::new(OrderSpace::new(alts.n()));
                    let t = cravings_transition(&spec, space)?;
                    (alts, t)
                }
                Model::HabitLogit => unreachable!(),
            };
            let analytic = time_average_rcr(&t)?;
            let menus = select_menus(&alts, menu_arg, alts.n())?;
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for menu in menus {
                let empirical = simulate_choice_frequencies(&t, menu, length, &mut rng)?;
                let mut gap: f64 = 0.0;
                let mut entries = Vec::new();
                for (a, freq) in &empirical {
                    let expected = analytic.prob(*a, menu).map(|v| v.approx()).unwrap_or(0.0);
                    gap = gap.max((freq - expected).abs());
                    entries.push(json!({
                        "alt": alts.label(*a),
                        "empirical": freq,
                        "analytic": expected,
                    }));
                }
                worst = worst.max(gap);
                rows.push(json!({
                    "menu": io::menu_labels(&alts, menu),
                    "frequencies": entries,
                    "max_gap": gap,
                }));
            }
            json!({
                "model": model_name(model),
                "length": length,
                "seed": seed,
                "menus": rows,
                "max_gap": worst,
            })
        }
        Model::HabitLogit => {
            let path = input
                .ok_or_else(|| CliError::validation("habit-logit simulation needs --input"))?;
            let doc = io::load_json(path)?;
            if io::kind_of(&doc)? != "habit_logit" {
                return Err(CliError::validation("expected a `habit_logit` input"));
            }
            let (alts, spec) = io::parse_habit_logit(&doc)?;
            let analytic = habit_logit_rcr(&spec)?;
            let menus = match menu_arg {
                Some(_) => select_menus(&alts, menu_arg, alts.n())?,
                None => spec.menus().into_iter().filter(|m| m.len() >= 2).collect(),
            };
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for menu in menus {
                if !menu.contains(spec.outside()) {
                    return Err(CliError::validation(
                        "habit-logit menus must contain the outside option",
                    ));
                }
                let chain = habit_logit_chain(&spec, menu)?;
                let members: Vec<_> = menu.iter().collect();
                let mut counts = vec![0u64; members.len()];
                let mut state = 0usize;
                use rand::Rng;
                for _ in 0..length {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut next = members.len() - 1;
                    for (j, _) in members.iter().enumerate() {
                        acc += chain[(state, j)];
                        if u < acc {
                            next = j;
                            break;
                        }
                    }
                    counts[next] += 1;
                    state = next;
                }
                let mut gap: f64 = 0.0;
                let mut entries = Vec::new();
                for (j, &a) in members.iter().enumerate() {
                    let freq = counts[j] as f64 / length as f64;
                    let expected = analytic.prob(a, menu).unwrap_or(0.0);
                    gap = gap.max((freq - expected).abs());
                    entries.push(json!({
                        "alt": alts.label(a),
                        "empirical": freq,
                        "analytic": expected,
                    }));
                }
                worst = worst.max(gap);
                rows.push(json!({
                    "menu": io::menu_labels(&alts, menu),
                    "frequencies": entries,
                    "max_gap": gap,
                }));
            }
            json!({
                "model": "habit-logit",
                "length": length,
                "seed": seed,
                "menus": rows,
                "max_gap": worst,
            })
        }
    };
    emit(&body, format, out)?;
    Ok(0)
}

fn model_name(model: Model) -> &'static str {
    match model {
        Model::TwoPreferenceInvariant => "two-preference-invariant",
        Model::DeterministicSwitching => "deterministic-switching",
        Model::Craving => "craving",
        Model::HabitLogit => "habit-logit",
    }
}

fn select_menus(
    alts: &cdru_core::lattice::AlternativeSet,
    menu_arg: Option<&str>,
    n: usize,
) -> CliResult<Vec<Menu>> {
    match menu_arg {
        None => Ok(cdru_core::lattice::menus_size2(n)),
        Some(spec) => {
            let mut menu = Menu::empty();
            for label in spec.split(',') {
                let alt = alts
                    .alt_by_label(label.trim())
                    .ok_or_else(|| CliError::validation(format!("unknown label {label:?}")))?;
                menu = menu.insert(alt);
            }
            if menu.is_empty() {
                return Err(CliError::validation("menu must be nonempty"));
            }
            Ok(vec![menu])
        }
    }
}

fn cmd_matrix_sizes(min: u64, max: u64, format: Format, out: Option<&str>) -> CliResult<i32> {
    if !(2..=7).contains(&min) || !(2..=7).contains(&max) || min > max {
        return Err(CliError::validation(
            "sizes must satisfy 2 <= min <= max <= 7",
        ));
    }
    let rows: Vec<Value> = (min..=max)
        .map(|n| {
            json!({
                "alternatives": n,
                "extreme_point_rows": cdru_core::hypotest::extreme_point_row_count(n),
                "mobius_system_rows": cdru_core::hypotest::mobius_system_row_count(n),
            })
        })
        .collect();
    let body = json!({"sizes": rows});
    emit(&body, format, out)?;
    Ok(0)
}
