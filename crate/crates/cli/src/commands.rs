//! Subcommand implementations; each returns the rendered output and whether
//! its checks passed.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context as _, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

use infomech::fixtures::{self, FixtureReport};
use infomech::geometry::grid_refinement;
use infomech::mechanisms::{
    full_surplus_contract, make_strict, reduce_support_over, revenue_report_with,
    solve_pricing_mappings, solve_pricing_outcomes, solve_sealed_envelope, Solved,
};
use infomech::protocol::{to_pricing_mappings, to_pricing_outcomes, to_revelation};
use infomech::{
    best_response, evaluate, gap_experiment, interesting_posteriors, verify_menu, BuyerStrategy,
    Context, Correlation, Decision, Menu, MenuReport, Mode, PosteriorSet, ProtocolTree,
};

use crate::render::{emit_report, Format};
use crate::{Mechanism, ModeArg, Target};

pub struct Options {
    pub format: Format,
    pub tolerance: f64,
    pub grid: Option<usize>,
    pub qstar_dump: bool,
    pub lp_dump: Option<PathBuf>,
}

pub struct Output {
    pub text: String,
    pub checks_passed: bool,
}

const FIXTURE_PREFIX: &str = "fixture:";

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {path}"))
}

fn fixture_case(name: &str) -> Result<fixtures::FixtureCase> {
    fixtures::cases()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| {
            anyhow!(infomech::Error::InvalidInput(format!(
                "no fixture named {name}"
            )))
        })
}

pub fn load_context(arg: &str) -> Result<Context> {
    if let Some(name) = arg.strip_prefix(FIXTURE_PREFIX) {
        return Ok(fixture_case(name)?.context);
    }
    Ok(Context::from_json(&read(arg)?)?)
}

fn load_tree(arg: &str, ctx: &Context) -> Result<ProtocolTree> {
    if let Some(name) = arg.strip_prefix(FIXTURE_PREFIX) {
        return fixture_case(name)?.protocol.ok_or_else(|| {
            anyhow!(infomech::Error::InvalidInput(format!(
                "fixture {name} has no protocol"
            )))
        });
    }
    Ok(ProtocolTree::from_json(&read(arg)?, ctx.state_labels())?)
}

fn load_direction(arg: &str, ctx: &Context) -> Result<Vec<Vec<f64>>> {
    if let Some(name) = arg.strip_prefix(FIXTURE_PREFIX) {
        return match name {
            "iid-gap" => Ok(fixtures::iid_gap_direction(ctx.n_types())),
            _ => bail!(infomech::Error::InvalidInput(format!(
                "no direction named {name}"
            ))),
        };
    }
    serde_json::from_str(&read(arg)?)
        .map_err(|e| anyhow!(infomech::Error::InvalidInput(format!("direction: {e}"))))
}

fn correlation(ctx: &Context) -> Correlation {
    if ctx.is_independent(1e-12) {
        Correlation::Independent
    } else {
        Correlation::Correlated
    }
}

fn candidates(opts: &Options, ctx: &Context) -> Result<PosteriorSet> {
    let q = interesting_posteriors(ctx, correlation(ctx))?;
    Ok(match opts.grid {
        Some(k) => grid_refinement(&q, k)?,
        None => q,
    })
}

fn verify(opts: &Options, ctx: &Context, menu: &Menu, slack: f64) -> MenuReport {
    verify_menu(ctx, menu, slack - opts.tolerance)
}

fn write_lp_dump(
    opts: &Options,
    solved: Option<&Solved>,
    diagnostics: &mut Vec<String>,
) -> Result<()> {
    let Some(path) = &opts.lp_dump else {
        return Ok(());
    };
    match solved {
        Some(s) => {
            fs::write(path, s.lp.dump()).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            diagnostics.push("this mechanism solves no linear program; nothing dumped".into());
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveReport {
    mechanism: &'static str,
    revenue: f64,
    menu: Menu,
    verification: MenuReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    payments: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<f64>,
    diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    posteriors: Option<PosteriorSet>,
}

pub fn solve(
    opts: &Options,
    mechanism: Mechanism,
    context: &str,
    epsilon: Option<f64>,
    reduce: bool,
) -> Result<Output> {
    let ctx = load_context(context)?;
    let mut diagnostics = Vec::new();
    let mut payments = None;
    let mut condition = None;
    let mut posteriors = None;
    let (name, mut menu) = match mechanism {
        Mechanism::Envelope => ("envelope", solve_sealed_envelope(&ctx).menu),
        Mechanism::FullSurplus => {
            let fs = full_surplus_contract(&ctx)?;
            diagnostics.extend(fs.warning.clone());
            payments = Some(fs.payments);
            condition = Some(fs.condition);
            ("full-surplus", fs.menu)
        }
        Mechanism::Mappings | Mechanism::Outcomes | Mechanism::OutcomesNpt => {
            let q = candidates(opts, &ctx)?;
            let solved = match mechanism {
                Mechanism::Mappings => solve_pricing_mappings(&ctx, &q)?,
                Mechanism::Outcomes => solve_pricing_outcomes(&ctx, &q, false)?,
                _ => solve_pricing_outcomes(&ctx, &q, true)?,
            };
            write_lp_dump(opts, Some(&solved), &mut diagnostics)?;
            if solved.rounds > 0 {
                diagnostics.push(format!("column generation took {} rounds", solved.rounds));
            }
            let mut menu = solved.menu;
            if reduce && mechanism == Mechanism::Mappings {
                menu = reduce_support_over(&ctx, &menu, &q)?;
            } else if reduce {
                diagnostics.push("support reduction applies to fixed-price menus only".into());
            }
            if opts.qstar_dump {
                posteriors = Some(q);
            }
            let name = match mechanism {
                Mechanism::Mappings => "mappings",
                Mechanism::Outcomes => "outcomes",
                _ => "outcomes-npt",
            };
            (name, menu)
        }
    };
    if !matches!(
        mechanism,
        Mechanism::Mappings | Mechanism::Outcomes | Mechanism::OutcomesNpt
    ) {
        write_lp_dump(opts, None, &mut diagnostics)?;
        if reduce {
            diagnostics.push("support reduction applies to fixed-price menus only".into());
        }
        if opts.qstar_dump {
            posteriors = Some(candidates(opts, &ctx)?);
        }
    }
    let slack = match epsilon {
        Some(eps) => {
            menu = make_strict(&ctx, &menu, eps)?;
            eps
        }
        None => 0.0,
    };
    let verification = verify(opts, &ctx, &menu, slack);
    let passed = verification.valid;
    let report = SolveReport {
        mechanism: name,
        revenue: menu.revenue(&ctx),
        menu,
        verification,
        payments,
        condition,
        diagnostics,
        posteriors,
    };
    let headline = format!(
        "{name} revenue {}",
        infomech::mechanisms::fmt_sig(report.revenue)
    );
    Ok(Output {
        text: emit_report(&report, opts.format, Some(&headline)),
        checks_passed: passed,
    })
}

pub fn report(opts: &Options, context: &str) -> Result<Output> {
    let ctx = load_context(context)?;
    let q = candidates(opts, &ctx)?;
    let rep = revenue_report_with(&ctx, &q)?;
    let mut diagnostics = Vec::new();
    write_lp_dump(opts, None, &mut diagnostics)?;
    let mut v = serde_json::to_value(&rep)?;
    let obj = v.as_object_mut().expect("report is an object");
    let mut payments = Map::new();
    let mut valid = true;
    for (key, menu) in [
        ("envelope", &rep.envelope_menu),
        ("mappings", &rep.mappings_menu),
        ("nonnegative", &rep.nonnegative_menu),
        ("outcomes", &rep.outcomes_menu),
    ] {
        let check = verify(opts, &ctx, menu, 0.0);
        valid &= check.valid;
        payments.insert(key.into(), serde_json::to_value(&check.types)?);
    }
    obj.insert("type_payments".into(), Value::Object(payments));
    if opts.lp_dump.is_some() {
        obj.insert(
            "diagnostics".into(),
            json!(rep
                .diagnostics
                .iter()
                .cloned()
                .chain(diagnostics)
                .collect::<Vec<_>>()),
        );
    }
    if opts.qstar_dump {
        obj.insert("posterior_set".into(), serde_json::to_value(&q)?);
    }
    Ok(Output {
        text: emit_report(&v, opts.format, Some(&rep.summary_line())),
        checks_passed: valid && rep.ordering_holds,
    })
}

fn decisions_json(tree: &ProtocolTree, s: &BuyerStrategy) -> Value {
    let mut map = Map::new();
    for (&node, d) in &s.decisions {
        let key = tree
            .node(node)
            .name
            .clone()
            .unwrap_or_else(|| node.to_string());
        let v = match d {
            Decision::Child(k) => json!({ "child": k }),
            Decision::Pay => json!("pay"),
            Decision::Defect => json!("defect"),
        };
        map.insert(key, v);
    }
    Value::Object(map)
}

fn mode_of(m: ModeArg) -> Mode {
    match m {
        ModeArg::Committed => Mode::Committed,
        ModeArg::Uncommitted => Mode::Uncommitted,
    }
}

pub fn eval_protocol(opts: &Options, context: &str, tree: &str, mode: ModeArg) -> Result<Output> {
    let ctx = load_context(context)?;
    let tree = load_tree(tree, &ctx)?;
    let mode = mode_of(mode);
    let responses: Vec<_> = (0..ctx.n_types())
        .map(|t| best_response(&ctx, &tree, t, mode))
        .collect();
    let strategies: Vec<BuyerStrategy> = responses.iter().map(|r| r.strategy.clone()).collect();
    let ev = evaluate(&ctx, &tree, &strategies)?;
    let types: Vec<Value> = responses
        .iter()
        .enumerate()
        .map(|(t, r)| {
            json!({
                "theta": ctx.type_labels()[t],
                "utility": r.utility,
                "buyer_payment": r.expected_transfer,
                "observer_payment": ctx.type_mass(t) * r.expected_transfer,
                "decisions": decisions_json(&tree, &r.strategy),
            })
        })
        .collect();
    let out = json!({
        "mode": mode,
        "revenue": ev.revenue,
        "types": types,
        "evaluation": ev,
    });
    let headline = format!("revenue {}", infomech::mechanisms::fmt_sig(ev.revenue));
    Ok(Output {
        text: emit_report(&out, opts.format, Some(&headline)),
        checks_passed: true,
    })
}

pub fn transform(opts: &Options, to: Target, context: &str, tree: &str) -> Result<Output> {
    let ctx = load_context(context)?;
    let tree = load_tree(tree, &ctx)?;
    let strategies: Vec<BuyerStrategy> = (0..ctx.n_types())
        .map(|t| best_response(&ctx, &tree, t, Mode::Committed).strategy)
        .collect();
    let (out, passed) = match to {
        Target::Revelation => {
            let rev = to_revelation(&ctx, &tree, &strategies)?;
            (json!({ "tree": rev.to_value() }), true)
        }
        Target::Mappings | Target::Outcomes => {
            let menu = if to == Target::Mappings {
                to_pricing_mappings(&ctx, &tree, &strategies)?
            } else {
                to_pricing_outcomes(&ctx, &tree, &strategies)?
            };
            let verification = verify(opts, &ctx, &menu, 0.0);
            let passed = verification.valid;
            (
                json!({
                    "revenue": menu.revenue(&ctx),
                    "menu": menu,
                    "verification": verification,
                }),
                passed,
            )
        }
    };
    Ok(Output {
        text: emit_report(&out, opts.format, None),
        checks_passed: passed,
    })
}

fn fixture_text(rep: &FixtureReport) -> String {
    let mut lines: Vec<String> = rep
        .results
        .iter()
        .map(|r| {
            let actual = r.actual.map_or_else(
                || r.error.clone().unwrap_or_default(),
                infomech::mechanisms::fmt_sig,
            );
            format!(
                "{} {}/{} [{}] actual={actual} delta={}",
                if r.passed { "PASS" } else { "FAIL" },
                r.fixture,
                r.check,
                serde_json::to_value(r.source)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                r.delta.map_or("-".into(), infomech::mechanisms::fmt_sig),
            )
        })
        .collect();
    lines.push(format!("{} passed, {} failed", rep.passed, rep.failed));
    lines.join("\n")
}

pub fn fixtures(opts: &Options, filter: Option<&str>) -> Result<Output> {
    let rep = fixtures::run_fixtures(filter)?;
    if rep.results.is_empty() {
        bail!(infomech::Error::InvalidInput(format!(
            "no fixture matches {}",
            filter.unwrap_or("")
        )));
    }
    let text = match opts.format {
        Format::Json => emit_report(&rep, Format::Json, None),
        Format::Text => fixture_text(&rep),
    };
    Ok(Output {
        text,
        checks_passed: rep.all_passed(),
    })
}

pub fn gap(opts: &Options, context: &str, direction: &str, ts: &[f64]) -> Result<Output> {
    let ctx = load_context(context)?;
    let eta = load_direction(direction, &ctx)?;
    let rows = gap_experiment(&ctx, &eta, ts)?;
    let text = match opts.format {
        Format::Json => emit_report(&rows, Format::Json, None),
        Format::Text => {
            let f = infomech::mechanisms::fmt_sig;
            std::iter::once("t R Rc Rp Re full_surplus".to_string())
                .chain(rows.iter().map(|r| {
                    format!(
                        "{} {} {} {} {} {}",
                        f(r.t),
                        f(r.r),
                        f(r.rc),
                        f(r.rp),
                        f(r.re),
                        f(r.full_surplus)
                    )
                }))
                .collect::<Vec<_>>()
                .join("\n")
        }
    };
    Ok(Output {
        text,
        checks_passed: true,
    })
}
