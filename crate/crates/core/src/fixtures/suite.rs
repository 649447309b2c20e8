//! Embedded fixture cases with expected values, run as one report.

use serde::Serialize;

use super::*;
use crate::context::validate_context;
use crate::error::Result;
use crate::gap::gap_experiment;
use crate::geometry::{interesting_posteriors, Correlation};
use crate::lp::{self, build_dual};
use crate::mechanisms::{
    build_program, full_surplus_contract, make_strict, reduce_support_over, revenue_report,
    solve_pricing_mappings, solve_sealed_envelope, verify_menu, ConstraintKind, Contract, Menu,
    MenuKind, Program, Signal,
};
use crate::protocol::{
    best_response, evaluate, menu_to_protocol, BuyerStrategy, Decision, Mode, NodeKind,
    ProtocolTree,
};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Printed in the source material.
    Paper,
    /// Computed independently of the code under test.
    Derived,
    /// Follows from the definitions.
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expect {
    Equal { value: f64, tol: f64 },
    AtLeast { bound: f64 },
    AtMost { bound: f64 },
}

impl Expect {
    fn holds(&self, x: f64) -> bool {
        match *self {
            Expect::Equal { value, tol } => (x - value).abs() <= tol,
            Expect::AtLeast { bound } => x >= bound,
            Expect::AtMost { bound } => x <= bound,
        }
    }

    fn delta(&self, x: f64) -> f64 {
        match *self {
            Expect::Equal { value, .. } => x - value,
            Expect::AtLeast { bound } | Expect::AtMost { bound } => x - bound,
        }
    }
}

type Measure = Box<dyn Fn() -> Result<f64> + Send + Sync>;

pub struct Check {
    pub name: &'static str,
    pub source: Source,
    pub expect: Expect,
    measure: Measure,
}

pub struct FixtureCase {
    pub name: &'static str,
    pub context: Context,
    pub protocol: Option<ProtocolTree>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub fixture: &'static str,
    pub check: &'static str,
    pub source: Source,
    pub expect: Expect,
    pub actual: Option<f64>,
    pub delta: Option<f64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub passed: usize,
    pub failed: usize,
    pub results: Vec<CheckResult>,
}

impl FixtureReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn check(
    name: &'static str,
    source: Source,
    expect: Expect,
    measure: impl Fn() -> Result<f64> + Send + Sync + 'static,
) -> Check {
    Check {
        name,
        source,
        expect,
        measure: Box::new(measure),
    }
}

fn eq(value: f64, tol: f64) -> Expect {
    Expect::Equal { value, tol }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn lockbox_case() -> FixtureCase {
    let ctx = lockbox();
    let c = ctx.clone();
    let checks = vec![
        check("context-valid", Source::Paper, eq(0.0, 0.0), {
            let c = c.clone();
            move || Ok(validate_context(c.data()).len() as f64)
        }),
        check("surplus-type-1", Source::Paper, eq(1.2, 1e-9), {
            let c = c.clone();
            move || Ok(c.surplus(0))
        }),
        check("surplus-type-2", Source::Paper, eq(2.0, 1e-9), {
            let c = c.clone();
            move || Ok(c.surplus(1))
        }),
        check("interim-belief-type-1", Source::Paper, eq(0.6, 1e-12), {
            let c = c.clone();
            move || Ok(c.posterior_for_type(0, c.prior())?.0[1])
        }),
        check("full-surplus-payment-0", Source::Paper, eq(3.6, 1e-9), {
            let c = c.clone();
            move || Ok(full_surplus_contract(&c)?.payments[0])
        }),
        check("full-surplus-payment-1", Source::Paper, eq(-0.4, 1e-9), {
            let c = c.clone();
            move || Ok(full_surplus_contract(&c)?.payments[1])
        }),
        check("full-surplus-revenue", Source::Derived, eq(1.6, 1e-9), {
            let c = c.clone();
            move || Ok(full_surplus_contract(&c)?.revenue)
        }),
        check("participation-binding", Source::Paper, eq(0.0, 1e-9), {
            let c = c.clone();
            move || {
                let fs = full_surplus_contract(&c)?;
                let rep = verify_menu(&c, &fs.menu, 0.0);
                Ok(rep
                    .checks
                    .iter()
                    .filter(|k| k.kind == ConstraintKind::Participation)
                    .map(|k| k.margin.abs())
                    .fold(0.0, f64::max))
            }
        }),
        check(
            "strict-menu-slack",
            Source::Paper,
            Expect::AtLeast { bound: 1e-9 },
            {
                let c = c.clone();
                move || {
                    let fs = full_surplus_contract(&c)?;
                    let strict = make_strict(&c, &fs.menu, 0.01)?;
                    Ok(verify_menu(&c, &strict, 0.0).min_margin())
                }
            },
        ),
        check(
            "uncommitted-buyer-skips-payment",
            Source::Paper,
            eq(1.0, 0.0),
            move || {
                let fs = full_surplus_contract(&c)?;
                let tree = menu_to_protocol(&c, &fs.menu)?;
                let skips = (0..c.n_types()).any(|t| {
                    best_response(&c, &tree, t, Mode::Uncommitted)
                        .strategy
                        .decisions
                        .iter()
                        .any(|(&n, &d)| {
                            d == Decision::Defect
                                && matches!(tree.node(n).kind,
                                    NodeKind::Transfer { amount, .. } if amount > 0.0)
                        })
                });
                Ok(flag(skips))
            },
        ),
    ];
    FixtureCase {
        name: "lockbox",
        context: ctx,
        protocol: None,
        checks,
    }
}

fn uniform_lockbox_case() -> FixtureCase {
    let ctx = uniform_lockbox();
    let c = ctx.clone();
    let report = {
        let c = c.clone();
        move || revenue_report(&c)
    };
    let r1 = report.clone();
    let r2 = report.clone();
    let r3 = report.clone();
    let checks = vec![
        check("surplus-type-1", Source::Paper, eq(1.5, 1e-9), {
            let c = c.clone();
            move || Ok(c.surplus(0))
        }),
        check("surplus-type-2", Source::Paper, eq(2.5, 1e-9), {
            let c = c.clone();
            move || Ok(c.surplus(1))
        }),
        check("full-surplus", Source::Paper, eq(2.0, 1e-9), {
            let c = c.clone();
            move || Ok(c.full_surplus())
        }),
        check("mappings-objective", Source::Paper, eq(1.5, 1e-8), {
            let c = c.clone();
            move || {
                let q = interesting_posteriors(&c, Correlation::Independent)?;
                let prog = build_program(&c, Program::IndependentMappings, q.points());
                Ok(lp::solve(&prog)?.objective)
            }
        }),
        check("mappings-dual-objective", Source::Paper, eq(1.5, 1e-8), {
            let c = c.clone();
            move || {
                let q = interesting_posteriors(&c, Correlation::Independent)?;
                let prog = build_program(&c, Program::IndependentMappings, q.points());
                Ok(lp::solve(&build_dual(&prog))?.objective)
            }
        }),
        check("full-information-price", Source::Paper, eq(1.5, 1e-8), {
            let c = c.clone();
            move || {
                let q = interesting_posteriors(&c, Correlation::Independent)?;
                let s = solve_pricing_mappings(&c, &q)?;
                let contract = &s.menu.contracts[1];
                let full = contract
                    .signals
                    .iter()
                    .filter(|s| s.weight > 1e-12)
                    .all(|s| s.posterior.iter().any(|&x| (x - 1.0).abs() < 1e-9));
                Ok(if full { contract.price } else { f64::NAN })
            }
        }),
        check("rc", Source::Paper, eq(1.5, 1e-8), move || Ok(r1()?.rc)),
        check("rp", Source::Paper, eq(1.5, 1e-8), move || Ok(r2()?.rp)),
        check("r", Source::Paper, eq(1.5, 1e-8), move || Ok(r3()?.r)),
        check("re", Source::Paper, eq(1.5, 1e-8), {
            let c = c.clone();
            move || Ok(solve_sealed_envelope(&c).revenue)
        }),
        check(
            "envelope-interior-nodes",
            Source::Paper,
            eq(3.0, 0.0),
            move || {
                let env = solve_sealed_envelope(&c);
                let tree = menu_to_protocol(&c, &env.menu)?;
                Ok(tree
                    .nodes()
                    .iter()
                    .filter(|n| !matches!(n.kind, NodeKind::Leaf))
                    .count() as f64)
            },
        ),
    ];
    FixtureCase {
        name: "uniform-lockbox",
        context: ctx,
        protocol: None,
        checks,
    }
}

/// Solves Σ_ω t(ω) μ(ω, θ) = μ(θ) ζ(θ) for two states by Cramer's rule.
fn two_by_two_payments(ctx: &Context) -> [f64; 2] {
    let a = |t: usize, w: usize| ctx.joint(w, t);
    let b = |t: usize| ctx.type_mass(t) * ctx.surplus(t);
    let det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    [
        (b(0) * a(1, 1) - a(0, 1) * b(1)) / det,
        (a(0, 0) * b(1) - b(0) * a(1, 0)) / det,
    ]
}

fn perturbed_lockbox_case() -> FixtureCase {
    let ctx = perturbed_lockbox();
    let c = ctx.clone();
    let checks = vec![
        check("full-surplus-revenue", Source::Derived, eq(0.0, 1e-6), {
            let c = c.clone();
            move || {
                let fs = full_surplus_contract(&c)?;
                Ok((fs.revenue - c.full_surplus()) / c.full_surplus())
            }
        }),
        check("full-surplus-value", Source::Derived, eq(1.99992, 1e-6), {
            let c = c.clone();
            move || Ok(c.full_surplus())
        }),
        check(
            "payments-match-exact-solve",
            Source::Derived,
            eq(0.0, 1e-6),
            {
                let c = c.clone();
                move || {
                    let fs = full_surplus_contract(&c)?;
                    let exact = two_by_two_payments(&c);
                    Ok(fs
                        .payments
                        .iter()
                        .zip(exact)
                        .map(|(t, e)| ((t - e) / e).abs())
                        .fold(0.0, f64::max))
                }
            },
        ),
        check("payment-0", Source::Derived, eq(-12497.5, 0.02), {
            let c = c.clone();
            move || Ok(full_surplus_contract(&c)?.payments[0])
        }),
        check("payment-1", Source::Derived, eq(12501.5, 0.02), {
            let c = c.clone();
            move || Ok(full_surplus_contract(&c)?.payments[1])
        }),
        check(
            "condition-warning",
            Source::Derived,
            eq(1.0, 0.0),
            move || Ok(flag(full_surplus_contract(&c)?.warning.is_some())),
        ),
    ];
    FixtureCase {
        name: "perturbed-lockbox",
        context: ctx,
        protocol: None,
        checks,
    }
}

/// Full information with payments t(ω) = (1, 0) for both types.
fn reveal_and_charge(ctx: &Context) -> Menu {
    let prior = ctx.prior();
    let signals = (0..2)
        .map(|w| {
            let mut e = vec![0.0; 2];
            e[w] = 1.0;
            let t = if w == 0 { 1.0 } else { 0.0 };
            Signal {
                posterior: e,
                weight: prior[w],
                scaled_payment: prior[w] * t,
                payment: Some(t),
            }
        })
        .collect();
    Menu {
        kind: MenuKind::Outcomes,
        contracts: vec![
            Contract {
                signals,
                price: 0.0,
            };
            2
        ],
    }
}

/// The strategies the protocol is designed around: type 0 buys at the first
/// price, type 1 takes the second stage and pays when asked.
pub fn separation_strategies(tree: &ProtocolTree) -> Vec<BuyerStrategy> {
    let root = tree.root();
    let t1 = tree.find("t1").expect("t1");
    let t2 = tree.find("t2").expect("t2");
    (0..2)
        .map(|theta| {
            BuyerStrategy::new(Mode::Uncommitted)
                .with(root, Decision::Child(theta))
                .with(t1, Decision::Pay)
                .with(t2, Decision::Pay)
        })
        .collect()
}

fn separation_case() -> FixtureCase {
    let (ctx, tree) = separation_protocol();
    let c = ctx.clone();
    let t = tree.clone();
    let eval = {
        let (c, t) = (c.clone(), t.clone());
        move || evaluate(&c, &t, &separation_strategies(&t))
    };
    let e1 = eval.clone();
    let e3 = eval.clone();
    let checks = vec![
        check("value-at-interim-belief", Source::Paper, eq(0.4, 1e-12), {
            let c = c.clone();
            move || Ok(c.value(0, &[0.6, 0.4]))
        }),
        check("surplus-type-0", Source::Paper, eq(0.6, 1e-9), {
            let c = c.clone();
            move || Ok(c.surplus(0))
        }),
        check("surplus-type-1", Source::Paper, eq(0.4, 1e-9), {
            let c = c.clone();
            move || Ok(c.surplus(1))
        }),
        check("full-surplus", Source::Paper, eq(0.5, 1e-9), {
            let c = c.clone();
            move || Ok(c.full_surplus())
        }),
        check("envelope-price", Source::Paper, eq(0.4, 1e-9), {
            let c = c.clone();
            move || Ok(solve_sealed_envelope(&c).price)
        }),
        check("rc", Source::Paper, eq(0.4, 1e-9), {
            let c = c.clone();
            move || Ok(revenue_report(&c)?.rc)
        }),
        check("rp", Source::Paper, eq(0.5, 1e-9), {
            let c = c.clone();
            move || Ok(revenue_report(&c)?.rp)
        }),
        check("reveal-and-charge-revenue", Source::Paper, eq(0.5, 1e-9), {
            let c = c.clone();
            move || {
                let rep = verify_menu(&c, &reveal_and_charge(&c), 0.0);
                Ok(if rep.valid { rep.revenue } else { f64::NAN })
            }
        }),
        check(
            "protocol-revenue",
            Source::Paper,
            eq(0.4665, 1e-9),
            move || Ok(e1()?.revenue),
        ),
        check("type-0-utility", Source::Paper, eq(0.467, 1e-9), {
            let (c, t) = (c.clone(), t.clone());
            move || Ok(best_response(&c, &t, 0, Mode::Uncommitted).utility)
        }),
        check(
            "best-response-matches-design",
            Source::Paper,
            eq(1.0, 0.0),
            {
                let (c, t) = (c.clone(), t.clone());
                move || {
                    let on_path = [t.find("t1").expect("t1"), t.find("t2").expect("t2")];
                    let same = (0..2).all(|theta| {
                        let d = best_response(&c, &t, theta, Mode::Uncommitted)
                            .strategy
                            .decisions;
                        d.get(&t.root()) == Some(&Decision::Child(theta))
                            && d.get(&on_path[theta]) == Some(&Decision::Pay)
                    });
                    Ok(flag(same))
                }
            },
        ),
        check("posterior-at-t2-type-0", Source::Paper, eq(0.1, 1e-12), {
            let (c, t) = (c.clone(), t.clone());
            move || {
                // type 0 never goes right by itself; follow it there
                let mut strategies = separation_strategies(&t);
                strategies[0] = strategies[0].clone().with(t.root(), Decision::Child(1));
                let ev = evaluate(&c, &t, &strategies)?;
                Ok(ev
                    .posterior_at(0, t.find("t2").expect("t2"))
                    .map_or(f64::NAN, |q| q[1]))
            }
        }),
        check("posterior-at-t2-type-1", Source::Paper, eq(0.2, 1e-12), {
            let t = t.clone();
            move || {
                let ev = e3()?;
                Ok(ev
                    .posterior_at(1, t.find("t2").expect("t2"))
                    .map_or(f64::NAN, |q| q[1]))
            }
        }),
        check(
            "reach-t2-type-1",
            Source::Derived,
            eq(0.5, 1e-12),
            move || {
                let ev = eval()?;
                Ok(ev.reach(1, t.find("t2").expect("t2")))
            },
        ),
    ];
    FixtureCase {
        name: "separation",
        context: ctx,
        protocol: Some(tree),
        checks,
    }
}

pub const STAIRCASE_DELTA: f64 = 0.05;
pub const STAIRCASE_EPS: f64 = 1e-4;

fn staircase_case() -> FixtureCase {
    let ctx = staircase(3, STAIRCASE_DELTA, STAIRCASE_EPS);
    let c = ctx.clone();
    let reduced = {
        let c = c.clone();
        move || -> Result<(Menu, Menu)> {
            let q = interesting_posteriors(&c, Correlation::Independent)?;
            let s = solve_pricing_mappings(&c, &q)?;
            let r = reduce_support_over(&c, &s.menu, &q)?;
            Ok((s.menu, r))
        }
    };
    let mut checks = vec![check(
        "candidates-contain-breakpoints",
        Source::Paper,
        eq(1.0, 0.0),
        {
            let c = c.clone();
            move || {
                let q = interesting_posteriors(&c, Correlation::Independent)?;
                let all = (0..=3).chain([20]).all(|k| {
                    let x = 1.0 - k as f64 * STAIRCASE_DELTA;
                    q.points().iter().any(|p| (p[1] - x.max(0.0)).abs() < 1e-12)
                });
                Ok(flag(all))
            }
        },
    )];
    for (theta, name) in [
        (0, "support-type-1"),
        (1, "support-type-2"),
        (2, "support-type-3"),
    ] {
        let r = reduced.clone();
        checks.push(check(
            name,
            Source::Paper,
            eq(theta as f64 + 2.0, 0.0),
            move || Ok(r()?.1.support_sizes()[theta] as f64),
        ));
    }
    let r = reduced.clone();
    checks.push(check(
        "support-bound",
        Source::Paper,
        Expect::AtMost { bound: 0.0 },
        {
            let c = c.clone();
            move || {
                let m = c.n_states();
                let sizes = r()?.1.support_sizes();
                Ok(sizes
                    .iter()
                    .enumerate()
                    .map(|(t, &s)| s as f64 - (t + 1 + m - 1) as f64)
                    .fold(f64::NEG_INFINITY, f64::max))
            }
        },
    ));
    checks.push(check(
        "reduction-keeps-revenue",
        Source::Derived,
        eq(0.0, 1e-8),
        move || {
            let (before, after) = reduced()?;
            Ok(after.revenue(&c) - before.revenue(&c))
        },
    ));
    FixtureCase {
        name: "staircase",
        context: ctx,
        protocol: None,
        checks,
    }
}

fn envelope_gap_case() -> FixtureCase {
    let ctx = envelope_gap(5, 10.0);
    let c = ctx.clone();
    FixtureCase {
        name: "envelope-gap",
        context: ctx,
        protocol: None,
        checks: vec![check(
            "rc-over-re",
            Source::Derived,
            Expect::AtLeast { bound: 2.0 },
            move || {
                let rep = revenue_report(&c)?;
                Ok(rep.rc / rep.re)
            },
        )],
    }
}

fn type_revealing_case() -> FixtureCase {
    let ctx = type_revealing(3);
    let c = ctx.clone();
    FixtureCase {
        name: "type-revealing",
        context: ctx,
        protocol: None,
        checks: vec![
            check("rp-reaches-full-surplus", Source::Derived, eq(0.0, 1e-8), {
                let c = c.clone();
                move || Ok(revenue_report(&c)?.rp - c.full_surplus())
            }),
            check(
                "rc-reaches-full-surplus",
                Source::Derived,
                eq(0.0, 1e-8),
                move || Ok(revenue_report(&c)?.rc - c.full_surplus()),
            ),
        ],
    }
}

pub const IID_GAP_T: f64 = 1e-5;

fn iid_gap_case() -> FixtureCase {
    let ctx = iid_gap(3);
    let rows = {
        let c = ctx.clone();
        move || gap_experiment(&c, &iid_gap_direction(3), &[IID_GAP_T])
    };
    let r1 = rows.clone();
    FixtureCase {
        name: "iid-gap",
        context: ctx,
        protocol: None,
        checks: vec![
            check(
                "r-jumps-to-full-surplus",
                Source::Derived,
                eq(0.0, 1e-6),
                move || {
                    let rows = r1()?;
                    Ok(rows[1].r - rows[1].full_surplus)
                },
            ),
            check(
                "rc-continuity",
                Source::Derived,
                Expect::AtMost { bound: 1e-3 },
                move || {
                    let rows = rows()?;
                    Ok((rows[1].rc - rows[0].rc).abs())
                },
            ),
        ],
    }
}

/// Every embedded fixture.
pub fn cases() -> Vec<FixtureCase> {
    vec![
        lockbox_case(),
        uniform_lockbox_case(),
        perturbed_lockbox_case(),
        separation_case(),
        staircase_case(),
        envelope_gap_case(),
        type_revealing_case(),
        iid_gap_case(),
    ]
}

/// Names of the fixture checks the suite must contain, as `fixture/check`.
pub const MANIFEST: &[&str] = &[
    "lockbox/context-valid",
    "lockbox/surplus-type-1",
    "lockbox/surplus-type-2",
    "lockbox/interim-belief-type-1",
    "lockbox/full-surplus-payment-0",
    "lockbox/full-surplus-payment-1",
    "lockbox/full-surplus-revenue",
    "lockbox/participation-binding",
    "lockbox/strict-menu-slack",
    "lockbox/uncommitted-buyer-skips-payment",
    "uniform-lockbox/surplus-type-1",
    "uniform-lockbox/surplus-type-2",
    "uniform-lockbox/full-surplus",
    "uniform-lockbox/mappings-objective",
    "uniform-lockbox/mappings-dual-objective",
    "uniform-lockbox/full-information-price",
    "uniform-lockbox/rc",
    "uniform-lockbox/rp",
    "uniform-lockbox/r",
    "uniform-lockbox/re",
    "uniform-lockbox/envelope-interior-nodes",
    "perturbed-lockbox/full-surplus-revenue",
    "perturbed-lockbox/full-surplus-value",
    "perturbed-lockbox/payments-match-exact-solve",
    "perturbed-lockbox/payment-0",
    "perturbed-lockbox/payment-1",
    "perturbed-lockbox/condition-warning",
    "separation/value-at-interim-belief",
    "separation/surplus-type-0",
    "separation/surplus-type-1",
    "separation/full-surplus",
    "separation/envelope-price",
    "separation/rc",
    "separation/rp",
    "separation/reveal-and-charge-revenue",
    "separation/protocol-revenue",
    "separation/type-0-utility",
    "separation/best-response-matches-design",
    "separation/posterior-at-t2-type-0",
    "separation/posterior-at-t2-type-1",
    "separation/reach-t2-type-1",
    "staircase/candidates-contain-breakpoints",
    "staircase/support-type-1",
    "staircase/support-type-2",
    "staircase/support-type-3",
    "staircase/support-bound",
    "staircase/reduction-keeps-revenue",
    "envelope-gap/rc-over-re",
    "type-revealing/rp-reaches-full-surplus",
    "type-revealing/rc-reaches-full-surplus",
    "iid-gap/r-jumps-to-full-surplus",
    "iid-gap/rc-continuity",
];

fn run_case(case: &FixtureCase) -> Vec<CheckResult> {
    case.checks
        .iter()
        .map(|k| {
            let (actual, error) = match (k.measure)() {
                Ok(x) => (Some(x), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let passed = actual.is_some_and(|x| k.expect.holds(x));
            CheckResult {
                fixture: case.name,
                check: k.name,
                source: k.source,
                expect: k.expect,
                actual,
                delta: actual.map(|x| k.expect.delta(x)),
                passed,
                error,
            }
        })
        .collect()
}

/// Runs every fixture whose name matches the glob `filter` (all when
/// `None`); fixtures run on separate threads and report in suite order.
pub fn run_fixtures(filter: Option<&str>) -> Result<FixtureReport> {
    let pattern = filter
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| crate::error::Error::InvalidInput(format!("bad fixture filter: {e}")))?;
    let selected: Vec<FixtureCase> = cases()
        .into_iter()
        .filter(|c| pattern.as_ref().is_none_or(|p| p.matches(c.name)))
        .collect();
    let results: Vec<CheckResult> = std::thread::scope(|s| {
        let handles: Vec<_> = selected.iter().map(|c| s.spawn(|| run_case(c))).collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("fixture thread panicked"))
            .collect()
    });
    let passed = results.iter().filter(|r| r.passed).count();
    Ok(FixtureReport {
        failed: results.len() - passed,
        passed,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn manifest_matches_suite() {
        let present: BTreeSet<String> = cases()
            .iter()
            .flat_map(|c| {
                c.checks
                    .iter()
                    .map(move |k| format!("{}/{}", c.name, k.name))
            })
            .collect();
        let expected: BTreeSet<String> = MANIFEST.iter().map(|s| s.to_string()).collect();
        assert_eq!(present, expected);
    }

    #[test]
    fn every_check_has_a_tolerance() {
        for c in cases() {
            for k in &c.checks {
                if let Expect::Equal { tol, .. } = k.expect {
                    assert!(tol >= 0.0 && tol.is_finite(), "{}/{}", c.name, k.name);
                }
            }
        }
    }

    #[test]
    fn lockbox_payments_pass() {
        let rep = run_fixtures(Some("lockbox")).unwrap();
        assert!(rep.results.iter().all(|r| r.fixture == "lockbox"));
        assert!(rep
            .results
            .iter()
            .any(|r| r.check == "full-surplus-payment-0" && r.passed));
    }

    #[test]
    fn separation_protocol_passes() {
        let rep = run_fixtures(Some("separation")).unwrap();
        for r in &rep.results {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn whole_suite_passes() {
        let rep = run_fixtures(None).unwrap();
        let failed: Vec<_> = rep.results.iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert_eq!(rep.results.len(), MANIFEST.len());
    }
}
