//! Mechanism classes, menu verification and menu post-processing.
//!
//! All programs work in the observer frame: a signal is identified with the
//! posterior `q` an outside observer forms, and type θ reads it through
//! `D_θ q`. Menus carry one contract per type; a contract is a lottery over
//! posteriors (weights summing the posteriors to the prior) plus either a
//! fixed price or a per-signal payment.

mod envelope;
mod postprocess;
mod programs;
mod report;

use serde::{Deserialize, Serialize};

use crate::context::Context;
use crate::linalg;

pub use envelope::{
    full_surplus_contract, solve_sealed_envelope, EnvelopeSolution, FullSurplusSolution,
};
pub use postprocess::{make_strict, recover_transfers, reduce_support, reduce_support_over};
pub use programs::{
    build_program, solve_pricing_mappings, solve_pricing_outcomes, solve_program, Program, Solved,
    DIRECT_SOLVE_LIMIT,
};
pub use report::{fmt_sig, revenue_report, revenue_report_with, RevenueReport};

/// Weights at or below this are treated as absent signals.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Tolerance of the prior-consistency check.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Margin below which an incentive constraint counts as binding.
pub const BINDING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MenuKind {
    /// Fixed price per contract.
    Mappings,
    /// Payment depends on the realized signal.
    Outcomes,
}

/// One signal of a contract, identified by the observer posterior it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub posterior: Vec<f64>,
    /// Probability x(q) of sending this signal (unconditional on the type).
    pub weight: f64,
    /// x(q)·t(q); zero for fixed-price contracts.
    #[serde(default)]
    pub scaled_payment: f64,
    /// t(q) itself, once it is well defined (positive weight).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payment: Option<f64>,
}

impl Signal {
    pub fn new(posterior: Vec<f64>, weight: f64) -> Self {
        Self {
            posterior,
            weight,
            scaled_payment: 0.0,
            payment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub signals: Vec<Signal>,
    /// Up-front price (mappings); outcomes contracts keep it at zero.
    #[serde(default)]
    pub price: f64,
}

impl Contract {
    /// Reveals nothing and charges nothing.
    pub fn null(prior: &[f64]) -> Self {
        Self {
            signals: vec![Signal::new(prior.to_vec(), 1.0)],
            price: 0.0,
        }
    }

    /// Number of signals sent with positive probability.
    pub fn support_size(&self) -> usize {
        self.signals
            .iter()
            .filter(|s| s.weight > SUPPORT_TOL)
            .count()
    }

    pub fn same_as(&self, other: &Contract, tol: f64) -> bool {
        (self.price - other.price).abs() <= tol
            && self.signals.len() == other.signals.len()
            && self.signals.iter().all(|s| {
                other.signals.iter().any(|o| {
                    linalg::max_abs_diff(&s.posterior, &o.posterior) <= tol
                        && (s.weight - o.weight).abs() <= tol
                        && (s.scaled_payment - o.scaled_payment).abs() <= tol
                })
            })
    }

    /// Buyer-frame expected value of the information for type θ.
    pub fn value_for(&self, ctx: &Context, theta: usize) -> f64 {
        let mass = ctx.type_mass(theta);
        self.signals
            .iter()
            .map(|s| s.weight * ctx.observer_value(theta, &s.posterior))
            .sum::<f64>()
            / mass
    }

    /// Buyer-frame expected payment of type θ.
    pub fn payment_for(&self, ctx: &Context, theta: usize) -> f64 {
        let d = ctx.belief_transform(theta);
        let per_signal: f64 = self
            .signals
            .iter()
            .map(|s| d.mass(&s.posterior) * s.scaled_payment)
            .sum();
        self.price + per_signal / ctx.type_mass(theta)
    }

    pub fn utility_for(&self, ctx: &Context, theta: usize) -> f64 {
        self.value_for(ctx, theta) - self.payment_for(ctx, theta)
    }

    /// Largest violation of Σ_q x(q) q = prior.
    pub fn feasibility_error(&self, prior: &[f64]) -> f64 {
        let mut mix = vec![0.0; prior.len()];
        for s in &self.signals {
            for (m, q) in mix.iter_mut().zip(&s.posterior) {
                *m += s.weight * q;
            }
        }
        linalg::max_abs_diff(&mix, prior)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    pub kind: MenuKind,
    /// `contracts[θ]` is the contract intended for type θ.
    pub contracts: Vec<Contract>,
}

impl Menu {
    /// Every type gets the uninformative, free contract.
    pub fn null(ctx: &Context, kind: MenuKind) -> Self {
        Self {
            kind,
            contracts: vec![Contract::null(ctx.prior()); ctx.n_types()],
        }
    }

    /// Σ_θ μ(θ)·E[payment | θ].
    pub fn revenue(&self, ctx: &Context) -> f64 {
        self.contracts
            .iter()
            .enumerate()
            .map(|(t, c)| ctx.type_mass(t) * c.payment_for(ctx, t))
            .sum()
    }

    pub fn support_sizes(&self) -> Vec<usize> {
        self.contracts.iter().map(Contract::support_size).collect()
    }

    pub fn total_support(&self) -> usize {
        self.support_sizes().iter().sum()
    }
}

/// Buyer-frame value of acting on the interim belief alone.
pub fn outside_option(ctx: &Context, theta: usize) -> f64 {
    ctx.value(theta, &ctx.conditional(theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Feasibility,
    Participation,
    Incentive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintStatus {
    Slack,
    Binding,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    pub theta: usize,
    /// The contract being compared against (incentive constraints only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternative: Option<usize>,
    /// Utility margin in buyer units; for feasibility, minus the error.
    pub margin: f64,
    pub status: ConstraintStatus,
    /// Both contracts are the same, so the constraint is trivially tight.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeSummary {
    pub theta: usize,
    pub utility: f64,
    pub outside_option: f64,
    /// E[payment | θ] as the buyer sees it.
    pub buyer_payment: f64,
    /// μ(θ)·E[payment | θ], the type's share of revenue.
    pub observer_payment: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MenuReport {
    pub valid: bool,
    pub revenue: f64,
    pub required_slack: f64,
    pub types: Vec<TypeSummary>,
    pub checks: Vec<ConstraintCheck>,
}

impl MenuReport {
    pub fn violated(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks
            .iter()
            .filter(|c| c.status == ConstraintStatus::Violated)
    }

    pub fn binding(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks
            .iter()
            .filter(|c| c.status == ConstraintStatus::Binding)
    }

    /// Smallest margin over participation and non-trivial incentive constraints.
    pub fn min_margin(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.kind != ConstraintKind::Feasibility && !c.identical)
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Checks prior consistency, participation and incentive constraints of a
/// menu, requiring incentive margins of at least `slack`.
pub fn verify_menu(ctx: &Context, menu: &Menu, slack: f64) -> MenuReport {
    let n = ctx.n_types();
    let prior = ctx.prior();
    let mut checks = Vec::new();
    let mut types = Vec::with_capacity(n);
    let classify = |margin: f64| {
        if margin < slack - BINDING_TOL {
            ConstraintStatus::Violated
        } else if margin <= BINDING_TOL.max(slack + BINDING_TOL) {
            ConstraintStatus::Binding
        } else {
            ConstraintStatus::Slack
        }
    };
    for (t, own) in menu.contracts.iter().enumerate() {
        let err = own.feasibility_error(prior);
        let negative = own.signals.iter().any(|s| s.weight < -SUPPORT_TOL);
        checks.push(ConstraintCheck {
            kind: ConstraintKind::Feasibility,
            theta: t,
            alternative: None,
            margin: -err,
            status: if err > FEASIBILITY_TOL || negative {
                ConstraintStatus::Violated
            } else {
                ConstraintStatus::Binding
            },
            identical: false,
        });
        let utility = own.utility_for(ctx, t);
        let outside = outside_option(ctx, t);
        let ir = utility - outside;
        checks.push(ConstraintCheck {
            kind: ConstraintKind::Participation,
            theta: t,
            alternative: None,
            margin: ir,
            status: classify(ir),
            identical: false,
        });
        for (s, other) in menu.contracts.iter().enumerate() {
            if s == t {
                continue;
            }
            let identical = own.same_as(other, 1e-12);
            let margin = utility - other.utility_for(ctx, t);
            checks.push(ConstraintCheck {
                kind: ConstraintKind::Incentive,
                theta: t,
                alternative: Some(s),
                margin,
                status: if identical && margin.abs() <= BINDING_TOL {
                    ConstraintStatus::Binding
                } else {
                    classify(margin)
                },
                identical,
            });
        }
        let pay = own.payment_for(ctx, t);
        types.push(TypeSummary {
            theta: t,
            utility,
            outside_option: outside,
            buyer_payment: pay,
            observer_payment: ctx.type_mass(t) * pay,
            support: own.support_size(),
        });
    }
    let valid = menu.contracts.len() == n
        && !checks
            .iter()
            .any(|c| c.status == ConstraintStatus::Violated);
    MenuReport {
        valid,
        revenue: menu.revenue(ctx),
        required_slack: slack,
        types,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn null_menu_is_valid_with_zero_revenue() {
        let ctx = fixtures::lockbox();
        let menu = Menu::null(&ctx, MenuKind::Mappings);
        let rep = verify_menu(&ctx, &menu, 0.0);
        assert!(rep.valid);
        assert_eq!(rep.revenue, 0.0);
    }

    #[test]
    fn overpriced_contract_violates_participation() {
        let ctx = fixtures::uniform_lockbox();
        let mut c = Contract {
            signals: vec![
                Signal::new(vec![1.0, 0.0], 0.5),
                Signal::new(vec![0.0, 1.0], 0.5),
            ],
            price: 2.0,
        };
        let menu = Menu {
            kind: MenuKind::Mappings,
            contracts: vec![c.clone(), c.clone()],
        };
        let rep = verify_menu(&ctx, &menu, 0.0);
        assert!(!rep.valid);
        assert_eq!(rep.violated().count(), 1);
        c.price = 1.5;
        let menu = Menu {
            kind: MenuKind::Mappings,
            contracts: vec![c.clone(), c],
        };
        let rep = verify_menu(&ctx, &menu, 0.0);
        assert!(rep.valid);
        assert!((rep.revenue - 1.5).abs() < 1e-12);
    }
}
