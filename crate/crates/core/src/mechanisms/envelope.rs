use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Contract, Menu, MenuKind, Signal};
use crate::context::Context;
use crate::error::{Error, Result};

/// Relative singular-value threshold for the numeric rank of μ.
pub const RANK_TOL: f64 = 1e-10;

/// Condition numbers above this flag the system as near-singular.
pub const CONDITION_WARNING: f64 = 1e12;

/// Condition numbers above this produce an ill-conditioning warning: payments
/// amplify errors in μ by about this factor.
pub const CONDITION_NOTICE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSolution {
    pub price: f64,
    pub revenue: f64,
    /// Full information at `price` for types whose surplus covers it, the
    /// free uninformative contract for the rest.
    pub menu: Menu,
}

fn full_information(ctx: &Context) -> Vec<Signal> {
    let m = ctx.n_states();
    ctx.support()
        .into_iter()
        .map(|w| {
            let mut e = vec![0.0; m];
            e[w] = 1.0;
            Signal::new(e, ctx.prior()[w])
        })
        .collect()
}

/// Best single price for full information; the optimum is at one of the
/// surplus values.
pub fn solve_sealed_envelope(ctx: &Context) -> EnvelopeSolution {
    let surplus = ctx.surpluses();
    let mut best = (0.0, 0.0);
    let mut candidates = surplus.clone();
    candidates.sort_by(f64::total_cmp);
    for &price in &candidates {
        let buyers: f64 = surplus
            .iter()
            .zip(ctx.type_masses())
            .filter(|(&z, _)| z >= price)
            .map(|(_, &m)| m)
            .sum();
        let revenue = price * buyers;
        if revenue > best.1 {
            best = (price, revenue);
        }
    }
    let (price, revenue) = best;
    let offer = Contract {
        signals: full_information(ctx),
        price,
    };
    let contracts = surplus
        .iter()
        .map(|&z| {
            if price > 0.0 && z >= price {
                offer.clone()
            } else {
                Contract::null(ctx.prior())
            }
        })
        .collect();
    EnvelopeSolution {
        price,
        revenue,
        menu: Menu {
            kind: MenuKind::Mappings,
            contracts,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullSurplusSolution {
    /// Payment t(ω) charged after revealing ω.
    pub payments: Vec<f64>,
    pub revenue: f64,
    pub rank: usize,
    pub condition: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    /// Every type buys the same full-information contract.
    pub menu: Menu,
}

/// Reveals ω and charges t(ω) chosen so that every type pays exactly its
/// surplus: Σ_ω t(ω) μ(ω,θ) = μ(θ) ζ(θ). Requires μ to have full column rank;
/// with more states than types the minimum-norm payments are returned.
pub fn full_surplus_contract(ctx: &Context) -> Result<FullSurplusSolution> {
    let n = ctx.n_types();
    let m = ctx.n_states();
    // rows θ, columns ω
    let a = DMatrix::from_fn(n, m, |t, w| ctx.joint(w, t));
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let largest = sv.iter().copied().fold(0.0_f64, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * largest).count();
    if rank < n {
        return Err(Error::RankDeficient { rank, types: n });
    }
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = largest / smallest;
    let b = DVector::from_iterator(n, (0..n).map(|t| ctx.type_mass(t) * ctx.surplus(t)));
    let t = svd
        .solve(&b, RANK_TOL * largest)
        .map_err(|e| Error::NumericFailure(e.to_string()))?;
    let payments: Vec<f64> = t.iter().copied().collect();
    let warning = if condition > CONDITION_WARNING {
        Some(format!(
            "joint distribution is near-singular (condition number {condition:.3e})"
        ))
    } else if condition > CONDITION_NOTICE {
        Some(format!(
            "joint distribution is ill-conditioned (condition number {condition:.3e})"
        ))
    } else {
        None
    };
    let mut signals = full_information(ctx);
    for s in &mut signals {
        let w = s.posterior.iter().position(|&x| x == 1.0).unwrap_or(0);
        s.scaled_payment = s.weight * payments[w];
        s.payment = Some(payments[w]);
    }
    let menu = Menu {
        kind: MenuKind::Outcomes,
        contracts: vec![
            Contract {
                signals,
                price: 0.0,
            };
            n
        ],
    };
    Ok(FullSurplusSolution {
        revenue: menu.revenue(ctx),
        payments,
        rank,
        condition,
        warning,
        menu,
    })
}
