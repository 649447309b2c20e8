use super::{
    outside_option, verify_menu, ConstraintKind, Contract, Menu, MenuKind, Signal, SUPPORT_TOL,
};
use crate::context::Context;
use crate::error::{Error, Result};
use crate::geometry::{decompose_through_prior, PosteriorSet, Provenance};
use crate::linalg;
use crate::lp::{self, Bound, LinearProgram, Relation, Sense, Status};

/// Rebuilds each contract of a fixed-price menu as a vertex of a per-type
/// program over the posteriors the menu already uses.
pub fn reduce_support(ctx: &Context, menu: &Menu) -> Result<Menu> {
    let mut pts: Vec<Vec<f64>> = menu
        .contracts
        .iter()
        .flat_map(|c| c.signals.iter().map(|s| s.posterior.clone()))
        .collect();
    pts.push(ctx.prior().to_vec());
    reduce_support_over(ctx, menu, &PosteriorSet::new(pts, Provenance::Union))
}

/// Support reduction with an explicit candidate set.
///
/// Types are processed by decreasing price. Each type's contract is replaced
/// by one maximizing its price subject to its own participation and incentive
/// constraints against the current menu and to every higher-priced type still
/// preferring its own contract. A lower-priced type that now prefers the new
/// contract is handed a copy of it. Each replacement is a basic solution, so it
/// sends at most (rank + states − 1) signals.
pub fn reduce_support_over(ctx: &Context, menu: &Menu, candidates: &PosteriorSet) -> Result<Menu> {
    if menu.kind != MenuKind::Mappings {
        return Err(Error::InvalidInput(
            "support reduction applies to fixed-price menus".into(),
        ));
    }
    let n = ctx.n_types();
    if menu.contracts.len() != n {
        return Err(Error::InvalidInput(
            "menu needs one contract per type".into(),
        ));
    }
    let support = ctx.support();
    let pts = candidates.points();
    let value = |t: usize, q: &[f64]| ctx.observer_value(t, q) / ctx.type_mass(t);
    let values: Vec<Vec<f64>> = (0..n)
        .map(|t| pts.iter().map(|q| value(t, q)).collect())
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| menu.contracts[b].price.total_cmp(&menu.contracts[a].price));
    let mut contracts = menu.contracts.clone();

    for (rank, &theta) in order.iter().enumerate() {
        let best_alternative = (0..n)
            .filter(|&s| s != theta)
            .map(|s| contracts[s].utility_for(ctx, theta))
            .fold(outside_option(ctx, theta), f64::max);

        let mut lp = LinearProgram::new(Sense::Maximize);
        lp.add_constraint("IR", &[], Relation::Ge, best_alternative);
        for &e in &order[..rank] {
            let own = contracts[e].utility_for(ctx, e);
            lp.add_constraint(format!("IC[{e}]"), &[], Relation::Ge, -own);
        }
        for &w in &support {
            lp.add_constraint(format!("F[{w}]"), &[], Relation::Eq, ctx.prior()[w]);
        }
        let mut t_terms = vec![(0, -1.0)];
        for k in 0..rank {
            t_terms.push((1 + k, 1.0));
        }
        lp.add_column("t", Bound::NonNegative, 1.0, &t_terms);
        for (qi, q) in pts.iter().enumerate() {
            let mut terms = vec![(0, values[theta][qi])];
            for (k, &e) in order[..rank].iter().enumerate() {
                terms.push((1 + k, -values[e][qi]));
            }
            for (k, &w) in support.iter().enumerate() {
                if q[w] != 0.0 {
                    terms.push((1 + rank + k, q[w]));
                }
            }
            lp.add_column(format!("x[{qi}]"), Bound::NonNegative, 0.0, &terms);
        }
        let sol = lp::solve(&lp)?;
        if sol.status != Status::Optimal {
            return Err(Error::NumericFailure(format!(
                "support reduction program for type {theta} is {:?}",
                sol.status
            )));
        }
        let signals = pts
            .iter()
            .enumerate()
            .filter(|&(qi, _)| sol.primal[1 + qi] > SUPPORT_TOL)
            .map(|(qi, q)| Signal::new(q.clone(), sol.primal[1 + qi]))
            .collect();
        let fresh = Contract {
            signals,
            price: sol.primal[0],
        };
        for &later in &order[rank + 1..] {
            let own = contracts[later].utility_for(ctx, later);
            let tempted = fresh.utility_for(ctx, later);
            if tempted > own + 1e-12 * (1.0 + own.abs()) {
                contracts[later] = fresh.clone();
            }
        }
        contracts[theta] = fresh;
    }
    Ok(Menu {
        kind: menu.kind,
        contracts,
    })
}

/// Makes every participation and incentive constraint between distinct
/// contracts slack: first hands each type indifferent to a contract paying at
/// least as much that contract, then scales all payments by (1 − ε).
pub fn make_strict(ctx: &Context, menu: &Menu, epsilon: f64) -> Result<Menu> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return Ok(menu.clone());
    }
    let n = menu.contracts.len();
    let mut contracts = menu.contracts.clone();
    let tol = 1e-9;
    for _ in 0..n * n {
        let mut merged = false;
        'search: for t in 0..n {
            let own_u = contracts[t].utility_for(ctx, t);
            let own_pay = contracts[t].payment_for(ctx, t);
            for s in 0..n {
                if s == t || contracts[s].same_as(&contracts[t], 1e-12) {
                    continue;
                }
                let alt_u = contracts[s].utility_for(ctx, t);
                let alt_pay = contracts[s].payment_for(ctx, t);
                if own_u - alt_u <= tol && own_pay <= alt_pay + tol {
                    contracts[t] = contracts[s].clone();
                    merged = true;
                    break 'search;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let scale = 1.0 - epsilon;
    for c in &mut contracts {
        c.price *= scale;
        for s in &mut c.signals {
            s.scaled_payment *= scale;
            s.payment = s.payment.map(|p| p * scale);
        }
    }
    Ok(Menu {
        kind: menu.kind,
        contracts,
    })
}

fn merge_duplicates(signals: Vec<Signal>) -> Vec<Signal> {
    let mut out: Vec<Signal> = Vec::with_capacity(signals.len());
    for s in signals {
        if let Some(o) = out
            .iter_mut()
            .find(|o| linalg::max_abs_diff(&o.posterior, &s.posterior) <= 1e-12)
        {
            o.weight += s.weight;
            o.scaled_payment += s.scaled_payment;
        } else {
            out.push(s);
        }
    }
    out
}

fn with_explicit_payments(mut c: Contract) -> Contract {
    for s in &mut c.signals {
        s.payment = Some(s.scaled_payment / s.weight);
    }
    c
}

fn blend(c: &Contract, prior: &[f64], delta: f64) -> Result<Contract> {
    let k = c.signals.len() as f64;
    let mut signals = Vec::with_capacity(2 * c.signals.len());
    for s in &c.signals {
        let (gamma, r) = decompose_through_prior(prior, &s.posterior)?;
        signals.push(Signal {
            posterior: s.posterior.clone(),
            weight: (1.0 - delta) * s.weight + gamma * delta / k,
            scaled_payment: s.scaled_payment,
            payment: None,
        });
        signals.push(Signal::new(r, (1.0 - gamma) * delta / k));
    }
    let signals = merge_duplicates(signals)
        .into_iter()
        .filter(|s| s.weight > 0.0 || s.scaled_payment != 0.0)
        .collect();
    Ok(Contract {
        signals,
        price: c.price,
    })
}

/// Turns a menu whose payments are stored as x·t into one with explicit
/// per-signal payments, first mixing in a little prior-decomposition mass so
/// every paying signal is sent with positive probability.
pub fn recover_transfers(ctx: &Context, menu: &Menu) -> Result<Menu> {
    if menu.kind == MenuKind::Mappings {
        return Ok(menu.clone());
    }
    let cleaned: Vec<Contract> = menu
        .contracts
        .iter()
        .map(|c| Contract {
            signals: merge_duplicates(
                c.signals
                    .iter()
                    .filter(|s| s.weight > SUPPORT_TOL || s.scaled_payment != 0.0)
                    .cloned()
                    .collect(),
            ),
            price: c.price,
        })
        .collect();
    let needs_blend: Vec<bool> = cleaned
        .iter()
        .map(|c| c.signals.iter().any(|s| s.weight <= SUPPORT_TOL))
        .collect();
    if !needs_blend.iter().any(|&b| b) {
        return Ok(Menu {
            kind: menu.kind,
            contracts: cleaned.into_iter().map(with_explicit_payments).collect(),
        });
    }
    let base = Menu {
        kind: menu.kind,
        contracts: cleaned,
    };
    let before = verify_menu(ctx, &base, 0.0);
    if before.min_margin() <= 1e-12 {
        return Err(Error::SlackRequired);
    }
    let mut delta = 1e-4;
    for _ in 0..64 {
        let contracts = base
            .contracts
            .iter()
            .zip(&needs_blend)
            .map(|(c, &b)| {
                if b {
                    blend(c, ctx.prior(), delta)
                } else {
                    Ok(c.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let candidate = Menu {
            kind: menu.kind,
            contracts,
        };
        let after = verify_menu(ctx, &candidate, 0.0);
        let keeps_margins = before.checks.iter().zip(&after.checks).all(|(b, a)| {
            b.kind == ConstraintKind::Feasibility || b.identical || a.margin >= 0.5 * b.margin
        });
        let positive = candidate
            .contracts
            .iter()
            .all(|c| c.signals.iter().all(|s| s.weight > 0.0));
        if keeps_margins && positive && after.valid {
            return Ok(Menu {
                kind: menu.kind,
                contracts: candidate
                    .contracts
                    .into_iter()
                    .map(with_explicit_payments)
                    .collect(),
            });
        }
        delta *= 0.5;
    }
    Err(Error::NumericFailure(
        "could not find a blending weight that keeps the constraints slack".into(),
    ))
}
