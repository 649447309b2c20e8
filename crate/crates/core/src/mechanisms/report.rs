use serde::Serialize;

use super::{
    full_surplus_contract, solve_pricing_mappings, solve_pricing_outcomes, solve_sealed_envelope,
    Menu,
};
use crate::context::Context;
use crate::error::Result;
use crate::geometry::{interesting_posteriors, Correlation, PosteriorSet};

/// Tolerance of the revenue ordering and fraction checks.
pub const ORDER_TOL: f64 = 1e-7;

/// Revenue of every mechanism class on one context.
#[derive(Debug, Clone, Serialize)]
pub struct RevenueReport {
    /// Single price for full information.
    pub re: f64,
    /// Fixed-price menus.
    pub rc: f64,
    /// Per-signal payments, never paying the buyer.
    pub rp: f64,
    /// Per-signal payments of either sign.
    pub r: f64,
    pub full_surplus: f64,
    pub envelope_price: f64,
    pub posteriors: usize,
    pub ordering_holds: bool,
    /// Rc and Re both reach R/n.
    pub fraction_bound_holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_surplus_payments: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    pub diagnostics: Vec<String>,
    pub envelope_menu: Menu,
    pub mappings_menu: Menu,
    pub nonnegative_menu: Menu,
    pub outcomes_menu: Menu,
}

impl RevenueReport {
    /// `Re=… Rc=… Rp=… R=…` at 12 significant digits.
    pub fn summary_line(&self) -> String {
        format!(
            "Re={} Rc={} Rp={} R={}",
            fmt_sig(self.re),
            fmt_sig(self.rc),
            fmt_sig(self.rp),
            fmt_sig(self.r)
        )
    }
}

/// Formats with 12 significant digits and no trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    if x.abs() < 1e-4 || x.abs() >= 1e15 {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let digits = 12 - 1 - x.abs().log10().floor() as i32;
    let s = if digits > 0 {
        format!("{:.*}", digits as usize, x)
    } else {
        format!("{:.0}", x)
    };
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Runs every mechanism class over the interesting posteriors of `ctx`.
pub fn revenue_report(ctx: &Context) -> Result<RevenueReport> {
    let corr = if ctx.is_independent(1e-12) {
        Correlation::Independent
    } else {
        Correlation::Correlated
    };
    let q = interesting_posteriors(ctx, corr)?;
    revenue_report_with(ctx, &q)
}

/// Runs every mechanism class over the candidate posteriors `q`.
pub fn revenue_report_with(ctx: &Context, q: &PosteriorSet) -> Result<RevenueReport> {
    let mut diagnostics = Vec::new();
    if !ctx.zero_mass_states().is_empty() {
        diagnostics.push(format!(
            "states with zero prior mass: {:?}",
            ctx.zero_mass_states()
        ));
    }
    let envelope = solve_sealed_envelope(ctx);
    let mappings = solve_pricing_mappings(ctx, q)?;
    let nonnegative = solve_pricing_outcomes(ctx, q, true)?;
    let outcomes = solve_pricing_outcomes(ctx, q, false)?;
    let full_surplus = ctx.full_surplus();

    let mut r = outcomes.revenue;
    let mut outcomes_menu = outcomes.menu;
    let mut payments = None;
    let mut condition = None;
    match full_surplus_contract(ctx) {
        Ok(fs) => {
            if let Some(w) = &fs.warning {
                diagnostics.push(w.clone());
            }
            condition = Some(fs.condition);
            if fs.revenue > r + 1e-9 * (1.0 + r.abs()) {
                diagnostics.push(format!(
                    "outcomes program reached {r:.12}; the full-surplus contract reaches {:.12} and is reported instead",
                    fs.revenue
                ));
                r = fs.revenue;
                outcomes_menu = fs.menu.clone();
            }
            payments = Some(fs.payments);
        }
        Err(e) => diagnostics.push(format!("no full-surplus contract: {e}")),
    }

    let (re, rc, rp) = (envelope.revenue, mappings.revenue, nonnegative.revenue);
    let chain = [re, rc, rp, r, full_surplus];
    let ordering_holds = chain.windows(2).all(|w| w[0] <= w[1] + ORDER_TOL);
    let n = ctx.n_types() as f64;
    let fraction_bound_holds = rc >= r / n - ORDER_TOL && re >= r / n - ORDER_TOL;
    if !ordering_holds {
        diagnostics.push(format!("revenue ordering violated: {chain:?}"));
    }
    if !fraction_bound_holds {
        diagnostics.push("fixed-price revenue below R/n".into());
    }
    Ok(RevenueReport {
        re,
        rc,
        rp,
        r,
        full_surplus,
        envelope_price: envelope.price,
        posteriors: q.len(),
        ordering_holds,
        fraction_bound_holds,
        full_surplus_payments: payments,
        condition,
        diagnostics,
        envelope_menu: envelope.menu,
        mappings_menu: mappings.menu,
        nonnegative_menu: nonnegative.menu,
        outcomes_menu,
    })
}
