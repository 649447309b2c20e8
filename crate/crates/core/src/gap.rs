//! Revenue of every mechanism class along a line of joint distributions.

use serde::Serialize;

use crate::context::Context;
use crate::error::{Error, Result};
use crate::mechanisms::revenue_report;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub t: f64,
    pub r: f64,
    pub rc: f64,
    pub rp: f64,
    pub re: f64,
    pub full_surplus: f64,
}

/// Total mass tolerated in a perturbation direction.
const MASS_TOL: f64 = 1e-12;

/// Reports R, Rc, Rp, Re and the full surplus on μ + tη for each requested t
/// and for t = 0, sorted by t.
pub fn gap_experiment(base: &Context, eta: &[Vec<f64>], ts: &[f64]) -> Result<Vec<GapRow>> {
    let (m, n) = (base.n_states(), base.n_types());
    if eta.len() != m || eta.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!(
            "perturbation must be {m}×{n} (states × types)"
        )));
    }
    let mass: f64 = eta.iter().flatten().sum();
    if mass.abs() > MASS_TOL {
        return Err(Error::InvalidInput(format!(
            "perturbation must have zero total mass, has {mass:e}"
        )));
    }
    let mut ts: Vec<f64> = ts.to_vec();
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("t must be finite".into()));
    }
    ts.push(0.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut rows = Vec::with_capacity(ts.len());
    for t in ts {
        let mu: Vec<Vec<f64>> = base
            .mu()
            .iter()
            .zip(eta)
            .map(|(r, e)| r.iter().zip(e).map(|(a, b)| a + t * b).collect())
            .collect();
        if mu.iter().flatten().any(|&x| x < 0.0) {
            return Err(Error::InvalidPerturbation { t });
        }
        let ctx = base
            .with_mu(mu)
            .map_err(|_| Error::InvalidPerturbation { t })?;
        let rep = revenue_report(&ctx)?;
        rows.push(GapRow {
            t,
            r: rep.r,
            rc: rep.rc,
            rp: rep.rp,
            re: rep.re,
            full_surplus: rep.full_surplus,
        });
    }
    Ok(rows)
}
