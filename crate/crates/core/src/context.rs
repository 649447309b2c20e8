//! The context `(u, μ)`: buyer payoffs and the joint distribution of the
//! seller's signal ω and the buyer's type θ, plus the derived quantities every
//! solver needs (marginals, value functions, surplus, Bayesian updates).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on probability checks at load time.
pub const LOAD_TOL: f64 = 1e-12;
/// Tolerance used in derived computations.
pub const DERIVED_TOL: f64 = 1e-9;

/// Raw context as read from JSON, before validation.
///
/// `mu` has one row per state ω and one column per type θ; `u` is indexed
/// `u[theta][omega][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextData {
    pub theta: Vec<String>,
    pub omega: Vec<String>,
    pub actions: Vec<String>,
    pub mu: Vec<Vec<f64>>,
    pub u: Vec<Vec<Vec<f64>>>,
}

/// A violated context invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: &'static str,
    pub index: Option<usize>,
    pub detail: String,
}

impl Violation {
    fn new(invariant: &'static str, index: Option<usize>, detail: impl Into<String>) -> Self {
        Self {
            invariant,
            index,
            detail: detail.into(),
        }
    }
}

/// Checks every context invariant and reports each violation.
pub fn validate_context(data: &ContextData) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = data.theta.len();
    let m = data.omega.len();
    let k = data.actions.len();
    if n == 0 {
        out.push(Violation::new("empty label set", None, "no types"));
    }
    if m == 0 {
        out.push(Violation::new("empty label set", None, "no states"));
    }
    if k == 0 {
        out.push(Violation::new("empty label set", None, "no actions"));
    }
    if data.mu.len() != m {
        out.push(Violation::new(
            "dimension mismatch",
            None,
            format!("mu has {} rows, expected {m}", data.mu.len()),
        ));
    }
    for (w, row) in data.mu.iter().enumerate() {
        if row.len() != n {
            out.push(Violation::new(
                "dimension mismatch",
                Some(w),
                format!("mu row {w} has {} entries, expected {n}", row.len()),
            ));
        }
    }
    if data.u.len() != n {
        out.push(Violation::new(
            "dimension mismatch",
            None,
            format!("u has {} type slices, expected {n}", data.u.len()),
        ));
    }
    for (t, slice) in data.u.iter().enumerate() {
        if slice.len() != m || slice.iter().any(|r| r.len() != k) {
            out.push(Violation::new(
                "dimension mismatch",
                Some(t),
                format!("u[{t}] is not {m}x{k}"),
            ));
        }
        if slice.iter().flatten().any(|v| !v.is_finite()) {
            out.push(Violation::new(
                "non-finite payoff",
                Some(t),
                "u contains NaN/inf",
            ));
        }
    }
    if !out.is_empty() {
        return out;
    }
    let mut total = 0.0;
    for (w, row) in data.mu.iter().enumerate() {
        for (t, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                out.push(Violation::new(
                    "negative probability",
                    Some(w * n + t),
                    format!("mu[{w}][{t}] = {p}"),
                ));
            }
            total += p;
        }
    }
    if (total - 1.0).abs() > LOAD_TOL {
        out.push(Violation::new(
            "mass ≠ 1",
            None,
            format!("joint distribution sums to {total}"),
        ));
    }
    for t in 0..n {
        let mass: f64 = data.mu.iter().map(|row| row[t]).sum();
        if mass <= 0.0 {
            out.push(Violation::new(
                "zero-mass type",
                Some(t),
                format!("type {} has zero probability", data.theta[t]),
            ));
        }
    }
    out
}

/// Which reference frame a posterior is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The buyer's own belief about ω (already conditioned on θ).
    Buyer,
    /// An outside observer who sees the signal but not θ.
    Observer,
}

/// Value of a posterior for a type, together with every maximizing action.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    pub value: f64,
    /// Optimal actions in increasing index order; the first is the default choice.
    pub argmax: Vec<usize>,
}

/// Diagonal Bayes-rule operator taking observer posteriors to (unnormalized)
/// buyer posteriors for one type: entries μ(θ|ω).
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefTransform {
    pub theta: usize,
    pub diag: Vec<f64>,
}

impl BeliefTransform {
    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(q).map(|(d, x)| d * x).collect()
    }

    /// `1ᵀ D_θ q`.
    pub fn mass(&self, q: &[f64]) -> f64 {
        self.diag.iter().zip(q).map(|(d, x)| d * x).sum()
    }
}

/// A validated context. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    data: ContextData,
    type_mass: Vec<f64>,
    state_mass: Vec<f64>,
    transforms: Vec<BeliefTransform>,
}

impl TryFrom<ContextData> for Context {
    type Error = Error;

    fn try_from(data: ContextData) -> Result<Self> {
        let violations = validate_context(&data);
        if !violations.is_empty() {
            let detail = violations
                .iter()
                .map(|v| format!("{}: {}", v.invariant, v.detail))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::InvalidContext(detail));
        }
        let n = data.theta.len();
        let type_mass: Vec<f64> = (0..n)
            .map(|t| data.mu.iter().map(|row| row[t]).sum())
            .collect();
        let state_mass: Vec<f64> = data.mu.iter().map(|row| row.iter().sum()).collect();
        let transforms = (0..n)
            .map(|t| BeliefTransform {
                theta: t,
                diag: data
                    .mu
                    .iter()
                    .zip(&state_mass)
                    .map(|(row, &pw)| if pw > 0.0 { row[t] / pw } else { 0.0 })
                    .collect(),
            })
            .collect();
        Ok(Self {
            data,
            type_mass,
            state_mass,
            transforms,
        })
    }
}

impl Serialize for Context {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.data.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Context {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = ContextData::deserialize(d)?;
        Context::try_from(data).map_err(serde::de::Error::custom)
    }
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl Context {
    /// Builds a context with generated labels (`theta0`, `omega0`, `a0`, ...).
    pub fn new(mu: Vec<Vec<f64>>, u: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = mu.len();
        let n = mu.first().map_or(0, Vec::len);
        let k = u.first().and_then(|s| s.first()).map_or(0, Vec::len);
        Self::try_from(ContextData {
            theta: default_labels("theta", n),
            omega: default_labels("omega", m),
            actions: default_labels("a", k),
            mu,
            u,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let data: ContextData =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::try_from(data)
    }

    pub fn data(&self) -> &ContextData {
        &self.data
    }

    pub fn n_types(&self) -> usize {
        self.data.theta.len()
    }

    pub fn n_states(&self) -> usize {
        self.data.omega.len()
    }

    pub fn n_actions(&self) -> usize {
        self.data.actions.len()
    }

    pub fn type_labels(&self) -> &[String] {
        &self.data.theta
    }

    pub fn state_labels(&self) -> &[String] {
        &self.data.omega
    }

    pub fn joint(&self, omega: usize, theta: usize) -> f64 {
        self.data.mu[omega][theta]
    }

    pub fn mu(&self) -> &[Vec<f64>] {
        &self.data.mu
    }

    pub fn payoff(&self, theta: usize, omega: usize, action: usize) -> f64 {
        self.data.u[theta][omega][action]
    }

    /// μ(θ).
    pub fn type_mass(&self, theta: usize) -> f64 {
        self.type_mass[theta]
    }

    pub fn type_masses(&self) -> &[f64] {
        &self.type_mass
    }

    /// The prior p on ω, p(ω) = μ(ω).
    pub fn prior(&self) -> &[f64] {
        &self.state_mass
    }

    /// States with positive prior mass, in index order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&w| self.state_mass[w] > 0.0)
            .collect()
    }

    /// States with μ(ω) = 0; allowed but worth flagging in reports.
    pub fn zero_mass_states(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&w| self.state_mass[w] <= 0.0)
            .collect()
    }

    /// μ(·|θ), the buyer's interim belief.
    pub fn conditional(&self, theta: usize) -> Vec<f64> {
        let mass = self.type_mass[theta];
        self.data.mu.iter().map(|row| row[theta] / mass).collect()
    }

    /// D_θ.
    pub fn belief_transform(&self, theta: usize) -> &BeliefTransform {
        &self.transforms[theta]
    }

    /// Whether μ factorizes as μ(ω)μ(θ) within `tol`.
    pub fn is_independent(&self, tol: f64) -> bool {
        self.data.mu.iter().enumerate().all(|(w, row)| {
            row.iter()
                .enumerate()
                .all(|(t, &p)| (p - self.state_mass[w] * self.type_mass[t]).abs() <= tol)
        })
    }

    /// Expected payoff of `action` for type θ under the (possibly unnormalized)
    /// buyer-frame vector `q`.
    pub fn action_payoff(&self, theta: usize, q: &[f64], action: usize) -> f64 {
        self.data.u[theta]
            .iter()
            .zip(q)
            .map(|(row, &x)| row[action] * x)
            .sum()
    }

    /// v_θ(q) = max_a Σ_ω q(ω) u(θ, ω, a) for a buyer-frame vector `q`.
    /// Homogeneous of degree one, so `q` need not be normalized.
    pub fn value(&self, theta: usize, q: &[f64]) -> f64 {
        (0..self.n_actions())
            .map(|a| self.action_payoff(theta, q, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// v_θ(D_θ q) for an observer-frame vector `q`.
    pub fn observer_value(&self, theta: usize, q: &[f64]) -> f64 {
        self.value(theta, &self.transforms[theta].apply(q))
    }

    /// Value of a posterior along with the full argmax action set.
    pub fn value_function(&self, theta: usize, q: &[f64], frame: Frame) -> Valuation {
        let buyer_q;
        let q = match frame {
            Frame::Buyer => q,
            Frame::Observer => {
                buyer_q = self.transforms[theta].apply(q);
                &buyer_q
            }
        };
        let payoffs: Vec<f64> = (0..self.n_actions())
            .map(|a| self.action_payoff(theta, q, a))
            .collect();
        let value = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * (1.0 + value.abs());
        let argmax = payoffs
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= value - tol)
            .map(|(a, _)| a)
            .collect();
        Valuation { value, argmax }
    }

    /// ζ(θ) = E[max_a u | θ] − max_a E[u | θ].
    pub fn surplus(&self, theta: usize) -> f64 {
        let cond = self.conditional(theta);
        let informed: f64 = cond
            .iter()
            .enumerate()
            .map(|(w, &p)| {
                if p == 0.0 {
                    0.0
                } else {
                    p * self.data.u[theta][w]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .sum();
        (informed - self.value(theta, &cond)).max(0.0)
    }

    pub fn surpluses(&self) -> Vec<f64> {
        (0..self.n_types()).map(|t| self.surplus(t)).collect()
    }

    /// Σ_θ μ(θ) ζ(θ).
    pub fn full_surplus(&self) -> f64 {
        (0..self.n_types())
            .map(|t| self.type_mass[t] * self.surplus(t))
            .sum()
    }

    /// Bayesian update from an observer posterior to the type-θ posterior.
    ///
    /// Returns the normalized buyer posterior and the mass `1ᵀ D_θ q`.
    pub fn posterior_for_type(&self, theta: usize, q: &[f64]) -> Result<(Vec<f64>, f64)> {
        let scaled = self.transforms[theta].apply(q);
        let mass: f64 = scaled.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ZeroMass { theta });
        }
        Ok((scaled.iter().map(|x| x / mass).collect(), mass))
    }

    /// Same payoffs with a different joint distribution.
    pub fn with_mu(&self, mu: Vec<Vec<f64>>) -> Result<Self> {
        Self::try_from(ContextData {
            mu,
            ..self.data.clone()
        })
    }
}
