//! Revenue-maximization programs over a finite set of posteriors.
//!
//! Rows are laid out identically whatever posteriors are offered:
//! participation per type, incentive per ordered pair of distinct types, and
//! prior consistency per type and support state. Each posterior contributes a
//! group of columns per type, so large candidate sets can be priced against
//! the shadow prices of a small master program instead of being materialized.

use serde::Serialize;

use super::{Contract, Menu, MenuKind, Signal, SUPPORT_TOL};
use crate::context::Context;
use crate::error::{Error, Result};
use crate::geometry::PosteriorSet;
use crate::lp::{self, Bound, LinearProgram, LpSolution, Relation, Sense, Status};

/// Candidate sets up to this many posteriors are solved in one program.
pub const DIRECT_SOLVE_LIMIT: usize = 2_000;

/// Posteriors added per column-generation round.
const BATCH: usize = 400;
const MAX_ROUNDS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    /// Fixed prices with buyer-frame values; exact only for independent signals.
    IndependentMappings,
    /// Fixed prices with values read through each type's belief transform.
    Mappings,
    /// Per-signal payments; `nonnegative` forbids payments to the buyer.
    Outcomes { nonnegative: bool },
}

impl Program {
    fn kind(self) -> MenuKind {
        match self {
            Program::IndependentMappings | Program::Mappings => MenuKind::Mappings,
            Program::Outcomes { .. } => MenuKind::Outcomes,
        }
    }

    /// Value coefficient of posterior `q` for type θ in this program's units.
    fn value(self, ctx: &Context, theta: usize, q: &[f64]) -> f64 {
        match self {
            Program::IndependentMappings => ctx.value(theta, q),
            Program::Mappings => ctx.observer_value(theta, q) / ctx.type_mass(theta),
            Program::Outcomes { .. } => ctx.observer_value(theta, q),
        }
    }
}

struct Layout {
    n: usize,
    support: Vec<usize>,
}

impl Layout {
    fn new(ctx: &Context) -> Self {
        Self {
            n: ctx.n_types(),
            support: ctx.support(),
        }
    }

    fn ir(&self, theta: usize) -> usize {
        theta
    }

    /// Row of "θ prefers its own contract to the one meant for `other`".
    fn ic(&self, theta: usize, other: usize) -> usize {
        let k = if other < theta { other } else { other - 1 };
        self.n + theta * (self.n - 1) + k
    }

    fn feas(&self, theta: usize, k: usize) -> usize {
        self.n * self.n + theta * self.support.len() + k
    }
}

struct ColumnSpec {
    name: String,
    bound: Bound,
    cost: f64,
    terms: Vec<(usize, f64)>,
}

fn base_program(ctx: &Context, program: Program, layout: &Layout) -> LinearProgram {
    let n = layout.n;
    let labels = ctx.type_labels();
    let mut lp = LinearProgram::new(Sense::Maximize);
    for t in 0..n {
        let rhs = program.value(ctx, t, ctx.prior());
        lp.add_constraint(format!("IR[{}]", labels[t]), &[], Relation::Ge, rhs);
    }
    for t in 0..n {
        for s in (0..n).filter(|&s| s != t) {
            lp.add_constraint(
                format!("IC[{},{}]", labels[t], labels[s]),
                &[],
                Relation::Ge,
                0.0,
            );
        }
    }
    let states = ctx.state_labels();
    for t in 0..n {
        for &w in &layout.support {
            lp.add_constraint(
                format!("F[{},{}]", labels[t], states[w]),
                &[],
                Relation::Eq,
                ctx.prior()[w],
            );
        }
    }
    if program.kind() == MenuKind::Mappings {
        for t in 0..n {
            let mut terms = vec![(layout.ir(t), -1.0)];
            for s in (0..n).filter(|&s| s != t) {
                terms.push((layout.ic(t, s), -1.0));
                terms.push((layout.ic(s, t), 1.0));
            }
            lp.add_column(
                format!("t[{}]", labels[t]),
                Bound::NonNegative,
                ctx.type_mass(t),
                &terms,
            );
        }
    }
    lp
}

/// Columns contributed by offering posterior `q` (index `qi`) to type θ.
fn point_columns(
    ctx: &Context,
    program: Program,
    layout: &Layout,
    theta: usize,
    q: &[f64],
    qi: usize,
    values: &[f64],
) -> Vec<ColumnSpec> {
    let n = layout.n;
    let label = &ctx.type_labels()[theta];
    let mut x_terms = vec![(layout.ir(theta), values[theta])];
    for s in (0..n).filter(|&s| s != theta) {
        x_terms.push((layout.ic(theta, s), values[theta]));
        x_terms.push((layout.ic(s, theta), -values[s]));
    }
    for (k, &w) in layout.support.iter().enumerate() {
        if q[w] != 0.0 {
            x_terms.push((layout.feas(theta, k), q[w]));
        }
    }
    let mut cols = vec![ColumnSpec {
        name: format!("x[{label}][{qi}]"),
        bound: Bound::NonNegative,
        cost: 0.0,
        terms: x_terms,
    }];
    if let Program::Outcomes { nonnegative } = program {
        let mass = |t: usize| ctx.belief_transform(t).mass(q);
        let own = mass(theta);
        let mut terms = vec![(layout.ir(theta), -own)];
        for s in (0..n).filter(|&s| s != theta) {
            terms.push((layout.ic(theta, s), -own));
            terms.push((layout.ic(s, theta), mass(s)));
        }
        cols.push(ColumnSpec {
            name: format!("tt[{label}][{qi}]"),
            bound: if nonnegative {
                Bound::NonNegative
            } else {
                Bound::Free
            },
            cost: own,
            terms,
        });
    }
    cols
}

fn point_values(ctx: &Context, program: Program, q: &[f64]) -> Vec<f64> {
    (0..ctx.n_types())
        .map(|t| program.value(ctx, t, q))
        .collect()
}

/// Materializes the program over every posterior of `points`.
pub fn build_program(ctx: &Context, program: Program, points: &[Vec<f64>]) -> LinearProgram {
    let layout = Layout::new(ctx);
    let mut lp = base_program(ctx, program, &layout);
    for (qi, q) in points.iter().enumerate() {
        let values = point_values(ctx, program, q);
        for t in 0..layout.n {
            for c in point_columns(ctx, program, &layout, t, q, qi, &values) {
                lp.add_column(c.name, c.bound, c.cost, &c.terms);
            }
        }
    }
    lp
}

/// An optimal menu together with the program that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Solved {
    pub program: Program,
    pub menu: Menu,
    pub revenue: f64,
    /// The final program (the master program when columns were generated).
    #[serde(skip)]
    pub lp: LinearProgram,
    #[serde(skip)]
    pub solution: LpSolution,
    /// Posteriors with columns in `lp`, in column-name index order.
    #[serde(skip)]
    pub points: Vec<Vec<f64>>,
    /// Column-generation rounds (zero for a direct solve).
    pub rounds: usize,
}

fn extract_menu(
    ctx: &Context,
    program: Program,
    lp: &LinearProgram,
    sol: &LpSolution,
    points: &[Vec<f64>],
) -> Menu {
    let n = ctx.n_types();
    let per_point = match program {
        Program::Outcomes { .. } => 2,
        _ => 1,
    };
    let offset = match program {
        Program::Outcomes { .. } => 0,
        _ => n,
    };
    debug_assert_eq!(lp.n_vars(), offset + points.len() * n * per_point);
    let mut contracts: Vec<Contract> = (0..n)
        .map(|t| Contract {
            signals: Vec::new(),
            price: if offset > 0 { sol.primal[t] } else { 0.0 },
        })
        .collect();
    for (qi, q) in points.iter().enumerate() {
        for (t, contract) in contracts.iter_mut().enumerate() {
            let j = offset + (qi * n + t) * per_point;
            let x = sol.primal[j];
            let tt = if per_point == 2 {
                sol.primal[j + 1]
            } else {
                0.0
            };
            if x > SUPPORT_TOL || tt.abs() > SUPPORT_TOL {
                contract.signals.push(Signal {
                    posterior: q.clone(),
                    weight: x.max(0.0),
                    scaled_payment: tt,
                    payment: None,
                });
            }
        }
    }
    Menu {
        kind: program.kind(),
        contracts,
    }
}

fn solve_direct(ctx: &Context, program: Program, points: Vec<Vec<f64>>) -> Result<Solved> {
    let lp = build_program(ctx, program, &points);
    let solution = lp::solve(&lp)?;
    match solution.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(Error::NumericFailure(
                "revenue program reported infeasible".into(),
            ))
        }
        Status::Unbounded => {
            return Err(Error::NumericFailure(
                "revenue program reported unbounded".into(),
            ))
        }
    }
    let menu = extract_menu(ctx, program, &lp, &solution, &points);
    Ok(Solved {
        program,
        menu,
        revenue: solution.objective,
        lp,
        solution,
        points,
        rounds: 0,
    })
}

/// Solves `program` over the candidate posteriors `q`, generating columns
/// when the set is larger than [`DIRECT_SOLVE_LIMIT`].
pub fn solve_program(ctx: &Context, program: Program, q: &PosteriorSet) -> Result<Solved> {
    solve_program_with_limit(ctx, program, q, DIRECT_SOLVE_LIMIT)
}

fn solve_program_with_limit(
    ctx: &Context,
    program: Program,
    q: &PosteriorSet,
    direct_limit: usize,
) -> Result<Solved> {
    if q.len() <= direct_limit {
        return solve_direct(ctx, program, q.points().to_vec());
    }
    let layout = Layout::new(ctx);
    let m = ctx.n_states();
    // seed: corners and the prior keep the master feasible
    let mut seeds: Vec<Vec<f64>> = layout
        .support
        .iter()
        .map(|&w| {
            let mut e = vec![0.0; m];
            e[w] = 1.0;
            e
        })
        .collect();
    seeds.push(ctx.prior().to_vec());
    let mut active = vec![false; q.len()];
    let mut order: Vec<usize> = Vec::new();
    for s in &seeds {
        if let Some(i) = q.position(s) {
            if !active[i] {
                active[i] = true;
                order.push(i);
            }
        }
    }
    if !q.contains(ctx.prior()) {
        return Err(Error::InvalidInput(
            "candidate posteriors must contain the prior".into(),
        ));
    }
    let cost_scale = ctx.type_masses().iter().fold(1.0_f64, |acc, &v| acc.max(v));
    let tol = 1e-9 * cost_scale;
    for round in 1..=MAX_ROUNDS {
        let points: Vec<Vec<f64>> = order.iter().map(|&i| q.points()[i].clone()).collect();
        let mut solved = solve_direct(ctx, program, points)?;
        let y = &solved.solution.dual;
        let mut violators: Vec<(f64, usize)> = Vec::new();
        for (i, p) in q.points().iter().enumerate() {
            if active[i] {
                continue;
            }
            let values = point_values(ctx, program, p);
            let mut worst = 0.0_f64;
            for t in 0..layout.n {
                for c in point_columns(ctx, program, &layout, t, p, 0, &values) {
                    let rc = c.cost - c.terms.iter().map(|&(r, a)| y[r] * a).sum::<f64>();
                    let score = match c.bound {
                        Bound::NonNegative => rc,
                        Bound::Free => rc.abs(),
                    };
                    worst = worst.max(score);
                }
            }
            if worst > tol {
                violators.push((worst, i));
            }
        }
        if violators.is_empty() {
            solved.rounds = round;
            return Ok(solved);
        }
        violators.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in violators.iter().take(BATCH) {
            active[i] = true;
            order.push(i);
        }
    }
    Err(Error::NumericFailure(format!(
        "column generation did not converge in {MAX_ROUNDS} rounds"
    )))
}

/// Optimal fixed-price menu over `q`. Independent contexts use buyer-frame
/// values directly; otherwise each type reads posteriors through its belief
/// transform.
pub fn solve_pricing_mappings(ctx: &Context, q: &PosteriorSet) -> Result<Solved> {
    let program = if ctx.is_independent(1e-12) {
        Program::IndependentMappings
    } else {
        Program::Mappings
    };
    solve_program(ctx, program, q)
}

/// Optimal per-signal-payment menu over `q`.
pub fn solve_pricing_outcomes(
    ctx: &Context,
    q: &PosteriorSet,
    nonnegative_transfers: bool,
) -> Result<Solved> {
    solve_program(
        ctx,
        Program::Outcomes {
            nonnegative: nonnegative_transfers,
        },
        q,
    )
}
