//! Two-phase dense tableau simplex.
//!
//! Rows are equilibrated by their largest coefficient and the objective by its
//! largest coefficient before pivoting. Entering columns are priced by most
//! negative reduced cost until either `dantzig_pivots` pivots have been made
//! or the objective stalls, after which Bland's rule guarantees termination.
//! The optimal basis is refactorized from the original matrix to recover the
//! primal point and the shadow prices.

use super::{Bound, LinearProgram, LpSolution, Relation, Sense, SolverOptions, Status};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// Consecutive non-improving pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 64;

/// Pivots between rebuilds of the tableau from the original rows: every pivot
/// for programs with at most `SMALL_ROWS` rows, otherwise `REINVERT_EVERY` or a
/// quarter of the row count, whichever is larger, since a rebuild costs about
/// as much as one pivot per row.
const REINVERT_EVERY: usize = 64;
const SMALL_ROWS: usize = 64;

/// Smallest pivot accepted by Bland's ratio test, relative to the column.
const RELATIVE_PIVOT: f64 = 1e-6;

/// A zero-level artificial whose row has no entry above this (rows are
/// equilibrated) marks a redundant row rather than a pivot.
const DRIVE_OUT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
enum Origin {
    Var { index: usize, sign: f64 },
    Slack,
    Artificial,
}

struct StandardForm {
    /// Equality rows over all columns (structural, slack, artificial).
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Internal minimization costs.
    c: Vec<f64>,
    origins: Vec<Origin>,
    /// Column forming the initial identity basis for each row.
    unit_col: Vec<usize>,
    row_sign: Vec<f64>,
    row_scale: Vec<f64>,
    obj_factor: f64,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.n_rows();
        let mut origins = Vec::new();
        for (j, v) in lp.variables.iter().enumerate() {
            origins.push(Origin::Var {
                index: j,
                sign: 1.0,
            });
            if v.bound == Bound::Free {
                origins.push(Origin::Var {
                    index: j,
                    sign: -1.0,
                });
            }
        }
        let n_struct = origins.len();
        let mut row_sign = vec![1.0; m];
        let mut row_scale = vec![1.0; m];
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        let mut slack_coef: Vec<Option<f64>> = Vec::with_capacity(m);
        for (i, con) in lp.constraints.iter().enumerate() {
            let mut row: Vec<f64> = origins
                .iter()
                .map(|o| match *o {
                    Origin::Var { index, sign } => sign * con.coeffs[index],
                    _ => 0.0,
                })
                .collect();
            let mut slack = match con.relation {
                Relation::Le => Some(1.0),
                Relation::Ge => Some(-1.0),
                Relation::Eq => None,
            };
            let mut rhs = con.rhs;
            let scale = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            row_scale[i] = scale;
            if rhs < 0.0 {
                row_sign[i] = -1.0;
                rhs = -rhs;
                for v in &mut row {
                    *v = -*v;
                }
                slack = slack.map(|s| -s);
            }
            for v in &mut row {
                *v /= scale;
            }
            rows.push(row);
            b.push(rhs / scale);
            slack_coef.push(slack);
        }
        // slack columns
        for (i, coef) in slack_coef.iter().enumerate() {
            if let Some(coef) = coef {
                origins.push(Origin::Slack);
                for (r, row) in rows.iter_mut().enumerate() {
                    row.push(if r == i { *coef } else { 0.0 });
                }
            }
        }
        // identity basis: slacks with +1, artificials elsewhere
        let mut unit_col = vec![usize::MAX; m];
        {
            let mut col = n_struct;
            for (i, coef) in slack_coef.iter().enumerate() {
                if let Some(coef) = coef {
                    if *coef > 0.0 {
                        unit_col[i] = col;
                    }
                    col += 1;
                }
            }
        }
        for i in 0..m {
            if unit_col[i] == usize::MAX {
                origins.push(Origin::Artificial);
                unit_col[i] = origins.len() - 1;
                for (r, row) in rows.iter_mut().enumerate() {
                    row.push(if r == i { 1.0 } else { 0.0 });
                }
            }
        }
        let cmax = lp.objective.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let cmax = if cmax > 0.0 { cmax } else { 1.0 };
        let sense = match lp.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        let obj_factor = sense / cmax;
        let c = origins
            .iter()
            .map(|o| match *o {
                Origin::Var { index, sign } => sign * lp.objective[index] * obj_factor,
                _ => 0.0,
            })
            .collect();
        Self {
            a: rows,
            b,
            c,
            origins,
            unit_col,
            row_sign,
            row_scale,
            obj_factor,
        }
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Original rows kept in the basis matrix (redundant rows get dropped).
    row_ids: Vec<usize>,
    ncols: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64]) {
        let n = self.ncols;
        let piv = self.rows[r][c];
        let prow: Vec<f64> = self.rows[r].iter().map(|v| v / piv).collect();
        let nz: Vec<usize> = (0..=n).filter(|&j| prow[j] != 0.0).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        }
        let f = reduced[c];
        if f != 0.0 {
            for &j in &nz {
                reduced[j] -= f * prow[j];
            }
            reduced[c] = 0.0;
        }
        self.rows[r] = prow;
        self.rows[r][c] = 1.0;
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let n = self.ncols;
        let mut d: Vec<f64> = cost.to_vec();
        d.push(0.0);
        for (row, &bj) in self.rows.iter().zip(&self.basis) {
            let cb = cost[bj];
            if cb != 0.0 {
                for j in 0..=n {
                    d[j] -= cb * row[j];
                }
            }
        }
        for &bj in &self.basis {
            d[bj] = 0.0;
        }
        d
    }

    /// Recomputes every tableau row and the reduced costs from an LU
    /// factorization of the current basis. Returns false if the basis is
    /// numerically singular.
    fn reinvert(&mut self, sf: &StandardForm, cost: &[f64], reduced: &mut [f64]) -> bool {
        let n = self.ncols;
        let m = self.rows.len();
        let bmat = DMatrix::from_fn(m, m, |r, k| sf.a[self.row_ids[r]][self.basis[k]]);
        let rhs = DMatrix::from_fn(m, n + 1, |r, j| {
            let i = self.row_ids[r];
            if j < n {
                sf.a[i][j]
            } else {
                sf.b[i]
            }
        });
        let lu = bmat.clone().lu();
        let Some(body) = lu.solve(&rhs) else {
            return false;
        };
        let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
        let Some(y) = bmat.transpose().lu().solve(&cb) else {
            return false;
        };
        for r in 0..m {
            for j in 0..=n {
                self.rows[r][j] = body[(r, j)];
            }
            self.rows[r][self.basis[r]] = 1.0;
        }
        for j in 0..n {
            let ya: f64 = (0..m).map(|r| y[r] * sf.a[self.row_ids[r]][j]).sum();
            reduced[j] = cost[j] - ya;
        }
        reduced[n] = -(0..m).map(|r| y[r] * sf.b[self.row_ids[r]]).sum::<f64>();
        for &bj in &self.basis {
            reduced[bj] = 0.0;
        }
        true
    }

    /// Smallest ratio, ties to the lowest basic column. Entries far below the
    /// column's largest in magnitude are skipped; they would otherwise win
    /// with a zero or huge ratio and leave a near-singular basis.
    fn ratio_test_bland(&self, col: usize, pivot_tol: f64) -> Option<usize> {
        let n = self.ncols;
        let colmax = self
            .rows
            .iter()
            .fold(0.0_f64, |acc, row| acc.max(row[col].abs()));
        let threshold = pivot_tol.max(RELATIVE_PIVOT * colmax);
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[col];
            if a <= threshold {
                continue;
            }
            let ratio = row[n].max(0.0) / a;
            match leave {
                None => leave = Some((i, ratio)),
                Some((li, lr)) => {
                    let tie = 1e-12 * (1.0 + lr.abs());
                    if ratio < lr - tie || (ratio <= lr + tie && self.basis[i] < self.basis[li]) {
                        leave = Some((i, ratio));
                    }
                }
            }
        }
        leave.map(|(i, _)| i)
    }

    /// Two passes: bound the step with rhs relaxed by the feasibility
    /// tolerance, then take the largest pivot among rows within that bound.
    fn ratio_test_harris(&self, col: usize, opts: &SolverOptions) -> Option<usize> {
        let n = self.ncols;
        let relax = opts.feasibility_tol;
        let mut bound = f64::INFINITY;
        for row in &self.rows {
            let a = row[col];
            if a > opts.pivot_tol {
                bound = bound.min((row[n].max(0.0) + relax) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[col];
            if a <= opts.pivot_tol || row[n].max(0.0) / a > bound {
                continue;
            }
            let better = match leave {
                None => true,
                Some((li, la)) => a > la || (a == la && self.basis[i] < self.basis[li]),
            };
            if better {
                leave = Some((i, a));
            }
        }
        leave.map(|(i, _)| i)
    }

    fn run(
        &mut self,
        sf: &StandardForm,
        cost: &[f64],
        reduced: &mut [f64],
        allowed: &[bool],
        bounded: bool,
        opts: &SolverOptions,
        pivots: &mut usize,
    ) -> Result<Outcome> {
        let n = self.ncols;
        let mut bland = false;
        let mut stall = 0usize;
        let mut reinverted = false;
        // columns without a usable pivot, set aside until the next pivot
        let mut rejected = vec![false; n];
        loop {
            if *pivots >= opts.max_pivots {
                return Err(Error::NumericFailure(format!(
                    "simplex exceeded {} pivots",
                    opts.max_pivots
                )));
            }
            if !bland && (*pivots >= opts.dantzig_pivots || stall > STALL_LIMIT) {
                bland = true;
            }
            let tol = opts.optimality_tol;
            let entering = if bland {
                (0..n).find(|&j| allowed[j] && !rejected[j] && reduced[j] < -tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..n {
                    if allowed[j]
                        && !rejected[j]
                        && reduced[j] < -tol
                        && best.is_none_or(|(_, d)| reduced[j] < d)
                    {
                        best = Some((j, reduced[j]));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Ok(Outcome::Optimal);
            };
            let leave = if bland {
                self.ratio_test_bland(col, opts.pivot_tol)
            } else {
                self.ratio_test_harris(col, opts)
            };
            let Some(row) = leave else {
                // a ray seen through accumulated roundoff may vanish once the
                // tableau is rebuilt from the original rows
                if !reinverted && self.reinvert(sf, cost, reduced) {
                    reinverted = true;
                    continue;
                }
                // a bounded objective has no rays, so the column is roundoff
                if bounded {
                    rejected[col] = true;
                    continue;
                }
                return Ok(Outcome::Unbounded);
            };
            let before = reduced[n];
            self.pivot(row, col, reduced);
            *pivots += 1;
            reinverted = false;
            rejected.fill(false);
            let m = self.rows.len();
            if m <= SMALL_ROWS || *pivots % REINVERT_EVERY.max(m / 4) == 0 {
                self.reinvert(sf, cost, reduced);
            }
            if reduced[n] > before + 1e-12 * (1.0 + before.abs()) {
                stall = 0;
            } else {
                stall += 1;
            }
        }
    }
}

/// Solves `lp` with default tolerances.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &SolverOptions::default())
}

/// Solves `lp`; infeasible and unbounded programs are reported through
/// [`LpSolution::status`], pivoting failures as [`Error::NumericFailure`].
pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    lp.check()?;
    let sf = StandardForm::build(lp);
    let m = sf.a.len();
    let ncols = sf.origins.len();
    let mut tab = Tableau {
        rows: sf
            .a
            .iter()
            .zip(&sf.b)
            .map(|(row, &bi)| {
                let mut r = row.clone();
                r.push(bi);
                r
            })
            .collect(),
        basis: sf.unit_col.clone(),
        row_ids: (0..m).collect(),
        ncols,
    };
    let is_art: Vec<bool> = sf
        .origins
        .iter()
        .map(|o| matches!(o, Origin::Artificial))
        .collect();
    let mut pivots = 0usize;

    if is_art.iter().any(|&a| a) {
        let phase1_cost: Vec<f64> = is_art.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        let mut reduced = tab.reduced_costs(&phase1_cost);
        let allowed = vec![true; ncols];
        tab.run(
            &sf,
            &phase1_cost,
            &mut reduced,
            &allowed,
            true,
            opts,
            &mut pivots,
        )?;
        let infeasibility: f64 = tab
            .rows
            .iter()
            .zip(&tab.basis)
            .filter(|(_, &bj)| is_art[bj])
            .map(|(row, _)| row[ncols].max(0.0))
            .sum();
        let bmax = sf.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        if infeasibility > opts.feasibility_tol * bmax {
            return Ok(LpSolution::not_optimal(Status::Infeasible, pivots));
        }
        // drive zero-level artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.rows.len() {
            if !is_art[tab.basis[r]] {
                r += 1;
                continue;
            }
            let candidate = (0..ncols)
                .filter(|&j| !is_art[j] && tab.rows[r][j].abs() > DRIVE_OUT_TOL)
                .max_by(|&a, &b| tab.rows[r][a].abs().total_cmp(&tab.rows[r][b].abs()));
            match candidate {
                Some(j) => {
                    let mut dummy = vec![0.0; ncols + 1];
                    tab.pivot(r, j, &mut dummy);
                    pivots += 1;
                    r += 1;
                }
                None => {
                    // the redundant row is the artificial's own, which need
                    // not be the one at this tableau position
                    let art = tab.basis.remove(r);
                    tab.rows.remove(r);
                    let own = sf
                        .unit_col
                        .iter()
                        .position(|&c| c == art)
                        .expect("artificial row");
                    tab.row_ids.retain(|&i| i != own);
                }
            }
        }
    }

    let allowed: Vec<bool> = is_art.iter().map(|&a| !a).collect();
    let mut reduced = tab.reduced_costs(&sf.c);
    match tab.run(&sf, &sf.c, &mut reduced, &allowed, false, opts, &mut pivots)? {
        Outcome::Unbounded => return Ok(LpSolution::not_optimal(Status::Unbounded, pivots)),
        Outcome::Optimal => {}
    }

    // refactorize the optimal basis on the original (scaled) rows
    let bmat: Vec<Vec<f64>> = tab
        .row_ids
        .iter()
        .map(|&i| tab.basis.iter().map(|&j| sf.a[i][j]).collect())
        .collect();
    let bvec: Vec<f64> = tab.row_ids.iter().map(|&i| sf.b[i]).collect();
    let cb: Vec<f64> = tab.basis.iter().map(|&j| sf.c[j]).collect();
    let x_basic = match linalg::solve(&bmat, &bvec, 1e-14) {
        Some(x) if x.iter().all(|&v| v >= -1e-7) => x,
        _ => tab.rows.iter().map(|row| row[ncols]).collect(),
    };
    let y_internal = linalg::solve(&linalg::transpose(&bmat), &cb, 1e-14).unwrap_or_else(|| {
        // shadow prices can be read off the initial identity columns
        tab.row_ids
            .iter()
            .map(|&i| sf.c[sf.unit_col[i]] - reduced[sf.unit_col[i]])
            .collect()
    });

    let mut x_std = vec![0.0; ncols];
    for (r, &j) in tab.basis.iter().enumerate() {
        x_std[j] = x_basic[r].max(0.0);
    }
    let mut primal = vec![0.0; lp.n_vars()];
    for (j, o) in sf.origins.iter().enumerate() {
        if let Origin::Var { index, sign } = *o {
            primal[index] += sign * x_std[j];
        }
    }
    let mut dual = vec![0.0; lp.n_rows()];
    for (r, &i) in tab.row_ids.iter().enumerate() {
        dual[i] = y_internal[r] * sf.row_sign[i] / sf.row_scale[i] / sf.obj_factor;
    }
    let xmax = primal.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let violation = lp.max_violation(&primal);
    if violation > 1e-6 * xmax {
        return Err(Error::NumericFailure(format!(
            "optimal basis violates its constraints by {violation:.3e}"
        )));
    }
    let objective = lp.objective_value(&primal);
    let basis = lp
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            if c.relation == Relation::Eq {
                return true;
            }
            let lhs = linalg::dot(&c.coeffs, &primal);
            let scale = c.coeffs.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
            (lhs - c.rhs).abs() <= opts.feasibility_tol * (scale + c.rhs.abs())
        })
        .map(|(i, _)| i)
        .collect();
    Ok(LpSolution {
        status: Status::Optimal,
        primal,
        dual,
        objective,
        basis,
        pivots,
    })
}

/// Re-solves `lp` with some variables frozen at given values and returns a
/// vertex of the restricted polyhedron (reported over all variables).
pub fn restrict_and_vertex(lp: &LinearProgram, fixed: &[(usize, f64)]) -> Result<LpSolution> {
    lp.check()?;
    let mut frozen = vec![None; lp.n_vars()];
    for &(j, v) in fixed {
        if j >= lp.n_vars() {
            return Err(Error::InvalidInput(format!("no variable {j}")));
        }
        if lp.variables[j].bound == Bound::NonNegative && v < 0.0 {
            return Err(Error::Infeasible);
        }
        frozen[j] = Some(v);
    }
    let keep: Vec<usize> = (0..lp.n_vars()).filter(|&j| frozen[j].is_none()).collect();
    let mut sub = LinearProgram::new(lp.sense);
    for &j in &keep {
        sub.add_variable(
            lp.variables[j].name.clone(),
            lp.variables[j].bound,
            lp.objective[j],
        );
    }
    for c in &lp.constraints {
        let shift: f64 = frozen
            .iter()
            .zip(&c.coeffs)
            .filter_map(|(f, a)| f.map(|v| v * a))
            .sum();
        let terms: Vec<(usize, f64)> = keep
            .iter()
            .enumerate()
            .map(|(k, &j)| (k, c.coeffs[j]))
            .collect();
        sub.add_constraint(c.name.clone(), &terms, c.relation, c.rhs - shift);
    }
    let sol = solve(&sub)?;
    match sol.status {
        Status::Infeasible => return Err(Error::Infeasible),
        Status::Unbounded => return Err(Error::Unbounded),
        Status::Optimal => {}
    }
    let mut primal: Vec<f64> = frozen.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (k, &j) in keep.iter().enumerate() {
        primal[j] = sol.primal[k];
    }
    let objective = lp.objective_value(&primal);
    Ok(LpSolution {
        primal,
        objective,
        ..sol
    })
}
