//! Finite posterior sets: the vertices of the common refinement of every
//! type's linearity regions, lattice refinements of them, and the
//! decomposition of the prior through an arbitrary posterior.

use serde::{Deserialize, Serialize};

use crate::context::Context;
use crate::error::{Error, Result};
use crate::linalg;

/// L∞ distance under which two posteriors are considered the same point.
pub const DEDUP_TOL: f64 = 1e-9;

/// Default cap on the number of linear systems tried by [`interesting_posteriors`].
pub const DEFAULT_SYSTEM_LIMIT: usize = 2_000_000;

/// Cap on lattice size once the support has four or more states.
pub const GRID_POINT_LIMIT: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Qstar,
    Grid,
    Union,
}

/// How indifference hyperplanes are mapped into the observer frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    /// Scale by μ(θ) (signals independent of the type).
    Independent,
    /// Scale coordinate ω by μ(θ|ω).
    Correlated,
}

/// A deduplicated list of normalized posteriors over Ω.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSet {
    points: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl PosteriorSet {
    /// Builds a set from arbitrary points, sorting lexicographically and
    /// dropping near-duplicates.
    pub fn new(points: Vec<Vec<f64>>, provenance: Provenance) -> Self {
        Self {
            points: dedup_sorted(points),
            provenance,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, q: &[f64]) -> Option<usize> {
        self.points
            .iter()
            .position(|p| linalg::max_abs_diff(p, q) <= DEDUP_TOL)
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        self.position(q).is_some()
    }

    pub fn union(&self, other: &PosteriorSet) -> PosteriorSet {
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        PosteriorSet::new(pts, Provenance::Union)
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn dedup_sorted(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| lex_cmp(a, b));
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !kept
            .iter()
            .any(|k| linalg::max_abs_diff(k, &p) <= DEDUP_TOL)
        {
            kept.push(p);
        }
    }
    kept
}

/// Locus where type θ is indifferent between two actions, in observer-frame
/// coordinates: `normal · q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndifferenceHyperplane {
    pub theta: usize,
    pub actions: (usize, usize),
    pub normal: Vec<f64>,
}

/// All nonzero indifference hyperplanes of the context.
pub fn indifference_hyperplanes(ctx: &Context, corr: Correlation) -> Vec<IndifferenceHyperplane> {
    let m = ctx.n_states();
    let mut out = Vec::new();
    for theta in 0..ctx.n_types() {
        let scale: Vec<f64> = match corr {
            Correlation::Independent => vec![ctx.type_mass(theta); m],
            Correlation::Correlated => ctx.belief_transform(theta).diag.clone(),
        };
        for a in 0..ctx.n_actions() {
            for b in a + 1..ctx.n_actions() {
                let normal: Vec<f64> = (0..m)
                    .map(|w| (ctx.payoff(theta, w, a) - ctx.payoff(theta, w, b)) * scale[w])
                    .collect();
                let size = normal.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
                if size > 1e-12 {
                    out.push(IndifferenceHyperplane {
                        theta,
                        actions: (a, b),
                        normal,
                    });
                }
            }
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Unit-scaled, sign-canonical copy of `v` for duplicate detection.
fn canonical_direction(v: &[f64]) -> Vec<f64> {
    let size = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let first = v
        .iter()
        .copied()
        .find(|x| x.abs() > 1e-12 * size)
        .unwrap_or(1.0);
    let s = first.signum() * size;
    v.iter().map(|x| x / s).collect()
}

/// The interesting posteriors Q* with the default system cap.
pub fn interesting_posteriors(ctx: &Context, corr: Correlation) -> Result<PosteriorSet> {
    interesting_posteriors_with_limit(ctx, corr, DEFAULT_SYSTEM_LIMIT)
}

/// Vertices of the arrangement of indifference hyperplanes and simplex facets
/// (restricted to the support of the prior), plus the corners and the prior.
pub fn interesting_posteriors_with_limit(
    ctx: &Context,
    corr: Correlation,
    limit: usize,
) -> Result<PosteriorSet> {
    let m = ctx.n_states();
    let support = ctx.support();
    let ms = support.len();

    // constraint normals over support coordinates
    let mut normals: Vec<Vec<f64>> = Vec::new();
    let mut seen: Vec<Vec<f64>> = Vec::new();
    for h in indifference_hyperplanes(ctx, corr) {
        let restricted: Vec<f64> = support.iter().map(|&w| h.normal[w]).collect();
        let size = restricted.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if size <= 1e-12 {
            continue;
        }
        let dir = canonical_direction(&restricted);
        if seen.iter().any(|s| linalg::max_abs_diff(s, &dir) <= 1e-12) {
            continue;
        }
        seen.push(dir);
        normals.push(seen.last().unwrap().clone());
    }
    for k in 0..ms {
        let mut e = vec![0.0; ms];
        e[k] = 1.0;
        normals.push(e);
    }

    let pick = ms.saturating_sub(1);
    let systems = binomial(normals.len(), pick);
    if systems > limit {
        return Err(Error::ComplexityLimit {
            what: "vertex enumeration systems",
            count: systems,
            limit,
        });
    }

    let embed = |local: &[f64]| -> Vec<f64> {
        let mut q = vec![0.0; m];
        for (k, &w) in support.iter().enumerate() {
            q[w] = local[k];
        }
        q
    };

    let mut points = Vec::new();
    for k in 0..ms {
        let mut e = vec![0.0; ms];
        e[k] = 1.0;
        points.push(embed(&e));
    }
    points.push(ctx.prior().to_vec());

    if pick > 0 {
        let mut idx: Vec<usize> = (0..pick).collect();
        let total = normals.len();
        let mut rhs = vec![0.0; ms];
        rhs[pick] = 1.0;
        loop {
            let mut a: Vec<Vec<f64>> = idx.iter().map(|&i| normals[i].clone()).collect();
            a.push(vec![1.0; ms]);
            if let Some(x) = linalg::solve(&a, &rhs, 1e-12) {
                if x.iter().all(|&v| v >= -DEDUP_TOL && v.is_finite()) {
                    let clipped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
                    let s: f64 = clipped.iter().sum();
                    let local: Vec<f64> = clipped.iter().map(|v| v / s).collect();
                    points.push(embed(&local));
                }
            }
            // next combination
            let mut i = pick;
            loop {
                if i == 0 {
                    return Ok(PosteriorSet::new(points, Provenance::Qstar));
                }
                i -= 1;
                if idx[i] < total - pick + i {
                    idx[i] += 1;
                    for j in i + 1..pick {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
    Ok(PosteriorSet::new(points, Provenance::Qstar))
}

/// Number of lattice points with denominator `k` in a simplex with `dim` vertices.
pub fn lattice_size(dim: usize, k: usize) -> usize {
    if dim == 0 {
        return 0;
    }
    binomial(k + dim - 1, dim - 1)
}

fn check_grid_guard(dim: usize, k: usize) -> Result<()> {
    let (count, limit) = match dim {
        0 | 1 => (0, 1),
        2 => (k, 200),
        3 => (k, 40),
        _ => (lattice_size(dim, k), GRID_POINT_LIMIT),
    };
    if count > limit {
        return Err(Error::ComplexityLimit {
            what: "grid refinement",
            count,
            limit,
        });
    }
    Ok(())
}

/// Calls `f` on every composition of `k` into `dim` nonnegative parts.
fn for_each_composition(dim: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(parts: &mut Vec<usize>, left: usize, dim: usize, f: &mut impl FnMut(&[usize])) {
        if parts.len() + 1 == dim {
            parts.push(left);
            f(parts);
            parts.pop();
            return;
        }
        for c in (0..=left).rev() {
            parts.push(c);
            rec(parts, left - c, dim, f);
            parts.pop();
        }
    }
    if dim == 0 {
        return;
    }
    rec(&mut Vec::with_capacity(dim), k, dim, f);
}

/// Lattice points with denominator `k` on the simplex over `support`
/// (embedded in `m` coordinates).
pub fn lattice_points(m: usize, support: &[usize], k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "grid resolution must be positive".into(),
        ));
    }
    check_grid_guard(support.len(), k)?;
    let mut out = Vec::with_capacity(lattice_size(support.len(), k));
    for_each_composition(support.len(), k, &mut |parts| {
        let mut q = vec![0.0; m];
        for (&w, &c) in support.iter().zip(parts) {
            q[w] = c as f64 / k as f64;
        }
        out.push(q);
    });
    Ok(out)
}

/// `base` together with every lattice point of denominator `k` on the simplex
/// of the coordinates `base` uses.
pub fn grid_refinement(base: &PosteriorSet, k: usize) -> Result<PosteriorSet> {
    let Some(m) = base.points().first().map(Vec::len) else {
        return Err(Error::InvalidInput(
            "grid refinement of an empty set".into(),
        ));
    };
    let support: Vec<usize> = (0..m)
        .filter(|&w| base.points().iter().any(|q| q[w] > 0.0))
        .collect();
    let grid = lattice_points(m, &support, k)?;
    // lattice points are distinct by construction; only base points can collide
    let extra: Vec<Vec<f64>> = base
        .points()
        .iter()
        .filter(|q| {
            let snapped: Vec<f64> = q
                .iter()
                .map(|&x| (x * k as f64).round() / k as f64)
                .collect();
            let on_lattice = (snapped.iter().sum::<f64>() - 1.0).abs() < 1e-12;
            !(on_lattice && linalg::max_abs_diff(&snapped, q) <= DEDUP_TOL)
        })
        .cloned()
        .collect();
    let mut points = grid;
    points.extend(extra);
    points.sort_by(|a, b| lex_cmp(a, b));
    Ok(PosteriorSet {
        points,
        provenance: Provenance::Union,
    })
}

/// Writes `p = γ q + (1 − γ) r` with `r` on the boundary of the simplex, on the
/// ray from `q` through `p`.
pub fn decompose_through_prior(p: &[f64], q: &[f64]) -> Result<(f64, Vec<f64>)> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput("posterior length mismatch".into()));
    }
    if p.iter().zip(q).any(|(&pw, &qw)| pw <= 0.0 && qw > 0.0) {
        return Err(Error::DegeneratePrior);
    }
    if linalg::max_abs_diff(p, q) <= 1e-15 {
        return Ok((0.0, p.to_vec()));
    }
    let mut step = f64::INFINITY;
    let mut hit = usize::MAX;
    for (w, (&pw, &qw)) in p.iter().zip(q).enumerate() {
        if qw > pw {
            let s = pw / (qw - pw);
            if s < step {
                step = s;
                hit = w;
            }
        }
    }
    if !step.is_finite() {
        return Ok((0.0, p.to_vec()));
    }
    let mut r: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pw, &qw)| (pw + step * (pw - qw)).max(0.0))
        .collect();
    r[hit] = 0.0;
    Ok((step / (1.0 + step), r))
}
