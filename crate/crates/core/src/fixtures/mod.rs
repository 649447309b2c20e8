//! Reference contexts and protocols with known answers.

use crate::context::{Context, ContextData};
use crate::protocol::{ProtocolTree, TreeBuilder};

mod suite;
pub use suite::*;

fn labels(prefix: &str, range: impl Iterator<Item = usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

fn build(
    theta: Vec<String>,
    omega: Vec<String>,
    actions: Vec<String>,
    mu: Vec<Vec<f64>>,
    u: Vec<Vec<Vec<f64>>>,
) -> Context {
    Context::try_from(ContextData {
        theta,
        omega,
        actions,
        mu,
        u,
    })
    .expect("fixture context is valid")
}

/// Two types guessing a binary state; type θ earns z_θ ∈ {3, 5} for a
/// correct guess and nothing otherwise.
pub fn lockbox_with(mu: Vec<Vec<f64>>) -> Context {
    let z = [3.0, 5.0];
    let u = z
        .iter()
        .map(|&zt| {
            (0..2)
                .map(|w| (0..2).map(|a| if a == w { zt } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    build(
        labels("", 1..3),
        labels("", 0..2),
        labels("guess", 0..2),
        mu,
        u,
    )
}

/// Correlated lockbox: full rank, so every surplus can be extracted.
pub fn lockbox() -> Context {
    lockbox_with(vec![vec![0.2, 0.3], vec![0.3, 0.2]])
}

/// Lockbox with uniform (independent) joint distribution.
pub fn uniform_lockbox() -> Context {
    lockbox_with(vec![vec![0.25, 0.25], vec![0.25, 0.25]])
}

/// Uniform lockbox nudged to full rank.
pub fn perturbed_lockbox() -> Context {
    lockbox_with(vec![vec![0.25001, 0.24999], vec![0.24999, 0.25001]])
}

/// Binary state, action 0 pays ω and action 1 pays 1 − 9ω, with mild
/// correlation between state and type.
pub fn separation() -> Context {
    build(
        labels("", 0..2),
        labels("", 0..2),
        labels("a", 0..2),
        vec![vec![0.3, 0.2], vec![0.2, 0.3]],
        vec![vec![vec![0.0, 1.0], vec![1.0, -8.0]]; 2],
    )
}

/// Two-stage protocol on [`separation`]: left pays 0.533 for full
/// information; right sends ω = 1 to a leaf with probability 5/6, otherwise
/// asks 0.8 and then reveals ω.
pub fn separation_protocol() -> (Context, ProtocolTree) {
    let ctx = separation();
    let mut b = TreeBuilder::new(ctx.state_labels());
    let reveal = |b: &mut TreeBuilder, name: &str, leaves: [&str; 2]| {
        let l0 = b.leaf();
        b.name(l0, leaves[0]);
        let l1 = b.leaf();
        b.name(l1, leaves[1]);
        let s = b.seller(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![l0, l1]);
        b.name(s, name)
    };
    let s1 = reveal(&mut b, "s1", ["l1", "l2"]);
    let t1 = b.transfer(0.533, s1);
    b.name(t1, "t1");
    let s3 = reveal(&mut b, "s3", ["l3", "l4"]);
    let t2 = b.transfer(0.8, s3);
    b.name(t2, "t2");
    let l5 = b.leaf();
    b.name(l5, "l5");
    let s2 = b.seller(
        vec![vec![1.0, 0.0], vec![1.0 / 6.0, 5.0 / 6.0]],
        vec![t2, l5],
    );
    b.name(s2, "s2");
    let root = b.buyer(vec!["left".into(), "right".into()], vec![t1, s2]);
    b.name(root, "root");
    let tree = b.build(root).expect("separation protocol is a valid tree");
    (ctx, tree)
}

/// Actions whose upper envelope interpolates the points `(q, v)` on [0, 1]
/// (q = probability of state 1), padded to `width` actions.
fn actions_from_breakpoints(points: &[(f64, f64)], width: usize) -> Vec<Vec<f64>> {
    let mut lines: Vec<(f64, f64)> = points
        .windows(2)
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let slope = (y1 - y0) / (x1 - x0);
            (y0 - slope * x0, y0 + slope * (1.0 - x0))
        })
        .collect();
    while lines.len() < width {
        lines.push(lines[0]);
    }
    // rows ω ∈ {0, 1}, columns actions
    vec![
        lines.iter().map(|l| l.0).collect(),
        lines.iter().map(|l| l.1).collect(),
    ]
}

/// Staircase valuations where the optimal menu needs θ+1 signals for type θ:
/// v_θ is zero up to 1 − θδ and takes the value δ^(θ+k−1) at 1 − kδ for
/// k < θ. Type masses fall geometrically at rate `eps`.
pub fn staircase(n: usize, delta: f64, eps: f64) -> Context {
    let mut u = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    for theta in 1..=n {
        let mut pts = vec![(0.0, 0.0), (1.0 - theta as f64 * delta, 0.0)];
        for k in (0..theta).rev() {
            pts.push((1.0 - k as f64 * delta, delta.powi((theta + k) as i32 - 1)));
        }
        u.push(actions_from_breakpoints(&pts, n + 1));
        masses.push(eps.powi(theta as i32 - 1) * (1.0 - eps) / (1.0 - eps.powi(n as i32)));
    }
    let mu = (0..2)
        .map(|_| masses.iter().map(|m| 0.5 * m).collect())
        .collect();
    build(
        labels("", 1..n + 1),
        labels("", 0..2),
        labels("a", 0..n + 1),
        mu,
        u,
    )
}

/// Independent context where a single price earns O(1) but fixed-price menus
/// earn Ω(n): v_θ is zero up to 1 − T^−θ and rises to 2^θ at 1.
pub fn envelope_gap(n: usize, t: f64) -> Context {
    let norm = 1.0 - 0.5_f64.powi(n as i32);
    let mut u = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(n);
    for theta in 1..=n {
        let top = 2.0_f64.powi(theta as i32);
        let knee = 1.0 - t.powi(-(theta as i32));
        u.push(actions_from_breakpoints(
            &[(0.0, 0.0), (knee, 0.0), (1.0, top)],
            2,
        ));
        row.push(0.5_f64.powi(theta as i32 + 1) / norm);
    }
    build(
        labels("", 1..n + 1),
        labels("", 0..2),
        labels("a", 0..2),
        vec![row.clone(), row],
        u,
    )
}

/// The seller's state is a pair (ω₁, ω₂) where ω₂ equals the buyer's type;
/// the buyer only cares about ω₁ (uniform), with v_θ(q) = 2^θ |2q − 1|.
pub fn type_revealing(n: usize) -> Context {
    let norm = 1.0 - 0.5_f64.powi(n as i32);
    let mut omega = Vec::with_capacity(2 * n);
    for w2 in 1..=n {
        for w1 in 0..2 {
            omega.push(format!("{w1}/{w2}"));
        }
    }
    let mut mu = vec![vec![0.0; n]; 2 * n];
    for theta in 1..=n {
        let mass = 0.5_f64.powi(theta as i32) / norm;
        for w1 in 0..2 {
            mu[2 * (theta - 1) + w1][theta - 1] = 0.5 * mass;
        }
    }
    let u = (1..=n)
        .map(|theta| {
            let s = 2.0_f64.powi(theta as i32);
            (0..2 * n)
                .map(|w| if w % 2 == 0 { vec![s, -s] } else { vec![-s, s] })
                .collect()
        })
        .collect();
    build(labels("", 1..n + 1), omega, labels("a", 0..2), mu, u)
}

/// Independent context with Ω = Θ = A = {1..n}: type θ earns 2^θ for naming
/// the state, states are uniform and type masses fall as 2^−θ.
pub fn iid_gap(n: usize) -> Context {
    let norm = 1.0 - 0.5_f64.powi(n as i32);
    let mu = (0..n)
        .map(|_| {
            (1..=n)
                .map(|t| 0.5_f64.powi(t as i32) / norm / n as f64)
                .collect()
        })
        .collect();
    let u = (1..=n)
        .map(|t| {
            let s = 2.0_f64.powi(t as i32);
            (0..n)
                .map(|w| (0..n).map(|a| if a == w { s } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    build(
        labels("", 1..n + 1),
        labels("", 1..n + 1),
        labels("name", 1..n + 1),
        mu,
        u,
    )
}

/// A full-rank n×n direction with zero total mass: a fixed generic matrix
/// minus its mean.
pub fn iid_gap_direction(n: usize) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (i, j) = (i as f64, j as f64);
                    (1.0 + i * i + 2.0 * j).sin() + if i == j { 2.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let mean = raw.iter().flatten().sum::<f64>() / (n * n) as f64;
    raw.iter()
        .map(|r| r.iter().map(|x| x - mean).collect())
        .collect()
}
