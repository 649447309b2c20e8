//! Seeded generators of random contexts and protocol trees.

#![allow(dead_code)]

use infomech::protocol::{Mode, ProtocolTree, TreeBuilder};
use infomech::{Context, ContextData};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn labels(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i}")).collect()
}

fn distribution(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn utilities(rng: &mut impl Rng, n: usize, m: usize, a: usize) -> Vec<Vec<Vec<f64>>> {
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| (0..a).map(|_| rng.gen_range(0.0..4.0)).collect())
                .collect()
        })
        .collect()
}

fn build(n: usize, m: usize, a: usize, mu: Vec<Vec<f64>>, u: Vec<Vec<Vec<f64>>>) -> Context {
    Context::try_from(ContextData {
        theta: labels("t", n),
        omega: labels("w", m),
        actions: labels("a", a),
        mu,
        u,
    })
    .expect("generated context is valid")
}

/// A context with every entry of μ positive and generic payoffs.
pub fn correlated_context(rng: &mut impl Rng, n: usize, m: usize, a: usize) -> Context {
    let flat = distribution(rng, n * m);
    let mu = (0..m).map(|w| flat[w * n..(w + 1) * n].to_vec()).collect();
    build(n, m, a, mu, utilities(rng, n, m, a))
}

/// A context where ω and θ are independent.
pub fn independent_context(rng: &mut impl Rng, n: usize, m: usize, a: usize) -> Context {
    let types = distribution(rng, n);
    let states = distribution(rng, m);
    let mu = states
        .iter()
        .map(|pw| types.iter().map(|pt| pw * pt).collect())
        .collect();
    build(n, m, a, mu, utilities(rng, n, m, a))
}

/// A square context whose joint distribution has condition number below
/// `max_condition`, drawn by rejection.
pub fn full_rank_context(rng: &mut impl Rng, n: usize, a: usize, max_condition: f64) -> Context {
    loop {
        let ctx = correlated_context(rng, n, n, a);
        let mat = nalgebra::DMatrix::from_fn(n, n, |w, t| ctx.joint(w, t));
        let sv = mat.singular_values();
        let cond = sv.max() / sv.min();
        if cond < max_condition {
            return ctx;
        }
    }
}

struct TreeGen<'a, R: Rng> {
    rng: &'a mut R,
    m: usize,
    /// Buyer and transfer nodes still allowed.
    budget: usize,
    b: TreeBuilder,
}

impl<R: Rng> TreeGen<'_, R> {
    fn node(&mut self, depth: usize) -> usize {
        let roll = if depth == 0 {
            0
        } else {
            self.rng.gen_range(0..10)
        };
        match roll {
            1..=3 if self.budget >= 1 => {
                self.budget -= 1;
                let k = self.rng.gen_range(2..=3);
                let children: Vec<usize> = (0..k).map(|_| self.node(depth - 1)).collect();
                let labels = (0..k).map(|i| format!("c{i}")).collect();
                self.b.buyer(labels, children)
            }
            4..=6 => {
                let k = self.rng.gen_range(2..=3);
                let psi = (0..self.m).map(|_| distribution(self.rng, k)).collect();
                let children = (0..k).map(|_| self.node(depth - 1)).collect();
                self.b.seller(psi, children)
            }
            7..=9 if self.budget >= 1 => {
                self.budget -= 1;
                let amount = self.rng.gen_range(-0.5..1.5);
                let child = self.node(depth - 1);
                self.b.transfer(amount, child)
            }
            _ => self.b.leaf(),
        }
    }
}

/// A random protocol over the states of `ctx` with at most `decisions`
/// buyer and transfer nodes, so at most that many decision nodes in either
/// mode.
pub fn random_tree(
    rng: &mut impl Rng,
    ctx: &Context,
    decisions: usize,
    depth: usize,
) -> ProtocolTree {
    let mut g = TreeGen {
        rng,
        m: ctx.n_states(),
        budget: decisions,
        b: TreeBuilder::new(ctx.state_labels()),
    };
    let root = g.node(depth);
    let tree = g.b.build(root).expect("generated tree is valid");
    debug_assert!(tree.decision_nodes(Mode::Uncommitted).len() <= decisions);
    tree
}
