use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NodeKind, ProtocolTree, PSI_TOL};
use crate::context::Context;
use crate::error::{Error, Result};

/// Largest number of decision nodes the exhaustive oracle accepts.
pub const ORACLE_DECISION_LIMIT: usize = 12;

/// Utility differences below this (relative) count as indifference.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The buyer follows the protocol to a leaf.
    Committed,
    /// The buyer may stop at any buyer or transfer node.
    Uncommitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Index into the buyer node's children.
    Child(usize),
    Pay,
    Defect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerStrategy {
    pub mode: Mode,
    /// Decision per node index.
    pub decisions: BTreeMap<usize, Decision>,
}

impl BuyerStrategy {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            decisions: BTreeMap::new(),
        }
    }

    pub fn with(mut self, node: usize, d: Decision) -> Self {
        self.decisions.insert(node, d);
        self
    }

    /// Rejects decisions that do not fit the node or the mode.
    pub fn check(&self, tree: &ProtocolTree) -> Result<()> {
        for (&node, &d) in &self.decisions {
            if node >= tree.len() {
                return Err(Error::InvalidInput(format!("no node {node}")));
            }
            let ok = match (&tree.node(node).kind, d) {
                (_, Decision::Defect) => self.mode == Mode::Uncommitted,
                (NodeKind::Buyer { children, .. }, Decision::Child(k)) => k < children.len(),
                (NodeKind::Transfer { .. }, Decision::Pay) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "decision {d:?} does not fit node {node} in {:?} mode",
                    self.mode
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    pub strategy: BuyerStrategy,
    pub utility: f64,
    pub expected_transfer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stop {
    Leaf,
    Defect,
}

/// A node reached with positive probability by one type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Visit {
    pub node: usize,
    /// P(reach node | ω) along the played path.
    pub likelihood: Vec<f64>,
    /// P(reach node | θ).
    pub probability: f64,
    /// The buyer's belief on arrival.
    pub posterior: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<Stop>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeOutcome {
    pub theta: usize,
    pub utility: f64,
    pub expected_transfer: f64,
    pub visits: Vec<Visit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvaluationResult {
    pub types: Vec<TypeOutcome>,
    pub revenue: f64,
}

impl EvaluationResult {
    fn visit(&self, theta: usize, node: usize) -> Option<&Visit> {
        self.types
            .get(theta)?
            .visits
            .iter()
            .find(|v| v.node == node)
    }

    /// P(reach node | θ); zero when the node is never reached.
    pub fn reach(&self, theta: usize, node: usize) -> f64 {
        self.visit(theta, node).map_or(0.0, |v| v.probability)
    }

    pub fn posterior_at(&self, theta: usize, node: usize) -> Option<&[f64]> {
        self.visit(theta, node).map(|v| v.posterior.as_slice())
    }
}

#[derive(Clone, Copy)]
struct Value2 {
    utility: f64,
    transfer: f64,
}

/// Whether `a` beats `b`: higher utility, then higher seller revenue.
fn better(a: Value2, b: Value2) -> bool {
    let tol = TIE_TOL * (1.0 + a.utility.abs().max(b.utility.abs()));
    if a.utility > b.utility + tol {
        return true;
    }
    if a.utility < b.utility - tol {
        return false;
    }
    let ttol = TIE_TOL * (1.0 + a.transfer.abs().max(b.transfer.abs()));
    a.transfer > b.transfer + ttol
}

struct Responder<'a> {
    ctx: &'a Context,
    tree: &'a ProtocolTree,
    theta: usize,
    mode: Mode,
    decisions: BTreeMap<usize, Decision>,
}

impl Responder<'_> {
    /// Optimal continuation at `node` given the unnormalized belief `b`.
    fn solve(&mut self, node: usize, b: &[f64]) -> Value2 {
        let stop = Value2 {
            utility: self.ctx.value(self.theta, b),
            transfer: 0.0,
        };
        match &self.tree.node(node).kind {
            NodeKind::Leaf => stop,
            NodeKind::Seller { psi, children } => {
                let mut total = Value2 {
                    utility: 0.0,
                    transfer: 0.0,
                };
                for (k, &c) in children.iter().enumerate() {
                    let bc: Vec<f64> = b.iter().zip(psi).map(|(x, row)| x * row[k]).collect();
                    let v = self.solve(c, &bc);
                    total.utility += v.utility;
                    total.transfer += v.transfer;
                }
                total
            }
            NodeKind::Transfer { amount, child } => {
                let mass: f64 = b.iter().sum();
                let v = self.solve(*child, b);
                let pay = Value2 {
                    utility: v.utility - amount * mass,
                    transfer: v.transfer + amount * mass,
                };
                if self.mode == Mode::Uncommitted && better(stop, pay) {
                    self.decisions.insert(node, Decision::Defect);
                    stop
                } else {
                    if self.mode == Mode::Uncommitted {
                        self.decisions.insert(node, Decision::Pay);
                    }
                    pay
                }
            }
            NodeKind::Buyer { children, .. } => {
                let mut best: Option<(Decision, Value2)> = None;
                for (k, &c) in children.iter().enumerate() {
                    let v = self.solve(c, b);
                    if best.is_none_or(|(_, bv)| better(v, bv)) {
                        best = Some((Decision::Child(k), v));
                    }
                }
                let (mut d, mut v) = best.expect("buyer nodes have children");
                if self.mode == Mode::Uncommitted && better(stop, v) {
                    (d, v) = (Decision::Defect, stop);
                }
                self.decisions.insert(node, d);
                v
            }
        }
    }
}

/// Exact optimal pure strategy of type θ, with ties going to the seller and
/// then to the lowest child index.
pub fn best_response(ctx: &Context, tree: &ProtocolTree, theta: usize, mode: Mode) -> BestResponse {
    let mut r = Responder {
        ctx,
        tree,
        theta,
        mode,
        decisions: BTreeMap::new(),
    };
    let v = r.solve(tree.root(), &ctx.conditional(theta));
    BestResponse {
        strategy: BuyerStrategy {
            mode,
            decisions: r.decisions,
        },
        utility: v.utility,
        expected_transfer: v.transfer,
    }
}

fn check_tree(ctx: &Context, tree: &ProtocolTree) -> Result<()> {
    if tree.states().len() != ctx.n_states() {
        return Err(Error::InvalidInput(format!(
            "tree has {} states, context has {}",
            tree.states().len(),
            ctx.n_states()
        )));
    }
    Ok(())
}

struct Walker<'a> {
    ctx: &'a Context,
    tree: &'a ProtocolTree,
    theta: usize,
    strategy: &'a BuyerStrategy,
    visits: Vec<Visit>,
    utility: f64,
    transfer: f64,
}

impl Walker<'_> {
    fn record(&mut self, node: usize, lambda: &[f64], b: &[f64], stop: Option<Stop>) {
        let probability: f64 = b.iter().sum();
        self.visits.push(Visit {
            node,
            likelihood: lambda.to_vec(),
            probability,
            posterior: b.iter().map(|x| x / probability).collect(),
            stop,
        });
    }

    fn stop(&mut self, node: usize, lambda: &[f64], b: &[f64], kind: Stop) {
        self.utility += self.ctx.value(self.theta, b);
        self.record(node, lambda, b, Some(kind));
    }

    fn decision(&self, node: usize) -> Result<Decision> {
        match self.strategy.decisions.get(&node) {
            Some(&d) => Ok(d),
            None if self.strategy.mode == Mode::Committed
                && matches!(self.tree.node(node).kind, NodeKind::Transfer { .. }) =>
            {
                Ok(Decision::Pay)
            }
            None => Err(Error::MissingDecision {
                node,
                theta: self.theta,
            }),
        }
    }

    fn walk(&mut self, node: usize, lambda: &[f64], b: &[f64]) -> Result<()> {
        if b.iter().sum::<f64>() <= 0.0 {
            return Ok(());
        }
        match &self.tree.node(node).kind {
            NodeKind::Leaf => self.stop(node, lambda, b, Stop::Leaf),
            NodeKind::Seller { psi, children } => {
                self.record(node, lambda, b, None);
                let mut conserved = vec![0.0; lambda.len()];
                for (k, &c) in children.iter().enumerate() {
                    let lc: Vec<f64> = lambda.iter().zip(psi).map(|(l, row)| l * row[k]).collect();
                    let bc: Vec<f64> = b.iter().zip(psi).map(|(x, row)| x * row[k]).collect();
                    for (s, l) in conserved.iter_mut().zip(&lc) {
                        *s += l;
                    }
                    self.walk(c, &lc, &bc)?;
                }
                for (s, l) in conserved.iter().zip(lambda) {
                    if (s - l).abs() > PSI_TOL * (1.0 + l) {
                        return Err(Error::NumericFailure(format!(
                            "likelihood not conserved at node {node}"
                        )));
                    }
                }
            }
            NodeKind::Transfer { amount, child } => match self.decision(node)? {
                Decision::Defect => self.stop(node, lambda, b, Stop::Defect),
                _ => {
                    self.record(node, lambda, b, None);
                    let mass: f64 = b.iter().sum();
                    self.utility -= amount * mass;
                    self.transfer += amount * mass;
                    self.walk(*child, lambda, b)?;
                }
            },
            NodeKind::Buyer { children, .. } => match self.decision(node)? {
                Decision::Defect => self.stop(node, lambda, b, Stop::Defect),
                Decision::Child(k) => {
                    self.record(node, lambda, b, None);
                    self.walk(children[k], lambda, b)?;
                }
                Decision::Pay => {
                    return Err(Error::InvalidInput(format!(
                        "buyer node {node} needs a child, not a payment"
                    )))
                }
            },
        }
        Ok(())
    }
}

/// Plays every type's strategy through the tree and accounts for utility,
/// payments and revenue exactly.
pub fn evaluate(
    ctx: &Context,
    tree: &ProtocolTree,
    strategies: &[BuyerStrategy],
) -> Result<EvaluationResult> {
    check_tree(ctx, tree)?;
    if strategies.len() != ctx.n_types() {
        return Err(Error::InvalidInput(format!(
            "{} strategies for {} types",
            strategies.len(),
            ctx.n_types()
        )));
    }
    let m = ctx.n_states();
    let mut result = EvaluationResult::default();
    for (theta, strategy) in strategies.iter().enumerate() {
        strategy.check(tree)?;
        let mut w = Walker {
            ctx,
            tree,
            theta,
            strategy,
            visits: Vec::new(),
            utility: 0.0,
            transfer: 0.0,
        };
        w.walk(tree.root(), &vec![1.0; m], &ctx.conditional(theta))?;
        result.revenue += ctx.type_mass(theta) * w.transfer;
        result.types.push(TypeOutcome {
            theta,
            utility: w.utility,
            expected_transfer: w.transfer,
            visits: w.visits,
        });
    }
    Ok(result)
}

/// Best utility of type θ by trying every pure strategy.
pub fn enumerate_strategies_oracle(
    ctx: &Context,
    tree: &ProtocolTree,
    theta: usize,
    mode: Mode,
) -> Result<f64> {
    check_tree(ctx, tree)?;
    let nodes = tree.decision_nodes(mode);
    if nodes.len() > ORACLE_DECISION_LIMIT {
        return Err(Error::ComplexityLimit {
            what: "decision nodes",
            count: nodes.len(),
            limit: ORACLE_DECISION_LIMIT,
        });
    }
    let options: Vec<Vec<Decision>> = nodes
        .iter()
        .map(|&i| {
            let mut opts: Vec<Decision> = match &tree.node(i).kind {
                NodeKind::Buyer { children, .. } => {
                    (0..children.len()).map(Decision::Child).collect()
                }
                _ => vec![Decision::Pay],
            };
            if mode == Mode::Uncommitted {
                opts.push(Decision::Defect);
            }
            opts
        })
        .collect();
    let interim = ctx.conditional(theta);
    let mut digits = vec![0usize; nodes.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let choice: BTreeMap<usize, Decision> = nodes
            .iter()
            .zip(&digits)
            .zip(&options)
            .map(|((&n, &d), o)| (n, o[d]))
            .collect();
        best = best.max(path_utility(ctx, tree, theta, &interim, &choice));
        // next assignment in mixed radix
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return Ok(best);
            }
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Σ over stopping points of v_θ(belief) − (path transfers)·P(stop | θ).
fn path_utility(
    ctx: &Context,
    tree: &ProtocolTree,
    theta: usize,
    interim: &[f64],
    choice: &BTreeMap<usize, Decision>,
) -> f64 {
    let m = ctx.n_states();
    let mut total = 0.0;
    let mut stack: Vec<(usize, Vec<f64>, f64)> = vec![(tree.root(), vec![1.0; m], 0.0)];
    while let Some((node, lambda, paid)) = stack.pop() {
        let stop = || {
            let belief: Vec<f64> = interim.iter().zip(&lambda).map(|(p, l)| p * l).collect();
            let prob: f64 = belief.iter().sum();
            ctx.value(theta, &belief) - paid * prob
        };
        match &tree.node(node).kind {
            NodeKind::Leaf => total += stop(),
            NodeKind::Seller { psi, children } => {
                for (k, &c) in children.iter().enumerate() {
                    let lc = lambda.iter().zip(psi).map(|(l, row)| l * row[k]).collect();
                    stack.push((c, lc, paid));
                }
            }
            NodeKind::Transfer { amount, child } => match choice.get(&node) {
                Some(Decision::Defect) => total += stop(),
                _ => stack.push((*child, lambda, paid + amount)),
            },
            NodeKind::Buyer { children, .. } => match choice[&node] {
                Decision::Child(k) => stack.push((children[k], lambda, paid)),
                _ => total += stop(),
            },
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::protocol::TreeBuilder;

    #[test]
    fn single_leaf_gives_the_outside_option() {
        let ctx = fixtures::separation();
        let tree = ProtocolTree::leaf(ctx.state_labels());
        for theta in 0..2 {
            for mode in [Mode::Committed, Mode::Uncommitted] {
                let br = best_response(&ctx, &tree, theta, mode);
                assert!((br.utility - ctx.value(theta, &ctx.conditional(theta))).abs() < 1e-15);
                assert_eq!(br.expected_transfer, 0.0);
            }
        }
    }

    #[test]
    fn buyer_node_takes_the_best_of_three() {
        let ctx = fixtures::uniform_lockbox();
        let mut b = TreeBuilder::new(ctx.state_labels());
        let reveal = |b: &mut TreeBuilder, price: f64| {
            let l0 = b.leaf();
            let l1 = b.leaf();
            let s = b.seller(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![l0, l1]);
            b.transfer(price, s)
        };
        let a = reveal(&mut b, 2.0);
        let c = reveal(&mut b, 1.0);
        let d = b.leaf();
        let root = b.buyer(vec!["a".into(), "b".into(), "c".into()], vec![a, c, d]);
        let tree = b.build(root).unwrap();
        let br = best_response(&ctx, &tree, 1, Mode::Committed);
        assert_eq!(br.strategy.decisions[&root], Decision::Child(1));
        assert!((br.utility - 4.0).abs() < 1e-12);
        let oracle = enumerate_strategies_oracle(&ctx, &tree, 1, Mode::Committed).unwrap();
        assert!((oracle - 4.0).abs() < 1e-12);
    }

    #[test]
    fn indifference_goes_to_the_seller() {
        // type 1 (z = 3) values full information at exactly 1.5
        let ctx = fixtures::uniform_lockbox();
        let mut b = TreeBuilder::new(ctx.state_labels());
        let out = b.leaf();
        let l0 = b.leaf();
        let l1 = b.leaf();
        let s = b.seller(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![l0, l1]);
        let t = b.transfer(1.5, s);
        let root = b.buyer(vec!["out".into(), "buy".into()], vec![out, t]);
        let tree = b.build(root).unwrap();
        let br = best_response(&ctx, &tree, 0, Mode::Uncommitted);
        assert_eq!(br.strategy.decisions[&root], Decision::Child(1));
        assert_eq!(br.strategy.decisions[&t], Decision::Pay);
        assert!((br.expected_transfer - 1.5).abs() < 1e-15);
    }

    #[test]
    fn missing_decision_is_reported() {
        let (ctx, tree) = fixtures::separation_protocol();
        let empty = vec![BuyerStrategy::new(Mode::Committed); 2];
        assert_eq!(
            evaluate(&ctx, &tree, &empty),
            Err(Error::MissingDecision {
                node: tree.root(),
                theta: 0
            })
        );
    }

    #[test]
    fn committed_strategies_cannot_defect() {
        let (ctx, tree) = fixtures::separation_protocol();
        let s = BuyerStrategy::new(Mode::Committed).with(tree.root(), Decision::Defect);
        assert!(evaluate(&ctx, &tree, &[s.clone(), s]).is_err());
    }

    #[test]
    fn oracle_size_guard() {
        let ctx = fixtures::uniform_lockbox();
        let mut b = TreeBuilder::new(ctx.state_labels());
        let mut node = b.leaf();
        for _ in 0..13 {
            let other = b.leaf();
            node = b.buyer(vec!["x".into(), "y".into()], vec![node, other]);
        }
        let tree = b.build(node).unwrap();
        assert!(matches!(
            enumerate_strategies_oracle(&ctx, &tree, 0, Mode::Committed),
            Err(Error::ComplexityLimit { count: 13, .. })
        ));
    }
}
