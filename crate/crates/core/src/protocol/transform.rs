use super::{BuyerStrategy, Decision, Mode, NodeKind, ProtocolTree, TreeBuilder};
use crate::context::Context;
use crate::error::{Error, Result};
use crate::mechanisms::{Contract, Menu, MenuKind, Signal, SUPPORT_TOL};

fn require_committed(
    strategies: &[BuyerStrategy],
    ctx: &Context,
    tree: &ProtocolTree,
) -> Result<()> {
    if strategies.len() != ctx.n_types() {
        return Err(Error::InvalidInput(format!(
            "{} strategies for {} types",
            strategies.len(),
            ctx.n_types()
        )));
    }
    for s in strategies {
        if s.mode != Mode::Committed {
            return Err(Error::InvalidInput(
                "transformations need committed strategies".into(),
            ));
        }
        s.check(tree)?;
    }
    Ok(())
}

fn choice(strategy: &BuyerStrategy, node: usize) -> usize {
    match strategy.decisions.get(&node) {
        Some(Decision::Child(k)) => *k,
        _ => 0,
    }
}

/// Copies the subtree at `node` with the buyer's moves replaced by the
/// choices of `strategy`.
fn simulate(
    tree: &ProtocolTree,
    strategy: &BuyerStrategy,
    node: usize,
    out: &mut TreeBuilder,
    prefix: &str,
) -> usize {
    let src = tree.node(node);
    let id = match &src.kind {
        NodeKind::Buyer { children, .. } => {
            return simulate(
                tree,
                strategy,
                children[choice(strategy, node)],
                out,
                prefix,
            );
        }
        NodeKind::Leaf => out.leaf(),
        NodeKind::Transfer { amount, child } => {
            let c = simulate(tree, strategy, *child, out, prefix);
            out.transfer(*amount, c)
        }
        NodeKind::Seller { psi, children } => {
            let ch = children
                .iter()
                .map(|&c| simulate(tree, strategy, c, out, prefix))
                .collect();
            out.seller(psi.clone(), ch)
        }
    };
    if let Some(name) = &src.name {
        out.name(id, format!("{prefix}{name}"));
    }
    id
}

/// One-round revelation form: the buyer announces a type at the root and the
/// seller then plays the original protocol on that type's behalf.
pub fn to_revelation(
    ctx: &Context,
    tree: &ProtocolTree,
    strategies: &[BuyerStrategy],
) -> Result<ProtocolTree> {
    require_committed(strategies, ctx, tree)?;
    let mut out = TreeBuilder::new(tree.states());
    let labels: Vec<String> = ctx.type_labels().to_vec();
    let children = strategies
        .iter()
        .zip(&labels)
        .map(|(s, l)| simulate(tree, s, tree.root(), &mut out, &format!("{l}:")))
        .collect();
    let root = out.buyer(labels, children);
    out.build(root)
}

/// Leaves reached under `strategy`, with P(leaf | ω) and the path transfer.
fn leaf_lottery(tree: &ProtocolTree, strategy: &BuyerStrategy) -> Vec<(Vec<f64>, f64)> {
    let m = tree.states().len();
    let mut out = Vec::new();
    let mut stack = vec![(tree.root(), vec![1.0; m], 0.0)];
    while let Some((node, lambda, paid)) = stack.pop() {
        match &tree.node(node).kind {
            NodeKind::Leaf => out.push((lambda, paid)),
            NodeKind::Transfer { amount, child } => stack.push((*child, lambda, paid + amount)),
            NodeKind::Buyer { children, .. } => {
                stack.push((children[choice(strategy, node)], lambda, paid))
            }
            NodeKind::Seller { psi, children } => {
                for (k, &c) in children.iter().enumerate().rev() {
                    let lc = lambda.iter().zip(psi).map(|(l, row)| l * row[k]).collect();
                    stack.push((c, lc, paid));
                }
            }
        }
    }
    out
}

/// Observer-frame signals of each reached leaf, with the leaf's transfer.
fn leaf_signals(
    ctx: &Context,
    tree: &ProtocolTree,
    strategy: &BuyerStrategy,
) -> Vec<(Signal, f64)> {
    let prior = ctx.prior();
    leaf_lottery(tree, strategy)
        .into_iter()
        .filter_map(|(lambda, paid)| {
            let joint: Vec<f64> = prior.iter().zip(&lambda).map(|(p, l)| p * l).collect();
            let weight: f64 = joint.iter().sum();
            (weight > 0.0).then(|| {
                let q = joint.iter().map(|j| j / weight).collect();
                (Signal::new(q, weight), paid)
            })
        })
        .collect()
}

/// Fixed-price menu: type θ pays its expected transfer up front and then
/// sees the leaf its own play would have produced. Exact only when ω and θ
/// are independent.
pub fn to_pricing_mappings(
    ctx: &Context,
    tree: &ProtocolTree,
    strategies: &[BuyerStrategy],
) -> Result<Menu> {
    if !ctx.is_independent(1e-12) {
        return Err(Error::RequiresIndependence);
    }
    require_committed(strategies, ctx, tree)?;
    let contracts = strategies
        .iter()
        .map(|s| {
            let signals = leaf_signals(ctx, tree, s);
            let price = signals.iter().map(|(sig, paid)| sig.weight * paid).sum();
            Contract {
                signals: signals.into_iter().map(|(sig, _)| sig).collect(),
                price,
            }
        })
        .collect();
    Ok(Menu {
        kind: MenuKind::Mappings,
        contracts,
    })
}

/// Per-signal payment menu: every reached leaf becomes a signal charged the
/// transfers on its path.
pub fn to_pricing_outcomes(
    ctx: &Context,
    tree: &ProtocolTree,
    strategies: &[BuyerStrategy],
) -> Result<Menu> {
    require_committed(strategies, ctx, tree)?;
    let contracts = strategies
        .iter()
        .map(|s| Contract {
            signals: leaf_signals(ctx, tree, s)
                .into_iter()
                .map(|(mut sig, paid)| {
                    sig.scaled_payment = sig.weight * paid;
                    sig.payment = Some(paid);
                    sig
                })
                .collect(),
            price: 0.0,
        })
        .collect();
    Ok(Menu {
        kind: MenuKind::Outcomes,
        contracts,
    })
}

fn is_null(c: &Contract) -> bool {
    c.price == 0.0
        && c.signals
            .iter()
            .filter(|s| s.weight > SUPPORT_TOL)
            .all(|s| s.scaled_payment == 0.0)
        && c.support_size() <= 1
}

/// Seller node drawing the contract's signals: P(signal k | ω) = x_k q_k(ω)/p(ω).
fn signal_node(
    ctx: &Context,
    signals: &[&Signal],
    leaves: Vec<usize>,
    out: &mut TreeBuilder,
) -> usize {
    let prior = ctx.prior();
    let psi = prior
        .iter()
        .enumerate()
        .map(|(w, &p)| {
            if p > 0.0 {
                let mut row: Vec<f64> = signals
                    .iter()
                    .map(|s| s.weight * s.posterior[w] / p)
                    .collect();
                let total: f64 = row.iter().sum();
                for v in &mut row {
                    *v /= total;
                }
                row
            } else {
                let mut row = vec![0.0; signals.len()];
                row[0] = 1.0;
                row
            }
        })
        .collect();
    out.seller(psi, leaves)
}

/// Protocol form of a menu: the buyer picks a contract (or walks away), then
/// a fixed-price contract charges and reveals while a per-signal contract
/// reveals and then charges.
pub fn menu_to_protocol(ctx: &Context, menu: &Menu) -> Result<ProtocolTree> {
    let mut out = TreeBuilder::new(ctx.state_labels());
    let mut labels = Vec::new();
    let mut children = Vec::new();
    let mut seen: Vec<&Contract> = Vec::new();
    let mut has_exit = false;
    for (theta, c) in menu.contracts.iter().enumerate() {
        if seen.iter().any(|s| s.same_as(c, 0.0)) {
            continue;
        }
        seen.push(c);
        let signals: Vec<&Signal> = c.signals.iter().filter(|s| s.weight > 0.0).collect();
        if signals.is_empty() {
            return Err(Error::InvalidInput(format!(
                "contract {theta} sends no signal"
            )));
        }
        let label = ctx.type_labels()[theta].clone();
        if is_null(c) {
            has_exit = true;
            labels.push(label);
            children.push(out.leaf());
            continue;
        }
        let node = match menu.kind {
            MenuKind::Mappings => {
                let leaves = signals.iter().map(|_| out.leaf()).collect();
                let s = signal_node(ctx, &signals, leaves, &mut out);
                if c.price != 0.0 {
                    out.transfer(c.price, s)
                } else {
                    s
                }
            }
            MenuKind::Outcomes => {
                let leaves = signals
                    .iter()
                    .map(|sig| {
                        let l = out.leaf();
                        let t = sig.payment.unwrap_or(sig.scaled_payment / sig.weight);
                        if t != 0.0 {
                            out.transfer(t, l)
                        } else {
                            l
                        }
                    })
                    .collect();
                let s = signal_node(ctx, &signals, leaves, &mut out);
                if c.price != 0.0 {
                    out.transfer(c.price, s)
                } else {
                    s
                }
            }
        };
        labels.push(label);
        children.push(node);
    }
    if !has_exit {
        labels.push("exit".into());
        children.push(out.leaf());
    }
    let root = out.buyer(labels, children);
    out.build(root)
}

fn copy_with_rebate(
    tree: &ProtocolTree,
    node: usize,
    paid: f64,
    deposit: f64,
    out: &mut TreeBuilder,
) -> usize {
    let src = tree.node(node);
    let id = match &src.kind {
        NodeKind::Leaf => {
            let l = out.leaf();
            out.transfer(paid - deposit, l)
        }
        NodeKind::Transfer { amount, child } => {
            // the amount is settled from the deposit at the end
            let c = copy_with_rebate(tree, *child, paid + amount, deposit, out);
            out.silent(c)
        }
        NodeKind::Seller { psi, children } => {
            let ch = children
                .iter()
                .map(|&c| copy_with_rebate(tree, c, paid, deposit, out))
                .collect();
            out.seller(psi.clone(), ch)
        }
        NodeKind::Buyer { labels, children } => {
            let ch = children
                .iter()
                .map(|&c| copy_with_rebate(tree, c, paid, deposit, out))
                .collect();
            out.buyer(labels.clone(), ch)
        }
    };
    if let Some(name) = &src.name {
        out.name(id, name.clone());
    }
    id
}

/// Largest total of transfers along any root-to-leaf path.
pub fn max_path_transfer(tree: &ProtocolTree) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut stack = vec![(tree.root(), 0.0)];
    while let Some((node, paid)) = stack.pop() {
        match &tree.node(node).kind {
            NodeKind::Leaf => best = best.max(paid),
            NodeKind::Transfer { amount, child } => stack.push((*child, paid + amount)),
            _ => stack.extend(tree.node(node).children().into_iter().map(|c| (c, paid))),
        }
    }
    best
}

/// Collects `deposit` before anything else and settles every payment at the
/// leaves as a rebate, so a buyer never has a reason to leave early.
pub fn with_deposit(tree: &ProtocolTree, deposit: f64) -> Result<ProtocolTree> {
    let need = max_path_transfer(tree);
    if !(deposit.is_finite() && deposit >= need) {
        return Err(Error::InvalidInput(format!(
            "deposit {deposit} does not cover path transfers up to {need}"
        )));
    }
    let mut out = TreeBuilder::new(tree.states());
    let body = copy_with_rebate(tree, tree.root(), 0.0, deposit, &mut out);
    let root = out.transfer(deposit, body);
    out.build(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mechanisms::{full_surplus_contract, solve_sealed_envelope};
    use crate::protocol::{best_response, evaluate};

    fn committed(ctx: &Context, tree: &ProtocolTree) -> Vec<BuyerStrategy> {
        (0..ctx.n_types())
            .map(|t| best_response(ctx, tree, t, Mode::Committed).strategy)
            .collect()
    }

    #[test]
    fn envelope_menu_has_three_interior_nodes() {
        let ctx = fixtures::uniform_lockbox();
        let env = solve_sealed_envelope(&ctx);
        let tree = menu_to_protocol(&ctx, &env.menu).unwrap();
        let interior = tree
            .nodes()
            .iter()
            .filter(|n| !matches!(n.kind, NodeKind::Leaf))
            .count();
        assert_eq!(interior, 3);
        assert!(matches!(
            tree.node(tree.root()).kind,
            NodeKind::Buyer { .. }
        ));
    }

    #[test]
    fn empty_menu_is_a_buyer_node_over_leaves() {
        let ctx = fixtures::uniform_lockbox();
        let menu = Menu {
            kind: MenuKind::Mappings,
            contracts: Vec::new(),
        };
        let tree = menu_to_protocol(&ctx, &menu).unwrap();
        match &tree.node(tree.root()).kind {
            NodeKind::Buyer { children, .. } => {
                assert!(children
                    .iter()
                    .all(|&c| matches!(tree.node(c).kind, NodeKind::Leaf)))
            }
            _ => panic!("root must be a buyer node"),
        }
    }

    #[test]
    fn uncommitted_buyers_skip_payments_after_full_surplus_information() {
        let ctx = fixtures::lockbox();
        let fs = full_surplus_contract(&ctx).unwrap();
        let tree = menu_to_protocol(&ctx, &fs.menu).unwrap();
        let br = best_response(&ctx, &tree, 0, Mode::Uncommitted);
        assert!(br
            .strategy
            .decisions
            .iter()
            .any(|(&n, &d)| d == Decision::Defect
                && matches!(tree.node(n).kind, NodeKind::Transfer { amount, .. } if amount > 0.0)));
        let committed = best_response(&ctx, &tree, 0, Mode::Committed);
        assert!((committed.expected_transfer - 1.2).abs() < 1e-12);
    }

    #[test]
    fn leaf_only_tree_gives_the_prior() {
        let ctx = fixtures::lockbox();
        let tree = ProtocolTree::leaf(ctx.state_labels());
        let s = committed(&ctx, &tree);
        let menu = to_pricing_outcomes(&ctx, &tree, &s).unwrap();
        for c in &menu.contracts {
            assert_eq!(c.signals.len(), 1);
            assert_eq!(c.signals[0].posterior, ctx.prior());
            assert_eq!(c.signals[0].payment, Some(0.0));
        }
    }

    #[test]
    fn correlated_mappings_transform_is_refused() {
        let ctx = fixtures::lockbox();
        let tree = ProtocolTree::leaf(ctx.state_labels());
        let s = committed(&ctx, &tree);
        assert_eq!(
            to_pricing_mappings(&ctx, &tree, &s),
            Err(Error::RequiresIndependence)
        );
    }

    #[test]
    fn deposit_needs_to_cover_payments() {
        let (_, tree) = fixtures::separation_protocol();
        assert!(with_deposit(&tree, 0.79).is_err());
        assert!(with_deposit(&tree, 0.8).is_ok());
    }

    #[test]
    fn deposit_preserves_committed_play() {
        let (ctx, tree) = fixtures::separation_protocol();
        let wrapped = with_deposit(&tree, 5.0).unwrap();
        for t in 0..2 {
            let a = best_response(&ctx, &tree, t, Mode::Committed);
            let b = best_response(&ctx, &wrapped, t, Mode::Committed);
            assert!((a.utility - b.utility).abs() < 1e-12);
            assert!((a.expected_transfer - b.expected_transfer).abs() < 1e-12);
        }
        let s = committed(&ctx, &wrapped);
        let ev = evaluate(&ctx, &wrapped, &s).unwrap();
        assert!((ev.revenue - 0.4665).abs() < 1e-12);
        for t in 0..2 {
            let u = best_response(&ctx, &wrapped, t, Mode::Uncommitted);
            let c = best_response(&ctx, &wrapped, t, Mode::Committed);
            assert!((u.utility - c.utility).abs() < 1e-12);
        }
    }
}
