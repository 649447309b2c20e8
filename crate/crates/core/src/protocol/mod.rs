//! Interactive buyer–seller protocols as finite trees.
//!
//! A tree has four node kinds: the buyer picks a child, the seller draws a
//! child from a distribution that depends on ω, a transfer node moves money
//! from the buyer to the seller (negative amounts pay the buyer), and a leaf
//! ends the protocol. Nodes live in an arena and are built bottom-up.

mod evaluate;
mod transform;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub use evaluate::{
    best_response, enumerate_strategies_oracle, evaluate, BestResponse, BuyerStrategy, Decision,
    EvaluationResult, Mode, Stop, TypeOutcome, Visit, ORACLE_DECISION_LIMIT,
};
pub use transform::{
    max_path_transfer, menu_to_protocol, to_pricing_mappings, to_pricing_outcomes, to_revelation,
    with_deposit,
};

/// Tolerance on Σ_children ψ(ω, child) = 1.
pub const PSI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Buyer {
        labels: Vec<String>,
        children: Vec<usize>,
    },
    /// `psi[ω][k]` is the probability of moving to `children[k]` in state ω.
    Seller {
        psi: Vec<Vec<f64>>,
        children: Vec<usize>,
    },
    Transfer {
        amount: f64,
        child: usize,
    },
    Leaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: Option<String>,
    pub kind: NodeKind,
}

impl Node {
    pub fn children(&self) -> Vec<usize> {
        match &self.kind {
            NodeKind::Buyer { children, .. } | NodeKind::Seller { children, .. } => {
                children.clone()
            }
            NodeKind::Transfer { child, .. } => vec![*child],
            NodeKind::Leaf => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTree {
    nodes: Vec<Node>,
    root: usize,
    states: Vec<String>,
}

/// Bottom-up constructor; every method returns the new node's index.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
    states: Vec<String>,
}

impl TreeBuilder {
    pub fn new(states: &[String]) -> Self {
        Self {
            nodes: Vec::new(),
            states: states.to_vec(),
        }
    }

    fn push(&mut self, kind: NodeKind) -> usize {
        self.nodes.push(Node { name: None, kind });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self) -> usize {
        self.push(NodeKind::Leaf)
    }

    pub fn transfer(&mut self, amount: f64, child: usize) -> usize {
        self.push(NodeKind::Transfer { amount, child })
    }

    pub fn seller(&mut self, psi: Vec<Vec<f64>>, children: Vec<usize>) -> usize {
        self.push(NodeKind::Seller { psi, children })
    }

    /// A seller node revealing nothing: every state moves to the one child.
    pub fn silent(&mut self, child: usize) -> usize {
        let psi = vec![vec![1.0]; self.states.len()];
        self.seller(psi, vec![child])
    }

    pub fn buyer(&mut self, labels: Vec<String>, children: Vec<usize>) -> usize {
        self.push(NodeKind::Buyer { labels, children })
    }

    pub fn name(&mut self, node: usize, name: impl Into<String>) -> usize {
        self.nodes[node].name = Some(name.into());
        node
    }

    pub fn build(self, root: usize) -> Result<ProtocolTree> {
        let tree = ProtocolTree {
            nodes: self.nodes,
            root,
            states: self.states,
        };
        tree.validate()?;
        Ok(tree)
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidTree(msg.into())
}

impl ProtocolTree {
    /// The one-leaf protocol.
    pub fn leaf(states: &[String]) -> Self {
        let mut b = TreeBuilder::new(states);
        let l = b.leaf();
        b.build(l).expect("a single leaf is a valid tree")
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    /// First node carrying `name`.
    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.name.as_deref() == Some(name))
    }

    /// Nodes in depth-first preorder from the root.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            out.push(i);
            let mut ch = self.nodes[i].children();
            ch.reverse();
            stack.extend(ch);
        }
        out
    }

    /// Buyer nodes, plus transfer nodes when the buyer may walk away.
    pub fn decision_nodes(&self, mode: Mode) -> Vec<usize> {
        self.preorder()
            .into_iter()
            .filter(|&i| match self.nodes[i].kind {
                NodeKind::Buyer { .. } => true,
                NodeKind::Transfer { .. } => mode == Mode::Uncommitted,
                _ => false,
            })
            .collect()
    }

    /// Checks that the arena is a rooted tree and every local invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let m = self.states.len();
        if self.root >= n {
            return Err(invalid("root is not a node"));
        }
        if m == 0 {
            return Err(invalid("no states"));
        }
        let mut parents = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            for c in node.children() {
                if c >= n {
                    return Err(invalid(format!("node {i} points at missing node {c}")));
                }
                parents[c] += 1;
            }
            match &node.kind {
                NodeKind::Buyer { labels, children } => {
                    if children.is_empty() {
                        return Err(invalid(format!("buyer node {i} has no children")));
                    }
                    if labels.len() != children.len() {
                        return Err(invalid(format!("buyer node {i} needs one label per child")));
                    }
                }
                NodeKind::Seller { psi, children } => {
                    if children.is_empty() {
                        return Err(invalid(format!("seller node {i} has no children")));
                    }
                    if psi.len() != m {
                        return Err(invalid(format!("seller node {i} needs one row per state")));
                    }
                    for (w, row) in psi.iter().enumerate() {
                        if row.len() != children.len() {
                            return Err(invalid(format!(
                                "seller node {i}, state {}: one probability per child",
                                self.states[w]
                            )));
                        }
                        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                            return Err(invalid(format!(
                                "seller node {i}, state {}: negative probability",
                                self.states[w]
                            )));
                        }
                        let total: f64 = row.iter().sum();
                        if (total - 1.0).abs() > PSI_TOL {
                            return Err(invalid(format!(
                                "seller node {i}, state {}: probabilities sum to {total}",
                                self.states[w]
                            )));
                        }
                    }
                }
                NodeKind::Transfer { amount, .. } => {
                    if !amount.is_finite() {
                        return Err(invalid(format!("transfer node {i} has amount {amount}")));
                    }
                }
                NodeKind::Leaf => {}
            }
        }
        if parents[self.root] != 0 {
            return Err(invalid("root has a parent"));
        }
        for (i, &p) in parents.iter().enumerate() {
            if i != self.root && p != 1 {
                return Err(invalid(format!("node {i} has {p} parents")));
            }
        }
        Ok(())
    }

    /// Nested JSON form; seller distributions are keyed by state label.
    pub fn to_value(&self) -> Value {
        self.node_value(self.root)
    }

    fn node_value(&self, i: usize) -> Value {
        let node = &self.nodes[i];
        let mut v = match &node.kind {
            NodeKind::Leaf => json!({"kind": "leaf"}),
            NodeKind::Transfer { amount, child } => {
                json!({"kind": "transfer", "amount": amount, "child": self.node_value(*child)})
            }
            NodeKind::Seller { psi, children } => {
                let mut p = Map::new();
                for (label, row) in self.states.iter().zip(psi) {
                    p.insert(label.clone(), json!(row));
                }
                let ch: Vec<Value> = children.iter().map(|&c| self.node_value(c)).collect();
                json!({"kind": "seller", "psi": p, "children": ch})
            }
            NodeKind::Buyer { labels, children } => {
                let mut ch = Map::new();
                for (label, &c) in labels.iter().zip(children) {
                    ch.insert(label.clone(), self.node_value(c));
                }
                json!({"kind": "buyer", "children": ch})
            }
        };
        if let (Some(name), Some(obj)) = (&node.name, v.as_object_mut()) {
            obj.insert("name".into(), json!(name));
        }
        v
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("tree serializes")
    }

    /// Parses the nested JSON form; `states` fixes the order of ω.
    pub fn from_json(text: &str, states: &[String]) -> Result<Self> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_value(&v, states)
    }

    pub fn from_value(v: &Value, states: &[String]) -> Result<Self> {
        let mut b = TreeBuilder::new(states);
        let root = parse_node(v, &mut b, states)?;
        b.build(root)
    }
}

fn parse_node(v: &Value, b: &mut TreeBuilder, states: &[String]) -> Result<usize> {
    let obj = v
        .as_object()
        .ok_or_else(|| invalid("every node must be a JSON object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("node without a \"kind\""))?;
    let id = match kind {
        "leaf" => b.leaf(),
        "transfer" => {
            let amount = obj
                .get("amount")
                .and_then(Value::as_f64)
                .ok_or_else(|| invalid("transfer node needs a numeric \"amount\""))?;
            let child = obj
                .get("child")
                .ok_or_else(|| invalid("transfer node needs exactly one \"child\""))?;
            let c = parse_node(child, b, states)?;
            b.transfer(amount, c)
        }
        "seller" => {
            let children = obj
                .get("children")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid("seller node needs a \"children\" array"))?;
            let psi_obj = obj
                .get("psi")
                .and_then(Value::as_object)
                .ok_or_else(|| invalid("seller node needs a \"psi\" object"))?;
            for key in psi_obj.keys() {
                if !states.contains(key) {
                    return Err(invalid(format!("psi names unknown state {key:?}")));
                }
            }
            let mut psi = Vec::with_capacity(states.len());
            for s in states {
                let row = psi_obj
                    .get(s)
                    .and_then(Value::as_array)
                    .ok_or_else(|| invalid(format!("psi has no row for state {s:?}")))?;
                let row: Option<Vec<f64>> = row.iter().map(Value::as_f64).collect();
                psi.push(row.ok_or_else(|| invalid("psi entries must be numbers"))?);
            }
            let ch = children
                .iter()
                .map(|c| parse_node(c, b, states))
                .collect::<Result<Vec<_>>>()?;
            b.seller(psi, ch)
        }
        "buyer" => {
            let children = obj
                .get("children")
                .and_then(Value::as_object)
                .ok_or_else(|| invalid("buyer node needs a \"children\" object"))?;
            let mut labels = Vec::new();
            let mut ch = Vec::new();
            for (label, c) in children {
                labels.push(label.clone());
                ch.push(parse_node(c, b, states)?);
            }
            b.buyer(labels, ch)
        }
        other => return Err(invalid(format!("unknown node kind {other:?}"))),
    };
    if let Some(name) = obj.get("name") {
        let name = name
            .as_str()
            .ok_or_else(|| invalid("node names must be strings"))?;
        b.name(id, name);
    }
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn states() -> Vec<String> {
        vec!["0".into(), "1".into()]
    }

    #[test]
    fn json_round_trip() {
        let (_, tree) = fixtures::separation_protocol();
        let text = tree.to_json_pretty();
        let back = ProtocolTree::from_json(&text, tree.states()).unwrap();
        assert_eq!(back.to_value(), tree.to_value());
        assert_eq!(back.len(), tree.len());
        assert!(back.find("t2").is_some());
    }

    #[test]
    fn psi_must_sum_to_one() {
        let text = r#"{"kind":"seller","psi":{"0":[0.5,0.4],"1":[1,0]},
            "children":[{"kind":"leaf"},{"kind":"leaf"}]}"#;
        let err = ProtocolTree::from_json(text, &states()).unwrap_err();
        assert!(matches!(err, Error::InvalidTree(_)));
    }

    #[test]
    fn psi_must_cover_every_state() {
        let text = r#"{"kind":"seller","psi":{"0":[1]},"children":[{"kind":"leaf"}]}"#;
        assert!(ProtocolTree::from_json(text, &states()).is_err());
        let text =
            r#"{"kind":"seller","psi":{"0":[1],"1":[1],"2":[1]},"children":[{"kind":"leaf"}]}"#;
        assert!(ProtocolTree::from_json(text, &states()).is_err());
    }

    #[test]
    fn transfer_needs_one_child() {
        let text = r#"{"kind":"transfer","amount":1.0,"children":[{"kind":"leaf"}]}"#;
        assert!(ProtocolTree::from_json(text, &states()).is_err());
    }

    #[test]
    fn shared_children_are_rejected() {
        let mut b = TreeBuilder::new(&states());
        let l = b.leaf();
        let root = b.buyer(vec!["a".into(), "b".into()], vec![l, l]);
        assert!(b.build(root).is_err());
    }

    #[test]
    fn decision_nodes_by_mode() {
        let (_, tree) = fixtures::separation_protocol();
        assert_eq!(tree.decision_nodes(Mode::Committed).len(), 1);
        assert_eq!(tree.decision_nodes(Mode::Uncommitted).len(), 3);
    }
}
