use serde::{Deserialize, Serialize};

/// A node of a binary decision tree stored in a flat arena; the root is
/// node 0.
///
/// A split sends `value <= threshold` left, larger values right and missing
/// values toward `default_left`. `cover` is the number of training rows that
/// reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        cover: f64,
        gain: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn constant(value: f64, cover: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    /// Child taken at split node `node` for the given cell.
    pub fn route(&self, node: usize, cell: Option<f64>) -> usize {
        match &self.nodes[node] {
            Node::Split {
                threshold,
                default_left,
                left,
                right,
                ..
            } => {
                let go_left = match cell {
                    Some(v) => v <= *threshold,
                    None => *default_left,
                };
                if go_left {
                    *left
                } else {
                    *right
                }
            }
            Node::Leaf { .. } => node,
        }
    }

    /// Index of the leaf reached by a row, given a cell accessor.
    pub fn leaf_index(&self, cell: impl Fn(usize) -> Option<f64>) -> usize {
        let mut node = 0;
        while let Node::Split { feature, .. } = &self.nodes[node] {
            node = self.route(node, cell(*feature));
        }
        node
    }

    pub fn predict(&self, cell: impl Fn(usize) -> Option<f64>) -> f64 {
        match &self.nodes[self.leaf_index(cell)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, node: usize) -> usize {
            match &t.nodes[node] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}
