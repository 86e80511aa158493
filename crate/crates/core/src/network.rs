//! Tensor-network layers: node storage, bond graph, structure builders and
//! the dense-contraction oracle.
//!
//! Nodes are identified by their position in [`TensorNetworkLayer::nodes`].
//! Every axis of every node carries an [`IndexRef`]: either a physical index
//! (left open in the represented tensor) or one end of a bond, which names the
//! node and axis at its other end.
//!
//! The `order` of a layer is the sequence in which partial norms consume
//! nodes. Every prefix of it must be connected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix_seed;
use crate::tensor::{contract_unchecked, fill_gaussian, DenseTensor, InitParams};

pub type NodeId = usize;

/// Default cap on the number of entries [`TensorNetworkLayer::contract_dense`]
/// may materialize.
pub const DENSE_ORACLE_CAP: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexKind {
    PhysicalIn,
    PhysicalOut,
    Bond { peer_node: NodeId, peer_axis: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRef {
    #[serde(flatten)]
    pub kind: IndexKind,
    pub dim: usize,
}

impl IndexRef {
    pub fn physical_out(dim: usize) -> Self {
        IndexRef {
            kind: IndexKind::PhysicalOut,
            dim,
        }
    }

    pub fn physical_in(dim: usize) -> Self {
        IndexRef {
            kind: IndexKind::PhysicalIn,
            dim,
        }
    }

    pub fn bond(peer_node: NodeId, peer_axis: usize, dim: usize) -> Self {
        IndexRef {
            kind: IndexKind::Bond {
                peer_node,
                peer_axis,
            },
            dim,
        }
    }

    pub fn is_physical(&self) -> bool {
        !self.is_bond()
    }

    pub fn is_bond(&self) -> bool {
        matches!(self.kind, IndexKind::Bond { .. })
    }

    pub fn peer(&self) -> Option<(NodeId, usize)> {
        match self.kind {
            IndexKind::Bond {
                peer_node,
                peer_axis,
            } => Some((peer_node, peer_axis)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub tensor: DenseTensor,
    pub indices: Vec<IndexRef>,
}

impl Node {
    pub fn new(tensor: DenseTensor, indices: Vec<IndexRef>) -> Self {
        Node { tensor, indices }
    }
}

/// Structure tag, with the dimensions the builder used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Structure {
    Tt {
        nodes: usize,
        phys: usize,
        bond: usize,
    },
    Ttm {
        nodes: usize,
        phys_out: usize,
        phys_in: usize,
        bond: usize,
    },
    Peps {
        rows: usize,
        cols: usize,
        phys: usize,
        bond: usize,
    },
    Custom,
}

impl Structure {
    pub fn name(&self) -> &'static str {
        match self {
            Structure::Tt { .. } => "TT",
            Structure::Ttm { .. } => "TTM",
            Structure::Peps { .. } => "PEPS",
            Structure::Custom => "custom",
        }
    }

    pub fn is_chain(&self) -> bool {
        matches!(self, Structure::Tt { .. } | Structure::Ttm { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorNetworkLayer {
    nodes: Vec<Node>,
    structure: Structure,
    order: Vec<NodeId>,
    init: Option<InitParams>,
}

impl TensorNetworkLayer {
    /// Validating constructor for arbitrary networks.
    ///
    /// Checks axis/index agreement, bond pairing, that `order` is a
    /// permutation, and that every prefix of `order` is connected.
    pub fn from_parts(
        nodes: Vec<Node>,
        structure: Structure,
        order: Vec<NodeId>,
        init: Option<InitParams>,
    ) -> Result<Self> {
        let tn = TensorNetworkLayer {
            nodes,
            structure,
            order,
            init,
        };
        tn.validate()?;
        Ok(tn)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidArgument("network has no nodes".into()));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.indices.len() != node.tensor.rank() {
                return Err(Error::DimensionMismatch(format!(
                    "node {id} has {} index descriptors for a rank-{} tensor",
                    node.indices.len(),
                    node.tensor.rank()
                )));
            }
            for (axis, (idx, &extent)) in node.indices.iter().zip(node.tensor.shape()).enumerate() {
                if idx.dim != extent {
                    return Err(Error::DimensionMismatch(format!(
                        "node {id} axis {axis}: descriptor dim {} vs extent {extent}",
                        idx.dim
                    )));
                }
                if let Some((peer, peer_axis)) = idx.peer() {
                    let back = self
                        .nodes
                        .get(peer)
                        .filter(|_| peer != id)
                        .and_then(|p| p.indices.get(peer_axis));
                    match back {
                        Some(b) if b.peer() == Some((id, axis)) && b.dim == idx.dim => {}
                        _ => {
                            return Err(Error::BondConsistency(format!(
                                "node {id} axis {axis} points to node {peer} axis {peer_axis}, \
                                 which does not point back with dim {}",
                                idx.dim
                            )))
                        }
                    }
                }
            }
        }

        if self.order.len() != n {
            return Err(Error::InvalidArgument(format!(
                "order has {} entries for {n} nodes",
                self.order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &id in &self.order {
            if id >= n || seen[id] {
                return Err(Error::InvalidArgument(format!(
                    "order {:?} is not a permutation of the nodes",
                    self.order
                )));
            }
            seen[id] = true;
        }

        if let Some(layout) = structure_layout(&self.structure) {
            let matches = layout.len() == n
                && layout
                    .iter()
                    .zip(&self.nodes)
                    .all(|(want, node)| *want == node.indices);
            if !matches {
                return Err(Error::InvalidArgument(format!(
                    "nodes do not match the {} layout {:?}",
                    self.structure.name(),
                    self.structure
                )));
            }
        }

        let mut consumed = vec![false; n];
        consumed[self.order[0]] = true;
        for (pos, &id) in self.order.iter().enumerate().skip(1) {
            let touches = self.nodes[id]
                .indices
                .iter()
                .filter_map(IndexRef::peer)
                .any(|(peer, _)| consumed[peer]);
            if !touches {
                return Err(Error::DisconnectedPrefix(pos));
            }
            consumed[id] = true;
        }
        Ok(())
    }

    /// Tensor-train chain, ordered left to right.
    ///
    /// End nodes are `(p, b)` and `(b, p)`, interior nodes `(b, p, b)`; a single
    /// node is just `(p)`.
    pub fn build_tt(n: usize, p: usize, b: usize, init: &InitParams) -> Result<Self> {
        check_positive(&[("N", n), ("p", p), ("b", b)])?;
        Self::build(
            Structure::Tt {
                nodes: n,
                phys: p,
                bond: b,
            },
            init,
        )
    }

    /// Tensor-train matrix chain. Each node carries one output and one input
    /// physical index, in that order.
    pub fn build_ttm(
        n: usize,
        p_out: usize,
        p_in: usize,
        b: usize,
        init: &InitParams,
    ) -> Result<Self> {
        check_positive(&[("N", n), ("p_out", p_out), ("p_in", p_in), ("b", b)])?;
        Self::build(
            Structure::Ttm {
                nodes: n,
                phys_out: p_out,
                phys_in: p_in,
                bond: b,
            },
            init,
        )
    }

    /// `rows x cols` grid in row-major order. Node axes are the physical index
    /// followed by bonds to the up, left, right and down neighbours that exist.
    pub fn build_peps(
        rows: usize,
        cols: usize,
        p: usize,
        b: usize,
        init: &InitParams,
    ) -> Result<Self> {
        check_positive(&[("rows", rows), ("cols", cols), ("p", p), ("b", b)])?;
        Self::build(
            Structure::Peps {
                rows,
                cols,
                phys: p,
                bond: b,
            },
            init,
        )
    }

    fn build(structure: Structure, init: &InitParams) -> Result<Self> {
        let layout = structure_layout(&structure).expect("builder structures have a layout");
        let order = (0..layout.len()).collect();
        let nodes = layout
            .into_iter()
            .enumerate()
            .map(|(id, indices)| random_node(indices, init, id))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(nodes, structure, order, Some(*init))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn init(&self) -> Option<InitParams> {
        self.init
    }

    /// Physical index descriptors in represented-tensor axis order: all
    /// output indices by node order, then all input indices by node order.
    pub fn physical_axes(&self) -> Vec<(NodeId, usize, IndexRef)> {
        let mut outs = Vec::new();
        let mut ins = Vec::new();
        for &id in &self.order {
            for (axis, idx) in self.nodes[id].indices.iter().enumerate() {
                match idx.kind {
                    IndexKind::PhysicalOut => outs.push((id, axis, *idx)),
                    IndexKind::PhysicalIn => ins.push((id, axis, *idx)),
                    IndexKind::Bond { .. } => {}
                }
            }
        }
        outs.extend(ins);
        outs
    }

    /// Number of entries of the represented tensor (`n_A * m_A` for a matrix
    /// layer), as a float since it is routinely astronomically large.
    pub fn element_count(&self) -> f64 {
        self.physical_axes()
            .iter()
            .map(|(_, _, idx)| idx.dim as f64)
            .product()
    }

    /// Largest node volume, in entries.
    pub fn max_node_len(&self) -> usize {
        self.nodes.iter().map(|n| n.tensor.len()).max().unwrap_or(0)
    }

    /// Multiplies every entry of every node by `factor`. The represented
    /// tensor scales by `factor^N`.
    pub fn scale_all_nodes(&mut self, factor: f64) {
        assert!(
            factor.is_finite() && factor > 0.0,
            "scale factor must be finite and positive, got {factor}"
        );
        for node in &mut self.nodes {
            node.tensor.scale(factor);
        }
    }

    /// The sub-network made of the first `n` nodes in order. Bonds that leave
    /// the prefix become output physical indices.
    pub fn prefix(&self, n: usize) -> Result<TensorNetworkLayer> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "prefix length {n} outside 1..={}",
                self.len()
            )));
        }
        let mut new_id = vec![usize::MAX; self.len()];
        for (k, &id) in self.order[..n].iter().enumerate() {
            new_id[id] = k;
        }
        let nodes = self.order[..n]
            .iter()
            .map(|&id| {
                let node = &self.nodes[id];
                let indices = node
                    .indices
                    .iter()
                    .map(|idx| match idx.peer() {
                        Some((peer, axis)) if new_id[peer] != usize::MAX => {
                            IndexRef::bond(new_id[peer], axis, idx.dim)
                        }
                        Some(_) => IndexRef::physical_out(idx.dim),
                        None => *idx,
                    })
                    .collect();
                Node::new(node.tensor.clone(), indices)
            })
            .collect();
        TensorNetworkLayer::from_parts(nodes, Structure::Custom, (0..n).collect(), None)
    }

    pub fn contract_dense(&self) -> Result<DenseTensor> {
        self.contract_dense_with_cap(DENSE_ORACLE_CAP)
    }

    /// Materializes the represented tensor by contracting nodes one at a time
    /// in network order. Axes follow [`Self::physical_axes`].
    pub fn contract_dense_with_cap(&self, cap: usize) -> Result<DenseTensor> {
        let entries: u128 = self
            .physical_axes()
            .iter()
            .map(|(_, _, idx)| idx.dim as u128)
            .product();
        if entries > cap as u128 {
            return Err(Error::OracleTooLarge { entries, cap });
        }

        // acc axes: [physical axes consumed so far.., open bond ends..]
        let mut acc = DenseTensor::scalar(1.0);
        let mut phys: Vec<(NodeId, usize, IndexKind)> = Vec::new();
        let mut open: Vec<(NodeId, usize)> = Vec::new();
        let mut consumed = vec![false; self.len()];

        for &id in &self.order {
            let node = &self.nodes[id];
            let mut acc_axes = Vec::new();
            let mut node_axes = Vec::new();
            for (axis, idx) in node.indices.iter().enumerate() {
                if let Some((peer, _)) = idx.peer() {
                    if consumed[peer] {
                        let pos = open
                            .iter()
                            .position(|&e| e == (id, axis))
                            .expect("open bond end tracked");
                        acc_axes.push(phys.len() + pos);
                        node_axes.push(axis);
                    }
                }
            }
            let out = contract_unchecked(&acc, &acc_axes, &node.tensor, &node_axes);

            let kept_open: Vec<(NodeId, usize)> = open
                .iter()
                .enumerate()
                .filter(|(k, _)| !acc_axes.contains(&(phys.len() + k)))
                .map(|(_, &e)| e)
                .collect();
            let node_free: Vec<usize> = (0..node.indices.len())
                .filter(|ax| !node_axes.contains(ax))
                .collect();

            // out axes: [phys.., kept_open.., node_free..]
            //   -> [phys.., node physical.., kept_open.., node bonds..]
            let old_phys = phys.len();
            let base = old_phys + kept_open.len();
            let mut perm: Vec<usize> = (0..old_phys).collect();
            let mut new_open = kept_open;
            let mut bond_slots = Vec::new();
            for (k, &ax) in node_free.iter().enumerate() {
                let idx = node.indices[ax];
                match idx.peer() {
                    None => {
                        perm.push(base + k);
                        phys.push((id, ax, idx.kind));
                    }
                    Some(_) => bond_slots.push((k, ax)),
                }
            }
            perm.extend(old_phys..base);
            for (k, ax) in bond_slots {
                perm.push(base + k);
                new_open.push(node.indices[ax].peer().expect("bond slot"));
            }
            acc = out.permute_unchecked(&perm);
            open = new_open;
            consumed[id] = true;
        }
        debug_assert!(open.is_empty());

        // Reorder physical axes: outputs first, then inputs, each by consumption order.
        let perm: Vec<usize> = (0..phys.len())
            .filter(|&k| phys[k].2 == IndexKind::PhysicalOut)
            .chain((0..phys.len()).filter(|&k| phys[k].2 == IndexKind::PhysicalIn))
            .collect();
        Ok(acc.permute_unchecked(&perm))
    }
}

fn check_positive(dims: &[(&str, usize)]) -> Result<()> {
    for &(name, v) in dims {
        if v == 0 {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
    }
    Ok(())
}

fn random_node(indices: Vec<IndexRef>, init: &InitParams, id: NodeId) -> Result<Node> {
    let shape: Vec<usize> = indices.iter().map(|i| i.dim).collect();
    let seed = mix_seed(&[init.seed, id as u64]);
    let tensor = fill_gaussian(&shape, init.mean, init.std, seed, init.positive)?;
    Ok(Node::new(tensor, indices))
}

/// Index descriptors of every node of a builder structure, in builder order.
/// `None` for custom networks.
pub(crate) fn structure_layout(structure: &Structure) -> Option<Vec<Vec<IndexRef>>> {
    match *structure {
        Structure::Tt { nodes, phys, bond } => {
            Some(chain_layout(nodes, &[IndexRef::physical_out(phys)], bond))
        }
        Structure::Ttm {
            nodes,
            phys_out,
            phys_in,
            bond,
        } => Some(chain_layout(
            nodes,
            &[
                IndexRef::physical_out(phys_out),
                IndexRef::physical_in(phys_in),
            ],
            bond,
        )),
        Structure::Peps {
            rows,
            cols,
            phys,
            bond,
        } => Some(grid_layout(rows, cols, phys, bond)),
        Structure::Custom => None,
    }
}

/// Chain nodes laid out as `[left bond?, physical.., right bond?]`.
fn chain_layout(n: usize, physical: &[IndexRef], b: usize) -> Vec<Vec<IndexRef>> {
    let np = physical.len();
    // axis holding the right bond of node k
    let right_axis = |k: usize| if k == 0 { np } else { np + 1 };
    (0..n)
        .map(|k| {
            let mut indices = Vec::with_capacity(np + 2);
            if k > 0 {
                indices.push(IndexRef::bond(k - 1, right_axis(k - 1), b));
            }
            indices.extend_from_slice(physical);
            if k + 1 < n {
                indices.push(IndexRef::bond(k + 1, 0, b));
            }
            indices
        })
        .collect()
}

/// Grid nodes laid out as `[physical, up?, left?, right?, down?]`.
fn grid_layout(rows: usize, cols: usize, p: usize, b: usize) -> Vec<Vec<IndexRef>> {
    let id = |r: usize, c: usize| r * cols + c;
    let neighbours = |r: usize, c: usize| {
        let mut v = Vec::with_capacity(4);
        if r > 0 {
            v.push(id(r - 1, c));
        }
        if c > 0 {
            v.push(id(r, c - 1));
        }
        if c + 1 < cols {
            v.push(id(r, c + 1));
        }
        if r + 1 < rows {
            v.push(id(r + 1, c));
        }
        v
    };
    let mut layout = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let me = id(r, c);
            let mut indices = vec![IndexRef::physical_out(p)];
            for peer in neighbours(r, c) {
                let back = neighbours(peer / cols, peer % cols)
                    .iter()
                    .position(|&q| q == me)
                    .expect("grid adjacency is symmetric");
                indices.push(IndexRef::bond(peer, back + 1, b));
            }
            layout.push(indices);
        }
    }
    layout
}
