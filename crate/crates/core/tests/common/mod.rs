#![allow(dead_code)]

use proptest::prelude::*;
use tnr_core::{DenseTensor, IndexKind, InitParams, TensorNetworkLayer};

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Which builder a generated network comes from.
#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Tt {
        n: usize,
        p: usize,
        b: usize,
    },
    Ttm {
        n: usize,
        po: usize,
        pi: usize,
        b: usize,
    },
    Peps {
        rows: usize,
        cols: usize,
        p: usize,
        b: usize,
    },
}

impl Shape {
    pub fn build(self, init: &InitParams) -> TensorNetworkLayer {
        match self {
            Shape::Tt { n, p, b } => TensorNetworkLayer::build_tt(n, p, b, init),
            Shape::Ttm { n, po, pi, b } => TensorNetworkLayer::build_ttm(n, po, pi, b, init),
            Shape::Peps { rows, cols, p, b } => {
                TensorNetworkLayer::build_peps(rows, cols, p, b, init)
            }
        }
        .unwrap()
    }
}

pub fn tt_shape() -> impl Strategy<Value = Shape> {
    (1usize..=6, 1usize..=3, 1usize..=3).prop_map(|(n, p, b)| Shape::Tt { n, p, b })
}

pub fn ttm_shape() -> impl Strategy<Value = Shape> {
    (1usize..=6, 1usize..=3, 1usize..=3, 1usize..=3).prop_map(|(n, po, pi, b)| Shape::Ttm {
        n,
        po,
        pi,
        b,
    })
}

pub fn peps_shape() -> impl Strategy<Value = Shape> {
    (1usize..=2, 1usize..=3, 1usize..=3, 1usize..=3).prop_map(|(rows, cols, p, b)| Shape::Peps {
        rows,
        cols,
        p,
        b,
    })
}

pub fn any_shape() -> impl Strategy<Value = Shape> {
    prop_oneof![tt_shape(), ttm_shape(), peps_shape()]
}

pub fn network() -> impl Strategy<Value = TensorNetworkLayer> {
    (any_shape(), any::<u64>())
        .prop_map(|(shape, seed)| shape.build(&InitParams::gaussian(1.0, 0.5, seed)))
}

/// Evaluates every entry of the represented tensor by summing the product of
/// node entries over every assignment of every bond, one physical index
/// assignment at a time. Axis order follows `physical_axes`.
pub fn naive_dense(tn: &TensorNetworkLayer) -> DenseTensor {
    let phys = tn.physical_axes();
    let mut bonds = Vec::new();
    for (id, node) in tn.nodes().iter().enumerate() {
        for (ax, idx) in node.indices.iter().enumerate() {
            if let IndexKind::Bond {
                peer_node,
                peer_axis,
            } = idx.kind
            {
                if (id, ax) < (peer_node, peer_axis) {
                    bonds.push(((id, ax), (peer_node, peer_axis), idx.dim));
                }
            }
        }
    }
    let shape: Vec<usize> = phys.iter().map(|p| p.2.dim).collect();
    let total: usize = shape.iter().product();
    let bond_total: usize = bonds.iter().map(|b| b.2).product();
    let mut assign: Vec<Vec<usize>> = tn
        .nodes()
        .iter()
        .map(|n| vec![0; n.indices.len()])
        .collect();
    let mut data = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        for (k, &(id, ax, _)) in phys.iter().enumerate().rev() {
            assign[id][ax] = rest % shape[k];
            rest /= shape[k];
        }
        let mut acc = 0.0;
        for bflat in 0..bond_total {
            let mut rest = bflat;
            for &((a, ax), (b, bx), d) in bonds.iter().rev() {
                assign[a][ax] = rest % d;
                assign[b][bx] = rest % d;
                rest /= d;
            }
            let mut prod = 1.0;
            for (id, node) in tn.nodes().iter().enumerate() {
                prod *= node.tensor.get(&assign[id]).unwrap();
            }
            acc += prod;
        }
        data.push(acc);
    }
    DenseTensor::new(shape, data).unwrap()
}
