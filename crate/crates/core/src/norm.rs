//! Full and partial norms of a layer, computed node by node without ever
//! materializing the represented tensor.
//!
//! Both methods carry an *environment*: the contraction of the nodes consumed
//! so far, left open on every bond that crosses from the consumed prefix to the
//! rest of the network (the cut).
//!
//! * Frobenius: the layer is contracted against a copy of itself. The
//!   environment has one axis per cut bond for the layer followed by one per
//!   cut bond for the copy, in the same order, so it reshapes to a square
//!   matrix. Its trace is the squared Frobenius norm of the prefix with every
//!   cut bond treated as a physical index.
//! * Linear: physical indices are summed (contracted with ones vectors). The
//!   environment has one axis per cut bond; summing all of its entries closes
//!   the cut the same way.
//!
//! At `n = N` the cut is empty and both reductions give the full norm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NodeId, TensorNetworkLayer};
use crate::tensor::{contract_unchecked, DenseTensor};
use crate::value::{NormValue, UNDERFLOW_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Frobenius,
    Linear,
}

impl Method {
    /// Power of a uniform node scale factor picked up by the method's norm
    /// quantity per node: squared Frobenius norms scale as `c^(2n)`, linear
    /// norms as `c^n`.
    pub fn degree(self) -> u32 {
        match self {
            Method::Frobenius => 2,
            Method::Linear => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Frobenius => "frobenius",
            Method::Linear => "linear",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frobenius" | "frob" | "f" => Ok(Method::Frobenius),
            "linear" | "lineal" | "l" => Ok(Method::Linear),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Partial-contraction state for incremental partial norms.
#[derive(Debug, Clone)]
pub struct EnvironmentCache {
    method: Method,
    prefix_len: usize,
    env: DenseTensor,
    /// Unconsumed endpoint `(node, axis)` of every cut bond, in env axis order.
    cut: Vec<(NodeId, usize)>,
    consumed: Vec<bool>,
    valid: bool,
}

impl EnvironmentCache {
    pub fn new(method: Method) -> Self {
        EnvironmentCache {
            method,
            prefix_len: 0,
            env: DenseTensor::scalar(1.0),
            cut: Vec::new(),
            consumed: Vec::new(),
            valid: true,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn env(&self) -> &DenseTensor {
        &self.env
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn invalidate(&mut self) {
        self.valid = false;
    }

    /// The partial norm at the current prefix, re-derived from the stored
    /// environment.
    pub fn current(&self) -> NormValue {
        reduce(self.method, &self.env)
    }

    /// Consumes the next node in network order and returns the partial norm
    /// at the new prefix length.
    ///
    /// If the result is not a positive normal float the cache is left at its
    /// previous prefix, still valid, and the Overflow/Underflow state is
    /// returned.
    pub fn extend(&mut self, tn: &TensorNetworkLayer) -> Result<NormValue> {
        if !self.valid {
            return Err(Error::MustRebuild);
        }
        if self.prefix_len >= tn.len() {
            return Err(Error::InvalidArgument(format!(
                "cache already covers all {} nodes",
                tn.len()
            )));
        }
        if self.consumed.len() != tn.len() {
            if self.prefix_len != 0 {
                return Err(Error::InvalidArgument(
                    "cache was built for a network of a different size".into(),
                ));
            }
            self.consumed = vec![false; tn.len()];
        }

        let id = tn.order()[self.prefix_len];
        let (env, cut) = match self.method {
            Method::Frobenius => self.step_frobenius(tn, id),
            Method::Linear => self.step_linear(tn, id),
        };

        let mut value = reduce(self.method, &env);
        if value.is_finite() && env.data().iter().any(|x| !x.is_finite()) {
            value = NormValue::Overflow;
        }
        if value.is_finite() {
            self.env = env;
            self.cut = cut;
            self.consumed[id] = true;
            self.prefix_len += 1;
        }
        Ok(value)
    }

    /// Extends until `n` nodes are consumed or a partial norm fails, returning
    /// the last value computed.
    pub fn extend_to(&mut self, tn: &TensorNetworkLayer, n: usize) -> Result<NormValue> {
        let mut last = self.current();
        while self.prefix_len < n {
            last = self.extend(tn)?;
            if !last.is_finite() {
                break;
            }
        }
        Ok(last)
    }

    /// Brings the environment in line with a network whose nodes were all
    /// multiplied by `factor` after the environment was built.
    ///
    /// Clears the valid flag if the rescaled environment is non-finite or
    /// entirely below the normal range.
    pub fn rescale(&mut self, factor: f64) {
        if !self.valid {
            return;
        }
        let power = self.method.degree() as i32 * self.prefix_len as i32;
        let whole = factor.powi(power);
        if whole.is_finite() && whole >= UNDERFLOW_THRESHOLD {
            self.env.scale(whole);
        } else {
            // the combined power leaves the float range; apply it piecewise
            for _ in 0..power {
                self.env.scale(factor);
            }
        }
        let data = self.env.data();
        if data.iter().any(|x| !x.is_finite()) || data.iter().all(|x| x.abs() < UNDERFLOW_THRESHOLD)
        {
            self.valid = false;
        }
    }

    /// Splits the axes of `node` into (position in `cut`, node axis) pairs for
    /// bonds into the consumed prefix, physical axes, and bonds leaving it.
    fn classify(
        &self,
        tn: &TensorNetworkLayer,
        id: NodeId,
    ) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
        let node = tn.node(id);
        let mut inward = Vec::new();
        let mut physical = Vec::new();
        let mut outward = Vec::new();
        for (axis, idx) in node.indices.iter().enumerate() {
            match idx.peer() {
                Some((peer, _)) if self.consumed[peer] => {
                    let pos = self
                        .cut
                        .iter()
                        .position(|&e| e == (id, axis))
                        .expect("cut bond tracked in environment");
                    inward.push((pos, axis));
                }
                Some(_) => outward.push(axis),
                None => physical.push(axis),
            }
        }
        (inward, physical, outward)
    }

    fn next_cut(
        &self,
        tn: &TensorNetworkLayer,
        id: NodeId,
        inward: &[(usize, usize)],
        outward: &[usize],
    ) -> Vec<(NodeId, usize)> {
        let node = tn.node(id);
        self.cut
            .iter()
            .enumerate()
            .filter(|(k, _)| !inward.iter().any(|&(pos, _)| pos == *k))
            .map(|(_, &e)| e)
            .chain(
                outward
                    .iter()
                    .map(|&ax| node.indices[ax].peer().expect("bond")),
            )
            .collect()
    }

    fn step_frobenius(
        &self,
        tn: &TensorNetworkLayer,
        id: NodeId,
    ) -> (DenseTensor, Vec<(NodeId, usize)>) {
        let node = &tn.node(id).tensor;
        let (inward, physical, outward) = self.classify(tn, id);
        let m = self.cut.len();
        let r = inward.len();

        // layer side: env axes [net cut.., copy cut..] against the node's inward bonds
        let env_axes: Vec<usize> = inward.iter().map(|&(pos, _)| pos).collect();
        let node_axes: Vec<usize> = inward.iter().map(|&(_, ax)| ax).collect();
        let t1 = contract_unchecked(&self.env, &env_axes, node, &node_axes);
        // t1 axes: [net rest (m-r), copy cut (m), node free (phys + outward, ascending)]
        let node_free: Vec<usize> = (0..node.rank())
            .filter(|ax| !node_axes.contains(ax))
            .collect();
        let free_pos =
            |ax: usize| 2 * m - r + node_free.iter().position(|&a| a == ax).expect("free axis");

        // copy side: pair the copy's cut axes and all physical axes with a second copy of the node
        let mut t1_axes: Vec<usize> = inward.iter().map(|&(pos, _)| m - r + pos).collect();
        t1_axes.extend(physical.iter().map(|&ax| free_pos(ax)));
        let mut copy_axes = node_axes.clone();
        copy_axes.extend(physical.iter().copied());
        let t2 = contract_unchecked(&t1, &t1_axes, node, &copy_axes);
        // t2 axes: [net rest (m-r), copy rest (m-r), net outward (o), copy outward (o)]
        let o = outward.len();
        let rest = m - r;
        let perm: Vec<usize> = (0..rest)
            .chain(2 * rest..2 * rest + o)
            .chain(rest..2 * rest)
            .chain(2 * rest + o..2 * rest + 2 * o)
            .collect();
        let env = t2.permute_unchecked(&perm);
        (env, self.next_cut(tn, id, &inward, &outward))
    }

    fn step_linear(
        &self,
        tn: &TensorNetworkLayer,
        id: NodeId,
    ) -> (DenseTensor, Vec<(NodeId, usize)>) {
        let node = &tn.node(id).tensor;
        let (inward, physical, outward) = self.classify(tn, id);
        let rest = self.cut.len() - inward.len();

        let env_axes: Vec<usize> = inward.iter().map(|&(pos, _)| pos).collect();
        let node_axes: Vec<usize> = inward.iter().map(|&(_, ax)| ax).collect();
        let t1 = contract_unchecked(&self.env, &env_axes, node, &node_axes);
        // t1 axes: [cut rest, node free (phys + outward, ascending)]
        let node_free: Vec<usize> = (0..node.rank())
            .filter(|ax| !node_axes.contains(ax))
            .collect();
        let phys_pos: Vec<usize> = physical
            .iter()
            .map(|&ax| rest + node_free.iter().position(|&a| a == ax).expect("free axis"))
            .collect();
        let ones_shape: Vec<usize> = physical.iter().map(|&ax| node.shape()[ax]).collect();
        let ones = DenseTensor::ones(&ones_shape);
        let ones_axes: Vec<usize> = (0..physical.len()).collect();
        let env = contract_unchecked(&t1, &phys_pos, &ones, &ones_axes);
        (env, self.next_cut(tn, id, &inward, &outward))
    }
}

fn reduce(method: Method, env: &DenseTensor) -> NormValue {
    match method {
        Method::Frobenius => {
            let side = (env.len() as f64).sqrt().round() as usize;
            debug_assert_eq!(side * side, env.len());
            let data = env.data();
            let trace = (0..side).fold(0.0f64, |acc, i| acc + data[i * side + i]);
            NormValue::from_square_sum(trace)
        }
        Method::Linear => crate::tensor::sum_of_entries(env),
    }
}

/// Partial norm at `n` nodes, from scratch.
pub fn partial_norm(tn: &TensorNetworkLayer, method: Method, n: usize) -> Result<NormValue> {
    if n == 0 || n > tn.len() {
        return Err(Error::InvalidArgument(format!(
            "partial norm at {n} nodes of a {}-node network",
            tn.len()
        )));
    }
    let mut cache = EnvironmentCache::new(method);
    cache.extend_to(tn, n)
}

fn full_norm(tn: &TensorNetworkLayer, method: Method) -> NormValue {
    partial_norm(tn, method, tn.len()).expect("fresh cache over a validated network")
}

/// Squared Frobenius norm of the represented tensor.
pub fn frobenius_norm_sq(tn: &TensorNetworkLayer) -> NormValue {
    full_norm(tn, Method::Frobenius)
}

/// Sum of all entries of the represented tensor.
pub fn linear_norm(tn: &TensorNetworkLayer) -> NormValue {
    full_norm(tn, Method::Linear)
}

/// The norm a protocol targets: `||A||_F` (unsquared) or `||A||_L`.
pub fn method_norm(tn: &TensorNetworkLayer, method: Method) -> NormValue {
    match method {
        Method::Frobenius => frobenius_norm_sq(tn).sqrt(),
        Method::Linear => linear_norm(tn),
    }
}

/// Natural log of `||A||_F^2` or `||A||_L` for chain layers, immune to
/// overflow and underflow.
///
/// Sweeps the chain left to right with a transfer environment that is divided
/// by its largest magnitude after every node, accumulating the logs of those
/// divisors. A zero norm gives `-inf`; a negative linear total gives NaN.
pub fn log_norm_reference(tn: &TensorNetworkLayer, method: Method) -> Result<f64> {
    if !tn.structure().is_chain() {
        return Err(Error::UnsupportedStructure(format!(
            "log reference needs a TT or TT-M chain, got {}",
            tn.structure().name()
        )));
    }
    let n = tn.len();
    // env over the right bond of the previous node; [l, l'] for frobenius, [l] for linear
    let mut env = vec![1.0f64];
    let mut left = 1usize;
    let mut log_acc = 0.0f64;
    for k in 0..n {
        let node = tn.node(tn.order()[k]);
        let shape = node.tensor.shape();
        let right = if k + 1 < n {
            *shape.last().expect("bond axis")
        } else {
            1
        };
        let phys = node.tensor.len() / (left * right);
        let a = node.tensor.data();
        let at = |l: usize, s: usize, r: usize| a[(l * phys + s) * right + r];

        let next = match method {
            Method::Frobenius => {
                let mut out = vec![0.0f64; right * right];
                for l in 0..left {
                    for lp in 0..left {
                        let e = env[l * left + lp];
                        if e == 0.0 {
                            continue;
                        }
                        for s in 0..phys {
                            for r in 0..right {
                                let x = e * at(l, s, r);
                                for rp in 0..right {
                                    out[r * right + rp] += x * at(lp, s, rp);
                                }
                            }
                        }
                    }
                }
                out
            }
            Method::Linear => {
                let mut out = vec![0.0f64; right];
                for (l, &e) in env.iter().enumerate().take(left) {
                    for s in 0..phys {
                        for (r, o) in out.iter_mut().enumerate() {
                            *o += e * at(l, s, r);
                        }
                    }
                }
                out
            }
        };
        let scale = next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        env = next.into_iter().map(|x| x / scale).collect();
        log_acc += scale.ln();
        left = right;
    }
    Ok(log_acc + env[0].ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{sum_of_entries, sum_of_squares, InitParams};

    fn all_ones_tt() -> TensorNetworkLayer {
        TensorNetworkLayer::build_tt(3, 2, 2, &InitParams::constant(1.0)).unwrap()
    }

    #[test]
    fn partial_norms_of_all_ones_tt() {
        let tn = all_ones_tt();
        let mut f = EnvironmentCache::new(Method::Frobenius);
        let got: Vec<f64> = (0..3)
            .map(|_| f.extend(&tn).unwrap().finite().unwrap())
            .collect();
        assert_eq!(got, vec![4.0, 32.0, 128.0]);
        assert_eq!(f.env().shape(), &[] as &[usize]);

        let mut l = EnvironmentCache::new(Method::Linear);
        let got: Vec<f64> = (0..3)
            .map(|_| l.extend(&tn).unwrap().finite().unwrap())
            .collect();
        assert_eq!(got, vec![4.0, 16.0, 32.0]);
    }

    #[test]
    fn tt_environment_shapes() {
        let tn = TensorNetworkLayer::build_tt(4, 2, 3, &InitParams::default()).unwrap();
        let mut f = EnvironmentCache::new(Method::Frobenius);
        f.extend(&tn).unwrap();
        assert_eq!(f.env().shape(), &[3, 3]);
        let mut l = EnvironmentCache::new(Method::Linear);
        l.extend(&tn).unwrap();
        assert_eq!(l.env().shape(), &[3]);
    }

    #[test]
    fn extending_past_the_end_or_invalid_errors() {
        let tn = all_ones_tt();
        let mut c = EnvironmentCache::new(Method::Frobenius);
        c.extend_to(&tn, 3).unwrap();
        assert!(matches!(c.extend(&tn), Err(Error::InvalidArgument(_))));
        let mut c = EnvironmentCache::new(Method::Linear);
        c.invalidate();
        assert!(matches!(c.extend(&tn), Err(Error::MustRebuild)));
    }

    #[test]
    fn full_norms_small_cases() {
        let tn = all_ones_tt();
        assert_eq!(frobenius_norm_sq(&tn), NormValue::Finite { value: 128.0 });
        assert_eq!(linear_norm(&tn), NormValue::Finite { value: 32.0 });

        let single = |data: Vec<f64>| {
            let t = DenseTensor::new(vec![data.len()], data).unwrap();
            let idx = vec![crate::IndexRef::physical_out(t.len())];
            TensorNetworkLayer::from_parts(
                vec![crate::Node::new(t, idx)],
                crate::Structure::Custom,
                vec![0],
                None,
            )
            .unwrap()
        };
        assert_eq!(
            frobenius_norm_sq(&single(vec![3.0, 4.0])),
            NormValue::Finite { value: 25.0 }
        );
        assert_eq!(
            linear_norm(&single(vec![1.0, 2.0, 3.0])),
            NormValue::Finite { value: 6.0 }
        );
    }

    #[test]
    fn constant_thousand_chain_overflows() {
        let tn = TensorNetworkLayer::build_tt(40, 10, 10, &InitParams::constant(1000.0)).unwrap();
        assert!(frobenius_norm_sq(&tn).is_overflow());
        let log = log_norm_reference(&tn, Method::Frobenius).unwrap();
        assert!(log > f64::MAX.ln());
    }

    #[test]
    fn failed_extension_keeps_last_state() {
        let tn = TensorNetworkLayer::build_tt(40, 10, 10, &InitParams::constant(1000.0)).unwrap();
        let mut c = EnvironmentCache::new(Method::Frobenius);
        let mut last = NormValue::Overflow;
        loop {
            let v = c.extend(&tn).unwrap();
            if !v.is_finite() {
                break;
            }
            last = v;
        }
        assert!(c.is_valid());
        assert_eq!(c.current(), last);
        let before = c.prefix_len();
        assert!(c.extend(&tn).unwrap().is_overflow());
        assert_eq!(c.prefix_len(), before);
    }

    #[test]
    fn rescale_matches_rebuild() {
        let init = InitParams::gaussian(1.0, 0.5, 11);
        let mut tn = TensorNetworkLayer::build_tt(6, 3, 2, &init).unwrap();
        for method in [Method::Frobenius, Method::Linear] {
            let mut cache = EnvironmentCache::new(method);
            cache.extend_to(&tn, 4).unwrap();
            let mut scaled = tn.clone();
            scaled.scale_all_nodes(1.7);
            cache.rescale(1.7);
            let mut fresh = EnvironmentCache::new(method);
            fresh.extend_to(&scaled, 4).unwrap();
            for (a, b) in cache.env().data().iter().zip(fresh.env().data()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
            }
        }
        let mut cache = EnvironmentCache::new(Method::Frobenius);
        cache.extend_to(&tn, 2).unwrap();
        let before = cache.env().clone();
        cache.rescale(1.0);
        assert_eq!(cache.env(), &before);
        cache.rescale(2.0);
        for (a, b) in cache.env().data().iter().zip(before.data()) {
            assert_eq!(*a, 16.0 * b);
        }
        tn.scale_all_nodes(1.0);
    }

    #[test]
    fn rescale_out_of_range_invalidates() {
        let tn = all_ones_tt();
        let mut cache = EnvironmentCache::new(Method::Frobenius);
        cache.extend_to(&tn, 2).unwrap();
        cache.rescale(1e100);
        assert!(!cache.is_valid());
        let mut cache = EnvironmentCache::new(Method::Linear);
        cache.extend_to(&tn, 2).unwrap();
        cache.rescale(1e-200);
        assert!(!cache.is_valid());
    }

    #[test]
    fn norms_agree_with_dense_on_peps() {
        let init = InitParams::gaussian(1.0, 0.5, 5);
        let tn = TensorNetworkLayer::build_peps(2, 3, 2, 2, &init).unwrap();
        let dense = tn.contract_dense().unwrap();
        let f = frobenius_norm_sq(&tn).finite().unwrap();
        let want = sum_of_squares(&dense).finite().unwrap();
        assert!((f - want).abs() <= 1e-10 * want);
        let l = linear_norm(&tn).finite().unwrap();
        let want = sum_of_entries(&dense).finite().unwrap();
        assert!((l - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn log_reference_matches_finite_path() {
        let tn = all_ones_tt();
        let f = log_norm_reference(&tn, Method::Frobenius).unwrap();
        assert!((f - 128f64.ln()).abs() < 1e-12);
        let l = log_norm_reference(&tn, Method::Linear).unwrap();
        assert!((l - 32f64.ln()).abs() < 1e-12);
        let peps = TensorNetworkLayer::build_peps(2, 2, 2, 2, &InitParams::default()).unwrap();
        assert!(matches!(
            log_norm_reference(&peps, Method::Frobenius),
            Err(Error::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("Frobenius".parse::<Method>().unwrap(), Method::Frobenius);
        assert_eq!("lineal".parse::<Method>().unwrap(), Method::Linear);
        assert!("l2".parse::<Method>().is_err());
    }
}
