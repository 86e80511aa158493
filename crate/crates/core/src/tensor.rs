//! Dense row-major tensors and pairwise contraction.
//!
//! Contraction is done by permuting both operands into matrix form and running
//! a plain triple loop. Every output entry accumulates its products in
//! ascending flat order of the contracted multi-index, starting from `0.0`, so
//! results are bit-reproducible and agree exactly with a naive nested-loop
//! evaluation that uses the same order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::NormValue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let volume: usize = shape.iter().product();
        if volume != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {volume} entries, got {}",
                data.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        DenseTensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let volume = shape.iter().product();
        DenseTensor {
            shape: shape.to_vec(),
            data: vec![value; volume],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, 1.0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, d)| i >= d) {
            return None;
        }
        let flat = index
            .iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum::<usize>();
        Some(self.data[flat])
    }

    /// Multiplies every entry by `factor` in place.
    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Returns the tensor with axes reordered so that output axis `k` is input
    /// axis `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseTensor> {
        check_permutation(perm, self.rank())?;
        Ok(self.permute_unchecked(perm))
    }

    pub(crate) fn permute_unchecked(&self, perm: &[usize]) -> DenseTensor {
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return self.clone();
        }
        let in_strides = self.strides();
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut counter = vec![0usize; out_shape.len()];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            // odometer increment over the output shape
            for ax in (0..out_shape.len()).rev() {
                counter[ax] += 1;
                src += src_strides[ax];
                if counter[ax] < out_shape[ax] {
                    break;
                }
                src -= src_strides[ax] * out_shape[ax];
                counter[ax] = 0;
            }
        }
        DenseTensor {
            shape: out_shape,
            data,
        }
    }

    /// Reinterprets the data under a new shape of equal volume.
    pub fn reshape(self, shape: Vec<usize>) -> Result<DenseTensor> {
        DenseTensor::new(shape, self.data)
    }
}

pub(crate) fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

fn check_permutation(perm: &[usize], rank: usize) -> Result<()> {
    if perm.len() != rank {
        return Err(Error::InvalidArgument(format!(
            "permutation {perm:?} does not match rank {rank}"
        )));
    }
    let mut seen = vec![false; rank];
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{rank}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

fn check_axes(axes: &[usize], rank: usize, which: &str) -> Result<()> {
    let mut seen = vec![false; rank];
    for &ax in axes {
        if ax >= rank {
            return Err(Error::InvalidArgument(format!(
                "axis {ax} out of range for {which} of rank {rank}"
            )));
        }
        if seen[ax] {
            return Err(Error::InvalidArgument(format!(
                "axis {ax} repeated in {which}"
            )));
        }
        seen[ax] = true;
    }
    Ok(())
}

/// Contracts `a` and `b` over the paired axes `axes_a[k] <-> axes_b[k]`.
///
/// The free axes of `a` (in their original order) come first in the result,
/// followed by the free axes of `b`. Empty axis lists give the outer product.
pub fn contract(
    a: &DenseTensor,
    axes_a: &[usize],
    b: &DenseTensor,
    axes_b: &[usize],
) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::InvalidArgument(format!(
            "axis lists differ in length: {} vs {}",
            axes_a.len(),
            axes_b.len()
        )));
    }
    check_axes(axes_a, a.rank(), "left operand")?;
    check_axes(axes_b, b.rank(), "right operand")?;
    for (&xa, &xb) in axes_a.iter().zip(axes_b) {
        if a.shape[xa] != b.shape[xb] {
            return Err(Error::DimensionMismatch(format!(
                "axis {xa} (extent {}) paired with axis {xb} (extent {})",
                a.shape[xa], b.shape[xb]
            )));
        }
    }
    Ok(contract_unchecked(a, axes_a, b, axes_b))
}

pub(crate) fn contract_unchecked(
    a: &DenseTensor,
    axes_a: &[usize],
    b: &DenseTensor,
    axes_b: &[usize],
) -> DenseTensor {
    let free_a: Vec<usize> = (0..a.rank()).filter(|ax| !axes_a.contains(ax)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|ax| !axes_b.contains(ax)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let lhs = a.permute_unchecked(&perm_a);
    let rhs = b.permute_unchecked(&perm_b);

    let rows: usize = free_a.iter().map(|&ax| a.shape[ax]).product();
    let inner: usize = axes_a.iter().map(|&ax| a.shape[ax]).product();
    let cols: usize = free_b.iter().map(|&ax| b.shape[ax]).product();

    let mut out = vec![0.0f64; rows * cols];
    for i in 0..rows {
        let lrow = &lhs.data[i * inner..(i + 1) * inner];
        let orow = &mut out[i * cols..(i + 1) * cols];
        for (k, &av) in lrow.iter().enumerate() {
            let rrow = &rhs.data[k * cols..(k + 1) * cols];
            for (o, &bv) in orow.iter_mut().zip(rrow) {
                *o += av * bv;
            }
        }
    }

    let shape = free_a
        .iter()
        .map(|&ax| a.shape[ax])
        .chain(free_b.iter().map(|&ax| b.shape[ax]))
        .collect();
    DenseTensor { shape, data: out }
}

/// Parameters of the Gaussian node initializer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitParams {
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
    /// Replace every sample by its absolute value.
    pub positive: bool,
}

impl InitParams {
    pub fn gaussian(mean: f64, std: f64, seed: u64) -> Self {
        InitParams {
            mean,
            std,
            seed,
            positive: false,
        }
    }

    /// Every entry equal to `value`.
    pub fn constant(value: f64) -> Self {
        InitParams {
            mean: value,
            std: 0.0,
            seed: 0,
            positive: false,
        }
    }

    pub fn with_positive(mut self, positive: bool) -> Self {
        self.positive = positive;
        self
    }
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams::gaussian(1.0, 0.5, 0)
    }
}

/// Draws a tensor of independent `Normal(mean, std)` samples from a ChaCha8
/// stream seeded by `seed`.
pub fn fill_gaussian(
    shape: &[usize],
    mean: f64,
    std: f64,
    seed: u64,
    positive: bool,
) -> Result<DenseTensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "gaussian fill needs a non-empty shape of positive extents, got {shape:?}"
        )));
    }
    if !(std >= 0.0 && std.is_finite() && mean.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gaussian fill needs finite mean and std >= 0, got mean={mean}, std={std}"
        )));
    }
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidArgument(format!("normal distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volume: usize = shape.iter().product();
    let data = (0..volume)
        .map(|_| {
            let x: f64 = normal.sample(&mut rng);
            if positive {
                x.abs()
            } else {
                x
            }
        })
        .collect();
    Ok(DenseTensor {
        shape: shape.to_vec(),
        data,
    })
}

/// Σ entries², classified.
pub fn sum_of_squares(t: &DenseTensor) -> NormValue {
    let acc = t.data.iter().fold(0.0f64, |acc, &x| acc + x * x);
    NormValue::from_square_sum(acc)
}

/// Σ entries, classified. Negative or cancelled totals are flagged.
pub fn sum_of_entries(t: &DenseTensor) -> NormValue {
    let acc = t.data.iter().fold(0.0f64, |acc, &x| acc + x);
    let saw_negative = t.data.iter().any(|&x| x < 0.0);
    NormValue::from_entry_sum(acc, saw_negative)
}
