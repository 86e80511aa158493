mod common;

use common::rel;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnr_core::{contract, fill_gaussian, sum_of_squares, DenseTensor};

struct Case {
    a: DenseTensor,
    axes_a: Vec<usize>,
    b: DenseTensor,
    axes_b: Vec<usize>,
}

fn case(ra: usize, rb: usize, k: usize, seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape_a: Vec<usize> = (0..ra).map(|_| rng.random_range(1..=4)).collect();
    let mut axes_a: Vec<usize> = (0..ra).collect();
    axes_a.shuffle(&mut rng);
    axes_a.truncate(k);
    let mut slots: Vec<usize> = (0..rb).collect();
    slots.shuffle(&mut rng);
    let axes_b: Vec<usize> = slots[..k].to_vec();
    let mut shape_b: Vec<usize> = (0..rb).map(|_| rng.random_range(1..=4)).collect();
    for (&pa, &pb) in axes_a.iter().zip(&axes_b) {
        shape_b[pb] = shape_a[pa];
    }
    Case {
        a: fill_gaussian(&shape_a, 0.0, 1.0, rng.random(), false).unwrap(),
        axes_a,
        b: fill_gaussian(&shape_b, 0.0, 1.0, rng.random(), false).unwrap(),
        axes_b,
    }
}

fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for (i, &d) in shape.iter().enumerate().rev() {
        idx[i] = flat % d;
        flat /= d;
    }
    idx
}

/// Nested-loop reference: for each output entry, sum over the paired indices in
/// ascending flat order starting from 0.0.
fn naive(c: &Case) -> DenseTensor {
    let free_a: Vec<usize> = (0..c.a.rank()).filter(|x| !c.axes_a.contains(x)).collect();
    let free_b: Vec<usize> = (0..c.b.rank()).filter(|x| !c.axes_b.contains(x)).collect();
    let pair_shape: Vec<usize> = c.axes_a.iter().map(|&x| c.a.shape()[x]).collect();
    let out_shape: Vec<usize> = free_a
        .iter()
        .map(|&x| c.a.shape()[x])
        .chain(free_b.iter().map(|&x| c.b.shape()[x]))
        .collect();
    let out_len: usize = out_shape.iter().product();
    let pair_len: usize = pair_shape.iter().product();
    let mut data = Vec::with_capacity(out_len);
    for o in 0..out_len {
        let oi = unflatten(o, &out_shape);
        let mut ia = vec![0; c.a.rank()];
        let mut ib = vec![0; c.b.rank()];
        for (k, &x) in free_a.iter().enumerate() {
            ia[x] = oi[k];
        }
        for (k, &x) in free_b.iter().enumerate() {
            ib[x] = oi[free_a.len() + k];
        }
        let mut acc = 0.0;
        for s in 0..pair_len {
            let si = unflatten(s, &pair_shape);
            for (k, (&xa, &xb)) in c.axes_a.iter().zip(&c.axes_b).enumerate() {
                ia[xa] = si[k];
                ib[xb] = si[k];
            }
            acc += c.a.get(&ia).unwrap() * c.b.get(&ib).unwrap();
        }
        data.push(acc);
    }
    DenseTensor::new(out_shape, data).unwrap()
}

fn dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=3, 1usize..=3, any::<u64>())
        .prop_flat_map(|(ra, rb, seed)| (Just(ra), Just(rb), 0..=ra.min(rb), Just(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn contract_matches_nested_loops_exactly((ra, rb, k, seed) in dims()) {
        let c = case(ra, rb, k, seed);
        let got = contract(&c.a, &c.axes_a, &c.b, &c.axes_b).unwrap();
        let want = naive(&c);
        prop_assert_eq!(got.shape(), want.shape());
        let bits = |t: &DenseTensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&got), bits(&want));
    }

    #[test]
    fn contract_is_bilinear((ra, rb, k, seed) in dims(), alpha in -8.0f64..8.0) {
        let c = case(ra, rb, k, seed);
        let base = contract(&c.a, &c.axes_a, &c.b, &c.axes_b).unwrap();
        let mut scaled_a = c.a.clone();
        scaled_a.scale(alpha);
        let left = contract(&scaled_a, &c.axes_a, &c.b, &c.axes_b).unwrap();
        let mut scaled_b = c.b.clone();
        scaled_b.scale(alpha);
        let right = contract(&c.a, &c.axes_a, &scaled_b, &c.axes_b).unwrap();
        for ((x, l), r) in base.data().iter().zip(left.data()).zip(right.data()) {
            prop_assert!(rel(alpha * x, *l) <= 1e-12);
            prop_assert!(rel(alpha * x, *r) <= 1e-12);
        }
    }

    #[test]
    fn sum_of_squares_ignores_axis_order(
        shape in prop::collection::vec(1usize..=4, 1..=5),
        seed in any::<u64>(),
        perm_seed in any::<u64>(),
    ) {
        let t = fill_gaussian(&shape, 0.0, 1.0, seed, false).unwrap();
        let mut perm: Vec<usize> = (0..shape.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let p = t.permute(&perm).unwrap();
        let a = sum_of_squares(&t).finite().unwrap();
        let b = sum_of_squares(&p).finite().unwrap();
        prop_assert!(rel(a, b) <= 1e-12);
    }

    #[test]
    fn positive_fill_is_non_negative(
        shape in prop::collection::vec(1usize..=5, 1..=4),
        mean in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let t = fill_gaussian(&shape, mean, 1.0, seed, true).unwrap();
        prop_assert!(t.data().iter().all(|&x| x >= 0.0));
    }
}
