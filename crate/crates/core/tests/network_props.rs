mod common;

use common::{any_shape, naive_dense, network, rel};
use proptest::prelude::*;
use tnr_core::{DenseTensor, IndexRef, InitParams, Node, Structure, TensorNetworkLayer};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dense_oracle_matches_elementwise_sum(shape in any_shape(), seed in any::<u64>()) {
        let tn = shape.build(&InitParams::gaussian(1.0, 0.5, seed));
        let fast = tn.contract_dense().unwrap();
        let slow = naive_dense(&tn);
        prop_assert_eq!(fast.shape(), slow.shape());
        for (a, b) in fast.data().iter().zip(slow.data()) {
            // Entries of Gaussian(1, 0.5) products can sit near zero through
            // cancellation, so compare against the tensor's scale.
            let scale = slow.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn scaling_round_trip_restores_entries(tn in network(), c in 1e-3f64..1e3) {
        let mut scaled = tn.clone();
        scaled.scale_all_nodes(c);
        scaled.scale_all_nodes(1.0 / c);
        for (a, b) in tn.nodes().iter().zip(scaled.nodes()) {
            for (x, y) in a.tensor.data().iter().zip(b.tensor.data()) {
                prop_assert!(rel(*x, *y) <= 1e-15, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn builder_outputs_have_connected_prefixes(tn in network()) {
        prop_assert!(tn.validate().is_ok());
        for n in 1..=tn.len() {
            prop_assert!(tn.prefix(n).is_ok());
        }
    }
}

#[test]
fn disconnected_custom_order_is_rejected() {
    let tn = TensorNetworkLayer::build_tt(3, 2, 2, &InitParams::default()).unwrap();
    let nodes = tn.nodes().to_vec();
    let err = TensorNetworkLayer::from_parts(nodes, Structure::Custom, vec![0, 2, 1], None);
    assert!(matches!(err, Err(tnr_core::Error::DisconnectedPrefix(_))));
}

#[test]
fn custom_triangle_is_accepted() {
    let node = |a: (usize, usize), b: (usize, usize)| {
        Node::new(
            DenseTensor::filled(&[2, 2, 2], 0.5),
            vec![
                IndexRef::physical_out(2),
                IndexRef::bond(a.0, a.1, 2),
                IndexRef::bond(b.0, b.1, 2),
            ],
        )
    };
    let nodes = vec![
        node((1, 1), (2, 2)),
        node((0, 1), (2, 1)),
        node((1, 2), (0, 2)),
    ];
    let tn = TensorNetworkLayer::from_parts(nodes, Structure::Custom, vec![0, 1, 2], None).unwrap();
    let dense = tn.contract_dense().unwrap();
    let slow = naive_dense(&tn);
    assert_eq!(dense, slow);
    // Every entry is the trace of a product of three all-0.5 2x2 matrices.
    assert!(dense.data().iter().all(|&x| (x - 1.0).abs() < 1e-15));
}
