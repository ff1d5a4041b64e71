use proptest::prelude::*;

use upsample_lab::ops::{
    conv1d, periodic_shuffle, periodic_unshuffle, stretch, transposed_conv1d, transposed_len,
};
use upsample_lab::{apply_stack, Kernel, LayerSpec, Signal, Stack, StackSpec};

fn signal(channels: usize, time: usize) -> impl Strategy<Value = Signal> {
    prop::collection::vec(-8i32..=8, channels * time).prop_map(move |v| {
        Signal::new(v.into_iter().map(f64::from).collect(), channels, 100).unwrap()
    })
}

fn kernel(out: usize, inp: usize, len: usize) -> impl Strategy<Value = Kernel> {
    prop::collection::vec(-8i32..=8, out * inp * len).prop_map(move |v| {
        Kernel::new(v.into_iter().map(f64::from).collect(), out, inp, len).unwrap()
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn transposed_is_adjoint_of_strided_conv(
        (x, k, y, stride) in (1usize..4, 1usize..4, 1usize..6, 1usize..5, 1usize..7)
            .prop_flat_map(|(ci, co, len, stride, t)| {
                let n = transposed_len(t, len, stride);
                (signal(ci, t), kernel(co, ci, len), signal(co, n), Just(stride))
            })
    ) {
        // <T(x), y> == <x, C(y)> where C is the strided conv with the same taps.
        let up = transposed_conv1d(&x, &k, stride).unwrap();
        let down = conv1d(&y, &k.adjoint(), stride).unwrap();
        prop_assert_eq!(dot(up.samples(), y.samples()), dot(x.samples(), down.samples()));
    }

    #[test]
    fn output_length_follows_the_full_formula(
        (x, k, stride) in (1usize..3, 1usize..9, 1usize..6, 1usize..9)
            .prop_flat_map(|(c, len, stride, t)| (signal(c, t), kernel(2, c, len), Just(stride)))
    ) {
        let y = transposed_conv1d(&x, &k, stride).unwrap();
        prop_assert_eq!(y.time(), (x.time() - 1) * stride + k.length());
        prop_assert_eq!(y.channels(), 2);
    }

    #[test]
    fn shuffle_round_trips(
        (x, r) in (1usize..4, 1usize..5, 1usize..8)
            .prop_flat_map(|(c, r, t)| (signal(c * r, t), Just(r)))
    ) {
        let y = periodic_shuffle(&x, r).unwrap();
        prop_assert_eq!(y.time(), x.time() * r);
        prop_assert_eq!(periodic_unshuffle(&y, r).unwrap(), x);
    }

    #[test]
    fn stretch_keeps_samples_and_inserts_zeros(x in signal(2, 7), r in 1usize..5) {
        let y = stretch(&x, r).unwrap();
        for c in 0..2 {
            for (n, v) in y.channel(c).iter().enumerate() {
                if n % r == 0 {
                    prop_assert_eq!(*v, x.channel(c)[n / r]);
                } else {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }
}

#[test]
fn unit_impulse_reproduces_the_kernel() {
    let k = Kernel::mono(&[0.5, -1.0, 2.0, 4.0]).unwrap();
    let y = transposed_conv1d(&Signal::mono(vec![1.0], 10).unwrap(), &k, 3).unwrap();
    assert_eq!(y.samples(), k.weights());
}

#[test]
fn stack_tracks_rates_and_shapes() {
    let spec = StackSpec::new(
        1000,
        4,
        vec![
            LayerSpec::transposed(8, 4).with_channels(3),
            LayerSpec::subpixel(2, 3),
            LayerSpec::linear(2),
            LayerSpec::plain_conv(4, 2),
        ],
    );
    let stack = Stack::build(spec.clone()).unwrap();
    assert_eq!(stack.output_rate(), 8000);
    let x = Signal::mono(vec![0.25; 64], 1000).unwrap();
    let outs = apply_stack(&x, &stack).unwrap();
    let rates: Vec<u32> = outs.iter().map(Signal::sample_rate).collect();
    assert_eq!(rates, vec![1000, 4000, 8000, 16000, 8000]);
    assert_eq!(outs[1].channels(), 3);

    let reloaded = StackSpec::from_json(&spec.to_json().unwrap()).unwrap();
    assert_eq!(reloaded, spec);
    let rebuilt = Stack::from_weight_blob(reloaded, &stack.weight_blob()).unwrap();
    assert_eq!(apply_stack(&x, &rebuilt).unwrap(), outs);
}

#[test]
fn invalid_layers_are_rejected() {
    let x = Signal::mono(vec![1.0; 4], 100).unwrap();
    assert!(transposed_conv1d(&x, &Kernel::mono(&[1.0]).unwrap(), 0).is_err());
    let two_in = Kernel::new(vec![1.0; 2], 1, 2, 1).unwrap();
    assert!(transposed_conv1d(&x, &two_in, 1).is_err());
    assert!(conv1d(&x, &Kernel::mono(&[1.0; 5]).unwrap(), 1).is_err());
    assert!(periodic_shuffle(&x, 2).is_err());
    assert!(Stack::build(StackSpec::new(1000, 0, vec![LayerSpec::transposed(0, 2)])).is_err());
}
