use upsample_lab::autodiff::gradcheck::{check_stack, random_case, Tolerance, CASE_KINDS};
use upsample_lab::autodiff::{conv_input_grad, transposed_input_grad, Tape};
use upsample_lab::ops::{conv1d, transposed_conv1d};
use upsample_lab::rng::Prng;
use upsample_lab::{Kernel, Signal};

#[test]
fn finite_differences_over_random_shapes() {
    let mut kinds_seen = [0usize; CASE_KINDS];
    for i in 0..210 {
        let (stack, x) = random_case(i, 42).expect("case builds");
        let r = check_stack(&stack, &x, i as u64, Tolerance::default()).unwrap();
        assert!(r.passed(), "case {i} failed: {r:?}\n{:?}", stack.spec());
        kinds_seen[i % CASE_KINDS] += 1;
    }
    assert!(kinds_seen.iter().all(|&n| n >= 30));
}

fn random_signal(rng: &mut Prng, channels: usize, len: usize) -> Signal {
    let rows = (0..channels)
        .map(|_| (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    Signal::from_channels(rows, 1000).unwrap()
}

fn random_kernel(rng: &mut Prng, out: usize, inp: usize, len: usize) -> Kernel {
    let w = (0..out * inp * len)
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    Kernel::new(w, out, inp, len).unwrap()
}

#[test]
fn conv_input_gradient_is_a_transposed_convolution() {
    let mut rng = Prng::new(9);
    for case in 0..300 {
        let inp = 1 + case % 3;
        let out = 1 + (case / 3) % 3;
        let len = 1 + case % 5;
        let stride = 1 + case % 4;
        let t = len + (case % 7) + stride;
        let x = random_signal(&mut rng, inp, t);
        let k = random_kernel(&mut rng, out, inp, len);
        let y = conv1d(&x, &k, stride).unwrap();

        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let kp = tape.kernel_param(k.clone());
        let yn = tape.conv1d(xn, kp, stride).unwrap();
        let w: Vec<f64> = (0..y.samples().len())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        let loss = tape.weighted_sum(yn, w.clone()).unwrap();
        let grads = tape.backward(loss).unwrap();

        let upstream = Signal::new(w, y.channels(), y.sample_rate()).unwrap();
        let direct = transposed_conv1d(&upstream, &k.adjoint(), stride).unwrap();
        let tape_grad = grads.node(xn).unwrap();
        for c in 0..inp {
            let valid = direct.time();
            let row = &tape_grad[c * t..(c + 1) * t];
            assert_eq!(&row[..valid], direct.channel(c), "case {case}");
            assert!(row[valid..].iter().all(|&v| v == 0.0));
        }
        assert_eq!(
            conv_input_grad(&upstream, &k, stride, t).unwrap().samples(),
            tape_grad
        );
    }
}

#[test]
fn transposed_input_gradient_is_a_strided_convolution() {
    let mut rng = Prng::new(10);
    for case in 0..300 {
        let inp = 1 + case % 2;
        let out = 1 + (case / 2) % 3;
        let len = 1 + case % 6;
        let stride = 1 + case % 4;
        let x = random_signal(&mut rng, inp, 2 + case % 9);
        let k = random_kernel(&mut rng, out, inp, len);
        let y = transposed_conv1d(&x, &k, stride).unwrap();
        let mut tape = Tape::new();
        let xn = tape.input(x.clone());
        let kp = tape.kernel_param(k.clone());
        let yn = tape.transposed_conv1d(xn, kp, stride).unwrap();
        let w: Vec<f64> = (0..y.samples().len())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        let loss = tape.weighted_sum(yn, w.clone()).unwrap();
        let grads = tape.backward(loss).unwrap();
        let upstream = Signal::new(w, y.channels(), y.sample_rate()).unwrap();
        let direct = transposed_input_grad(&upstream, &k, stride).unwrap();
        assert_eq!(grads.node(xn).unwrap(), direct.samples(), "case {case}");
    }
}

#[test]
fn l1_of_identity_is_sign() {
    let x = Signal::mono(vec![-3.0, 0.5, 2.0, -0.25], 10).unwrap();
    let mut tape = Tape::new();
    let n = tape.input(x);
    let loss = tape.l1_loss(n, &Signal::zeros(1, 4, 10).unwrap()).unwrap();
    let g = tape.backward(loss).unwrap();
    let sign: Vec<f64> = g.node(n).unwrap().iter().map(|v| v * 4.0).collect();
    assert_eq!(sign, vec![-1.0, 1.0, 1.0, -1.0]);
}
