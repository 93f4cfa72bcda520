use plcnoise::ndiff::{
    activation, conv1d_backward, conv1d_forward, dense_forward, grad_check, optimizer_step, upsample,
    Activation, BatchNormLayer, CaseSpec, Conv1dLayer, DenseLayer, LayerKind, OptimizerState, Param,
    Tensor3, UpsampleMode,
};
use plcnoise::Rng;

fn row(v: &[f64]) -> Tensor3<f64> {
    Tensor3::from_vec(v.to_vec(), 1, v.len(), 1).unwrap()
}

fn conv(k: usize, ci: usize, co: usize, stride: usize, pad: (usize, usize)) -> Conv1dLayer<f64> {
    Conv1dLayer::new("c", k, ci, co, stride, pad, &mut Rng::new(1)).unwrap()
}

#[test]
fn conv_identity_and_ones() {
    let mut c = conv(3, 1, 1, 1, (1, 1));
    c.kernel.value = vec![0.0, 1.0, 0.0];
    c.bias.value = vec![0.0];
    let x = row(&[3.0, -1.0, 4.0, 1.0, -5.0, 9.0]);
    assert_eq!(conv1d_forward(&c, &x).unwrap(), x);

    c.kernel.value = vec![1.0; 3];
    let y = conv1d_forward(&c, &row(&[1.0; 8])).unwrap();
    assert_eq!(y.data(), &[2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 2.0]);
}

#[test]
fn strided_conv_quarters_the_length() {
    let c = Conv1dLayer::<f32>::new("c", 25, 1, 2, 4, (10, 11), &mut Rng::new(2)).unwrap();
    let y = c.forward(&Tensor3::zeros(1, 16384, 1)).unwrap();
    assert_eq!(y.shape(), (1, 4096, 2));
}

#[test]
fn conv_backward_linearity() {
    let c = conv(3, 2, 3, 1, (1, 1));
    let mut rng = Rng::new(3);
    let x = Tensor3::from_vec((0..2 * 12 * 2).map(|_| rng.next_normal()).collect(), 2, 12, 2).unwrap();
    let zero = conv1d_backward(&c, &x, &Tensor3::zeros(2, 12, 3)).unwrap();
    assert!(zero.x.data().iter().chain(&zero.kernel).chain(&zero.bias).all(|v| *v == 0.0));

    let g = Tensor3::from_vec((0..2 * 12 * 3).map(|_| rng.next_normal()).collect(), 2, 12, 3).unwrap();
    let grads = conv1d_backward(&c, &x, &g).unwrap();
    for co in 0..3 {
        let sum: f64 = (0..2).flat_map(|b| (0..12).map(move |l| (b, l))).map(|(b, l)| g.at(b, l, co)).sum();
        assert!((grads.bias[co] - sum).abs() < 1e-12);
    }
}

#[test]
fn layer_gradients_match_finite_differences() {
    assert!(grad_check(LayerKind::Conv1d, &CaseSpec::small(4)).unwrap() <= 1e-5);
    let dense = CaseSpec {
        batch: 4,
        in_ch: 3,
        out_ch: 2,
        ..CaseSpec::small(5)
    };
    assert!(grad_check(LayerKind::Dense, &dense).unwrap() <= 1e-5);
    assert!(grad_check(LayerKind::TanhChain, &dense).unwrap() <= 1e-5);
    let bn = CaseSpec {
        batch: 4,
        len: 6,
        in_ch: 2,
        out_ch: 2,
        ..CaseSpec::small(6)
    };
    assert!(grad_check(LayerKind::BatchNorm, &bn).unwrap() <= 1e-4);
}

#[test]
fn upsampling_modes() {
    let x = row(&[1.0, 2.0]);
    let data = |m| upsample(&x, 4, m).unwrap().into_vec();
    assert_eq!(data(UpsampleMode::Nearest), [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
    assert_eq!(data(UpsampleMode::Linear), [1.0, 1.25, 1.5, 1.75, 2.0, 2.0, 2.0, 2.0]);
    assert_eq!(data(UpsampleMode::Hybrid), [1.0, 1.125, 1.25, 1.375, 2.0, 2.0, 2.0, 2.0]);
}

#[test]
fn dense_identity_and_bias() {
    let mut d = DenseLayer::<f64>::new("d", 3, 3, &mut Rng::new(7));
    d.weights.value = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    d.bias.value = vec![0.0; 3];
    let x = Tensor3::from_vec(vec![0.5, -2.0, 3.0], 1, 1, 3).unwrap();
    assert_eq!(dense_forward(&d, &x).unwrap().into_vec(), x.data());
    d.bias.value = vec![0.1, 0.2, 0.3];
    let y = dense_forward(&d, &Tensor3::zeros(1, 1, 3)).unwrap();
    assert_eq!(y.into_vec(), [0.1, 0.2, 0.3]);
}

#[test]
fn activation_values() {
    let y = activation(Activation::LeakyRelu(0.2), &row(&[-1.0, 0.0, 2.0]));
    assert_eq!(y.into_vec(), [-0.2, 0.0, 2.0]);
    assert_eq!(activation(Activation::Tanh, &row(&[0.0])).into_vec(), [0.0]);
    let g = Activation::Relu.backward(&row(&[-1.0, 1.0]), &row(&[1.0, 1.0])).unwrap();
    assert_eq!(g.into_vec(), [0.0, 1.0]);
}

#[test]
fn batchnorm_affine() {
    let mut rng = Rng::new(8);
    let x = Tensor3::from_vec((0..4 * 6 * 2).map(|_| 3.0 + 2.0 * rng.next_normal()).collect(), 4, 6, 2).unwrap();
    let mut bn = BatchNormLayer::<f64>::new("bn", 2);
    bn.gamma.value = vec![2.0, 2.0];
    bn.beta.value = vec![3.0, 3.0];
    let (y, _) = bn.forward_train(&x).unwrap();
    for c in 0..2 {
        let v: Vec<f64> = (0..4).flat_map(|b| (0..6).map(move |l| (b, l))).map(|(b, l)| y.at(b, l, c)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!((mean - 3.0).abs() < 1e-9);
        assert!((var.sqrt() - 2.0).abs() < 1e-3, "{}", var.sqrt());
    }
}

#[test]
fn optimizer_first_step_and_clip() {
    let mut p = Param::<f64>::filled("w", &[1], 0.0);
    p.grad = vec![1.0];
    let mut opt = OptimizerState::new(1e-4, 0.5, 0.9).unwrap();
    optimizer_step(&mut opt, &mut [&mut p]).unwrap();
    assert!((p.value[0] + 1e-4).abs() < 1e-9, "{}", p.value[0]);

    let mut q = Param::<f64>::filled("w", &[1], 0.02);
    let mut opt = OptimizerState::new(1e-4, 0.5, 0.9).unwrap().with_clip(Some(0.01));
    optimizer_step(&mut opt, &mut [&mut q]).unwrap();
    assert_eq!(q.value[0], 0.01);
}
