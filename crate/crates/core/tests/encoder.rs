use fgsan_core::attention::{encoder_forward, EncoderParams};
use fgsan_core::classifier::{predict, readout, MlpParams, Readout};
use fgsan_core::graphdata::{threshold_adjacency, StaticGraphView};
use fgsan_core::numcore::{Activation, Tensor2};
use fgsan_core::selector::{apply_mask, SelectorState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_view(n: usize, rng: &mut ChaCha8Rng) -> StaticGraphView {
    let mut c = Tensor2::zeros(n, n);
    for i in 0..n {
        c.set(i, i, 1.0);
        for j in 0..i {
            let v: f64 = rng.gen();
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    StaticGraphView::new(threshold_adjacency(&c, 0.6).unwrap(), 3).unwrap()
}

fn random_encoder(dims: &[usize], rng: &mut ChaCha8Rng) -> EncoderParams<f64> {
    let mut enc = EncoderParams::init(dims, 3, Activation::Tanh, rng).unwrap();
    for layer in &mut enc.layers {
        layer
            .attn_vector
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    enc.spatial
        .bias
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    enc
}

fn random_features(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Tensor2<f64> {
    let mut x = Tensor2::zeros(n, d);
    x.data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-2.0..2.0));
    x
}

/// Index-order, loop-only forward pass written independently of the library.
fn oracle_forward(
    x: &Tensor2<f64>,
    view: &StaticGraphView,
    enc: &EncoderParams<f64>,
) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    for layer in &enc.layers {
        let (d_in, d_out) = (layer.weight.rows(), layer.weight.cols());
        let w = |a: usize, b: usize| layer.weight.data()[a * d_out + b];
        let c = layer.attn_vector.data();
        let p: Vec<Vec<f64>> = h
            .iter()
            .map(|row| {
                (0..d_out)
                    .map(|b| (0..d_in).map(|a| row[a] * w(a, b)).sum())
                    .collect()
            })
            .collect();
        let mut next = vec![vec![0.0; d_out]; n];
        for i in 0..n {
            let neighbors: Vec<usize> = (0..n).filter(|&j| view.adjacency().get(i, j)).collect();
            let scores: Vec<f64> = neighbors
                .iter()
                .map(|&j| {
                    let src: f64 = (0..d_out).map(|k| p[i][k] * c[k]).sum();
                    let dst: f64 = (0..d_out).map(|k| p[j][k] * c[d_out + k]).sum();
                    (src + dst + enc.spatial.bias.data()[view.spd_bucket().get(i, j)]).tanh()
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            for (&j, s) in neighbors.iter().zip(&scores) {
                let a = (s - m).exp() / z;
                for k in 0..d_out {
                    next[i][k] += a * p[j][k];
                }
            }
            next[i].iter_mut().for_each(|v| *v = v.tanh());
        }
        h = next;
    }
    h
}

#[test]
fn three_layer_encoder_matches_straight_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let view = random_view(5, &mut rng);
        let enc = random_encoder(&[4, 6, 5, 3], &mut rng);
        let x = random_features(5, 4, &mut rng);
        let got = encoder_forward(&x, &view, &enc).unwrap();
        let want = oracle_forward(&x, &view, &enc);
        for i in 0..5 {
            for k in 0..3 {
                assert!((got.get(i, k) - want[i][k]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn encoder_and_prediction_are_exactly_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 12;
    let view = random_view(n, &mut rng);
    let enc = random_encoder(&[6, 8, 8], &mut rng);
    let x = random_features(n, 6, &mut rng);
    let mlp = MlpParams::init(8, 4, &mut rng);
    let mut selector = SelectorState::<f64>::new(n, 0.1, 0.5).unwrap();
    selector
        .gate_logits
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-2.0..2.0));

    let base = encoder_forward(&x, &view, &enc).unwrap();
    let pooled = readout(
        &apply_mask(&base, &selector.deterministic_mask()).unwrap(),
        Readout::Sigmoid,
    )
    .unwrap();
    let base_pred = predict(&pooled, &mlp).unwrap();

    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..100 {
        perm.shuffle(&mut rng);
        let out = encoder_forward(&x.permute_rows(&perm), &view.permute(&perm), &enc).unwrap();
        assert_eq!(out, base.permute_rows(&perm));

        let mut permuted_selector = selector.clone();
        permuted_selector.gate_logits = Tensor2::row_vector(
            perm.iter()
                .map(|&p| selector.gate_logits.data()[p])
                .collect(),
        );
        let pooled = readout(
            &apply_mask(&out, &permuted_selector.deterministic_mask()).unwrap(),
            Readout::Sigmoid,
        )
        .unwrap();
        assert_eq!(
            predict(&pooled, &mlp).unwrap().to_bits(),
            base_pred.to_bits()
        );
    }
}
