use actok_core::bpe::BpeModel;
use actok_core::dct::{dct_forward, dct_inverse, DctAxis, DctPlan};
use actok_core::fast::{fit_fast, FastConfig, ScaleChoice};
use actok_core::trajectory::{ActionChunk, ChunkOrigin, ChunkSpec};
use actok_core::Matrix;
use proptest::prelude::*;

/// DCT-II through a length-4n real DFT of the mirrored, interleaved signal,
/// summed directly with complex exponentials.
fn dft_oracle(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = 4 * n;
    let mut y = vec![0.0; m];
    for (i, v) in x.iter().enumerate() {
        y[2 * i + 1] = *v;
        y[m - 2 * i - 1] = *v;
    }
    (0..n)
        .map(|k| {
            let re: f64 = y
                .iter()
                .enumerate()
                .map(|(j, v)| v * (2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64).cos())
                .sum();
            let s = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            s * re / 2.0
        })
        .collect()
}

#[test]
fn dct_matches_dft_oracle() {
    for n in 1..=12 {
        let plan = DctPlan::new(n);
        let x: Vec<f64> = (0..n)
            .map(|i| ((i * 7 + 3) % 11) as f64 / 5.0 - 1.0)
            .collect();
        let got = plan.forward(&x);
        for (a, b) in got.iter().zip(dft_oracle(&x)) {
            assert!((a - b).abs() < 1e-12, "n={n}");
        }
    }
}

proptest! {
    #[test]
    fn dct_is_linear_and_invertible(
        a in prop::collection::vec(-1.0f64..1.0, 35),
        b in prop::collection::vec(-1.0f64..1.0, 35),
        s in -3.0f64..3.0,
        time in any::<bool>(),
    ) {
        let axis = if time { DctAxis::AcrossTime } else { DctAxis::AcrossDims };
        let ma = Matrix::from_vec(5, 7, a.clone()).unwrap();
        let mb = Matrix::from_vec(5, 7, b.clone()).unwrap();
        let mix = Matrix::from_vec(5, 7, a.iter().zip(&b).map(|(x, y)| s * x + y).collect()).unwrap();
        let (ca, cb, cm) = (dct_forward(&ma, axis), dct_forward(&mb, axis), dct_forward(&mix, axis));
        for i in 0..35 {
            prop_assert!((cm.as_slice()[i] - (s * ca.as_slice()[i] + cb.as_slice()[i])).abs() < 1e-12);
        }
        prop_assert!(dct_inverse(&ca, axis).max_abs_diff(&ma) < 1e-12);
    }

    #[test]
    fn bpe_round_trips_and_never_expands(
        corpus in prop::collection::vec(prop::collection::vec(0u32..6, 0..40), 1..20),
        probe in prop::collection::vec(0u32..6, 0..80),
        cap in 6u32..64,
    ) {
        let model = BpeModel::train(&corpus, 6, cap).unwrap();
        prop_assert!(model.vocab_size() <= cap);
        for seq in corpus.iter().chain([&probe]) {
            let enc = model.encode(seq).unwrap();
            prop_assert!(enc.len() <= seq.len());
            prop_assert_eq!(&model.decode(&enc).unwrap(), seq);
        }
    }

    #[test]
    fn fast_round_trip_within_bound(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 4),
        gamma in 4.0f64..200.0,
    ) {
        let spec = ChunkSpec::new(4, 3).unwrap();
        let train: Vec<ActionChunk> = (0..40)
            .map(|i| {
                let v: Vec<f64> = (0..12).map(|j| (((i * 12 + j) * 37 % 101) as f64 / 50.0) - 1.0).collect();
                ActionChunk::new(Matrix::from_vec(4, 3, v).unwrap(), ChunkOrigin::default()).unwrap()
            })
            .collect();
        let mut cfg = FastConfig::new(spec, ScaleChoice::Fixed(gamma));
        cfg.clamp = (gamma * 3f64.sqrt()).ceil() as u32 + 1;
        cfg.escalate_clamp = false;
        let (model, _) = fit_fast(&train, &cfg).unwrap();
        // Keep the probe inside the normalization box.
        let norm = model.normalization();
        let inside: Vec<f64> = rows
            .iter()
            .flat_map(|r| r.iter().enumerate().map(|(d, u)| norm[d].denormalize(*u)))
            .collect();
        let chunk = ActionChunk::new(Matrix::from_vec(4, 3, inside).unwrap(), ChunkOrigin::default()).unwrap();
        let tokens = model.encode(&chunk).unwrap();
        let back = model.decode(&tokens).unwrap();
        prop_assert!(back.values.max_abs_diff(&chunk.values) <= model.round_trip_bound() + 1e-12);
    }
}
