//! Property tests for the numeric contracts.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Array4};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use respkit::augment::{mixup_pair, SoftLabel};
use respkit::dataio::{fix_duration, make_split, AudioClip, CycleRecord, Label, Split, SplitTable};
use respkit::features::{Spectrogram, SpectrogramKind};
use respkit::fusion::{predict_label, prod_fusion};
use respkit::metrics::{confusion, icbhi_scores};
use respkit::models::{softmax_rows, InceptionLayer};
use respkit::nn::{Mode, ParamBuilder, ParamStore, Tape};
use respkit::train::{kl_divergence, kl_loss};
use respkit::Error;

/// Strictly positive vector normalized to sum to 1.
fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn rows(n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(simplex(4), n).prop_map(move |r| Array2::from_shape_fn((n, 4), |(i, c)| r[i][c]))
}

proptest! {
    #[test]
    fn kl_is_non_negative((y, p) in (1usize..6).prop_flat_map(|n| (rows(n), rows(n))), theta in 0.0f64..100.0, lambda in 0.0f64..1.0) {
        prop_assert!(kl_divergence(y.view(), p.view()).unwrap() >= -1e-12);
        prop_assert!(kl_loss(y.view(), p.view(), theta, lambda).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(y.view(), y.view()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn regularizer_adds_half_lambda_theta((y, p) in (1usize..6).prop_flat_map(|n| (rows(n), rows(n))), theta in 0.0f64..1e4, lambda in 0.0f64..1.0) {
        let with = kl_loss(y.view(), p.view(), theta, lambda).unwrap();
        let without = kl_loss(y.view(), p.view(), theta, 0.0).unwrap();
        let expected = 0.5 * lambda * theta;
        prop_assert!((with - without - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
    }

    #[test]
    fn product_rule_ignores_order_and_scale(sets in prop::collection::vec(simplex(4), 2..5), k in 0.1f64..10.0, shift in 0usize..4) {
        let refs: Vec<&[f64]> = sets.iter().map(|v| v.as_slice()).collect();
        let fused = prod_fusion(&refs).unwrap();
        let mut rotated = refs.clone();
        rotated.rotate_left(shift % refs.len());
        let fused_rot = prod_fusion(&rotated).unwrap();
        for (a, b) in fused.iter().zip(&fused_rot) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        let scaled: Vec<f64> = sets[0].iter().map(|v| v * k).collect();
        let mut refs_scaled = refs.clone();
        refs_scaled[0] = &scaled;
        prop_assert_eq!(
            predict_label(&prod_fusion(&refs_scaled).unwrap()).unwrap(),
            predict_label(&fused).unwrap()
        );
    }

    #[test]
    fn softmax_rows_are_distributions(v in prop::collection::vec(-50.0f32..50.0, 4..40)) {
        let n = v.len() / 4;
        let logits = Array2::from_shape_vec((n, 4), v[..n * 4].to_vec()).unwrap();
        let p = softmax_rows(logits.view());
        for row in p.rows() {
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.sum() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn fixed_duration_is_exact_and_idempotent(len in 1usize..3000, rate in prop::sample::select(vec![100u32, 4000, 8000]), target in 0.05f64..2.0) {
        let clip = AudioClip::new((0..len).map(|i| (i % 17) as f32).collect(), rate).unwrap();
        let fixed = fix_duration(&clip, target).unwrap();
        prop_assert_eq!(fixed.len(), (target * rate as f64).round() as usize);
        prop_assert_eq!(fix_duration(&fixed, target).unwrap(), fixed.clone());
        for (i, v) in fixed.samples().iter().enumerate() {
            prop_assert_eq!(*v, clip.samples()[i % len]);
        }
    }

    #[test]
    fn split_accepts_exactly_the_patient_disjoint_tables(sides in prop::collection::vec((0u8..5, any::<bool>()), 1..12)) {
        let mut records = Vec::new();
        let mut table = SplitTable::new();
        for (k, &(patient, train)) in sides.iter().enumerate() {
            let stem = format!("{}_{k}b1_Al_sc_Meditron", 100 + patient as u32);
            records.push(CycleRecord {
                recording_id: stem.clone(),
                patient_id: (100 + patient as u32).to_string(),
                index: 0,
                onset: 0.0,
                offset: 1.0,
                crackle: false,
                wheeze: false,
                label: Label::Normal,
            });
            table.insert(stem, if train { Split::Train } else { Split::Test });
        }
        let mut seen: BTreeMap<u8, BTreeSet<bool>> = BTreeMap::new();
        for &(p, t) in &sides {
            seen.entry(p).or_default().insert(t);
        }
        let clean = seen.values().all(|s| s.len() == 1);
        match make_split(&records, &table) {
            Ok(a) => {
                prop_assert!(clean);
                for (stem, split) in &table {
                    prop_assert_eq!(a.get(stem), Some(*split));
                }
            }
            Err(e) => {
                prop_assert!(!clean);
                prop_assert!(matches!(e, Error::Integrity(_)));
            }
        }
    }

    #[test]
    fn mixup_stays_on_the_simplex(a in simplex(4), b in simplex(4), lam in 0.0f64..=1.0) {
        let y1 = SoftLabel::new(a.clone().try_into().unwrap()).unwrap();
        let y2 = SoftLabel::new(b.clone().try_into().unwrap()).unwrap();
        let x = Spectrogram::new(Array2::zeros((124, 154)), SpectrogramKind::Wavelet).unwrap();
        let (_, y) = mixup_pair(&x, &y1, &x, &y2, lam).unwrap();
        prop_assert!(y.probs().iter().all(|&p| p >= 0.0));
        prop_assert!((y.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in 0..4 {
            prop_assert!((y.probs()[c] - (lam * a[c] + (1.0 - lam) * b[c])).abs() < 1e-12);
        }
    }

    #[test]
    fn score_is_mean_order_free_and_blind_to_anomalous_names(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200),
        perm in Just([1usize, 2, 3]).prop_shuffle(),
        shift in 0usize..200,
    ) {
        let mut pairs = pairs;
        pairs.push((0, 0));
        pairs.push((1, 2));
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let r = icbhi_scores(&confusion(&t, &p).unwrap()).unwrap();
        prop_assert!((r.icb - (r.spec + r.sen) / 2.0).abs() < 1e-12);

        let mut rotated = pairs.clone();
        rotated.rotate_left(shift % pairs.len());
        let (t2, p2): (Vec<usize>, Vec<usize>) = rotated.into_iter().unzip();
        prop_assert_eq!(icbhi_scores(&confusion(&t2, &p2).unwrap()).unwrap(), r);

        let relabel = |c: usize| if c == 0 { 0 } else { perm[c - 1] };
        let t3: Vec<usize> = t.iter().map(|&c| relabel(c)).collect();
        let p3: Vec<usize> = p.iter().map(|&c| relabel(c)).collect();
        let r3 = icbhi_scores(&confusion(&t3, &p3).unwrap()).unwrap();
        prop_assert_eq!((r3.spec, r3.sen, r3.icb), (r.spec, r.sen, r.icb));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn inception_layer_keeps_spatial_size(h in 5usize..24, w in 5usize..24, c_in in 1usize..4, seed in any::<u64>()) {
        let mut store = ParamStore::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = {
            let mut pb = ParamBuilder::new(&mut store, &mut rng);
            InceptionLayer::new(&mut pb, "inc", c_in, 8).unwrap()
        };
        let mut tape = Tape::new(&store, Mode::Eval, 0);
        let x = tape.input(Array4::<f32>::from_elem((2, c_in, h, w), 0.5).into_dyn());
        let y = layer.forward(&mut tape, x).unwrap();
        prop_assert_eq!(tape.value(y).shape(), &[2, 8, h, w]);
    }
}
