use proptest::prelude::*;

use uncagg::eval::{auroc, eaurc, wilcoxon_one_sided};
use uncagg::intensity::{aqa, ata, avg, bca, ica, plm, qfr};
use uncagg::io::npy::{encode_f64, encode_i64};
use uncagg::io::{parse_npy, NpyData};
use uncagg::meta_gmm::{fit_meta, FeatureMatrix, FeatureSetSpec, GmmModel, MetaConfig};
use uncagg::spatial::{smr, spatial_decompose, spatial_weight_map, SpatialMeasure};
use uncagg::{FeatureVector, SegmentationMask, UncertaintyMap};

fn map_pair() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<u32>)> {
    (2usize..10, 2usize..10).prop_flat_map(|(h, w)| {
        let n = h * w;
        (
            Just(h),
            Just(w),
            prop::collection::vec(0.0..=1.0f64, n),
            prop::collection::vec(0.0..=1.0f64, n),
            prop::collection::vec(0u32..3, n),
        )
    })
}

fn unit_map() -> impl Strategy<Value = UncertaintyMap> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0..=1.0f64, h * w).prop_map(move |v| UncertaintyMap::new(h, w, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn monotone_aggregators_never_decrease((h, w, u, bump, mut labels) in map_pair(), q in 0.05..0.95f64) {
        let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a.max(*b)).collect();
        labels[0] = 1;
        let (u, v) = (UncertaintyMap::new(h, w, u).unwrap(), UncertaintyMap::new(h, w, v).unwrap());
        let mask = SegmentationMask::new(h, w, labels).unwrap();
        prop_assert!(avg(&v) >= avg(&u));
        prop_assert!(plm(&v, 2).unwrap() >= plm(&u, 2).unwrap());
        prop_assert!(aqa(&v, q).unwrap() >= aqa(&u, q).unwrap());
        prop_assert!(bca(&v, &mask).unwrap() >= bca(&u, &mask).unwrap());
        prop_assert!(ica(&v, &mask).unwrap() >= ica(&u, &mask).unwrap());
        prop_assert!(qfr(&v, &mask).unwrap() >= qfr(&u, &mask).unwrap());
    }

    #[test]
    fn aggregates_stay_in_unit_interval(m in unit_map(), t in 0.0..1.0f64) {
        for v in [avg(&m), ata(&m, t).unwrap(), plm(&m, 1).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn decomposition_sums_back(m in unit_map(), which in 0usize..3) {
        let measure = [SpatialMeasure::Moran, SpatialMeasure::eds(), SpatialMeasure::entropy()][which];
        let wm = spatial_weight_map(&m, measure).unwrap();
        let (high, low) = spatial_decompose(&m, &wm).unwrap();
        for ((a, b), x) in high.values().iter().zip(low.values()).zip(m.values()) {
            prop_assert!((a + b - x).abs() <= 1e-12);
        }
        let s = smr(&m, &wm).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn auroc_matches_pairwise_count(
        pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let mut wins = 0.0;
        let mut total = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    total += 1.0;
                    wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        prop_assert!((auroc(&scores, &labels).unwrap() - wins / total).abs() <= 1e-12);
    }

    #[test]
    fn eaurc_is_non_negative(
        rows in prop::collection::vec((0u8..5, 0u8..5), 1..40)
    ) {
        let risks: Vec<f64> = rows.iter().map(|r| f64::from(r.0) / 4.0).collect();
        let conf: Vec<f64> = rows.iter().map(|r| f64::from(r.1)).collect();
        prop_assert!(eaurc(&risks, &conf).unwrap() >= -1e-12);
        let oracle: Vec<f64> = risks.iter().map(|r| -r).collect();
        prop_assert!(eaurc(&risks, &oracle).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn wilcoxon_p_value_is_a_probability(d in prop::collection::vec(-3i8..=3, 1..40)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        prop_assume!(d.iter().any(|&x| x != 0.0));
        let r = wilcoxon_one_sided(&d).unwrap();
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn npy_float_round_trip(h in 1usize..8, w in 1usize..8, bits in prop::collection::vec(any::<u64>(), 64)) {
        let values: Vec<f64> = bits[..h * w].iter().map(|&b| f64::from_bits(b)).collect();
        let back = parse_npy(&encode_f64((h, w), &values).unwrap()).unwrap();
        prop_assert_eq!(back.shape, (h, w));
        let NpyData::Float(v) = back.data else { panic!("expected floats") };
        prop_assert!(v.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn npy_int_round_trip(h in 1usize..8, w in 1usize..8, vals in prop::collection::vec(any::<i64>(), 64)) {
        let back = parse_npy(&encode_i64((h, w), &vals[..h * w]).unwrap()).unwrap();
        prop_assert_eq!(back.data, NpyData::Int(vals[..h * w].to_vec()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn model_json_round_trip_is_exact(rows in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 12..40)) {
        let spec = FeatureSetSpec::spa();
        let fm = FeatureMatrix::from_rows(spec.strategies.clone(), &rows).unwrap();
        let cfg = MetaConfig { k_max: 3, ..MetaConfig::default() };
        let model = fit_meta(&fm, &spec, &cfg).unwrap();
        let json = model.to_json().unwrap();
        let back = GmmModel::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
        for r in &rows {
            let fv = FeatureVector::new(spec.strategies.clone(), r.clone()).unwrap();
            prop_assert_eq!(model.score(&fv).unwrap().to_bits(), back.score(&fv).unwrap().to_bits());
        }
    }
}
