use afrisk::builder::{combinations, knowledge_structure, synthesize_cpt, target_cpt, SynthesisSpec};
use afrisk::knowledge::{normalized_risks, KnowledgeModel, SynthesisThresholds};
use proptest::prelude::*;

fn band_of(row: &[f64]) -> usize {
    assert_eq!(row.iter().filter(|p| **p == 1.0).count(), 1, "row is one-hot: {row:?}");
    row.iter().position(|p| *p == 1.0).unwrap()
}

fn hand_band(r: f64, t: &SynthesisThresholds) -> usize {
    if r < t.t1 {
        0
    } else if r > t.t2 {
        2
    } else {
        1
    }
}

fn spec_strategy() -> impl Strategy<Value = SynthesisSpec> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, 2..=5), 1..=4)
        .prop_flat_map(|raw| {
            let n = raw.len();
            (Just(raw), prop::collection::vec(0.01f64..1.0, n), 0.05f64..0.9, 0.01f64..0.5)
        })
        .prop_map(|(raw, w, t1, gap)| {
            let ws: f64 = w.iter().sum();
            SynthesisSpec {
                node: "s".into(),
                parents: (0..raw.len()).map(|i| format!("p{i}")).collect(),
                weights: w.iter().map(|x| x / ws).collect(),
                risks: raw
                    .iter()
                    .map(|r| {
                        let s: f64 = r.iter().sum();
                        r.iter().map(|x| x / s).collect()
                    })
                    .collect(),
                thresholds: SynthesisThresholds { t1, t2: (t1 + gap).min(0.99) },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn raising_one_parent_never_lowers_the_band(spec in spec_strategy()) {
        let cpt = synthesize_cpt(&spec);
        let cards: Vec<usize> = spec.risks.iter().map(Vec::len).collect();
        let configs: Vec<Vec<usize>> = combinations(&cards).collect();
        let row_of = |s: &[usize]| s.iter().zip(&cards).fold(0, |r, (x, k)| r * k + x);
        for s in &configs {
            let here = band_of(&cpt.rows[row_of(s)]);
            let r: f64 = spec.weights.iter().zip(&spec.risks).zip(s).map(|((w, r), &i)| w * r[i]).sum();
            prop_assert_eq!(here, hand_band(r, &spec.thresholds));
            for (p, risks) in spec.risks.iter().enumerate() {
                for other in 0..cards[p] {
                    if risks[other] > risks[s[p]] {
                        let mut t = s.clone();
                        t[p] = other;
                        prop_assert!(band_of(&cpt.rows[row_of(&t)]) >= here);
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_factors_are_scale_free(scale in 0.01f64..100.0) {
        let model = KnowledgeModel::atrial_fibrillation();
        for f in model.factors() {
            let mut scaled = f.clone();
            for rel in &mut scaled.relationships {
                rel.scaling_factor *= scale;
            }
            for (a, b) in normalized_risks(f).iter().zip(normalized_risks(&scaled)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn lifestyle_rows_follow_the_weighted_sum() {
    // weights 0.8/0.2, risks (0.431,0.569)/(0.333,0.667), t1=0.45, t2=0.55
    let spec = SynthesisSpec {
        node: "lifestyle".into(),
        parents: vec!["smoking_status".into(), "alcohol_misuse".into()],
        weights: vec![0.8, 0.2],
        risks: vec![vec![0.431, 0.569], vec![0.333, 0.667]],
        thresholds: SynthesisThresholds { t1: 0.45, t2: 0.55 },
    };
    let rows = synthesize_cpt(&spec).rows;
    let by_hand: [f64; 4] = [0.8 * 0.431 + 0.2 * 0.333, 0.8 * 0.431 + 0.2 * 0.667, 0.8 * 0.569 + 0.2 * 0.333, 0.8 * 0.569 + 0.2 * 0.667];
    assert!((by_hand[1] - 0.4782).abs() < 1e-9);
    let bands: Vec<usize> = rows.iter().map(|r| band_of(r)).collect();
    assert_eq!(bands, vec![0, 1, 1, 2]);
}

#[test]
fn threshold_ties() {
    let spec = |t1: f64, t2: f64| SynthesisSpec {
        node: "s".into(),
        parents: vec!["a".into()],
        weights: vec![1.0],
        risks: vec![vec![0.25, 0.75]],
        thresholds: SynthesisThresholds { t1, t2 },
    };
    // R exactly at t1 is medium, exactly at t2 is medium
    assert_eq!(band_of(&synthesize_cpt(&spec(0.25, 0.5)).rows[0]), 1);
    assert_eq!(band_of(&synthesize_cpt(&spec(0.1, 0.75)).rows[1]), 1);
}

#[test]
fn target_rows_are_weighted_scores() {
    let model = KnowledgeModel::atrial_fibrillation();
    let parents: Vec<String> = model.categories.iter().map(|c| c.name.as_str().to_string()).collect();
    let weights: Vec<f64> = model.categories.iter().map(|c| c.weight).collect();
    let cpt = target_cpt(&model, &parents, &weights).unwrap();
    let scores = model.target_scores.as_array();
    for (s, row) in combinations(&[3; 5]).zip(&cpt.rows) {
        let p: f64 = weights.iter().zip(&s).map(|(w, &i)| w * scores[i]).sum::<f64>().clamp(0.01, 0.99);
        assert!((row[1] - p).abs() < 1e-12 && (row[0] + row[1] - 1.0).abs() < 1e-12);
    }
    assert!(target_cpt(&model, &parents, &[0.5; 5]).is_err());
}

#[test]
fn af_structure() {
    let net = knowledge_structure(&KnowledgeModel::atrial_fibrillation());
    assert_eq!(net.variables.len(), 24);
    assert_eq!(net.roots().len(), 16);
    assert_eq!(net.parents("af").len(), 5);
    assert!(net.topological_order().is_some());
}
