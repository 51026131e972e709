use std::collections::BTreeSet;

use proptest::prelude::*;
use reqsel_core::clustering::{Algorithm, DistanceMatrix, Partition};
use reqsel_core::model::{
    load_problem, DependencyEntry, DependencyKind, Format, ProblemFile, RequirementEntry, StakeholderEntry, ValueEntry,
};
use reqsel_core::preprocess::{standardize, FeatureMatrix, Matrix};
use reqsel_core::selection::{close_dependencies, map_moscow, ReqId};
use reqsel_core::validity::{ValidityReport, DEFAULT_CONNECTIVITY_L};
use reqsel_core::{run_pipeline, KChoice, PipelineOptions, PipelineReport, ProblemInstance};

fn file(efforts: &[f64], weights: &[f64], values: &[Vec<f64>], deps: &[(u8, usize, usize)]) -> ProblemFile {
    let n = efforts.len();
    ProblemFile {
        requirements: efforts
            .iter()
            .enumerate()
            .map(|(i, e)| RequirementEntry {
                id: format!("r{}", i + 1),
                name: None,
                effort: *e,
            })
            .collect(),
        stakeholders: weights
            .iter()
            .enumerate()
            .map(|(i, w)| StakeholderEntry {
                id: format!("c{}", i + 1),
                weight: *w,
            })
            .collect(),
        values: values
            .iter()
            .enumerate()
            .flat_map(|(c, row)| {
                row.iter().enumerate().map(move |(j, v)| ValueEntry {
                    stakeholder: format!("c{}", c + 1),
                    requirement: format!("r{}", j + 1),
                    value: *v,
                })
            })
            .collect(),
        dependencies: deps
            .iter()
            .filter(|(_, a, b)| a % n != b % n)
            .map(|(k, a, b)| DependencyEntry {
                kind: [
                    DependencyKind::Implication,
                    DependencyKind::Combination,
                    DependencyKind::Exclusion,
                ][*k as usize % 3],
                from: format!("r{}", a % n + 1),
                to: format!("r{}", b % n + 1),
            })
            .collect(),
        ..Default::default()
    }
}

prop_compose! {
    fn instance()(n in 4usize..14, m in 1usize..4)
        (efforts in prop::collection::vec(1u32..20, n),
         weights in prop::collection::vec(1u32..6, m),
         values in prop::collection::vec(prop::collection::vec(0u32..6, n), m),
         deps in prop::collection::vec((0u8..3, 0usize..14, 0usize..14), 0..10))
        -> ProblemFile
    {
        let f = |v: &[u32]| v.iter().map(|x| *x as f64).collect::<Vec<_>>();
        file(&f(&efforts), &f(&weights), &values.iter().map(|r| f(r)).collect::<Vec<_>>(), &deps)
    }
}

fn load(f: ProblemFile) -> Option<ProblemInstance> {
    ProblemInstance::from_file(f).ok().map(|l| l.problem)
}

fn points() -> impl Strategy<Value = (Vec<[f64; 2]>, Vec<usize>)> {
    (6usize..16, 2usize..4).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec([-10.0f64..10.0, -10.0f64..10.0], n),
            prop::collection::vec(0..k, n - k).prop_map(move |mut l| {
                l.extend(0..k);
                l
            }),
        )
    })
}

fn report_of(points: &[[f64; 2]], labels: &[usize]) -> ValidityReport {
    let m = Matrix::from_rows(points);
    let p = Partition::from_labels(&m, labels, Algorithm::Pam, None).unwrap();
    let l = DEFAULT_CONNECTIVITY_L.min(points.len() - 1);
    ValidityReport::compute(&m, &DistanceMatrix::from_points(&m), &p, l).unwrap()
}

fn assert_reports_close(a: &ValidityReport, b: &ValidityReport) -> Result<(), TestCaseError> {
    for i in reqsel_core::validity::Index::ALL {
        let (x, y) = (a.value(i), b.value(i));
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{i:?}: {x} vs {y}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn satisfaction_is_linear_in_weights(f in instance(), c in 1u32..9) {
        let Some(p) = load(f.clone()) else { return Ok(()) };
        let mut scaled = f;
        for s in &mut scaled.stakeholders {
            s.weight *= c as f64;
        }
        let q = load(scaled).unwrap();
        for (a, b) in p.satisfaction().iter().zip(q.satisfaction()) {
            prop_assert_eq!(a * c as f64, *b);
        }
    }

    #[test]
    fn row_order_does_not_matter(f in instance(), seed in any::<u64>()) {
        let Some(p) = load(f.clone()) else { return Ok(()) };
        let mut shuffled = f;
        let len = shuffled.requirements.len();
        shuffled.requirements.rotate_left(seed as usize % len);
        shuffled.values.reverse();
        shuffled.dependencies.reverse();
        prop_assert_eq!(load(shuffled).unwrap(), p);
    }

    #[test]
    fn json_round_trip(f in instance()) {
        let Some(p) = load(f) else { return Ok(()) };
        let back = load_problem(p.to_json().as_bytes(), Format::Json).unwrap().problem;
        prop_assert_eq!(back, p);
    }

    #[test]
    fn standardization_absorbs_affine_maps(
        rows in prop::collection::vec([0.0f64..100.0, 0.0f64..100.0], 3..20),
        a in 0.01f64..1000.0,
        b in -100.0f64..100.0,
    ) {
        let ids: Vec<String> = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let cols = vec!["effort".to_string(), "satisfaction".to_string()];
        let Ok(f) = FeatureMatrix::from_raw(ids.clone(), cols.clone(), Matrix::from_rows(&rows)) else { return Ok(()) };
        let moved: Vec<[f64; 2]> = rows.iter().map(|r| [a * r[0] + b, r[1]]).collect();
        let g = FeatureMatrix::from_raw(ids.clone(), cols.clone(), Matrix::from_rows(&moved)).unwrap();
        let again = FeatureMatrix::from_raw(ids, cols, f.standardized.clone()).unwrap();
        for i in 0..rows.len() {
            for j in 0..2 {
                prop_assert!((f.standardized.get(i, j) - g.standardized.get(i, j)).abs() < 1e-9);
                prop_assert!((f.standardized.get(i, j) - again.standardized.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indexes_ignore_point_order((pts, labels) in points(), shift in 1usize..20) {
        let n = pts.len();
        let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let p2: Vec<[f64; 2]> = order.iter().map(|&i| pts[i]).collect();
        let l2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        // ties between neighbours can reorder under permutation; continuous draws make them vanishingly rare
        assert_reports_close(&report_of(&pts, &labels), &report_of(&p2, &l2))?;
    }

    #[test]
    fn indexes_ignore_rotation((pts, labels) in points(), theta in 0.0f64..std::f64::consts::TAU) {
        let (s, c) = theta.sin_cos();
        let rotated: Vec<[f64; 2]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        assert_reports_close(&report_of(&pts, &labels), &report_of(&rotated, &labels))?;
    }

    #[test]
    fn closure_is_monotone_and_idempotent(f in instance(), mask in any::<u16>()) {
        let Some(p) = load(f) else { return Ok(()) };
        let seed: BTreeSet<ReqId> = p.ids().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, id)| ReqId::from(id)).collect();
        let c = close_dependencies(&seed, &p).unwrap();
        prop_assert!(c.viable.is_superset(&seed));
        prop_assert!(c.added.is_disjoint(&seed));
        let again = close_dependencies(&c.viable, &p).unwrap();
        prop_assert!(again.added.is_empty());
        prop_assert_eq!(again.conflicts, c.conflicts);
    }

    #[test]
    fn must_cluster_survives_effort_rescaling(f in instance(), scale in 0.001f64..1000.0) {
        let Some(p) = load(f.clone()) else { return Ok(()) };
        let Ok(features) = standardize(&p) else { return Ok(()) };
        let mut scaled = f;
        for r in &mut scaled.requirements {
            r.effort *= scale;
        }
        let q = load(scaled).unwrap();
        let g = standardize(&q).unwrap();
        let k = 3.min(p.len() - 1);
        let pa = reqsel_core::clustering::pam(&features, k).unwrap();
        let pb = reqsel_core::clustering::pam(&g, k).unwrap();
        let must = |part: &Partition, fm: &FeatureMatrix| {
            let l = map_moscow(part, fm);
            (0..part.len()).filter(|&i| part.labels[i] == l.must_cluster()).collect::<Vec<_>>()
        };
        prop_assume!(pa.labels == pb.labels);
        prop_assert_eq!(must(&pa, &features), must(&pb, &g));
    }
}

#[test]
fn report_round_trips_through_json() {
    let f = file(
        &[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0],
        &[1.0, 2.0],
        &[
            vec![2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0, 2.0, 8.0],
            vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0],
        ],
        &[(0, 0, 1), (1, 2, 3), (2, 4, 5)],
    );
    let p = load(f).unwrap();
    let opts = PipelineOptions {
        k: KChoice::Auto,
        gap_b: 10,
        ..Default::default()
    };
    let r = run_pipeline(&p, &opts).unwrap();
    let json = reqsel_core::report::to_json(&r);
    let back: PipelineReport = serde_json::from_str(&json).unwrap();
    let again = reqsel_core::report::to_json(&back);
    assert_eq!(json, again);
    for (a, b) in r.analyses.iter().zip(&back.analyses) {
        for (x, y) in a.validity.iter().zip(&b.validity) {
            for i in reqsel_core::validity::Index::ALL {
                let (u, v) = (x.value(i), y.value(i));
                assert!(u == v || (u - v).abs() <= 1e-12 * u.abs(), "{u} vs {v}");
            }
        }
        assert_eq!(a.plan, b.plan);
    }
}
