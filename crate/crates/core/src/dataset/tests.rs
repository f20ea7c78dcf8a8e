use super::teacher::{synthesize_teacher_dataset, Teacher, TeacherConfig};
use super::*;
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;

fn design(t: [f64; 3]) -> DesignParams {
    DesignParams::new(t).unwrap()
}

fn sample(t: [f64; 3], d: Direction, curve: Curve) -> Sample {
    Sample { theta: design(t), direction: d, curve, provenance: Provenance::Synthetic }
}

fn linear(k: f64, strains: Vec<f64>) -> Curve {
    let stress = strains.iter().map(|e| k * e).collect();
    Curve::new(strains, stress).unwrap()
}

#[test]
fn grid_spacing() {
    let g = StrainGrid::default();
    assert_eq!(g.count, 80);
    let expected = 0.399 / 79.0;
    assert!((g.spacing() - expected).abs() < 1e-15);
    assert!((expected - 0.0050506).abs() < 1e-7);
    let p = g.points();
    assert_eq!(p[0], 0.001);
    assert_eq!(p[79], 0.4);
}

#[test]
fn interpolation_linear_exact() {
    let raw = Curve::new(vec![0.0, 0.5], vec![0.0, 0.5]).unwrap();
    let out = interpolate_curve(&raw, &StrainGrid::default()).unwrap();
    for (&e, &s) in out.strain().iter().zip(out.stress()) {
        assert!((e - s).abs() < 1e-15);
    }
}

#[test]
fn interpolation_idempotent_on_grid() {
    let grid = StrainGrid::default();
    let pts = grid.points();
    let stress: Vec<f64> = pts.iter().map(|e| e * e + libm::sin(20.0 * e)).collect();
    let raw = Curve::new(pts.clone(), stress.clone()).unwrap();
    let out = interpolate_curve(&raw, &grid).unwrap();
    assert_eq!(out.strain(), pts.as_slice());
    assert_eq!(out.stress(), stress.as_slice());
}

#[test]
fn interpolation_rejects_short_range() {
    let raw = Curve::new(vec![0.0, 0.3], vec![0.0, 1.0]).unwrap();
    assert!(matches!(
        interpolate_curve(&raw, &StrainGrid::default()),
        Err(DatasetError::InsufficientStrainRange(_, _))
    ));
}

#[test]
fn interpolation_back_extrapolates() {
    let raw = Curve::new(vec![0.01, 0.02, 0.5], vec![1.0, 2.0, 2.0]).unwrap();
    let out = interpolate_curve(&raw, &StrainGrid::default()).unwrap();
    // first segment has slope 100 through (0.01, 1)
    assert!((out.stress()[0] - 0.1).abs() < 1e-12);
}

#[test]
fn normalize_angles() {
    let s = sample([0.0, 0.0, 35.0], Direction::E1, linear(1.0, vec![0.1, 0.2]));
    let cfg = NormalizationConfig::fit([&s]).unwrap();
    let n = normalize(&s, &cfg).unwrap();
    assert_eq!(n.theta, [0.0, 0.0, 0.5]);
    assert_eq!(n.class, MorphologyClass::Lamellar);
}

#[test]
fn normalize_allows_values_above_one() {
    let train = sample([0.0, 0.0, 35.0], Direction::E1, linear(1.0, vec![0.1, 0.2]));
    let test = sample([0.0, 0.0, 35.0], Direction::E1, linear(3.0, vec![0.1, 0.2]));
    let cfg = NormalizationConfig::fit([&train]).unwrap();
    let n = normalize(&test, &cfg).unwrap();
    assert!((n.stress[1] - 3.0).abs() < 1e-12);
}

#[test]
fn normalization_rejects_zero_maximum() {
    let s = sample([0.0, 0.0, 35.0], Direction::E1, linear(0.0, vec![0.1, 0.2]));
    assert_eq!(NormalizationConfig::fit([&s]), Err(DatasetError::ZeroMaximum));
}

#[test]
fn round_trip_many_samples() {
    let mut rng = crate::rng::Rng::new(3, 99);
    let mut worst = 0.0f64;
    let mut samples = Vec::new();
    for _ in 0..1000 {
        let class = MorphologyClass::ALL[rng.below(3)];
        let theta = teacher::sample_design(class, &mut rng);
        let mut e = 0.0;
        let strain: Vec<f64> = (0..10).map(|_| {
            e += rng.uniform_in(0.001, 0.05);
            e
        }).collect();
        let stress = strain.iter().map(|_| rng.uniform_in(0.0, 1e-3)).collect();
        samples.push(Sample { theta, direction: Direction::from_index(rng.below(3)), curve: Curve::new(strain, stress).unwrap(), provenance: Provenance::Synthetic });
    }
    let cfg = NormalizationConfig::fit(&samples).unwrap();
    for s in &samples {
        let back = denormalize(&normalize(s, &cfg).unwrap(), &cfg, s.provenance).unwrap();
        for (a, b) in s.theta.angles().iter().zip(back.theta.angles()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in s.curve.strain().iter().chain(s.curve.stress()).zip(back.curve.strain().iter().chain(back.curve.stress())) {
            worst = worst.max((a - b).abs());
        }
        assert_eq!(back.direction, s.direction);
    }
    assert!(worst < 1e-12, "worst {worst}");
}

#[test]
fn classification() {
    assert_eq!(classify_morphology(&design([0.0, 0.0, 33.0])), Ok(MorphologyClass::Lamellar));
    assert_eq!(classify_morphology(&design([0.0, 23.0, 37.0])), Ok(MorphologyClass::Columnar));
    assert_eq!(classify_morphology(&design([20.0, 23.0, 28.0])), Ok(MorphologyClass::Cubic));
    assert_eq!(classify_morphology(&design([0.0, 0.0, 0.0])), Err(DatasetError::DegenerateDesign));
}

#[test]
fn angle_bounds() {
    assert!(DesignParams::new([0.0, 0.0, 15.0]).is_err());
    assert!(DesignParams::new([0.0, 0.0, 70.5]).is_err());
    assert!(DesignParams::new([0.0, 20.0, 70.0]).is_ok());
}

#[test]
fn permutation_census() {
    let curve = linear(1.0, vec![0.1, 0.2]);
    let mut rng = crate::rng::Rng::new(11, 5);
    let mut total = 0;
    for i in 0..107 {
        let class = if i < 11 { MorphologyClass::Lamellar } else if i < 47 { MorphologyClass::Columnar } else { MorphologyClass::Cubic };
        let theta = teacher::sample_design(class, &mut rng);
        let s = Sample { theta, direction: Direction::E1, curve: curve.clone(), provenance: Provenance::Synthetic };
        let expanded = expand_permutations(&s).unwrap();
        for e in &expanded {
            assert_eq!(e.class().unwrap(), class);
        }
        total += expanded.len();
    }
    assert_eq!(total, 11 * 3 + 96 * 6);
    assert_eq!(total, 609);
}

#[test]
fn permutation_identity() {
    let s = sample([25.0, 40.0, 60.0], Direction::E1, linear(2.0, vec![0.1, 0.2]));
    let out = expand_permutations(&s).unwrap();
    let img = out.iter().find(|x| x.theta.angles() == [40.0, 25.0, 60.0]).unwrap();
    assert_eq!(img.direction, Direction::E2);
    assert_eq!(img.curve, s.curve);
}

#[test]
fn equal_cubic_angles_keep_duplicates() {
    let s = sample([30.0, 30.0, 30.0], Direction::E3, linear(1.0, vec![0.1, 0.2]));
    let out = expand_permutations(&s).unwrap();
    assert_eq!(out.len(), 6);
    assert!(out.iter().all(|x| x.theta.angles() == [30.0, 30.0, 30.0]));
    let mut dirs: Vec<_> = out.iter().map(|x| x.direction).collect();
    dirs.sort();
    dirs.dedup();
    assert_eq!(dirs.len(), 3);
}

#[test]
fn lamellar_expansion_places_nonzero_angle_everywhere() {
    let s = sample([0.0, 0.0, 40.0], Direction::E3, linear(1.0, vec![0.1, 0.2]));
    let out = expand_permutations(&s).unwrap();
    assert_eq!(out.len(), 3);
    for (i, x) in out.iter().enumerate() {
        let pos = x.theta.angles().iter().position(|&a| a == 40.0).unwrap();
        assert_eq!(x.direction.index(), pos, "image {i}");
    }
}

#[test]
fn canonical_equivalents_of_lamellar() {
    let s = sample([0.0, 0.0, 40.0], Direction::E1, linear(1.0, vec![0.1, 0.2]));
    let out = canonical_equivalents(&s).unwrap();
    assert_eq!(out.iter().map(|x| x.direction).collect::<Vec<_>>(), vec![Direction::E1, Direction::E2]);
    let s3 = sample([0.0, 0.0, 40.0], Direction::E3, linear(1.0, vec![0.1, 0.2]));
    assert_eq!(canonical_equivalents(&s3).unwrap().len(), 1);
}

#[test]
fn canonical_direction_follows_axis() {
    let (c, d) = canonical_direction(&design([50.0, 20.0, 30.0]), Direction::E1);
    assert_eq!(c.angles(), [20.0, 30.0, 50.0]);
    assert_eq!(d, Direction::E3);
    let (_, d) = canonical_direction(&design([50.0, 20.0, 30.0]), Direction::E2);
    assert_eq!(d, Direction::E1);
}

#[test]
fn absorbed_energy_examples() {
    let zero = Curve::new(vec![0.1, 0.2, 0.3], vec![0.0; 3]).unwrap();
    assert!(absorbed_energy(&zero).iter().all(|&e| e == 0.0));

    let grid = StrainGrid::default().points();
    let k = 3.5;
    let e = absorbed_energy(&linear(k, grid.clone()));
    let expected = k * 0.4 * 0.4 / 2.0;
    assert!((e[79] - expected).abs() < 1e-14);

    // one real point: (0.2 - 0) * (1.0 + 0) / 2
    let two = Curve::new(vec![0.2], vec![1.0]).unwrap();
    assert!((absorbed_energy(&two)[0] - 0.1).abs() < 1e-15);
}

#[test]
fn absorbed_energy_increments_are_last_trapezoid() {
    let c = Curve::new(vec![0.1, 0.25, 0.3, 0.5], vec![1.0, 3.0, 2.0, 5.0]).unwrap();
    let e = absorbed_energy(&c);
    let (x, y) = (c.strain(), c.stress());
    for t in 1..4 {
        let trap = (y[t] + y[t - 1]) / 2.0 * (x[t] - x[t - 1]);
        assert!((e[t] - e[t - 1] - trap).abs() < 1e-15);
    }
}

#[test]
fn stiffness_examples() {
    let grid = StrainGrid::default().points();
    let k = 2.5;
    for s in incremental_stiffness(&linear(k, grid.clone())).unwrap() {
        assert!((s - k).abs() < 1e-9);
    }
    let quad = Curve::new(grid.clone(), grid.iter().map(|e| e * e).collect()).unwrap();
    let st = incremental_stiffness(&quad).unwrap();
    for t in 1..79 {
        assert!((st[t] - 2.0 * grid[t]).abs() < 1e-12, "t={t}");
    }
    let de = grid[79] - grid[78];
    assert!((st[79] - (2.0 * 0.4 - de)).abs() < 1e-12);
    // first point uses the virtual origin: (e1^2 - 0) / (e1 - 0)
    assert!((st[0] - grid[0]).abs() < 1e-15);
}

#[test]
fn stiffness_needs_two_points() {
    let c = Curve::new(vec![0.1], vec![1.0]).unwrap();
    assert!(incremental_stiffness(&c).is_err());
}

#[test]
fn split_keeps_directions_together() {
    let (samples, _) = synthesize_teacher_dataset(&TeacherConfig::new(4, 10)).unwrap();
    let (train, test) = split_by_design(&samples, 9, 0.1);
    assert_eq!(train.len() + test.len(), samples.len());
    assert_eq!(test.len(), 9);
    for &i in &test {
        assert!(!train.iter().any(|&j| samples[j].theta == samples[i].theta));
    }
    assert_eq!(split_by_design(&samples, 9, 0.1), (train, test));
}

#[test]
fn teacher_is_reproducible() {
    let cfg = TeacherConfig::new(5, 4);
    let (a, teacher) = synthesize_teacher_dataset(&cfg).unwrap();
    let (b, _) = synthesize_teacher_dataset(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4 * 3 * 3);
    let strains = cfg.grid.points();
    for s in &a {
        let again = teacher.curve(&s.theta, s.direction, &strains).unwrap();
        assert_eq!(&again, &s.curve);
    }
}

#[test]
fn teacher_curves_are_nonnegative_with_nonnegative_slope_of_energy() {
    let (samples, _) = synthesize_teacher_dataset(&TeacherConfig::new(21, 16)).unwrap();
    for s in &samples {
        let scale = s.curve.stress().iter().fold(0.0f64, |m, &x| m.max(x));
        for &x in s.curve.stress() {
            assert!(x / scale >= -1e-6, "{:?} {:?}", s.theta, s.direction);
        }
    }
}

#[test]
fn teacher_lamellar_axes_agree() {
    let teacher = Teacher::new(8);
    let strains = StrainGrid::default().points();
    let t = design([0.0, 0.0, 41.0]);
    assert_eq!(teacher.curve(&t, Direction::E1, &strains).unwrap(), teacher.curve(&t, Direction::E2, &strains).unwrap());
}

#[test]
fn teacher_noise_is_seeded() {
    let mut cfg = TeacherConfig::new(5, 2);
    cfg.noise = 0.05;
    let (a, _) = synthesize_teacher_dataset(&cfg).unwrap();
    let (b, _) = synthesize_teacher_dataset(&cfg).unwrap();
    let (clean, _) = synthesize_teacher_dataset(&TeacherConfig::new(5, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, clean);
}

#[test]
fn serde_round_trip() {
    let s = sample([0.0, 23.0, 37.0], Direction::E2, linear(1.0, vec![0.1, 0.2]));
    let json = serde_json::to_string(&s).unwrap();
    assert!(json.contains("\"direction\":2"));
    let back: Sample = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    assert!(serde_json::from_str::<DesignParams>("[0, 0, 10]").is_err());
}

proptest! {
    #[test]
    fn interpolation_exact_on_piecewise_linear(
        knots in proptest::collection::vec(-5.0f64..5.0, 5),
    ) {
        let grid = StrainGrid::default();
        let pts = grid.points();
        // breakpoints every 20 grid points
        let bx: Vec<f64> = (0..5).map(|i| pts[(i * 79) / 4]).collect();
        let f = |x: f64| {
            let s = bx.iter().rposition(|&b| b <= x).unwrap_or(0).min(3);
            knots[s] + (knots[s + 1] - knots[s]) * (x - bx[s]) / (bx[s + 1] - bx[s])
        };
        let raw = Curve::new(bx.clone(), knots.clone()).unwrap();
        let out = interpolate_curve(&raw, &grid).unwrap();
        for (&x, &y) in out.strain().iter().zip(out.stress()) {
            prop_assert!((y - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_nondecreasing_for_nonnegative_stress(stress in proptest::collection::vec(0.0f64..10.0, 2..40)) {
        let strain: Vec<f64> = (1..=stress.len()).map(|i| i as f64 * 0.01).collect();
        let e = absorbed_energy(&Curve::new(strain, stress).unwrap());
        prop_assert!(e.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn expansion_preserves_class(a in 20.0f64..70.0, b in 20.0f64..70.0, c in 20.0f64..70.0, zeros in 0usize..3) {
        let mut t = [a, b, c];
        for z in t.iter_mut().take(zeros) {
            *z = 0.0;
        }
        let s = sample(t, Direction::E2, linear(1.0, vec![0.1, 0.2]));
        let class = s.class().unwrap();
        let out = expand_permutations(&s).unwrap();
        prop_assert_eq!(out.len(), if class == MorphologyClass::Lamellar { 3 } else { 6 });
        for x in out {
            prop_assert_eq!(x.class().unwrap(), class);
        }
    }
}
