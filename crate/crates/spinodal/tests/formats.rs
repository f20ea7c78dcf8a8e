use num_complex::Complex64;
use spinodal::backend::{resolve_threads, RayonRunner, RustFft};
use spinodal::config::RunConfig;
use spinodal::error::{exit, Error};
use spinodal::formats::csv::{self, parse_theta, CurveFile, CURVE_HEADER};
use spinodal::formats::manifest::{read_dataset, write_dataset, Split};
use spinodal::formats::model::{load_model, load_registry, save_model, save_registry, ModelFile};
use spinodal::formats::{field, num, read_versioned_json, stl, SCHEMA_VERSION};
use spinodal::pipeline;
use spinodal_core::dataset::teacher::{synthesize_teacher_dataset, TeacherConfig};
use spinodal_core::dataset::{Curve, DesignParams, Direction, MorphologyClass, NormalizationConfig, Provenance, Sample};
use spinodal_core::design::{optimize_with, scale_target, DesignConfig, SerialRunner};
use spinodal_core::field::{Dft, FieldKind, GridField, NaiveDft, SurfaceMesh};
use spinodal_core::rng::Rng;
use spinodal_core::train::{init_submodule, ModelRegistry};

fn theta(t: [f64; 3]) -> DesignParams {
    DesignParams::new(t).unwrap()
}

fn small_registry() -> (ModelRegistry, Vec<Sample>) {
    let (samples, _) = synthesize_teacher_dataset(&TeacherConfig::new(5, 2)).unwrap();
    let norm = NormalizationConfig::fit(&samples).unwrap();
    let subs = Direction::ALL.iter().map(|&d| init_submodule(d, 9)).collect();
    (ModelRegistry::new(subs, norm).unwrap(), samples)
}

#[test]
fn field_file_layout_and_round_trip() {
    let mut rng = Rng::new(1, 0);
    let f = GridField::from_fn(8, 2.5, FieldKind::Phase, |_, _, _| rng.normal()).unwrap();
    let bytes = field::encode(&f);
    assert_eq!(bytes.len(), 48 + 8 * 512);
    assert_eq!(&bytes[..4], b"SPNF");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), field::VERSION);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), FieldKind::Phase.code());
    assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2.5);
    assert!(bytes[24..48].iter().all(|&b| b == 0));
    assert_eq!(f64::from_le_bytes(bytes[48..56].try_into().unwrap()), f.values()[0]);
    let back = field::decode(&bytes, "x".as_ref()).unwrap();
    assert_eq!(back, f);
}

#[test]
fn field_file_rejects_bad_input() {
    let f = GridField::from_fn(8, 1.0, FieldKind::Noise, |i, j, k| (i + j + k) as f64).unwrap();
    let mut bytes = field::encode(&f);
    let p = std::path::Path::new("f.spnf");
    assert_eq!(field::decode(&bytes[..100], p).unwrap_err().exit_code(), exit::DATA);
    bytes[4] = 9;
    assert!(matches!(field::decode(&bytes, p), Err(Error::Schema { found: 9, .. })));
    bytes[4] = 1;
    bytes[0] = b'X';
    assert_eq!(field::decode(&bytes, p).unwrap_err().exit_code(), exit::DATA);
}

#[test]
fn field_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let f = GridField::from_fn(9, 3.0, FieldKind::Occupancy, |i, _, _| (i % 2) as f64).unwrap();
    let path = dir.path().join("nested/occ.spnf");
    field::write(&path, &f).unwrap();
    assert_eq!(field::read(&path).unwrap(), f);
    let missing = field::read(&dir.path().join("none.spnf")).unwrap_err();
    assert_eq!(missing.exit_code(), exit::USER);
}

#[test]
fn stl_layout() {
    let mesh = SurfaceMesh {
        vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        triangles: vec![[0, 1, 2], [0, 3, 1]],
        normals: vec![[0.0, 0.0, 1.0], [0.0, -1.0, 0.0]],
        areas: vec![0.5, 0.5],
    };
    let bytes = stl::encode(&mesh);
    assert_eq!(bytes.len(), 84 + 2 * 50);
    assert_eq!(u32::from_le_bytes(bytes[80..84].try_into().unwrap()), 2);
    assert_eq!(&bytes[84 + 48..84 + 50], &[0, 0]);
    assert_eq!(&bytes[84 + 50 + 48..], &[0, 0]);
    let facets = stl::decode(&bytes).unwrap();
    assert_eq!(facets[1].normal, [0.0, -1.0, 0.0]);
    assert_eq!(facets[1].vertices, [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
    assert!(stl::decode(&bytes[..100]).is_none());
}

#[test]
fn number_format_keeps_every_bit() {
    let mut rng = Rng::new(2, 0);
    for _ in 0..1000 {
        let x = rng.normal() * 10f64.powi((rng.uniform() * 40.0) as i32 - 20);
        let s = num(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert!(mantissa.len() >= 12);
    }
}

#[test]
fn curve_csv_round_trip() {
    let s = Sample {
        theta: theta([0.0, 23.0, 37.0]),
        direction: Direction::E2,
        curve: Curve::new(vec![0.001, 0.2, 0.4], vec![1e-4, 3e-4, 2e-3]).unwrap(),
        provenance: Provenance::Synthetic,
    };
    let text = CurveFile::from_sample(&s, 3.2e9).encode();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# theta="));
    assert_eq!(lines[1], "# direction=2");
    assert!(lines[2].starts_with("# E_s="));
    assert_eq!(lines[4], CURVE_HEADER);
    assert_eq!(lines.len(), 8);
    // stress column is in pressure units
    let p: f64 = lines[5].split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 3.2e5).abs() < 1e-6);
    let back = CurveFile::decode(&text).unwrap().to_sample().unwrap();
    assert_eq!(back.theta, s.theta);
    assert_eq!(back.direction, s.direction);
    assert_eq!(back.provenance, s.provenance);
    for (a, b) in back.curve.stress().iter().zip(s.curve.stress()) {
        assert!((a - b).abs() <= 1e-15 * b.abs());
    }
    assert_eq!(back.curve.strain(), s.curve.strain());
}

#[test]
fn curve_csv_errors() {
    let ok = "# E_s=2\nstrain,stress\n0.1,1\n0.4,2\n";
    let t = CurveFile::decode(ok).unwrap();
    assert_eq!(t.curve.stress(), &[0.5, 1.0]);
    assert!(t.to_sample().is_none());
    assert!(CurveFile::decode("strain,stress\n0.1,1\n").unwrap_err().contains("E_s"));
    assert!(CurveFile::decode("# E_s=1\nx,y\n").unwrap_err().contains("header"));
    assert!(CurveFile::decode("# E_s=1\n# colour=red\nstrain,stress\n").unwrap_err().contains("colour"));
    assert!(CurveFile::decode("# E_s=1\nstrain,stress\n0.1\n").unwrap_err().contains("line 3"));
    assert!(CurveFile::decode("# E_s=1\nstrain,stress\n0.2,1\n0.1,1\n").is_err());
    assert!(CurveFile::decode("# E_s=1\n# direction=4\nstrain,stress\n0.1,1\n").is_err());
}

#[test]
fn theta_parsing_enforces_bounds() {
    assert_eq!(parse_theta("0,0,33").unwrap().angles(), [0.0, 0.0, 33.0]);
    assert!(parse_theta("0,0,15").is_err());
    assert!(parse_theta("0,33").is_err());
    assert!(parse_theta("0,0,x").is_err());
}

#[test]
fn pole_figure_and_npf_csv() {
    let pf = spinodal_core::field::PoleFigure { n_azimuth: 2, n_polar: 2, mass: vec![0.1, 0.2, 0.3, 0.4] };
    let text = csv::pole_figure(&pf);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "polar_lo_deg,polar_hi_deg,azimuth_lo_deg,azimuth_hi_deg,mass");
    assert_eq!(lines.len(), 5);
    let row: Vec<f64> = lines[4].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[0] - 60.0).abs() < 1e-12 && (row[1] - 90.0).abs() < 1e-12);
    assert!((row[2] - 180.0).abs() < 1e-12 && row[4] == 0.4);
    let npf = csv::npf(&[0.5, 0.75, 0.75]);
    assert_eq!(npf.lines().next(), Some("direction,npf"));
    assert_eq!(npf.lines().count(), 4);
}

#[test]
fn dataset_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, _) = synthesize_teacher_dataset(&TeacherConfig::new(3, 2)).unwrap();
    let test = vec![0, 1, 2];
    let manifest = write_dataset(dir.path(), &samples, &test, 3.2e9, 3, 0.2).unwrap();
    let data = read_dataset(&manifest).unwrap();
    assert_eq!(data.samples.len(), samples.len());
    assert_eq!(data.subset(Some(Split::Test)).len(), 3);
    assert_eq!(data.subset(Some(Split::Train)).len(), samples.len() - 3);
    assert_eq!(data.subset(None).len(), samples.len());
    for (a, b) in data.samples.iter().zip(&samples) {
        assert_eq!((a.theta, a.direction, a.provenance), (b.theta, b.direction, b.provenance));
        for (x, y) in a.curve.stress().iter().zip(b.curve.stress()) {
            assert!((x - y).abs() <= 1e-15 * y.abs());
        }
    }
    // directory form resolves to the manifest
    assert_eq!(read_dataset(dir.path()).unwrap(), data);
}

#[test]
fn dataset_manifest_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (samples, _) = synthesize_teacher_dataset(&TeacherConfig::new(3, 1)).unwrap();
    let manifest = write_dataset(dir.path(), &samples, &[], 3.2e9, 3, 0.0).unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap().replacen("\"direction\": 1", "\"direction\": 3", 1);
    std::fs::write(&manifest, text).unwrap();
    assert_eq!(read_dataset(&manifest).unwrap_err().exit_code(), exit::DATA);
}

#[test]
fn registry_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (reg, _) = small_registry();
    let path = save_registry(dir.path(), &reg).unwrap();
    assert_eq!(load_registry(&path).unwrap(), reg);
    assert_eq!(load_registry(dir.path()).unwrap(), reg);
    assert_eq!(std::fs::read_dir(dir.path().join("models")).unwrap().count(), 9);
}

#[test]
fn model_file_fields() {
    let dir = tempfile::tempdir().unwrap();
    let (reg, _) = small_registry();
    let m = reg.submodule(Direction::E3).energy_model(MorphologyClass::Columnar);
    let path = dir.path().join("m.json");
    save_model(&path, &m).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["schema_version", "direction", "class", "k_t", "dims", "alpha", "picnn1", "picnn2", "bnet", "vnet"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["direction"], 3);
    assert_eq!(v["class"], "columnar");
    assert_eq!(v["dims"], serde_json::json!([32, 32, 32]));
    let a_zz = &v["picnn1"]["layers"][0]["a_zz"];
    assert_eq!(
        a_zz["data"].as_array().unwrap().len() as u64,
        a_zz["rows"].as_u64().unwrap() * a_zz["cols"].as_u64().unwrap()
    );
    assert_eq!(load_model(&path).unwrap(), m);
    let f: ModelFile = read_versioned_json(&path, 1).unwrap();
    assert_eq!(f.alpha.len(), m.picnn1.layers.len());
}

#[test]
fn model_file_schema_and_consistency_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (reg, _) = small_registry();
    let m = reg.submodule(Direction::E1).energy_model(MorphologyClass::Lamellar);
    let path = dir.path().join("m.json");
    save_model(&path, &m).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1)).unwrap();
    let e = load_model(&path).unwrap_err();
    assert!(matches!(e, Error::Schema { found: 2, expected: 1, .. }));
    assert_eq!(e.exit_code(), exit::DATA);
    std::fs::write(&path, text.replacen("\"dims\": [\n    16", "\"dims\": [\n    17", 1)).unwrap();
    assert_eq!(load_model(&path).unwrap_err().exit_code(), exit::DATA);
    assert_eq!(load_model(&dir.path().join("none.json")).unwrap_err().exit_code(), exit::USER);
}

#[test]
fn config_defaults_and_overrides() {
    let d = RunConfig::default();
    assert_eq!(RunConfig::from_toml(&d.to_toml()).unwrap(), d);
    assert_eq!(RunConfig::from_toml("").unwrap(), d);
    let c = RunConfig::from_toml("seed = 5\n[train]\nepochs = 7\n[field]\nresolution = 40\n").unwrap();
    assert_eq!((c.train.epochs, c.field.resolution, c.train.batch_size), (7, 40, d.train.batch_size));
    let r = c.resolved();
    assert_eq!((r.train.seed, r.design.seed), (5, 5));
    assert!(RunConfig::from_toml("sede = 5\n").unwrap_err().contains("sede"));
    assert!(RunConfig::from_toml("[train]\nepoch = 5\n").is_err());
    assert!(RunConfig { dataset: spinodal::config::DatasetConfig { test_fraction: 1.0, ..Default::default() }, ..d.clone() }
        .validate()
        .is_err());
    assert!(d.validate().is_ok());
}

#[test]
fn thread_flag_takes_precedence() {
    assert_eq!(resolve_threads(Some(3), Some(5)).unwrap(), Some(3));
    assert_eq!(resolve_threads(None, Some(5)).unwrap(), Some(5));
}

#[test]
fn rustfft_matches_naive_transform() {
    let mut rng = Rng::new(4, 0);
    for len in [8, 12, 17] {
        let data: Vec<Complex64> = (0..3 * len).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
        for inverse in [false, true] {
            let (mut a, mut b) = (data.clone(), data.clone());
            RustFft.transform(&mut a, len, inverse);
            NaiveDft.transform(&mut b, len, inverse);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-11 * len as f64);
            }
        }
    }
}

#[test]
fn rayon_runner_matches_serial() {
    let (reg, samples) = small_registry();
    let target = scale_target(&samples[4].curve, 1.0).unwrap();
    let cfg = DesignConfig { starts: 2, epochs: 3, seed: 8, ..Default::default() };
    let pool = spinodal::thread_pool(Some(3)).unwrap();
    let par = pool.install(|| optimize_with(&target, &reg, &cfg, &RayonRunner).unwrap());
    let ser = optimize_with(&target, &reg, &cfg, &SerialRunner).unwrap();
    assert_eq!(par, ser);
    assert_eq!(par.traces.iter().map(|t| t.id).collect::<Vec<_>>(), (0..18).collect::<Vec<_>>());
}

#[test]
fn generated_descriptors_are_consistent() {
    let fc = spinodal::config::FieldConfig { resolution: 24, ..Default::default() };
    let thetas = [theta([0.0, 0.0, 33.0]), theta([20.0, 23.0, 28.0])];
    let batch = pipeline::generate_batch(&thetas, &fc, 3);
    for (t, g) in thetas.iter().zip(batch) {
        let g = g.unwrap();
        let single = pipeline::generate(*t, &fc, 3).unwrap();
        assert_eq!(g.phase, single.phase);
        // sum over axes of 1 - n_d^2 is 2 for every unit normal
        assert!((g.npf.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        assert!((g.pole.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.relative_density > 0.0 && g.relative_density < 1.0);
        let m = g.metrics(&fc).unwrap();
        assert!(m.thick_shell);
        assert_eq!(m.triangles, g.mesh.len());
    }
    let fine = pipeline::generate(thetas[0], &fc, 3).unwrap();
    let naive = spinodal_core::field::generate_phase_field(&fine.params, 24, 100.0, 3, &NaiveDft).unwrap();
    for (a, b) in fine.phase.values().iter().zip(naive.values()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn schema_version_constant() {
    assert_eq!(SCHEMA_VERSION, 1);
}
