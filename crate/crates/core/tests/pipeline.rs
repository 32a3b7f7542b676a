use std::path::Path;
use std::process::Command;

use nalgebra::DVector;

use pcpa::area::{dbgs, AttackedArea};
use pcpa::cases::ieee30;
use pcpa::cli::{self, EXIT_CERTIFICATION, EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK};
use pcpa::diagnosis::{
    assemble_p2, build_d_prime, diagnose, solve_lp, DeltaModel, DiagnosisOptions, LpStatus,
    LsiSystem, PriorFile, PriorSource, PriorVector,
};
use pcpa::evaluation::{generate_dataset, run_experiment, Dataset, DatasetConfig};
use pcpa::rng::{derive_seed, rng_from_seed};
use pcpa::simulator::{
    sample_attack, sample_operating_point, simulate, AttackConfig, AttackScenario, KindMix,
    MeasurementSet, PhysicalAttack,
};
use pcpa::{Error, GridModel};

fn setup() -> (GridModel, AttackedArea) {
    let model = GridModel::new(ieee30());
    let area = (0..)
        .map(|s| dbgs(&model, 8, s).unwrap())
        .find(|a| a.lines.len() > a.buses.len())
        .unwrap();
    (model, area)
}

fn scenario(
    model: &GridModel,
    area: &AttackedArea,
    k: usize,
    seed: u64,
    islanding: bool,
) -> (AttackScenario, MeasurementSet) {
    let mut rng = rng_from_seed(seed);
    loop {
        let op = sample_operating_point(&model.grid, 0.2, &mut rng).unwrap();
        let atk = sample_attack(area, k, KindMix::Mixed, &AttackConfig::default(), &mut rng).unwrap();
        match simulate(model, area, &atk, &op, (0.5, 0.95), &mut rng) {
            Ok((sc, m)) if sc.islanding() == islanding => return (sc, m),
            Ok(_) | Err(Error::Rebalance(_)) => continue,
            Err(e) => panic!("{e}"),
        }
    }
}

fn system(model: &GridModel, area: &AttackedArea, sc: &AttackScenario, meas: &MeasurementSet) -> LsiSystem {
    let view = area.view(model).unwrap();
    let delta_hbar = view.take_hbar(&sc.delta);
    LsiSystem::build(model, &view, &meas.theta, &sc.theta_post, &meas.p, &delta_hbar, &DeltaModel::Zero)
        .unwrap()
}

#[test]
fn true_attack_satisfies_the_system() {
    let (model, area) = setup();
    for i in 0..40 {
        let k = 1 + i % area.lines.len();
        let (sc, meas) = scenario(&model, &area, k, derive_seed(11, 0, i as u64), false);
        let sys = system(&model, &area, &sc, &meas);
        let x = sc.attack.x_h(&area);
        assert!(sys.residual(&x, 0.0) <= 1e-8, "scenario {i}");

        let costs = PriorVector::uniform(x.len()).costs();
        let lp = assemble_p2(&sys, &costs).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let truth_cost: f64 = costs.iter().zip(&x).map(|(c, x)| c * x).sum();
        assert!(sol.objective <= truth_cost + 1e-9);
    }
}

#[test]
fn islanding_truth_satisfies_known_delta_system() {
    let (model, area) = setup();
    let view = area.view(&model).unwrap();
    let mut checked = 0;
    for i in 0..400u64 {
        let k = 1 + (i as usize) % area.lines.len();
        let mut rng = rng_from_seed(derive_seed(12, 0, i));
        let op = sample_operating_point(&model.grid, 0.2, &mut rng).unwrap();
        let atk = sample_attack(&area, k, KindMix::Cut, &AttackConfig::default(), &mut rng).unwrap();
        let Ok((sc, meas)) = simulate(&model, &area, &atk, &op, (0.5, 0.95), &mut rng) else {
            continue;
        };
        if !sc.islanding() {
            continue;
        }
        let sys = LsiSystem::build(
            &model,
            &view,
            &meas.theta,
            &sc.theta_post,
            &meas.p,
            &view.take_hbar(&sc.delta),
            &DeltaModel::Known(view.take_h(&sc.delta)),
        )
        .unwrap();
        assert!(sys.residual(&sc.attack.x_h(&area), 0.0) <= 1e-8);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn cyclic_area_admits_a_second_solution() {
    let (model, area) = setup();
    let (sc, meas) = scenario(&model, &area, 2, derive_seed(13, 0, 0), false);
    let view = area.view(&model).unwrap();
    let dp = build_d_prime(&view, &sc.theta_post, &model.reactances);
    assert_eq!(dp.nrows(), area.buses.len());
    let svd = dp.clone().svd(false, true);
    let rank = svd.rank(1e-9 * svd.singular_values.max());
    assert!(rank <= area.buses.len() && rank < area.lines.len());

    let v_t = svd.v_t.unwrap();
    let null = v_t.row(v_t.nrows() - 1).transpose();
    assert!((&dp * &null).amax() <= 1e-9);
    let sys = system(&model, &area, &sc, &meas);
    let x = DVector::from_vec(sc.attack.x_h(&area)) + null * 0.05;
    assert!(sys.residual(x.as_slice(), 0.0) <= 1e-8);
}

#[test]
fn no_attack_gives_zero_estimate() {
    let (model, area) = setup();
    let mut rng = rng_from_seed(5);
    let op = sample_operating_point(&model.grid, 0.2, &mut rng).unwrap();
    let (sc, meas) = simulate(&model, &area, &PhysicalAttack::none(), &op, (0.5, 0.95), &mut rng).unwrap();
    assert!(!sc.islanding());
    let d = diagnose(&model, &area, &meas, &PriorVector::uniform(area.lines.len()), &DiagnosisOptions::default())
        .unwrap();
    assert!(d.x_h.iter().all(|x| x.abs() <= 1e-9));
    assert!(d.labels.iter().all(|&l| l == 0));
}

#[test]
fn prior_file_round_trip_and_reordering() {
    let (_, area) = setup();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prior.json");
    let y: Vec<f64> = (0..area.lines.len()).map(|k| k as f64 / 10.0).collect();
    let pf = PriorFile::new(&area, &PriorVector(y.clone()), None);
    pf.save(&path).unwrap();
    let back = PriorFile::load(&path).unwrap();
    assert_eq!(back, pf);
    assert_eq!(back.to_prior(&area).unwrap().0, y);

    let mut reversed = pf.clone();
    reversed.edges.reverse();
    reversed.y.reverse();
    assert_eq!(reversed.to_prior(&area).unwrap().0, y);

    let mut short = pf.clone();
    short.y.pop();
    short.edges.pop();
    assert!(matches!(short.to_prior(&area), Err(Error::Prior(_))));
    let mut other = pf.clone();
    other.area_id = "area-000000000000".into();
    assert!(matches!(other.to_prior(&area), Err(Error::Prior(_))));
    let mut bad = pf;
    bad.y[0] = 1.5;
    assert!(matches!(bad.to_prior(&area), Err(Error::Prior(_))));
}

fn small_config() -> DatasetConfig {
    DatasetConfig {
        train_per_kind: 6,
        test_per_cardinality: 5,
        cardinalities: Some(vec![1, 2, 3]),
        ..DatasetConfig::default()
    }
}

#[test]
fn dataset_is_deterministic_and_labelled() {
    let (model, area) = setup();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let m1 = generate_dataset(&model, &area, &small_config(), 42, a.path()).unwrap();
    let m2 = generate_dataset(&model, &area, &small_config(), 42, b.path()).unwrap();
    let m3 = generate_dataset(&model, &area, &small_config(), 43, c.path()).unwrap();
    assert_eq!(m1, m2);
    assert_ne!(m1.shards[0].sha256, m3.shards[0].sha256);

    let ds = Dataset::open(a.path()).unwrap();
    let names: Vec<&str> = ds.manifest.shards.iter().map(|s| s.spec.name.as_str()).collect();
    assert_eq!(names, ["train_alter", "train_cut", "test_f1", "test_f2", "test_f3"]);
    for shard in &ds.manifest.shards {
        let records = ds.read_shard(&shard.spec.name).unwrap();
        assert_eq!(records.len(), shard.spec.records);
        for r in &records {
            let ones = r.labels.iter().filter(|&&l| l == 1).count();
            assert_eq!(ones, r.cardinality);
            assert_eq!(r.attacks.len(), r.cardinality);
            if let Some(k) = shard.spec.cardinality {
                assert_eq!(r.cardinality, k);
            }
        }
    }
    assert_eq!(ds.model().unwrap().n_buses(), model.n_buses());
}

#[test]
fn tampered_shard_is_rejected() {
    let (model, area) = setup();
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&model, &area, &small_config(), 1, dir.path()).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let file = dir.path().join(&ds.shard("test_f1").unwrap().file);
    let mut text = std::fs::read_to_string(&file).unwrap();
    text.push('\n');
    std::fs::write(&file, text).unwrap();
    assert!(matches!(ds.read_shard("test_f1"), Err(Error::Dataset(_))));
}

#[test]
fn aggregation_matches_recomputation() {
    let (model, area) = setup();
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&model, &area, &small_config(), 8, dir.path()).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    let report = run_experiment(&model, &ds, &PriorSource::Uniform, &DiagnosisOptions::default()).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        let errs: Vec<f64> = report
            .records
            .iter()
            .filter(|r| r.cardinality == row.cardinality)
            .map(|r| r.normalized_error)
            .collect();
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let std = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert_eq!(row.records, errs.len());
        assert!((row.error.mean - mean).abs() <= 1e-12);
        assert!((row.error.std - std).abs() <= 1e-12);
    }
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("pcpa").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let area = dir.path().join("area.json");
    let data = dir.path().join("data");
    assert_eq!(run(&["--seed", "3", "area", "--size", "8", "-o", path(&area)]), EXIT_OK);
    assert_eq!(run(&["area", "--size", "20", "-o", path(&dir.path().join("big.json"))]), EXIT_CERTIFICATION);
    assert_eq!(run(&["dataset", "--attacks", "0", "-o", path(&data)]), EXIT_CONFIG);
    assert_eq!(run(&["dataset", "--mix", "sideways", "-o", path(&data)]), EXIT_CONFIG);
    assert_eq!(
        run(&["dataset", "--area", path(&area), "--attacks", "1", "--train", "2", "--test", "3", "-o", path(&data)]),
        EXIT_OK
    );

    let ds = Dataset::open(&data).unwrap();
    let other = AttackedArea::load(&area).unwrap();
    let mut pf = PriorFile::new(&other, &PriorVector::uniform(other.lines.len()), None);
    pf.y.pop();
    let prior = dir.path().join("prior.json");
    pf.save(&prior).unwrap();
    let arg = format!("file:{}", prior.display());
    let out = dir.path().join("diag");
    assert_eq!(run(&["diagnose", "--dataset", path(&data), "--prior", &arg, "-o", path(&out)]), EXIT_MISMATCH);
    assert_eq!(run(&["diagnose", "--dataset", path(&data), "--prior", "oracle", "-o", path(&out)]), EXIT_OK);
    assert_eq!(run(&["diagnose", "--dataset", path(&dir.path().join("none")), "-o", path(&out)]), EXIT_MISMATCH);
    assert!(ds.test_shards().count() == 1);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_pcpa");
    let build = |env_seed: &str, flag: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(exe);
        cmd.env("PCPA_SEED", env_seed);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        let status = cmd.args(["area", "--size", "8", "-o", path(&out)]).output().unwrap();
        assert_eq!(status.status.code(), Some(EXIT_OK));
        AttackedArea::load(&out).unwrap()
    };
    let a = build("5", None, "a.json");
    let b = build("5", None, "b.json");
    let c = build("6", None, "c.json");
    let d = build("6", Some("5"), "d.json");
    assert_eq!(a, b);
    assert_eq!(a, d);
    assert_ne!(a.seed, c.seed);
}
