use polariton::harness::{self, MapArtifact, RunConfig};
use polariton::model::fixtures::flux5;
use polariton::units::ghz;
use polariton::{DriveSpec, QubitState};

const FIXTURE: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/flux5.toml"));

fn small() -> RunConfig {
    let mut cfg = RunConfig::from_toml_str(FIXTURE).unwrap();
    cfg.freq_grid = vec![ghz(7.50), ghz(7.508), ghz(7.52)];
    cfg.power_grid_dbm = vec![-100.0, -89.0, -80.0];
    cfg.noise.shots_per_point = 100;
    cfg
}

#[test]
fn fixture_matches_reference_parameters() {
    let cfg = RunConfig::from_toml_str(FIXTURE).unwrap();
    let parsed = serde_json::to_value(cfg.system).unwrap();
    let reference = serde_json::to_value(flux5()).unwrap();
    for (key, want) in reference.as_object().unwrap() {
        let (a, b) = (parsed[key].as_f64().unwrap(), want.as_f64().unwrap());
        assert!((a - b).abs() <= 1e-15 * b.abs(), "{key}: {a} vs {b}");
    }
    assert_eq!(cfg.freq_grid.len(), 45);
    assert_eq!(cfg.power_grid_dbm.len(), 41);
    assert_eq!(cfg.attenuation_correction_db, -15.0);
}

#[test]
fn hash_tracks_semantic_fields_only() {
    let base = small();
    let h = base.hash();
    let mut same = base.clone();
    same.threads = Some(3);
    same.out = Some("elsewhere".into());
    assert_eq!(same.hash(), h);

    let mut changed = Vec::new();
    let mut c = base.clone();
    c.seed += 1;
    changed.push(c);
    let mut c = base.clone();
    c.system.kappa_c *= 1.0 + 1e-12;
    changed.push(c);
    let mut c = base.clone();
    c.power_grid_dbm[0] -= 0.5;
    changed.push(c);
    let mut c = base.clone();
    c.protocol.hold_time *= 2.0;
    changed.push(c);
    let mut c = base.clone();
    c.noise.heralding = !c.noise.heralding;
    changed.push(c);
    let mut c = base.clone();
    c.attenuation_correction_db += 1.0;
    changed.push(c);
    for c in changed {
        assert_ne!(c.hash(), h);
    }
}

#[test]
fn artifacts_round_trip_through_disk() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let deg = harness::sweep_deg_map(&cfg).unwrap();
    deg.write(dir.path(), "deg_map").unwrap();
    assert_eq!(MapArtifact::read(dir.path(), "deg_map").unwrap(), deg);
    assert_eq!(deg.metadata.config_hash, cfg.hash());

    let (bi, _) = harness::sweep_bistability(&cfg, QubitState::Excited).unwrap();
    bi.write(dir.path(), "bistability_e").unwrap();
    assert_eq!(MapArtifact::read(dir.path(), "bistability_e").unwrap(), bi);
    assert_eq!(bi.metadata.qubit_state.as_deref(), Some("e"));
}

#[test]
fn serial_and_parallel_sweeps_agree() {
    let run = |threads| {
        let mut cfg = small();
        cfg.threads = Some(threads);
        let (fid, _) = harness::sweep_fidelity(&cfg).unwrap();
        let (bi, _) = harness::sweep_bistability(&cfg, QubitState::Ground).unwrap();
        (fid.to_csv(), fid.to_json(), bi.to_csv(), bi.to_json())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn regions_around_the_working_point() {
    let cfg = small();
    let w = ghz(7.508);
    let label = |p: f64| {
        let a = harness::power_to_amplitude(p, w, cfg.system.kappa_c, cfg.attenuation_correction_db);
        harness::region_label(&cfg, &DriveSpec::new(w, a))
    };
    assert_eq!(label(-100.0), "I");
    assert_eq!(label(-89.0), "II");
    assert_eq!(label(-80.0), "III");
}

#[test]
fn fidelity_star_lies_in_region_two() {
    let (artifact, map) = harness::sweep_fidelity(&small()).unwrap();
    let star = &artifact.metadata.extra["star"];
    assert_eq!(star["region"], "II");
    assert_eq!(star["power_dBm"], -89.0);
    assert!(map.reports[map.argmax()].f_ro > 0.95);
}

#[test]
fn excited_shot_latches_at_the_calibration_point() {
    let cfg = small();
    let (shot, traj, info) = harness::shot_trace(&cfg, QubitState::Excited, None, 0).unwrap();
    assert_eq!(info["region"], "II");
    assert!(shot.latched || shot.initial == QubitState::Ground);
    let csv = harness::trajectory_csv(&traj);
    assert_eq!(csv.lines().count(), traj.len() + 1);
}

#[test]
fn curves_have_one_row_per_angle() {
    let cfg = small();
    let csv = harness::curves_csv(&cfg).unwrap();
    assert_eq!(csv.lines().count(), cfg.curve_points + 1);
}
