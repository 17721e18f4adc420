use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use stripes_cli::config::{CurvatureSection, ExperimentConfig, Kind};
use stripes_cli::run::derive_seed;
use stripes_cli::{error_record, run_experiment};
use stripes_core::Error;

const BASE: &str = "
[kernel]
p = 5.0
d = 2
tau = 0.1

[cell]
length = 4.0
grid = 32
";

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stripes_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stripes"))
}

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let cfg = ExperimentConfig::load(&path).unwrap();
        let kind = cfg.kind.expect("shipped configs name their experiment");
        cfg.validate(kind).unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg, "{}", path.display());
        assert_eq!(back.to_toml().unwrap(), text);
        seen += 1;
    }
    assert_eq!(seen, 8);
}

#[test]
fn every_section_round_trips() {
    let text = format!(
        r#"
kind = "anneal"
seed = 42
strict_p = true
{BASE}
[quadrature]
directions = 12
offsets = 3
replicates = 4
mode = "stratified-random"

[lattice]
model = "voxel"
near_radius = 0.5

[[candidates]]
kind = "stripes"
normal = [1, 1]
half_period = 0.7071067811865476

[[candidates]]
kind = "droplet-lattice"
lattice = "centered"
radius = 0.3
spacing = 1.0

[stripe_scan]
h_min = 1.0
points = 9

[slice_check]
half_periods = [1.0, 2.0]

[lattice_check]
grids = [16, 32]

[compare]
functional = "tilde"
j = 3.0

[anneal]
chains = 3
initial = {{ kind = "checkerboard", cell = 1.0 }}

[anneal.schedule]
initial_temperature = 0.5
max_sweeps = 7

[anneal.schedule.mix]
single = 1.0
block = 0.0
shift = 0.0

[curvature]
shape = {{ kind = "complement", inner = {{ kind = "ball", center = [0.0, 0.0], radius = 2.0 }} }}
point = [2.0, 0.0]
radius = 0.5
mesh = 0.05
p = 4.5
excess_radii = [0.5, 0.25]

[gamma_check]
period = 6.0
boundary = [0.0, 1.0, 2.5, 4.0]
phase = false
taus = [0.1, 0.01]
"#
    );
    let cfg = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.anneal.as_ref().unwrap().schedule.max_sweeps, 7);
    assert!(matches!(cfg.curvature, Some(CurvatureSection { p: Some(_), .. })));
    for kind in [Kind::Constants, Kind::Compare] {
        let mut c = cfg.clone();
        c.kind = Some(kind);
        c.validate(kind).unwrap();
    }
    let back = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn physical_parameters_have_no_defaults() {
    for field in ["p = 5.0", "d = 2", "tau = 0.1", "length = 4.0"] {
        let text = BASE.replace(field, "");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let name = field.split(' ').next().unwrap();
        assert!(matches!(&err, Error::Config(m) if m.contains(name)), "{field}: {err}");
    }
    assert!(ExperimentConfig::parse("seed = 1").is_err());
    assert!(ExperimentConfig::parse(&format!("{BASE}\ncolour = 1")).is_err());
    assert!(ExperimentConfig::parse(&BASE.replace("tau = 0.1", "tau = 0.1\nunits = 2")).is_err());
}

#[test]
fn validation_rejects_bad_fields() {
    let cfg = |extra: &str| ExperimentConfig::parse(&format!("{extra}\n{BASE}")).unwrap();
    let bad = [
        ("kind = \"compare\"", Kind::Anneal),
        ("strict_p = true", Kind::Constants),
        ("", Kind::Curvature),
        ("", Kind::GammaCheck),
    ];
    let strict = ExperimentConfig::parse(&format!("strict_p = true\n{}", BASE.replace("p = 5.0", "p = 4.5"))).unwrap();
    assert!(matches!(strict.validate(Kind::Constants), Err(Error::Config(_))));
    for (extra, kind) in &bad[..1] {
        assert!(matches!(cfg(extra).validate(*kind), Err(Error::Config(_))), "{extra}");
    }
    for (extra, kind) in &bad[2..] {
        assert!(matches!(cfg(extra).validate(*kind), Err(Error::Config(_))), "{kind:?}");
    }
    let mut c = cfg("");
    c.anneal = Some(Default::default());
    c.anneal.as_mut().unwrap().schedule.seed = 9;
    assert!(matches!(c.validate(Kind::Anneal), Err(Error::Config(_))));
    let mut c = cfg("");
    c.cell.grid = None;
    assert!(matches!(c.validate(Kind::Compare), Err(Error::Config(_))));
    let mut c = cfg("");
    c.kernel.tau = 0.0;
    assert!(matches!(c.validate(Kind::Anneal), Err(Error::Config(_))));
    c.validate(Kind::Constants).unwrap();
    let mut c = cfg("");
    c.slice_check = Some(stripes_cli::config::SliceCheckSection { half_periods: vec![0.7], phase: 0.0 });
    assert!(matches!(c.validate(Kind::SliceCheck), Err(Error::Config(_))));
}

#[test]
fn error_records_are_single_json_lines() {
    let (code, line) = error_record(&Error::Audit("drift 1e-3".into()));
    assert_eq!(code, 3);
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["error"], "audit");
    let (code, line) = error_record(&Error::config("bad\nvalue"));
    assert_eq!(code, 2);
    assert!(!line.contains('\n'));
    assert_eq!(serde_json::from_str::<serde_json::Value>(&line).unwrap()["message"], "bad\nvalue");
}

#[test]
fn derived_seeds_depend_on_master_and_stream() {
    assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
    assert_ne!(derive_seed(7, 1), derive_seed(8, 1));
}

#[test]
fn binary_reports_config_errors_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    fs::write(&path, BASE.replace("tau = 0.1", "")).unwrap();
    let out = stripes_bin().args(["constants", "--config"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "config");

    let out = stripes_bin().arg("constants").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = stripes_bin().arg("no-such-experiment").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);
    let out = stripes_bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

fn read_tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("kind = \"slice-check\"\nseed = 5\n{BASE}\n[quadrature]\ndirections = 16\noffsets = 4\nreplicates = 4\nmode = \"stratified-random\"\n");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let run = |name: &str, cfg: &ExperimentConfig, threads| {
        let out = dir.path().join(name);
        let m = run_experiment(cfg, Kind::SliceCheck, &out, Some(threads)).unwrap();
        assert_eq!(m.threads, threads);
        read_tables(&out)
    };
    let a = run("a", &cfg, 1);
    assert_eq!(a, run("b", &cfg, 1));
    assert_eq!(a, run("c", &cfg, 3));
    let mut other = cfg.clone();
    other.seed = 6;
    assert_ne!(a, run("d", &other, 1));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["kind"], "slice-check");
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let echo: ExperimentConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(echo, cfg);
}

#[test]
fn tables_lead_with_module_operation_and_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BASE).unwrap();
    for kind in [Kind::Constants, Kind::StripeScan] {
        let out = dir.path().join(kind.as_str());
        run_experiment(&cfg, kind, &out, Some(1)).unwrap();
        for (name, bytes) in read_tables(&out) {
            let text = String::from_utf8(bytes).unwrap();
            let mut lines = text.lines();
            let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
            assert_eq!(header[..3], ["module", "operation", "anchor"], "{name}");
            for l in lines {
                let cells: Vec<&str> = l.split('\t').collect();
                assert_eq!(cells.len(), header.len(), "{name}: {l}");
                assert!(cells[..3].iter().all(|c| !c.is_empty()));
            }
        }
    }
}

#[test]
fn constants_report_critical_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(BASE).unwrap();
    let out = dir.path().join("c");
    let m = run_experiment(&cfg, Kind::Constants, &out, Some(1)).unwrap();
    assert_eq!(m.flagged_rows, 0);
    let text = fs::read_to_string(out.join("constants.tsv")).unwrap();
    let row = text.lines().find(|l| l.contains("critical_constant")).unwrap();
    let cells: Vec<&str> = row.split('\t').collect();
    let (closed, quad): (f64, f64) = (cells[3].parse().unwrap(), cells[4].parse().unwrap());
    assert!((closed - 10.0 / 3.0).abs() < 1e-14);
    assert!((quad - closed).abs() < 1e-8 * closed);
}

#[test]
fn divergence_is_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{BASE}\n[curvature]\nshape = {{ kind = \"ball\", center = [0.0, 0.0], radius = 1.0 }}\npoint = [1.0, 0.0]\nradius = 0.5\nmesh = 0.02\nhalvings = 3\n"
    );
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let m = run_experiment(&cfg, Kind::Curvature, &dir.path().join("k"), Some(1)).unwrap();
    assert!(m.flagged_rows > 0);
    let summary = fs::read_to_string(dir.path().join("k/curvature_summary.tsv")).unwrap();
    assert!(summary.lines().any(|l| l.contains("\tverdict\tdivergent-log\ttrue")), "{summary}");
}

#[test]
fn anneal_writes_fields_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("seed = 2\n{BASE}\n[anneal]\nchains = 2\n[anneal.schedule]\nmax_sweeps = 3\n");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let out = dir.path().join("a");
    let m = run_experiment(&cfg, Kind::Anneal, &out, Some(2)).unwrap();
    for f in ["anneal_trace.tsv", "anneal_summary.tsv", "fields/initial.bin", "fields/chain0_best.bin", "fields/chain1_best.bin"] {
        assert!(m.outputs.iter().any(|o| o == f), "{f}: {:?}", m.outputs);
        assert!(out.join(f).exists());
    }
    let best = stripes_core::lattice::VoxelSet::load(&out.join("fields/chain0_best.bin")).unwrap();
    assert_eq!(best.n(), 32);
    let trace = fs::read_to_string(out.join("anneal_trace.tsv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 4);
}
