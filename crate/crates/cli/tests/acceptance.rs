//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stripes_cli::config::{AnnealSection, ExperimentConfig, Kind};
use stripes_cli::run_experiment;
use stripes_core::diagnostics::{excess, nonlocal_curvature, BoundaryProbe};
use stripes_core::geometry1d::{
    interface_charge, profile_energy, tilde_profile_energy, window_charge, ChargeMode, EnergyRoute, LineKernel,
    PeriodicProfile, WindowProfile,
};
use stripes_core::kernel::{critical_constant, surface_constant};
use stripes_core::lattice::LatticeOptions;
use stripes_core::num::{integrate, integrate_to_infinity};
use stripes_core::optimizer::{compare_candidates, CandidateSpec, Functional, LatticeKind};
use stripes_core::slicing::{f0bar, F0Route, Shape, SliceQuadrature, Window};
use stripes_core::KernelSpec;

type Verdict = Result<String, String>;

struct Workspace {
    root: tempfile::TempDir,
}

impl Workspace {
    fn config(name: &str) -> ExperimentConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }

    fn run(&self, cfg: &ExperimentConfig, kind: Kind, name: &str) -> Result<PathBuf, String> {
        let out = self.dir(name);
        run_experiment(cfg, kind, &out, None).map_err(|e| format!("{}: {e}", kind.as_str()))?;
        Ok(out)
    }
}

/// Rows of a report table keyed by column name.
fn rows(dir: &Path, table: &str) -> Vec<HashMap<String, String>> {
    let text = fs::read_to_string(dir.join(format!("{table}.tsv"))).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split('\t').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split('\t').map(String::from)).collect()).collect()
}

fn val(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or(f64::NAN)
}

/// `quantity → value` of a summary table.
fn summary(dir: &Path, table: &str) -> HashMap<String, String> {
    rows(dir, table).into_iter().map(|r| (r["quantity"].clone(), r["value"].clone())).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_profile(rng: &mut ChaCha8Rng, m: usize, period: f64, min_gap: f64) -> PeriodicProfile {
    let free = period - m as f64 * min_gap;
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut x = rng.gen::<f64>() * min_gap;
    let mut b = Vec::with_capacity(m);
    for wi in &w {
        b.push(x);
        x += min_gap + wi / total * free;
    }
    PeriodicProfile::new(period, b, rng.gen()).unwrap()
}

/// `∫_{S^{d-1}} |θ₁| dθ` by quadrature in polar angle.
fn angular(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => integrate(|t: f64| t.cos().abs(), 0.0, 2.0 * PI, 1e-15, 1e-14).value,
        3 => integrate(|t: f64| 2.0 * PI * t.cos().abs() * t.sin(), 0.0, PI, 1e-15, 1e-14).value,
        _ => unreachable!(),
    }
}

/// `C_{1,d} ∫_0^∞ ρ^d max(1, ρ)^{-p} dρ`, the perimeter coefficient at which
/// the unregularized nonlocal term balances the perimeter.
fn critical_by_quadrature(p: f64, d: usize) -> f64 {
    let inner = integrate(|r: f64| r.powi(d as i32), 0.0, 1.0, 1e-15, 1e-14).value;
    let outer = integrate_to_infinity(|r: f64| r.powf(d as f64 - p), 1.0, 1e-15, 1e-14).value;
    angular(d) * (inner + outer)
}

fn constants() -> Verdict {
    let mut worst: f64 = 0.0;
    for (p, d, exact) in [(4.0, 1, 2.0), (5.0, 2, 10.0 / 3.0)] {
        let closed = critical_constant(p, d).map_err(|e| e.to_string())?;
        if rel(closed, exact) > 1e-14 {
            return Err(format!("J_c({p},{d}) = {closed}, expected {exact}"));
        }
        let q = critical_by_quadrature(p, d);
        worst = worst.max(rel(closed, q));
    }
    let mut worst_c: f64 = 0.0;
    for (d, exact) in [(2, 4.0), (3, 2.0 * PI)] {
        worst_c = worst_c.max(rel(surface_constant(d), exact)).max(rel(angular(d), exact));
    }
    check(worst < 1e-8 && worst_c < 1e-10, format!("J_c rel {worst:.1e}, C_1,d rel {worst_c:.1e}"))
}

fn charges() -> Verdict {
    let mut worst: f64 = 0.0;
    let isolated = WindowProfile::on_line(vec![0.0], false);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (p, d) in [(4.0, 1), (5.0, 2), (6.0, 2), (6.5, 3)] {
        let r0 = -2.0 / (p - d as f64 - 1.0);
        let zero = KernelSpec::new(p, d, 0.0).unwrap();
        worst = worst.max((window_charge(&isolated, 0, &LineKernel::new(&zero, ChargeMode::Zero)) - r0).abs());
        for tau in [0.9, 0.5, 0.1, 1e-3] {
            let spec = KernelSpec::new(p, d, tau).unwrap();
            worst = worst.max((window_charge(&isolated, 0, &LineKernel::new(&spec, ChargeMode::Tau)) - r0).abs());
            for _ in 0..5 {
                let m = 2 * rng.gen_range(1..4);
                let prof = random_profile(&mut rng, m, 3.0 * m as f64, 1.0 + 1e-9);
                for idx in 0..prof.len() {
                    let a = interface_charge(&prof, idx, &spec, ChargeMode::Tau).unwrap();
                    let b = interface_charge(&prof, idx, &zero, ChargeMode::Zero).unwrap();
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let r = -2.0 / (4.0 - 1.0 - 1.0);
    check(worst < 1e-10 && r == -1.0, format!("max |r - r_0| = {worst:.1e}"))
}

fn routes(ws: &Workspace) -> Verdict {
    let spec = KernelSpec::new(5.0, 2, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = 2 * rng.gen_range(1..5);
        let period = rng.gen_range(2.0..8.0);
        let prof = random_profile(&mut rng, m, period, 0.02);
        let a = profile_energy(&prof, &spec, EnergyRoute::Direct);
        let b = profile_energy(&prof, &spec, EnergyRoute::Charges);
        worst = worst.max(rel(a, b));
    }

    let cfg = Workspace::config("slice-check");
    let q = &cfg.quadrature;
    let samples = q.directions * q.offsets * q.replicates;
    let out = ws.run(&cfg, Kind::SliceCheck, "slice")?;
    let z: Vec<f64> = rows(&out, "slice_check")
        .iter()
        .filter(|r| r["operation"] == "energy_by_slicing")
        .map(|r| val(r, "z_score"))
        .collect();
    let z_max = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let out = ws.run(&Workspace::config("lattice-check"), Kind::LatticeCheck, "lattice")?;
    let ratios: Vec<f64> = rows(&out, "lattice_check").iter().skip(1).map(|r| val(r, "error_ratio")).collect();
    let ok = worst < 1e-8 && samples >= 10_000 && z.len() == 3 && z_max <= 3.0 && ratios.len() == 2 && ratios.iter().all(|&r| r >= 1.5);
    check(ok, format!("direct/charges rel {worst:.1e}; slicing |z| <= {z_max:.2} at {samples} lines; lattice ratios {ratios:.2?}"))
}

fn positivity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_profile = f64::INFINITY;
    for (p, d) in [(5.0, 2), (4.0, 1), (6.0, 2)] {
        let jc = critical_constant(p, d).unwrap();
        for _ in 0..34 {
            let m = 2 * rng.gen_range(1..6);
            let period = rng.gen_range(0.5..10.0);
            let prof = random_profile(&mut rng, m, period, 0.01);
            let e = tilde_profile_energy(&prof, p, d, jc).map_err(|e| e.to_string())?;
            if e < -1e-9 {
                return Err(format!("profile energy {e} at p = {p}, d = {d}"));
            }
            min_profile = min_profile.min(e);
        }
        let empty = tilde_profile_energy(&PeriodicProfile::empty(3.0), p, d, jc).unwrap();
        if empty != 0.0 {
            return Err(format!("empty profile has energy {empty}"));
        }
    }

    let (l, n) = (4.0, 64);
    let spec = KernelSpec::new(5.0, 2, 0.1).unwrap();
    let jc = critical_constant(5.0, 2).unwrap();
    let specs = vec![
        CandidateSpec::Stripes { normal: vec![1, 0], half_period: 1.0, phase: 0.0 },
        CandidateSpec::Stripes { normal: vec![1, 1], half_period: 2f64.sqrt() / 2.0, phase: 0.1 },
        CandidateSpec::DropletLattice { lattice: LatticeKind::Simple, radius: 0.6, spacing: Some(2.0) },
        CandidateSpec::Checkerboard { cell: 1.0 },
        CandidateSpec::Random { fraction: 0.4, seed: 4 },
        CandidateSpec::Random { fraction: 0.0, seed: 0 },
        CandidateSpec::Random { fraction: 1.0, seed: 0 },
    ];
    let rows = compare_candidates(&specs, &spec, Functional::Tilde { j: jc }, n, l, &LatticeOptions::default())
        .map_err(|e| e.to_string())?;
    let mut min_voxel = f64::INFINITY;
    for r in &rows {
        let trivial = r.volume_fraction == 0.0 || r.volume_fraction == 1.0;
        if r.report.energy < -1e-9 || (r.report.energy == 0.0) != trivial {
            return Err(format!("{}: energy {} (volume fraction {})", r.label, r.report.energy, r.volume_fraction));
        }
        if !trivial {
            min_voxel = min_voxel.min(r.report.energy);
        }
    }
    check(
        min_profile > 0.0 && min_voxel > 0.0,
        format!("min over 102 profiles {min_profile:.3e}, over 5 voxel candidates {min_voxel:.3e}; trivial fields exactly 0"),
    )
}

fn stripe_scan(ws: &Workspace) -> Verdict {
    let cfg = Workspace::config("stripe-scan");
    let out = ws.run(&cfg, Kind::StripeScan, "stripe-scan")?;
    let s = summary(&out, "stripe_summary");
    let cutoff = KernelSpec::new(cfg.kernel.p, cfg.kernel.d, cfg.kernel.tau).unwrap().cutoff();
    let h_min: f64 = s["fit_h_min"].parse().unwrap();
    let h_max: f64 = s["fit_h_max"].parse().unwrap();
    let residual: f64 = s["fit_residual"].parse().unwrap();
    let ok = s["unimodal"] == "true"
        && s["beats_neighbors"] == "true"
        && s["trivial"] == "false"
        && residual < 1e-4
        && rel(h_min, 20.0 * cutoff) < 1e-12
        && h_max == 16.0;
    let h: f64 = s["h_star"].parse().unwrap();
    check(ok, format!("h*_L = {h}, unimodal {}, fit residual {residual:.1e} on [{h_min:.4}, {h_max}]", s["unimodal"]))
}

fn symmetry_breaking(ws: &Workspace) -> Verdict {
    let base = Workspace::config("anneal");
    let mut increased = 0;
    let mut detail = Vec::new();
    for seed in 1..=10u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.anneal = Some(AnnealSection { chains: 1, save_fields: false, ..base.anneal.clone().unwrap_or_default() });
        let out = ws.run(&cfg, Kind::Anneal, &format!("anneal-{seed}"))?;
        let r = &rows(&out, "anneal_summary")[0];
        if r["stripedness_increased"] == "true" {
            increased += 1;
        }
        detail.push(format!("{:.2}->{:.2}", val(r, "initial_stripedness"), val(r, "best_stripedness")));
    }

    let out = ws.run(&Workspace::config("compare"), Kind::Compare, "compare")?;
    let ranked = rows(&out, "compare");
    let first = &ranked[0];
    let stripes_first = first["label"].starts_with("stripes") && first["tied"] == "false";
    let others_above = ranked[1..].iter().all(|r| val(r, "energy") > val(first, "energy"));
    let runner = ranked.get(1).map(|r| format!("{} +{:.4}", r["label"], val(r, "gap_to_first"))).unwrap_or_default();
    check(
        increased >= 9 && stripes_first && others_above,
        format!(
            "stripedness up in {increased}/10 [{}]; rank 1 {} at {:.5}, next {runner}",
            detail.join(" "),
            first["label"],
            val(first, "energy")
        ),
    )
}

fn rigidity(ws: &Workspace) -> Verdict {
    let half = Shape::half_space(vec![0.6, -0.8], 0.2).map_err(|e| e.to_string())?;
    let stripes = Shape::stripes(vec![0.0, 1.0], 1.0, 0.25).map_err(|e| e.to_string())?;
    let mut flat = Vec::new();
    for (shape, point) in [(&half, vec![0.12, -0.16]), (&stripes, vec![0.3, 0.25])] {
        let probe = BoundaryProbe::on_shape(shape, point, 0.5).map_err(|e| e.to_string())?;
        for mesh in [0.05, 0.01] {
            flat.push(nonlocal_curvature(&probe, 5.0, mesh).map_err(|e| e.to_string())?);
        }
    }
    let flat_zero = flat.iter().all(|&v| v == 0.0);

    let out = ws.run(&Workspace::config("curvature"), Kind::Curvature, "curvature")?;
    let s = summary(&out, "curvature_summary");
    let steps = rows(&out, "curvature_refinement").len();
    let r2: f64 = s["log_r_squared"].parse().unwrap();
    let circle_log = s["verdict"] == "divergent-log" && r2 > 0.99 && steps == 5;

    let q = SliceQuadrature::new(32, 8, 4, 0);
    let square = Shape::AxisBox { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
    let win = Window::new(vec![-0.5, -0.5], vec![1.5, 1.5]).unwrap();
    let sq = f0bar(&square, &win, 5.0, &q, F0Route::Directions).map_err(|e| e.to_string())?;
    let cell = Window::cell(4.0, 2);
    let q1 = SliceQuadrature::new(64, 8, 10, 7);
    let q2 = SliceQuadrature::new(64, 16, 10, 8);
    let a = f0bar(&stripes, &cell, 5.0, &q1, F0Route::Directions).map_err(|e| e.to_string())?;
    let b = f0bar(&stripes, &cell, 5.0, &q2, F0Route::Directions).map_err(|e| e.to_string())?;
    let se = a.stderr.hypot(b.stderr);
    let stable = !a.is_divergent() && !b.is_divergent() && (a.estimate - b.estimate).abs() <= 3.0 * se;
    check(
        flat_zero && circle_log && sq.is_divergent() && stable,
        format!(
            "flat curvature {flat:?}; circle {} R^2 {r2:.5}; square divergent {}; stripes {:.4} vs {:.4} (3 se {:.4})",
            s["verdict"],
            sq.is_divergent(),
            a.estimate,
            b.estimate,
            3.0 * se
        ),
    )
}

fn excess_behavior(ws: &Workspace) -> Verdict {
    let half = Shape::half_space(vec![0.28, 0.96], -0.3).map_err(|e| e.to_string())?;
    let mut values = Vec::new();
    for r in [2.0, 0.5, 0.01] {
        let probe = BoundaryProbe::on_shape(&half, vec![-0.084, -0.288], r).map_err(|e| e.to_string())?;
        values.push(excess(&probe).map_err(|e| e.to_string())?.value);
    }
    let cfg = Workspace::config("curvature");
    let dir = ws.dir("curvature");
    let dir = if dir.exists() { dir } else { ws.run(&cfg, Kind::Curvature, "curvature")? };
    let ratios: Vec<f64> = rows(&dir, "excess").iter().map(|r| val(r, "ratio_to_half_radius")).filter(|x| x.is_finite()).collect();
    check(
        values.iter().all(|&v| v == 0.0) && ratios.len() == 3 && ratios.iter().all(|r| (3.6..=4.4).contains(r)),
        format!("halfspace excess {values:?}; circle ratios {ratios:.4?}"),
    )
}

fn gamma_trace(ws: &Workspace) -> Verdict {
    let out = ws.run(&Workspace::config("gamma-check"), Kind::GammaCheck, "gamma")?;
    let charges = rows(&out, "gamma_charges");
    let monotone = charges.iter().all(|r| r["monotone"] == "true");
    let smallest = charges.iter().map(|r| val(r, "tau")).fold(f64::INFINITY, f64::min);
    let last: Vec<f64> = charges.iter().filter(|r| val(r, "tau") == smallest).map(|r| val(r, "gap")).collect();
    let worst = last.iter().fold(0.0f64, |m, &x| m.max(x));
    let first: f64 = charges.iter().map(|r| val(r, "gap")).fold(0.0, f64::max);
    check(
        monotone && !last.is_empty() && worst < 1e-6 && first > 0.0,
        format!("{} interfaces, largest gap {first:.3e}, at tau = {smallest:.0e} {worst:.1e}", last.len()),
    )
}

fn tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism(ws: &Workspace) -> Verdict {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/slice-check.toml");
    let run = |name: &str, threads: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let out = ws.dir(name);
        let status = Command::new(env!("CARGO_BIN_EXE_stripes"))
            .arg("slice-check")
            .arg("--config")
            .arg(&config)
            .args(["--seed", "17", "--threads", threads, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        Ok(tables(&out))
    };
    let a = run("det-a", "1")?;
    let b = run("det-b", "1")?;
    let c = run("det-c", "2")?;
    let bytes: usize = a.iter().map(|(_, t)| t.len()).sum();
    check(!a.is_empty() && a == b && a == c, format!("{} tables, {bytes} bytes; runs x2 and threads 1/2 identical {}", a.len(), a == b && a == c))
}

fn main() -> ExitCode {
    let ws = Workspace { root: tempfile::tempdir().unwrap() };
    type Criterion<'a> = (&'a str, Duration, Box<dyn Fn() -> Verdict + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("constants", Duration::from_secs(1), Box::new(constants)),
        ("isolated-interface charge", Duration::from_secs(1), Box::new(charges)),
        ("route equivalence", Duration::from_secs(120), Box::new(|| routes(&ws))),
        ("positivity at criticality", Duration::from_secs(60), Box::new(positivity)),
        ("stripe optimality scan", Duration::from_secs(30), Box::new(|| stripe_scan(&ws))),
        ("symmetry breaking", Duration::from_secs(1200), Box::new(|| symmetry_breaking(&ws))),
        ("rigidity mechanism", Duration::from_secs(300), Box::new(|| rigidity(&ws))),
        ("excess behavior", Duration::from_secs(60), Box::new(|| excess_behavior(&ws))),
        ("gamma-convergence trace", Duration::from_secs(10), Box::new(|| gamma_trace(&ws))),
        ("determinism", Duration::from_secs(600), Box::new(|| determinism(&ws))),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = f();
        let t = start.elapsed();
        let (pass, detail) = match verdict {
            Ok(d) if t <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {} s budget", budget.as_secs())),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {detail} ({:.2} s)", i + 1, if pass { "PASS" } else { "FAIL" }, t.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
