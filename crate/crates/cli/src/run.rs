//! Experiment execution and report emission.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stripes_core::diagnostics::{excess, refine_curvature, BoundaryProbe};
use stripes_core::geometry1d::{
    fit_stripe_model, interface_charge, optimal_half_period, profile_energy, profile_energy_mode, window_charge,
    ChargeMode, EnergyRoute, LineKernel, OptimalPeriod, PeriodicProfile, WindowProfile,
};
use stripes_core::kernel::{critical_constant, surface_constant};
use stripes_core::lattice::{lattice_energy_with, rasterize, stripedness};
use stripes_core::num::{integrate, integrate_to_infinity};
use stripes_core::optimizer::{
    anneal_chains, compare_candidates, make_candidate, CandidateSpec, Functional, LatticeKind,
};
use stripes_core::slicing::{energy_by_slicing, perimeter_crofton, Shape, SliceQuadrature, Window};
use stripes_core::{Error, KernelSpec, Result};

use crate::config::{ExperimentConfig, FunctionalChoice, Kind};
use crate::table::{num, opt, Table};

/// Random streams split off the master seed.
const QUADRATURE_STREAM: u64 = 1;
const INITIAL_FIELD_STREAM: u64 = 2;
const ANNEAL_STREAM: u64 = 3;

/// A `u64` seed for `stream`, fully determined by `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Tables and auxiliary files produced by one experiment.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// Serialized fields and shapes, relative to the output directory.
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: Kind,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub flagged_rows: usize,
    pub outputs: Vec<String>,
    pub config: ExperimentConfig,
}

/// Validates `cfg`, runs the experiment inside a pool of `threads` workers
/// (all cores when `None`) and writes the tables, auxiliary files and
/// `manifest.json` into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, kind: Kind, out: &Path, threads: Option<usize>) -> Result<Manifest> {
    let start = Instant::now();
    let spec = cfg.validate(kind)?;
    if threads == Some(0) {
        return Err(Error::config("--threads must be at least 1"));
    }
    fs::create_dir_all(out)
        .map_err(|e| Error::config(format!("cannot create output directory {}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let (outcome, workers) = pool.install(|| execute(cfg, kind, &spec, out).map(|o| (o, rayon::current_num_threads())))?;

    let mut outputs = Vec::new();
    for t in &outcome.tables {
        let name = format!("{}.tsv", t.name);
        fs::write(out.join(&name), t.to_tsv())?;
        outputs.push(name);
    }
    outputs.extend(outcome.files.iter().map(|p| p.display().to_string()));
    let manifest = Manifest {
        tool: "stripes",
        version: env!("CARGO_PKG_VERSION"),
        kind,
        seed: cfg.seed,
        threads: workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        flagged_rows: outcome.tables.iter().map(Table::flagged).sum(),
        outputs,
        config: cfg.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

/// Runs the experiment and returns its tables; fields are written to `out`.
pub fn execute(cfg: &ExperimentConfig, kind: Kind, spec: &KernelSpec, out: &Path) -> Result<Outcome> {
    match kind {
        Kind::Constants => Ok(Outcome { tables: vec![constants(spec)], files: Vec::new() }),
        Kind::StripeScan => Ok(Outcome { tables: stripe_scan(cfg, spec), files: Vec::new() }),
        Kind::SliceCheck => Ok(Outcome { tables: vec![slice_check(cfg, spec)?], files: Vec::new() }),
        Kind::LatticeCheck => Ok(Outcome { tables: vec![lattice_check(cfg, spec)?], files: Vec::new() }),
        Kind::Compare => compare(cfg, spec, out),
        Kind::Anneal => anneal(cfg, spec, out),
        Kind::Curvature => Ok(Outcome { tables: curvature(cfg, spec)?, files: Vec::new() }),
        Kind::GammaCheck => Ok(Outcome { tables: gamma_check(cfg, spec)?, files: Vec::new() }),
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn quad_rel(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-300, 1e-14).value
}

/// `∫_{S^{d-1}} |θ₁| dθ` by quadrature over the polar angle.
fn angular_quadrature(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 4.0 * quad_rel(f64::cos, 0.0, FRAC_PI_2),
        _ => 2.0 * std::f64::consts::PI * 2.0 * quad_rel(|t| t.cos() * t.sin(), 0.0, FRAC_PI_2),
    }
}

/// `∫_0^b r^d K(r) dr` for `K = max(c, r)^{-p}`, split at `c` and at 1.
fn radial_quadrature(p: f64, d: usize, c: f64, upper: f64) -> f64 {
    let k = |r: f64| r.powi(d as i32) * r.max(c).powf(-p);
    let a = c.min(upper);
    let mut total = if a > 0.0 { quad_rel(k, 0.0, a) } else { 0.0 };
    let b = if upper.is_finite() { upper } else { c.max(1.0) };
    if b > a {
        total += quad_rel(k, a, b);
    }
    if upper.is_infinite() {
        total += integrate_to_infinity(k, b, 1e-300, 1e-14).value;
    }
    total
}

/// Closed-form constants against independent quadratures.
fn constants(spec: &KernelSpec) -> Table {
    let (p, d) = (spec.p(), spec.d());
    let mut t = Table::new("constants", &["closed_form", "independent", "method", "relative_difference", "flagged"]);
    let row = |t: &mut Table, (module, op, anchor): (&str, &str, &str), closed: f64, indep: f64, method: &str, tol: f64| {
        let r = rel_diff(closed, indep);
        t.push(module, op, anchor, vec![num(closed), num(indep), method.into(), num(r), (r > tol).to_string()]);
    };
    let c1 = angular_quadrature(d);
    row(&mut t, ("kernel", "surface_constant", "C_1,d"), surface_constant(d), c1, "angular-quadrature", 1e-10);
    let jc = critical_constant(p, d).expect("validated exponent");
    let q = c1 * radial_quadrature(p, d, 1.0, f64::INFINITY);
    row(&mut t, ("kernel", "critical_constant", "J_c"), jc, q, "radial-quadrature", 1e-8);
    if let Some(j) = spec.j_tau().finite() {
        let q = c1 * radial_quadrature(p, d, spec.cutoff(), 1.0);
        row(&mut t, ("kernel", "j_tau", "J_tau"), j, q, "radial-quadrature", 1e-8);
    }
    // An interface with no neighbours carries −2/(p−d−1), for τ = 0 and
    // for every cutoff below 1.
    let r0 = -2.0 / spec.gap_exponent();
    let isolated = WindowProfile::on_line(vec![0.0], false);
    let zero = window_charge(&isolated, 0, &LineKernel::new(spec, ChargeMode::Zero));
    row(&mut t, ("geometry1d", "interface_charge", "r_0(isolated)"), r0, zero, "line-charge", 1e-10);
    if spec.tau() > 0.0 && spec.cutoff() <= 1.0 {
        let tau = window_charge(&isolated, 0, &LineKernel::new(spec, ChargeMode::Tau));
        row(&mut t, ("geometry1d", "interface_charge", "r_tau(isolated)"), r0, tau, "line-charge", 1e-10);
    }
    t
}

/// Log-spaced grid of `n ≥ 2` points on `[a, b]`.
fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

fn best_half_period(cfg: &ExperimentConfig, spec: &KernelSpec) -> (OptimalPeriod, f64) {
    let l = cfg.cell.length;
    let opt = optimal_half_period(l, spec);
    // The empty set wins: fall back to the widest admissible stripes.
    let h = if opt.trivial { l / 2.0 } else { opt.h };
    (opt, h)
}

fn stripe_scan(cfg: &ExperimentConfig, spec: &KernelSpec) -> Vec<Table> {
    let s = cfg.stripe_scan.clone().unwrap_or_default();
    let opt = optimal_half_period(cfg.cell.length, spec);
    let anchor = "F_tau(stripes,h)";

    let mut scan = Table::new("stripe_scan", &["k", "half_period", "energy", "best"]);
    let mut rows: Vec<(usize, f64, f64)> = opt.scan.clone();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    for &(k, h, e) in &rows {
        scan.push("geometry1d", "stripe_energy", anchor, vec![k.to_string(), num(h), num(e), (k == opt.k).to_string()]);
    }
    // Energies along increasing h: strictly down, then strictly up.
    let argmin = (0..rows.len()).min_by(|&i, &j| rows[i].2.total_cmp(&rows[j].2)).unwrap_or(0);
    let unimodal = rows[..=argmin].windows(2).all(|w| w[0].2 > w[1].2) && rows[argmin..].windows(2).all(|w| w[0].2 < w[1].2);
    let beats_neighbors = !opt.trivial
        && (argmin == 0 || rows[argmin - 1].2 > rows[argmin].2)
        && (argmin + 1 == rows.len() || rows[argmin + 1].2 > rows[argmin].2);

    let h_min = s.h_min.unwrap_or(if spec.cutoff() > 0.0 { 20.0 * spec.cutoff() } else { 0.2 });
    let h_max = s.h_max.unwrap_or(16.0).max(h_min * 1.01);
    let hs = log_grid(h_min, h_max, s.points);
    let model = fit_stripe_model(&hs, spec);
    let mut fit = Table::new("stripe_fit", &["half_period", "energy", "model", "relative_residual"]);
    for &h in &hs {
        let e = stripes_core::geometry1d::stripe_energy(h, spec);
        let m = model.eval(h);
        fit.push("geometry1d", "fit_stripe_model", "a/h+b*h^-(p-d)", vec![num(h), num(e), num(m), num(rel_diff(e, m))]);
    }

    let mut summary = Table::new("stripe_summary", &["quantity", "value", "flagged"]);
    let mut put = |op: &str, anchor: &str, q: &str, v: String, flagged: bool| {
        summary.push("geometry1d", op, anchor, vec![q.into(), v, flagged.to_string()]);
    };
    put("optimal_half_period", "h*_L", "h_star", num(opt.h), false);
    put("optimal_half_period", "h*_L", "k_star", opt.k.to_string(), false);
    put("optimal_half_period", "h*_L", "energy_star", num(opt.energy), false);
    put("optimal_half_period", "h*_L", "trivial", opt.trivial.to_string(), false);
    put("optimal_half_period", "h*_L", "beats_neighbors", beats_neighbors.to_string(), !opt.trivial && !beats_neighbors);
    put("optimal_half_period", "h*_L", "unimodal", unimodal.to_string(), !unimodal);
    put("optimal_half_period", "h*_L", "increasing_beyond", opt.increasing_beyond.to_string(), !opt.increasing_beyond);
    put("optimal_half_period", "h*", "unconstrained_h", num(opt.unconstrained_h), false);
    put("optimal_half_period", "h*", "unconstrained_energy", num(opt.unconstrained_energy), false);
    put("fit_stripe_model", "a/h+b*h^-(p-d)", "fit_a", num(model.a), false);
    put("fit_stripe_model", "a/h+b*h^-(p-d)", "fit_b", num(model.b), false);
    put("fit_stripe_model", "a/h+b*h^-(p-d)", "fit_exponent", num(model.exponent), false);
    put("fit_stripe_model", "a/h+b*h^-(p-d)", "fit_h_min", num(h_min), false);
    put("fit_stripe_model", "a/h+b*h^-(p-d)", "fit_h_max", num(h_max), false);
    put("fit_stripe_model", "a/h+b*h^-(p-d)", "fit_residual", num(model.residual), model.residual >= 1e-4);
    vec![scan, fit, summary]
}

fn quadrature(cfg: &ExperimentConfig, stream: u64) -> SliceQuadrature {
    let q = &cfg.quadrature;
    SliceQuadrature {
        directions: q.directions,
        offsets: q.offsets,
        replicates: q.replicates,
        mode: q.mode,
        seed: derive_seed(cfg.seed, stream),
        tolerance: None,
        horizon: None,
    }
}

fn axis(d: usize) -> Vec<f64> {
    let mut n = vec![0.0; d];
    n[d - 1] = 1.0;
    n
}

fn slice_check(cfg: &ExperimentConfig, spec: &KernelSpec) -> Result<Table> {
    let s = cfg.slice_check.clone().unwrap_or_default();
    let (l, d) = (cfg.cell.length, spec.d());
    let hs = if s.half_periods.is_empty() { vec![best_half_period(cfg, spec).1] } else { s.half_periods.clone() };
    let window = Window::cell(l, d);
    let mut t = Table::new(
        "slice_check",
        &["half_period", "reference", "estimate", "stderr", "samples", "difference", "z_score", "flagged"],
    );
    for (i, &h) in hs.iter().enumerate() {
        let q = quadrature(cfg, QUADRATURE_STREAM + 16 * i as u64);
        let prof = PeriodicProfile::simple(h)?;
        let direct = profile_energy(&prof, spec, EnergyRoute::Direct);
        let charges = profile_energy(&prof, spec, EnergyRoute::Charges);
        let r = rel_diff(direct, charges);
        t.push(
            "geometry1d",
            "profile_energy",
            "F_tau(direct)=F_tau(charges)",
            vec![num(h), num(direct), num(charges), num(0.0), "0".into(), num(charges - direct), "-".into(), (r > 1e-8).to_string()],
        );
        let shape = Shape::stripes(axis(d), h, s.phase * h)?;
        let rep = energy_by_slicing(&shape, &window, spec, &q)?;
        let z = (rep.energy - direct) / rep.stderr;
        t.push(
            "slicing",
            "energy_by_slicing",
            "F_tau=avg(r_tau)",
            vec![
                num(h),
                num(direct),
                num(rep.energy),
                num(rep.stderr),
                rep.samples.to_string(),
                num(rep.energy - direct),
                num(z),
                (rep.flagged || !(z.abs() <= 3.0)).to_string(),
            ],
        );
        let per = perimeter_crofton(&shape, &window, &q)?;
        let exact = l.powi(d as i32 - 1) * l / h;
        let z = (per.value - exact) / per.stderr;
        t.push(
            "slicing",
            "perimeter_crofton",
            "Per=C_1,d^-1*avg(#crossings)",
            vec![
                num(h),
                num(exact),
                num(per.value),
                num(per.stderr),
                per.samples.to_string(),
                num(per.value - exact),
                if per.stderr > 0.0 { num(z) } else { "-".into() },
                (per.stderr > 0.0 && !(z.abs() <= 3.0) || per.stderr == 0.0 && rel_diff(per.value, exact) > 1e-12)
                    .to_string(),
            ],
        );
    }
    Ok(t)
}

fn lattice_check(cfg: &ExperimentConfig, spec: &KernelSpec) -> Result<Table> {
    let s = cfg.lattice_check.clone().unwrap_or_default();
    let (l, d) = (cfg.cell.length, spec.d());
    let h = s.half_period.unwrap_or_else(|| best_half_period(cfg, spec).1);
    let exact = profile_energy(&PeriodicProfile::simple(h)?, spec, EnergyRoute::Direct);
    let shape = Shape::stripes(axis(d), h, 0.0)?;
    let mut t = Table::new(
        "lattice_check",
        &["grid", "half_period", "reference", "energy", "perimeter", "error", "error_ratio", "flagged"],
    );
    let mut prev: Option<f64> = None;
    for &n in &s.grids {
        let v = rasterize(&shape, d, n, l)?;
        let rep = lattice_energy_with(&v, spec, &cfg.lattice)?;
        let err = (rep.energy - exact).abs();
        let ratio = prev.map(|p| p / err);
        t.push(
            "lattice",
            "lattice_energy",
            "F_tau(grid)->F_tau(profile)",
            vec![
                n.to_string(),
                num(h),
                num(exact),
                num(rep.energy),
                opt(rep.perimeter),
                num(err),
                opt(ratio),
                (rep.flagged || ratio.is_some_and(|r| !(r >= 1.5))).to_string(),
            ],
        );
        prev = Some(err);
    }
    Ok(t)
}

/// Stripes at the best admissible spacing against droplet lattices of
/// spacing `L/2` and checkerboards of cells `L/8`, `L/4`, `L/2`.
pub fn default_competitors(l: f64, d: usize, h: f64) -> Vec<CandidateSpec> {
    let mut normal = vec![0; d];
    normal[0] = 1;
    let mut c = vec![CandidateSpec::Stripes { normal, half_period: h, phase: 0.0 }];
    let s = l / 2.0;
    for f in [0.2, 0.25, 0.3, 0.35, 0.4] {
        c.push(CandidateSpec::DropletLattice { lattice: LatticeKind::Simple, radius: f * s, spacing: Some(s) });
    }
    for f in [0.15, 0.2, 0.25] {
        c.push(CandidateSpec::DropletLattice { lattice: LatticeKind::Centered, radius: f * s, spacing: Some(s) });
    }
    for k in [8.0, 4.0, 2.0] {
        c.push(CandidateSpec::Checkerboard { cell: l / k });
    }
    c
}

fn compare(cfg: &ExperimentConfig, spec: &KernelSpec, out: &Path) -> Result<Outcome> {
    let (l, d, n) = (cfg.cell.length, spec.d(), cfg.grid()?);
    let section = cfg.compare.clone().unwrap_or_default();
    let specs =
        if cfg.candidates.is_empty() { default_competitors(l, d, best_half_period(cfg, spec).1) } else { cfg.candidates.clone() };
    let (functional, anchor) = match section.functional {
        FunctionalChoice::Standard => (Functional::Standard, "F_tau"),
        FunctionalChoice::Tilde => {
            (Functional::Tilde { j: section.j.unwrap_or(critical_constant(spec.p(), d)?) }, "tilde_F_J")
        }
    };
    let rows = compare_candidates(&specs, spec, functional, n, l, &cfg.lattice)?;
    let mut t = Table::new(
        "compare",
        &["rank", "label", "volume_fraction", "energy", "gap_to_first", "discretization", "perimeter", "tied", "flagged"],
    );
    let e0 = rows.first().map_or(0.0, |r| r.report.energy);
    for (i, r) in rows.iter().enumerate() {
        t.push(
            "optimizer",
            "compare_candidates",
            anchor,
            vec![
                (i + 1).to_string(),
                r.label.clone(),
                num(r.volume_fraction),
                num(r.report.energy),
                num(r.report.energy - e0),
                opt(r.report.discretization),
                opt(r.report.perimeter),
                r.tied.to_string(),
                r.report.flagged.to_string(),
            ],
        );
    }
    let file = PathBuf::from("candidates.json");
    let text = serde_json::to_string_pretty(&specs).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out.join(&file), text + "\n")?;
    Ok(Outcome { tables: vec![t], files: vec![file] })
}

fn anneal(cfg: &ExperimentConfig, spec: &KernelSpec, out: &Path) -> Result<Outcome> {
    let (l, d, n) = (cfg.cell.length, spec.d(), cfg.grid()?);
    let a = cfg.anneal.clone().unwrap_or_default();
    let initial = a
        .initial
        .clone()
        .unwrap_or(CandidateSpec::Random { fraction: 0.5, seed: derive_seed(cfg.seed, INITIAL_FIELD_STREAM) });
    let init = make_candidate(&initial, d, n, l)?;
    let sched = stripes_core::optimizer::AnnealSchedule { seed: derive_seed(cfg.seed, ANNEAL_STREAM), ..a.schedule };
    let mut chains = anneal_chains(&init, spec, &sched, a.chains)?;
    chains.sort_by_key(|c| c.chain);

    let mut trace = Table::new(
        "anneal_trace",
        &["chain", "sweep", "temperature", "energy", "best_energy", "stripedness", "acceptance"],
    );
    let mut summary = Table::new(
        "anneal_summary",
        &[
            "chain",
            "initial_energy",
            "best_energy",
            "final_energy",
            "initial_temperature",
            "initial_stripedness",
            "best_stripedness",
            "stripedness_increased",
            "proposed",
            "accepted",
        ],
    );
    let mut files = Vec::new();
    if a.save_fields {
        fs::create_dir_all(out.join("fields"))?;
        let path = PathBuf::from("fields/initial.bin");
        init.save(&out.join(&path), &initial.label())?;
        files.push(path);
    }
    for c in &chains {
        for r in &c.trace {
            trace.push(
                "optimizer",
                "anneal",
                "F_tau(voxels)",
                vec![
                    c.chain.to_string(),
                    r.sweep.to_string(),
                    num(r.temperature),
                    num(r.energy),
                    num(r.best_energy),
                    num(r.stripedness),
                    num(r.acceptance),
                ],
            );
        }
        let s0 = c.trace.first().map_or(f64::NAN, |r| r.stripedness);
        let s1 = stripedness(&c.best, sched.stripe_directions).score;
        summary.push(
            "optimizer",
            "anneal",
            "best found",
            vec![
                c.chain.to_string(),
                num(c.initial_energy),
                num(c.best_energy),
                num(c.final_energy),
                num(c.initial_temperature),
                num(s0),
                num(s1),
                (s1 > s0).to_string(),
                c.proposed.to_string(),
                c.accepted.to_string(),
            ],
        );
        if a.save_fields {
            let path = PathBuf::from(format!("fields/chain{}_best.bin", c.chain));
            c.best.save(&out.join(&path), &format!("best found, chain {}", c.chain))?;
            files.push(path);
        }
    }
    Ok(Outcome { tables: vec![trace, summary], files })
}

fn curvature(cfg: &ExperimentConfig, spec: &KernelSpec) -> Result<Vec<Table>> {
    let c = cfg.curvature.clone().ok_or_else(|| Error::config("missing [curvature] section"))?;
    let p = c.p.unwrap_or(spec.p());
    let probe = BoundaryProbe::on_shape(&c.shape, c.point.clone(), c.radius)?;
    let trace = refine_curvature(&probe, p, c.mesh, c.halvings)?;
    let divergent = trace.verdict.is_divergent();

    let mut refine = Table::new("curvature_refinement", &["mesh", "value", "elements", "flagged"]);
    for s in &trace.steps {
        refine.push(
            "diagnostics",
            "nonlocal_curvature",
            "int int |nu(x)-nu(y)|^2/|x-y|^(p-2)",
            vec![num(s.mesh), num(s.value), s.elements.to_string(), divergent.to_string()],
        );
    }
    let mut summary = Table::new("curvature_summary", &["quantity", "value", "flagged"]);
    let mut put = |q: &str, v: String, flagged: bool| {
        summary.push("diagnostics", "refine_curvature", "int int |nu(x)-nu(y)|^2/|x-y|^(p-2)", vec![q.into(), v, flagged.to_string()]);
    };
    put("p", num(p), false);
    put("probe_x", num(probe.point[0]), false);
    put("probe_y", num(probe.point[1]), false);
    put("verdict", trace.verdict.label().into(), divergent);
    put("log_slope", num(trace.log_fit.slope), false);
    put("log_r_squared", num(trace.log_fit.r_squared), false);
    put("power_exponent", num(trace.power_fit.exponent), false);
    put("power_r_squared", num(trace.power_fit.r_squared), false);

    let radii: Vec<f64> =
        if c.excess_radii.is_empty() { (0..4).map(|k| c.radius / (1u64 << k) as f64).collect() } else { c.excess_radii.clone() };
    let mut exc = Table::new("excess", &["radius", "excess", "perimeter", "flux_norm", "ratio_to_half_radius", "no_boundary"]);
    let values: Vec<(f64, stripes_core::diagnostics::Excess)> = radii
        .iter()
        .map(|&r| {
            let b = BoundaryProbe::with_normal(&c.shape, probe.point.clone(), probe.normal.clone(), r)?;
            Ok((r, excess(&b)?))
        })
        .collect::<Result<_>>()?;
    for (r, e) in &values {
        let half = values.iter().find(|(s, _)| (s - r / 2.0).abs() <= 1e-12 * r).map(|(_, h)| e.value / h.value);
        exc.push(
            "diagnostics",
            "excess",
            "r^-(d-1)(Per(B_r)-|int nu|)",
            vec![num(*r), num(e.value), num(e.perimeter), num(e.flux_norm), opt(half), e.no_boundary.to_string()],
        );
    }
    Ok(vec![refine, summary, exc])
}

fn gamma_check(cfg: &ExperimentConfig, spec: &KernelSpec) -> Result<Vec<Table>> {
    let g = cfg.gamma_check.clone().ok_or_else(|| Error::config("missing [gamma_check] section"))?;
    let prof = PeriodicProfile::new(g.period, g.boundary.clone(), g.phase)?;
    let zero = spec.with_tau(0.0)?;
    let mut charges = Table::new("gamma_charges", &["interface", "tau", "r_tau", "r_0", "gap", "monotone", "flagged"]);
    for idx in 0..prof.len() {
        let r0 = interface_charge(&prof, idx, &zero, ChargeMode::Zero)?;
        let mut last = f64::INFINITY;
        for &tau in &g.taus {
            let rt = interface_charge(&prof, idx, &spec.with_tau(tau)?, ChargeMode::Tau)?;
            let gap = (rt - r0).abs();
            let monotone = gap <= last;
            charges.push(
                "geometry1d",
                "interface_charge",
                "r_tau->r_0",
                vec![idx.to_string(), num(tau), num(rt), num(r0), num(gap), monotone.to_string(), (!monotone).to_string()],
            );
            last = gap;
        }
    }
    let mut energy = Table::new("gamma_energy", &["tau", "F_tau", "F_0", "gap", "monotone", "flagged"]);
    let f0 = profile_energy_mode(&prof, &zero, ChargeMode::Zero);
    let mut last = f64::INFINITY;
    for &tau in &g.taus {
        let ft = profile_energy(&prof, &spec.with_tau(tau)?, EnergyRoute::Charges);
        let gap = (ft - f0).abs();
        let monotone = gap <= last;
        energy.push(
            "geometry1d",
            "profile_energy",
            "F_tau->F_0",
            vec![num(tau), num(ft), num(f0), num(gap), monotone.to_string(), (!monotone).to_string()],
        );
        last = gap;
    }
    Ok(vec![charges, energy])
}
