mod common;

use std::f64::consts::PI;

use stripes_core::geometry1d::optimal_half_period;
use stripes_core::kernel::critical_constant;
use stripes_core::lattice::{lattice_energy_with, stripedness, EnergyState, LatticeModel, LatticeOptions, VoxelSet};
use stripes_core::optimizer::*;
use stripes_core::{Error, KernelSpec};

const L: f64 = 4.0;

fn spec(tau: f64) -> KernelSpec {
    KernelSpec::new(5.0, 2, tau).unwrap()
}

fn stripes(normal: &[i64], h: f64) -> CandidateSpec {
    CandidateSpec::Stripes { normal: normal.to_vec(), half_period: h, phase: 0.0 }
}

fn droplets(lattice: LatticeKind, radius: f64, spacing: f64) -> CandidateSpec {
    CandidateSpec::DropletLattice { lattice, radius, spacing: Some(spacing) }
}

fn voxel_options() -> LatticeOptions {
    LatticeOptions { model: LatticeModel::Voxel, ..LatticeOptions::default() }
}

/// Number of maximal runs of equal values along axis 0 of row 0, cyclically.
fn bands(v: &VoxelSet) -> usize {
    let n = v.n();
    (0..n).filter(|&x| v.get(v.index([x, 0, 0])) != v.get(v.index([(x + 1) % n, 0, 0]))).count()
}

#[test]
fn candidate_fields() {
    let v = make_candidate(&stripes(&[1, 0], L / 4.0), 2, 64, L).unwrap();
    assert_eq!(bands(&v), 4);
    assert_eq!(v.volume_fraction(), 0.5);

    let v = make_candidate(&CandidateSpec::Checkerboard { cell: L / 4.0 }, 2, 64, L).unwrap();
    assert_eq!(v.volume_fraction(), 0.5);
    let v = make_candidate(&CandidateSpec::Checkerboard { cell: L / 8.0 }, 3, 16, L).unwrap();
    assert_eq!(v.volume_fraction(), 0.5);

    let r = L / 8.0;
    let v = make_candidate(&CandidateSpec::DropletLattice { lattice: LatticeKind::Simple, radius: r, spacing: None }, 2, 256, L).unwrap();
    assert!((v.volume_fraction() / (PI / 16.0) - 1.0).abs() < 0.01, "{}", v.volume_fraction());

    // Two droplets per cell of side s in the centered lattice.
    let v = make_candidate(&droplets(LatticeKind::Centered, 0.5, 2.0), 3, 64, L).unwrap();
    let expected = 2.0 * 4.0 / 3.0 * PI * 0.125 / 8.0;
    assert!((v.volume_fraction() / expected - 1.0).abs() < 0.02, "{} {expected}", v.volume_fraction());
}

#[test]
fn slanted_stripes_tile_the_cell() {
    // Normal (1,2), one period per cell along the normal.
    let h = L / (2.0 * 5f64.sqrt());
    let v = make_candidate(&stripes(&[1, 2], h), 2, 64, L).unwrap();
    assert!((v.volume_fraction() - 0.5).abs() < 0.02);
    let s = stripedness(&v, 16);
    assert!(s.score > 0.95, "{s:?}");
    let expected = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()];
    let cos = (s.direction[0] * expected[0] + s.direction[1] * expected[1]).abs();
    assert!(cos > 0.999, "{s:?}");
}

#[test]
fn incompatible_candidates_are_rejected() {
    let msg = |c: CandidateSpec, d: usize| match make_candidate(&c, d, 32, L) {
        Err(Error::Config(m)) => m,
        other => panic!("expected a configuration error, got {other:?}"),
    };
    assert!(msg(stripes(&[1, 0], 0.3), 2).contains("half_period"));
    assert!(msg(stripes(&[1, 0, 0], 1.0), 2).contains("normal"));
    assert!(msg(stripes(&[0, 0], 1.0), 2).contains("nonzero"));
    assert!(msg(CandidateSpec::Checkerboard { cell: L / 3.0 }, 2).contains("even"));
    assert!(msg(CandidateSpec::Checkerboard { cell: 0.3 }, 2).contains("L / cell"));
    assert!(msg(droplets(LatticeKind::Simple, 0.5, 1.5), 2).contains("L / spacing"));
    assert!(msg(droplets(LatticeKind::Simple, 0.6, 1.0), 2).contains("diameter"));
    assert!(msg(droplets(LatticeKind::Centered, 0.4, 1.0), 2).contains("diameter"));
    assert!(msg(CandidateSpec::Random { fraction: 1.5, seed: 0 }, 2).contains("fraction"));
}

#[test]
fn random_candidates_are_seeded() {
    let c = |seed| CandidateSpec::Random { fraction: 0.3, seed };
    let a = make_candidate(&c(7), 2, 64, L).unwrap();
    assert_eq!(a, make_candidate(&c(7), 2, 64, L).unwrap());
    assert_ne!(a, make_candidate(&c(8), 2, 64, L).unwrap());
    // Binomial(4096, 0.3): standard deviation 0.0072.
    assert!((a.volume_fraction() - 0.3).abs() < 0.03);
}

#[test]
fn candidates_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = make_candidate(&CandidateSpec::Random { fraction: 0.5, seed: 3 }, 2, 32, L).unwrap();
    let path = dir.path().join("field.bin");
    v.save(&path, "test").unwrap();
    let c = CandidateSpec::FromFile { path };
    assert_eq!(make_candidate(&c, 2, 32, L).unwrap(), v);
    assert!(matches!(make_candidate(&c, 2, 64, L), Err(Error::Config(_))));
}

#[test]
fn candidate_specs_parse_from_tagged_text() {
    let text = r#"[
        {"kind": "stripes", "normal": [1, 0], "half_period": 1.0},
        {"kind": "droplet-lattice", "lattice": "centered", "radius": 0.4},
        {"kind": "checkerboard", "cell": 1.0},
        {"kind": "random", "fraction": 0.5, "seed": 9},
        {"kind": "from-file", "path": "a.bin"}
    ]"#;
    let specs: Vec<CandidateSpec> = serde_json::from_str(text).unwrap();
    assert_eq!(specs[0], stripes(&[1, 0], 1.0));
    assert_eq!(specs[1], CandidateSpec::DropletLattice { lattice: LatticeKind::Centered, radius: 0.4, spacing: None });
    let back: Vec<CandidateSpec> = serde_json::from_str(&serde_json::to_string(&specs).unwrap()).unwrap();
    assert_eq!(back, specs);
}

/// Stripes at the best admissible spacing against droplet lattices and
/// checkerboards of several sizes.
fn competitors(h: f64) -> Vec<CandidateSpec> {
    let mut c = vec![stripes(&[1, 0], h)];
    for r in [0.4, 0.5, 0.6, 0.7, 0.8] {
        c.push(droplets(LatticeKind::Simple, r, 2.0));
    }
    for r in [0.3, 0.4, 0.5] {
        c.push(droplets(LatticeKind::Centered, r, 2.0));
    }
    c.push(droplets(LatticeKind::Simple, 0.3, 1.0));
    for a in [0.5, 1.0, 2.0] {
        c.push(CandidateSpec::Checkerboard { cell: a });
    }
    c
}

#[test]
fn stripes_rank_below_droplets_and_checkerboards() {
    let k = spec(0.1);
    let best = optimal_half_period(L, &k);
    assert!(!best.trivial);
    let rows = compare_candidates(&competitors(best.h), &k, Functional::Standard, 128, L, &LatticeOptions::default()).unwrap();
    assert_eq!(rows[0].spec, stripes(&[1, 0], best.h), "{:#?}", rows.iter().map(|r| &r.label).collect::<Vec<_>>());
    let e0 = rows[0].report.energy;
    assert!((e0 - best.energy).abs() < 1e-5, "{e0} {}", best.energy);
    for r in &rows[1..] {
        let gap = r.report.energy - e0;
        let bound = r.report.discretization.unwrap() + rows[0].report.discretization.unwrap();
        println!("{:32} energy {:+.5} gap {:.5} bound {:.5}", r.label, r.report.energy, gap, bound);
        assert!(gap > bound, "{}: gap {gap} within bound {bound}", r.label);
    }
}

#[test]
fn candidate_table_is_sorted_with_ties_flagged() {
    let k = spec(0.1);
    let c = vec![stripes(&[0, 1], 1.0), CandidateSpec::Checkerboard { cell: 1.0 }, stripes(&[1, 0], 1.0)];
    let rows = compare_candidates(&c, &k, Functional::Standard, 64, L, &LatticeOptions::default()).unwrap();
    assert!(rows.windows(2).all(|w| w[0].report.energy <= w[1].report.energy));
    // Quarter-turned stripes tie exactly and are ordered by label.
    assert_eq!(rows[0].label, "stripes[0,1] h=1");
    assert_eq!(rows[1].label, "stripes[1,0] h=1");
    assert_eq!(rows[0].report.energy, rows[1].report.energy);
    assert!(rows[0].tied && rows[1].tied && !rows[2].tied);
    assert!(CandidateRow::tsv_header().split('\t').count() == rows[0].tsv_row().split('\t').count());
}

#[test]
fn rotated_stripes_agree_within_discretization() {
    // Normals (3,4) and (5,0) have equal length, so both tile the cell at h = L/10.
    let k = spec(0.1);
    let opts = LatticeOptions { near_radius: Some(0.125), ..LatticeOptions::default() };
    let rows = compare_candidates(&[stripes(&[3, 4], 0.4), stripes(&[5, 0], 0.4)], &k, Functional::Standard, 256, L, &opts).unwrap();
    let (a, b) = (&rows[0].report, &rows[1].report);
    let bound = a.discretization.unwrap() + b.discretization.unwrap();
    println!("{} {} bound {bound}", a.energy, b.energy);
    assert!((a.energy - b.energy).abs() <= bound);
    assert!((a.energy - b.energy).abs() < 0.01 * a.energy.abs());
}

#[test]
fn stripe_energy_is_unimodal_in_the_half_period() {
    let k = spec(0.1);
    let best = optimal_half_period(L, &k);
    let n = 256;
    let opts = LatticeOptions { near_radius: Some(4.0 * L / n as f64), ..LatticeOptions::default() };
    let c: Vec<CandidateSpec> = (1..=8).map(|m| stripes(&[1, 0], L / (2.0 * m as f64))).collect();
    let rows = compare_candidates(&c, &k, Functional::Standard, n, L, &opts).unwrap();
    let mut by_h: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| match r.spec {
            CandidateSpec::Stripes { half_period, .. } => (half_period, r.report.energy),
            _ => unreachable!(),
        })
        .collect();
    by_h.sort_by(|a, b| a.0.total_cmp(&b.0));
    let argmin = by_h.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap().0;
    assert_eq!(by_h[argmin].0, best.h);
    assert!(by_h[..=argmin].windows(2).all(|w| w[0].1 > w[1].1), "{by_h:?}");
    assert!(by_h[argmin..].windows(2).all(|w| w[0].1 < w[1].1), "{by_h:?}");
}

#[test]
fn critical_functional_is_nonnegative() {
    let k = spec(0.1);
    let jc = critical_constant(5.0, 2).unwrap();
    let mut c = competitors(1.0);
    c.push(stripes(&[1, 2], L / (2.0 * 5f64.sqrt())));
    c.push(CandidateSpec::Random { fraction: 0.5, seed: 1 });
    c.push(CandidateSpec::Random { fraction: 0.1, seed: 2 });
    c.push(CandidateSpec::Random { fraction: 0.0, seed: 0 });
    c.push(CandidateSpec::Random { fraction: 1.0, seed: 0 });
    for j in [jc, 1.05 * jc] {
        let rows = compare_candidates(&c, &k, Functional::Tilde { j }, 64, L, &LatticeOptions::default()).unwrap();
        for r in &rows {
            assert!(r.report.energy >= -1e-9, "{} at J = {j}: {}", r.label, r.report.energy);
            let trivial = r.volume_fraction == 0.0 || r.volume_fraction == 1.0;
            assert_eq!(r.report.energy == 0.0, trivial, "{}", r.label);
        }
        assert_eq!(rows[0].report.energy, 0.0);
        assert!(rows[0].tied && rows[1].tied && !rows[2].tied);
    }
}

#[test]
fn zero_sweeps_return_the_initial_field() {
    let init = make_candidate(&CandidateSpec::Random { fraction: 0.5, seed: 4 }, 2, 32, L).unwrap();
    let sched = AnnealSchedule { max_sweeps: 0, ..AnnealSchedule::default() };
    let out = anneal(&init, &spec(0.1), &sched).unwrap();
    assert_eq!(out.final_field.to_bytes(), init.to_bytes());
    assert_eq!(out.best.to_bytes(), init.to_bytes());
    assert_eq!(out.trace.len(), 1);
    assert_eq!(out.proposed, 0);
}

#[test]
fn optimal_stripes_are_locally_stable() {
    let k = spec(0.1);
    let best = optimal_half_period(L, &k);
    let init = make_candidate(&stripes(&[1, 0], best.h), 2, 64, L).unwrap();
    // Every single flip raises the energy.
    let mut state = EnergyState::new(init.clone(), &k, &voxel_options()).unwrap();
    let e0 = state.energy();
    let min_rise = (0..init.len()).map(|i| state.evaluate(vec![i]).d_energy).fold(f64::INFINITY, f64::min);
    assert!(min_rise > 0.0, "{min_rise}");

    let sched = AnnealSchedule { initial_temperature: Some(1e-3 * min_rise), max_sweeps: 10, ..AnnealSchedule::default() };
    let out = anneal(&init, &k, &sched).unwrap();
    assert_eq!(out.initial_energy, e0);
    assert!(out.best_energy <= e0);
    assert!((out.best_energy - e0).abs() <= 1e-6 * e0.abs(), "{} {e0}", out.best_energy);
    // Axis stripes are represented exactly, so the voxel model reproduces
    // the one-dimensional energy.
    assert!((e0 - best.energy).abs() < 1e-5, "{e0} {}", best.energy);
}

#[test]
fn annealing_trace_and_audit() {
    let k = spec(0.1);
    let init = make_candidate(&CandidateSpec::Random { fraction: 0.5, seed: 11 }, 2, 32, L).unwrap();
    let sched = AnnealSchedule { seed: 5, max_sweeps: 60, ..AnnealSchedule::default() };
    let out = anneal(&init, &k, &sched).unwrap();
    assert!(out.trace.windows(2).all(|w| w[1].best_energy <= w[0].best_energy));
    assert!(out.trace.iter().all(|r| r.best_energy <= r.energy));
    assert_eq!(out.trace.last().unwrap().best_energy, out.best_energy);
    assert!(out.best_energy < out.initial_energy);
    let opts = voxel_options();
    let fresh = lattice_energy_with(&out.final_field, &k, &opts).unwrap().energy;
    assert!((fresh - out.final_energy).abs() <= 1e-6 * fresh.abs().max(1.0));
    let fresh = lattice_energy_with(&out.best, &k, &opts).unwrap().energy;
    assert!((fresh - out.best_energy).abs() <= 1e-6 * fresh.abs().max(1.0));
    assert!(out.initial_temperature > 0.0);
}

#[test]
fn annealing_is_reproducible_across_thread_counts() {
    let k = spec(0.1);
    let init = make_candidate(&CandidateSpec::Random { fraction: 0.5, seed: 2 }, 2, 32, L).unwrap();
    let sched = AnnealSchedule { seed: 17, max_sweeps: 20, ..AnnealSchedule::default() };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| anneal_chains(&init, &k, &sched, 3).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.len(), 3);
    assert!(a.windows(2).all(|w| w[0].best_energy <= w[1].best_energy));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.chain, y.chain);
        assert_eq!(x.best.to_bytes(), y.best.to_bytes());
        assert_eq!(x.final_field.to_bytes(), y.final_field.to_bytes());
        assert_eq!(x.trace, y.trace);
    }
    // Different chains explore differently.
    assert_ne!(a[0].final_field, a[1].final_field);
}

#[test]
fn annealing_random_fields_increases_stripedness() {
    let k = spec(0.1);
    let mut improved = 0;
    let seeds = [0u64, 1, 2];
    for &seed in &seeds {
        let init = make_candidate(&CandidateSpec::Random { fraction: 0.5, seed }, 2, 64, L).unwrap();
        let out = anneal(&init, &k, &AnnealSchedule { seed, ..AnnealSchedule::default() }).unwrap();
        let (s0, s1) = (out.trace[0].stripedness, out.trace.last().unwrap().stripedness);
        println!("seed {seed}: stripedness {s0:.3} -> {s1:.3}, energy {:.3} -> {:.3}", out.initial_energy, out.best_energy);
        improved += (s1 > s0) as usize;
    }
    assert_eq!(improved, seeds.len());
}

#[test]
fn invalid_schedules_are_rejected() {
    let init = make_candidate(&CandidateSpec::Random { fraction: 0.5, seed: 0 }, 2, 16, L).unwrap();
    let k = spec(0.1);
    let bad = [
        AnnealSchedule { cooling: 1.0, ..AnnealSchedule::default() },
        AnnealSchedule { cooling: 0.0, ..AnnealSchedule::default() },
        AnnealSchedule { sweeps_per_temperature: 0, ..AnnealSchedule::default() },
        AnnealSchedule { initial_temperature: Some(-1.0), ..AnnealSchedule::default() },
        AnnealSchedule { mix: ProposalMix { single: 0.0, block: 0.0, shift: 0.0 }, ..AnnealSchedule::default() },
    ];
    for s in bad {
        assert!(matches!(anneal(&init, &k, &s), Err(Error::Config(_))), "{s:?}");
    }
    assert!(matches!(anneal(&init, &spec(0.0), &AnnealSchedule::default()), Err(Error::Config(_))));
}
