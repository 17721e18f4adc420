//! Metropolis annealing of voxel fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::lattice::{lattice_energy_with, stripedness, EnergyState, LatticeModel, LatticeOptions, VoxelSet};
use crate::report::fmt_f64;

/// Relative proposal frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalMix {
    /// Flip one voxel.
    pub single: f64,
    /// Flip a `2^d` block.
    pub block: f64,
    /// Shift a slab of parallel grid lines by one voxel along the lines,
    /// moving the interfaces they cross (a stripe-phase shift of a band).
    pub shift: f64,
}

impl Default for ProposalMix {
    fn default() -> Self {
        ProposalMix { single: 0.8, block: 0.15, shift: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    /// Starting temperature; calibrated from sampled proposals when absent.
    pub initial_temperature: Option<f64>,
    /// Acceptance ratio of uphill proposals targeted by the calibration.
    pub target_acceptance: f64,
    /// Geometric cooling factor in `(0,1)`.
    pub cooling: f64,
    pub sweeps_per_temperature: usize,
    pub mix: ProposalMix,
    /// Stop once the temperature falls below this fraction of the start.
    pub min_temperature_ratio: f64,
    /// Stop after this many sweeps without a new best (0 disables).
    pub stall_sweeps: usize,
    /// Hard cap on sweeps; 0 returns the initial field.
    pub max_sweeps: usize,
    pub seed: u64,
    /// Sampled directions for the stripedness column of the trace.
    pub stripe_directions: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            initial_temperature: None,
            target_acceptance: 0.6,
            cooling: 0.93,
            sweeps_per_temperature: 2,
            mix: ProposalMix::default(),
            min_temperature_ratio: 1e-4,
            stall_sweeps: 50,
            max_sweeps: 300,
            seed: 0,
            stripe_directions: 32,
        }
    }
}

/// Proposals used to calibrate the starting temperature.
const CALIBRATION_PROPOSALS: usize = 512;
/// Relative tolerance of the accumulated-energy audit.
const AUDIT_TOLERANCE: f64 = 1e-6;

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::config(format!("cooling factor must lie in (0,1), got {}", self.cooling)));
        }
        if self.sweeps_per_temperature == 0 {
            return Err(Error::config("sweeps per temperature must be at least 1"));
        }
        if let Some(t) = self.initial_temperature {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::config(format!("initial temperature must be positive, got {t}")));
            }
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::config(format!("target acceptance must lie in (0,1), got {}", self.target_acceptance)));
        }
        if !(self.min_temperature_ratio >= 0.0 && self.min_temperature_ratio < 1.0) {
            return Err(Error::config(format!(
                "minimum temperature ratio must lie in [0,1), got {}",
                self.min_temperature_ratio
            )));
        }
        let m = self.mix;
        let parts = [m.single, m.block, m.shift];
        if parts.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || parts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("proposal mix weights must be nonnegative with a positive sum"));
        }
        if self.stripe_directions == 0 {
            return Err(Error::config("stripe directions must be at least 1"));
        }
        Ok(())
    }
}

/// One line of the annealing trace, recorded after each sweep (sweep 0 is
/// the initial field).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: usize,
    pub temperature: f64,
    pub energy: f64,
    pub best_energy: f64,
    pub stripedness: f64,
    pub acceptance: f64,
}

impl TraceRow {
    pub const TSV_HEADER: &'static str = "sweep\ttemperature\tenergy\tbest_energy\tstripedness\tacceptance";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.sweep,
            fmt_f64(self.temperature),
            fmt_f64(self.energy),
            fmt_f64(self.best_energy),
            fmt_f64(self.stripedness),
            fmt_f64(self.acceptance)
        )
    }
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub final_field: VoxelSet,
    /// Lowest-energy field visited ("best found", not a certified minimum).
    pub best: VoxelSet,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub best_energy: f64,
    pub initial_temperature: f64,
    pub trace: Vec<TraceRow>,
    pub proposed: u64,
    pub accepted: u64,
    /// Chain index within [`anneal_chains`] (0 for a single run).
    pub chain: usize,
}

fn propose(rng: &mut ChaCha8Rng, v: &VoxelSet, mix: &ProposalMix) -> Vec<usize> {
    let (d, n) = (v.dim(), v.n());
    let total = mix.single + mix.block + mix.shift;
    let u = rng.gen::<f64>() * total;
    if u < mix.single {
        return vec![rng.gen_range(0..v.len())];
    }
    if u < mix.single + mix.block {
        let corner = rng.gen_range(0..v.len());
        let mut out = vec![corner];
        for a in 0..d {
            let shifted: Vec<usize> = out.iter().map(|&i| v.neighbor(i, a, 1)).collect();
            out.extend(shifted);
        }
        return out;
    }
    // Slab shift: the lines along `axis` whose other coordinates lie in
    // random cyclic intervals move by one voxel, so every interface they
    // cross advances by one layer over the slab.
    let axis = rng.gen_range(0..d);
    let step: isize = if rng.gen::<bool>() { 1 } else { -1 };
    let mut lo = [0usize; 3];
    let mut len = [1usize; 3];
    for a in 0..d {
        if a == axis {
            len[a] = n;
        } else {
            lo[a] = rng.gen_range(0..n);
            len[a] = rng.gen_range(1..=(n / 8).max(1));
        }
    }
    let mut out = Vec::new();
    for k2 in 0..len[2] {
        for k1 in 0..len[1] {
            for k0 in 0..len[0] {
                let mut x = [0usize; 3];
                for (a, k) in [k0, k1, k2].into_iter().enumerate().take(d) {
                    x[a] = (lo[a] + k) % n;
                }
                let i = v.index(x);
                if v.get(i) != v.get(v.neighbor(i, axis, -step)) {
                    out.push(i);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Temperature at which the sampled uphill proposals are accepted with
/// mean probability `target`. Downhill proposals are excluded: on a random
/// start they dominate and would calibrate a quench.
fn calibrate(deltas: &[f64], target: f64) -> f64 {
    let uphill: Vec<f64> = deltas.iter().copied().filter(|&x| x > 0.0).collect();
    if uphill.is_empty() {
        return f64::MIN_POSITIVE;
    }
    let ratio = |t: f64| uphill.iter().map(|&x| (-x / t).exp()).sum::<f64>() / uphill.len() as f64;
    let scale = uphill.iter().cloned().fold(0.0, f64::max);
    let (mut lo, mut hi) = ((scale * 1e-9).ln(), (scale * 1e9).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.exp()
}

fn audit(label: &str, tracked: f64, field: &VoxelSet, spec: &KernelSpec, opts: &LatticeOptions) -> Result<()> {
    let report = lattice_energy_with(field, spec, opts)?;
    let scale = report.energy.abs().max(report.nonlocal_term.unwrap_or(0.0).abs()).max(f64::MIN_POSITIVE);
    if (tracked - report.energy).abs() > AUDIT_TOLERANCE * scale {
        return Err(Error::Audit(format!(
            "{label} energy {tracked} accumulated from flip deltas differs from the recomputed {}",
            report.energy
        )));
    }
    Ok(())
}

fn run_chain(init: &VoxelSet, spec: &KernelSpec, sched: &AnnealSchedule, chain: usize) -> Result<AnnealOutcome> {
    sched.validate()?;
    let opts = &LatticeOptions { model: LatticeModel::Voxel, ..LatticeOptions::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    rng.set_stream(chain as u64);
    let mut state = EnergyState::new(init.clone(), spec, opts)?;
    let e0 = state.energy();
    let s0 = stripedness(init, sched.stripe_directions).score;
    let t0 = match (sched.max_sweeps, sched.initial_temperature) {
        (0, t) => t.unwrap_or(0.0),
        (_, Some(t)) => t,
        (_, None) => {
            let deltas: Vec<f64> = (0..CALIBRATION_PROPOSALS)
                .map(|_| {
                    let flips = propose(&mut rng, state.field(), &sched.mix);
                    if flips.is_empty() { 0.0 } else { state.evaluate(flips).d_energy }
                })
                .collect();
            calibrate(&deltas, sched.target_acceptance)
        }
    };
    let mut trace = vec![TraceRow { sweep: 0, temperature: t0, energy: e0, best_energy: e0, stripedness: s0, acceptance: 0.0 }];
    let mut best = init.clone();
    let mut best_energy = e0;
    let mut energy = e0;
    let (mut proposed, mut accepted) = (0u64, 0u64);
    let mut since_best = 0;
    // Voxels flipped since the last sweep boundary, to rebuild a best field
    // visited mid-sweep.
    let mut journal: Vec<usize> = Vec::new();
    let per_sweep = init.len();
    for sweep in 1..=sched.max_sweeps {
        let level = ((sweep - 1) / sched.sweeps_per_temperature) as i32;
        let t = t0 * sched.cooling.powi(level);
        if t < sched.min_temperature_ratio * t0 {
            break;
        }
        journal.clear();
        let mut best_mark: Option<usize> = None;
        let mut sweep_accepted = 0u64;
        for _ in 0..per_sweep {
            let flips = propose(&mut rng, state.field(), &sched.mix);
            proposed += 1;
            if flips.is_empty() {
                continue;
            }
            let mv = state.evaluate(flips);
            let take = mv.d_energy <= 0.0 || rng.gen::<f64>() < (-mv.d_energy / t).exp();
            if !take {
                continue;
            }
            state.apply(&mv);
            energy = state.energy();
            journal.extend_from_slice(&mv.flips);
            sweep_accepted += 1;
            if energy < best_energy {
                best_energy = energy;
                best_mark = Some(journal.len());
            }
        }
        accepted += sweep_accepted;
        if let Some(mark) = best_mark {
            best = state.field().clone();
            for &i in &journal[mark..] {
                best.flip(i);
            }
            since_best = 0;
        } else {
            since_best += 1;
        }
        trace.push(TraceRow {
            sweep,
            temperature: t,
            energy,
            best_energy,
            stripedness: stripedness(state.field(), sched.stripe_directions).score,
            acceptance: sweep_accepted as f64 / per_sweep as f64,
        });
        if sched.stall_sweeps > 0 && since_best >= sched.stall_sweeps {
            break;
        }
    }
    if sched.max_sweeps > 0 {
        audit("final", energy, state.field(), spec, opts)?;
        audit("best", best_energy, &best, spec, opts)?;
    }
    Ok(AnnealOutcome {
        final_field: state.into_field(),
        best,
        initial_energy: e0,
        final_energy: energy,
        best_energy,
        initial_temperature: t0,
        trace,
        proposed,
        accepted,
        chain,
    })
}

/// Anneals `init` under the regularized functional of `spec` with
/// Metropolis dynamics on incremental flip energies.
///
/// Energies are those of the union of occupied voxels
/// ([`LatticeModel::Voxel`]), so every visited energy is the value of the
/// functional on an actual periodic set. The accumulated final and best energies are audited against a
/// from-scratch evaluation; a mismatch beyond `1e−6` relative is an
/// [`Error::Audit`].
pub fn anneal(init: &VoxelSet, spec: &KernelSpec, sched: &AnnealSchedule) -> Result<AnnealOutcome> {
    if spec.tau() <= 0.0 {
        return Err(Error::config("annealing needs τ > 0"));
    }
    run_chain(init, spec, sched, 0)
}

/// Runs `chains` independent chains from `init` in parallel (chain `k` uses
/// stream `k` of the seeded generator) and returns them sorted by best
/// energy, ties by chain index.
pub fn anneal_chains(
    init: &VoxelSet,
    spec: &KernelSpec,
    sched: &AnnealSchedule,
    chains: usize,
) -> Result<Vec<AnnealOutcome>> {
    if chains == 0 {
        return Err(Error::config("at least one chain is required"));
    }
    if spec.tau() <= 0.0 {
        return Err(Error::config("annealing needs τ > 0"));
    }
    let mut out = (0..chains)
        .into_par_iter()
        .map(|k| run_chain(init, spec, sched, k))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.best_energy.total_cmp(&b.best_energy).then(a.chain.cmp(&b.chain)));
    Ok(out)
}
