use std::fs;
use std::path::PathBuf;

use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use ybcav_core::cavity::{
    depth_for_reduction, enhanced_decay, field_overlap, fit_reflection_q, mirror_transmission, purcell_peak,
    q_estimate, reflection_spectrum, stack_bandgap, unit_cell_matrix,
};
use ybcav_core::ensemble::{lifetime_distribution, ple_spectrum, sample_sites, Isotope};
use ybcav_core::fit::FitResult;
use ybcav_core::ion::build_level_system;
use ybcav_core::protocols::{
    calibrate_noise, run_echo, run_g2, run_lifetime, run_pump_probe, run_rabi, run_ramsey, CoherenceResult,
};
use ybcav_core::{defaults, seed, IonSite, IonSystem};

use crate::config::Resolved;
use crate::output::{inputs_hash, num, write_json, Table};
use crate::{CliError, Command};

const DOMAIN_REFLECTION: u64 = 0x5245_464c;

/// Files written by one run and the summary that went to disk.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Ctx<'a> {
    resolved: &'a Resolved,
    dir: PathBuf,
    name: &'static str,
    files: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn table(&mut self, suffix: &str, table: &Table) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}{suffix}.csv", self.name));
        self.files.push(table.write(&path)?);
        Ok(())
    }
}

fn fit_json(fit: &FitResult) -> Value {
    let params: serde_json::Map<String, Value> = fit
        .params
        .iter()
        .map(|p| (p.name.clone(), json!({ "value": p.value, "error": p.error })))
        .collect();
    json!({ "model": fit.model, "params": params, "chi2_reduced": fit.chi2_reduced })
}

fn isotope_name(i: Isotope) -> String {
    serde_json::to_value(i)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn ion_system(r: &Resolved) -> Result<IonSystem, ybcav_core::Error> {
    let c = &r.config;
    let levels = build_level_system(&c.levels)?;
    let rates = enhanced_decay(&levels, &c.site, &c.cavity);
    IonSystem::new(levels, rates, c.noise, c.chain)
}

fn coherence(ctx: &mut Ctx, res: &CoherenceResult, key: &str) -> Result<Value, CliError> {
    let mut t = Table::new(&["delay_s", "contrast", "err", "p_0", "p_90", "p_180", "p_270"]);
    for ((d, (c, e)), p) in res.delays.iter().zip(res.contrast.iter().zip(&res.err)).zip(&res.populations) {
        t.nums(&[*d, *c, *e, p[0], p[1], p[2], p[3]]);
    }
    ctx.table("", &t)?;
    let mut out = json!({
        key: res.t_decay,
        format!("{key}_err"): res.t_decay_err,
        "fit": res.fit.as_ref().map(fit_json),
    });
    if key == "t2_star" {
        out["linewidth_mhz"] = json!(res.linewidth_hz() * 1e-6);
    }
    Ok(out)
}

fn dispatch(cmd: Command, ctx: &mut Ctx) -> Result<Value, CliError> {
    let c = &ctx.resolved.config;
    let seed = c.master_seed;
    let model = |e: ybcav_core::Error| CliError::Model {
        module: cmd.module(),
        source: e,
    };
    match cmd {
        Command::Lifetime => {
            let sys = ion_system(ctx.resolved)?;
            let res = run_lifetime(&sys, &c.protocol, seed).map_err(model)?;
            let mut t = Table::new(&["delay_s", "counts", "err"]);
            for ((d, n), e) in res.delays.iter().zip(&res.counts).zip(&res.err) {
                t.nums(&[*d, *n, *e]);
            }
            ctx.table("", &t)?;
            Ok(json!({
                "tau_fit": res.tau,
                "tau_err": res.tau_err,
                "tau_model": sys.rates.lifetime,
                "f_eff": sys.rates.f_eff,
                "lifetime_reduction": sys.rates.total / sys.levels.gamma_bulk(),
                "fit": fit_json(&res.fit),
            }))
        }
        Command::PumpProbe => {
            let sys = ion_system(ctx.resolved)?;
            let res = run_pump_probe(&sys, &c.protocol, seed).map_err(model)?;
            let mut t = Table::new(&["detuning_mhz", "frequency_ghz", "counts", "err"]);
            for i in 0..res.counts.len() {
                t.nums(&[res.detunings_mhz[i], res.frequencies_ghz[i], res.counts[i], res.err[i]]);
            }
            ctx.table("", &t)?;
            Ok(json!({
                "baseline": res.baseline,
                "peak_detuning_mhz": res.peak_detuning_mhz,
                "transfer": res.transfer,
                "rate_model_transfer": res.rate_model_transfer,
            }))
        }
        Command::Rabi => {
            let sys = ion_system(ctx.resolved)?;
            let res = run_rabi(&sys, &c.protocol, seed).map_err(model)?;
            let mut t = Table::new(&[
                "duration_s",
                "pulse_area_rad",
                "counts",
                "err",
                "photons_per_train",
                "photons_err",
                "bright_population",
            ]);
            for i in 0..res.counts.len() {
                t.nums(&[
                    res.durations[i],
                    res.pulse_areas[i],
                    res.counts[i],
                    res.err[i],
                    res.photons_per_train[i],
                    res.photons_err[i],
                    res.bright_population[i],
                ]);
            }
            ctx.table("", &t)?;
            let peak = res.photons_per_train.iter().cloned().fold(0.0, f64::max);
            Ok(json!({
                "cyclicity": sys.rates.cyclicity(),
                "max_photons_per_train": peak,
                "cycle_period": res.cycle_period,
            }))
        }
        Command::Ramsey => {
            let sys = ion_system(ctx.resolved)?;
            let res = run_ramsey(&sys, &c.protocol, seed).map_err(model)?;
            coherence(ctx, &res, "t2_star")
        }
        Command::Echo => {
            let sys = ion_system(ctx.resolved)?;
            let res = run_echo(&sys, &c.protocol, seed).map_err(model)?;
            coherence(ctx, &res, "t2")
        }
        Command::G2 => {
            let sys = ion_system(ctx.resolved)?;
            let res = run_g2(&sys, &c.protocol, seed).map_err(model)?;
            let h = &res.histogram;
            let mut t = Table::new(&["lag_s", "g2", "g2_err", "counts"]);
            for i in 0..h.g2.len() {
                let centre = 0.5 * (h.bin_edges[i] + h.bin_edges[i + 1]);
                t.nums(&[centre, h.g2[i], h.g2_err[i], h.counts[i] as f64]);
            }
            ctx.table("", &t)?;
            let mut p = Table::new(&["lag", "lag_s", "counts", "g2", "g2_err"]);
            for pk in &h.peaks {
                p.row(&[
                    pk.lag.to_string(),
                    num(pk.lag_time),
                    pk.counts.to_string(),
                    num(pk.g2),
                    num(pk.err),
                ]);
            }
            ctx.table("_peaks", &p)?;
            Ok(json!({
                "g2_zero": res.g2_zero,
                "g2_zero_err": res.g2_zero_err,
                "bunching_ratio": res.bunching_ratio,
                "detections": res.detections,
                "emitted": res.emitted,
                "shots": h.n_shots,
            }))
        }
        Command::Ple => {
            let levels = build_level_system(&c.levels)?;
            let sample = sample_sites(&c.ensemble, &c.cavity, seed).map_err(model)?;
            let spec = ple_spectrum(&sample.ions, &levels, &c.cavity, &c.chain, &c.ensemble).map_err(model)?;
            let mut t = Table::new(&["offset_ghz", "frequency_ghz", "counts"]);
            for (f, n) in spec.offsets_ghz.iter().zip(&spec.counts) {
                t.nums(&[*f, c.ensemble.zero_spin_peak_ghz + f, *n]);
            }
            ctx.table("", &t)?;
            let count = |iso| sample.ions.iter().filter(|i| i.isotope == iso).count();
            let (imax, _) = spec
                .counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("scan grid is non-empty");
            Ok(json!({
                "ions": sample.ions.len(),
                "expected_count": sample.expected_count,
                "yb171": count(Isotope::Yb171),
                "zero_spin": count(Isotope::ZeroSpin),
                "other": count(Isotope::Other),
                "peak_offset_ghz": spec.offsets_ghz[imax],
                "warning": sample.warning,
            }))
        }
        Command::Lifetimes => {
            let levels = build_level_system(&c.levels)?;
            let sample = sample_sites(&c.ensemble, &c.cavity, seed).map_err(model)?;
            let hist =
                lifetime_distribution(&sample.ions, &levels, &c.cavity, c.ensemble.lifetime_bins).map_err(model)?;
            let mut t = Table::new(&[
                "index",
                "isotope",
                "depth_nm",
                "transverse_factor",
                "frequency_offset_ghz",
                "f_eff",
                "lifetime_s",
            ]);
            for (k, ion) in sample.ions.iter().enumerate() {
                let rates = enhanced_decay(&levels, &ion.site, &c.cavity);
                t.row(&[
                    k.to_string(),
                    isotope_name(ion.isotope),
                    num(ion.site.depth_nm),
                    num(ion.site.transverse_factor),
                    num(ion.site.frequency_offset_ghz),
                    num(rates.f_eff),
                    num(rates.lifetime),
                ]);
            }
            ctx.table("", &t)?;
            let mut h = Table::new(&["bin_start_s", "bin_end_s", "count"]);
            for (i, n) in hist.counts.iter().enumerate() {
                h.row(&[num(hist.edges[i]), num(hist.edges[i + 1]), n.to_string()]);
            }
            ctx.table("_hist", &h)?;
            Ok(json!({
                "ions": sample.ions.len(),
                "min": hist.min,
                "max": hist.max,
                "p10": hist.p10,
                "median": hist.median,
                "p90": hist.p90,
                "tau_floor": hist.tau_floor,
                "tau_bulk": 1.0 / levels.gamma_bulk(),
            }))
        }
        Command::Purcell => {
            let levels = build_level_system(&c.levels)?;
            let f_max = purcell_peak(c.cavity.q, c.cavity.v_norm)?;
            let mut t = Table::new(&["depth_nm", "field_overlap", "f_eff", "lifetime_s", "cyclicity", "a_yield"]);
            for d in c.purcell.depths_nm.values() {
                let site = IonSite {
                    depth_nm: d,
                    ..c.site.clone()
                };
                let r = enhanced_decay(&levels, &site, &c.cavity);
                t.nums(&[d, field_overlap(&site, &c.cavity), r.f_eff, r.lifetime, r.cyclicity(), r.a_yield()]);
            }
            ctx.table("", &t)?;
            let r = enhanced_decay(&levels, &c.site, &c.cavity);
            let strong_depth = depth_for_reduction(&levels, &c.site, &c.cavity, defaults::LIFETIME_REDUCTION).ok();
            Ok(json!({
                "f_max": f_max,
                "linewidth_ghz": c.cavity.linewidth_ghz(),
                "site_f_eff": r.f_eff,
                "site_lifetime": r.lifetime,
                "site_reduction": r.total / levels.gamma_bulk(),
                "site_cyclicity": r.cyclicity(),
                "depth_for_reference_reduction_nm": strong_depth,
            }))
        }
        Command::Reflection => {
            let b = &c.reflection;
            let lw = c.cavity.linewidth_ghz();
            let step = 2.0 * b.span_linewidths * lw / (b.points - 1) as f64;
            let grid: Vec<f64> = (0..b.points)
                .map(|i| c.cavity.nu0_ghz - b.span_linewidths * lw + i as f64 * step)
                .collect();
            let mut spectrum = reflection_spectrum(&c.cavity, b.coupling_ratio, &grid).map_err(model)?;
            if b.noise > 0.0 {
                let mut rng = seed::stream(seed, DOMAIN_REFLECTION, 0);
                let noise = Normal::new(0.0, b.noise).map_err(|e| CliError::field("reflection.noise", e.to_string()))?;
                for p in &mut spectrum {
                    p.1 += noise.sample(&mut rng);
                }
            }
            let fit = fit_reflection_q(&spectrum).map_err(model)?;
            let mut t = Table::new(&["frequency_ghz", "detuning_ghz", "reflectance"]);
            for (f, r) in &spectrum {
                t.nums(&[*f, f - c.cavity.nu0_ghz, *r]);
            }
            ctx.table("", &t)?;
            Ok(json!({
                "q_fit": fit.q,
                "q_err": fit.q_err,
                "nu0_fit_ghz": fit.nu0_ghz,
                "depth": fit.depth,
                "q_input": c.cavity.q,
            }))
        }
        Command::Bragg => {
            let stack = &c.bragg.stack;
            let grid = c.bragg.wavelength_nm.values();
            let mut t = Table::new(&["wavelength_nm", "transmission_left", "transmission_right", "in_gap"]);
            for &w in &grid {
                let gap = unit_cell_matrix(&stack.cell, w).map_err(model)?.half_trace() > 1.0;
                t.row(&[
                    num(w),
                    num(mirror_transmission(&stack.cell, stack.periods_left, w).map_err(model)?),
                    num(mirror_transmission(&stack.cell, stack.periods_right, w).map_err(model)?),
                    u8::from(gap).to_string(),
                ]);
            }
            ctx.table("", &t)?;
            let gaps = stack_bandgap(&stack.cell, &grid).map_err(model)?;
            let design = stack.design_wavelength_nm;
            let q = q_estimate(&stack.cell, stack.periods_left, stack.periods_right, design).map_err(model)?;
            Ok(json!({
                "gaps_nm": gaps,
                "design_in_gap": gaps.iter().any(|&(lo, hi)| lo <= design && design <= hi),
                "period_nm": stack.cell.period_nm(),
                "mean_index": stack.cell.mean_index(),
                "q_estimate": q,
            }))
        }
        Command::Calibrate => {
            let sys = ion_system(ctx.resolved)?;
            let cal = calibrate_noise(&sys, &c.protocol, &c.calibration, seed).map_err(model)?;
            let mut t = Table::new(&["step", "sigma", "gamma_phi", "t2_star", "t2"]);
            for (k, s) in cal.history.iter().enumerate() {
                t.row(&[k.to_string(), num(s.sigma), num(s.gamma_phi), num(s.t2_star), num(s.t2)]);
            }
            ctx.table("", &t)?;
            let last = cal.last();
            Ok(json!({
                "noise": cal.noise,
                "initial": cal.initial,
                "targets": cal.targets,
                "t2_star": last.t2_star,
                "t2": last.t2,
                "linewidth_mhz": 1e-6 / (std::f64::consts::PI * last.t2_star),
                "steps": cal.history.len(),
            }))
        }
    }
}

/// Run one subcommand and write its CSV data, JSON summary and resolved
/// config into the configured output directory.
pub fn execute(cmd: Command, resolved: &Resolved) -> Result<Artifacts, CliError> {
    let config = &resolved.config;
    config.validate()?;
    let dir = config.output.clone();
    fs::create_dir_all(&dir)?;
    let mut ctx = Ctx {
        resolved,
        dir,
        name: cmd.name(),
        files: Vec::new(),
    };
    let results = dispatch(cmd, &mut ctx)?;
    let summary = json!({
        "subcommand": cmd.name(),
        "master_seed": config.master_seed,
        "inputs_sha256": inputs_hash(cmd.name(), config),
        "results": results,
        "audit": resolved.audit,
        "config": config,
    });
    let pretty = config.format.pretty_json;
    let mut files = ctx.files;
    files.push(write_json(&ctx.dir.join(format!("{}.summary.json", cmd.name())), &summary, pretty)?);
    let resolved_config = serde_json::to_value(config).expect("config serializes");
    files.push(write_json(&ctx.dir.join(format!("{}.config.json", cmd.name())), &resolved_config, pretty)?);
    Ok(Artifacts { files, summary })
}
