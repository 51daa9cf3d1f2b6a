use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use fockprobe::calibration::{calibration_report, thermal_dephasing_rate, TraceOptions};
use fockprobe::fitting::{fit_spectrum, FitParam, FitProblem, SimplexOptions};
use fockprobe::model::{DriveKind, FrameChoice, GeneratorSpec, SystemParams};
use fockprobe::response::{
    probe_sweep_transmission, qubit_excitation_spectrum, qubit_spectrum, Spectrum, SpectrumMeta, SweepAxis, SweepOptions,
};
use fockprobe::stats::{
    best_fit_geometric, cavity_distribution, distribution_from_density, klyshko, lossy_squeezed_density, mean_photon,
    thermal_coherent_density, total_variation, KlyshkoTable, PhotonDistribution, SqueezedLossModel, ThermalCoherentModel,
};
use fockprobe::steady::{check_truncation, steady_state_with, SteadyStateOptions};
use fockprobe::Complex;

use crate::config::{to_mhz, DistributionSource, ExperimentConfig, Format, Observable, SweepKind};
use crate::error::{CliError, CliResult};
use crate::output::{self, embedded_digest, num, sha256_hex, OutputSet, MANIFEST, SPECTRUM_HEADER};

/// Everything a command needs besides the config itself.
pub struct RunContext {
    pub config_path: PathBuf,
    pub digest: String,
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    pub format: Format,
    pub jobs: usize,
    pub seed: u64,
    pub timestamp: String,
}

impl RunContext {
    fn sweep_options(&self) -> CliResult<SweepOptions> {
        let mut o = SweepOptions::new(self.config.layout()?);
        o.jobs = Some(self.jobs);
        if let Some(tol) = self.config.residual_tol {
            o.steady.residual_tol = tol;
        }
        Ok(o)
    }

    fn steady_options(&self) -> SteadyStateOptions {
        let mut o = SteadyStateOptions::default();
        if let Some(tol) = self.config.residual_tol {
            o.residual_tol = tol;
        }
        o
    }
}

struct NamedSpectrum {
    suffix: String,
    spectrum: Spectrum<f64>,
    probe: Option<f64>,
}

/// Steady state at one representative point, rejected when a mode's top
/// level holds more than the configured threshold.
fn truncation_check(ctx: &RunContext, spec: GeneratorSpec<f64>, out: &mut OutputSet, label: &str) -> CliResult<()> {
    let ss = steady_state_with(&spec.build()?, &ctx.steady_options())?;
    let report = check_truncation(&ss, ctx.config.tail_threshold);
    out.step(
        &format!("{label}truncation-check"),
        json!({
            "residual": ss.residual,
            "relative_residual": ss.relative_residual,
            "tail_mass": ss.tail_mass,
            "report": report,
            "solver": ss.solver_stats,
        }),
    );
    if !report.pass() {
        return Err(CliError::Truncation(report));
    }
    Ok(())
}

fn compute_spectra(ctx: &RunContext, p: &SystemParams<f64>, out: &mut OutputSet, label: &str) -> CliResult<Vec<NamedSpectrum>> {
    let cfg = &ctx.config;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config { section: Some("sweep".into()), key: None, line: None, message: "spectrum needs a [sweep] section".into() })?;
    let grid = sweep.grid();
    let mid = grid[grid.len() / 2];
    let opts = ctx.sweep_options()?;
    let layout = opts.layout;
    let observable = cfg.spectrum.observable;

    if observable != Observable::ProbeFrame && sweep.axis == SweepKind::Probe {
        return Err(CliError::at("sweep", "axis", None, "a probe sweep needs the probe-frame observable"));
    }
    if observable == Observable::ProbeFrame && sweep.axis == SweepKind::QubitDrive && cfg.spectrum.probes.is_empty() {
        return Err(CliError::at("spectrum", "probe_offsets", None, "probe-frame qubit sweeps need at least one probe offset"));
    }

    let mut q = *p;
    let check = match (observable, sweep.axis) {
        (Observable::ProbeFrame, SweepKind::QubitDrive) => {
            q.omega_d = mid;
            q.omega_p = cfg.spectrum.probes[0];
            GeneratorSpec { params: q, drive: cfg.drive, frame: FrameChoice::ProbeFrame, include_probe: true, layout }
        }
        (Observable::ProbeFrame, SweepKind::Probe) => {
            q.omega_p = mid;
            GeneratorSpec { params: q, drive: cfg.drive, frame: FrameChoice::ProbeFrame, include_probe: true, layout }
        }
        _ => {
            q.omega_d = mid;
            GeneratorSpec { params: q, drive: cfg.drive, frame: FrameChoice::SqueezeFrame, include_probe: false, layout }
        }
    };
    truncation_check(ctx, check, out, label)?;

    let spectra = match (observable, sweep.axis) {
        (Observable::Transmission, _) => {
            vec![NamedSpectrum { suffix: String::new(), spectrum: qubit_spectrum(p, &cfg.drive, &grid, &opts)?, probe: None }]
        }
        (Observable::Excitation, _) => vec![NamedSpectrum {
            suffix: String::new(),
            spectrum: qubit_excitation_spectrum(p, &cfg.drive, &grid, &opts)?,
            probe: None,
        }],
        (Observable::ProbeFrame, SweepKind::QubitDrive) => {
            let s2 = probe_sweep_transmission(p, &cfg.drive, &cfg.spectrum.probes, &grid, &opts)?;
            (0..cfg.spectrum.probes.len())
                .map(|i| NamedSpectrum { suffix: format!("_cut{i}"), spectrum: s2.drive_cut(i), probe: Some(cfg.spectrum.probes[i]) })
                .collect()
        }
        (Observable::ProbeFrame, SweepKind::Probe) => {
            let s2 = probe_sweep_transmission(p, &cfg.drive, &grid, &[p.omega_d], &opts)?;
            vec![NamedSpectrum { suffix: String::new(), spectrum: s2.probe_cut(0), probe: None }]
        }
    };
    for s in &spectra {
        out.step(
            &format!("{label}sweep{}", s.suffix),
            json!({
                "observable": format!("{observable:?}"),
                "points": s.spectrum.len(),
                "normalization": s.spectrum.normalization,
                "idler_ratio": s.spectrum.metadata.idler_ratio,
                "probe_mhz": s.probe.map(to_mhz),
            }),
        );
    }
    Ok(spectra)
}

fn write_spectra(ctx: &RunContext, out: &mut OutputSet, stem: &str, spectra: &[NamedSpectrum]) -> CliResult<()> {
    for s in spectra {
        let name = format!("{stem}{}", s.suffix);
        if ctx.format.csv() {
            let text = output::spectrum_csv(&out.digest, &s.spectrum);
            out.write_text(&format!("{name}.csv"), &text)?;
        }
        if ctx.format.json() {
            let mut body = output::spectrum_json(&s.spectrum);
            body["probe_mhz"] = s.probe.map(to_mhz).map_or(Value::Null, |v| output::canonical(json!(v)));
            out.write_json(&format!("{name}.json"), body)?;
        }
    }
    Ok(())
}

pub fn spectrum(ctx: &RunContext) -> CliResult<PathBuf> {
    let mut out = OutputSet::new(&ctx.out_dir, &ctx.digest)?;
    let spectra = compute_spectra(ctx, &ctx.config.system, &mut out, "")?;
    write_spectra(ctx, &mut out, "spectrum", &spectra)?;
    out.finish("spectrum", ctx.seed, &ctx.timestamp)
}

struct DistributionResult {
    dist: PhotonDistribution<f64>,
    table: KlyshkoTable<f64>,
}

fn compute_distribution(ctx: &RunContext, p: &SystemParams<f64>, out: &mut OutputSet, label: &str) -> CliResult<DistributionResult> {
    let cfg = &ctx.config;
    let dist = match cfg.distribution {
        DistributionSource::SteadyState => {
            let spec = GeneratorSpec { params: *p, drive: cfg.drive, frame: FrameChoice::SqueezeFrame, include_probe: false, layout: cfg.layout()? };
            let ss = steady_state_with(&spec.build()?, &ctx.steady_options())?;
            let report = check_truncation(&ss, cfg.tail_threshold);
            out.step(
                &format!("{label}steady-state"),
                json!({
                    "residual": ss.residual,
                    "relative_residual": ss.relative_residual,
                    "tail_mass": ss.tail_mass,
                    "report": report,
                    "solver": ss.solver_stats,
                }),
            );
            if !report.pass() {
                return Err(CliError::Truncation(report));
            }
            cavity_distribution(&ss.rho)
        }
        DistributionSource::LossySqueezed { r, l, dim } => {
            let model = SqueezedLossModel::new(r, l).map_err(|e| CliError::at("distribution", "r", None, e.to_string()))?;
            distribution_from_density(&lossy_squeezed_density(&model, dim)?)
        }
        DistributionSource::ThermalCoherent { n_th, alpha_re, alpha_im, dim } => {
            let model = ThermalCoherentModel::new(n_th, Complex::new(alpha_re, alpha_im))
                .map_err(|e| CliError::at("distribution", "n_th", None, e.to_string()))?;
            distribution_from_density(&thermal_coherent_density(&model, dim)?)
        }
    };
    if !matches!(cfg.distribution, DistributionSource::SteadyState) {
        out.step(&format!("{label}model"), json!({ "truncation": dist.truncation, "tail_mass": dist.tail_mass }));
    }
    let table = klyshko(&dist.probs);
    Ok(DistributionResult { dist, table })
}

fn distribution_body(r: &DistributionResult) -> Value {
    let k: Vec<Value> = r.table.entries.iter().map(|e| json!({ "n": e.n, "k": e.value, "defined": e.value.is_some() })).collect();
    let tv = best_fit_geometric(&r.dist).ok().map(|g| total_variation(&r.dist, &g));
    json!({
        "probabilities": r.dist.probs,
        "truncation": r.dist.truncation,
        "tail_mass": r.dist.tail_mass,
        "mean_photon": mean_photon(&r.dist).ok(),
        "klyshko": k,
        "klyshko_floor": r.table.floor,
        "nonclassical": r.table.nonclassical(),
        "verdict": if r.table.nonclassical() { "nonclassical" } else { "classical" },
        "tv_to_geometric": tv,
    })
}

fn write_distribution(ctx: &RunContext, out: &mut OutputSet, suffix: &str, r: &DistributionResult) -> CliResult<()> {
    if ctx.format.csv() {
        let rows: Vec<Vec<String>> = r.dist.probs.iter().enumerate().map(|(n, p)| vec![n.to_string(), num(*p)]).collect();
        out.write_text(&format!("distribution{suffix}.csv"), &output::table_csv(&out.digest, &["n", "p_n"], &rows))?;
        let rows: Vec<Vec<String>> = r
            .table
            .entries
            .iter()
            .map(|e| vec![e.n.to_string(), e.value.map_or_else(|| "undefined".into(), num)])
            .collect();
        out.write_text(&format!("klyshko{suffix}.csv"), &output::table_csv(&out.digest, &["n", "k_n"], &rows))?;
    }
    if ctx.format.json() {
        out.write_json(&format!("distribution{suffix}.json"), distribution_body(r))?;
    }
    Ok(())
}

pub fn distribution(ctx: &RunContext) -> CliResult<PathBuf> {
    let mut out = OutputSet::new(&ctx.out_dir, &ctx.digest)?;
    let r = compute_distribution(ctx, &ctx.config.system, &mut out, "")?;
    write_distribution(ctx, &mut out, "", &r)?;
    out.finish("distribution", ctx.seed, &ctx.timestamp)
}

pub fn detuning_sweep(ctx: &RunContext) -> CliResult<PathBuf> {
    let cfg = &ctx.config;
    if !matches!(cfg.drive, DriveKind::Squeezed { .. }) {
        return Err(CliError::at("drive", "kind", None, "detuning-sweep needs a squeezed drive"));
    }
    let deltas = cfg
        .deltas
        .as_ref()
        .ok_or_else(|| CliError::Config { section: Some("detuning".into()), key: None, line: None, message: "detuning-sweep needs a [detuning] section".into() })?;
    let mut out = OutputSet::new(&ctx.out_dir, &ctx.digest)?;
    let kmax = 4;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        let p = cfg.system.with_source_detuning(delta);
        let label = format!("delta{i}/");
        let spectra = compute_spectra(ctx, &p, &mut out, &label)?;
        write_spectra(ctx, &mut out, &format!("spectrum_delta{i}"), &spectra)?;
        let r = compute_distribution(ctx, &p, &mut out, &label)?;
        write_distribution(ctx, &mut out, &format!("_delta{i}"), &r)?;

        let body = distribution_body(&r);
        let mut row = vec![num(to_mhz(delta)), body["tv_to_geometric"].as_f64().map_or_else(|| "undefined".into(), num)];
        row.extend((1..=kmax).map(|n| r.table.k(n).map_or_else(|| "undefined".into(), num)));
        row.push(body["verdict"].as_str().unwrap_or_default().to_string());
        rows.push(row);
        summary.push(json!({
            "delta_mhz": to_mhz(delta),
            "tv_to_geometric": body["tv_to_geometric"],
            "klyshko": body["klyshko"],
            "verdict": body["verdict"],
        }));
    }
    if ctx.format.csv() {
        let mut header = vec!["delta_mhz".to_string(), "tv_to_geometric".to_string()];
        header.extend((1..=kmax).map(|n| format!("k_{n}")));
        header.push("verdict".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.write_text("summary.csv", &output::table_csv(&out.digest, &header, &rows))?;
    }
    if ctx.format.json() {
        out.write_json("summary.json", json!({ "points": summary }))?;
    }
    out.finish("detuning-sweep", ctx.seed, &ctx.timestamp)
}

/// Reads a spectrum CSV as written by `spectrum`.
pub fn read_spectrum_csv(path: &Path) -> CliResult<Spectrum<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, msg: String| CliError::Config { section: Some("fit".into()), key: Some("target".into()), line: Some(line), message: format!("{}: {msg}", path.display()) };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == SPECTRUM_HEADER => {}
        Some((i, h)) => return Err(bad(i + 1, format!("expected header `{SPECTRUM_HEADER}`, found `{h}`"))),
        None => return Err(bad(1, "empty spectrum file".into())),
    }
    if !text.ends_with('\n') {
        return Err(bad(text.lines().count(), "file is truncated (no final newline)".into()));
    }
    let mut axis = Vec::new();
    let mut values = Vec::new();
    for (i, l) in lines {
        let cols: Vec<&str> = l.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(i + 1, format!("expected 4 columns, found {}", cols.len())));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(i + 1, format!("`{s}` is not a number")));
        axis.push(parse(cols[0])? * 2.0 * std::f64::consts::PI * 1e6);
        values.push(Complex::new(parse(cols[1])?, parse(cols[2])?));
    }
    let meta = SpectrumMeta { frame: FrameChoice::SqueezeFrame, axis: SweepAxis::QubitDrive, drive: "target".into(), params_digest: String::new(), idler_ratio: None };
    Spectrum::new(axis, values, meta).map_err(|e| bad(1, e.to_string()))
}

fn param_name(p: FitParam) -> &'static str {
    match p {
        FitParam::NTh => "n_th",
        FitParam::DriveAmplitude => "drive_amplitude",
        FitParam::KappaE => "kappa_e",
        FitParam::QubitDrive => "qubit_drive",
        FitParam::ProbeAmplitude => "probe_amplitude",
    }
}

/// Config units: `n_th` is dimensionless, the rest are cyclic MHz.
fn param_scale(p: FitParam) -> f64 {
    match p {
        FitParam::NTh => 1.0,
        _ => to_mhz(1.0),
    }
}

pub fn fit(ctx: &RunContext, target: Option<&Path>) -> CliResult<PathBuf> {
    let cfg = &ctx.config;
    let spec = cfg
        .fit
        .as_ref()
        .ok_or_else(|| CliError::Config { section: Some("fit".into()), key: None, line: None, message: "fit needs a [fit] section".into() })?;
    let target = match (target, &spec.target) {
        (Some(t), _) => t.to_path_buf(),
        (None, Some(t)) if t.is_relative() => ctx.config_path.parent().unwrap_or(Path::new(".")).join(t),
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(CliError::at("fit", "target", None, "no target spectrum (set `target` or pass --target)")),
    };
    let observed = read_spectrum_csv(&target)?;
    let target_digest = sha256_hex(&fs::read(&target).map_err(|e| CliError::io(&target, e))?);

    let amplitude = match cfg.drive {
        DriveKind::Coherent { amplitude } | DriveKind::Squeezed { amplitude } => amplitude,
        _ => 0.0,
    };
    let mut problem = FitProblem::new(observed, spec.family, cfg.system, ctx.sweep_options()?);
    problem.drive_amplitude = amplitude;
    problem.simplex = SimplexOptions {
        max_iterations: spec.max_iterations,
        restarts: spec.restarts,
        seed: ctx.seed,
        xtol: spec.xtol,
        ftol_abs: spec.ftol,
        ..problem.simplex
    };
    for &(param, lo, hi, init) in &spec.free {
        problem = problem.with_free(param, lo, hi, init);
    }
    let result = fit_spectrum(&problem)?;

    let mut out = OutputSet::new(&ctx.out_dir, &ctx.digest)?;
    let params: serde_json::Map<String, Value> =
        result.params.iter().map(|(p, v)| (param_name(*p).to_string(), json!(v * param_scale(*p)))).collect();
    let std_error: serde_json::Map<String, Value> = match &result.covariance {
        Some(c) => result
            .params
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (param_name(*p).to_string(), json!(c[i][i].max(0.0).sqrt() * param_scale(*p))))
            .collect(),
        None => serde_json::Map::new(),
    };
    out.step("fit", json!({ "evaluations": result.evaluations, "residual": result.residual, "iterations_logged": result.log.len() }));
    let x: Vec<f64> = result.params.iter().map(|(_, v)| *v).collect();
    if ctx.format.csv() {
        let model = problem.model_spectrum(&x)?;
        out.write_text("fit_model.csv", &output::spectrum_csv(&out.digest, &model))?;
    }
    out.write_json(
        "fit.json",
        json!({
            "family": spec.family,
            "units": { "n_th": "dimensionless", "other": "MHz" },
            "params": params,
            "std_error": std_error,
            "at_bound": result.at_bound.iter().map(|p| param_name(*p)).collect::<Vec<_>>(),
            "residual": result.residual,
            "evaluations": result.evaluations,
            "seed": result.seed,
            "target_sha256": target_digest,
        }),
    )?;
    out.finish("fit", ctx.seed, &ctx.timestamp)
}

pub fn calibrate(ctx: &RunContext) -> CliResult<PathBuf> {
    let cfg = &ctx.config;
    let p = &cfg.system;
    let c = cfg.calibration;
    let traces = TraceOptions { cavity_dim: c.cavity_dim, ramsey_detuning: c.ramsey_detuning, duration: c.duration, samples: c.samples };
    let report = calibration_report(p, c.traces.then_some(&traces))?;
    let d = report.dressed;
    let mut body = json!({
        "dressed_mhz": {
            "omega_0_plus": to_mhz(d.omega_0_plus),
            "omega_0_minus": to_mhz(d.omega_0_minus),
            "omega_1_plus": to_mhz(d.omega_1_plus),
            "omega_1_minus": to_mhz(d.omega_1_minus),
        },
        "omega_0_degenerate": d.omega_0_plus == d.omega_0_minus,
        "gamma_th_per_s": report.gamma_th,
        "autler_townes_pair_mhz": [to_mhz(report.autler_townes_pair.0), to_mhz(report.autler_townes_pair.1)],
        "autler_townes_drive_mhz": to_mhz(p.omega_q - 2.0 * p.chi),
    });
    if let Some(r) = report.relaxation {
        body["relaxation"] = json!({ "tau_us": r.tau * 1e6, "amplitude": r.amplitude, "offset": r.offset, "residual": r.residual });
    }
    if let Some(r) = report.ramsey {
        body["ramsey"] = json!({
            "frequency_mhz": r.fit.frequency / 1e6,
            "t2_simulated_us": r.fit.t2 * 1e6,
            "t2_formula_us": r.t2_formula * 1e6,
            "gamma_th_simulated_per_s": r.gamma_th_simulated,
            "gamma_th_formula_per_s": thermal_dephasing_rate(p),
            "residual": r.fit.residual,
        });
    }
    let mut out = OutputSet::new(&ctx.out_dir, &ctx.digest)?;
    out.step("calibration", json!({ "traces": c.traces, "samples": c.samples, "cavity_dim": c.cavity_dim }));
    out.write_json("calibration.json", body)?;
    out.finish("calibrate", ctx.seed, &ctx.timestamp)
}

/// Checks an output directory against a config. Returns the report and the
/// number of mismatches.
pub fn verify(config_bytes: &[u8], dir: &Path) -> CliResult<(Value, usize)> {
    let digest = sha256_hex(config_bytes);
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| CliError::io(&mpath, e))?;
    let manifest: Value = serde_json::from_str(&text).map_err(|e| CliError::io(&mpath, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    let mut mismatches = 0;
    let manifest_ok = manifest["config_digest"].as_str() == Some(digest.as_str());
    mismatches += usize::from(!manifest_ok);
    let mut files = Vec::new();
    for entry in manifest["outputs"].as_array().into_iter().flatten() {
        let name = entry["file"].as_str().unwrap_or_default();
        let path = dir.join(name);
        let (embedded_ok, content_ok) = match fs::read(&path) {
            Ok(bytes) => (
                embedded_digest(name, &bytes).as_deref() == Some(digest.as_str()),
                entry["sha256"].as_str() == Some(sha256_hex(&bytes).as_str()),
            ),
            Err(_) => (false, false),
        };
        mismatches += usize::from(!embedded_ok) + usize::from(!content_ok);
        files.push(json!({ "file": name, "embedded_digest_ok": embedded_ok, "content_ok": content_ok }));
    }
    let report = json!({
        "config_digest": digest,
        "manifest_digest": manifest["config_digest"],
        "manifest_ok": manifest_ok,
        "files": files,
        "ok": mismatches == 0,
    });
    Ok((report, mismatches))
}
