//! Mode pipelines and the exit-status contract.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;

use super::config::{BoundaryChoice, ExperimentConfig, Mode};
use super::output::{OutputDir, Table};
use crate::bounds::{self, negative, BoundId, BoundReport, Confidence, Verdict};
use crate::cells;
use crate::disorder::{sample_field, PotentialField};
use crate::dynamics::{self, EnergyWindow, HatBoundary, HatOptions, PoolBank, TransportReport};
use crate::error::{Error, Result};
use crate::green::{self, Boundary, ComplexEnergy};
use crate::population::{self, snapshot, GreenPool, PhaseOptions};
use crate::rng::derive_seed;
use crate::stats::{Accumulator, MomentEstimate};
use crate::tree::TreeGeometry;

/// Default output root when neither `--out` nor `output_dir` is given.
pub const OUT_ENV: &str = "BETHE_TRANSPORT_OUT";
pub const DEFAULT_OUT: &str = "bethe-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Command-line overrides. Flags win over file values; the output root falls back
/// to `output_dir`, then to `$BETHE_TRANSPORT_OUT`, then to `./bethe-out`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub message: Option<String>,
}

#[derive(Default)]
struct Status {
    failed: usize,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: String,
    mode: Mode,
    seed: u64,
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    flags: &'a RunOptions,
    started_unix_s: f64,
    wall_time_s: f64,
    status: &'static str,
    exit_code: i32,
    error: Option<String>,
    failed_checks: usize,
    notes: &'a [String],
    files: &'a [String],
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

/// Output root after applying the precedence rules.
pub fn output_root(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn exit_code_of(e: &Error) -> i32 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_INVALID
    }
}

/// Runs `mode` and writes `<out>/<mode>/`.
pub fn run(mode: Mode, opts: &RunOptions) -> RunOutcome {
    let fail = |e: Error| RunOutcome { exit_code: exit_code_of(&e), out_dir: None, message: Some(e.to_string()) };
    let mut cfg = match load_config(&opts.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    cfg.mode = Some(mode);
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Err(e) = cfg.validate() {
        return fail(e);
    }
    if opts.threads == Some(0) {
        return fail(Error::config("threads", "must be at least 1"));
    }
    let root = output_root(&cfg, opts).join(mode.as_str());
    // the output location is not part of the experiment
    let hash = ExperimentConfig { output_dir: None, ..cfg.clone() }.hash();
    let mut out = match OutputDir::create(&root, &hash, cfg.seed, opts.force) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let result = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(mode, &cfg, &mut out))),
        None => dispatch(mode, &cfg, &mut out),
    };
    let (exit_code, status, error, st) = match result {
        Ok(st) if st.failed > 0 => (EXIT_CHECK_FAILED, "check-failed", None, st),
        Ok(st) => (EXIT_OK, "ok", None, st),
        Err(e) => (exit_code_of(&e), "aborted", Some(e.to_string()), Status::default()),
    };
    let manifest = Manifest {
        tool: "bethe-transport",
        version: format!("v{}", env!("CARGO_PKG_VERSION")),
        mode,
        seed: cfg.seed,
        config_hash: &hash,
        config: &cfg,
        flags: opts,
        started_unix_s: started,
        wall_time_s: clock.elapsed().as_secs_f64(),
        status,
        exit_code,
        error: error.clone(),
        failed_checks: st.failed,
        notes: &st.notes,
        files: out.written(),
    };
    let mut message = error;
    if let Err(e) = out.manifest(&manifest) {
        message.get_or_insert_with(|| format!("cannot write manifest: {e}"));
    }
    if message.is_none() && st.failed > 0 {
        message = Some(format!("{} check(s) failed", st.failed));
    }
    RunOutcome { exit_code, out_dir: Some(root), message }
}

fn dispatch(mode: Mode, cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    match mode {
        Mode::GreenValidate => green_validate(cfg, out),
        Mode::PoolRun => pool_run(cfg, out),
        Mode::PhaseMap => phase_map(cfg, out),
        Mode::DynamicsRun => dynamics_run(cfg, out),
        Mode::HatpRun => hatp_run(cfg, out),
        Mode::BoundsCheck => bounds_check(cfg, out),
        Mode::Theorem1Scan => theorem1_mode(cfg, out),
    }
}

/// Disorder ensemble shared by every field-based mode.
pub fn ensemble(cfg: &ExperimentConfig, geometry: &TreeGeometry) -> Result<Vec<PotentialField>> {
    (0..cfg.samples.fields as u64)
        .map(|m| sample_field(&cfg.distribution, geometry, derive_seed(cfg.seed, m)))
        .collect()
}

fn zeta_grid(cfg: &ExperimentConfig) -> Result<Vec<ComplexEnergy>> {
    let mut out = Vec::new();
    for &e in &cfg.spectral.energies {
        for &eta in &cfg.spectral.etas {
            out.push(ComplexEnergy::new(e, eta).map_err(|err| Error::config("spectral", err.to_string()))?);
        }
    }
    Ok(out)
}

fn confidence(cfg: &ExperimentConfig) -> Confidence {
    Confidence { sigma: cfg.bounds.sigma, inequality_sigma: cfg.bounds.inequality_sigma }
}

fn green_validate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let geometry = cfg.geometry()?;
    if geometry.vertex_count() > green::DENSE_LIMIT {
        return Err(Error::config(
            "geometry.depth",
            format!("the dense comparison is limited to {} vertices", green::DENSE_LIMIT),
        ));
    }
    let zetas = zeta_grid(cfg)?;
    let mut table = Table::new(&[
        "member[count]",
        "field_seed[count]",
        "energy[J]",
        "eta[J]",
        "g00_re[1/J]",
        "g00_im[1/J]",
        "oracle_g00_re[1/J]",
        "oracle_g00_im[1/J]",
        "max_rel_error[1]",
    ]);
    let mut worst = 0.0f64;
    for (m, field) in ensemble(cfg, &geometry)?.iter().enumerate() {
        for &z in &zetas {
            let col = green::resolvent_column(field, &geometry, z, Boundary::Zero)?;
            let dense = green::dense_oracle(field, &geometry, z)?;
            let err = green::max_relative_error(&col, &dense);
            worst = worst.max(err);
            table.row(cells![
                m,
                field.seed,
                z.energy(),
                z.eta(),
                col.g00.re,
                col.g00.im,
                dense.g00.re,
                dense.g00.im,
                err
            ]);
        }
    }
    out.csv("oracle_diff.csv", &table)?;
    let tol = cfg.tolerances.oracle_rel;
    let pass = worst < tol;
    out.json(
        "summary.json",
        &serde_json::json!({ "max_rel_error": worst, "tolerance": tol, "rows": table.len(), "pass": pass }),
    )?;
    let mut st = Status::default();
    if !pass {
        st.failed = 1;
        st.notes.push(format!("max relative error {worst:e} exceeds {tol:e}"));
    }
    Ok(st)
}

fn pool_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let k = cfg.geometry.branching;
    let mut st = Status::default();
    let mut table = Table::new(&[
        "quantity",
        "value[1]",
        "std_error[1]",
        "n[count]",
        "zeta_re[J]",
        "zeta_im[J]",
        "parameter[1]",
    ]);
    let mut meta = Vec::new();
    for (i, z) in zeta_grid(cfg)?.into_iter().enumerate() {
        let mut pool =
            GreenPool::equilibrated(cfg.distribution.clone(), k, z, cfg.pool.size, cfg.pool.burn_in, cfg.seed)?;
        let stationarity =
            if cfg.pool.sweeps >= 2 { Some(pool.stationarity(cfg.pool.sweeps / 2)?) } else { None };
        if let Some(r) = stationarity.filter(|r| !r.stationary) {
            st.notes.push(format!(
                "pool {i} at zeta = {} + {}i drifted (mean {:e} vs {:e})",
                z.energy(),
                z.eta(),
                r.mean_drift,
                r.mean_tolerance
            ));
        }
        let (zr, zi) = (z.energy(), z.eta());
        let mut push = |q: &str, v: f64, se: f64, n: usize, p: f64| table.row(cells![q, v, se, n, zr, zi, p]);
        let im = pool.im_stats();
        push("pool_mean_im_gamma", im.mean_im, im.std_error(), im.n, f64::NAN);
        push("pool_min_im_gamma", im.min_im, f64::NAN, im.n, f64::NAN);
        let samples = pool.root_samples(cfg.samples.root, 0)?;
        let re = MomentEstimate::from_samples(samples.iter().map(|g| g.re));
        let img = MomentEstimate::from_samples(samples.iter().map(|g| g.im));
        push("g00_re", re.mean, re.std_error, re.n_samples, f64::NAN);
        push("g00_im", img.mean, img.std_error, img.n_samples, f64::NAN);
        for x in [1e-3, 1e-2, 1e-1] {
            let c = population::cdf_im(&samples, x);
            push("cdf_im", c.mean, c.std_error, c.n_samples, x);
        }
        for p in [1.0, 2.0] {
            let m = population::inverse_moment(&samples, p);
            push(
                if m.heavy_tail { "inverse_moment_heavy_tail" } else { "inverse_moment" },
                m.estimate.mean,
                m.estimate.std_error,
                m.estimate.n_samples,
                p,
            );
        }
        let tail = population::power_law_tail(&samples);
        push("tail_gamma", tail.gamma, tail.gamma_std_error, samples.len(), f64::NAN);

        let name = format!("pool_{i}.btpool");
        let path = out.path().join(&name);
        snapshot::save(&pool, &path)?;
        out.register(&name);
        out.register(&format!("{name}.json"));
        meta.push(serde_json::json!({
            "snapshot": name,
            "zeta": z,
            "sweeps_done": pool.sweeps_done(),
            "stationarity": stationarity,
            "tail_status": tail.status,
        }));
    }
    out.csv("estimators.csv", &table)?;
    out.json("pools.json", &meta)?;
    Ok(st)
}

fn phase_map(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let opts = PhaseOptions {
        eta: cfg.phase.eta,
        s_grid: cfg.phase.s_grid.clone(),
        lengths: cfg.samples.lengths.clone(),
        path_samples: cfg.samples.paths,
        pool_size: cfg.pool.size,
        burn_in: cfg.pool.burn_in,
        cdf_probe: cfg.phase.cdf_probe,
        root_samples: cfg.samples.root,
        seed: cfg.seed,
    };
    let mut verdicts = Vec::new();
    let mut table = Table::new(&[
        "energy[J]",
        "eta[J]",
        "phase",
        "estimate[1]",
        "std_error[1]",
        "margin[sigma]",
        "cdf_probe[1/J]",
        "cdf[1]",
        "cdf_std_error[1]",
    ]);
    let mut probes = Table::new(&["energy[J]", "s[1]", "free_energy[1]", "std_error[1]", "excess[1]"]);
    for &e in &cfg.spectral.energies {
        let v = population::phase_classify(&cfg.distribution, cfg.geometry.branching, e, &opts)?;
        let phase = serde_json::to_value(v.phase)?.as_str().unwrap_or_default().to_string();
        table.row(cells![
            e,
            v.eta,
            phase,
            v.estimate,
            v.std_error,
            v.margin,
            opts.cdf_probe,
            v.cdf_at_probe.mean,
            v.cdf_at_probe.std_error
        ]);
        for p in &v.probes {
            probes.row(cells![e, p.s, p.free_energy, p.std_error, p.excess]);
        }
        verdicts.push(v);
    }
    out.csv("phase.csv", &table)?;
    out.csv("probes.csv", &probes)?;
    out.json("phase.json", &verdicts)?;
    Ok(Status::default())
}

fn write_transport(out: &mut OutputDir, report: &TransportReport) -> Result<()> {
    let mut profiles = Table::new(&["time[1/J]", "shell[count]", "mass[1]", "contaminated"]);
    for (i, p) in report.profiles.iter().enumerate() {
        for (n, m) in p.mass.iter().enumerate() {
            profiles.row(cells![report.times[i], n, *m, report.contaminated[i]]);
        }
    }
    out.csv("profiles.csv", &profiles)?;
    let mut summary = Table::new(&["quantity", "time[1/J]", "parameter[1]", "value[1]"]);
    for s in &report.moments {
        for (i, v) in s.values.iter().enumerate() {
            summary.row(cells!["moment", report.times[i], s.beta, *v]);
        }
    }
    for s in &report.tails {
        for i in 0..report.times.len() {
            summary.row(cells!["front_tail_mean", report.times[i], s.v, s.mean[i]]);
            summary.row(cells!["front_tail_max", report.times[i], s.v, s.max[i]]);
        }
    }
    if let Some(f) = &report.ballistic_fit {
        summary.row(cells!["ballistic_slope", f64::NAN, f64::NAN, f.slope]);
        summary.row(cells!["ballistic_ci_low", f64::NAN, f64::NAN, f.ci_low]);
        summary.row(cells!["ballistic_ci_high", f64::NAN, f64::NAN, f.ci_high]);
    }
    summary.row(cells!["max_norm_drift", f64::NAN, f64::NAN, report.max_norm_drift]);
    out.csv("summary.csv", &summary)?;
    out.json("transport.json", report)
}

fn transport(cfg: &ExperimentConfig) -> Result<TransportReport> {
    let geometry = cfg.geometry()?;
    let fields = ensemble(cfg, &geometry)?;
    let t = &cfg.time;
    dynamics::run_transport(&fields, &geometry, &t.grid, &t.betas, &t.velocities, t.tolerance)
}

fn dynamics_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let report = transport(cfg)?;
    let mut st = Status::default();
    let n = report.contaminated.iter().filter(|c| **c).count();
    if n > 0 {
        st.notes.push(format!("{n} time points carry boundary mass and are excluded from fits"));
    }
    write_transport(out, &report)?;
    Ok(st)
}

fn hat_options(cfg: &ExperimentConfig) -> HatOptions {
    HatOptions { quad_nodes: cfg.hat.quad_nodes, max_nodes: cfg.hat.max_nodes, rel_tol: cfg.hat.rel_tol }
}

/// Pool bank for a pool-sampled truncation boundary, if configured.
pub fn boundary_bank(cfg: &ExperimentConfig) -> Option<PoolBank> {
    (cfg.hat.boundary == BoundaryChoice::Pool).then(|| {
        PoolBank::new(
            cfg.distribution.clone(),
            cfg.geometry.branching,
            cfg.hat.boundary_pool_size,
            cfg.hat.boundary_burn_in,
            derive_seed(cfg.seed, u64::MAX),
        )
    })
}

fn window(cfg: &ExperimentConfig) -> Result<EnergyWindow> {
    let [a, b] = cfg.spectral.window;
    EnergyWindow::new(a, b).map_err(|e| Error::config("spectral.window", e.to_string()))
}

fn hatp_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let geometry = cfg.geometry()?;
    let fields = ensemble(cfg, &geometry)?;
    let window = window(cfg)?;
    let opts = hat_options(cfg);
    let bank = boundary_bank(cfg);
    let boundary = bank.as_ref().map_or(HatBoundary::Zero, HatBoundary::Pool);
    let mut st = Status::default();
    let mut profiles = Table::new(&["eta[J]", "shell[count]", "mass[1]", "std_error[1]", "contaminated"]);
    let mut summary = Table::new(&["eta[J]", "quantity", "parameter[1]", "value[1]", "std_error[1]"]);
    for &eta in &cfg.spectral.etas {
        let mut shells = vec![Accumulator::default(); geometry.depth() + 1];
        let mut moments = vec![Accumulator::default(); cfg.time.betas.len()];
        let mut lingering = vec![Accumulator::default(); cfg.hat.b_grid.len()];
        let (mut contaminated, mut unconverged, mut nodes) = (false, 0usize, 0usize);
        for field in &fields {
            let hat = dynamics::hat_distribution(field, &geometry, &window, eta, &opts, boundary)?;
            contaminated |= hat.profile.contaminated();
            unconverged += usize::from(!hat.converged);
            nodes = nodes.max(hat.nodes);
            for (a, m) in shells.iter_mut().zip(&hat.profile.mass) {
                a.push(*m);
            }
            for (a, &beta) in moments.iter_mut().zip(&cfg.time.betas) {
                a.push(dynamics::hat_moments(&hat.profile, beta));
            }
            for (a, &b) in lingering.iter_mut().zip(&cfg.hat.b_grid) {
                a.push(dynamics::lingering(&hat.profile, b / eta)?);
            }
        }
        for (n, a) in shells.iter().enumerate() {
            let e = a.estimate();
            profiles.row(cells![eta, n, e.mean, e.std_error, contaminated]);
        }
        for (a, &beta) in moments.iter().zip(&cfg.time.betas) {
            let e = a.estimate();
            summary.row(cells![eta, "hat_moment", beta, e.mean, e.std_error]);
        }
        for (a, &b) in lingering.iter().zip(&cfg.hat.b_grid) {
            let e = a.estimate();
            summary.row(cells![eta, "lingering", b, e.mean, e.std_error]);
        }
        summary.row(cells![eta, "quadrature_nodes", f64::NAN, nodes as f64, f64::NAN]);
        summary.row(cells![eta, "unconverged", f64::NAN, unconverged as f64, f64::NAN]);
        if contaminated {
            st.notes.push(format!("eta = {eta}: boundary mass above the contamination limit"));
        }
        if unconverged > 0 {
            st.notes.push(format!("eta = {eta}: {unconverged} profiles stopped at the quadrature cap"));
        }
    }
    out.csv("hat_profiles.csv", &profiles)?;
    out.csv("hat_summary.csv", &summary)?;
    Ok(st)
}

fn theorem1_data(cfg: &ExperimentConfig) -> Result<bounds::Theorem1Data> {
    let geometry = cfg.geometry()?;
    let fields = ensemble(cfg, &geometry)?;
    let bank = boundary_bank(cfg);
    let boundary = bank.as_ref().map_or(HatBoundary::Zero, HatBoundary::Pool);
    bounds::theorem1_scan(
        &fields,
        &geometry,
        &window(cfg)?,
        &cfg.hat.b_grid,
        &cfg.spectral.etas,
        &hat_options(cfg),
        boundary,
    )
}

fn write_reports(out: &mut OutputDir, reports: &[BoundReport], st: &mut Status) -> Result<()> {
    out.json("bounds.json", &reports)?;
    out.text("bounds.txt", &bounds::render_table(reports))?;
    for r in reports {
        if r.verdict == Verdict::Fail {
            st.failed += 1;
            st.notes.push(format!("{} failed with margin {:.3}", r.bound_id.name(), r.margin));
        }
    }
    Ok(())
}

fn theorem1_mode(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let mut data = theorem1_data(cfg)?;
    if cfg.bounds.negative_control {
        data = negative::theorem1(&data);
    }
    let mut table =
        Table::new(&["eta[J]", "b[1]", "radius[count]", "safe", "lingering[1]", "std_error[1]", "fields[count]"]);
    for p in &data.points {
        table.row(cells![p.eta, p.b, p.radius, p.safe, p.lingering.mean, p.lingering.std_error, p.lingering.n_samples]);
    }
    out.csv("lingering.csv", &table)?;
    let mut st = Status::default();
    if cfg.bounds.negative_control {
        st.notes.push("negative control: inputs were perturbed to violate the bound".into());
    }
    let report = bounds::check_theorem1(&data, &confidence(cfg));
    write_reports(out, &[report], &mut st)?;
    Ok(st)
}

/// Pools and root samples per spectral point, built on demand.
struct Spectral<'a> {
    cfg: &'a ExperimentConfig,
    bank: PoolBank,
    samples: BTreeMap<(u64, u64), Arc<Vec<Complex64>>>,
}

impl<'a> Spectral<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        let bank = PoolBank::new(
            cfg.distribution.clone(),
            cfg.geometry.branching,
            cfg.pool.size,
            cfg.pool.burn_in,
            cfg.seed,
        );
        Self { cfg, bank, samples: BTreeMap::new() }
    }

    fn pool(&self, z: ComplexEnergy) -> Result<Arc<GreenPool>> {
        self.bank.get(z)
    }

    fn root(&mut self, z: ComplexEnergy) -> Result<Arc<Vec<Complex64>>> {
        let key = (z.energy().to_bits(), z.eta().to_bits());
        if let Some(s) = self.samples.get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.pool(z)?.root_samples(self.cfg.samples.root, 0)?);
        self.samples.insert(key, s.clone());
        Ok(s)
    }
}

fn bounds_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Status> {
    let conf = confidence(cfg);
    let neg = cfg.bounds.negative_control;
    let k = cfg.geometry.branching;
    let zetas = zeta_grid(cfg)?;
    let mut spectral = Spectral::new(cfg);
    let mut reports = Vec::new();
    let mut st = Status::default();
    if neg {
        st.notes.push("negative control: inputs were perturbed to violate each bound".into());
    }
    let mut checks = cfg.bounds.checks.clone();
    checks.sort();
    checks.dedup();
    if checks.contains(&BoundId::Lemma6Item1) && checks.contains(&BoundId::Lemma6Item2) {
        checks.retain(|c| *c != BoundId::Lemma6Item2);
    }
    for id in checks {
        match id {
            BoundId::BallisticTail => {
                let cert = bounds::ballistic_certificate(k)?;
                let mut report = transport(cfg)?;
                if neg {
                    report = negative::ballistic_tail(&report, &cert);
                }
                reports.push(bounds::check_ballistic_tail(&report, &cert));
            }
            BoundId::SecondMomentDecay => {
                let eta = cfg.spectral.etas[0];
                let mut series = Vec::new();
                for &e in &cfg.spectral.energies {
                    let pool = spectral.pool(ComplexEnergy::new(e, eta)?)?;
                    series.push(bounds::second_moment_series(&pool, &cfg.samples.lengths, cfg.samples.paths)?);
                }
                if neg {
                    series = negative::second_moment(&series);
                }
                reports.push(bounds::check_second_moment_decay(&series, &conf));
            }
            BoundId::FreeEnergyApriori => {
                for &z in &zetas {
                    let pool = spectral.pool(z)?;
                    for (j, &s) in cfg.bounds.free_energy_s.iter().enumerate() {
                        let mut fe =
                            population::free_energy(&pool, s, &cfg.samples.lengths, cfg.samples.paths, j as u64)?;
                        if neg {
                            fe = negative::free_energy(&fe, k);
                        }
                        reports.push(bounds::check_free_energy_apriori(&fe, k, &conf));
                    }
                }
            }
            BoundId::Wegner => {
                let c_ref = cfg.distribution.density_sup();
                for &z in &zetas {
                    let samples = spectral.root(z)?;
                    let mut r = bounds::check_wegner(&samples, z, c_ref, &conf);
                    if neg {
                        let dos = r.estimates["smoothed_dos"];
                        r = bounds::check_wegner(&samples, z, negative::wegner_reference(dos), &conf);
                    }
                    reports.push(r);
                }
            }
            BoundId::Lemma6Item1 | BoundId::Lemma6Item2 => {
                let z = zetas[0];
                let samples = spectral.root(z)?;
                let mut pts = bounds::lemma6_points(&samples, &cfg.distribution, z, k, &cfg.bounds.lemma_x)?;
                if neg {
                    pts = negative::lemma6(&pts, &conf);
                }
                let (a, b) = bounds::check_lemma6(&pts, &conf);
                reports.push(a);
                reports.push(b);
            }
            BoundId::Theorem1Lingering => {
                let mut data = theorem1_data(cfg)?;
                if neg {
                    data = negative::theorem1(&data);
                }
                reports.push(bounds::check_theorem1(&data, &conf));
            }
            BoundId::FPowerLaw => {
                for &z in &zetas {
                    let mut tail = population::power_law_tail(&spectral.root(z)?);
                    if neg {
                        tail = negative::f_power_law(&tail);
                    }
                    reports.push(bounds::check_f_power_law(&tail, &conf));
                }
            }
        }
    }
    write_reports(out, &reports, &mut st)?;
    Ok(st)
}
