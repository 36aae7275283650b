//! Subcommand implementations. Each writes CSV files whose header holds the
//! effective configuration (command-line overrides folded in) and a canonical
//! command string without file paths, so a rerun from the header reproduces
//! the file apart from its timestamp line.

use std::path::{Path, PathBuf};

use num_complex::Complex64;

use kurograph_core::bifurcation::{
    finite_n_setup, fit_sqrt_law, predict_amplitude, sweep as run_sweep, BranchData, Engine, FiniteNParams,
    GalerkinParams, PointStatus,
};
use kurograph_core::criticality::{branch_point, critical_couplings, CriticalReport};
use kurograph_core::dynamics::{
    classify_locked, integrate_observed, order_parameter, uniform_phases, Coupling, OscillatorEnsemble,
};
use kurograph_core::graphon::{sample_weight_matrix, GridScheme};
use kurograph_core::meanfield::{
    evolve_linearized, evolve_nonlinear, l2_norm, mean_modulus, GalerkinGrid, GalerkinState, DEFAULT_SEED_AMPLITUDE,
};
use kurograph_core::spectral::{nystrom_eigs, SpectralDecomposition};

use crate::config::{parse_config, parse_config_str, Init, RunConfig};
use crate::output::{config_from_header, header, header_value, num, parse_grid, parse_interval, read_csv, Csv};
use crate::{
    svg, BranchArgs, BranchCompareArgs, CliError, CliResult, CriticalArgs, DcurveArgs, EngineArg, MeanfieldArgs,
    MeanfieldMode, SimulateArgs, SpectrumArgs, SweepArgs,
};

/// Default seed amplitude of finite-N coherent initial phases.
const FINITE_N_SEED_AMPLITUDE: f64 = 0.05;

pub(crate) fn load(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let (cfg, warnings) = parse_config(p)?;
            for w in warnings {
                eprintln!("kurograph: warning: {w}");
            }
            Ok(cfg)
        }
    }
}

/// `path` relative to the configured output directory.
pub(crate) fn resolve(cfg: &RunConfig, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        cfg.output_dir.join(path)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Decomposition of the kernel sampled at `n` nodes with the configured grid.
pub(crate) fn decompose(cfg: &RunConfig, n: usize, k: usize) -> CliResult<SpectralDecomposition> {
    let matrix = sample_weight_matrix(&cfg.kernel()?, n, cfg.scheme())?;
    Ok(nystrom_eigs(&matrix, k.min(n))?)
}

/// Decomposition on the Galerkin x-grid, the reference for thresholds and
/// amplitude predictions.
pub(crate) fn reference_decomposition(cfg: &RunConfig) -> CliResult<SpectralDecomposition> {
    let n = cfg.engine.galerkin_n;
    let matrix = sample_weight_matrix(&cfg.kernel()?, n, GridScheme::Midpoint)?;
    Ok(nystrom_eigs(&matrix, cfg.engine.eig_k.min(n))?)
}

pub fn spectrum(args: &SpectrumArgs) -> CliResult<SpectralDecomposition> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(n) = args.n {
        cfg.engine.n = n;
    }
    if let Some(k) = args.k {
        cfg.engine.eig_k = k;
    }
    let (n, k) = (cfg.engine.n, cfg.engine.eig_k);
    if n == 0 || k == 0 || k > n {
        return Err(usage(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let d = decompose(&cfg, n, k)?;
    let extra = vec![
        format!("mu_max: {}", d.mu_max),
        format!("mu_min: {}", d.mu_min),
        format!(
            "multiplicity_of_max: {}",
            d.multiplicity_of_max.map_or("none".into(), |m| m.to_string())
        ),
        format!("discarded_range: {} {}", num(d.discarded_range.0), num(d.discarded_range.1)),
        "rows: part x holds the grid; part re/im hold eigenfunction samples (im only when nonzero)".into(),
    ];
    let mut columns: Vec<String> = vec!["index".into(), "eigenvalue".into(), "part".into()];
    columns.extend((1..=n).map(|i| format!("w_{i}")));
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::create(
        &resolve(&cfg, &args.out),
        &header("kurograph spectrum", &cfg, &extra),
        &cols,
    )?;
    let mut row = vec![String::new(), String::new(), "x".into()];
    row.extend(d.grid.iter().map(|x| num(*x)));
    csv.row(&row)?;
    for (idx, (mu, w)) in d.eigenvalues.iter().zip(&d.eigenfunctions).enumerate() {
        let mut re = vec![idx.to_string(), num(*mu), "re".into()];
        re.extend(w.iter().map(|v| num(v.re)));
        csv.row(&re)?;
        if w.iter().any(|v| v.im != 0.0) {
            let mut im = vec![idx.to_string(), num(*mu), "im".into()];
            im.extend(w.iter().map(|v| num(v.im)));
            csv.row(&im)?;
        }
    }
    csv.finish()?;
    Ok(d)
}

pub fn critical(args: &CriticalArgs) -> CliResult<CriticalReport> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(n) = args.n {
        cfg.engine.n = n;
    }
    if cfg.engine.n == 0 {
        return Err(usage("n must be positive"));
    }
    let d = decompose(&cfg, cfg.engine.n, cfg.engine.eig_k)?;
    let report = critical_couplings(&d, &cfg.model()?)?;
    let mult = report.multiplicity_of_max.map_or("none".into(), |m| m.to_string());
    let rows = [
        ("kc_plus", num(report.kc_plus)),
        ("kc_minus", report.kc_minus.to_string()),
        ("mu_max", report.mu_max.to_string()),
        ("mu_min", report.mu_min.to_string()),
        ("multiplicity_of_max", mult),
    ];
    for (key, value) in &rows {
        println!("{key} = {value}");
    }
    if let Some(out) = &args.out {
        let mut csv = Csv::create(
            &resolve(&cfg, out),
            &header("kurograph critical", &cfg, &[]),
            &["quantity", "value"],
        )?;
        for (key, value) in rows {
            csv.row(&[key.to_string(), value])?;
        }
        csv.finish()?;
    }
    Ok(report)
}

pub fn branch(args: &BranchArgs) -> CliResult<Vec<kurograph_core::criticality::BranchPoint>> {
    let cfg = load(args.config.as_deref())?;
    let grid = parse_grid(&args.k_grid).map_err(usage)?;
    let model = cfg.model()?;
    let mu = match args.mu {
        Some(mu) => mu,
        None => reference_decomposition(&cfg)?.mu_max.finite().ok_or_else(|| {
            CliError::Numerical(kurograph_core::Error::NoPositiveEigenvalue(
                "kernel has no positive eigenvalue; pass --mu".into(),
            ))
        })?,
    };
    let points = grid
        .iter()
        .map(|&k| branch_point(mu, k, &model))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::create(
        &resolve(&cfg, &args.out),
        &header(
            &format!("kurograph branch --mu {} --k-grid {}", num(mu), args.k_grid),
            &cfg,
            &[],
        ),
        &["K", "re_lambda", "im_lambda", "side", "residual"],
    )?;
    for p in &points {
        csv.row(&[
            num(p.k),
            num(p.lambda.re),
            num(p.lambda.im),
            p.side.to_string(),
            num(p.residual),
        ])?;
    }
    csv.finish()?;
    Ok(points)
}

pub fn dcurve(args: &DcurveArgs) -> CliResult<()> {
    let cfg = load(args.config.as_deref())?;
    let (re_spec, im_spec) = args
        .lambda_grid
        .split_once(',')
        .ok_or_else(|| usage("lambda grid must be re_a:re_b:steps,im_a:im_b:steps"))?;
    let re = parse_grid(re_spec).map_err(usage)?;
    let im = parse_grid(im_spec).map_err(usage)?;
    let model = cfg.model()?;
    let mut csv = Csv::create(
        &resolve(&cfg, &args.out),
        &header(&format!("kurograph dcurve --lambda-grid {}", args.lambda_grid), &cfg, &[]),
        &["re_lambda", "im_lambda", "re_d", "im_d"],
    )?;
    for &a in &re {
        for &b in &im {
            let d = model.d_continuation(Complex64::new(a, b))?;
            csv.row(&[num(a), num(b), num(d.re), num(d.im)])?;
        }
    }
    csv.finish()?;
    Ok(())
}

/// End state of a finite-N run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub k: f64,
    pub mean_h: f64,
    pub winding: i64,
    pub locked_fraction: f64,
}

pub(crate) fn finite_n_params(cfg: &RunConfig) -> FiniteNParams {
    FiniteNParams {
        n: cfg.engine.n,
        dt: cfg.engine.dt,
        t_end: cfg.engine.t,
        seed: cfg.seed,
        frequency_seed: cfg.freq.seed,
        scheme: cfg.scheme(),
        bernoulli: cfg.engine.bernoulli,
        seed_amplitude: cfg.engine.seed_amplitude.unwrap_or(FINITE_N_SEED_AMPLITUDE),
        sample_every: 0.5,
    }
}

/// Coupling and initial ensemble for the configured finite-N run.
pub(crate) fn finite_n_start(cfg: &RunConfig) -> CliResult<(Coupling, OscillatorEnsemble)> {
    let (coupling, mut ensemble) = finite_n_setup(&cfg.kernel()?, &cfg.model()?, &finite_n_params(cfg))?;
    if cfg.engine.init == Init::Uniform {
        ensemble.theta = uniform_phases(ensemble.n(), cfg.seed);
    }
    Ok((coupling, ensemble))
}

/// Final-state snapshot: position, frequency, phase, local field and lock flag.
pub(crate) fn write_snapshot(
    path: &Path,
    head: &str,
    ensemble: &OscillatorEnsemble,
    coupling: &Coupling,
    k: f64,
) -> CliResult<SimulationSummary> {
    let field = order_parameter(ensemble, coupling)?;
    let lock = classify_locked(ensemble, k, &field)?;
    let mut csv = Csv::create(path, head, &["i", "xi", "omega", "theta", "r", "phi", "locked"])?;
    let theta = ensemble.wrapped_phases();
    for i in 0..ensemble.n() {
        csv.row(&[
            i.to_string(),
            num(ensemble.grid[i]),
            num(ensemble.omega[i]),
            num(theta[i]),
            num(field.r[i]),
            num(field.phi[i]),
            u8::from(lock.locked_mask[i]).to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(SimulationSummary {
        k,
        mean_h: field.mean_modulus(),
        winding: lock.winding,
        locked_fraction: lock.locked_fraction(),
    })
}

pub fn simulate(args: &SimulateArgs) -> CliResult<SimulationSummary> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(n) = args.n {
        cfg.engine.n = n;
    }
    if let Some(t) = args.t {
        cfg.engine.t = t;
    }
    if let Some(dt) = args.dt {
        cfg.engine.dt = dt;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(stride) = args.stride {
        cfg.engine.stride = stride;
    }
    if cfg.engine.n == 0 || cfg.engine.stride == 0 {
        return Err(usage("n and stride must be positive"));
    }
    if !(cfg.engine.dt > 0.0 && cfg.engine.t >= 0.0) {
        return Err(usage("need dt > 0 and T >= 0"));
    }
    let k = args.k;
    let head = header(&format!("kurograph simulate --K {}", num(k)), &cfg, &[]);
    let (coupling, mut ensemble) = finite_n_start(&cfg)?;
    let n = ensemble.n();

    let mut columns: Vec<String> = vec!["t".into()];
    columns.extend((1..=n).map(|i| format!("theta_{i}")));
    let cols: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut traj = Csv::create(&resolve(&cfg, &args.out), &head, &cols)?;
    let mut summary = match &args.summary_out {
        Some(p) => Some(Csv::create(
            &resolve(&cfg, p),
            &head,
            &["t", "mean_h", "winding", "locked_fraction"],
        )?),
        None => None,
    };

    let mut io_error: Option<CliError> = None;
    let mut record = |e: &OscillatorEnsemble| -> CliResult<()> {
        let mut row = vec![num(e.t)];
        row.extend(e.wrapped_phases().into_iter().map(num));
        traj.row(&row)?;
        if let Some(s) = summary.as_mut() {
            let field = order_parameter(e, &coupling)?;
            let lock = classify_locked(e, k, &field)?;
            s.row(&[
                num(e.t),
                num(field.mean_modulus()),
                lock.winding.to_string(),
                num(lock.locked_fraction()),
            ])?;
        }
        Ok(())
    };
    record(&ensemble)?;
    let result = integrate_observed(
        &mut ensemble,
        k,
        &coupling,
        cfg.engine.dt,
        cfg.engine.t,
        cfg.engine.stride,
        |e| {
            if io_error.is_none() {
                if let Err(err) = record(e) {
                    io_error = Some(err);
                }
            }
        },
    );
    drop(record);
    if let Some(e) = io_error {
        return Err(e);
    }
    result?;
    traj.finish()?;
    if let Some(s) = summary {
        s.finish()?;
    }
    let summary = match &args.snapshot_out {
        Some(p) => write_snapshot(&resolve(&cfg, p), &head, &ensemble, &coupling, k)?,
        None => {
            let field = order_parameter(&ensemble, &coupling)?;
            let lock = classify_locked(&ensemble, k, &field)?;
            SimulationSummary {
                k,
                mean_h: field.mean_modulus(),
                winding: lock.winding,
                locked_fraction: lock.locked_fraction(),
            }
        }
    };
    println!(
        "K = {}: mean |h| = {}, winding = {}, locked fraction = {}",
        num(k),
        num(summary.mean_h),
        summary.winding,
        num(summary.locked_fraction)
    );
    Ok(summary)
}

/// Final values of a mean-field run.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanfieldSummary {
    pub times: Vec<f64>,
    pub mean_h: Vec<f64>,
    pub l2_h: Vec<f64>,
}

pub(crate) fn galerkin_grid(cfg: &RunConfig) -> CliResult<GalerkinGrid> {
    Ok(GalerkinGrid::new(
        &cfg.kernel()?,
        &cfg.model()?,
        cfg.engine.galerkin_n,
        cfg.engine.j,
        cfg.engine.beta,
    )?)
}

pub(crate) fn galerkin_dt(cfg: &RunConfig, grid: &GalerkinGrid) -> f64 {
    cfg.engine.galerkin_dt.unwrap_or_else(|| grid.stable_dt().min(0.02))
}

/// Linearized initial data `z₁(0) = e^{-ω²} w_max(x)`.
pub(crate) fn landau_initial(grid: &GalerkinGrid, d: &SpectralDecomposition) -> CliResult<Vec<Complex64>> {
    let w = d.w_max().ok_or_else(|| {
        CliError::Numerical(kurograph_core::Error::NoPositiveEigenvalue(
            "no positive eigenvalue for the initial profile".into(),
        ))
    })?;
    let n = grid.n();
    let z = GalerkinState::from_z1(grid, |om, _| (-om * om).exp());
    Ok(z.mode(1).iter().enumerate().map(|(idx, v)| v * w[idx % n]).collect())
}

pub fn meanfield(args: &MeanfieldArgs) -> CliResult<MeanfieldSummary> {
    let mut cfg = load(args.config.as_deref())?;
    if let Some(j) = args.j {
        cfg.engine.j = j;
    }
    if let Some(t) = args.t {
        cfg.engine.t = t;
    }
    if cfg.engine.j == 0 || cfg.engine.stride == 0 {
        return Err(usage("J and stride must be positive"));
    }
    let k = args.k;
    let mode = match args.mode {
        MeanfieldMode::Nonlinear => "nonlinear",
        MeanfieldMode::Linearized => "linearized",
    };
    let head = header(&format!("kurograph meanfield --K {} --mode {mode}", num(k)), &cfg, &[]);
    let grid = galerkin_grid(&cfg)?;
    let d = reference_decomposition(&cfg)?;
    let dt = galerkin_dt(&cfg, &grid);
    let t_end = cfg.engine.t;
    let stride = cfg.engine.stride;
    let mut csv = Csv::create(&resolve(&cfg, &args.out), &head, &["t", "mean_h", "max_sup", "l2_h"])?;
    let mut out = MeanfieldSummary {
        times: Vec::new(),
        mean_h: Vec::new(),
        l2_h: Vec::new(),
    };
    match args.mode {
        MeanfieldMode::Linearized => {
            let z1 = landau_initial(&grid, &d)?;
            let s = evolve_linearized(&z1, k, &grid, t_end, dt, stride)?;
            for i in 0..s.times.len() {
                csv.row(&[num(s.times[i]), num(s.mean_moduli[i]), num(s.sup_norms[i]), num(s.norms[i])])?;
            }
            out.times = s.times;
            out.mean_h = s.mean_moduli;
            out.l2_h = s.norms;
        }
        MeanfieldMode::Nonlinear => {
            if cfg.engine.j < 2 {
                return Err(usage("nonlinear mode needs J >= 2"));
            }
            let w = d.w_max().ok_or_else(|| {
                CliError::Numerical(kurograph_core::Error::NoPositiveEigenvalue(
                    "no positive eigenvalue to seed along".into(),
                ))
            })?;
            let eps = cfg.engine.seed_amplitude.unwrap_or(DEFAULT_SEED_AMPLITUDE);
            let mut state = GalerkinState::coherent_seed(&grid, w, eps)?;
            let mut rows: Vec<[f64; 4]> = Vec::new();
            let h0 = grid.apply_p(state.mode(1))?;
            let sup = |s: &GalerkinState| s.mode_sup_norms().into_iter().fold(0.0, f64::max);
            rows.push([0.0, mean_modulus(&h0), sup(&state), l2_norm(&h0)]);
            let result = evolve_nonlinear(&mut state, k, &grid, dt, t_end, stride, |s, h| {
                rows.push([s.t, mean_modulus(h), sup(s), l2_norm(h)]);
                true
            });
            for r in &rows {
                csv.row(&r.map(num))?;
                out.times.push(r[0]);
                out.mean_h.push(r[1]);
                out.l2_h.push(r[3]);
            }
            csv.finish()?;
            result?;
            return Ok(out);
        }
    }
    csv.finish()?;
    Ok(out)
}

fn status_label(s: &PointStatus) -> &'static str {
    match s {
        PointStatus::Converged => "converged",
        PointStatus::NotConverged => "not-converged",
        PointStatus::Failed(_) => "failed",
    }
}

pub(crate) fn engine_for(cfg: &RunConfig, engine: EngineArg) -> Engine {
    match engine {
        EngineArg::FiniteN => Engine::FiniteN(finite_n_params(cfg)),
        EngineArg::Galerkin => Engine::Galerkin(GalerkinParams {
            n: cfg.engine.galerkin_n,
            j_max: cfg.engine.j,
            beta: cfg.engine.beta,
            seed_amplitude: cfg.engine.seed_amplitude.unwrap_or(DEFAULT_SEED_AMPLITUDE),
            t_max: cfg.engine.t_max,
            tol: cfg.engine.tol,
            dt: cfg.engine.galerkin_dt,
        }),
    }
}

/// Write a sweep's branch CSV (and optionally its final fields).
pub(crate) fn write_branch(
    path: &Path,
    fields_out: Option<&Path>,
    command: &str,
    cfg: &RunConfig,
    kc: f64,
    window: (f64, f64),
    branch: &BranchData,
) -> CliResult<()> {
    let mut extra = vec![
        format!("engine: {}", branch.engine),
        format!("kc: {}", num(kc)),
        format!("fit_window: {}:{}", num(window.0), num(window.1)),
    ];
    match &branch.fit {
        Some(f) => extra.push(format!(
            "fit: kc={} amplitude={} exponent={} residual={}",
            num(f.kc),
            num(f.amplitude),
            num(f.exponent),
            num(f.residual)
        )),
        None => extra.push("fit: none".into()),
    }
    for p in &branch.points {
        if let PointStatus::Failed(msg) = &p.status {
            extra.push(format!("failure: K={}: {msg}", num(p.k)));
        }
    }
    let head = header(command, cfg, &extra);
    let mut csv = Csv::create(path, &head, &["K", "summary", "status", "winding", "locked_fraction"])?;
    for p in &branch.points {
        csv.row(&[
            num(p.k),
            num(p.summary),
            status_label(&p.status).into(),
            p.winding.to_string(),
            p.locked_fraction.map(num).unwrap_or_default(),
        ])?;
    }
    csv.finish()?;
    if let Some(fpath) = fields_out {
        let mut csv = Csv::create(fpath, &head, &["K", "x", "abs_h"])?;
        for p in &branch.points {
            for (x, h) in branch.grid.iter().zip(&p.field) {
                csv.row(&[num(p.k), num(*x), num(*h)])?;
            }
        }
        csv.finish()?;
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> CliResult<BranchData> {
    let cfg = load(args.config.as_deref())?;
    let grid = parse_grid(&args.k_grid).map_err(usage)?;
    let model = cfg.model()?;
    let kc = critical_couplings(&reference_decomposition(&cfg)?, &model)?.kc_plus;
    let window = match &args.fit_window {
        Some(w) => parse_interval(w).map_err(usage)?,
        None => (kc + 0.05, kc + 0.3),
    };
    let engine = engine_for(&cfg, args.engine);
    let mut branch = run_sweep(&cfg.kernel()?, &model, &grid, &engine)?;
    match fit_sqrt_law(&branch, window) {
        Ok(f) => branch.fit = Some(f),
        Err(e) => eprintln!("kurograph: no square-root fit: {e}"),
    }
    let engine_name = match args.engine {
        EngineArg::FiniteN => "finite-n",
        EngineArg::Galerkin => "galerkin",
    };
    let command = format!(
        "kurograph sweep --engine {engine_name} --k-grid {} --fit-window {}:{}",
        args.k_grid,
        num(window.0),
        num(window.1)
    );
    let fields = args.fields_out.as_ref().map(|p| resolve(&cfg, p));
    write_branch(&resolve(&cfg, &args.out), fields.as_deref(), &command, &cfg, kc, window, &branch)?;
    if let Some(f) = &branch.fit {
        println!(
            "fit: kc = {}, amplitude = {}, exponent = {}, residual = {}",
            num(f.kc),
            num(f.amplitude),
            num(f.exponent),
            num(f.residual)
        );
    }
    Ok(branch)
}

/// One row of a measured-versus-predicted comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparePoint {
    pub k: f64,
    pub measured: f64,
    pub predicted: f64,
    /// `None` where the prediction vanishes.
    pub rel_error: Option<f64>,
}

/// Compare `(K, measured)` pairs with the amplitude prediction for `cfg`.
pub(crate) fn compare_points(cfg: &RunConfig, measured: &[(f64, f64)]) -> CliResult<Vec<ComparePoint>> {
    let d = reference_decomposition(cfg)?;
    let model = cfg.model()?;
    let kc = critical_couplings(&d, &model)?.kc_plus;
    measured
        .iter()
        .map(|&(k, m)| {
            let predicted = if k <= kc {
                0.0
            } else {
                predict_amplitude(&d, &model, k)?.mean_amplitude()
            };
            Ok(ComparePoint {
                k,
                measured: m,
                predicted,
                rel_error: (predicted > 0.0).then(|| (m - predicted) / predicted),
            })
        })
        .collect()
}

pub(crate) fn write_compare(
    path: &Path,
    svg_path: Option<&Path>,
    head: &str,
    points: &[ComparePoint],
) -> CliResult<()> {
    let mut csv = Csv::create(path, head, &["K", "measured", "predicted", "rel_error"])?;
    for p in points {
        csv.row(&[
            num(p.k),
            num(p.measured),
            num(p.predicted),
            p.rel_error.map(num).unwrap_or_default(),
        ])?;
    }
    csv.finish()?;
    if let Some(s) = svg_path {
        let measured: Vec<(f64, f64)> = points.iter().map(|p| (p.k, p.measured)).collect();
        let predicted: Vec<(f64, f64)> = points.iter().map(|p| (p.k, p.predicted)).collect();
        let chart = svg::line_chart(
            "Stationary amplitude",
            "K",
            "mean |h|",
            &[
                svg::Series {
                    label: "measured",
                    points: &measured,
                },
                svg::Series {
                    label: "predicted",
                    points: &predicted,
                },
            ],
        );
        if let Some(dir) = s.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(s, chart)?;
    }
    Ok(())
}

pub fn branch_compare(args: &BranchCompareArgs) -> CliResult<Vec<ComparePoint>> {
    let text = std::fs::read_to_string(&args.branch)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.branch.display())))?;
    let toml = config_from_header(&text)
        .ok_or_else(|| usage(format!("{}: no config in header", args.branch.display())))?;
    // Paths in the echoed config are already resolved against the original
    // config's directory.
    let (cfg, _) = parse_config_str(&toml, Path::new(""))?;
    let (columns, rows) = read_csv(&text).map_err(|e| usage(format!("{}: {e}", args.branch.display())))?;
    let col = |name: &str| {
        columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| usage(format!("{}: missing column {name}", args.branch.display())))
    };
    let (ik, is, ist) = (col("K")?, col("summary")?, col("status")?);
    let mut measured = Vec::new();
    for r in &rows {
        if r.get(ist).map(|s| s.as_str()) == Some("failed") {
            continue;
        }
        let parse = |i: usize| {
            r.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| usage(format!("{}: bad row {}", args.branch.display(), r.join(","))))
        };
        measured.push((parse(ik)?, parse(is)?));
    }
    let points = compare_points(&cfg, &measured)?;
    let mut extra = Vec::new();
    if let Some(engine) = header_value(&text, "engine") {
        extra.push(format!("engine: {engine}"));
    }
    let head = header("kurograph branch-compare", &cfg, &extra);
    write_compare(&args.out, args.svg.as_deref(), &head, &points)?;
    Ok(points)
}
