//! Command-line driver: figure sweeps, the validation suite, and single-point queries.
//!
//! Every experiment writes one CSV document. Leading `#` lines carry the metadata needed
//! to rerun it (crate version, command, seed, budgets, method tags, and the full parameter
//! set in config-file syntax), followed by a header row and the data rows.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analytic::{self, AnalyticError, AnalyticResult};
use crate::beamforming::{Association, Combiner};
use crate::config::{load_params, normalize, ConfigError, NormalizedParams, PowerSplit, SystemParams};
use crate::montecarlo::{
    configured_threads, estimate_rate, sweep, Budget, Duplex, Links, McError, RateEstimate, Scheme,
    SweepVariable, UdDistance,
};
use crate::validation::{self, ValidationConfig};

/// Default seed for every experiment.
pub const DEFAULT_SEED: u64 = 20241015;
/// Relative tolerance handed to the analytic evaluators.
pub const ANALYTIC_TOL: f64 = 1e-8;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    MonteCarlo(McError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Config(c) => CliError::Config(c),
            other => CliError::MonteCarlo(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cran-duplex", version, about = "Average rates of a full-duplex C-RAN: Monte Carlo and semi-analytic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DL rate of ARA and SRA versus residual LI power, at P_u = 23 and 10 dBm.
    Fig1(CommonArgs),
    /// SRA UL rate versus P_u for MRC/MRT and ZF/MRT, α ∈ {3, 4}, P_b ∈ {23, 46} dBm.
    Fig2(CommonArgs),
    /// UL/DL rate region over the DL fraction p, full and half duplex, M = 3, α = 3.
    Fig3(CommonArgs),
    /// Run the acceptance checks; exit status 1 if any fails.
    Validate(ValidateArgs),
    /// Rates of one scheme at one parameter point.
    Point(PointArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Parameter file (`key = value` lines); the reference scenario if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo budget as `SPATIALxFADING`, e.g. `2000x100`.
    #[arg(long, value_parser = parse_budget)]
    pub budget: Option<Budget>,
    /// Shrink Monte Carlo budgets tenfold.
    #[arg(long)]
    pub fast: bool,
    /// Override one parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Multiplies every relative tolerance (0 fails every tolerance check).
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
    /// Run only these criteria (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssociationArg {
    Ara,
    Sra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CombinerArg {
    Mrc,
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DuplexArg {
    Fd,
    Hd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Analytic,
    Mc,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = AssociationArg::Sra)]
    pub scheme: AssociationArg,
    #[arg(long, value_enum, default_value_t = CombinerArg::Zf)]
    pub combiner: CombinerArg,
    #[arg(long, value_enum, default_value_t = DuplexArg::Fd)]
    pub duplex: DuplexArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
}

/// Parse `NxM` (also accepts `N*M` and `N,M`).
pub fn parse_budget(s: &str) -> Result<Budget, String> {
    let (a, b) = s
        .split_once(['x', 'X', '*', ','])
        .ok_or_else(|| format!("expected SPATIALxFADING, got `{s}`"))?;
    let n: usize = a.trim().parse().map_err(|_| format!("bad spatial count `{a}`"))?;
    let m: usize = b.trim().parse().map_err(|_| format!("bad fading count `{b}`"))?;
    if n == 0 || m == 0 {
        return Err("budget counts must be positive".into());
    }
    Ok(Budget::new(n, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Validate,
    Point,
}

impl Experiment {
    pub fn id(&self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Validate => "validate",
            Experiment::Point => "point",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fig1" => Experiment::Fig1,
            "fig2" => Experiment::Fig2,
            "fig3" => Experiment::Fig3,
            "validate" => Experiment::Validate,
            "point" => Experiment::Point,
            other => return Err(CliError::Usage(format!("unknown experiment `{other}`"))),
        })
    }
}

/// A resolved experiment: parameters after config file and overrides, and the budget
/// after `--fast`.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub params: SystemParams,
    pub config_path: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub seed: u64,
    pub budget: Budget,
    pub fast: bool,
}

impl ExperimentSpec {
    pub fn from_args(experiment: Experiment, args: &CommonArgs) -> Result<Self, CliError> {
        let mut params = match &args.config {
            Some(path) => load_params(path)?,
            None => SystemParams::reference(),
        };
        let overrides = args
            .set
            .iter()
            .map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                    .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        apply_overrides(&mut params, &overrides)?;
        let mut budget = args.budget.unwrap_or(Budget::DEFAULT);
        if args.fast {
            budget = budget.fast();
        }
        Ok(Self {
            experiment,
            params,
            config_path: args.config.clone(),
            out: args.out.clone(),
            overrides,
            seed: args.seed,
            budget,
            fast: args.fast,
        })
    }

    fn metadata(&self) -> Vec<String> {
        let mut m = vec![
            format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            format!("experiment: {}", self.experiment.id()),
            format!("seed: {}", self.seed),
            format!("budget: {}x{}{}", self.budget.n_spatial, self.budget.n_fading, if self.fast { " (fast)" } else { "" }),
        ];
        if let Some(p) = &self.config_path {
            m.push(format!("config file: {}", p.display()));
        }
        for (k, v) in &self.overrides {
            m.push(format!("override: {k} = {v}"));
        }
        m.push(format!(
            "threads: {}",
            configured_threads().map_or("all".to_string(), |n| n.to_string())
        ));
        m.push("rates in nats/s/Hz".into());
        m.push("config:".into());
        m.extend(self.params.to_config_string().lines().map(|l| format!("  {l}")));
        m
    }
}

/// Apply `key = value` overrides. Cross-field constraints are only checked once all of
/// them are in place.
pub fn apply_overrides(params: &mut SystemParams, overrides: &[(String, String)]) -> Result<(), ConfigError> {
    for (k, v) in overrides {
        match params.set(k, v) {
            Ok(()) | Err(ConfigError::Constraint { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    params.validate()
}

/// A CSV document with `#` metadata lines.
#[derive(Debug, Clone, Default)]
pub struct CsvDoc {
    pub metadata: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    fn new(metadata: Vec<String>, columns: &[&str]) -> Self {
        Self {
            metadata,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut out = String::new();
        for line in &self.metadata {
            let _ = writeln!(out, "# {line}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        out.push_str(&String::from_utf8_lossy(&body));
        Ok(out)
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn mc_cells(e: Option<RateEstimate>) -> (String, String) {
    e.map_or((String::new(), String::new()), |e| (num(e.mean), num(e.std_error)))
}

fn assoc_tag(a: Association) -> &'static str {
    match a {
        Association::Ara => "ARA",
        Association::Sra => "SRA",
    }
}

fn combiner_tag(c: Combiner) -> &'static str {
    match c {
        Combiner::Mrc => "MRC/MRT",
        Combiner::Zf => "ZF/MRT",
    }
}

/// ARA realizations are far more expensive than SRA ones; ARA runs use this fraction of
/// the spatial and fading budget.
fn ara_budget(b: Budget, spatial_div: usize, fading_div: usize) -> Budget {
    Budget::new((b.n_spatial / spatial_div).max(2), (b.n_fading / fading_div).max(1))
}

pub fn run_fig1(spec: &ExperimentSpec) -> Result<CsvDoc, CliError> {
    let start = Instant::now();
    let sra_budget = spec.budget;
    let ara = ara_budget(spec.budget, 4, 5);
    let mut base = spec.params.clone();
    base.m_antennas = 2;
    base.ara_power_split = PowerSplit::PerRrh;
    base.validate()?;

    let mut meta = spec.metadata();
    meta.push("fixed: m_antennas = 2, ara_power_split = per_rrh; p_u_dbm swept over {23, 10}; sigma_li_dbm swept".into());
    meta.push(format!("budget ara: {}x{}; budget sra: {}x{}", ara.n_spatial, ara.n_fading, sra_budget.n_spatial, sra_budget.n_fading));
    meta.push("methods: mc = Monte Carlo (common random numbers across sigma_li_dbm); analytic = integral-form MGF rate; upper-bound = ARA singular-path-loss bound".into());
    let mut doc = CsvDoc::new(meta, &["sigma_li_dbm", "scheme", "method", "p_u_dbm", "dl_rate", "stderr"]);

    for p_u in [23.0, 10.0] {
        let mut p = base.clone();
        p.p_u_dbm = p_u;
        p.sigma_li_dbm = p_u.min(p.sigma_li_dbm);
        let grid = validation::li_sweep_grid(p_u);
        for assoc in [Association::Ara, Association::Sra] {
            let scheme = Scheme::new(assoc, Combiner::Mrc, Duplex::Full).links(Links::Downlink);
            let budget = if assoc == Association::Ara { ara } else { sra_budget };
            let mc = sweep(&p, scheme, SweepVariable::SigmaLiDbm, &grid, budget, spec.seed)?;
            for (point, &sigma) in mc.iter().zip(&grid) {
                let n = SweepVariable::SigmaLiDbm.apply(&p, sigma)?;
                let (rate, se) = mc_cells(point.report.dl);
                doc.push(vec![num(sigma), assoc_tag(assoc).into(), "mc".into(), num(p_u), rate, se]);
                let exact = match assoc {
                    Association::Ara => analytic::dl_rate_ara_exact(&n, ANALYTIC_TOL)?,
                    Association::Sra => analytic::dl_rate_sra(&n, ANALYTIC_TOL)?,
                };
                doc.push(vec![num(sigma), assoc_tag(assoc).into(), "analytic".into(), num(p_u), num(exact.value), String::new()]);
                if assoc == Association::Ara {
                    let ub = analytic::dl_rate_ara_upper(&n, ANALYTIC_TOL)?;
                    doc.push(vec![num(sigma), "ARA".into(), "upper-bound".into(), num(p_u), num(ub.value), String::new()]);
                }
            }
        }
    }
    doc.metadata.push(format!("runtime: {:.1}s", start.elapsed().as_secs_f64()));
    Ok(doc)
}

pub fn run_fig2(spec: &ExperimentSpec) -> Result<CsvDoc, CliError> {
    let start = Instant::now();
    let mut base = spec.params.clone();
    base.m_antennas = 2;
    base.p_dl = 0.5;
    base.validate()?;
    let grid: Vec<f64> = (0..=8).map(|i| 5.0 * i as f64).collect();

    let mut meta = spec.metadata();
    meta.push("fixed: m_antennas = 2, p_dl = 0.5; alpha in {3, 4}; p_b_dbm in {23, 46}; p_u_dbm swept 0..40 dBm".into());
    meta.push("methods: mc = Monte Carlo, common random numbers across p_u_dbm, MRC interference drawn with an independent uniform UL-DL pair distance; analytic = integral-form rate (MRC) or quadrature of the interference-free rate (ZF)".into());
    let mut doc = CsvDoc::new(meta, &["alpha", "p_b_dbm", "combiner", "method", "p_u_dbm", "ul_rate", "stderr"]);

    for alpha in ["3", "4"] {
        for p_b in [23.0, 46.0] {
            let mut p = base.clone();
            p.set("alpha", alpha)?;
            p.p_b_dbm = p_b;
            p.sigma_li_dbm = p.sigma_li_dbm.min(grid[0]);
            p.validate()?;
            for combiner in [Combiner::Mrc, Combiner::Zf] {
                let scheme = Scheme::new(Association::Sra, combiner, Duplex::Full)
                    .links(Links::Uplink)
                    .ud_distance(UdDistance::UniformPair);
                let mc = sweep(&p, scheme, SweepVariable::PuDbm, &grid, spec.budget, spec.seed)?;
                for (point, &pu) in mc.iter().zip(&grid) {
                    let n = SweepVariable::PuDbm.apply(&p, pu)?;
                    let tag = combiner_tag(combiner);
                    let (rate, se) = mc_cells(point.report.ul);
                    doc.push(vec![alpha.into(), num(p_b), tag.into(), "mc".into(), num(pu), rate, se]);
                    let a = match combiner {
                        Combiner::Mrc => analytic::ul_rate_sra_mrc(&n, ANALYTIC_TOL)?,
                        Combiner::Zf => analytic::ul_rate_sra_zf(&n, ANALYTIC_TOL)?,
                    };
                    doc.push(vec![alpha.into(), num(p_b), tag.into(), "analytic".into(), num(pu), num(a.value), String::new()]);
                }
            }
        }
    }
    doc.metadata.push(format!("runtime: {:.1}s", start.elapsed().as_secs_f64()));
    Ok(doc)
}

/// One curve of the rate region.
#[derive(Debug, Clone, Copy)]
struct RegionCurve {
    association: Association,
    combiner: Option<Combiner>,
    duplex: Duplex,
    split: PowerSplit,
    /// Overrides the configured P_b.
    p_b_dbm: Option<f64>,
}

impl RegionCurve {
    fn label(&self) -> String {
        let c = self.combiner.map_or("", combiner_tag);
        match self.duplex {
            Duplex::Full => format!("{}-{}", assoc_tag(self.association), c),
            Duplex::Half => assoc_tag(self.association).to_string(),
        }
    }

    fn scheme(&self) -> Scheme {
        Scheme::new(self.association, self.combiner.unwrap_or(Combiner::Mrc), self.duplex)
            .ud_distance(UdDistance::UniformPair)
    }
}

#[derive(Debug, Clone, Copy)]
struct RegionPoint {
    p: f64,
    ul: f64,
    dl: f64,
    ul_se: f64,
    dl_se: f64,
}

impl RegionPoint {
    fn sum(&self) -> f64 {
        self.ul + self.dl
    }

    fn min(&self) -> f64 {
        self.ul.min(self.dl)
    }
}

fn analytic_region_point(curve: &RegionCurve, n: &NormalizedParams) -> Result<Option<(f64, f64)>, AnalyticError> {
    let v = |r: AnalyticResult| r.value;
    Ok(match (curve.association, curve.duplex) {
        (Association::Sra, Duplex::Full) => {
            let dl = v(analytic::dl_rate_sra(n, ANALYTIC_TOL)?);
            let ul = match curve.combiner {
                Some(Combiner::Zf) => v(analytic::ul_rate_sra_zf(n, ANALYTIC_TOL)?),
                _ => v(analytic::ul_rate_sra_mrc(n, ANALYTIC_TOL)?),
            };
            Some((ul, dl))
        }
        (Association::Sra, Duplex::Half) => {
            let r = analytic::hd_rates_sra(n, ANALYTIC_TOL)?;
            Some((r.ul.value, r.dl.value))
        }
        (Association::Ara, Duplex::Half) => {
            let r = analytic::hd_rate_ara(n, ANALYTIC_TOL)?;
            Some((r.ul.value, r.dl.value))
        }
        (Association::Ara, Duplex::Full) => None,
    })
}

pub fn run_fig3(spec: &ExperimentSpec) -> Result<CsvDoc, CliError> {
    let start = Instant::now();
    let mut base = spec.params.clone();
    base.m_antennas = 3;
    base.set("alpha", "3")?;
    base.ara_power_split = PowerSplit::PerRrh;
    base.validate()?;
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let ara_fd = ara_budget(spec.budget, 20, 20);
    let ara_hd = ara_budget(spec.budget, 4, 5);

    let fd = |association, combiner, split, p_b_dbm| RegionCurve {
        association,
        combiner: Some(combiner),
        duplex: Duplex::Full,
        split,
        p_b_dbm,
    };
    let hd = |association| RegionCurve {
        association,
        combiner: None,
        duplex: Duplex::Half,
        split: PowerSplit::PerRrh,
        p_b_dbm: None,
    };
    let curves = [
        fd(Association::Sra, Combiner::Zf, PowerSplit::PerRrh, None),
        fd(Association::Sra, Combiner::Mrc, PowerSplit::PerRrh, None),
        fd(Association::Ara, Combiner::Zf, PowerSplit::PerRrh, None),
        fd(Association::Ara, Combiner::Mrc, PowerSplit::PerRrh, None),
        fd(Association::Sra, Combiner::Zf, PowerSplit::PerRrh, Some(23.0)),
        fd(Association::Ara, Combiner::Zf, PowerSplit::Total, Some(23.0)),
        fd(Association::Ara, Combiner::Mrc, PowerSplit::Total, Some(23.0)),
        hd(Association::Sra),
        hd(Association::Ara),
    ];

    let mut meta = spec.metadata();
    meta.push("fixed: m_antennas = 3, alpha = 3; p_dl swept 0..1 step 0.05".into());
    meta.push(format!(
        "budget sra: {}x{}; budget ara full duplex: {}x{}; budget ara half duplex: {}x{}",
        spec.budget.n_spatial, spec.budget.n_fading, ara_fd.n_spatial, ara_fd.n_fading, ara_hd.n_spatial, ara_hd.n_fading
    ));
    meta.push("methods: mc = Monte Carlo (common random numbers across p_dl; SRA MRC interference drawn with an independent uniform UL-DL pair distance); analytic = integral-form rates (SRA full duplex, both half-duplex schemes; ARA half duplex uses singular path loss on the infinite plane) at interior p_dl".into());
    meta.push("power_split total: p_b_dbm is the DL power shared equally by all ARA DL RRHs".into());
    meta.push("gain_vs_hd_pct: full-duplex sum rate over the best half-duplex sum rate of the same association and method".into());

    let mut results: Vec<(RegionCurve, &'static str, Vec<RegionPoint>)> = Vec::new();
    for curve in curves {
        let mut p = base.clone();
        p.ara_power_split = curve.split;
        if let Some(pb) = curve.p_b_dbm {
            p.p_b_dbm = pb;
        }
        p.validate()?;
        let budget = match (curve.association, curve.duplex) {
            (Association::Sra, _) => spec.budget,
            (Association::Ara, Duplex::Full) => ara_fd,
            (Association::Ara, Duplex::Half) => ara_hd,
        };
        let mc = sweep(&p, curve.scheme(), SweepVariable::PDl, &grid, budget, spec.seed)?;
        let points = mc
            .iter()
            .map(|s| RegionPoint {
                p: s.value,
                ul: s.report.ul_mean(),
                dl: s.report.dl_mean(),
                ul_se: s.report.ul.map_or(f64::NAN, |e| e.std_error),
                dl_se: s.report.dl.map_or(f64::NAN, |e| e.std_error),
            })
            .collect();
        results.push((curve, "mc", points));

        let interior: Vec<f64> = grid.iter().copied().filter(|&v| v > 0.0 && v < 1.0).collect();
        let mut points = Vec::new();
        for &pd in &interior {
            let n = SweepVariable::PDl.apply(&p, pd)?;
            match analytic_region_point(&curve, &n)? {
                Some((ul, dl)) => points.push(RegionPoint {
                    p: pd,
                    ul,
                    dl,
                    ul_se: f64::NAN,
                    dl_se: f64::NAN,
                }),
                None => break,
            }
        }
        if !points.is_empty() {
            results.push((curve, "analytic", points));
        }
    }

    let best_hd = |assoc: Association, method: &str| {
        results
            .iter()
            .filter(|(c, m, _)| c.association == assoc && c.duplex == Duplex::Half && *m == method)
            .flat_map(|(_, _, pts)| pts.iter().map(RegionPoint::sum))
            .fold(f64::NAN, f64::max)
    };

    let mut doc = CsvDoc::new(
        meta,
        &[
            "p_dl", "scheme", "duplex", "power_split", "p_b_dbm", "method", "ul_rate", "dl_rate", "sum_rate",
            "ul_stderr", "dl_stderr", "min_rate", "gain_vs_hd_pct",
        ],
    );
    let mut summary = Vec::new();
    for (curve, method, points) in &results {
        let duplex = if curve.duplex == Duplex::Full { "FD" } else { "HD" };
        let p_b = curve.p_b_dbm.unwrap_or(base.p_b_dbm);
        let hd_ref = best_hd(curve.association, method);
        let gain = |s: f64| {
            if curve.duplex == Duplex::Full && hd_ref.is_finite() {
                100.0 * (s - hd_ref) / hd_ref
            } else {
                f64::NAN
            }
        };
        for pt in points {
            doc.push(vec![
                num(pt.p),
                curve.label(),
                duplex.into(),
                curve.split.to_string(),
                num(p_b),
                method.to_string(),
                num(pt.ul),
                num(pt.dl),
                num(pt.sum()),
                num(pt.ul_se),
                num(pt.dl_se),
                num(pt.min()),
                num(gain(pt.sum())),
            ]);
        }
        let best = points.iter().max_by(|a, b| a.sum().total_cmp(&b.sum()));
        let fair = points.iter().max_by(|a, b| a.min().total_cmp(&b.min()));
        if let (Some(best), Some(fair)) = (best, fair) {
            let g = gain(best.sum());
            summary.push(format!(
                "summary {} {} {} p_b={} {}: max sum {:.4} at p={}; max-min {:.4} at p={}{}",
                curve.label(),
                duplex,
                curve.split,
                p_b,
                method,
                best.sum(),
                best.p,
                fair.min(),
                fair.p,
                if g.is_nan() { String::new() } else { format!("; gain over HD {g:.1}%") }
            ));
        }
    }
    doc.metadata.extend(summary);
    doc.metadata.push(format!("runtime: {:.1}s", start.elapsed().as_secs_f64()));
    Ok(doc)
}

/// Validation report plus its CSV rendering.
pub fn run_validate(spec: &ExperimentSpec, tolerance_scale: f64, criteria: &[u32]) -> Result<(validation::ValidationReport, CsvDoc), CliError> {
    if let Some(bad) = criteria.iter().find(|c| !validation::CRITERIA.contains(c)) {
        return Err(CliError::Usage(format!("unknown criterion {bad}")));
    }
    if !(tolerance_scale >= 0.0 && tolerance_scale.is_finite()) {
        return Err(CliError::Usage("tolerance scale must be finite and nonnegative".into()));
    }
    let mut cfg = ValidationConfig::new(spec.seed);
    cfg.base = spec.params.clone();
    cfg.budget = spec.budget;
    // A tenfold smaller budget widens standard errors by about √10.
    cfg.tolerance_scale = if spec.fast { tolerance_scale * 10f64.sqrt() } else { tolerance_scale };
    let report = if criteria.is_empty() {
        validation::run_all(&cfg)
    } else {
        validation::run_selected(&cfg, criteria)
    };

    let mut meta = spec.metadata();
    meta.push(format!("tolerance scale: {}", cfg.tolerance_scale));
    meta.extend(report.criteria.iter().map(|c| c.summary()));
    meta.push(format!("overall: {}", if report.passed() { "PASS" } else { "FAIL" }));
    // Rows come from the report's own CSV body, which the determinism check compares.
    let text = report.csv_body();
    let mut lines = text.lines();
    let mut doc = CsvDoc::new(meta, &[]);
    doc.columns = split_csv_line(lines.next().unwrap_or_default())?;
    for l in lines {
        doc.rows.push(split_csv_line(l)?);
    }
    Ok((report, doc))
}

fn split_csv_line(line: &str) -> Result<Vec<String>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(line.as_bytes());
    let rec = r
        .records()
        .next()
        .transpose()?
        .unwrap_or_default();
    Ok(rec.iter().map(str::to_string).collect())
}

pub fn run_point(spec: &ExperimentSpec, args: &PointArgs) -> Result<CsvDoc, CliError> {
    let start = Instant::now();
    let n = normalize(&spec.params);
    let association = match args.scheme {
        AssociationArg::Ara => Association::Ara,
        AssociationArg::Sra => Association::Sra,
    };
    let combiner = match args.combiner {
        CombinerArg::Mrc => Combiner::Mrc,
        CombinerArg::Zf => Combiner::Zf,
    };
    let duplex = match args.duplex {
        DuplexArg::Fd => Duplex::Full,
        DuplexArg::Hd => Duplex::Half,
    };
    let scheme = Scheme::new(association, combiner, duplex);

    let mut meta = spec.metadata();
    meta.push(format!("scheme: {scheme}"));
    let mut doc = CsvDoc::new(meta, &["scheme", "link", "method", "rate", "stderr"]);
    let label = scheme.to_string();
    let mut row = |link: &str, method: &str, rate: f64, se: f64| {
        doc.rows.push(vec![label.clone(), link.into(), method.into(), num(rate), num(se)]);
    };

    if args.method != MethodArg::Analytic {
        let r = estimate_rate(&n, scheme, spec.budget, spec.seed)?;
        for (link, e) in [("ul", r.ul), ("dl", r.dl), ("sum", r.sum)] {
            if let Some(e) = e {
                row(link, "mc", e.mean, e.std_error);
            }
        }
    }
    if args.method != MethodArg::Mc {
        let t = ANALYTIC_TOL;
        match (association, duplex) {
            (Association::Sra, Duplex::Full) => {
                let ul = match combiner {
                    Combiner::Zf => analytic::ul_rate_sra_zf(&n, t)?,
                    Combiner::Mrc => analytic::ul_rate_sra_mrc(&n, t)?,
                };
                let dl = analytic::dl_rate_sra(&n, t)?;
                row("ul", ul.method.tag(), ul.value, f64::NAN);
                row("dl", dl.method.tag(), dl.value, f64::NAN);
                row("sum", "analytic", ul.value + dl.value, f64::NAN);
            }
            (Association::Ara, Duplex::Full) => {
                let exact = analytic::dl_rate_ara_exact(&n, t)?;
                row("dl", exact.method.tag(), exact.value, f64::NAN);
                if spec.params.ara_power_split == PowerSplit::PerRrh {
                    let ub = analytic::dl_rate_ara_upper(&n, t)?;
                    row("dl", "upper-bound", ub.value, f64::NAN);
                }
            }
            (assoc, Duplex::Half) => {
                let r = match assoc {
                    Association::Sra => analytic::hd_rates_sra(&n, t)?,
                    Association::Ara => analytic::hd_rate_ara(&n, t)?,
                };
                let tag = if assoc == Association::Ara { "singular-integral" } else { r.ul.method.tag() };
                row("ul", tag, r.ul.value, f64::NAN);
                row("dl", tag, r.dl.value, f64::NAN);
                row("sum", tag, r.sum(), f64::NAN);
            }
        }
    }
    doc.metadata.push(format!("runtime: {:.2}s", start.elapsed().as_secs_f64()));
    Ok(doc)
}

fn emit(doc: &CsvDoc, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = doc.render()?;
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Execute a parsed command; returns the process exit status.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Fig1(a) => {
            let spec = ExperimentSpec::from_args(Experiment::Fig1, a)?;
            emit(&run_fig1(&spec)?, spec.out.as_ref())?;
        }
        Command::Fig2(a) => {
            let spec = ExperimentSpec::from_args(Experiment::Fig2, a)?;
            emit(&run_fig2(&spec)?, spec.out.as_ref())?;
        }
        Command::Fig3(a) => {
            let spec = ExperimentSpec::from_args(Experiment::Fig3, a)?;
            emit(&run_fig3(&spec)?, spec.out.as_ref())?;
        }
        Command::Validate(v) => {
            let spec = ExperimentSpec::from_args(Experiment::Validate, &v.common)?;
            let (report, doc) = run_validate(&spec, v.tolerance_scale, &v.criteria)?;
            for c in &report.criteria {
                eprintln!("{}", c.summary());
            }
            emit(&doc, spec.out.as_ref())?;
            if !report.passed() {
                return Ok(EXIT_VALIDATION);
            }
        }
        Command::Point(p) => {
            let spec = ExperimentSpec::from_args(Experiment::Point, &p.common)?;
            emit(&run_point(&spec, p)?, spec.out.as_ref())?;
        }
    }
    Ok(EXIT_OK)
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
