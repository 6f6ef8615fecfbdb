//! The `td2wd` pipeline: tracking specification in, frequency-domain bounds
//! and their verified step responses out.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use td2wd_core::envelope::{
    complex_envelope, envelope_of, make_grid, select_restricted, BandEnd, BoundMode, BoundPair,
    EnvelopeCurve, Side, DEFAULT_POINTS, DEFAULT_W_MAX, DEFAULT_W_MIN,
};
use td2wd_core::family::{build_wd, family_tfs, Spec, WdTable, DEFAULT_ZETA_STEP};
use td2wd_core::racwe::{
    cleanup, fit, gain_adjust, report, FitProblem, FitReport, Weighting, DEFAULT_ZERO_TOL,
};
use td2wd_core::simulate::{simulate_bounds, FinalTD, StepTrace};
use td2wd_core::tf::{freq_response, FrequencyGrid, FrequencyResponse, RationalTF};
use td2wd_core::timing::TimeDomainMetrics;

pub const GENERATOR: &str = concat!("td2wd ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Low,
    High,
    Envelope,
}

impl Mode {
    fn bound_mode(self) -> BoundMode {
        match self {
            Mode::Low => BoundMode::LowFreq,
            Mode::High => BoundMode::HighFreq,
            Mode::Envelope => BoundMode::Envelope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    Data,
    InverseData,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::Data => Weighting::DataMagnitude,
            WeightingArg::InverseData => Weighting::InverseDataMagnitude,
        }
    }
}

/// Translate a time-domain tracking specification into lower and upper
/// frequency-domain bounds.
#[derive(Debug, Clone, Parser)]
#[command(name = "td2wd", version)]
pub struct Args {
    /// Maximum overshoot as a fraction, e.g. 0.15
    #[arg(long, allow_negative_numbers = true)]
    pub mp: f64,
    /// Rise time (10-90%) in seconds
    #[arg(long, allow_negative_numbers = true)]
    pub tr: f64,
    /// Settling time in seconds
    #[arg(long, allow_negative_numbers = true)]
    pub ts: f64,
    /// Settling band as a fraction of the final value
    #[arg(long, allow_negative_numbers = true)]
    pub dev: f64,
    /// Natural-frequency multiplier of the upper family
    #[arg(long)]
    pub wi: u32,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long, default_value_t = DEFAULT_ZETA_STEP)]
    pub zeta_step: f64,
    #[arg(long, default_value_t = DEFAULT_W_MIN)]
    pub wmin: f64,
    #[arg(long, default_value_t = DEFAULT_W_MAX)]
    pub wmax: f64,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    pub points: usize,
    /// Numerator degree of the fitted bounds (envelope mode)
    #[arg(long, default_value_t = 0)]
    pub zeros: usize,
    /// Denominator degree of the fitted bounds (envelope mode)
    #[arg(long, default_value_t = 2)]
    pub poles: usize,
    /// Numerator degree of the fitted upper bound, if different
    #[arg(long)]
    pub upper_zeros: Option<usize>,
    /// Denominator degree of the fitted upper bound, if different
    #[arg(long)]
    pub upper_poles: Option<usize>,
    /// Rescale the fitted bounds to unit DC gain
    #[arg(long)]
    pub gain_adjust: bool,
    /// Equation weighting of the rational fit
    #[arg(long, value_enum, default_value_t = WeightingArg::Data)]
    pub weighting: WeightingArg,
    /// Relative magnitude below which fitted roots count as spurious
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    /// Use this `zeta,omega_n` table instead of generating one
    #[arg(long)]
    pub wd_table: Option<PathBuf>,
    /// Directory for the summary and data files
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Pipeline stage, reported with every failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Spec,
    Grid,
    WdTable,
    Family,
    Restriction,
    Envelope,
    FitLower,
    FitUpper,
    Simulation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Spec => "specification",
            Stage::Grid => "frequency grid",
            Stage::WdTable => "wd table",
            Stage::Family => "curve families",
            Stage::Restriction => "bound selection",
            Stage::Envelope => "envelope",
            Stage::FitLower => "lower bound fit",
            Stage::FitUpper => "upper bound fit",
            Stage::Simulation => "simulation",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        source: td2wd_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    /// 1 for invalid input, 2 for numerical failure, 3 for I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { source, .. } if source.is_validation() => 1,
            CliError::Stage { .. } => 2,
            CliError::Io { .. } | CliError::Serialize(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> AtStage<T> for td2wd_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeFit {
    pub curve: EnvelopeCurve,
    pub report: FitReport,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub mode: Mode,
    pub spec: Spec,
    pub grid: FrequencyGrid,
    pub wd: WdTable,
    pub bounds: BoundPair,
    /// Lower and upper envelope fits, envelope mode only.
    pub fits: Option<(EnvelopeFit, EnvelopeFit)>,
    pub final_td: FinalTD,
    pub upper_trace: StepTrace,
    pub lower_trace: StepTrace,
    pub artifacts: Vec<String>,
}

fn fit_side(
    members: &[RationalTF],
    grid: &FrequencyGrid,
    side: Side,
    degrees: (usize, usize),
    args: &Args,
) -> Result<(RationalTF, EnvelopeFit)> {
    let stage = match side {
        Side::Lower => Stage::FitLower,
        Side::Upper => Stage::FitUpper,
    };
    let curve = envelope_of(members, grid, side).at(Stage::Envelope)?;
    let data: FrequencyResponse = complex_envelope(&curve);
    let problem = FitProblem::new(data.clone(), degrees.0, degrees.1)
        .at(stage)?
        .with_weighting(args.weighting.into());
    let raw = fit(&problem).at(stage)?;
    let mut tf = cleanup(&raw, args.zero_tol, grid.lowest()).at(stage)?;
    if args.gain_adjust {
        tf = gain_adjust(&tf, 1.0).at(stage)?;
    }
    let report = report(&tf, &data).at(stage)?;
    Ok((tf, EnvelopeFit { curve, report }))
}

/// Runs the whole pipeline without touching the file system except for
/// reading an injected wd table.
pub fn run(args: &Args) -> Result<PipelineResult> {
    let spec = Spec::new(args.mp, args.tr, args.ts, args.dev, args.wi).at(Stage::Spec)?;
    let grid = make_grid(args.wmin, args.wmax, args.points).at(Stage::Grid)?;
    if !(args.zero_tol > 0.0 && args.zero_tol < 1.0) {
        return Err(CliError::Stage {
            stage: Stage::Spec,
            source: td2wd_core::Error::InvalidParameter {
                name: "zero_tol",
                reason: format!("must lie in (0, 1), got {}", args.zero_tol),
            },
        });
    }
    let wd = match &args.wd_table {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            WdTable::from_csv(&text).at(Stage::WdTable)?
        }
        None => build_wd(&spec, args.zeta_step).at(Stage::WdTable)?,
    };

    let (bounds, fits) = match args.mode {
        Mode::Low | Mode::High => {
            let end = if args.mode == Mode::Low {
                BandEnd::Low
            } else {
                BandEnd::High
            };
            let b = select_restricted(&wd, spec.wi, &grid, end).at(Stage::Restriction)?;
            (b, None)
        }
        Mode::Envelope => {
            let mut members = Vec::new();
            for i in 1..=spec.wi {
                members.extend(family_tfs(&wd, i).at(Stage::Family)?);
            }
            let lower_deg = (args.zeros, args.poles);
            let upper_deg = (
                args.upper_zeros.unwrap_or(args.zeros),
                args.upper_poles.unwrap_or(args.poles),
            );
            let (lower, lf) = fit_side(&members, &grid, Side::Lower, lower_deg, args)?;
            let (upper, uf) = fit_side(&members, &grid, Side::Upper, upper_deg, args)?;
            let b = BoundPair::new(lower, upper, BoundMode::Envelope).at(Stage::Restriction)?;
            (b, Some((lf, uf)))
        }
    };
    debug_assert_eq!(bounds.mode, args.mode.bound_mode());

    let traces = simulate_bounds(&bounds, &spec).at(Stage::Simulation)?;
    Ok(PipelineResult {
        mode: args.mode,
        spec,
        grid,
        wd,
        bounds,
        fits,
        final_td: traces.final_td,
        upper_trace: traces.upper,
        lower_trace: traces.lower,
        artifacts: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub max_mag_error: f64,
    pub max_phase_error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPair {
    pub lower: FitSummary,
    pub upper: FitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsPair {
    pub upper: TimeDomainMetrics,
    pub lower: TimeDomainMetrics,
}

/// The structured summary document written as `<mode>_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub generator: String,
    pub mode: String,
    pub spec: Spec,
    pub grid: GridSummary,
    pub wd: WdTable,
    pub bounds: BoundPair,
    pub fit: Option<FitPair>,
    pub final_td: MetricsPair,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn of(result: &PipelineResult) -> Self {
        let fit_summary = |r: &FitReport| FitSummary {
            max_mag_error: r.max_mag_error,
            max_phase_error_deg: r.max_phase_error,
        };
        Summary {
            generator: GENERATOR.to_string(),
            mode: result.bounds.mode.as_str().to_string(),
            spec: result.spec,
            grid: GridSummary {
                w_min: result.grid.lowest(),
                w_max: result.grid.highest(),
                points: result.grid.len(),
            },
            wd: result.wd.clone(),
            bounds: result.bounds.clone(),
            fit: result.fits.as_ref().map(|(l, u)| FitPair {
                lower: fit_summary(&l.report),
                upper: fit_summary(&u.report),
            }),
            final_td: MetricsPair {
                upper: result.final_td.upper,
                lower: result.final_td.lower,
            },
            artifacts: result.artifacts.clone(),
        }
    }
}

fn bode_csv(tf: &RationalTF, grid: &FrequencyGrid) -> td2wd_core::Result<String> {
    EnvelopeCurve::from_response(&freq_response(tf, grid)?).map(|c| c.to_csv())
}

fn family_csv(wd: &WdTable, wi: u32, grid: &FrequencyGrid) -> td2wd_core::Result<String> {
    let mut out = String::from("multiplier,member,zeta,omega_n,omega,mag,phase_deg\n");
    for i in 1..=wi {
        for (k, (p, tf)) in wd.pairs().iter().zip(family_tfs(wd, i)?).enumerate() {
            let r = freq_response(&tf, grid)?;
            for ((w, m), ph) in grid.omegas().iter().zip(r.magnitudes()).zip(r.phases_deg()) {
                out.push_str(&format!(
                    "{i},{k},{},{},{w},{m},{ph}\n",
                    p.zeta(),
                    p.omega_n()
                ));
            }
        }
    }
    Ok(out)
}

/// Writes the summary and data files into `out_dir` and records their names
/// (relative to `out_dir`) in `result.artifacts`.
pub fn emit(result: &mut PipelineResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mode = result.bounds.mode.as_str();
    let mut files: Vec<(String, String)> = vec![
        (format!("{mode}_wd.csv"), result.wd.to_csv()),
        (
            format!("{mode}_bode_lower.csv"),
            bode_csv(&result.bounds.lower, &result.grid).at(Stage::Output)?,
        ),
        (
            format!("{mode}_bode_upper.csv"),
            bode_csv(&result.bounds.upper, &result.grid).at(Stage::Output)?,
        ),
        (
            format!("{mode}_family_bode.csv"),
            family_csv(&result.wd, result.spec.wi, &result.grid).at(Stage::Output)?,
        ),
        (
            format!("{mode}_step_lower.csv"),
            result.lower_trace.to_csv(),
        ),
        (
            format!("{mode}_step_upper.csv"),
            result.upper_trace.to_csv(),
        ),
    ];
    if let Some((lower, upper)) = &result.fits {
        for (name, f) in [("lower", lower), ("upper", upper)] {
            files.push((format!("{mode}_envelope_{name}.csv"), f.curve.to_csv()));
            files.push((format!("{mode}_fit_{name}.csv"), f.report.to_csv()));
        }
    }

    let summary_name = format!("{mode}_summary.json");
    result.artifacts = std::iter::once(summary_name.clone())
        .chain(files.iter().map(|(n, _)| n.clone()))
        .collect();
    let mut summary = serde_json::to_string_pretty(&Summary::of(result))?;
    summary.push('\n');
    files.insert(0, (summary_name, summary));

    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Human-readable digest printed to stdout.
pub fn describe(result: &PipelineResult) -> String {
    let poly = |c: &[f64]| {
        c.iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let metrics = |m: &TimeDomainMetrics| format!("mp={:.4} tr={:.4} ts={:.4}", m.mp, m.tr, m.ts);
    let mut out = format!("mode: {}\n", result.bounds.mode.as_str());
    for (name, tf, m) in [
        ("lower", &result.bounds.lower, &result.final_td.lower),
        ("upper", &result.bounds.upper, &result.final_td.upper),
    ] {
        out.push_str(&format!(
            "{name}: num [{}] den [{}]  {}\n",
            poly(tf.num()),
            poly(tf.den()),
            metrics(m)
        ));
    }
    if let Some((l, u)) = &result.fits {
        out.push_str(&format!(
            "fit max errors: lower {:.4} / {:.2} deg, upper {:.4} / {:.2} deg\n",
            l.report.max_mag_error,
            l.report.max_phase_error,
            u.report.max_mag_error,
            u.report.max_phase_error
        ));
    }
    out
}
