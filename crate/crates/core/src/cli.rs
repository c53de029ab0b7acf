//! Batch front end: job description, dispatch, report documents and exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::atlas::{
    audit_cover, audit_separation, audit_transitivity, glue, validate_germ_data, AtlasParams, GermAtlas,
    GermAtlasInput, GlueOutcome,
};
use crate::coeff::{parse_rational, rational_str, Gaussian, Rational};
use crate::error::{Error, Result};
use crate::sheaf::{glue_sheaf, SheafData, SheafInput};
use crate::tep::{glue_tep, tep_check, GlueTepOptions, TepData, TepDoc, TepOrders};

/// Default output directory when neither `--out` nor the environment variable is set.
pub const DEFAULT_OUT: &str = "germglue-out";
pub const OUT_ENV: &str = "GERMGLUE_OUT";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Validate {
        atlas: PathBuf,
    },
    Glue {
        atlas: PathBuf,
    },
    GlueSheaf {
        atlas: PathBuf,
        sheaf: PathBuf,
    },
    TepCheck {
        tep: PathBuf,
    },
    GlueTep {
        atlas: PathBuf,
        sheaf: PathBuf,
        tep: PathBuf,
    },
}

/// Everything that determines a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    #[serde(flatten)]
    pub command: Command,
    pub order: Option<u32>,
    pub z_order: Option<u32>,
    pub mode: Mode,
    pub tolerance: f64,
    pub n_max: u64,
    #[serde(with = "rational_str")]
    pub radius_floor: Rational,
    pub samples: usize,
    pub seed: u64,
    /// Extra base points (real coordinates) for the pointwise TEP checks.
    pub points: Vec<Vec<String>>,
}

impl JobSpec {
    pub fn new(command: Command) -> Self {
        let defaults = AtlasParams::default();
        JobSpec {
            command,
            order: None,
            z_order: None,
            mode: Mode::Exact,
            tolerance: 1e-12,
            n_max: defaults.n_max,
            radius_floor: defaults.radius_floor,
            samples: 0,
            seed: 0,
            points: Vec::new(),
        }
    }

    fn float_tol(&self) -> Option<f64> {
        (self.mode == Mode::Float).then_some(self.tolerance)
    }

    fn params(&self) -> AtlasParams {
        AtlasParams {
            n_max: self.n_max,
            radius_floor: self.radius_floor.clone(),
            ..AtlasParams::default()
        }
    }

    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Validate { .. } => "validate",
            Command::Glue { .. } => "glue",
            Command::GlueSheaf { .. } => "glue-sheaf",
            Command::TepCheck { .. } => "tep-check",
            Command::GlueTep { .. } => "glue-tep",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "germglue", version, about = "Certified gluing of neighbourhood germs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
    #[command(flatten)]
    pub opts: CliOptions,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    /// Check identity, zero-section, inverse-pair and cocycle conditions of germ data.
    Validate { atlas: PathBuf },
    /// Validate, shrink and glue germ data into an atlas.
    Glue { atlas: PathBuf },
    /// Glue an atlas, then glue sheaf transition data over it.
    GlueSheaf { atlas: PathBuf, sheaf: PathBuf },
    /// Check the structure axioms and (IC), (GC), miniversality of TEP data.
    TepCheck { tep: PathBuf },
    /// Glue chart-wise TEP data (a JSON array of charts) over atlas and sheaf data.
    GlueTep {
        atlas: PathBuf,
        sheaf: PathBuf,
        tep: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct CliOptions {
    /// Truncation order override (base order for TEP data).
    #[arg(long, global = true)]
    pub order: Option<u32>,
    /// Truncation order in z for TEP data.
    #[arg(long, global = true)]
    pub z_order: Option<u32>,
    #[arg(long, value_enum, default_value_t = Mode::Exact, global = true)]
    pub mode: Mode,
    /// Coefficient tolerance in float mode; ignored in exact mode.
    #[arg(long, default_value_t = 1e-12, global = true)]
    pub tolerance: f64,
    /// Largest tube index tried by the shrinking search.
    #[arg(long, global = true)]
    pub n_max: Option<u64>,
    /// Smallest radius tried by halving searches, as `p/q`.
    #[arg(long, global = true)]
    pub radius_floor: Option<String>,
    /// Samples per audit check after gluing (0 skips the audits).
    #[arg(long, default_value_t = 0, global = true)]
    pub samples: usize,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Extra base point for the TEP checks, comma-separated rational coordinates.
    #[arg(long = "point", global = true)]
    pub points: Vec<String>,
    /// Output directory for report.json and summary.txt.
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT, global = true)]
    pub out: PathBuf,
}

impl Cli {
    pub fn into_job(self) -> Result<(JobSpec, PathBuf)> {
        let command = match self.command {
            CliCommand::Validate { atlas } => Command::Validate { atlas },
            CliCommand::Glue { atlas } => Command::Glue { atlas },
            CliCommand::GlueSheaf { atlas, sheaf } => Command::GlueSheaf { atlas, sheaf },
            CliCommand::TepCheck { tep } => Command::TepCheck { tep },
            CliCommand::GlueTep { atlas, sheaf, tep } => Command::GlueTep { atlas, sheaf, tep },
        };
        let o = self.opts;
        let mut job = JobSpec::new(command);
        job.order = o.order;
        job.z_order = o.z_order;
        job.mode = o.mode;
        job.tolerance = o.tolerance;
        if let Some(n) = o.n_max {
            job.n_max = n;
        }
        if let Some(f) = &o.radius_floor {
            job.radius_floor = parse_rational(f)?;
        }
        job.samples = o.samples;
        job.seed = o.seed;
        job.points = o
            .points
            .iter()
            .map(|p| p.split(',').map(|s| s.trim().to_string()).collect())
            .collect();
        Ok((job, o.out))
    }
}

/// Result of one run: the exit status and both report documents.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    pub summary: String,
}

impl RunOutcome {
    /// Pretty-printed report with a trailing newline.
    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report values serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(REPORT_FILE), self.report_json())?;
        fs::write(dir.join(SUMMARY_FILE), &self.summary)?;
        Ok(())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Shape(_) => "shape",
        Error::CompositionDomain(_) => "composition-domain",
        Error::NotInvertible => "not-invertible",
        Error::InvalidHom(_) => "invalid-hom",
        Error::Dimension { .. } => "dimension",
        Error::Validation { .. } => "validation",
        Error::Agreement { .. } => "agreement",
        Error::CertificateIncomplete(_) => "certificate-incomplete",
        Error::ShrinkExhausted(_) => "shrink-exhausted",
        Error::CoverageLoss(_) => "coverage-loss",
        Error::Domain(_) => "domain",
        Error::Schema(_) => "schema",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// Parsed stage results: the JSON body, a verdict and summary lines.
struct Stage {
    result: Value,
    ok: bool,
    lines: Vec<String>,
}

fn load_atlas(job: &JobSpec, path: &Path) -> Result<GermAtlas> {
    let input: GermAtlasInput = read_json(path)?;
    GermAtlas::from_input(&input, job.order, job.float_tol())
}

fn run_glue(job: &JobSpec, atlas: &GermAtlas) -> Result<(Stage, GlueOutcome)> {
    let outcome = glue(atlas, &job.params())?;
    let mut lines = vec![
        format!("charts: {}", outcome.atlas.charts.len()),
        format!(
            "nerve: {} edges, {} triangles",
            outcome.atlas.nerve.edges.len(),
            outcome.atlas.nerve.triangles.len()
        ),
        format!("hausdorff: {}", outcome.atlas.certificates.hausdorff),
        format!("triple-domain halvings: {}", outcome.cover.halvings),
    ];
    let mut ok = true;
    let mut result = json!({ "glue": to_value(&outcome) });
    if job.samples > 0 {
        let cover = audit_cover(atlas, &outcome.cover, job.samples, job.seed);
        let trans = audit_transitivity(atlas, &outcome.cover, job.samples, job.seed);
        let sep = audit_separation(atlas, &outcome.cover, job.samples, job.seed);
        for l in &cover.lines {
            lines.push(format!(
                "audit {}: {} samples, {} violations",
                l.check, l.tested, l.violations
            ));
        }
        lines.push(format!(
            "audit transitivity: {} chains, {} exact zero (max residual {:.3e}), {} membership failures",
            trans.chains,
            trans.exact_zero,
            crate::coeff::rational_to_f64(&trans.max_residual),
            trans.membership_failures
        ));
        lines.push(format!(
            "audit separation: {} pairs, {} unseparated",
            sep.pairs, sep.unseparated
        ));
        ok = cover.total_violations() == 0 && trans.membership_failures == 0 && sep.unseparated == 0;
        result["audit"] = json!({
            "cover": to_value(&cover),
            "transitivity": to_value(&trans),
            "separation": to_value(&sep),
        });
    }
    Ok((Stage { result, ok, lines }, outcome))
}

fn tep_orders(job: &JobSpec, doc: &TepDoc) -> Option<TepOrders> {
    (job.order.is_some() || job.z_order.is_some()).then(|| TepOrders {
        t: job.order.unwrap_or(doc.orders.t),
        z: job.z_order.unwrap_or(doc.orders.z),
    })
}

fn parse_points(job: &JobSpec) -> Result<Vec<Vec<Gaussian>>> {
    job.points
        .iter()
        .map(|p| {
            p.iter()
                .map(|s| Ok(Gaussian::new(parse_rational(s)?, Rational::from_integer(0.into()))))
                .collect()
        })
        .collect()
}

fn dispatch(job: &JobSpec) -> Result<Stage> {
    match &job.command {
        Command::Validate { atlas } => {
            let a = load_atlas(job, atlas)?;
            let report = validate_germ_data(&a)?;
            Ok(Stage {
                lines: vec![
                    format!("charts: {}", report.charts),
                    format!("cocycle checks: {}", report.cocycle_checks),
                    format!("inferred inverses: {}", report.inferred_inverses.len()),
                ],
                result: json!({ "validation": to_value(&report) }),
                ok: true,
            })
        }
        Command::Glue { atlas } => Ok(run_glue(job, &load_atlas(job, atlas)?)?.0),
        Command::GlueSheaf { atlas, sheaf } => {
            let a = load_atlas(job, atlas)?;
            let input: SheafInput = read_json(sheaf)?;
            let data = SheafData::from_input(&input, job.order, job.float_tol())?;
            let (mut stage, outcome) = run_glue(job, &a)?;
            let s = glue_sheaf(&data, &outcome.atlas, &job.radius_floor)?;
            stage
                .lines
                .push(format!("sheaf charts: {}, pairs: {}", s.charts.len(), s.pairs.len()));
            stage.result["sheaf"] = to_value(&s);
            Ok(stage)
        }
        Command::TepCheck { tep } => {
            let doc: TepDoc = read_json(tep)?;
            let d = TepData::from_doc(&doc, tep_orders(job, &doc), job.float_tol())?;
            let mut reports = vec![tep_check(&d, None, job.seed)?];
            for y in parse_points(job)? {
                reports.push(tep_check(&d, Some(&y), job.seed)?);
            }
            let ok = reports.iter().all(|r| r.axioms_hold());
            let lines = reports
                .iter()
                .map(|r| {
                    format!(
                        "point {}: flat {}, pairing {}, IC {}, GC {} (dims {:?}), miniversal {}",
                        crate::geometry::format_point(&r.point.0),
                        r.flatness.flat,
                        r.pairing.holds(),
                        r.ic,
                        r.gc.holds,
                        r.gc.dims,
                        r.miniversal.holds
                    )
                })
                .collect();
            Ok(Stage {
                result: json!({ "tep": to_value(&reports) }),
                ok,
                lines,
            })
        }
        Command::GlueTep { atlas, sheaf, tep } => {
            let a = load_atlas(job, atlas)?;
            let input: SheafInput = read_json(sheaf)?;
            let data = SheafData::from_input(&input, job.order, job.float_tol())?;
            let docs: Vec<TepDoc> = read_json(tep)?;
            let charts = docs
                .iter()
                .map(|d| TepData::from_doc(d, tep_orders(job, d), job.float_tol()))
                .collect::<Result<Vec<_>>>()?;
            let points = parse_points(job)?;
            let opts = GlueTepOptions {
                params: job.params(),
                sheaf_floor: job.radius_floor.clone(),
                points: a
                    .charts
                    .iter()
                    .flat_map(|c| {
                        points
                            .iter()
                            .filter(|y| c.w.contains_point(&y[..c.w.dim().min(y.len())]))
                            .map(|y| (c.id.clone(), y.clone()))
                            .collect::<Vec<_>>()
                    })
                    .collect(),
                seed: job.seed,
            };
            let cert = glue_tep(&charts, &a, &data, &opts)?;
            let lines = vec![
                format!("charts: {}", cert.charts.len()),
                format!(
                    "axioms hold on every chart: {}",
                    cert.charts.iter().all(|r| r.axioms_hold())
                ),
                format!("intertwining residuals: {}", cert.intertwining.len()),
                format!(
                    "miniversal at chart centers: {}",
                    cert.charts.iter().all(|r| r.miniversal.holds)
                ),
            ];
            Ok(Stage {
                ok: cert.valid,
                result: json!({ "glue_tep": to_value(&cert) }),
                lines,
            })
        }
    }
}

fn inputs(job: &JobSpec) -> Value {
    match &job.command {
        Command::Validate { atlas } | Command::Glue { atlas } => json!({ "atlas": file_label(atlas) }),
        Command::GlueSheaf { atlas, sheaf } => json!({ "atlas": file_label(atlas), "sheaf": file_label(sheaf) }),
        Command::TepCheck { tep } => json!({ "tep": file_label(tep) }),
        Command::GlueTep { atlas, sheaf, tep } => {
            json!({ "atlas": file_label(atlas), "sheaf": file_label(sheaf), "tep": file_label(tep) })
        }
    }
}

/// Runs one job. The returned documents depend only on the job and the input files.
pub fn run(job: &JobSpec) -> RunOutcome {
    let mut params = json!({
        "order": job.order,
        "z_order": job.z_order,
        "mode": job.mode,
        "n_max": job.n_max,
        "radius_floor": job.radius_floor.to_string(),
        "samples": job.samples,
        "seed": job.seed,
    });
    if job.mode == Mode::Float {
        params["tolerance"] = json!(job.tolerance);
    }
    let name = job.command_name();
    let mut report = json!({
        "version": REPORT_VERSION,
        "command": name,
        "inputs": inputs(job),
        "params": params,
    });
    let mut summary = format!("germglue {name}\n");
    let exit_code = match dispatch(job) {
        Ok(stage) => {
            let code = if stage.ok { 0 } else { 2 };
            report["status"] = json!(if stage.ok { "ok" } else { "failed" });
            report["exit_code"] = json!(code);
            report["result"] = stage.result;
            for l in &stage.lines {
                summary.push_str(&format!("  {l}\n"));
            }
            summary.push_str(&format!(
                "status: {} (exit {code})\n",
                if stage.ok { "ok" } else { "failed" }
            ));
            code
        }
        Err(e) => {
            let code = e.exit_code();
            report["status"] = json!("error");
            report["exit_code"] = json!(code);
            report["error"] = json!({
                "kind": error_kind(&e),
                "message": e.to_string(),
                "violations": to_value(&e.violations()),
            });
            summary.push_str(&format!("  error ({}): {e}\n", error_kind(&e)));
            for v in e.violations() {
                summary.push_str(&format!("    {v}\n"));
            }
            summary.push_str(&format!("status: error (exit {code})\n"));
            code
        }
    };
    RunOutcome {
        exit_code,
        report,
        summary,
    }
}

/// Parses arguments, runs the job, writes the documents and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    let (job, out) = match cli.into_job() {
        Ok(x) => x,
        Err(e) => {
            eprintln!("germglue: {e}");
            return e.exit_code();
        }
    };
    let outcome = run(&job);
    if let Err(e) = outcome.write(&out) {
        eprintln!("germglue: cannot write reports to {}: {e}", out.display());
        return 4;
    }
    print!("{}", outcome.summary);
    outcome.exit_code
}
