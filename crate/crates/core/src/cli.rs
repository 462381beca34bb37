//! The `cevpolar` command line.
//!
//! Exit codes: 0 on success, 1 for bad input or configuration, 2 when the
//! numerics fail (quadrature, degenerate importance weights).

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{config_hash, parse_grid, Format, ModelSpec, RunConfig};
use crate::diagnostics::{
    convergence_sweep, independence_condition_check, joint_exceedance_decay, level_rng, OracleGrid,
};
use crate::error::{Error, Result};
use crate::limits::{
    limit_law_of, normalization, quantile_y_asymptotic, second_order_conditional, survival_x_asymptotic, LimitLaw,
};
use crate::model::WeightedSample;

#[derive(Parser, Debug)]
#[command(
    name = "cevpolar",
    version,
    about = "Conditional extreme-value limits of polar bivariate models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Defaults to json for a `.json` output path, csv otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw (X, Y) pairs, or weighted pairs given X > threshold.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of draws [default: 1000].
        #[arg(long)]
        n: Option<usize>,
        /// Sample given X > threshold, with importance weights.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Tabulate the limit law H_{eta,zeta}, given directly or from a model.
    Limit {
        #[arg(short, long, conflicts_with_all = ["eta", "zeta"])]
        config: Option<PathBuf>,
        #[arg(long, requires = "zeta")]
        eta: Option<f64>,
        #[arg(long, requires = "eta")]
        zeta: Option<f64>,
        /// Mass of the left half-line.
        #[arg(long, default_value_t = 0.5)]
        weight_minus: f64,
        /// Stretch of the left half-line.
        #[arg(long, default_value_t = 1.0)]
        scale_minus: f64,
        /// `lo:hi:step` or a comma list.
        #[arg(long, default_value = "-5:5:0.1", allow_hyphen_values = true)]
        grid: String,
        #[command(flatten)]
        out: Output,
    },
    /// Threshold sweep: KS distance of conditional samples and oracle
    /// distance to the limit; for a mixture, exact conditional CDFs.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Quantile levels of the radius defining the thresholds [default: 0.99,0.999,0.9999].
        #[arg(long, allow_hyphen_values = true)]
        levels: Option<String>,
        /// Draws per level [default: 10000].
        #[arg(long)]
        n: Option<usize>,
        /// Skip the quadrature oracle.
        #[arg(long)]
        no_oracle: bool,
        /// Standardized x points of the oracle grid; for a mixture, raw x [default: 8,16,32].
        #[arg(long, allow_hyphen_values = true)]
        x_grid: Option<String>,
        /// Standardized y points of the oracle grid.
        #[arg(long, allow_hyphen_values = true)]
        y_grid: Option<String>,
        /// Mixture only: z points [default: -1,0,1].
        #[arg(long, allow_hyphen_values = true)]
        z_grid: Option<String>,
    },
    /// Marginal tail: oracle P(X > x) against its asymptotic equivalent, or
    /// with --t-grid the Y-quantile against v* b(t).
    Tail {
        #[command(flatten)]
        common: Common,
        /// Points x for P(X > x) [default: 3:8:1].
        #[arg(long, allow_hyphen_values = true)]
        x_grid: Option<String>,
        /// Return periods t for the Y-quantile b_Y(t).
        #[arg(long, allow_hyphen_values = true)]
        t_grid: Option<String>,
    },
    /// Asymptotic-independence ratio and joint-exceedance decay.
    Independence {
        #[command(flatten)]
        common: Common,
        /// Return periods t [default: exponents 2:6:1].
        #[arg(long, allow_hyphen_values = true)]
        t_grid: Option<String>,
        /// Read grid values as base-10 exponents.
        #[arg(long)]
        log10: bool,
        /// Standardized x of the joint exceedance [default: 0].
        #[arg(long, allow_hyphen_values = true)]
        x_std: Option<f64>,
        /// Standardized y of both checks [default: 0].
        #[arg(long, allow_hyphen_values = true)]
        y_std: Option<f64>,
    },
    /// First-order and shift-corrected conditional probabilities against the oracle.
    SecondOrder {
        #[command(flatten)]
        common: Common,
        /// Conditioning levels x [default: 6,8,10].
        #[arg(long, allow_hyphen_values = true)]
        x_grid: Option<String>,
        /// Standardized y points z [default: -1,0,1].
        #[arg(long, allow_hyphen_values = true)]
        z_grid: Option<String>,
    },
    /// Decompose a density spec into its polar model.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
}

/// Rows plus the JSON payload of one command.
struct Artifact {
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
    /// Extra `# key: value` lines for CSV.
    notes: Vec<(String, String)>,
    data: Value,
}

impl Artifact {
    fn table(columns: Vec<&'static str>, rows: Vec<Vec<f64>>) -> Self {
        let data = Value::Object(
            columns
                .iter()
                .enumerate()
                .map(|(j, c)| (c.to_string(), json!(rows.iter().map(|r| r[j]).collect::<Vec<f64>>())))
                .collect(),
        );
        Artifact {
            columns,
            rows,
            notes: Vec::new(),
            data,
        }
    }
}

struct Metadata {
    command: &'static str,
    hash: String,
    seed: Option<u64>,
}

fn write_artifact(art: &Artifact, meta: &Metadata, path: Option<&PathBuf>, format: Format) -> Result<()> {
    let mut sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match format {
        Format::Csv => {
            writeln!(sink, "# cevpolar {}", env!("CARGO_PKG_VERSION"))?;
            writeln!(sink, "# command: {}", meta.command)?;
            writeln!(sink, "# config_sha256: {}", meta.hash)?;
            match meta.seed {
                Some(s) => writeln!(sink, "# seed: {s}")?,
                None => writeln!(sink, "# seed: none")?,
            }
            for (k, v) in &art.notes {
                writeln!(sink, "# {k}: {v}")?;
            }
            writeln!(sink, "{}", art.columns.join(","))?;
            for row in &art.rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(sink, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let doc = json!({
                "metadata": {
                    "tool": "cevpolar",
                    "version": env!("CARGO_PKG_VERSION"),
                    "command": meta.command,
                    "config_sha256": meta.hash,
                    "seed": meta.seed,
                },
                "data": art.data,
            });
            serde_json::to_writer_pretty(&mut sink, &doc)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn pick_format(out: &Output, cfg: Option<&RunConfig>, path: Option<&PathBuf>) -> Format {
    if let Some(f) = out.format {
        return f.into();
    }
    if let Some(f) = cfg.and_then(|c| c.format) {
        return f;
    }
    match path.and_then(|p| p.extension()) {
        Some(e) if e == "json" => Format::Json,
        _ => Format::Csv,
    }
}

fn grid_or(flag: &Option<String>, from_cfg: &Option<Vec<f64>>, default: &str) -> Result<Vec<f64>> {
    match (flag, from_cfg) {
        (Some(s), _) => parse_grid(s),
        (None, Some(v)) => Ok(v.clone()),
        (None, None) => parse_grid(default),
    }
}

fn require_seed(flag: Option<u64>, cfg: &RunConfig) -> Result<u64> {
    flag.or(cfg.seed).ok_or_else(|| {
        Error::Config("missing --seed: sampling commands need a seed (flag or \"seed\" in the config)".into())
    })
}

/// What gets hashed: the command, the model and every resolved parameter.
#[derive(Serialize)]
struct Resolved<'a> {
    command: &'a str,
    model: Option<&'a ModelSpec>,
    seed: Option<u64>,
    params: Value,
}

fn finish(
    command: &'static str,
    art: Artifact,
    cfg: Option<&RunConfig>,
    seed: Option<u64>,
    params: Value,
    out: &Output,
) -> Result<()> {
    let hash = config_hash(&Resolved {
        command,
        model: cfg.map(|c| &c.model),
        seed,
        params,
    })?;
    let path = out.output.clone().or_else(|| cfg.and_then(|c| c.output.clone()));
    let format = pick_format(out, cfg, path.as_ref());
    write_artifact(&art, &Metadata { command, hash, seed }, path.as_ref(), format)
}

fn sample_rows(s: &WeightedSample) -> Vec<Vec<f64>> {
    s.pairs
        .iter()
        .zip(&s.weights)
        .map(|(p, &w)| vec![p.0, p.1, w])
        .collect()
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { common, n, threshold } => {
            let cfg = RunConfig::load(&common.config)?;
            let seed = require_seed(common.seed, &cfg)?;
            let n = n.or(cfg.params.n).unwrap_or(1000);
            let threshold = threshold.or(cfg.params.threshold);
            let mut rng = level_rng(seed, 0);
            let mut art = match (&cfg.model, threshold) {
                (ModelSpec::Mixture(m), None) => {
                    let w = 1.0 / n as f64;
                    let rows = m
                        .sample_joint(n, &mut rng)
                        .into_iter()
                        .map(|(x, y)| vec![x, y, w])
                        .collect();
                    Artifact::table(vec!["x", "y", "weight"], rows)
                }
                (ModelSpec::Mixture(_), Some(_)) => {
                    return Err(Error::Config("conditional sampling needs a polar model".into()))
                }
                (spec, None) => {
                    let m = spec.polar()?;
                    let w = 1.0 / n as f64;
                    let rows = m
                        .sample_joint(n, &mut rng)
                        .into_iter()
                        .map(|(x, y)| vec![x, y, w])
                        .collect();
                    Artifact::table(vec!["x", "y", "weight"], rows)
                }
                (spec, Some(t)) => {
                    let s = spec.polar()?.sample_conditional(t, n, &mut rng)?;
                    let mut art = Artifact::table(vec!["x", "y", "weight"], sample_rows(&s));
                    art.notes.push(("effective_size".into(), s.effective_size.to_string()));
                    if let Value::Object(map) = &mut art.data {
                        map.insert("effective_size".into(), json!(s.effective_size));
                    }
                    art
                }
            };
            art.notes.push(("n".into(), n.to_string()));
            finish(
                "simulate",
                art,
                Some(&cfg),
                Some(seed),
                json!({"n": n, "threshold": threshold}),
                &common.out,
            )
        }
        Command::Limit {
            config,
            eta,
            zeta,
            weight_minus,
            scale_minus,
            grid,
            out,
        } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let law = match (&cfg, eta, zeta) {
                (Some(c), _, _) => limit_law_of(&c.model.polar()?)?,
                (None, Some(e), Some(z)) => LimitLaw::asymmetric(e, z, weight_minus, 1.0 - weight_minus, scale_minus)
                    .map_err(|e| Error::Config(e.to_string()))?,
                _ => return Err(Error::Config("limit needs --eta and --zeta, or --config".into())),
            };
            let ys = parse_grid(&grid)?;
            let rows = ys.iter().map(|&y| vec![y, law.cdf(y), law.pdf(y)]).collect();
            let mut art = Artifact::table(vec!["y", "cdf", "pdf"], rows);
            art.notes.push(("law".into(), serde_json::to_string(&law)?));
            if let Value::Object(map) = &mut art.data {
                map.insert("law".into(), serde_json::to_value(law)?);
            }
            finish("limit", art, cfg.as_ref(), None, json!({"law": law, "grid": ys}), &out)
        }
        Command::Verify {
            common,
            levels,
            n,
            no_oracle,
            x_grid,
            y_grid,
            z_grid,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            if let ModelSpec::Mixture(m) = &cfg.model {
                let xs = grid_or(&x_grid, &cfg.params.x_grid, "8,16,32")?;
                let zs = grid_or(&z_grid, &cfg.params.z_grid, "-1,0,1")?;
                let mut rows = Vec::new();
                for &x in &xs {
                    for &z in &zs {
                        let exact = m.conditional_cdf(x, z)?;
                        let limit = m.limit_cdf(z);
                        rows.push(vec![x, z, exact, limit, (exact - limit).abs()]);
                    }
                }
                let art = Artifact::table(vec!["x", "z", "exact", "limit", "gap"], rows);
                let params = json!({"x_grid": xs, "z_grid": zs});
                return finish("verify", art, Some(&cfg), cfg.seed, params, &common.out);
            }
            let seed = require_seed(common.seed, &cfg)?;
            let model = cfg.model.polar()?;
            let levels = grid_or(&levels, &cfg.params.levels, "0.99,0.999,0.9999")?;
            let n = n.or(cfg.params.n).unwrap_or(10_000);
            let mut grid = OracleGrid::default();
            if let Some(x) = x_grid
                .as_deref()
                .map(parse_grid)
                .transpose()?
                .or(cfg.params.x_grid.clone())
            {
                grid.x = x;
            }
            if let Some(y) = y_grid
                .as_deref()
                .map(parse_grid)
                .transpose()?
                .or(cfg.params.y_grid.clone())
            {
                grid.y = y;
            }
            let oracle = (!no_oracle).then_some(&grid);
            let report = convergence_sweep(&model, &levels, n, seed, oracle)?;
            let rows = (0..report.thresholds.len())
                .map(|i| {
                    vec![
                        report.levels[i],
                        report.thresholds[i],
                        report.ks_distances[i],
                        report.effective_sizes[i],
                        report.oracle_distances[i].unwrap_or(f64::NAN),
                    ]
                })
                .collect();
            let mut art = Artifact::table(vec!["level", "threshold", "ks", "eff_size", "oracle_dist"], rows);
            art.notes.push(("pass".into(), report.pass.to_string()));
            art.data = serde_json::to_value(&report)?;
            let params = json!({"levels": levels, "n": n, "oracle_grid": oracle});
            finish("verify", art, Some(&cfg), Some(seed), params, &common.out)
        }
        Command::Tail { common, x_grid, t_grid } => {
            let cfg = RunConfig::load(&common.config)?;
            let model = cfg.model.polar()?;
            let ts = t_grid
                .as_deref()
                .map(parse_grid)
                .transpose()?
                .or(cfg.params.t_grid.clone());
            let (art, params) = if let Some(ts) = ts {
                let mut rows = Vec::new();
                for &t in &ts {
                    let exact = model.quantile_y(t)?;
                    let asym = quantile_y_asymptotic(&model, t)?;
                    rows.push(vec![t, exact, asym, exact / asym]);
                }
                (
                    Artifact::table(vec!["t", "b_y", "v_star_b", "ratio"], rows),
                    json!({"t_grid": ts}),
                )
            } else {
                let xs = grid_or(&x_grid, &cfg.params.x_grid, "3:8:1")?;
                let mut rows = Vec::new();
                for &x in &xs {
                    let exact = model.survival_x(x)?;
                    let asym = survival_x_asymptotic(&model, x)?;
                    rows.push(vec![x, exact, asym, asym / exact]);
                }
                (
                    Artifact::table(vec!["x", "oracle", "asymptotic", "ratio"], rows),
                    json!({"x_grid": xs}),
                )
            };
            finish("tail", art, Some(&cfg), cfg.seed, params, &common.out)
        }
        Command::Independence {
            common,
            t_grid,
            log10,
            x_std,
            y_std,
        } => {
            let cfg = RunConfig::load(&common.config)?;
            let model = cfg.model.polar()?;
            let mut ts = grid_or(&t_grid, &cfg.params.t_grid, "2:6:1")?;
            if log10 || (t_grid.is_none() && cfg.params.t_grid.is_none()) {
                ts.iter_mut().for_each(|t| *t = 10f64.powf(*t));
            }
            let x_std = x_std.or(cfg.params.x_std).unwrap_or(0.0);
            let y_std = y_std.or(cfg.params.y_std).unwrap_or(0.0);
            let ratio = independence_condition_check(&model, y_std, &ts)?;
            let decay = joint_exceedance_decay(&model, x_std, y_std, &ts)?;
            let rows = (0..ts.len())
                .map(|i| vec![ts[i], ratio.values[i], decay.values[i]])
                .collect();
            let mut art = Artifact::table(vec!["t", "ratio", "t_joint_exceedance"], rows);
            art.notes.push(("ratio_pass".into(), ratio.pass.to_string()));
            art.notes.push(("decay_pass".into(), decay.pass.to_string()));
            art.notes
                .push(("psi_y".into(), "v* times the radial auxiliary function".into()));
            if let Value::Object(map) = &mut art.data {
                map.insert("ratio_pass".into(), json!(ratio.pass));
                map.insert("decay_pass".into(), json!(decay.pass));
            }
            let params = json!({"t_grid": ts, "x_std": x_std, "y_std": y_std});
            finish("independence", art, Some(&cfg), cfg.seed, params, &common.out)
        }
        Command::SecondOrder { common, x_grid, z_grid } => {
            let cfg = RunConfig::load(&common.config)?;
            let model = cfg.model.polar()?;
            let xs = grid_or(&x_grid, &cfg.params.x_grid, "6,8,10")?;
            let zs = grid_or(&z_grid, &cfg.params.z_grid, "-1,0,1")?;
            let rho = model.curve.rho();
            let mut rows = Vec::new();
            for &x in &xs {
                for &z in &zs {
                    let s = second_order_conditional(&model, x, z)?;
                    let oracle = model.conditional_cdf_raw(x, f64::INFINITY, rho * x + s.scale * z)?;
                    rows.push(vec![x, z, oracle, s.first_order, s.corrected, s.shift]);
                }
            }
            let art = Artifact::table(vec!["x", "z", "oracle", "first_order", "corrected", "shift"], rows);
            let params = json!({"x_grid": xs, "z_grid": zs});
            finish("second-order", art, Some(&cfg), cfg.seed, params, &common.out)
        }
        Command::Decompose { common } => {
            let cfg = RunConfig::load(&common.config)?;
            let model = cfg.model.polar()?;
            let law = limit_law_of(&model)?;
            let rows = (0..=1000)
                .map(|i| {
                    let t = i as f64 / 1000.0;
                    vec![t, model.angular.density(t), model.curve.u(t), model.curve.v(t)]
                })
                .collect();
            let mut art = Artifact::table(vec!["t", "angular_density", "u", "v"], rows);
            art.notes.push(("radial".into(), model.radial.name().into()));
            art.data = json!({"model": model, "limit_law": law, "frame_at_10": normalization(&model, 10.0).ok()});
            finish("decompose", art, Some(&cfg), cfg.seed, json!({}), &common.out)
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) if e.is_numeric() => {
            eprintln!("error: {e}");
            let payload = json!({"error": "numeric", "message": e.to_string()});
            eprintln!("{payload}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
