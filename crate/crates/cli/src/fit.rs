use std::path::{Path, PathBuf};

use clap::Args;
use panelhc::inference::residual_df;
use panelhc::vcov::estimate;
use panelhc::{
    conf_interval, fit_within, leverage, load_csv, t_test, within_transform, ColumnSpec, Error,
    PanelDataset, Phc6Options, VcovEstimate, VcovKind,
};

use crate::table::{fmt_g, fmt_opt, Format, Table};
use crate::{emit, Failure};

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column.
    #[arg(long)]
    pub y: String,
    /// Regressor columns, comma-separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub x: Vec<String>,
    #[arg(long, default_value = "unit")]
    pub unit: String,
    #[arg(long, default_value = "time")]
    pub time: String,
    /// Units whose maximal leverage ratio reaches this value are flagged for PHC6.
    #[arg(long, default_value_t = 2.0)]
    pub threshold: f64,
}

impl DataArgs {
    fn load(&self) -> Result<PanelDataset, Failure> {
        let spec = ColumnSpec {
            unit: self.unit.clone(),
            time: self.time.clone(),
            y: self.y.clone(),
            x: self.x.clone(),
        };
        let data = load_csv(&self.data, &spec).map_err(|e| Failure::from_error(e, None))?;
        let report = data.validation_report();
        if !report.singleton_units.is_empty() {
            let ids: Vec<String> = report
                .singleton_units
                .iter()
                .map(|l| l.to_string())
                .collect();
            eprintln!(
                "warning: {} unit(s) observed once contribute nothing to the within fit: {}",
                ids.len(),
                ids.join(", ")
            );
        }
        Ok(data)
    }

    fn phc6(&self) -> Result<Phc6Options, Failure> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Failure::input(format!(
                "--threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(Phc6Options {
            threshold: self.threshold,
            ..Phc6Options::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// conventional, robust, phc3, phc6 or jackknife.
    #[arg(long, default_value = "conventional")]
    pub vce: String,
    /// Confidence level in percent.
    #[arg(long, default_value_t = 95.0)]
    pub level: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv, tsv or markdown.
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// Also write the covariance matrix (JSON when the name ends in .json, CSV otherwise).
    #[arg(long)]
    pub vcov_out: Option<PathBuf>,
}

pub fn parse_format(s: &str) -> Result<Format, Failure> {
    Format::parse(s).ok_or_else(|| Failure::input(format!("unknown format `{s}`")))
}

pub fn run_fit(args: &FitArgs) -> Result<(), Failure> {
    let kind: VcovKind = args.vce.parse().map_err(Failure::input)?;
    let format = parse_format(&args.format)?;
    if !(args.level > 0.0 && args.level < 100.0) {
        return Err(Failure::input(format!(
            "--level must lie strictly between 0 and 100, got {}",
            args.level
        )));
    }
    let opts = args.data.phc6()?;
    let data = args.data.load()?;
    let panel = within_transform(&data);
    let est = |e: Error| Failure::from_error(e, Some(&data));
    let fit = fit_within(&panel).map_err(est)?;
    let v = estimate(kind, &fit, &panel, None, opts).map_err(est)?;

    let sig = format.digits();
    let mut table = Table::new(["name", "coef", "se", "t", "p", "ci_lo", "ci_hi"]);
    let se = v.std_errors();
    for (j, name) in panel.column_names().iter().enumerate() {
        let (t, p) = match t_test(&fit, &v, j, 0.0) {
            Ok(r) => (Some(r.statistic), Some(r.p_value)),
            Err(Error::InfiniteStatistic) => (None, None),
            Err(e) => return Err(est(e)),
        };
        let (lo, hi) = conf_interval(&fit, &v, j, args.level / 100.0).map_err(est)?;
        table.push(vec![
            name.clone(),
            fmt_g(fit.beta[j], sig),
            fmt_g(se[j], sig),
            fmt_opt(t, sig),
            fmt_opt(p, sig),
            fmt_g(lo, sig),
            fmt_g(hi, sig),
        ]);
    }

    let flagged = if kind == VcovKind::Phc6 {
        v.flagged_units.len().to_string()
    } else {
        ".".into()
    };
    let footer = [
        ("N", fit.n_units.to_string()),
        ("n", fit.n_obs.to_string()),
        ("k", fit.k.to_string()),
        ("df", fmt_g(residual_df(&fit, kind), sig)),
        ("vce", kind.name().to_string()),
        ("phc6_flagged", flagged),
    ];
    let mut out = table.render(format);
    match format {
        Format::Markdown => {
            out.push('\n');
            for (key, val) in &footer {
                out.push_str(&format!("{key} = {val}\n"));
            }
        }
        Format::Csv | Format::Tsv => {
            for (key, val) in &footer {
                out.push_str(&format!("# {key}: {val}\n"));
            }
        }
    }
    emit(args.out.as_deref(), &out)?;
    if let Some(path) = &args.vcov_out {
        write_vcov(path, &v, panel.column_names())?;
    }
    Ok(())
}

fn write_vcov(path: &Path, v: &VcovEstimate, names: &[String]) -> Result<(), Failure> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut buf = Vec::new();
    if is_json {
        buf.extend_from_slice(v.to_json().as_bytes());
        buf.push(b'\n');
    } else {
        v.write_csv(names, &mut buf)
            .map_err(|e| Failure::input(e.to_string()))?;
    }
    std::fs::write(path, buf).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

#[derive(Debug, Args)]
pub struct DiagnosticsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or tsv.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

pub fn run_diagnostics(args: &DiagnosticsArgs) -> Result<(), Failure> {
    let format = parse_format(&args.format)?;
    let opts = args.data.phc6()?;
    let data = args.data.load()?;
    let panel = within_transform(&data);
    let est = |e: Error| Failure::from_error(e, Some(&data));
    let fit = fit_within(&panel).map_err(est)?;
    let lev = leverage(&fit, &panel).map_err(est)?;

    let sig = format.digits();
    let mut table = Table::new([
        "unit",
        "time",
        "fitted",
        "demeaned_residual",
        "h_itt",
        "h_bar_tt",
        "h_star_i",
        "flagged",
    ]);
    for (i, u) in data.units().iter().enumerate() {
        let resid = &fit.residuals[i];
        for r in 0..u.len() {
            let pos = panel.units()[i].time_pos[r];
            table.push(vec![
                u.id.to_string(),
                u.times[r].to_string(),
                fmt_g(u.y[r] - resid[r], sig),
                fmt_g(resid[r], sig),
                fmt_g(lev.diag[i][r], sig),
                fmt_opt(lev.h_bar[pos], sig),
                fmt_g(lev.h_star[i], sig),
                (lev.h_star[i] >= opts.threshold).to_string(),
            ]);
        }
    }
    emit(args.out.as_deref(), &table.render(format))
}
