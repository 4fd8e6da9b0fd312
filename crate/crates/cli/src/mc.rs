use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use panelhc::montecarlo::{power_curves, run_replications, size_metrics, McConfig};
use panelhc::VcovKind;
use serde_json::{Map, Value};

use crate::table::{fmt_g, Format, Table};
use crate::Failure;

#[derive(Debug, Args)]
pub struct McArgs {
    /// JSON or TOML experiment file. Keys mirror the configuration fields,
    /// plus optional `grid` (list of [N, T] pairs) and `gammas`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cross-section sizes; every N is combined with every T.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long = "T", value_delimiter = ',')]
    pub t: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace a share of x1 cells with high-leverage draws.
    #[arg(long)]
    pub contaminate: bool,
    /// Also compute size-adjusted power curves.
    #[arg(long)]
    pub power: bool,
    /// Comma-separated estimator list (default: the four robust estimators).
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// The experiments requested by a file and the command line.
#[derive(Debug)]
pub struct Plan {
    pub base: McConfig,
    pub cells: Vec<(usize, usize)>,
    pub gammas: Vec<f64>,
}

fn read_config(path: &PathBuf) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        let table: toml::Table = toml::from_str(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        serde_json::to_value(table).map_err(|e| Failure::input(e.to_string()))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
    };
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(Failure::input(format!(
            "{}: expected a table of settings",
            path.display()
        ))),
    }
}

fn take<T: serde::de::DeserializeOwned>(
    map: &mut Map<String, Value>,
    key: &str,
) -> Result<Option<T>, Failure> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| Failure::input(format!("`{key}`: {e}"))))
        .transpose()
}

pub fn plan(args: &McArgs) -> Result<Plan, Failure> {
    let mut map = match &args.config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    let grid: Option<Vec<(usize, usize)>> = take(&mut map, "grid")?;
    let gammas: Option<Vec<f64>> = take(&mut map, "gammas")?;
    let mut base: McConfig = serde_json::from_value(Value::Object(map))
        .map_err(|e| Failure::input(format!("configuration: {e}")))?;

    if let Some(r) = args.reps {
        base.replications = r;
    }
    if let Some(s) = args.seed {
        base.seed = s;
    }
    if args.contaminate {
        base.contamination.enabled = true;
    }
    if !args.estimators.is_empty() {
        base.estimators = args
            .estimators
            .iter()
            .map(|s| s.parse::<VcovKind>())
            .collect::<Result<_, _>>()
            .map_err(Failure::input)?;
    }

    let cells = if !args.n.is_empty() || !args.t.is_empty() {
        let ns = if args.n.is_empty() {
            vec![base.n_units]
        } else {
            args.n.clone()
        };
        let ts = if args.t.is_empty() {
            vec![base.n_periods]
        } else {
            args.t.clone()
        };
        ns.iter()
            .flat_map(|&n| ts.iter().map(move |&t| (n, t)))
            .collect()
    } else {
        grid.unwrap_or_else(|| vec![(base.n_units, base.n_periods)])
    };
    let gammas = if !args.gamma.is_empty() {
        args.gamma.clone()
    } else {
        gammas.unwrap_or_else(|| vec![base.gamma])
    };

    for &(n, t) in &cells {
        for &gamma in &gammas {
            let cfg = McConfig {
                n_units: n,
                n_periods: t,
                gamma,
                ..base.clone()
            };
            cfg.validate().map_err(|e| Failure::from_error(e, None))?;
        }
    }
    if args.power && base.power_grid.is_empty() {
        return Err(Failure::input("power requested with an empty power_grid"));
    }
    Ok(Plan {
        base,
        cells,
        gammas,
    })
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var("PANEL_HC_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Failure::input(format!(
                    "PANEL_HC_THREADS must be a positive integer, got `{v}`"
                ))
            }),
        _ => Ok(None),
    }
}

pub fn run_mc(args: &McArgs) -> Result<(), Failure> {
    let plan = plan(args)?;
    let threads = threads()?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::input(format!("{}: {e}", args.out_dir.display())))?;

    let columns = [
        "N",
        "T",
        "gamma",
        "estimator",
        "pb_b1",
        "pb_b2",
        "rp_single",
        "rp_joint",
        "rmse",
        "replications",
        "failures",
    ];
    let mut metrics = Table::new(columns);
    let mut summary = Table::new(columns[..9].iter().copied());
    let mut power_files = BTreeSet::new();

    for &(n, t) in &plan.cells {
        for &gamma in &plan.gammas {
            let cfg = McConfig {
                n_units: n,
                n_periods: t,
                gamma,
                ..plan.base.clone()
            };
            let run = run_replications(&cfg, threads).map_err(|e| Failure::from_error(e, None))?;
            let m = size_metrics(&run).map_err(|e| Failure::from_error(e, None))?;
            if let Some(w) = &m.warning {
                eprintln!("warning: N={n} T={t} gamma={}: {w}", fmt_g(gamma, 6));
            }
            for e in &m.estimators {
                let cell = |x: f64, sig| fmt_g(x, sig);
                let lead = vec![
                    n.to_string(),
                    t.to_string(),
                    fmt_g(gamma, 17),
                    e.kind.to_string(),
                ];
                let nums = [e.pb_b1, e.pb_b2, e.rp_single, e.rp_joint, e.rmse];
                let mut row = lead.clone();
                row.extend(nums.iter().map(|&x| cell(x, 17)));
                row.push(m.replications.to_string());
                row.push(m.failures.to_string());
                metrics.push(row);
                let mut human = lead;
                human[2] = fmt_g(gamma, 6);
                human.extend(nums.iter().map(|&x| cell(x, 6)));
                summary.push(human);
            }

            if args.power {
                let curves = power_curves(&run, &cfg.power_grid)
                    .map_err(|e| Failure::from_error(e, None))?;
                let mut table = Table::new([
                    "estimator",
                    "beta1_alt",
                    "rejection_rate",
                    "joint_rejection_rate",
                ]);
                for c in &curves {
                    for p in &c.points {
                        table.push(vec![
                            c.kind.to_string(),
                            fmt_g(p.beta1_alt, 17),
                            fmt_g(p.rejection_rate, 17),
                            fmt_g(p.joint_rejection_rate, 17),
                        ]);
                    }
                }
                let name = format!("power_N{n}_T{t}_g{}.csv", fmt_g(gamma, 6));
                if !power_files.insert(name.clone()) {
                    return Err(Failure::input(format!("duplicate experiment cell {name}")));
                }
                write(&args.out_dir.join(name), &table.render(Format::Csv))?;
            }
        }
    }

    write(
        &args.out_dir.join("metrics.csv"),
        &metrics.render(Format::Csv),
    )?;
    print!("{}", summary.render(Format::Markdown));
    Ok(())
}

fn write(path: &std::path::Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}
