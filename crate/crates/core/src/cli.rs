//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 data or config
//! error. Output files are written to a temporary file and renamed into
//! place, so a failed run leaves no partial output behind.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    build_matrix, generate_synthetic, load_provider_map, parse_interactions, write_interactions,
    Dialect, InteractionMatrix, ItemProviderMap, ScalingScheme, SyntheticConfig,
};
use crate::fairness::{audit, AuditConfig, GapReport, ProviderMapMode};
use crate::popularity::{compute_popularity, partition_long_tail, Boundaries, Group};
use crate::recommenders::{Algorithm, RecommenderConfig};

pub const OUTPUT_DIR_ENV: &str = "FAIRTAIL_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "fairtail",
    version,
    about = "Audit provider-side popularity bias of recommenders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit recommenders and report GAP / ΔGAP per provider group.
    Audit(AuditArgs),
    /// Write the provider popularity distribution (popularity.csv).
    Stats(DataArgs),
    /// Split providers into High-P / Mid-P / Low-P (groups.csv).
    Groups(GroupArgs),
    /// Generate Zipf-distributed interactions (interactions.tsv).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Interactions file: user<TAB>item<TAB>count.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Item to provider map: item<TAB>provider.
    #[arg(long)]
    pub provider_map: Option<PathBuf>,
    /// Treat every item as its own provider.
    #[arg(long)]
    pub identity_providers: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GroupArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub groups: GroupArgs,
    /// Comma-separated: userknn,nmf,useritemavg,mostpop,random.
    #[arg(long)]
    pub algorithms: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub factors: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub reg: Option<f64>,
    /// raw | log | minmax
    #[arg(long)]
    pub scaling: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub exclude_seen: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub events: Option<u64>,
    #[arg(long)]
    pub exponent: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "input",
    "provider_map",
    "identity_providers",
    "output_dir",
    "algorithms",
    "n",
    "k",
    "factors",
    "epochs",
    "reg",
    "scaling",
    "beta1",
    "beta2",
    "seed",
    "exclude_seen",
    "users",
    "items",
    "events",
    "exponent",
];

/// Parsed `key = value` config file.
#[derive(Debug, Default)]
struct Settings {
    path: Option<PathBuf>,
    values: BTreeMap<String, (usize, String)>,
}

impl Settings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Data(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    idx + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Data(format!(
                    "{}:{}: unknown key `{key}`",
                    path.display(),
                    idx + 1
                )));
            }
            values.insert(key, (idx + 1, value.trim().to_owned()));
        }
        Ok(Self {
            path: Some(path.to_owned()),
            values,
        })
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.values.get(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, value)) = self.raw(key) else {
            return Ok(None);
        };
        value.parse().map(Some).map_err(|e| {
            let path = self.path.as_deref().unwrap_or(Path::new("<config>"));
            CliError::Data(format!(
                "{}:{line}: invalid value for `{key}`: {e}",
                path.display()
            ))
        })
    }

    /// Command-line value if given, else the config file's.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Flag(bool);

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(Flag(true)),
            "false" | "0" | "no" => Ok(Flag(false)),
            other => Err(format!("expected true or false, got `{other}`")),
        }
    }
}

fn parse_flag<T: FromStr>(name: &str, value: Option<String>) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .map(|v| {
            v.parse()
                .map_err(|e| CliError::Usage(format!("--{name}: {e}")))
        })
        .transpose()
}

fn resolve_output_dir(flag: Option<PathBuf>, settings: &Settings) -> CliResult<PathBuf> {
    if let Some(dir) = settings.pick(flag.map(|p| p.display().to_string()), "output_dir")? {
        return Ok(PathBuf::from(dir));
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
        _ => Ok(PathBuf::from(".")),
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes every file via a temporary sibling, renaming only once all
/// temporaries are complete.
fn write_outputs(dir: &Path, files: &[(&str, String)]) -> CliResult<Vec<PathBuf>> {
    let io_err = |e: std::io::Error| CliError::Data(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        tmp.write_all(contents.as_bytes()).map_err(io_err)?;
        tmp.flush().map_err(io_err)?;
        staged.push((tmp, dir.join(name)));
    }
    staged
        .into_iter()
        .map(|(tmp, target)| {
            tmp.persist(&target)
                .map_err(|e| CliError::Data(format!("{}: {}", target.display(), e.error)))?;
            Ok(target)
        })
        .collect()
}

struct LoadedData {
    matrix: InteractionMatrix,
    map: ItemProviderMap,
    mode: ProviderMapMode,
}

fn load_data(args: &DataArgs, settings: &Settings) -> CliResult<LoadedData> {
    let input: PathBuf = settings
        .pick(
            args.input.as_ref().map(|p| p.display().to_string()),
            "input",
        )?
        .map(PathBuf::from)
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let provider_path: Option<PathBuf> = settings
        .pick(
            args.provider_map.as_ref().map(|p| p.display().to_string()),
            "provider_map",
        )?
        .map(PathBuf::from);
    let identity = args.identity_providers
        || settings
            .get::<Flag>("identity_providers")?
            .is_some_and(|f| f.0);
    if identity && provider_path.is_some() {
        return Err(CliError::Usage(
            "--provider-map and --identity-providers are mutually exclusive".into(),
        ));
    }

    let text = read_file(&input)?;
    let records = parse_interactions(&text, &Dialect::default())
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let matrix =
        build_matrix(&records).map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;
    let (map, mode) = match provider_path {
        Some(path) => {
            let text = read_file(&path)?;
            let map = load_provider_map(&text, &matrix)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let source = path.display().to_string();
            (map, ProviderMapMode::Explicit { source })
        }
        None => (
            ItemProviderMap::identity(&matrix),
            ProviderMapMode::Identity,
        ),
    };
    Ok(LoadedData { matrix, map, mode })
}

fn resolve_boundaries(args: &GroupArgs, settings: &Settings) -> CliResult<Boundaries> {
    let defaults = Boundaries::default();
    let beta1 = settings
        .pick(args.beta1, "beta1")?
        .unwrap_or(defaults.beta1);
    let beta2 = settings
        .pick(args.beta2, "beta2")?
        .unwrap_or(defaults.beta2);
    Boundaries::new(beta1, beta2).map_err(|e| CliError::Usage(e.to_string()))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn resolve_audit_config(
    args: &AuditArgs,
    settings: &Settings,
    mode: ProviderMapMode,
) -> CliResult<AuditConfig> {
    let algorithms: Vec<Algorithm> = match settings.pick(args.algorithms.clone(), "algorithms")? {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(CliError::Usage))
            .collect::<CliResult<_>>()?,
        None => Algorithm::ALL.to_vec(),
    };
    if algorithms.is_empty() {
        return Err(CliError::Usage("--algorithms selects no algorithm".into()));
    }
    let scaling: ScalingScheme = match settings.pick(args.scaling.clone(), "scaling")? {
        Some(s) => s.parse().map_err(CliError::Usage)?,
        None => ScalingScheme::Raw,
    };
    let exclude_seen = match parse_flag::<Flag>("exclude-seen", args.exclude_seen.clone())? {
        Some(f) => f.0,
        None => settings.get::<Flag>("exclude_seen")?.is_none_or(|f| f.0),
    };
    let seed = settings.pick(args.seed, "seed")?.unwrap_or(0);
    let n = settings
        .pick(args.n, "n")?
        .unwrap_or(RecommenderConfig::DEFAULT_N);
    let k = settings
        .pick(args.k, "k")?
        .unwrap_or(RecommenderConfig::DEFAULT_K);
    let factors = settings
        .pick(args.factors, "factors")?
        .unwrap_or(RecommenderConfig::DEFAULT_FACTORS);
    let epochs = settings
        .pick(args.epochs, "epochs")?
        .unwrap_or(RecommenderConfig::DEFAULT_EPOCHS);
    let reg = settings
        .pick(args.reg, "reg")?
        .unwrap_or(RecommenderConfig::DEFAULT_REG);

    let mut config = AuditConfig::new(&algorithms)
        .with_seed(seed)
        .with_n(n)
        .with_boundaries(resolve_boundaries(&args.groups, settings)?);
    config.scaling = scaling;
    config.provider_map = mode;
    for rc in &mut config.algorithms {
        rc.k = k;
        rc.factors = factors;
        rc.epochs = epochs;
        rc.reg = reg;
        rc.exclude_seen = exclude_seen;
    }
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn summary_table(report: &GapReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>12} {:>12} {:>12}",
        "algorithm", "cover", "dGAP High-P", "dGAP Mid-P", "dGAP Low-P"
    );
    for a in &report.algorithms {
        let _ = writeln!(
            out,
            "{:<12} {:>6.3} {:>+12.4} {:>+12.4} {:>+12.4}",
            a.algorithm.name(),
            a.diagnostics.coverage,
            a.cell(Group::High).delta_gap,
            a.cell(Group::Mid).delta_gap,
            a.cell(Group::Low).delta_gap,
        );
    }
    out
}

fn run_audit(args: AuditArgs, out: &mut dyn Write) -> CliResult<()> {
    let data_args = &args.groups.data;
    let settings = Settings::load(data_args.config.as_deref())?;
    let output_dir = resolve_output_dir(data_args.output_dir.clone(), &settings)?;
    let loaded = load_data(data_args, &settings)?;
    let config = resolve_audit_config(&args, &settings, loaded.mode.clone())?;
    let report =
        audit(&loaded.matrix, &loaded.map, &config).map_err(|e| CliError::Data(e.to_string()))?;
    write_outputs(
        &output_dir,
        &[
            ("report.csv", report.to_csv()),
            ("report.json", report.to_json()),
        ],
    )?;
    let _ = out.write_all(summary_table(&report).as_bytes());
    Ok(())
}

fn run_stats(args: DataArgs, out: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::load(args.config.as_deref())?;
    let output_dir = resolve_output_dir(args.output_dir.clone(), &settings)?;
    let loaded = load_data(&args, &settings)?;
    let table = compute_popularity(&loaded.matrix, &loaded.map);
    let mut csv = String::from("rank,provider,count,share,cumulative_share\n");
    for row in table.ranked_rows() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.rank,
            csv_field(loaded.map.provider_id(row.provider)),
            row.count,
            row.share,
            row.cumulative_share
        );
    }
    write_outputs(&output_dir, &[("popularity.csv", csv)])?;
    let _ = writeln!(out, "{} providers, {} events", table.len(), table.total());
    Ok(())
}

fn run_groups(args: GroupArgs, out: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::load(args.data.config.as_deref())?;
    let output_dir = resolve_output_dir(args.data.output_dir.clone(), &settings)?;
    let boundaries = resolve_boundaries(&args, &settings)?;
    let loaded = load_data(&args.data, &settings)?;
    let table = compute_popularity(&loaded.matrix, &loaded.map);
    let partition =
        partition_long_tail(&table, boundaries).map_err(|e| CliError::Data(e.to_string()))?;
    let mut csv = String::from("provider,group\n");
    for g in Group::ALL {
        for &p in partition.members(g) {
            let _ = writeln!(csv, "{},{}", csv_field(loaded.map.provider_id(p)), g);
        }
    }
    write_outputs(&output_dir, &[("groups.csv", csv)])?;
    for g in Group::ALL {
        let members = partition.members(g);
        let events: u64 = members.iter().map(|&p| table.count(p)).sum();
        let _ = writeln!(
            out,
            "{:<7} {:>8} providers {:>8.4} share",
            g.name(),
            members.len(),
            events as f64 / table.total() as f64
        );
    }
    Ok(())
}

fn run_synth(args: SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::load(args.config.as_deref())?;
    let output_dir = resolve_output_dir(args.output_dir.clone(), &settings)?;
    let config = SyntheticConfig {
        num_users: settings.pick(args.users, "users")?.unwrap_or(1000),
        num_items: settings.pick(args.items, "items")?.unwrap_or(2000),
        events_per_user: settings.pick(args.events, "events")?.unwrap_or(100),
        zipf_exponent: settings.pick(args.exponent, "exponent")?.unwrap_or(1.1),
        seed: settings.pick(args.seed, "seed")?.unwrap_or(0),
    };
    let records = generate_synthetic(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let written = write_outputs(
        &output_dir,
        &[("interactions.tsv", write_interactions(&records))],
    )?;
    let _ = writeln!(
        out,
        "wrote {} records to {}",
        records.len(),
        written[0].display()
    );
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 {
                let _ = write!(out, "{}", e.render());
            } else {
                let _ = write!(err, "{}", e.render());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Audit(a) => run_audit(a, out),
        Command::Stats(a) => run_stats(a, out),
        Command::Groups(a) => run_groups(a, out),
        Command::Synth(a) => run_synth(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}
