//! Command-line front end: atlas → matrices → comparison → clusters →
//! silhouette reports.
//!
//! Exit codes: 0 success, 1 usage or validation failure, 2 incomplete
//! distance matrix.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::atlas::{load_atlas, validate_coverage, Atlas};
use crate::cluster::{
    agglomerate, cut_top, recursive_partition, silhouette, ClusterNode, SilhouetteReport,
};
use crate::matrixlab::{compare, DistanceMatrix};
use crate::metrics::{
    build_matrix, Aggregation, MatrixOptions, MetricError, MetricKind, MetricSpec,
    DEFAULT_INDEL_COST,
};
use crate::transcript::FeatureSystem;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dialectometry",
    version,
    about = "Linguistic distances and dialect clustering for phonetic atlases"
)]
pub struct Cli {
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a site × site distance matrix from an atlas.
    Matrix(MatrixArgs),
    /// Compare two distance matrices with Pearson's rho and K_c.
    Compare(CompareArgs),
    /// Cluster the sites of a distance matrix into a binary tree.
    Cluster(ClusterArgs),
    /// Silhouette star-plot report for one binary division of a tree.
    Silhouette(SilhouetteArgs),
    /// Every metric, comparison, clustering and silhouette for one atlas.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MetricOptions {
    /// Base feature table (TSV); defaults to the bundled table.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Diacritic override table (TSV); defaults to the bundled table.
    #[arg(long)]
    pub diacritics: Option<PathBuf>,
    /// Insertion/deletion cost for feature string comparison.
    #[arg(long, default_value_t = DEFAULT_INDEL_COST)]
    pub indel_cost: f64,
    /// Fill site pairs with no comparable data using the mean of defined cells.
    #[arg(long)]
    pub impute_missing: bool,
    /// Divide each Levenshtein distance by the longer form's length.
    #[arg(long)]
    pub normalize_length: bool,
    /// Aggregate variant citations by minimum instead of mean.
    #[arg(long)]
    pub min_aggregation: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// isogloss, etymon, word, phone, feature-all or feature-same
    #[arg(long)]
    pub metric: String,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub options: MetricOptions,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub x: PathBuf,
    pub y: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// agglomerative or pam
    #[arg(long, default_value = "agglomerative")]
    pub method: String,
    /// Partitioning splits only groups of at least twice this size.
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    /// Maximum partitioning depth.
    #[arg(long, default_value_t = 64)]
    pub max_depth: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SilhouetteArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub tree: PathBuf,
    /// Path from the root to the node whose two children are scored, as
    /// L/R steps; empty selects the root.
    #[arg(long, default_value = "")]
    pub node: String,
    /// Atlas supplying region paths for site labels.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    #[arg(long, default_value_t = 64)]
    pub max_depth: usize,
    #[command(flatten)]
    pub options: MetricOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn staged(self, stage: &str) -> Self {
        CliError {
            code: self.code,
            message: format!("stage {stage}: {}", self.message),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let code = if matches!(e, MetricError::IncompleteMatrix { .. }) {
            EXIT_INCOMPLETE
        } else {
            EXIT_USAGE
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::usage(e.to_string())
            }
        }
    )*};
}

usage_from!(
    crate::atlas::AtlasError,
    crate::matrixlab::MatrixError,
    crate::cluster::ClusterError,
    crate::transcript::TranscriptError
);

type CliResult<T = ()> = Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn read_matrix(path: &Path) -> CliResult<DistanceMatrix> {
    DistanceMatrix::from_tsv(&read_text(path)?).map_err(|e| io_err(path, e))
}

fn read_atlas(path: &Path) -> CliResult<Atlas> {
    load_atlas(path).map_err(|e| match e {
        crate::atlas::AtlasError::Io { .. } => CliError::usage(e.to_string()),
        other => io_err(path, other),
    })
}

impl MetricOptions {
    fn feature_system(&self) -> CliResult<Arc<FeatureSystem>> {
        let (base_default, diac_default) = FeatureSystem::builtin_tsv();
        let base = match &self.features {
            Some(p) => read_text(p)?,
            None => base_default.to_string(),
        };
        let diacritics = match &self.diacritics {
            Some(p) => read_text(p)?,
            None => diac_default.to_string(),
        };
        Ok(Arc::new(FeatureSystem::from_tsv(&base, &diacritics)?))
    }

    fn spec(&self, kind: MetricKind, features: &Arc<FeatureSystem>) -> CliResult<MetricSpec> {
        let aggregation = if self.min_aggregation {
            Aggregation::Min
        } else {
            Aggregation::Mean
        };
        Ok(
            MetricSpec::of_kind(kind, features.clone(), self.indel_cost)?
                .with_aggregation(aggregation)
                .with_normalized_length(self.normalize_length),
        )
    }

    fn matrix_options(&self) -> MatrixOptions {
        MatrixOptions {
            impute_missing: self.impute_missing,
        }
    }
}

fn parse_metric(name: &str) -> CliResult<MetricKind> {
    name.parse().map_err(CliError::usage)
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| match cli.command {
        Command::Matrix(args) => cmd_matrix(&args, &mut buf),
        Command::Compare(args) => cmd_compare(&args, &mut buf),
        Command::Cluster(args) => cmd_cluster(&args, &mut buf),
        Command::Silhouette(args) => cmd_silhouette(&args, &mut buf),
        Command::Pipeline(args) => cmd_pipeline(&args, &mut buf),
    });
    emit(out, &String::from_utf8_lossy(&buf))?;
    result
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code. Diagnostics go to `err`.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{e}");
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::usage(format!("stdout: {e}")))
}

pub fn cmd_matrix(args: &MatrixArgs, out: &mut dyn Write) -> CliResult {
    let kind = parse_metric(&args.metric)?;
    let atlas = read_atlas(&args.dataset)?;
    let features = args.options.feature_system()?;
    let spec = args.options.spec(kind, &features)?;
    let built = build_matrix(&atlas, &spec, args.options.matrix_options())?;
    write_atomic(&args.output, &built.matrix.to_tsv())?;
    let n = built.matrix.len();
    let mut text = format!(
        "{}: {n} sites, {} cells, {} imputed -> {}\n",
        kind.name(),
        n * (n - 1) / 2,
        built.imputed.len(),
        args.output.display()
    );
    for (a, b) in &built.imputed {
        writeln!(text, "imputed {a}-{b}").unwrap();
    }
    emit(out, &text)
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> CliResult {
    let x = read_matrix(&args.x)?;
    let y = read_matrix(&args.y)?;
    let c = compare(&x, &y)?;
    let mut text = String::new();
    writeln!(text, "{:<40}{:>8}{:>8}", "", "rho", "K_c").unwrap();
    let label = format!("{} vs {}", file_label(&args.x), file_label(&args.y));
    writeln!(text, "{label:<40}{:>8.3}{:>8.3}", c.rho, c.kc).unwrap();
    writeln!(text, "rho = {:?}", c.rho).unwrap();
    writeln!(text, "K_c = {:?}", c.kc).unwrap();
    writeln!(
        text,
        "cell pairs = {}, triples = {}",
        c.n_pairs, c.n_triples
    )
    .unwrap();
    emit(out, &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Agglomerative,
    Pam,
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "agglomerative" | "aggl" => Ok(Method::Agglomerative),
            "pam" | "partition" => Ok(Method::Pam),
            _ => Err(CliError::usage(format!(
                "unknown method {s:?}; expected agglomerative or pam"
            ))),
        }
    }
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Agglomerative => "agglomerative",
            Method::Pam => "pam",
        }
    }
}

fn cluster_tree(
    m: &DistanceMatrix,
    method: Method,
    min_size: usize,
    max_depth: usize,
) -> CliResult<(ClusterNode, Vec<String>)> {
    if m.len() < 2 {
        return Err(CliError::usage(format!(
            "clustering needs at least 2 sites, found {}",
            m.len()
        )));
    }
    Ok(match method {
        Method::Agglomerative => (agglomerate(m)?, Vec::new()),
        Method::Pam => {
            let outcome = recursive_partition(m, min_size, max_depth)?;
            (outcome.tree, outcome.warnings)
        }
    })
}

pub fn cmd_cluster(args: &ClusterArgs, out: &mut dyn Write) -> CliResult {
    let method: Method = args.method.parse()?;
    let m = read_matrix(&args.matrix)?;
    let (tree, warnings) = cluster_tree(&m, method, args.min_size, args.max_depth)?;
    write_atomic(&args.output, &tree.to_json())?;
    let mut text = String::new();
    for w in warnings {
        writeln!(text, "warning: {w}").unwrap();
    }
    match cut_top(&tree) {
        Ok((a, b)) => writeln!(
            text,
            "{}: top-level split {} | {}",
            method.name(),
            a.len(),
            b.len()
        )
        .unwrap(),
        Err(_) => writeln!(
            text,
            "{}: no split ({} sites in one group)",
            method.name(),
            tree.members.len()
        )
        .unwrap(),
    }
    emit(out, &text)
}

/// Number of stars for a silhouette value: ten stars per unit of s,
/// nothing for s ≤ 0.
pub fn star_count(s: f64) -> usize {
    (10.0 * s.max(0.0)).round() as usize
}

/// Star-plot rendering of a silhouette report. `label` maps a site id to
/// the text printed after its stars.
pub fn render_silhouette(report: &SilhouetteReport, label: &dyn Fn(&str) -> String) -> String {
    let mut text = String::new();
    for g in 0..2 {
        writeln!(text, "group {} (n = {})", g + 1, report.group_sizes[g]).unwrap();
        for e in report.group(g) {
            writeln!(
                text,
                "{:<10}  {}",
                "*".repeat(star_count(e.s)),
                label(&e.site)
            )
            .unwrap();
        }
        writeln!(
            text,
            "group {} s\u{304} = {:.3}",
            g + 1,
            report.group_means[g]
        )
        .unwrap();
        text.push('\n');
    }
    writeln!(text, "overall s\u{304} = {:.3}", report.overall_mean).unwrap();
    text
}

fn site_labeler(atlas: Option<&Atlas>) -> impl Fn(&str) -> String + '_ {
    move |id: &str| match atlas.and_then(|a| a.site(id)) {
        Some(site) => site.region_path.join(", "),
        None => id.to_string(),
    }
}

fn division_report(
    m: &DistanceMatrix,
    tree: &ClusterNode,
    path: &str,
) -> CliResult<SilhouetteReport> {
    let root_sites: std::collections::BTreeSet<&String> = tree.members.iter().collect();
    let matrix_sites: std::collections::BTreeSet<&String> = m.site_ids().iter().collect();
    if root_sites != matrix_sites {
        return Err(CliError::usage("tree and matrix are over different sites"));
    }
    let node = tree.node_at(path)?;
    let (a, b) = cut_top(node)
        .map_err(|_| CliError::usage(format!("node {path:?} is a leaf; nothing to score")))?;
    Ok(silhouette(m, &a, &b)?)
}

pub fn cmd_silhouette(args: &SilhouetteArgs, out: &mut dyn Write) -> CliResult {
    let m = read_matrix(&args.matrix)?;
    let tree =
        ClusterNode::from_json(&read_text(&args.tree)?).map_err(|e| io_err(&args.tree, e))?;
    let atlas = args.dataset.as_deref().map(read_atlas).transpose()?;
    let report = division_report(&m, &tree, &args.node)?;
    let text = render_silhouette(&report, &site_labeler(atlas.as_ref()));
    match &args.output {
        Some(path) => write_atomic(path, &text),
        None => emit(out, &text),
    }
}

fn coverage_tsv(atlas: &Atlas) -> String {
    let cov = validate_coverage(atlas);
    let mut text = String::from("concept\tsites_attested\tfraction\n");
    for c in &cov.concepts {
        writeln!(text, "{}\t{}\t{}", c.concept, c.sites_attested, c.fraction).unwrap();
    }
    text.push_str("\nsite\tconcepts_attested\n");
    for s in &cov.sites {
        writeln!(text, "{}\t{}", s.site, s.concepts_attested).unwrap();
    }
    text
}

pub fn cmd_pipeline(args: &PipelineArgs, out: &mut dyn Write) -> CliResult {
    let atlas = read_atlas(&args.dataset).map_err(|e| e.staged("load"))?;
    let features = args
        .options
        .feature_system()
        .map_err(|e| e.staged("features"))?;
    std::fs::create_dir_all(&args.output).map_err(|e| io_err(&args.output, e).staged("output"))?;
    let dir = args.output.as_path();
    write_atomic(&dir.join("coverage.tsv"), &coverage_tsv(&atlas))
        .map_err(|e| e.staged("coverage"))?;

    let mut matrices = Vec::with_capacity(MetricKind::ALL.len());
    let mut imputed_notes = String::new();
    for kind in MetricKind::ALL {
        let stage = format!("matrix[{}]", kind.name());
        let spec = args
            .options
            .spec(kind, &features)
            .map_err(|e| e.staged(&stage))?;
        let built = build_matrix(&atlas, &spec, args.options.matrix_options())
            .map_err(|e| CliError::from(e).staged(&stage))?;
        for (a, b) in &built.imputed {
            writeln!(imputed_notes, "{}: imputed {a}-{b}", kind.name()).unwrap();
        }
        write_atomic(
            &dir.join(format!("matrix_{}.tsv", kind.name())),
            &built.matrix.to_tsv(),
        )
        .map_err(|e| e.staged(&stage))?;
        matrices.push((kind, built.matrix));
    }

    let baseline = &matrices[0].1;
    let mut comparison = String::from("metric\trho\tK_c\n");
    let mut table1 = String::new();
    writeln!(
        table1,
        "Correlation of distance matrices to the isogloss distance matrix"
    )
    .unwrap();
    writeln!(table1, "{:<40}{:>8}{:>8}", "", "rho", "K_c").unwrap();
    for (kind, m) in &matrices {
        let stage = format!("compare[{}]", kind.name());
        let c = compare(baseline, m).map_err(|e| CliError::from(e).staged(&stage))?;
        writeln!(comparison, "{}\t{:?}\t{:?}", kind.name(), c.rho, c.kc).unwrap();
        writeln!(table1, "{:<40}{:>8.3}{:>8.3}", kind.label(), c.rho, c.kc).unwrap();
    }
    write_atomic(&dir.join("comparison.tsv"), &comparison).map_err(|e| e.staged("compare"))?;

    let labeler = site_labeler(Some(&atlas));
    let mut sbar = String::from("metric\tpartitioning\tagglomeration\n");
    let mut table2 = String::new();
    writeln!(table2, "Mean silhouette of the top-level binary division").unwrap();
    writeln!(table2, "{:<40}{:>8}{:>8}", "", "Part.", "Aggl.").unwrap();
    for (kind, m) in &matrices {
        let mut means = [0.0; 2];
        for (slot, method) in [Method::Pam, Method::Agglomerative].into_iter().enumerate() {
            let stage = format!("cluster[{}, {}]", kind.name(), method.name());
            let (tree, _) = cluster_tree(m, method, args.min_size, args.max_depth.max(1))
                .map_err(|e| e.staged(&stage))?;
            let base = format!("{}_{}", kind.name(), method.name());
            write_atomic(&dir.join(format!("tree_{base}.json")), &tree.to_json())
                .map_err(|e| e.staged(&stage))?;
            let report = division_report(m, &tree, "").map_err(|e| e.staged(&stage))?;
            write_atomic(
                &dir.join(format!("silhouette_{base}.txt")),
                &render_silhouette(&report, &labeler),
            )
            .map_err(|e| e.staged(&stage))?;
            means[slot] = report.overall_mean;
        }
        writeln!(sbar, "{}\t{:?}\t{:?}", kind.name(), means[0], means[1]).unwrap();
        writeln!(
            table2,
            "{:<40}{:>8.3}{:>8.3}",
            kind.label(),
            means[0],
            means[1]
        )
        .unwrap();
    }
    write_atomic(&dir.join("silhouette.tsv"), &sbar).map_err(|e| e.staged("silhouette"))?;

    let mut summary = format!(
        "{} sites, {} concepts, {} citations, {} isogloss features\n",
        atlas.sites().len(),
        atlas.concepts().len(),
        atlas.citations().len(),
        atlas.isogloss_features().len()
    );
    for w in atlas.warnings() {
        writeln!(summary, "warning: {w}").unwrap();
    }
    summary.push_str(&imputed_notes);
    summary.push('\n');
    summary.push_str(&table1);
    summary.push('\n');
    summary.push_str(&table2);
    write_atomic(&dir.join("summary.txt"), &summary).map_err(|e| e.staged("summary"))?;
    emit(out, &summary)
}
