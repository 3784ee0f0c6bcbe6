//! Pipeline stages: ingest → clone → align → survive → stats.
//!
//! Stages talk to each other only through the files they leave in the
//! output directory:
//!
//! | stage   | writes                                                        |
//! |---------|---------------------------------------------------------------|
//! | ingest  | `records.json`, `ingest_report.json`                          |
//! | clone   | `clones.csv`                                                  |
//! | align   | `alignment.csv`, `line_labels.csv`, `align_skipped.csv`       |
//! | survive | `samples.csv`, `survival_skipped.csv`, `cohorts.csv`, `curves/<cohort>.json` |
//! | stats   | `summary.csv`, `bins.csv`, `ks.csv`                           |
//!
//! Every stage refreshes `MANIFEST.json` (content hashes) and records its
//! completion time in `run_meta.json`, which is the only file holding
//! timestamps.

pub mod output;
pub mod rows;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::alignment::{influence_ratios, AlignConfig, Bin, DEFAULT_THRESHOLD};
use crate::gitbridge::{
    extract_hunks, resolve_change, reverse_blame, BranchTip, CloneCache, GitError, LineFate, Repo,
};
use crate::ingest::{export_dataset, load_dataset, Category, ChangeRecord, IngestError, RecordStatus};
use crate::stats::{pairwise_ks, summarize_categories, RatioSide};
use crate::survival::{build_samples, curve_points, fate_duration, kaplan_meier, median_survival, DurationSample};

use output::{read_csv, StageWriter};
use rows::*;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Git(#[from] GitError),
    #[error("missing input {0}; run the earlier stages first")]
    MissingInput(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset_path: PathBuf,
    pub clone_cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub threshold: f64,
    pub diff_context: u32,
    pub main_branch_override: Option<String>,
    pub parallelism: usize,
    pub normalize_whitespace: bool,
    /// Fetch cached clones again during the clone stage.
    pub refresh: bool,
}

/// Config file contents; every field is optional and command-line flags
/// take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset_path: Option<PathBuf>,
    pub clone_cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub diff_context: Option<u32>,
    pub main_branch_override: Option<String>,
    pub parallelism: Option<usize>,
    pub normalize_whitespace: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            dataset_path: other.dataset_path.or(self.dataset_path),
            clone_cache_dir: other.clone_cache_dir.or(self.clone_cache_dir),
            output_dir: other.output_dir.or(self.output_dir),
            threshold: other.threshold.or(self.threshold),
            diff_context: other.diff_context.or(self.diff_context),
            main_branch_override: other.main_branch_override.or(self.main_branch_override),
            parallelism: other.parallelism.or(self.parallelism),
            normalize_whitespace: other.normalize_whitespace.or(self.normalize_whitespace),
        }
    }

    pub fn resolve(self) -> Result<PipelineConfig, PipelineError> {
        let cfg = PipelineConfig {
            dataset_path: self
                .dataset_path
                .ok_or_else(|| PipelineError::Config("no dataset given (--dataset)".into()))?,
            clone_cache_dir: self.clone_cache_dir.unwrap_or_else(|| PathBuf::from("clones")),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            threshold: self.threshold.unwrap_or(DEFAULT_THRESHOLD),
            diff_context: self.diff_context.unwrap_or(3),
            main_branch_override: self.main_branch_override,
            parallelism: self.parallelism.unwrap_or_else(default_parallelism),
            normalize_whitespace: self.normalize_whitespace.unwrap_or(true),
            refresh: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl PipelineConfig {
    pub fn new(dataset: impl Into<PathBuf>, cache: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset_path: dataset.into(),
            clone_cache_dir: cache.into(),
            output_dir: out.into(),
            threshold: DEFAULT_THRESHOLD,
            diff_context: 3,
            main_branch_override: None,
            parallelism: default_parallelism(),
            normalize_whitespace: true,
            refresh: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(PipelineError::Config(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        if self.parallelism == 0 {
            return Err(PipelineError::Config("parallelism must be positive".into()));
        }
        Ok(())
    }

    pub fn align_config(&self) -> AlignConfig {
        AlignConfig {
            threshold: self.threshold,
            normalize_whitespace: self.normalize_whitespace,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.output_dir.join(rel)
    }
}

/// What a stage did. `skipped > 0` maps to exit code 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageReport {
    pub stage: &'static str,
    pub files: Vec<String>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

impl StageReport {
    pub fn exit_code(&self) -> u8 {
        if self.skipped > 0 {
            1
        } else {
            0
        }
    }
}

impl PipelineError {
    pub fn exit_code(&self) -> u8 {
        2
    }
}

fn sort_key(r: &ChangeRecord) -> (Option<Category>, &str, &str, usize) {
    (r.category, r.repo_url.as_str(), r.change_id.as_str(), r.index)
}

fn sorted_records(records: &[ChangeRecord]) -> Vec<&ChangeRecord> {
    let mut v: Vec<&ChangeRecord> = records.iter().collect();
    v.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    v
}

fn category_str(c: Option<Category>) -> String {
    c.map(|c| c.as_str().to_string()).unwrap_or_default()
}

#[derive(Debug, Serialize)]
struct IngestReport {
    total: usize,
    live: usize,
    expired_link: usize,
    malformed: usize,
    malformed_entries: Vec<serde_json::Value>,
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<StageReport, PipelineError> {
    let ds = load_dataset(&cfg.dataset_path)?;
    let sorted: Vec<ChangeRecord> = sorted_records(&ds.records).into_iter().cloned().collect();
    let report = IngestReport {
        total: ds.counts.total(),
        live: ds.counts.live,
        expired_link: ds.counts.expired_link,
        malformed: ds.counts.malformed,
        malformed_entries: ds
            .records
            .iter()
            .filter(|r| r.status == RecordStatus::Malformed)
            .map(|r| json!({"index": r.index, "diagnostic": r.diagnostic}))
            .collect(),
    };
    let mut w = StageWriter::new(&cfg.output_dir, "ingest");
    w.add_json("records.json", &export_dataset(&sorted))?;
    w.add_json("ingest_report.json", &report)?;
    let files = w.commit()?;
    log::info!(
        "ingest: {} entries ({} live, {} expired link, {} malformed)",
        report.total,
        report.live,
        report.expired_link,
        report.malformed
    );
    Ok(StageReport {
        stage: "ingest",
        files,
        skipped: report.expired_link + report.malformed,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CloneRow {
    repo_url: String,
    cache_entry: String,
    status: String,
}

fn live_repo_urls(records: &[ChangeRecord]) -> BTreeSet<String> {
    records
        .iter()
        .filter(|r| r.is_live())
        .map(|r| r.repo_url.clone())
        .collect()
}

/// Clone (or with `refresh`, fetch) every repository referenced by a live
/// record. One lock per repository serializes concurrent mutation.
pub fn cmd_clone(cfg: &PipelineConfig) -> Result<StageReport, PipelineError> {
    let ds = load_dataset(&cfg.dataset_path)?;
    let cache = CloneCache::new(&cfg.clone_cache_dir);
    let urls: Vec<String> = live_repo_urls(&ds.records).into_iter().collect();
    let pool = cfg.pool()?;
    let rows: Vec<CloneRow> = pool.install(|| {
        urls.par_iter()
            .map(|url| {
                let status = match cache.ensure(url, cfg.refresh) {
                    Ok(_) => "OK".to_string(),
                    Err(e) => format!("ERROR: {e}"),
                };
                CloneRow {
                    repo_url: url.clone(),
                    cache_entry: crate::gitbridge::cache::url_hash(url),
                    status,
                }
            })
            .collect()
    });
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.status != "OK")
        .map(|r| format!("{}: {}", r.repo_url, r.status))
        .collect();
    for f in &failed {
        log::warn!("clone failed: {f}");
    }
    let mut w = StageWriter::new(&cfg.output_dir, "clone");
    w.add_csv("clones.csv", &rows, &["repo_url", "cache_entry", "status"])?;
    Ok(StageReport {
        stage: "clone",
        files: w.commit()?,
        skipped: failed.len(),
        warnings: failed,
    })
}

struct RepoCtx {
    repo: Repo,
    main: BranchTip,
}

#[derive(Default)]
struct AlignOutput {
    rows: Vec<AlignmentRow>,
    labels: Vec<LabelRow>,
    skips: Vec<SkipRow>,
}

fn skip(rec: &ChangeRecord, via: &str, reason: &str, detail: impl Into<String>) -> SkipRow {
    SkipRow {
        category: category_str(rec.category),
        repo_url: rec.repo_url.clone(),
        change_id: rec.change_id.clone(),
        via: via.to_string(),
        reason: reason.to_string(),
        detail: detail.into(),
    }
}

fn align_record(rec: &ChangeRecord, ctx: Option<&RepoCtx>, cfg: &PipelineConfig) -> AlignOutput {
    let mut out = AlignOutput::default();
    match rec.status {
        RecordStatus::Live => {}
        RecordStatus::ExpiredLink => {
            out.skips.push(skip(rec, "", "EXPIRED_LINK", "conversation unavailable"));
            return out;
        }
        RecordStatus::Malformed => {
            out.skips.push(skip(rec, "", "MALFORMED", rec.diagnostic.clone().unwrap_or_default()));
            return out;
        }
    }
    let Some(ctx) = ctx else {
        out.skips.push(skip(rec, "", "CLONE_MISSING", "repository not in the clone cache"));
        return out;
    };
    let category = rec.category.expect("live records have a category");
    let res = resolve_change(&ctx.repo, rec, &ctx.main);
    let ambiguous = res.is_ambiguous();
    for (label, err) in &res.failures {
        let via = if category == Category::Issue { label.as_str() } else { "" };
        out.skips.push(skip(rec, via, "CHANGE_UNRESOLVABLE", err.to_string()));
    }
    let align_cfg = cfg.align_config();
    for rc in res.changes {
        let via = rc.via.clone().unwrap_or_default();
        if !rc.merged {
            out.skips.push(skip(
                rec,
                &via,
                "NOT_MERGED",
                format!("{} is not on {}", rc.head_commit, ctx.main.name),
            ));
            continue;
        }
        let extract = match extract_hunks(&ctx.repo, &rc, cfg.diff_context) {
            Ok(x) => x,
            Err(e) => {
                out.skips.push(skip(rec, &via, "GIT_ERROR", e.to_string()));
                continue;
            }
        };
        let result = influence_ratios(&extract.hunks, rec, &align_cfg);
        let mut flags = Vec::new();
        if result.degenerate_pre() {
            flags.push("DEGENERATE_PRE");
        }
        if result.degenerate_post() {
            flags.push("DEGENERATE_POST");
        }
        if ambiguous {
            flags.push("AMBIGUOUS_CLOSURE");
        }
        for l in &result.labels {
            out.labels.push(LabelRow {
                category,
                repo_url: rec.repo_url.clone(),
                change_id: rec.change_id.clone(),
                via: via.clone(),
                head_commit: rc.head_commit.clone(),
                main_branch: ctx.main.name.clone(),
                tip_commit: ctx.main.commit.clone(),
                file: l.file_path.clone(),
                line_no: l.line_no,
                influenced: l.influenced,
                score: l.score.map(|s| s.value()),
                segment: l.segment.as_ref().map(ToString::to_string).unwrap_or_default(),
                content: l.content.clone(),
            });
        }
        out.rows.push(AlignmentRow {
            category,
            repo_url: rec.repo_url.clone(),
            change_id: rec.change_id.clone(),
            via,
            base_commit: rc.base_commit.clone(),
            head_commit: rc.head_commit.clone(),
            main_branch: ctx.main.name.clone(),
            tip_commit: ctx.main.commit.clone(),
            hunks: extract.hunks.len(),
            binary_files: extract.binary_files,
            matched_pre: result.matched_pre,
            eligible_pre: result.eligible_pre,
            rho_pre: result.rho_pre,
            bin_pre: result.bin_pre,
            matched_post: result.matched_post,
            eligible_post: result.eligible_post,
            rho_post: result.rho_post,
            bin_post: result.bin_post,
            flags: flags.join(";"),
        });
    }
    out
}

/// Align every merged change with its conversations.
pub fn cmd_align(cfg: &PipelineConfig) -> Result<StageReport, PipelineError> {
    let ds = load_dataset(&cfg.dataset_path)?;
    let cache = CloneCache::new(&cfg.clone_cache_dir);

    let mut contexts: HashMap<String, RepoCtx> = HashMap::new();
    for url in live_repo_urls(&ds.records) {
        if let Some(repo) = cache.open(&url) {
            let main = repo.main_branch(cfg.main_branch_override.as_deref())?;
            contexts.insert(url, RepoCtx { repo, main });
        }
    }

    let records = sorted_records(&ds.records);
    let pool = cfg.pool()?;
    let parts: Vec<AlignOutput> = pool.install(|| {
        records
            .par_iter()
            .map(|r| align_record(r, contexts.get(&r.repo_url), cfg))
            .collect()
    });

    let mut all = AlignOutput::default();
    for p in parts {
        all.rows.extend(p.rows);
        all.labels.extend(p.labels);
        all.skips.extend(p.skips);
    }
    all.rows.sort_by(|a, b| {
        (a.category, &a.repo_url, &a.change_id, &a.via, &a.head_commit)
            .cmp(&(b.category, &b.repo_url, &b.change_id, &b.via, &b.head_commit))
    });
    all.labels.sort_by(|a, b| {
        (a.category, &a.repo_url, &a.change_id, &a.via, &a.head_commit, &a.file, a.line_no)
            .cmp(&(b.category, &b.repo_url, &b.change_id, &b.via, &b.head_commit, &b.file, b.line_no))
    });
    all.skips.sort_by(|a, b| {
        (&a.category, &a.repo_url, &a.change_id, &a.via, &a.reason)
            .cmp(&(&b.category, &b.repo_url, &b.change_id, &b.via, &b.reason))
    });

    let warnings: Vec<String> = all
        .skips
        .iter()
        .map(|s| format!("{} {} {}: {} {}", s.category, s.repo_url, s.change_id, s.reason, s.detail))
        .collect();
    let mut w = StageWriter::new(&cfg.output_dir, "align");
    w.add_csv("alignment.csv", &all.rows, ALIGNMENT_HEADER)?;
    w.add_csv("line_labels.csv", &all.labels, LABEL_HEADER)?;
    w.add_csv("align_skipped.csv", &all.skips, SKIP_HEADER)?;
    Ok(StageReport {
        stage: "align",
        files: w.commit()?,
        skipped: all.skips.len(),
        warnings,
    })
}

/// Blame job key: one reverse blame per file per head.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct BlameKey {
    repo_url: String,
    head_commit: String,
    main_branch: String,
    tip_commit: String,
    file: String,
}

impl BlameKey {
    fn of(l: &LabelRow) -> Self {
        BlameKey {
            repo_url: l.repo_url.clone(),
            head_commit: l.head_commit.clone(),
            main_branch: l.main_branch.clone(),
            tip_commit: l.tip_commit.clone(),
            file: l.file.clone(),
        }
    }
}

type BlameOutcome = Result<(HashMap<u32, LineFate>, Vec<u32>), String>;

fn blame_job(cache: &CloneCache, key: &BlameKey, lines: &BTreeSet<u32>) -> BlameOutcome {
    let repo = cache
        .open(&key.repo_url)
        .ok_or_else(|| "CLONE_MISSING".to_string())?;
    let tip = BranchTip {
        name: key.main_branch.clone(),
        commit: key.tip_commit.clone(),
    };
    match reverse_blame(&repo, &key.head_commit, &key.file, lines, &tip) {
        Ok(f) => Ok((f.fates.into_iter().map(|f| (f.line_no, f)).collect(), f.unresolved)),
        Err(GitError::FileAbsent { .. }) => Err("FILE_ABSENT".into()),
        Err(e) => Err(format!("GIT_ERROR: {e}")),
    }
}

pub const COHORTS: [&str; 3] = ["all", "influenced", "uninfluenced"];

fn cohort_filter(name: &str, s: &DurationSample) -> bool {
    match name {
        "influenced" => s.influenced,
        "uninfluenced" => !s.influenced,
        _ => true,
    }
}

/// Named cohorts: overall and per category, each split by influence.
pub fn cohort_samples(samples: &[DurationSample]) -> Vec<(String, Vec<DurationSample>)> {
    let mut out = Vec::new();
    for c in COHORTS {
        out.push((
            c.to_string(),
            samples.iter().filter(|s| cohort_filter(c, s)).cloned().collect(),
        ));
    }
    for cat in Category::ALL {
        for c in COHORTS {
            out.push((
                format!("{cat}_{c}"),
                samples
                    .iter()
                    .filter(|s| s.category == cat && cohort_filter(c, s))
                    .cloned()
                    .collect(),
            ));
        }
    }
    out
}

fn sample_of(row: &SampleRow) -> DurationSample {
    DurationSample {
        duration: row.duration_days,
        event: !row.censored,
        influenced: row.influenced,
        category: row.category,
    }
}

/// Reverse-blame every labelled line and estimate survival per cohort.
pub fn cmd_survive(cfg: &PipelineConfig) -> Result<StageReport, PipelineError> {
    let labels: Vec<LabelRow> = read_csv(&cfg.out("line_labels.csv"))?;
    let cache = CloneCache::new(&cfg.clone_cache_dir);

    let mut jobs: BTreeMap<BlameKey, BTreeSet<u32>> = BTreeMap::new();
    for l in &labels {
        jobs.entry(BlameKey::of(l)).or_default().insert(l.line_no);
    }
    let jobs: Vec<(BlameKey, BTreeSet<u32>)> = jobs.into_iter().collect();
    let pool = cfg.pool()?;
    let outcomes: Vec<BlameOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|(k, lines)| blame_job(&cache, k, lines))
            .collect()
    });
    let outcomes: HashMap<&BlameKey, &BlameOutcome> =
        jobs.iter().map(|(k, _)| k).zip(outcomes.iter()).collect();

    let mut rows = Vec::new();
    let mut fates_for_samples: Vec<(LineFate, bool, Category)> = Vec::new();
    let mut line_skips: BTreeSet<(String, String, String, u32, String)> = BTreeSet::new();
    for l in &labels {
        let key = BlameKey::of(l);
        let fate = match outcomes[&key] {
            Ok((fates, _)) => fates.get(&l.line_no).ok_or_else(|| "UNRESOLVED".to_string()),
            Err(reason) => Err(reason.clone()),
        };
        let fate = match fate {
            Ok(f) => f,
            Err(reason) => {
                line_skips.insert((l.repo_url.clone(), l.head_commit.clone(), l.file.clone(), l.line_no, reason));
                continue;
            }
        };
        let (duration_days, clamped) = fate_duration(fate);
        let end = if fate.censored {
            fate.horizon_time
        } else {
            fate.death_time.unwrap_or(fate.horizon_time)
        };
        rows.push(SampleRow {
            category: l.category,
            repo_url: l.repo_url.clone(),
            change_id: l.change_id.clone(),
            via: l.via.clone(),
            file: l.file.clone(),
            line_no: l.line_no,
            influenced: l.influenced,
            birth_commit: fate.birth_commit.clone(),
            birth_time: fate.birth_time,
            last_commit: fate.last_commit.clone(),
            death_commit: fate.death_commit.clone().unwrap_or_default(),
            death_time: fate.death_time,
            censored: fate.censored,
            horizon_time: fate.horizon_time,
            duration_seconds: (end - fate.birth_time).max(0),
            duration_days,
            clamped,
        });
        fates_for_samples.push((fate.clone(), l.influenced, l.category));
    }
    let set = build_samples(fates_for_samples.iter().map(|(f, i, c)| (f, *i, *c)));
    debug_assert_eq!(set.samples, rows.iter().map(sample_of).collect::<Vec<_>>());

    let mut w = StageWriter::new(&cfg.output_dir, "survive");
    let mut warnings = Vec::new();
    if set.clamped > 0 {
        warnings.push(format!("{} durations clamped to zero (clock skew)", set.clamped));
    }
    let mut cohort_rows = Vec::new();
    for (name, samples) in cohort_samples(&set.samples) {
        let (points, median, events) = match kaplan_meier(&samples) {
            Ok(curve) => (
                curve_points(&curve, None),
                median_survival(&curve),
                curve.events.iter().sum::<usize>(),
            ),
            Err(_) => {
                warnings.push(format!("cohort {name} has no samples"));
                (Vec::new(), None, 0)
            }
        };
        cohort_rows.push(CohortRow {
            cohort: name.clone(),
            n: samples.len(),
            events,
            censored: samples.len() - events,
            median_days: median,
        });
        let pts: Vec<[f64; 2]> = points.into_iter().map(|(t, s)| [t, s]).collect();
        w.add_json(&format!("curves/{name}.json"), &json!({"cohort": name, "points": pts}))?;
    }

    let skip_rows: Vec<LineSkipRow> = line_skips
        .into_iter()
        .map(|(repo_url, head_commit, file, line_no, reason)| LineSkipRow {
            repo_url,
            head_commit,
            file,
            line_no,
            reason,
        })
        .collect();
    for s in &skip_rows {
        log::warn!("line {}:{} at {} skipped: {}", s.file, s.line_no, s.head_commit, s.reason);
    }
    for msg in &warnings {
        log::warn!("{msg}");
    }
    w.add_csv("samples.csv", &rows, SAMPLE_HEADER)?;
    w.add_csv("survival_skipped.csv", &skip_rows, LINE_SKIP_HEADER)?;
    w.add_csv("cohorts.csv", &cohort_rows, COHORT_HEADER)?;
    Ok(StageReport {
        stage: "survive",
        files: w.commit()?,
        skipped: skip_rows.len(),
        warnings,
    })
}

/// Category summary table, bin distribution and pairwise KS tests.
pub fn cmd_stats(cfg: &PipelineConfig) -> Result<StageReport, PipelineError> {
    let alignment: Vec<AlignmentRow> = read_csv(&cfg.out("alignment.csv"))?;
    let ds = load_dataset(&cfg.dataset_path)?;
    let mut warnings = Vec::new();
    let samples: Vec<DurationSample> = match read_csv::<SampleRow>(&cfg.out("samples.csv")) {
        Ok(rows) => rows.iter().map(sample_of).collect(),
        Err(PipelineError::MissingInput(p)) => {
            warnings.push(format!("{p} not found; survival columns left empty"));
            Vec::new()
        }
        Err(e) => return Err(e),
    };

    let bins: Vec<(Category, Bin, Bin)> = alignment
        .iter()
        .map(|r| (r.category, r.bin_pre, r.bin_post))
        .collect();
    let table = summarize_categories(&ds.records, &bins, &samples);

    let mut summary_rows = Vec::new();
    let mut bin_rows = Vec::new();
    for cs in &table {
        for m in &cs.metrics {
            summary_rows.push(SummaryRow {
                category: cs.category,
                changes: cs.changes,
                metric: m.metric.to_string(),
                n: m.n,
                median: m.ci.map(|c| c.median),
                ci_lo: m.ci.map(|c| c.lo),
                ci_hi: m.ci.map(|c| c.hi),
                ci_coverage: m.ci.map(|c| c.coverage),
                degenerate: m.ci.map(|c| c.degenerate),
            });
        }
        for (name, cohort) in [
            ("median_survival_days_all", cs.survival_all),
            ("median_survival_days_influenced", cs.survival_influenced),
            ("median_survival_days_uninfluenced", cs.survival_uninfluenced),
        ] {
            summary_rows.push(SummaryRow {
                category: cs.category,
                changes: cs.changes,
                metric: name.to_string(),
                n: cohort.n,
                median: cohort.median_days,
                ci_lo: None,
                ci_hi: None,
                ci_coverage: None,
                degenerate: None,
            });
        }
        for (side, counts) in [("pre", &cs.bins_pre), ("post", &cs.bins_post)] {
            for (bin, count) in counts {
                bin_rows.push(BinRow {
                    category: cs.category,
                    side: side.to_string(),
                    bin: *bin,
                    count: *count,
                });
            }
        }
    }

    // degenerate sides have no eligible lines and carry no ratio
    let mut ratios: BTreeMap<(RatioSide, Category), Vec<f64>> = BTreeMap::new();
    for r in &alignment {
        if r.eligible_pre > 0 {
            ratios.entry((RatioSide::Pre, r.category)).or_default().push(r.rho_pre);
        }
        if r.eligible_post > 0 {
            ratios.entry((RatioSide::Post, r.category)).or_default().push(r.rho_post);
        }
    }
    let ks_rows: Vec<KsOutRow> = pairwise_ks(&ratios)
        .into_iter()
        .map(|k| KsOutRow {
            side: k.side.as_str().to_string(),
            first: k.first,
            second: k.second,
            m: k.result.map(|r| r.m),
            n: k.result.map(|r| r.n),
            statistic: k.result.map(|r| r.statistic),
            p_value: k.result.map(|r| r.p_value),
            decision: k.decision.as_str().to_string(),
        })
        .collect();

    for msg in &warnings {
        log::warn!("{msg}");
    }
    let mut w = StageWriter::new(&cfg.output_dir, "stats");
    w.add_csv("summary.csv", &summary_rows, SUMMARY_HEADER)?;
    w.add_csv("bins.csv", &bin_rows, BIN_HEADER)?;
    w.add_csv("ks.csv", &ks_rows, KS_HEADER)?;
    Ok(StageReport {
        stage: "stats",
        files: w.commit()?,
        skipped: 0,
        warnings,
    })
}

/// All stages in order. Stops at the first fatal error.
pub fn cmd_run(cfg: &PipelineConfig) -> Result<Vec<StageReport>, PipelineError> {
    Ok(vec![
        cmd_ingest(cfg)?,
        cmd_clone(cfg)?,
        cmd_align(cfg)?,
        cmd_survive(cfg)?,
        cmd_stats(cfg)?,
    ])
}

pub fn output_path(cfg: &PipelineConfig, rel: &str) -> PathBuf {
    cfg.out(rel)
}
