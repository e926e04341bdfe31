//! Stage execution against an output directory.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use ctp_core::adapt::{
    finetune_baseline, predict_windows, stage1_align, stage2_align, train_source, StageReport,
    Variant,
};
use ctp_core::experiment::{evaluate_variants, DataSource};
use ctp_core::metrics::{
    cumulative_offsets, evaluate, kde_grid, EvalReport, EvalSummary, GridSpec,
};
use ctp_core::nets::checkpoint;
use ctp_core::traj_data::{apply_shift_table, generate_tracks, write_annotations};
use ctp_core::{DomainSplit, ModelBundle, Point, Stage};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io, CliError, Result};

pub const LOCK_FILE: &str = "ctp.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    Ingest,
    TrainSource,
    AdaptFeature,
    AdaptOffset,
    Eval,
    PlotOffsets,
    SynthGen,
    BaselineFinetune,
    BaselineSourceOnly,
    All,
}

impl StageName {
    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Ingest => "ingest",
            StageName::TrainSource => "train-source",
            StageName::AdaptFeature => "adapt-feature",
            StageName::AdaptOffset => "adapt-offset",
            StageName::Eval => "eval",
            StageName::PlotOffsets => "plot-offsets",
            StageName::SynthGen => "synth-gen",
            StageName::BaselineFinetune => "baseline-finetune",
            StageName::BaselineSourceOnly => "baseline-source-only",
            StageName::All => "all",
        }
    }

    /// What `all` runs, in order.
    pub const PIPELINE: [StageName; 8] = [
        StageName::Ingest,
        StageName::TrainSource,
        StageName::AdaptFeature,
        StageName::AdaptOffset,
        StageName::BaselineFinetune,
        StageName::BaselineSourceOnly,
        StageName::Eval,
        StageName::PlotOffsets,
    ];
}

/// Exclusive hold on an output directory; released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id()).map_err(io(&path))?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(io(&path)(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[derive(Serialize, Deserialize)]
struct SplitArtifact {
    config_hash: String,
    split: DomainSplit,
}

#[derive(Serialize, Deserialize)]
struct ReportArtifact {
    config_hash: String,
    variant: String,
    report: EvalReport,
}

#[derive(Serialize)]
struct ConfigArtifact<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
}

/// An output directory bound to one run configuration.
pub struct Workspace {
    pub root: PathBuf,
    pub cfg: RunConfig,
    pub hash: String,
}

impl Workspace {
    pub fn new(root: PathBuf, cfg: RunConfig) -> Self {
        let hash = cfg.hash();
        Self { root, cfg, hash }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn checkpoint_dir(&self, stage: Stage) -> PathBuf {
        self.root.join("checkpoints").join(stage.name())
    }

    fn write_json(&self, rel: &str, value: &impl Serialize) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        let mut text = serde_json::to_string_pretty(value).map_err(ctp_core::Error::from)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(io(&path))?;
        Ok(path)
    }

    pub fn write_config_echo(&self) -> Result<()> {
        self.write_json(
            "config.json",
            &ConfigArtifact {
                config_hash: &self.hash,
                config: &self.cfg,
            },
        )?;
        Ok(())
    }

    /// The split written by `ingest`, or a fresh one (which is then
    /// written) when ingest has not run.
    fn split(&self) -> Result<DomainSplit> {
        let path = self.path("data/split.json");
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(io(&path))?;
            let art: SplitArtifact = serde_json::from_str(&text).map_err(ctp_core::Error::from)?;
            if art.config_hash == self.hash {
                return Ok(art.split);
            }
            log::warn!(
                "{} was written by another config; rebuilding",
                path.display()
            );
        }
        self.ingest()
    }

    fn ingest(&self) -> Result<DomainSplit> {
        let split = self.cfg.experiment.build_split()?;
        let path = self.write_json(
            "data/split.json",
            &SplitArtifact {
                config_hash: self.hash.clone(),
                split: split.clone(),
            },
        )?;
        log::info!(
            "split: {} source train, {} source val, {} target train, {} target test -> {}",
            split.source_train.len(),
            split.source_val.len(),
            split.target_train.len(),
            split.target_test.len(),
            path.display()
        );
        Ok(split)
    }

    /// Loads the checkpoint written by `stage`, refusing one built for a
    /// different network configuration.
    fn load(&self, stage: Stage) -> Result<ModelBundle<f32>> {
        let dir = self.checkpoint_dir(stage);
        if !dir.join(checkpoint::MANIFEST).exists() {
            return Err(CliError::MissingStage(stage.name().into()));
        }
        let manifest = checkpoint::read_manifest(&dir)?;
        let expected = self.cfg.experiment.net.hash();
        if manifest.net_config_hash != expected {
            return Err(CliError::Config {
                path: dir.join(checkpoint::MANIFEST),
                msg: format!(
                    "checkpoint network config hash {} does not match the run's {expected}",
                    manifest.net_config_hash
                ),
            });
        }
        if manifest.run_config_hash.as_deref() != Some(self.hash.as_str()) {
            log::warn!("{} was produced by a different run config", dir.display());
        }
        let (bundle, _) = checkpoint::load::<f32>(&dir)?;
        bundle.require(stage)?;
        Ok(bundle)
    }

    fn save(&self, bundle: &ModelBundle<f32>, stage: Stage) -> Result<()> {
        let dir = self.checkpoint_dir(stage);
        checkpoint::save(bundle, &dir, Some(&self.hash))?;
        log::info!("checkpoint -> {}", dir.display());
        Ok(())
    }

    fn append_report(&self, report: &StageReport) -> Result<()> {
        let path = self.path("reports/stages.jsonl");
        std::fs::create_dir_all(path.parent().unwrap()).map_err(io(&path))?;
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io(&path))?;
        f.write_all(report.to_json_lines(now, Some(&self.hash)).as_bytes())
            .map_err(io(&path))?;
        log::info!(
            "{}: {} epochs in {:.1} s",
            report.stage,
            report.epochs_run,
            report.seconds
        );
        Ok(())
    }

    fn write_report(&self, rel: &str, variant: Variant, report: EvalReport) -> Result<()> {
        log::info!(
            "{}: ADE {:.4} FDE {:.4}",
            variant.label(),
            report.ade,
            report.fde
        );
        self.write_json(
            rel,
            &ReportArtifact {
                config_hash: self.hash.clone(),
                variant: variant.label().into(),
                report,
            },
        )?;
        Ok(())
    }

    pub fn run(&self, stage: StageName) -> Result<()> {
        log::info!("stage {} (config {})", stage.as_str(), self.hash);
        let train = self.cfg.experiment.training();
        match stage {
            StageName::Ingest => {
                self.ingest()?;
            }
            StageName::TrainSource => {
                let split = self.split()?;
                let mut bundle = ModelBundle::new(
                    self.cfg.experiment.net.clone(),
                    self.cfg.experiment.seeds.init,
                )?;
                let report = train_source(&split, &mut bundle, &train)?;
                self.save(&bundle, Stage::TrainSource)?;
                self.append_report(&report)?;
            }
            StageName::AdaptFeature => {
                let mut bundle = self.load(Stage::TrainSource)?;
                let report = stage1_align(&self.split()?, &mut bundle, &train)?;
                self.save(&bundle, Stage::AdaptFeature)?;
                self.append_report(&report)?;
            }
            StageName::AdaptOffset => {
                let mut bundle = self.load(Stage::AdaptFeature)?;
                let report = stage2_align(&self.split()?, &mut bundle, &train)?;
                self.save(&bundle, Stage::AdaptOffset)?;
                self.append_report(&report)?;
            }
            StageName::BaselineFinetune => {
                let mut bundle = self.load(Stage::TrainSource)?;
                let (report, eval) = finetune_baseline(&self.split()?, &mut bundle, &train)?;
                self.save(&bundle, Stage::BaselineFinetune)?;
                self.append_report(&report)?;
                self.write_report("reports/baseline-finetune.json", Variant::Finetune, eval)?;
            }
            StageName::BaselineSourceOnly => {
                let bundle = self.load(Stage::TrainSource)?;
                let split = self.split()?;
                let preds = predict_windows(&bundle, Variant::SourceOnly, &split.target_test)?;
                let eval = evaluate(&preds, &split.target_test)?;
                self.write_report(
                    "reports/baseline-source-only.json",
                    Variant::SourceOnly,
                    eval,
                )?;
            }
            StageName::Eval => self.eval()?,
            StageName::PlotOffsets => self.plot_offsets()?,
            StageName::SynthGen => self.synth_gen()?,
            StageName::All => {
                for s in StageName::PIPELINE {
                    self.run(s)?;
                }
            }
        }
        Ok(())
    }

    fn eval(&self) -> Result<()> {
        let mut bundle = self.load(Stage::AdaptOffset)?;
        if self.checkpoint_dir(Stage::BaselineFinetune).exists() {
            let tuned = self.load(Stage::BaselineFinetune)?;
            bundle.finetuned = tuned.finetuned;
            bundle.mark(Stage::BaselineFinetune);
        } else {
            log::warn!("no baseline-finetune checkpoint; F-T is left out of the report");
        }
        let split = self.split()?;
        let summary = evaluate_variants(&bundle, &split, &self.hash)?;
        for (label, r) in &summary.target_test {
            log::info!("target test {label}: ADE {:.4} FDE {:.4}", r.ade, r.fde);
        }
        let path = self.write_json("reports/eval.json", &summary)?;
        println!("{}", path.display());
        Ok(())
    }

    fn plot_offsets(&self) -> Result<()> {
        let path = self.path("reports/eval.json");
        if !path.exists() {
            return Err(CliError::MissingStage("eval".into()));
        }
        let text = std::fs::read_to_string(&path).map_err(io(&path))?;
        let summary: EvalSummary = serde_json::from_str(&text).map_err(ctp_core::Error::from)?;
        if summary.config_hash != self.hash {
            return Err(CliError::Config {
                path,
                msg: format!(
                    "report belongs to config {}, not {}",
                    summary.config_hash, self.hash
                ),
            });
        }
        let split = self.split()?;
        let mut sets: Vec<(String, Vec<Point>)> = vec![(
            "ground_truth".into(),
            split
                .target_test
                .iter()
                .flat_map(|w| cumulative_offsets(&w.fut, w.last_obs()))
                .collect(),
        )];
        for (label, report) in &summary.target_test {
            sets.push((label.clone(), report.cumulative_offset_samples.concat()));
        }
        let extent = shared_extent(sets.iter().flat_map(|(_, s)| s.iter()));
        let grid = GridSpec {
            nx: self.cfg.plot.nx,
            ny: self.cfg.plot.ny,
            extent: Some(extent),
        };
        let dir = self.path("plots");
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        for (label, samples) in &sets {
            let kde = kde_grid(samples, self.cfg.plot.bandwidth, &grid)?;
            let file = dir.join(format!("cumulative_offsets_{label}.csv"));
            let out = File::create(&file).map_err(io(&file))?;
            let comment = format!(
                "config_hash={} variant={label} samples={} bandwidth={},{}",
                self.hash,
                samples.len(),
                kde.bandwidth[0],
                kde.bandwidth[1]
            );
            kde.write_csv(std::io::BufWriter::new(out), Some(&comment))
                .map_err(io(&file))?;
            log::info!("density grid -> {}", file.display());
        }
        Ok(())
    }

    fn synth_gen(&self) -> Result<()> {
        let dir = self.path("data/synthetic");
        let mut wrote = 0;
        for (name, source) in [
            ("source", &self.cfg.experiment.source),
            ("target", &self.cfg.experiment.target),
        ] {
            let DataSource::Synthetic {
                tracks,
                seed,
                shift,
            } = source
            else {
                continue;
            };
            let mut table = generate_tracks(tracks, *seed)?;
            if let Some(spec) = shift {
                table = apply_shift_table(&table, spec, seed.wrapping_add(1))?;
            }
            std::fs::create_dir_all(&dir).map_err(io(&dir))?;
            let file = dir.join(format!("{name}.txt"));
            write_annotations(&table, &file, Some(&format!("config_hash={}", self.hash)))?;
            log::info!("{} rows -> {}", table.len(), file.display());
            wrote += 1;
        }
        if wrote == 0 {
            return Err(CliError::Config {
                path: self.path("config.json"),
                msg: "synth-gen needs at least one synthetic data source".into(),
            });
        }
        Ok(())
    }
}

/// Bounding box of all samples padded by a quarter of its extent (at least
/// half a meter) on every side.
fn shared_extent<'a>(points: impl Iterator<Item = &'a Point>) -> [f64; 4] {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let px = (0.25 * (x1 - x0)).max(0.5);
    let py = (0.25 * (y1 - y0)).max(0.5);
    [x0 - px, x1 + px, y0 - py, y1 + py]
}
