//! `modspoof` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use modspoof_core::audio::write_wav_pcm16;
use modspoof_core::classifier::{load_model, predict_batch, save_model, train, EpochStats};
use modspoof_core::config::PipelineConfig;
use modspoof_core::dsp::{read_normalizer, write_normalizer, FeatureSpec, NormMode, Normalizer};
use modspoof_core::eval::{
    asv_operating_point, default_ratios, evaluate, format_csv, format_table, fuse, per_attack_breakdown,
    ratio_sweep, AsvOperatingPoint, CostModel, FusionMode, ReportRow,
};
use modspoof_core::pipeline::{
    extract_to_dir, label_features, read_audio_manifest, run_synthbench, FeatureManifest, SynthBenchConfig,
};
use modspoof_core::protocol::{parse_cm_protocol, render_cm_protocol, ProtocolEntry};
use modspoof_core::scores::{read_asv_scores, read_scores, write_scores};
use modspoof_core::synth::generate;

#[derive(Parser, Debug)]
#[command(name = "modspoof", version, about = "Global modulation spoofing countermeasure pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// Pipeline configuration (JSON). Defaults apply to missing fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// logmel, mfcc[:N], global-mod, blocked-mod:RxC, band-mod:{low,high}
    #[arg(long, global = true)]
    feature: Option<FeatureSpec>,
    /// none, l1 or std
    #[arg(long, global = true, value_parser = parse_norm)]
    norm: Option<NormMode>,
    /// Maximum number of masks per axis (0 disables masking).
    #[arg(long, global = true, value_name = "N")]
    sa_masks: Option<usize>,
    /// Maximum mask width as a fraction of the axis.
    #[arg(long, global = true, value_name = "F")]
    sa_width: Option<f64>,
    #[arg(long, global = true, env = "MODSPOOF_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Start of the analysis window in seconds.
    #[arg(long, global = true, value_name = "SECONDS")]
    offset: Option<f64>,
}

#[derive(Args, Debug)]
struct AsvArgs {
    /// ASV score file (`target|nontarget|spoof score` per line).
    #[arg(long, value_name = "PATH", conflicts_with = "asv_point")]
    asv_scores: Option<PathBuf>,
    /// Fixed ASV operating point `Pmiss,Pfa,Pmiss_spoof`.
    #[arg(long, value_name = "Pm,Pfa,Pms", value_parser = parse_asv_point)]
    asv_point: Option<AsvOperatingPoint>,
    /// Cost model (JSON). Overrides the one in --config.
    #[arg(long, value_name = "PATH")]
    cost_model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract features for every clip of an audio manifest.
    Extract {
        /// `utterance_id wav_path` per line.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Fit a normalizer on extracted features.
    FitNorm {
        #[arg(long, value_name = "DIR")]
        features: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Train a classifier; writes model.gmm, history.csv and config.json.
    Train {
        #[arg(long, value_name = "DIR")]
        features: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        /// Normalizer from fit-norm; fitted on the training features otherwise.
        #[arg(long, value_name = "PATH")]
        norm_file: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score features with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        features: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Fuse two score files, or sweep the fusion modes.
    Fuse {
        a: PathBuf,
        b: PathBuf,
        /// weighted:R, min, max, min-confidence or max-confidence
        #[arg(long, conflicts_with = "sweep")]
        mode: Option<FusionMode>,
        /// Report min, weighted 0.0 to 1.0 and max.
        #[arg(long)]
        sweep: bool,
        /// Use the confidence-selecting min/max.
        #[arg(long)]
        confidence: bool,
        /// Fused score file (stdout when omitted).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// CSV report for --sweep.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        asv: AsvArgs,
    },
    /// EER and min t-DCF of a score file.
    Evaluate {
        scores: PathBuf,
        #[command(flatten)]
        asv: AsvArgs,
        /// Add one row per attack.
        #[arg(long)]
        breakdown: bool,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Synthetic benchmark comparing feature kinds end to end.
    Synthbench {
        /// Benchmark configuration (JSON); --config then replaces its pipeline part.
        #[arg(long, value_name = "PATH")]
        bench_config: Option<PathBuf>,
        /// Pairs to generate.
        #[arg(long, value_name = "N")]
        clips: Option<usize>,
        /// Feature kinds to compare (repeatable).
        #[arg(long = "compare", value_name = "FEATURE")]
        compare: Vec<FeatureSpec>,
        /// Writes report.csv and config.json.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Also write the corpus as WAV files with a manifest and protocol.
        #[arg(long, value_name = "DIR")]
        dump_audio: Option<PathBuf>,
    },
}

fn parse_norm(s: &str) -> std::result::Result<NormMode, String> {
    match s {
        "none" => Ok(NormMode::None),
        "l1" => Ok(NormMode::L1),
        "std" | "standardize" => Ok(NormMode::Standardize),
        _ => Err(format!("unknown normalization {s:?}; expected none, l1 or std")),
    }
}

fn parse_asv_point(s: &str) -> std::result::Result<AsvOperatingPoint, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad rate {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    let [pm, pfa, pms] = v[..] else {
        return Err(format!("expected 3 comma-separated rates, got {}", v.len()));
    };
    AsvOperatingPoint::new(pm, pfa, pms).map_err(|e| e.to_string())
}

impl GlobalArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(f) = self.feature {
            cfg.feature = f;
        }
        if let Some(n) = self.norm {
            cfg.norm = n;
        }
        if let Some(m) = self.sa_masks {
            cfg.augment.max_masks_per_axis = m;
        }
        if let Some(w) = self.sa_width {
            cfg.augment.max_width_fraction = w;
        }
        if let Some(o) = self.offset {
            cfg.offset_seconds = o;
        }
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
    }

    fn pipeline(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::read(p).with_context(|| format!("loading {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl AsvArgs {
    fn resolve(&self, cfg: &PipelineConfig) -> Result<(AsvOperatingPoint, CostModel)> {
        let op = match (&self.asv_scores, self.asv_point) {
            (Some(p), _) => asv_operating_point(&read_asv_scores(p)?)
                .with_context(|| format!("ASV scores {}", p.display()))?,
            (None, Some(op)) => op,
            (None, None) => bail!("one of --asv-scores or --asv-point is required"),
        };
        let cost = match &self.cost_model {
            Some(p) => CostModel::read(p)?,
            None => cfg.cost,
        };
        Ok((op, cost))
    }
}

fn read_protocol(path: &Path) -> Result<Vec<ProtocolEntry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_cm_protocol(&text).with_context(|| format!("protocol {}", path.display()))
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,validation_loss\n");
    for h in history {
        let val = h.validation_loss.map(|v| format!("{v:.6}")).unwrap_or_default();
        out.push_str(&format!("{},{:.6},{val}\n", h.epoch, h.train_loss));
    }
    out
}

fn cmd_extract(cfg: &PipelineConfig, manifest: &Path, out: &Path) -> Result<()> {
    let entries = read_audio_manifest(manifest)?;
    let report = extract_to_dir(&entries, out, cfg)?;
    for (utt, err) in &report.failures {
        eprintln!("error: {utt}: {err}");
    }
    println!(
        "extracted {} of {} utterances ({}) into {}",
        report.manifest.entries.len(),
        entries.len(),
        cfg.feature,
        out.display()
    );
    if !report.failures.is_empty() {
        bail!("{} utterance(s) failed", report.failures.len());
    }
    Ok(())
}

fn cmd_fit_norm(cfg: &PipelineConfig, features: &Path, out: &Path) -> Result<()> {
    let (manifest, base) = FeatureManifest::read(features)?;
    let feats: Vec<_> = manifest.load(&base)?.into_iter().map(|(_, f)| f).collect();
    let norm = Normalizer::fit(&feats, cfg.norm)?;
    create_parent(out)?;
    write_normalizer(&norm, out)?;
    cfg.write_resolved(parent_dir(out))?;
    println!("fitted {:?} normalizer on {} features", cfg.norm, feats.len());
    Ok(())
}

fn cmd_train(cfg: &PipelineConfig, features: &Path, protocol: &Path, norm_file: Option<&Path>, out: &Path) -> Result<()> {
    let (manifest, base) = FeatureManifest::read(features)?;
    let data = label_features(manifest.load(&base)?, &read_protocol(protocol)?)?;
    let norm = match norm_file {
        Some(p) => read_normalizer(p)?,
        None => {
            let feats: Vec<_> = data.iter().map(|d| d.feature.clone()).collect();
            Normalizer::fit(&feats, cfg.norm)?
        }
    };
    let result = train(&data, &norm, &cfg.train, cfg.mask())?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_model(&result.model, out.join("model.gmm"))?;
    write_text(&out.join("history.csv"), &history_csv(&result.history))?;
    cfg.write_resolved(out)?;
    println!(
        "trained on {} utterances; best epoch {} of {}",
        data.len(),
        result.best_epoch,
        cfg.train.epochs
    );
    Ok(())
}

fn cmd_score(model: &Path, features: &Path, protocol: &Path, out: &Path) -> Result<()> {
    let model = load_model(model).with_context(|| format!("model {}", model.display()))?;
    let (manifest, base) = FeatureManifest::read(features)?;
    let data = label_features(manifest.load(&base)?, &read_protocol(protocol)?)?;
    let scores = predict_batch(&model, &data)?;
    create_parent(out)?;
    write_scores(&scores, out)?;
    println!("scored {} utterances", scores.len());
    Ok(())
}

fn print_report(rows: &[ReportRow], csv: Option<&Path>) -> Result<()> {
    print!("{}", format_table(rows));
    if let Some(p) = csv {
        write_text(p, &format_csv(rows))?;
    }
    Ok(())
}

fn cmd_synthbench(
    global: &GlobalArgs,
    bench_config: Option<&Path>,
    clips: Option<usize>,
    compare: &[FeatureSpec],
    out: Option<&Path>,
    dump_audio: Option<&Path>,
) -> Result<()> {
    let mut bench = match bench_config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SynthBenchConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthBenchConfig::default(),
    };
    if let Some(p) = &global.config {
        bench.pipeline = PipelineConfig::read(p)?;
    }
    global.apply(&mut bench.pipeline);
    if let Some(s) = global.seed {
        bench.set_seed(s);
    }
    if let Some(n) = clips {
        bench.synth.clips_per_class = n;
    }
    if !compare.is_empty() {
        bench.features = compare.to_vec();
    }
    bench.validate()?;

    if let Some(dir) = dump_audio {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let corpus = generate(&bench.synth)?;
        let mut manifest = String::new();
        let mut entries = Vec::with_capacity(corpus.len());
        for c in &corpus {
            let name = format!("{}.wav", c.entry.utterance_id);
            write_wav_pcm16(dir.join(&name), &c.clip)?;
            manifest.push_str(&format!("{} {name}\n", c.entry.utterance_id));
            entries.push(c.entry.clone());
        }
        write_text(&dir.join("manifest.txt"), &manifest)?;
        write_text(&dir.join("protocol.txt"), &render_cm_protocol(&entries))?;
    }

    let rows = run_synthbench(&bench)?;
    println!("{:<18} {:>8} {:>8} {:>9} {:>5}", "feature", "EER(%)", "t-DCF", "train_acc", "best");
    for r in &rows {
        println!(
            "{:<18} {:>8.3} {:>8.4} {:>9.3} {:>5}",
            r.feature.to_string(),
            100.0 * r.metrics.eer,
            r.metrics.tdcf,
            r.train_accuracy,
            r.best_epoch
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let report: Vec<ReportRow> = rows
            .iter()
            .map(|r| ReportRow::new(r.feature.to_string(), r.metrics.tdcf, r.metrics.eer))
            .collect();
        write_text(&dir.join("report.csv"), &format_csv(&report))?;
        write_text(&dir.join("config.json"), &(serde_json::to_string_pretty(&bench)? + "\n"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Extract { manifest, out } => cmd_extract(&g.pipeline()?, manifest, out),
        Command::FitNorm { features, out } => cmd_fit_norm(&g.pipeline()?, features, out),
        Command::Train {
            features,
            protocol,
            norm_file,
            out,
        } => cmd_train(&g.pipeline()?, features, protocol, norm_file.as_deref(), out),
        Command::Score {
            model,
            features,
            protocol,
            out,
        } => cmd_score(model, features, protocol, out),
        Command::Fuse {
            a,
            b,
            mode,
            sweep,
            confidence,
            out,
            csv,
            asv,
        } => {
            let (sa, sb) = (read_scores(a)?, read_scores(b)?);
            if *sweep {
                let (op, cost) = asv.resolve(&g.pipeline()?)?;
                let rows = ratio_sweep(&sa, &sb, &default_ratios(), *confidence, &op, &cost)?;
                return print_report(&rows, csv.as_deref());
            }
            let Some(mut mode) = *mode else {
                bail!("one of --mode or --sweep is required");
            };
            if *confidence {
                mode = mode.confidence();
            }
            let fused = fuse(&sa, &sb, mode)?;
            match out {
                Some(p) => {
                    create_parent(p)?;
                    write_scores(&fused, p)?;
                }
                None => print!("{}", modspoof_core::scores::format_scores(&fused)?),
            }
            Ok(())
        }
        Command::Evaluate {
            scores,
            asv,
            breakdown,
            csv,
        } => {
            let records = read_scores(scores)?;
            let (op, cost) = asv.resolve(&g.pipeline()?)?;
            if *breakdown {
                let b = per_attack_breakdown(&records, &op, &cost)?;
                for (attack, why) in &b.skipped {
                    eprintln!("skipped {attack}: {why}");
                }
                print_report(&b.rows, csv.as_deref())
            } else {
                let m = evaluate(&records, &op, &cost)?;
                let row = ReportRow::new("ALL", m.tdcf, m.eer);
                println!("EER = {:.3}%  min t-DCF = {:.6}", row.eer_percent(), m.tdcf);
                if let Some(p) = csv {
                    write_text(p, &format_csv(&[row]))?;
                }
                Ok(())
            }
        }
        Command::Synthbench {
            bench_config,
            clips,
            compare,
            out,
            dump_audio,
        } => cmd_synthbench(
            g,
            bench_config.as_deref(),
            *clips,
            compare,
            out.as_deref(),
            dump_audio.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
