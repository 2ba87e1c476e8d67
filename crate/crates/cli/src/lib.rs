//! `stitchvox` command-line front end.
//!
//! [`run`] is the whole program minus process exit, so tests can drive it
//! in-process. Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use stitchvox_core::audio::{quantize, read_wav, write_wav};
use stitchvox_core::bank::{synthesize_bank, MockTts};
use stitchvox_core::code_switch::CsAssets;
use stitchvox_core::dataset::{cs_convert_mt, mix_plan, MixLabel, MixRatio, MtLoad, TsvOptions, DEFAULT_MAX_TGT_WORDS};
use stitchvox_core::seed::splitmix64;
use stitchvox_core::stitcher::utterance_seed;
use stitchvox_core::{
    build_bank, convert_mt, load_bank, load_mt_tsv, stitch_sentence, stream_mt, CsConfig, CsDictionary,
    DatasetManifest, SpeakerPolicy, SpokenVocabBank, StitchConfig,
};
use stitchvox_service::{AppState, DEFAULT_ADDR, DEFAULT_MAX_BATCH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stitchvox", version, about = "Spoken-vocabulary speech stitching")]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, synthesize or validate a snippet bank.
    #[command(subcommand)]
    Bank(BankCommand),
    /// Stitch one sentence to a WAV file.
    Stitch(StitchArgs),
    /// Turn an MT TSV file into a speech-translation dataset.
    Convert(ConvertArgs),
    /// Like `convert`, with code-switched source speech from two banks.
    CsConvert(CsConvertArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Measure single-threaded stitching throughput.
    Bench(BenchArgs),
    /// Print the ST/MT interleaving schedule for a mixed training run.
    MixPlan(MixPlanArgs),
    /// Check a dataset directory against its manifest.
    ManifestCheck { dir: PathBuf },
}

#[derive(Debug, Subcommand)]
enum BankCommand {
    /// Index `<snippets>/<speaker>/<word>.wav` files into a bank.
    Build {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a word list with the offline mock TTS into a bank.
    Synth {
        #[arg(long)]
        vocab: PathBuf,
        /// Number of voices, named v0, v1, ...
        #[arg(long, default_value_t = 1)]
        voices: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a bank and verify every snippet checksum.
    Validate {
        #[arg(env = "STITCHVOX_BANK")]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct BankArg {
    #[arg(long, env = "STITCHVOX_BANK")]
    bank: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Apply random tempo, speed and echo perturbation.
    #[arg(long)]
    distort: bool,
    #[arg(long, default_value_t = stitchvox_core::stitcher::DEFAULT_FADE_MS)]
    fade_ms: f64,
    /// Resample the output; defaults to the bank rate.
    #[arg(long)]
    output_rate: Option<u32>,
    /// Spell out digit-only tokens before matching.
    #[arg(long)]
    expand_numbers: bool,
    /// Fixed speaker id; otherwise one is drawn per utterance.
    #[arg(long)]
    speaker: Option<String>,
}

impl RenderArgs {
    fn config(&self) -> StitchConfig {
        StitchConfig {
            fade_ms: self.fade_ms,
            output_rate_hz: self.output_rate,
            distort: self.distort,
            expand_numbers: self.expand_numbers,
            ..StitchConfig::default()
        }
    }

    fn policy(&self) -> SpeakerPolicy {
        match &self.speaker {
            Some(s) => SpeakerPolicy::Fixed(s.clone()),
            None => SpeakerPolicy::UniformRandom,
        }
    }
}

#[derive(Debug, Args)]
struct StitchArgs {
    #[command(flatten)]
    bank: BankArg,
    #[arg(long)]
    text: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    render: RenderArgs,
}

#[derive(Debug, Args)]
struct MtArgs {
    /// Tab-separated `id, source text, target text` rows.
    #[arg(long)]
    mt: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_TGT_WORDS)]
    max_tgt_words: usize,
    /// The first line of the TSV is a header.
    #[arg(long)]
    header: bool,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    lenient: bool,
}

impl MtArgs {
    fn options(&self) -> TsvOptions {
        TsvOptions {
            max_tgt_words: self.max_tgt_words,
            has_header: self.header,
            lenient: self.lenient,
        }
    }
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[command(flatten)]
    bank: BankArg,
    #[command(flatten)]
    mt: MtArgs,
    /// Regenerate every pair on the fly and compare with the written files.
    #[arg(long)]
    stream_check: bool,
    #[command(flatten)]
    render: RenderArgs,
}

#[derive(Debug, Clone)]
struct BankPair {
    src: PathBuf,
    tgt: PathBuf,
}

fn parse_bank_pair(s: &str) -> Result<BankPair, String> {
    let mut src = None;
    let mut tgt = None;
    for part in s.split(',') {
        match part.split_once('=') {
            Some(("src", dir)) if !dir.is_empty() => src = Some(PathBuf::from(dir)),
            Some(("tgt", dir)) if !dir.is_empty() => tgt = Some(PathBuf::from(dir)),
            _ => return Err(format!("expected src=DIR,tgt=DIR, got {part:?}")),
        }
    }
    match (src, tgt) {
        (Some(src), Some(tgt)) => Ok(BankPair { src, tgt }),
        _ => Err("both src=DIR and tgt=DIR are required".into()),
    }
}

#[derive(Debug, Args)]
struct CsConvertArgs {
    #[arg(long, value_parser = parse_bank_pair, value_name = "src=DIR,tgt=DIR")]
    banks: BankPair,
    /// Tab-separated `source word, target word` rows.
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value = "src")]
    src_lang: String,
    #[arg(long, default_value = "tgt")]
    tgt_lang: String,
    #[arg(long, default_value_t = CsConfig::default().p)]
    p: f64,
    #[arg(long, default_value_t = CsConfig::default().n)]
    n: usize,
    /// Use the N(0,1) draw with `q > p` instead of `u < p`.
    #[arg(long)]
    literal_normal_draw: bool,
    #[command(flatten)]
    mt: MtArgs,
    #[command(flatten)]
    render: RenderArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    bank: BankArg,
    #[arg(long, env = "STITCHVOX_ADDR", default_value = DEFAULT_ADDR)]
    addr: SocketAddr,
    #[arg(long, default_value_t = DEFAULT_MAX_BATCH)]
    max_batch: usize,
    /// Enable /v1/cs-stitch with this target bank (requires --dict).
    #[arg(long, requires = "dict")]
    cs_target_bank: Option<PathBuf>,
    #[arg(long, requires = "cs_target_bank")]
    dict: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Bank directory; without it an in-memory mock bank is used.
    #[arg(long, env = "STITCHVOX_BANK")]
    bank: Option<PathBuf>,
    /// One sentence per line; without it synthetic sentences are generated.
    #[arg(long)]
    sentences: Option<PathBuf>,
    /// Number of synthetic sentences when --sentences is absent.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    iters: usize,
    #[command(flatten)]
    render: RenderArgs,
}

#[derive(Debug, Args)]
struct MixPlanArgs {
    #[arg(long)]
    st: usize,
    #[arg(long)]
    mt: usize,
    #[arg(long, default_value_t = MixRatio::default())]
    ratio: MixRatio,
}

/// Run the CLI on `argv` (including the program name) and return the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging();
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("STITCHVOX_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

fn emit<T: Serialize>(json: bool, summary: &T, human: impl FnOnce() -> String) {
    if json {
        println!("{}", serde_json::to_string(summary).expect("summaries serialize"));
    } else {
        println!("{}", human());
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Bank(cmd) => bank(cmd, cli.json),
        Command::Stitch(args) => stitch(args, cli.json),
        Command::Convert(args) => convert(args, cli.json),
        Command::CsConvert(args) => cs_convert(args, cli.json),
        Command::Serve(args) => serve(args),
        Command::Bench(args) => bench(args, cli.json),
        Command::MixPlan(args) => mix(args, cli.json),
        Command::ManifestCheck { dir } => manifest_check(dir, cli.json),
    }
}

fn open_bank(dir: &Path) -> anyhow::Result<SpokenVocabBank> {
    load_bank(dir).with_context(|| format!("loading bank {}", dir.display()))
}

#[derive(Serialize)]
struct BankSummary<'a> {
    command: &'a str,
    dir: String,
    speakers: Vec<String>,
    vocab_size: usize,
    entries: usize,
    sample_rate_hz: u32,
}

fn bank(cmd: &BankCommand, json: bool) -> anyhow::Result<()> {
    let (name, dir, bank) = match cmd {
        BankCommand::Build { snippets, out } => ("bank build", out, build_bank(snippets, out)?),
        BankCommand::Synth { vocab, voices, out } => {
            if *voices == 0 {
                bail!("--voices must be at least 1");
            }
            let names: Vec<String> = (0..*voices).map(|i| format!("v{i}")).collect();
            ("bank synth", out, synthesize_bank(vocab, &names, &MockTts, out)?)
        }
        BankCommand::Validate { dir } => ("bank validate", dir, open_bank(dir)?),
    };
    let summary = BankSummary {
        command: name,
        dir: dir.display().to_string(),
        speakers: bank.speakers().to_vec(),
        vocab_size: bank.vocab_size(),
        entries: bank.entries().len(),
        sample_rate_hz: bank.sample_rate_hz(),
    };
    emit(json, &summary, || {
        format!(
            "{}: {} words x {} speakers ({} snippets) at {} Hz",
            summary.dir,
            summary.vocab_size,
            summary.speakers.len(),
            summary.entries,
            summary.sample_rate_hz
        )
    });
    Ok(())
}

#[derive(Serialize)]
struct StitchSummary {
    command: &'static str,
    out: String,
    seed: u64,
    report: stitchvox_core::StitchReport,
}

fn stitch(args: &StitchArgs, json: bool) -> anyhow::Result<()> {
    let bank = open_bank(&args.bank.bank)?;
    let seed = args.render.seed;
    let (audio, report) = stitch_sentence(&args.text, &bank, &args.render.policy(), &args.render.config(), seed)?;
    write_wav(&audio, &args.out)?;
    let summary = StitchSummary {
        command: "stitch",
        out: args.out.display().to_string(),
        seed,
        report,
    };
    emit(json, &summary, || {
        let r = &summary.report;
        format!(
            "{}: {} samples at {} Hz, speaker {}, {} exact / {} fuzzy / {} fallback",
            summary.out, r.num_samples, r.sample_rate_hz, r.speaker_id, r.exact, r.fuzzy, r.fallback
        )
    });
    Ok(())
}

#[derive(Serialize)]
struct ConvertSummary {
    command: &'static str,
    out_dir: String,
    seed: u64,
    pairs: usize,
    dropped: usize,
    malformed_lines: Vec<usize>,
    total_frames: u64,
    stream_checked: bool,
}

fn convert_summary(
    command: &'static str,
    mt: &MtArgs,
    seed: u64,
    load: &MtLoad,
    manifest: &DatasetManifest,
    stream_checked: bool,
    json: bool,
) {
    let summary = ConvertSummary {
        command,
        out_dir: mt.out_dir.display().to_string(),
        seed,
        pairs: manifest.rows.len(),
        dropped: load.dropped,
        malformed_lines: load.malformed_lines.clone(),
        total_frames: manifest.rows.iter().map(|r| r.n_frames).sum(),
        stream_checked,
    };
    emit(json, &summary, || {
        let mut line = format!(
            "{}: {} utterances, {} frames; {} pairs over the length limit dropped",
            summary.out_dir, summary.pairs, summary.total_frames, summary.dropped
        );
        if !summary.malformed_lines.is_empty() {
            line.push_str(&format!("; skipped malformed lines {:?}", summary.malformed_lines));
        }
        if summary.stream_checked {
            line.push_str("; stream check passed");
        }
        line
    });
}

fn convert(args: &ConvertArgs, json: bool) -> anyhow::Result<()> {
    let bank = open_bank(&args.bank.bank)?;
    let load = load_mt_tsv(&args.mt.mt, &args.mt.options())?;
    let cfg = args.render.config();
    let policy = args.render.policy();
    let seed = args.render.seed;
    let manifest = convert_mt(&load.pairs, &bank, &policy, &cfg, seed, &args.mt.out_dir)?;
    if args.stream_check {
        let stream = stream_mt(&load.pairs, &bank, &policy, &cfg, seed);
        for (item, row) in stream.iter().zip(&manifest.rows) {
            let item = item?;
            let disk = read_wav(args.mt.out_dir.join(&row.audio))?;
            let same = disk.len() == item.audio.len()
                && disk
                    .samples()
                    .iter()
                    .zip(item.audio.samples())
                    .all(|(d, s)| (d * 32768.0) as i16 == quantize(*s));
            if !same {
                bail!("stream check failed: {} differs from its written file", item.id);
            }
        }
    }
    convert_summary("convert", &args.mt, seed, &load, &manifest, args.stream_check, json);
    Ok(())
}

fn cs_assets(src: &Path, tgt: &Path, dict: &Path, src_lang: &str, tgt_lang: &str) -> anyhow::Result<CsAssets> {
    let source = Arc::new(open_bank(src)?);
    let target = Arc::new(open_bank(tgt)?);
    let dict = Arc::new(CsDictionary::load_tsv(dict, src_lang, tgt_lang)?);
    Ok(CsAssets::new(source, target, dict)?)
}

fn cs_convert(args: &CsConvertArgs, json: bool) -> anyhow::Result<()> {
    let assets = cs_assets(
        &args.banks.src,
        &args.banks.tgt,
        &args.dict,
        &args.src_lang,
        &args.tgt_lang,
    )?;
    let cs_cfg = CsConfig {
        p: args.p,
        n: args.n,
        literal_normal_draw: args.literal_normal_draw,
    };
    let load = load_mt_tsv(&args.mt.mt, &args.mt.options())?;
    let seed = args.render.seed;
    let manifest = cs_convert_mt(
        &load.pairs,
        &assets,
        &cs_cfg,
        &args.render.config(),
        &args.render.policy(),
        seed,
        &args.mt.out_dir,
    )?;
    convert_summary("cs-convert", &args.mt, seed, &load, &manifest, false, json);
    Ok(())
}

fn serve(args: &ServeArgs) -> anyhow::Result<()> {
    let bank = Arc::new(open_bank(&args.bank.bank)?);
    let mut state = AppState::new(bank.clone());
    state.max_batch = args.max_batch;
    if let (Some(tgt), Some(dict)) = (&args.cs_target_bank, &args.dict) {
        let target = Arc::new(open_bank(tgt)?);
        let dict = Arc::new(CsDictionary::load_tsv(dict, "src", "tgt")?);
        state = state.with_code_switching(Arc::new(CsAssets::new(bank, target, dict)?));
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime
        .block_on(stitchvox_service::serve(state, args.addr, stitchvox_service::ctrl_c()))
        .with_context(|| format!("serving on {}", args.addr))?;
    Ok(())
}

/// Words used for the built-in benchmark bank and synthetic sentences.
const BENCH_WORDS: &[&str] = &[
    "a",
    "i",
    "you",
    "we",
    "they",
    "like",
    "want",
    "see",
    "have",
    "make",
    "the",
    "this",
    "that",
    "good",
    "new",
    "big",
    "small",
    "apple",
    "house",
    "water",
    "speech",
    "model",
    "data",
    "train",
    "translate",
    "sentence",
    "word",
    "voice",
    "sound",
    "time",
    "day",
    "world",
    "and",
    "or",
    "but",
    "with",
    "from",
    "into",
    "over",
    "under",
];

fn synthetic_sentences(words: &[String], count: usize, seed: u64) -> Vec<String> {
    let mut state = seed;
    let mut next = || {
        state = splitmix64(state);
        state
    };
    (0..count)
        .map(|_| {
            let len = 4 + (next() % 12) as usize;
            (0..len)
                .map(|_| {
                    let w = &words[(next() % words.len() as u64) as usize];
                    // one token in eight is misspelled to exercise fuzzy matching
                    if next() % 8 == 0 {
                        format!("{w}s")
                    } else {
                        w.clone()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

#[derive(Serialize)]
struct BenchSummary {
    command: &'static str,
    utterances: usize,
    total_samples: u64,
    elapsed_secs: f64,
    utterances_per_sec: f64,
    audio_secs_per_sec: f64,
}

fn bench(args: &BenchArgs, json: bool) -> anyhow::Result<()> {
    let bank = match &args.bank {
        Some(dir) => open_bank(dir)?,
        None => SpokenVocabBank::synthesize_in_memory(BENCH_WORDS, &["v0", "v1", "v2"], &MockTts)?,
    };
    let sentences = match &args.sentences {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect(),
        None => synthetic_sentences(bank.words(), args.count, args.render.seed),
    };
    if sentences.is_empty() {
        bail!("no sentences to benchmark");
    }
    let cfg = args.render.config();
    let policy = args.render.policy();
    let mut total_samples = 0u64;
    let mut n = 0usize;
    let start = Instant::now();
    for _ in 0..args.iters.max(1) {
        for sentence in &sentences {
            let seed = utterance_seed(args.render.seed, n as u64);
            let (audio, _) =
                stitch_sentence(sentence, &bank, &policy, &cfg, seed).map_err(|e| anyhow!("sentence {n}: {e}"))?;
            total_samples += audio.len() as u64;
            n += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    let rate = cfg.output_rate_hz.unwrap_or(bank.sample_rate_hz()) as f64;
    let summary = BenchSummary {
        command: "bench",
        utterances: n,
        total_samples,
        elapsed_secs: elapsed,
        utterances_per_sec: n as f64 / elapsed,
        audio_secs_per_sec: total_samples as f64 / rate / elapsed,
    };
    emit(json, &summary, || {
        format!(
            "{} utterances in {:.3} s: {:.1} utterances/sec, {} total samples ({:.1}x real time)",
            summary.utterances,
            summary.elapsed_secs,
            summary.utterances_per_sec,
            summary.total_samples,
            summary.audio_secs_per_sec
        )
    });
    Ok(())
}

#[derive(Serialize)]
struct MixSummary {
    command: &'static str,
    ratio: String,
    st: usize,
    mt: usize,
    schedule: String,
}

fn mix(args: &MixPlanArgs, json: bool) -> anyhow::Result<()> {
    let plan = mix_plan(args.st, args.mt, args.ratio);
    let schedule: String = plan
        .schedule
        .iter()
        .map(|l| match l {
            MixLabel::St => 'S',
            MixLabel::Mt => 'M',
        })
        .collect();
    let summary = MixSummary {
        command: "mix-plan",
        ratio: args.ratio.to_string(),
        st: plan.count(MixLabel::St),
        mt: plan.count(MixLabel::Mt),
        schedule,
    };
    emit(json, &summary, || summary.schedule.clone());
    Ok(())
}

#[derive(Serialize)]
struct ManifestSummary {
    command: &'static str,
    dir: String,
    rows: usize,
    total_frames: u64,
}

fn manifest_check(dir: &Path, json: bool) -> anyhow::Result<()> {
    let manifest = DatasetManifest::load(dir)?;
    manifest.verify(dir)?;
    let summary = ManifestSummary {
        command: "manifest-check",
        dir: dir.display().to_string(),
        rows: manifest.rows.len(),
        total_frames: manifest.rows.iter().map(|r| r.n_frames).sum(),
    };
    emit(json, &summary, || {
        format!("{}: {} rows consistent", summary.dir, summary.rows)
    });
    Ok(())
}
