//! MT text to ST training data, written to disk or generated lazily.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, write_wav, PcmBuffer};
use crate::bank::SpokenVocabBank;
use crate::code_switch::{cs_stitch, CsAssets, CsConfig};
use crate::error::{Error, Result};
use crate::seed::seed_for_key;
use crate::stitcher::{stitch_sentence, SpeakerPolicy, StitchConfig, StitchReport};

pub const DEFAULT_MAX_TGT_WORDS: usize = 64;
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MANIFEST_HEADER: &str = "id\taudio\tn_frames\tsrc_text\ttgt_text\tspeaker";
const WAV_DIR: &str = "wav";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtPair {
    pub id: String,
    pub src_text: String,
    pub tgt_text: String,
}

#[derive(Debug, Clone)]
pub struct TsvOptions {
    /// Drop pairs whose target has more whitespace tokens than this.
    pub max_tgt_words: usize,
    pub has_header: bool,
    /// Skip malformed rows instead of failing.
    pub lenient: bool,
}

impl Default for TsvOptions {
    fn default() -> Self {
        Self {
            max_tgt_words: DEFAULT_MAX_TGT_WORDS,
            has_header: false,
            lenient: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MtLoad {
    pub pairs: Vec<MtPair>,
    /// Pairs removed by the target-length filter.
    pub dropped: usize,
    /// 1-based line numbers of malformed rows skipped in lenient mode.
    pub malformed_lines: Vec<usize>,
}

pub fn parse_mt_tsv(text: &str, opts: &TsvOptions) -> Result<MtLoad> {
    let mut out = MtLoad::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if opts.has_header && i == 0 {
            continue;
        }
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let problem = match cols.as_slice() {
            [id, src, tgt] if !id.trim().is_empty() && !src.trim().is_empty() && !tgt.trim().is_empty() => {
                if tgt.split_whitespace().count() > opts.max_tgt_words {
                    out.dropped += 1;
                } else {
                    out.pairs.push(MtPair {
                        id: id.trim().to_string(),
                        src_text: src.to_string(),
                        tgt_text: tgt.to_string(),
                    });
                }
                None
            }
            [_, _, _] => Some("empty id, source or target".to_string()),
            other => Some(format!("expected 3 tab-separated columns, found {}", other.len())),
        };
        if let Some(message) = problem {
            if opts.lenient {
                out.malformed_lines.push(line_no);
            } else {
                return Err(Error::MalformedRow { line: line_no, message });
            }
        }
    }
    Ok(out)
}

/// Read `id<TAB>src<TAB>tgt` rows, dropping pairs whose target exceeds
/// `max_tgt_words` whitespace tokens.
pub fn load_mt_tsv(path: impl AsRef<Path>, opts: &TsvOptions) -> Result<MtLoad> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mt_tsv(&text, opts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    /// Relative to the output directory.
    pub audio: String,
    pub n_frames: u64,
    pub src_text: String,
    pub tgt_text: String,
    pub speaker: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

fn tsv_field(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl DatasetManifest {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                tsv_field(&r.id),
                r.audio,
                r.n_frames,
                tsv_field(&r.src_text),
                tsv_field(&r.tgt_text),
                tsv_field(&r.speaker)
            ));
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == MANIFEST_HEADER => {}
            _ => {
                return Err(Error::MalformedRow {
                    line: 1,
                    message: format!("expected header {MANIFEST_HEADER:?}"),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: String| Error::MalformedRow { line: i + 1, message };
            let [id, audio, n, src, tgt, speaker] = cols.as_slice() else {
                return Err(bad(format!("expected 6 columns, found {}", cols.len())));
            };
            rows.push(ManifestRow {
                id: id.to_string(),
                audio: audio.to_string(),
                n_frames: n.parse().map_err(|_| bad(format!("bad n_frames {n:?}")))?,
                src_text: src.to_string(),
                tgt_text: tgt.to_string(),
                speaker: speaker.to_string(),
            });
        }
        Ok(Self { rows })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse_tsv(&text)
    }

    /// Re-read every referenced file and check ids are unique and that
    /// `n_frames` matches the audio.
    pub fn verify(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut seen = HashMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(prev) = seen.insert(row.id.as_str(), i) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate id {:?} in rows {} and {}",
                    row.id,
                    prev + 1,
                    i + 1
                )));
            }
            let audio = read_wav(dir.join(&row.audio))?;
            if audio.len() as u64 != row.n_frames {
                return Err(Error::InvalidArgument(format!(
                    "{}: manifest says {} frames, file has {}",
                    row.audio,
                    row.n_frames,
                    audio.len()
                )));
            }
        }
        Ok(())
    }
}

fn file_stem_for_id(id: &str) -> String {
    let mut s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        s.insert(0, '_');
    }
    s
}

fn plan_paths(pairs: &[MtPair]) -> Result<Vec<String>> {
    let mut by_stem: HashMap<String, &str> = HashMap::new();
    let mut ids = HashSet::new();
    let mut paths = Vec::with_capacity(pairs.len());
    for p in pairs {
        if !ids.insert(p.id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate pair id {:?}", p.id)));
        }
        let stem = file_stem_for_id(&p.id);
        if let Some(other) = by_stem.insert(stem.clone(), p.id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "pair ids {:?} and {:?} map to the same file name",
                other, p.id
            )));
        }
        paths.push(format!("{WAV_DIR}/{stem}.wav"));
    }
    Ok(paths)
}

/// Write one WAV per pair plus `manifest.tsv`, using `generate` for audio.
/// Pairs are processed in parallel; rows keep input order.
fn materialize<F>(pairs: &[MtPair], out_dir: &Path, generate: F) -> Result<DatasetManifest>
where
    F: Fn(&MtPair) -> Result<(PcmBuffer, String)> + Sync,
{
    let paths = plan_paths(pairs)?;
    let wav_dir = out_dir.join(WAV_DIR);
    fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let rows: Vec<ManifestRow> = pairs
        .par_iter()
        .zip(paths)
        .map(|(pair, rel)| {
            let (audio, speaker) = generate(pair).map_err(|e| Error::for_pair(&pair.id, e))?;
            write_wav(&audio, out_dir.join(&rel))?;
            Ok(ManifestRow {
                id: pair.id.clone(),
                audio: rel,
                n_frames: audio.len() as u64,
                src_text: pair.src_text.clone(),
                tgt_text: pair.tgt_text.clone(),
                speaker,
            })
        })
        .collect::<Result<_>>()?;

    let manifest = DatasetManifest { rows };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_tsv()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Stitch every pair's source text to `<out_dir>/wav/<id>.wav` and write
/// the manifest. Each pair's seed depends only on `(seed, id)`.
pub fn convert_mt(
    pairs: &[MtPair],
    bank: &SpokenVocabBank,
    policy: &SpeakerPolicy,
    cfg: &StitchConfig,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    materialize(pairs, out_dir.as_ref(), |pair| {
        let (audio, report) = stitch_sentence(&pair.src_text, bank, policy, cfg, seed_for_key(seed, &pair.id))?;
        Ok((audio, report.speaker_id))
    })
}

/// Code-switched counterpart of [`convert_mt`].
pub fn cs_convert_mt(
    pairs: &[MtPair],
    assets: &CsAssets,
    cs_cfg: &CsConfig,
    cfg: &StitchConfig,
    policy: &SpeakerPolicy,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    cfg.validate()?;
    cs_cfg.validate()?;
    materialize(pairs, out_dir.as_ref(), |pair| {
        let (audio, report, _) = cs_stitch(
            &pair.src_text,
            assets,
            cs_cfg,
            cfg,
            policy,
            seed_for_key(seed, &pair.id),
        )?;
        Ok((audio, report.speaker_id))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamItem {
    pub id: String,
    pub audio: PcmBuffer,
    pub tgt_text: String,
    pub report: StitchReport,
}

/// Lazy, restartable generation over a set of pairs. Each call to
/// [`MtStream::iter`] starts from the beginning and yields the same items.
pub struct MtStream<'a> {
    pairs: &'a [MtPair],
    bank: &'a SpokenVocabBank,
    policy: SpeakerPolicy,
    cfg: StitchConfig,
    seed: u64,
}

impl<'a> MtStream<'a> {
    pub fn iter(&self) -> impl Iterator<Item = Result<StreamItem>> + '_ {
        self.pairs.iter().map(move |pair| {
            stitch_sentence(
                &pair.src_text,
                self.bank,
                &self.policy,
                &self.cfg,
                seed_for_key(self.seed, &pair.id),
            )
            .map(|(audio, report)| StreamItem {
                id: pair.id.clone(),
                audio,
                tgt_text: pair.tgt_text.clone(),
                report,
            })
            .map_err(|e| Error::for_pair(&pair.id, e))
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// On-the-fly counterpart of [`convert_mt`]: same audio, nothing written.
pub fn stream_mt<'a>(
    pairs: &'a [MtPair],
    bank: &'a SpokenVocabBank,
    policy: &SpeakerPolicy,
    cfg: &StitchConfig,
    seed: u64,
) -> MtStream<'a> {
    MtStream {
        pairs,
        bank,
        policy: policy.clone(),
        cfg: cfg.clone(),
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixLabel {
    St,
    Mt,
}

/// `st:mt`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixRatio {
    pub st: u32,
    pub mt: u32,
}

impl MixRatio {
    pub fn new(st: u32, mt: u32) -> Result<Self> {
        if st == 0 || mt == 0 {
            return Err(Error::InvalidArgument(format!("ratio {st}:{mt} must be positive")));
        }
        let (mut a, mut b) = (st, mt);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        Ok(Self { st: st / a, mt: mt / a })
    }
}

impl Default for MixRatio {
    fn default() -> Self {
        Self { st: 8, mt: 1 }
    }
}

impl fmt::Display for MixRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.st, self.mt)
    }
}

impl FromStr for MixRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("ratio {s:?} is not of the form A:B")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidArgument(format!("ratio {s:?} is not of the form A:B")))
        };
        MixRatio::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixPlan {
    pub schedule: Vec<MixLabel>,
    pub ratio: MixRatio,
}

impl MixPlan {
    pub fn count(&self, label: MixLabel) -> usize {
        self.schedule.iter().filter(|&&l| l == label).count()
    }
}

/// Interleave ST and MT items in repeating cycles of `ratio.st` ST labels
/// followed by `ratio.mt` MT labels. Once either side can no longer fill a
/// cycle, the leftovers are appended (ST first, then MT).
pub fn mix_plan(st_count: usize, mt_count: usize, ratio: MixRatio) -> MixPlan {
    let (cs, cm) = (ratio.st as usize, ratio.mt as usize);
    let cycles = (st_count / cs).min(mt_count / cm);
    let mut schedule = Vec::with_capacity(st_count + mt_count);
    for _ in 0..cycles {
        schedule.extend(std::iter::repeat_n(MixLabel::St, cs));
        schedule.extend(std::iter::repeat_n(MixLabel::Mt, cm));
    }
    schedule.extend(std::iter::repeat_n(MixLabel::St, st_count - cycles * cs));
    schedule.extend(std::iter::repeat_n(MixLabel::Mt, mt_count - cycles * cm));
    MixPlan { schedule, ratio }
}
