//! The SpokenVocab bank: one audio snippet per (speaker, word).
//!
//! On disk a bank is a directory holding `bank.json`, `snippets.jsonl` and
//! one `<speaker>/<word>.wav` file per entry. Every speaker must index the
//! same word set and every snippet shares one sample rate.

mod tts;

pub use tts::{mock_tts_render, synthesize_bank, MockTts, TtsAdapter, TtsError, MOCK_TTS_RATE_HZ};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{decode_wav, PcmBuffer};
use crate::error::{Error, Result};
use crate::matcher::{normalize_token, Vocabulary};

pub const BANK_FILE: &str = "bank.json";
pub const SNIPPETS_FILE: &str = "snippets.jsonl";
pub const BANK_VERSION: u32 = 1;
pub const DEFAULT_BANK_RATE_HZ: u32 = 24000;

/// One line of `snippets.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnippetEntry {
    pub word: String,
    pub speaker_id: String,
    /// Relative to the bank directory.
    pub path: String,
    pub sample_rate_hz: u32,
    pub num_samples: u64,
    pub sha256: String,
}

/// Contents of `bank.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankMeta {
    pub version: u32,
    pub sample_rate_hz: u32,
    pub speakers: Vec<String>,
    pub vocab_size: usize,
}

/// An immutable, fully loaded bank.
#[derive(Debug, Clone)]
pub struct SpokenVocabBank {
    rate: u32,
    speakers: Vec<String>,
    words: Vec<String>,
    vocab: Vocabulary,
    index: HashMap<String, HashMap<String, PcmBuffer>>,
    entries: Vec<SnippetEntry>,
}

impl SpokenVocabBank {
    /// Assemble a bank from in-memory snippets, enforcing the bank
    /// invariants. Words are normalized before indexing.
    pub fn from_snippets<I, S, W>(snippets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, W, PcmBuffer)>,
        S: Into<String>,
        W: AsRef<str>,
    {
        Self::assemble(
            snippets
                .into_iter()
                .map(|(s, w, b)| (s.into(), w.as_ref().to_string(), b, None)),
        )
    }

    fn assemble(snippets: impl Iterator<Item = (String, String, PcmBuffer, Option<SnippetEntry>)>) -> Result<Self> {
        let mut rate: Option<u32> = None;
        let mut per_speaker: BTreeMap<String, HashMap<String, PcmBuffer>> = BTreeMap::new();
        let mut entries = Vec::new();
        for (speaker, raw_word, audio, entry) in snippets {
            let word = normalize_token(&raw_word);
            if word.is_empty() {
                return Err(Error::Bank(format!(
                    "word {raw_word:?} for speaker {speaker} is empty after normalization"
                )));
            }
            if speaker.is_empty() {
                return Err(Error::Bank("empty speaker id".into()));
            }
            match rate {
                None => rate = Some(audio.sample_rate_hz()),
                Some(r) if r != audio.sample_rate_hz() => {
                    return Err(Error::Bank(format!(
                        "snippet {speaker}/{word} is {} Hz but the bank is {r} Hz",
                        audio.sample_rate_hz()
                    )))
                }
                _ => {}
            }
            let words = per_speaker.entry(speaker.clone()).or_default();
            if words.insert(word.clone(), audio).is_some() {
                return Err(Error::Bank(format!("duplicate word {word:?} for speaker {speaker}")));
            }
            entries.extend(entry);
        }
        let rate = rate.ok_or_else(|| Error::Bank("empty bank".into()))?;

        let all_words: BTreeSet<&String> = per_speaker.values().flat_map(|m| m.keys()).collect();
        let mut problems = Vec::new();
        for (speaker, words) in &per_speaker {
            let missing: Vec<&str> = all_words
                .iter()
                .filter(|w| !words.contains_key(w.as_str()))
                .map(|w| w.as_str())
                .collect();
            if !missing.is_empty() {
                problems.push(format!("{speaker} is missing [{}]", missing.join(", ")));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Bank(format!(
                "speakers do not index the same words: {}",
                problems.join("; ")
            )));
        }

        let words: Vec<String> = all_words.into_iter().cloned().collect();
        entries.sort_by(|a: &SnippetEntry, b| (&a.speaker_id, &a.word).cmp(&(&b.speaker_id, &b.word)));
        Ok(Self {
            rate,
            speakers: per_speaker.keys().cloned().collect(),
            vocab: Vocabulary::new(words.iter().cloned()),
            words,
            index: per_speaker.into_iter().collect(),
            entries,
        })
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.rate
    }

    /// Speaker ids in lexicographic order.
    pub fn speakers(&self) -> &[String] {
        &self.speakers
    }

    pub fn has_speaker(&self, speaker: &str) -> bool {
        self.index.contains_key(speaker)
    }

    /// Indexed words in lexicographic order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    /// Manifest entries (empty for banks assembled in memory).
    pub fn entries(&self) -> &[SnippetEntry] {
        &self.entries
    }

    pub fn meta(&self) -> BankMeta {
        BankMeta {
            version: BANK_VERSION,
            sample_rate_hz: self.rate,
            speakers: self.speakers.clone(),
            vocab_size: self.words.len(),
        }
    }

    /// Exact lookup. `Ok(None)` when the word is not indexed.
    pub fn get_snippet(&self, speaker: &str, word: &str) -> Result<Option<&PcmBuffer>> {
        let words = self
            .index
            .get(speaker)
            .ok_or_else(|| Error::UnknownSpeaker(speaker.to_string()))?;
        Ok(words.get(word))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_file_word(word: &str) -> Result<()> {
    if word == "." || word == ".." || word.contains(['/', '\\', '\0']) {
        return Err(Error::Bank(format!("word {word:?} cannot be used as a file name")));
    }
    Ok(())
}

struct Scanned {
    speaker: String,
    word: String,
    source: PathBuf,
    bytes: Vec<u8>,
    audio: PcmBuffer,
}

fn scan_snippet_dir(snippet_dir: &Path) -> Result<Vec<Scanned>> {
    let read_dir = |p: &Path| -> Result<Vec<fs::DirEntry>> {
        let mut v: Vec<_> = fs::read_dir(p)
            .map_err(|e| Error::io(p, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(p, e))?;
        v.sort_by_key(|e| e.file_name());
        Ok(v)
    };

    let mut found = Vec::new();
    let mut rate: Option<(u32, PathBuf)> = None;
    for speaker_entry in read_dir(snippet_dir)? {
        let speaker_path = speaker_entry.path();
        if !speaker_path.is_dir() {
            continue;
        }
        let speaker = speaker_entry.file_name().to_string_lossy().into_owned();
        let mut seen: HashMap<String, PathBuf> = HashMap::new();
        for file in read_dir(&speaker_path)? {
            let path = file.path();
            if path.extension().and_then(|e| e.to_str()) != Some("wav") || !path.is_file() {
                continue;
            }
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let word = normalize_token(&stem);
            if word.is_empty() {
                return Err(Error::Bank(format!(
                    "{} has an empty word after normalization",
                    path.display()
                )));
            }
            check_file_word(&word)?;
            if let Some(prev) = seen.insert(word.clone(), path.clone()) {
                return Err(Error::Bank(format!(
                    "duplicate word {word:?} for speaker {speaker}: {} and {}",
                    prev.display(),
                    path.display()
                )));
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let audio = decode_wav(&bytes).map_err(|e| Error::Bank(format!("{}: {e}", path.display())))?;
            match &rate {
                None => rate = Some((audio.sample_rate_hz(), path.clone())),
                Some((r, first)) if *r != audio.sample_rate_hz() => {
                    return Err(Error::Bank(format!(
                        "{} is {} Hz but {} is {r} Hz",
                        path.display(),
                        audio.sample_rate_hz(),
                        first.display()
                    )))
                }
                _ => {}
            }
            found.push(Scanned {
                speaker: speaker.clone(),
                word,
                source: path,
                bytes,
                audio,
            });
        }
    }
    Ok(found)
}

/// Index a `<speaker>/<word>.wav` tree and write the bank manifest to
/// `out_dir`, copying snippets there when it differs from `snippet_dir`.
pub fn build_bank(snippet_dir: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<SpokenVocabBank> {
    let snippet_dir = snippet_dir.as_ref();
    let out_dir = out_dir.as_ref();
    let scanned = scan_snippet_dir(snippet_dir)?;
    if scanned.is_empty() {
        return Err(Error::Bank(format!(
            "no snippets found under {}",
            snippet_dir.display()
        )));
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let in_place = fs::canonicalize(snippet_dir).ok() == fs::canonicalize(out_dir).ok();

    let mut snippets = Vec::with_capacity(scanned.len());
    for s in scanned {
        let rel = if in_place {
            let name = s.source.file_name().unwrap_or_default().to_string_lossy();
            format!("{}/{}", s.speaker, name)
        } else {
            let rel = format!("{}/{}.wav", s.speaker, s.word);
            let dest = out_dir.join(&rel);
            let parent = dest.parent().expect("relative path has a parent");
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            fs::write(&dest, &s.bytes).map_err(|e| Error::io(&dest, e))?;
            rel
        };
        let entry = SnippetEntry {
            word: s.word.clone(),
            speaker_id: s.speaker.clone(),
            path: rel,
            sample_rate_hz: s.audio.sample_rate_hz(),
            num_samples: s.audio.len() as u64,
            sha256: sha256_hex(&s.bytes),
        };
        snippets.push((s.speaker, s.word, s.audio, Some(entry)));
    }
    let bank = SpokenVocabBank::assemble(snippets.into_iter())?;
    write_manifest(&bank, out_dir)?;
    Ok(bank)
}

fn write_manifest(bank: &SpokenVocabBank, out_dir: &Path) -> Result<()> {
    let meta_path = out_dir.join(BANK_FILE);
    let mut meta = serde_json::to_string_pretty(&bank.meta())?;
    meta.push('\n');
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    let mut lines = String::new();
    for entry in bank.entries() {
        lines.push_str(&serde_json::to_string(entry)?);
        lines.push('\n');
    }
    let entries_path = out_dir.join(SNIPPETS_FILE);
    fs::write(&entries_path, lines).map_err(|e| Error::io(&entries_path, e))
}

/// Load a bank directory eagerly, verifying each snippet's checksum, rate
/// and length against the manifest.
pub fn load_bank(bank_dir: impl AsRef<Path>) -> Result<SpokenVocabBank> {
    let bank_dir = bank_dir.as_ref();
    let meta_path = bank_dir.join(BANK_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: BankMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::Bank(format!("{}: {e}", meta_path.display())))?;
    if meta.version != BANK_VERSION {
        return Err(Error::Bank(format!("unsupported bank version {}", meta.version)));
    }

    let entries_path = bank_dir.join(SNIPPETS_FILE);
    let text = fs::read_to_string(&entries_path).map_err(|e| Error::io(&entries_path, e))?;
    let entries: Vec<SnippetEntry> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedRow {
                line: i + 1,
                message: format!("{}: {e}", entries_path.display()),
            })
        })
        .collect::<Result<_>>()?;
    if entries.is_empty() {
        return Err(Error::Bank("empty bank".into()));
    }

    let speakers: BTreeSet<&str> = meta.speakers.iter().map(String::as_str).collect();
    let loaded: Vec<(String, String, PcmBuffer, Option<SnippetEntry>)> = entries
        .into_par_iter()
        .map(|entry| {
            if !speakers.contains(entry.speaker_id.as_str()) {
                return Err(Error::Bank(format!(
                    "entry {}/{} names a speaker absent from {BANK_FILE}",
                    entry.speaker_id, entry.word
                )));
            }
            if entry.sample_rate_hz != meta.sample_rate_hz {
                return Err(Error::Bank(format!(
                    "entry {}/{} is {} Hz but {BANK_FILE} says {} Hz",
                    entry.speaker_id, entry.word, entry.sample_rate_hz, meta.sample_rate_hz
                )));
            }
            if normalize_token(&entry.word) != entry.word {
                return Err(Error::Bank(format!("entry word {:?} is not normalized", entry.word)));
            }
            check_file_word(&entry.word)?;
            let path = bank_dir.join(&entry.path);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::ChecksumMismatch {
                    speaker: entry.speaker_id.clone(),
                    word: entry.word.clone(),
                    path: entry.path.clone(),
                });
            }
            let audio = decode_wav(&bytes).map_err(|e| Error::Bank(format!("{}: {e}", path.display())))?;
            if audio.sample_rate_hz() != meta.sample_rate_hz {
                return Err(Error::Bank(format!(
                    "{} is {} Hz but {BANK_FILE} says {} Hz",
                    path.display(),
                    audio.sample_rate_hz(),
                    meta.sample_rate_hz
                )));
            }
            if audio.len() as u64 != entry.num_samples {
                return Err(Error::Bank(format!(
                    "entry {}/{} declares {} samples but the file has {}",
                    entry.speaker_id,
                    entry.word,
                    entry.num_samples,
                    audio.len()
                )));
            }
            Ok((entry.speaker_id.clone(), entry.word.clone(), audio, Some(entry)))
        })
        .collect::<Result<_>>()?;

    let bank = SpokenVocabBank::assemble(loaded.into_iter())?;
    let listed: BTreeSet<&str> = bank.speakers().iter().map(String::as_str).collect();
    if listed != speakers {
        return Err(Error::Bank(format!(
            "{BANK_FILE} lists speakers {:?} but entries cover {:?}",
            meta.speakers,
            bank.speakers()
        )));
    }
    if bank.vocab_size() != meta.vocab_size {
        return Err(Error::Bank(format!(
            "{BANK_FILE} declares vocab_size {} but entries index {} words",
            meta.vocab_size,
            bank.vocab_size()
        )));
    }
    Ok(bank)
}
