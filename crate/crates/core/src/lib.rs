//! Word-snippet speech stitching.
//!
//! A [`SpokenVocabBank`] holds one short recording per vocabulary word per
//! speaker. [`stitch_sentence`] turns text into an utterance by resolving
//! each token against the bank (exact, fuzzy, or a filler word) and
//! cross-fading the snippets together. On top of that sit dictionary-driven
//! code-switching ([`code_switch`]) and MT-to-ST dataset conversion
//! ([`dataset`]), either materialized to disk or streamed.

pub mod audio;
pub mod bank;
pub mod code_switch;
pub mod dataset;
mod error;
pub mod matcher;
pub mod seed;
pub mod stitcher;

pub use audio::PcmBuffer;
pub use bank::{build_bank, load_bank, SnippetEntry, SpokenVocabBank};
pub use code_switch::{cs_stitch, CsAssets, CsConfig, CsDictionary, CsReport};
pub use dataset::{convert_mt, load_mt_tsv, mix_plan, stream_mt, DatasetManifest, MixPlan, MtPair};
pub use error::{Error, Result};
pub use matcher::{MatchKind, Resolution, Vocabulary};
pub use stitcher::{stitch_sentence, SpeakerPolicy, StitchConfig, StitchReport};
