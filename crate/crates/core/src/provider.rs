//! Sources of transcripts and neutral reference renditions.
//!
//! The fixture provider reads pre-rendered files and works offline:
//!
//! ```text
//! <root>/<speaker>/<utterance>.query.wav
//! <root>/<speaker>/<utterance>.ref.wav
//! <root>/<speaker>/<utterance>.txt
//! ```
//!
//! The remote provider talks to external speech services:
//!
//! * STT: `POST {stt_endpoint}` with WAV bytes, answering `{"text": "..."}`.
//! * TTS: `POST {tts_endpoint}` with `{"text": "...", "speaker_id": "..."}`,
//!   answering WAV bytes. The service resolves the speaker to its own voice
//!   embedding.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio_io::{condition, read_wav, AudioBuffer};
use crate::error::{Error, Result};
use crate::pipeline::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtteranceKey {
    pub speaker_id: String,
    pub utterance_id: String,
}

impl UtteranceKey {
    pub fn new(speaker_id: impl Into<String>, utterance_id: impl Into<String>) -> Self {
        Self { speaker_id: speaker_id.into(), utterance_id: utterance_id.into() }
    }

    /// Derives the key from a fixture-style path `<speaker>/<utterance>.query.wav`.
    pub fn from_query_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        let utterance = name.strip_suffix(".query.wav").or_else(|| name.strip_suffix(".wav"))?;
        let speaker = path.parent()?.file_name()?.to_str()?;
        Some(Self::new(speaker, utterance))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceProvider {
    Fixture { fixture_root: PathBuf },
    Remote { stt_endpoint: String, tts_endpoint: String, timeout_ms: u64 },
}

impl ReferenceProvider {
    pub fn fixture(root: impl Into<PathBuf>) -> Self {
        ReferenceProvider::Fixture { fixture_root: root.into() }
    }

    pub fn remote(stt_endpoint: impl Into<String>, tts_endpoint: impl Into<String>, timeout_ms: u64) -> Self {
        ReferenceProvider::Remote { stt_endpoint: stt_endpoint.into(), tts_endpoint: tts_endpoint.into(), timeout_ms }
    }

    fn fixture_path(root: &Path, key: &UtteranceKey, suffix: &str) -> PathBuf {
        root.join(&key.speaker_id).join(format!("{}{suffix}", key.utterance_id))
    }

    /// Transcript tokens for `audio`. Fixture mode ignores the audio and reads
    /// `<utterance>.txt`.
    pub fn transcribe(&self, audio: &AudioBuffer, key: &UtteranceKey) -> Result<Vec<String>> {
        let text = match self {
            ReferenceProvider::Fixture { fixture_root } => {
                let path = Self::fixture_path(fixture_root, key, ".txt");
                if !path.is_file() {
                    return Err(Error::MissingFixture(path));
                }
                std::fs::read_to_string(&path)?
            }
            ReferenceProvider::Remote { stt_endpoint, timeout_ms, .. } => remote::transcribe(stt_endpoint, *timeout_ms, audio)?,
        };
        let tokens = tokenize(&text);
        if tokens.is_empty() {
            return Err(Error::ProviderError("transcript is empty".into()));
        }
        Ok(tokens)
    }

    /// Neutral rendition of `tokens` in the speaker's voice, conditioned to the
    /// working rate with silent edges trimmed.
    pub fn synthesize_reference(&self, tokens: &[String], key: &UtteranceKey) -> Result<AudioBuffer> {
        let raw = match self {
            ReferenceProvider::Fixture { fixture_root } => {
                let speaker_dir = fixture_root.join(&key.speaker_id);
                if !speaker_dir.is_dir() {
                    return Err(Error::MissingFixture(speaker_dir));
                }
                let path = Self::fixture_path(fixture_root, key, ".ref.wav");
                if !path.is_file() {
                    return Err(Error::MissingFixture(path));
                }
                read_wav(&path)?
            }
            ReferenceProvider::Remote { tts_endpoint, timeout_ms, .. } => {
                remote::synthesize(tts_endpoint, *timeout_ms, &tokens.join(" "), &key.speaker_id)?
            }
        };
        condition(&raw)
    }
}

#[cfg(feature = "remote")]
mod remote {
    use std::time::Duration;

    use serde::Deserialize;

    use crate::audio_io::{read_wav_bytes, write_wav_bytes, AudioBuffer};
    use crate::error::{Error, Result};

    #[derive(Deserialize)]
    struct SttResponse {
        text: String,
    }

    fn agent(timeout_ms: u64) -> ureq::Agent {
        ureq::AgentBuilder::new().timeout(Duration::from_millis(timeout_ms)).build()
    }

    fn map_error(url: &str, err: ureq::Error) -> Error {
        match err {
            ureq::Error::Status(code, response) => {
                let body = response.into_string().unwrap_or_default();
                Error::ProviderError(format!("{url} answered {code}: {body}"))
            }
            ureq::Error::Transport(t) => {
                if is_timeout(&t) {
                    Error::ProviderTimeout(format!("{url}: {t}"))
                } else {
                    Error::ProviderUnreachable(format!("{url}: {t}"))
                }
            }
        }
    }

    fn is_timeout(t: &ureq::Transport) -> bool {
        let mut source = std::error::Error::source(t);
        while let Some(err) = source {
            if let Some(io) = err.downcast_ref::<std::io::Error>() {
                if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                    return true;
                }
            }
            source = err.source();
        }
        t.to_string().contains("timed out")
    }

    pub(super) fn transcribe(url: &str, timeout_ms: u64, audio: &AudioBuffer) -> Result<String> {
        let body = write_wav_bytes(audio)?;
        let response = agent(timeout_ms)
            .post(url)
            .set("Content-Type", "audio/wav")
            .send_bytes(&body)
            .map_err(|e| map_error(url, e))?;
        let parsed: SttResponse = response
            .into_string()
            .map_err(|e| e.to_string())
            .and_then(|body| serde_json::from_str(&body).map_err(|e| e.to_string()))
            .map_err(|e| Error::ProviderError(format!("{url} returned an unreadable body: {e}")))?;
        Ok(parsed.text)
    }

    pub(super) fn synthesize(url: &str, timeout_ms: u64, text: &str, speaker_id: &str) -> Result<AudioBuffer> {
        let response = agent(timeout_ms)
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(&serde_json::json!({ "text": text, "speaker_id": speaker_id }).to_string())
            .map_err(|e| map_error(url, e))?;
        let mut bytes = Vec::new();
        std::io::Read::read_to_end(&mut response.into_reader(), &mut bytes)
            .map_err(|e| Error::ProviderError(format!("{url}: {e}")))?;
        read_wav_bytes(&bytes).map_err(|e| Error::ProviderError(format!("{url} returned invalid audio: {e}")))
    }
}

#[cfg(not(feature = "remote"))]
mod remote {
    use crate::audio_io::AudioBuffer;
    use crate::error::{Error, Result};

    pub(super) fn transcribe(_: &str, _: u64, _: &AudioBuffer) -> Result<String> {
        Err(Error::ProviderError("built without remote provider support".into()))
    }

    pub(super) fn synthesize(_: &str, _: u64, _: &str, _: &str) -> Result<AudioBuffer> {
        Err(Error::ProviderError("built without remote provider support".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::write_wav;
    use crate::corpus::{render_utterance, Voice};

    fn fixture_tree() -> (tempfile::TempDir, AudioBuffer) {
        let dir = tempfile::tempdir().unwrap();
        let tokens = tokenize("I did not take your bag.");
        let audio = render_utterance(&tokens, &Voice::new(130.0), 5).audio;
        let spk = dir.path().join("alice");
        std::fs::create_dir_all(&spk).unwrap();
        write_wav(&audio, spk.join("u1.ref.wav")).unwrap();
        std::fs::write(spk.join("u1.txt"), "I did not take your bag.\n").unwrap();
        std::fs::write(spk.join("blank.txt"), "  \n").unwrap();
        (dir, audio)
    }

    #[test]
    fn fixture_transcript_is_tokenized() {
        let (dir, audio) = fixture_tree();
        let provider = ReferenceProvider::fixture(dir.path());
        let tokens = provider.transcribe(&audio, &UtteranceKey::new("alice", "u1")).unwrap();
        assert_eq!(tokens, ["i", "did", "not", "take", "your", "bag"]);
    }

    #[test]
    fn empty_fixture_transcript_is_a_provider_error() {
        let (dir, audio) = fixture_tree();
        let provider = ReferenceProvider::fixture(dir.path());
        let err = provider.transcribe(&audio, &UtteranceKey::new("alice", "blank")).unwrap_err();
        assert!(matches!(err, Error::ProviderError(_)));
    }

    #[test]
    fn fixture_reference_is_conditioned() {
        let (dir, audio) = fixture_tree();
        let provider = ReferenceProvider::fixture(dir.path());
        let reference = provider.synthesize_reference(&[], &UtteranceKey::new("alice", "u1")).unwrap();
        assert_eq!(reference.sample_rate(), 16_000);
        assert!(reference.len() < audio.len());
    }

    #[test]
    fn unknown_speaker_or_utterance_is_missing() {
        let (dir, _) = fixture_tree();
        let provider = ReferenceProvider::fixture(dir.path());
        assert!(matches!(provider.synthesize_reference(&[], &UtteranceKey::new("bob", "u1")), Err(Error::MissingFixture(_))));
        assert!(matches!(provider.synthesize_reference(&[], &UtteranceKey::new("alice", "zz")), Err(Error::MissingFixture(_))));
    }

    #[test]
    fn keys_from_fixture_paths() {
        let key = UtteranceKey::from_query_path(Path::new("/data/alice/u7.query.wav")).unwrap();
        assert_eq!(key, UtteranceKey::new("alice", "u7"));
    }

    #[test]
    fn provider_config_round_trips() {
        let p = ReferenceProvider::remote("http://a/stt", "http://a/tts", 5000);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"mode\":\"remote\""));
        assert_eq!(serde_json::from_str::<ReferenceProvider>(&json).unwrap(), p);
    }
}
