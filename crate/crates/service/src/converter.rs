//! Raw media to structured text.
//!
//! A converter fills the capture field of one target modality for one media
//! kind (`image`, `audio`, ...). Perception models are out of scope here;
//! the bundled converters are table-driven mocks.

use std::collections::{BTreeMap, VecDeque};

use omniact_core::{StructuredCapture, TargetModality};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of the rolling audio context kept for trigger-time predictions.
pub const AUDIO_WINDOW_SECS: f64 = 5.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConverterError {
    #[error("no converter registered for media kind {0:?}")]
    NoConverter(String),
    #[error("converter {name} failed: {message}")]
    ConversionFailed { name: String, message: String },
    #[error("a {modality} converter for media kind {media_kind:?} is already registered")]
    AlreadyRegistered { modality: TargetModality, media_kind: String },
}

/// A timestamped audio observation, in seconds from stream start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioEvent {
    pub at: f64,
    #[serde(default)]
    pub sound: Option<String>,
    #[serde(default)]
    pub speech: Option<String>,
}

/// Describes a raw payload without carrying its bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDescriptor {
    pub media_kind: String,
    /// Name of a bundled fixture, e.g. `menu.jpg`.
    #[serde(default)]
    pub fixture: Option<String>,
    #[serde(default)]
    pub events: Vec<AudioEvent>,
}

/// Span of the audio context that fed a conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioWindow {
    pub start: f64,
    pub end: f64,
}

impl AudioWindow {
    pub fn seconds(&self) -> f64 {
        self.end - self.start
    }
}

/// Rolling buffer holding the most recent five seconds of audio events.
#[derive(Debug, Clone, Default)]
pub struct AudioContextBuffer {
    events: VecDeque<AudioEvent>,
}

impl AudioContextBuffer {
    pub fn from_events(events: &[AudioEvent]) -> Self {
        let mut sorted = events.to_vec();
        sorted.sort_by(|a, b| a.at.total_cmp(&b.at));
        let mut buf = AudioContextBuffer::default();
        for e in sorted {
            buf.push(e);
        }
        buf
    }

    /// Adds an event and drops everything older than the window. Events
    /// arriving out of order are kept only if still inside the window.
    pub fn push(&mut self, event: AudioEvent) {
        let latest = self.events.back().map_or(event.at, |b| b.at.max(event.at));
        if event.at < latest - AUDIO_WINDOW_SECS {
            return;
        }
        let pos = self.events.partition_point(|e| e.at <= event.at);
        self.events.insert(pos, event);
        while self.events.front().is_some_and(|e| e.at < latest - AUDIO_WINDOW_SECS) {
            self.events.pop_front();
        }
    }

    pub fn events(&self) -> impl Iterator<Item = &AudioEvent> {
        self.events.iter()
    }

    pub fn window(&self) -> Option<AudioWindow> {
        Some(AudioWindow { start: self.events.front()?.at, end: self.events.back()?.at })
    }
}

pub trait ConverterPlugin: Send + Sync {
    fn name(&self) -> &str;
    fn modality(&self) -> TargetModality;
    fn media_kind(&self) -> &str;
    /// Fills this converter's part of `capture`. Errors are plain messages.
    fn convert(&self, raw: &RawDescriptor, capture: &mut StructuredCapture) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub capture: StructuredCapture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_window: Option<AudioWindow>,
}

#[derive(Default)]
pub struct ConverterRegistry {
    plugins: Vec<Box<dyn ConverterPlugin>>,
}

impl ConverterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with every bundled mock converter.
    pub fn with_mocks() -> Self {
        let mut r = Self::new();
        r.register(Box::new(CaptionMock::default())).expect("mocks are disjoint");
        r.register(Box::new(KeywordOcrMock::default())).expect("mocks are disjoint");
        r.register(Box::new(SoundLookupMock::default())).expect("mocks are disjoint");
        r.register(Box::new(SpeechWindowMock)).expect("mocks are disjoint");
        r
    }

    pub fn register(&mut self, plugin: Box<dyn ConverterPlugin>) -> Result<(), ConverterError> {
        if self
            .plugins
            .iter()
            .any(|p| p.modality() == plugin.modality() && p.media_kind() == plugin.media_kind())
        {
            return Err(ConverterError::AlreadyRegistered {
                modality: plugin.modality(),
                media_kind: plugin.media_kind().to_string(),
            });
        }
        self.plugins.push(plugin);
        Ok(())
    }

    pub fn media_kinds(&self) -> Vec<&str> {
        let mut kinds: Vec<&str> = self.plugins.iter().map(|p| p.media_kind()).collect();
        kinds.sort_unstable();
        kinds.dedup();
        kinds
    }

    /// Runs every converter registered for the descriptor's media kind.
    pub fn convert(&self, raw: &RawDescriptor) -> Result<Conversion, ConverterError> {
        let mut capture = StructuredCapture::default();
        let mut ran = false;
        for p in self.plugins.iter().filter(|p| p.media_kind() == raw.media_kind) {
            ran = true;
            p.convert(raw, &mut capture)
                .map_err(|message| ConverterError::ConversionFailed { name: p.name().to_string(), message })?;
        }
        if !ran {
            return Err(ConverterError::NoConverter(raw.media_kind.clone()));
        }
        if capture.is_empty() {
            return Err(ConverterError::ConversionFailed {
                name: raw.media_kind.clone(),
                message: "no capture field was produced".into(),
            });
        }
        let audio_window = AudioContextBuffer::from_events(&raw.events).window();
        Ok(Conversion { capture, audio_window })
    }
}

fn fixture<'a>(raw: &'a RawDescriptor, name: &str) -> Result<&'a str, String> {
    raw.fixture.as_deref().ok_or_else(|| format!("{name} needs a fixture name"))
}

/// Image captioning stand-in: a fixed caption per fixture image.
pub struct CaptionMock {
    pub captions: BTreeMap<String, String>,
}

impl Default for CaptionMock {
    fn default() -> Self {
        let captions = [
            ("menu.jpg", "a menu board in a cafe"),
            ("chocolate.jpg", "a bag of chocolate on a store shelf"),
            ("jeans_label.jpg", "a label on a pair of jeans in a clothing store"),
            ("rabbit.jpg", "a rabbit sitting on the grass"),
            ("receipt.jpg", "a restaurant receipt on a table"),
            ("street_sign.jpg", "a street sign in a foreign language"),
        ];
        CaptionMock { captions: captions.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl ConverterPlugin for CaptionMock {
    fn name(&self) -> &str {
        "caption-mock"
    }
    fn modality(&self) -> TargetModality {
        TargetModality::Scene
    }
    fn media_kind(&self) -> &str {
        "image"
    }
    fn convert(&self, raw: &RawDescriptor, capture: &mut StructuredCapture) -> Result<(), String> {
        let name = fixture(raw, self.name())?;
        let caption = self.captions.get(name).ok_or_else(|| format!("unknown image fixture {name:?}"))?;
        capture.scene_caption = Some(caption.clone());
        Ok(())
    }
}

/// OCR stand-in: emits text for every keyword found in the fixture name.
pub struct KeywordOcrMock {
    pub keywords: Vec<(String, String)>,
}

impl Default for KeywordOcrMock {
    fn default() -> Self {
        let keywords = [
            ("menu", "LATTE 4.50"),
            ("chocolate", "MILK CHOCOLATE TOFFEE ALMONDS"),
            ("jeans", "SLIM STRAIGHT W32 L32"),
            ("receipt", "TOTAL 86.40"),
        ];
        KeywordOcrMock { keywords: keywords.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl ConverterPlugin for KeywordOcrMock {
    fn name(&self) -> &str {
        "keyword-ocr-mock"
    }
    fn modality(&self) -> TargetModality {
        TargetModality::Text
    }
    fn media_kind(&self) -> &str {
        "image"
    }
    fn convert(&self, raw: &RawDescriptor, capture: &mut StructuredCapture) -> Result<(), String> {
        let name = fixture(raw, self.name())?.to_lowercase();
        for (keyword, text) in &self.keywords {
            if name.contains(keyword.as_str()) {
                capture.visible_text.push(text.clone());
            }
        }
        Ok(())
    }
}

/// Sound classifier stand-in: maps raw event tags to class names.
pub struct SoundLookupMock {
    pub classes: BTreeMap<String, String>,
}

impl Default for SoundLookupMock {
    fn default() -> Self {
        let classes = [
            ("music", "Music"),
            ("birdsong", "Bird vocalization"),
            ("siren", "Siren"),
            ("traffic", "Vehicle"),
            ("speech", "Speech"),
            ("applause", "Applause"),
        ];
        SoundLookupMock { classes: classes.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

impl ConverterPlugin for SoundLookupMock {
    fn name(&self) -> &str {
        "sound-lookup-mock"
    }
    fn modality(&self) -> TargetModality {
        TargetModality::Sound
    }
    fn media_kind(&self) -> &str {
        "audio"
    }
    fn convert(&self, raw: &RawDescriptor, capture: &mut StructuredCapture) -> Result<(), String> {
        let buffer = AudioContextBuffer::from_events(&raw.events);
        for tag in buffer.events().filter_map(|e| e.sound.as_deref()) {
            let class = self.classes.get(tag).ok_or_else(|| format!("unknown sound tag {tag:?}"))?;
            if !capture.sound_classes.contains(class) {
                capture.sound_classes.push(class.clone());
            }
        }
        Ok(())
    }
}

/// Speech-to-text stand-in: joins the speech fragments inside the window.
pub struct SpeechWindowMock;

impl ConverterPlugin for SpeechWindowMock {
    fn name(&self) -> &str {
        "speech-window-mock"
    }
    fn modality(&self) -> TargetModality {
        TargetModality::Speech
    }
    fn media_kind(&self) -> &str {
        "audio"
    }
    fn convert(&self, raw: &RawDescriptor, capture: &mut StructuredCapture) -> Result<(), String> {
        let buffer = AudioContextBuffer::from_events(&raw.events);
        let parts: Vec<&str> = buffer
            .events()
            .filter_map(|e| e.speech.as_deref())
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if !parts.is_empty() {
            capture.speech_transcript = Some(parts.join(" "));
        }
        Ok(())
    }
}
