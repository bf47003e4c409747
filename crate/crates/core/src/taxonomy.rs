//! The design space of follow-up actions and target-information modalities.
//!
//! Seven general actions partition seventeen specific actions. Every value
//! carries the label and definition line shown to the model, plus a small
//! alias set used when mapping free-text model output back onto the closed
//! taxonomy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Granularity of an action label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    General,
    Specific,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::General => "general",
            Level::Specific => "specific",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold(s).as_str() {
            "general" => Ok(Level::General),
            "specific" => Ok(Level::Specific),
            _ => Err(TaxonomyError::UnknownLevel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("label is empty")]
    EmptyLabel,
    #[error("no taxonomy label matches {0:?}")]
    NoMatch(String),
    #[error("unknown level {0:?} (expected general or specific)")]
    UnknownLevel(String),
    #[error("unknown modality family {0:?} (expected visual or audio)")]
    UnknownFamily(String),
}

/// Case-, whitespace- and punctuation-insensitive form of a label.
pub fn fold(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// A closed label set with a fixed canonical order.
///
/// Implemented by [`GeneralAction`], [`SpecificAction`] and [`TargetModality`]
/// so that scoring and confusion matrices are written once.
pub trait TaxonomyLabel:
    Copy + Eq + Ord + std::hash::Hash + fmt::Debug + Send + Sync + 'static
{
    /// Every value in canonical order.
    fn all() -> &'static [Self];
    /// Stable machine identifier.
    fn canonical_name(self) -> &'static str;
    /// Position in the canonical order.
    fn index(self) -> usize {
        Self::all()
            .iter()
            .position(|&v| v == self)
            .expect("value is listed in all()")
    }
}

macro_rules! label_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.canonical_name())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.canonical_name())
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeneralAction {
    Share,
    Save,
    Remind,
    LookUp,
    DigitalExtract,
    Complex,
    MediaManipulation,
}

impl GeneralAction {
    pub const ALL: [GeneralAction; 7] = [
        GeneralAction::Share,
        GeneralAction::Save,
        GeneralAction::Remind,
        GeneralAction::LookUp,
        GeneralAction::DigitalExtract,
        GeneralAction::Complex,
        GeneralAction::MediaManipulation,
    ];

    pub fn canonical_name(self) -> &'static str {
        match self {
            GeneralAction::Share => "Share",
            GeneralAction::Save => "Save",
            GeneralAction::Remind => "Remind",
            GeneralAction::LookUp => "LookUp",
            GeneralAction::DigitalExtract => "DigitalExtract",
            GeneralAction::Complex => "Complex",
            GeneralAction::MediaManipulation => "MediaManipulation",
        }
    }

    /// Human-readable name.
    pub fn display_name(self) -> &'static str {
        match self {
            GeneralAction::Share => "Share",
            GeneralAction::Save => "Save",
            GeneralAction::Remind => "Remind",
            GeneralAction::LookUp => "Look up",
            GeneralAction::DigitalExtract => "Digital extract",
            GeneralAction::Complex => "Complex",
            GeneralAction::MediaManipulation => "Media manipulation",
        }
    }

    /// Group header used by the grouped action-prediction prompt.
    pub fn prompt_header(self) -> &'static str {
        match self {
            GeneralAction::MediaManipulation => "Augment",
            other => other.display_name(),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            GeneralAction::Share => "Make information available to others",
            GeneralAction::Save => "Store information",
            GeneralAction::Remind => "Create an alert or notice to remember something later",
            GeneralAction::LookUp => "Search for specific information or details",
            GeneralAction::DigitalExtract => {
                "Obtain and utilize information from multiple sources"
            }
            GeneralAction::Complex => "Process data from multiple sources",
            GeneralAction::MediaManipulation => {
                "Alter or modify media content to achieve a specific outcome"
            }
        }
    }

    pub fn aliases(self) -> &'static [&'static str] {
        match self {
            GeneralAction::Share => &["Sharing"],
            GeneralAction::Save => &["Saving", "Store"],
            GeneralAction::Remind => &["Reminder"],
            GeneralAction::LookUp => &["Looking up"],
            GeneralAction::DigitalExtract => &["Extraction"],
            GeneralAction::Complex => &["Complex actions", "Complex action"],
            GeneralAction::MediaManipulation => &["Augment", "Media manipulate"],
        }
    }

    /// Specific actions in this group, in canonical order.
    pub fn children(self) -> impl Iterator<Item = SpecificAction> {
        SpecificAction::ALL
            .into_iter()
            .filter(move |s| s.general() == self)
    }
}

impl TaxonomyLabel for GeneralAction {
    fn all() -> &'static [Self] {
        &GeneralAction::ALL
    }

    fn canonical_name(self) -> &'static str {
        GeneralAction::canonical_name(self)
    }
}

label_serde!(GeneralAction);

impl FromStr for GeneralAction {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_label(s, Level::General)? {
            ActionLabel::General(g) => Ok(g),
            ActionLabel::Specific(_) => unreachable!("general lookup returns general labels"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecificAction {
    ShareOnSocialMedia,
    ShareWithOthers,
    Remember,
    SaveForReference,
    SaveToList,
    KeepTrack,
    Remind,
    SearchOnline,
    Recognize,
    Translate,
    ExtractAndAccess,
    Transcribe,
    Digitize,
    Compare,
    Calculate,
    EditMedia,
    AugmentMedia,
}

impl SpecificAction {
    pub const ALL: [SpecificAction; 17] = [
        SpecificAction::ShareOnSocialMedia,
        SpecificAction::ShareWithOthers,
        SpecificAction::Remember,
        SpecificAction::SaveForReference,
        SpecificAction::SaveToList,
        SpecificAction::KeepTrack,
        SpecificAction::Remind,
        SpecificAction::SearchOnline,
        SpecificAction::Recognize,
        SpecificAction::Translate,
        SpecificAction::ExtractAndAccess,
        SpecificAction::Transcribe,
        SpecificAction::Digitize,
        SpecificAction::Compare,
        SpecificAction::Calculate,
        SpecificAction::EditMedia,
        SpecificAction::AugmentMedia,
    ];

    /// The parent general action.
    pub fn general(self) -> GeneralAction {
        use SpecificAction::*;
        match self {
            ShareOnSocialMedia | ShareWithOthers => GeneralAction::Share,
            Remember | SaveForReference | SaveToList | KeepTrack => GeneralAction::Save,
            Remind => GeneralAction::Remind,
            SearchOnline | Recognize | Translate => GeneralAction::LookUp,
            ExtractAndAccess | Transcribe | Digitize => GeneralAction::DigitalExtract,
            Compare | Calculate => GeneralAction::Complex,
            EditMedia | AugmentMedia => GeneralAction::MediaManipulation,
        }
    }

    pub fn canonical_name(self) -> &'static str {
        use SpecificAction::*;
        match self {
            ShareOnSocialMedia => "ShareOnSocialMedia",
            ShareWithOthers => "ShareWithOthers",
            Remember => "Remember",
            SaveForReference => "SaveForReference",
            SaveToList => "SaveToList",
            KeepTrack => "KeepTrack",
            Remind => "Remind",
            SearchOnline => "SearchOnline",
            Recognize => "Recognize",
            Translate => "Translate",
            ExtractAndAccess => "ExtractAndAccess",
            Transcribe => "Transcribe",
            Digitize => "Digitize",
            Compare => "Compare",
            Calculate => "Calculate",
            EditMedia => "EditMedia",
            AugmentMedia => "AugmentMedia",
        }
    }

    /// Label as listed in the action prompts.
    pub fn prompt_label(self) -> &'static str {
        use SpecificAction::*;
        match self {
            ShareOnSocialMedia => "Share on social media",
            ShareWithOthers => "Share with others",
            Remember => "Remember",
            SaveForReference => "For reference",
            SaveToList => "To list",
            KeepTrack => "Keep track",
            Remind => "Remind",
            SearchOnline => "Search online",
            Recognize => "Recognize",
            Translate => "Translate",
            ExtractAndAccess => "Extract and access",
            Transcribe => "Transcribe",
            Digitize => "Digitize",
            Compare => "Compare",
            Calculate => "Calculate",
            EditMedia => "Edit media",
            AugmentMedia => "Augment",
        }
    }

    /// Label used inside the grouped (general-level) listing. Only
    /// `AugmentMedia` differs from [`prompt_label`](Self::prompt_label).
    pub fn grouped_label(self) -> &'static str {
        match self {
            SpecificAction::AugmentMedia => "Augment visual/audio",
            other => other.prompt_label(),
        }
    }

    pub fn description(self) -> &'static str {
        use SpecificAction::*;
        match self {
            ShareOnSocialMedia => "Share/upload on social platforms",
            ShareWithOthers => "Send the info to specific entities",
            Remember => "Cherish a specific experience/moment for later recall",
            SaveForReference => "Store information for later usage or consultation",
            SaveToList => "Add information to a designated, organized collection",
            KeepTrack => "Record the development of a task or goal",
            Remind => "Make an alert or notice to remember something later",
            SearchOnline => "Search for more information online related to specific goals",
            Recognize => "Identify the information using specific tools (e.g., song names)",
            Translate => "Translate text/speech from one language to another",
            ExtractAndAccess => "Extract and utilize information from sources",
            Transcribe => "Convert audio to text",
            Digitize => "Transform information to a digital format for easier access",
            Compare => "Compare similarity and difference between two sets of info",
            Calculate => "Perform mathematical operations to solve a problem/task",
            EditMedia => "Enhance images or sounds to improve overall experience",
            AugmentMedia => "Modify media files to accomplish a specific task",
        }
    }

    /// `"<label>: <description>"`, the line shown in the specific-level prompt.
    pub fn definition_line(self) -> String {
        format!("{}: {}", self.prompt_label(), self.description())
    }

    /// Same line with the grouped label.
    pub fn grouped_definition_line(self) -> String {
        format!("{}: {}", self.grouped_label(), self.description())
    }

    pub fn aliases(self) -> &'static [&'static str] {
        use SpecificAction::*;
        match self {
            ShareOnSocialMedia => &["Post on social media", "Social media"],
            ShareWithOthers => &["Send to others", "Share with friends"],
            Remember => &["Remember the moment", "Cherish"],
            SaveForReference => &["Save for reference", "Reference"],
            SaveToList => &["Save to list", "Save to a list", "Add to list"],
            KeepTrack => &["Keep track of progress", "Track"],
            Remind => &["Reminder", "Set reminder"],
            SearchOnline => &["Search", "Web search"],
            Recognize => &["Recognise", "Identify"],
            Translate => &["Translation"],
            ExtractAndAccess => &["Extract"],
            Transcribe => &["Transcription"],
            Digitize => &["Digitalize", "Digitise"],
            Compare => &["Comparison"],
            Calculate => &["Calculation"],
            EditMedia => &["Edit"],
            AugmentMedia => &["Augment visual/audio", "Augment media"],
        }
    }
}

impl TaxonomyLabel for SpecificAction {
    fn all() -> &'static [Self] {
        &SpecificAction::ALL
    }

    fn canonical_name(self) -> &'static str {
        SpecificAction::canonical_name(self)
    }
}

label_serde!(SpecificAction);

impl FromStr for SpecificAction {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_label(s, Level::Specific)? {
            ActionLabel::Specific(a) => Ok(a),
            ActionLabel::General(_) => unreachable!("specific lookup returns specific labels"),
        }
    }
}

/// Returns the unique parent of a specific action.
pub fn general_of(action: SpecificAction) -> GeneralAction {
    action.general()
}

/// An action at either level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum ActionLabel {
    General(GeneralAction),
    Specific(SpecificAction),
}

impl ActionLabel {
    pub fn level(self) -> Level {
        match self {
            ActionLabel::General(_) => Level::General,
            ActionLabel::Specific(_) => Level::Specific,
        }
    }

    pub fn canonical_name(self) -> &'static str {
        match self {
            ActionLabel::General(g) => g.canonical_name(),
            ActionLabel::Specific(s) => s.canonical_name(),
        }
    }

    pub fn prompt_label(self) -> &'static str {
        match self {
            ActionLabel::General(g) => g.prompt_header(),
            ActionLabel::Specific(s) => s.prompt_label(),
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Maps free text onto the closed taxonomy at `level`.
///
/// Canonical identifiers and prompt labels are tried first, then aliases.
/// Matching ignores case, whitespace and punctuation; there is no fuzzy
/// matching, so anything else is [`TaxonomyError::NoMatch`].
pub fn normalize_label(raw: &str, level: Level) -> Result<ActionLabel, TaxonomyError> {
    let key = fold(raw);
    if key.is_empty() {
        return Err(TaxonomyError::EmptyLabel);
    }
    match level {
        Level::General => {
            let primary = GeneralAction::ALL.into_iter().find(|g| {
                fold(g.canonical_name()) == key
                    || fold(g.display_name()) == key
                    || fold(g.prompt_header()) == key
            });
            primary
                .or_else(|| {
                    GeneralAction::ALL
                        .into_iter()
                        .find(|g| g.aliases().iter().any(|a| fold(a) == key))
                })
                .map(ActionLabel::General)
        }
        Level::Specific => {
            let primary = SpecificAction::ALL.into_iter().find(|s| {
                fold(s.canonical_name()) == key
                    || fold(s.prompt_label()) == key
                    || fold(s.grouped_label()) == key
            });
            primary
                .or_else(|| {
                    SpecificAction::ALL
                        .into_iter()
                        .find(|s| s.aliases().iter().any(|a| fold(a) == key))
                })
                .map(ActionLabel::Specific)
        }
    }
    .ok_or_else(|| TaxonomyError::NoMatch(raw.trim().to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Visual,
    Audio,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Visual => "visual",
            Family::Audio => "audio",
        }
    }

    pub fn modalities(self) -> &'static [TargetModality] {
        match self {
            Family::Visual => &[TargetModality::Scene, TargetModality::Object, TargetModality::Text],
            Family::Audio => &[TargetModality::Sound, TargetModality::Speech],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold(s).as_str() {
            "visual" => Ok(Family::Visual),
            "audio" => Ok(Family::Audio),
            _ => Err(TaxonomyError::UnknownFamily(s.to_string())),
        }
    }
}

/// The piece of a capture a user wants to act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetModality {
    Scene,
    Object,
    Text,
    Sound,
    Speech,
}

impl TargetModality {
    pub const ALL: [TargetModality; 5] = [
        TargetModality::Scene,
        TargetModality::Object,
        TargetModality::Text,
        TargetModality::Sound,
        TargetModality::Speech,
    ];

    pub fn family(self) -> Family {
        match self {
            TargetModality::Scene | TargetModality::Object | TargetModality::Text => Family::Visual,
            TargetModality::Sound | TargetModality::Speech => Family::Audio,
        }
    }

    pub fn canonical_name(self) -> &'static str {
        match self {
            TargetModality::Scene => "scene",
            TargetModality::Object => "object",
            TargetModality::Text => "text",
            TargetModality::Sound => "sound",
            TargetModality::Speech => "speech",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            TargetModality::Scene => "users would like to take actions on the whole visual content",
            TargetModality::Object => {
                "users would like to take actions on specific physical objects they see"
            }
            TargetModality::Text => "users would like to take actions on visible text in the scene",
            TargetModality::Sound => "users would like to take actions on acoustic sound they hear",
            TargetModality::Speech => "users would like to take actions on someone's speech",
        }
    }

    /// Matches `raw` against the modalities of `family` only.
    pub fn normalize_in(raw: &str, family: Family) -> Result<TargetModality, TaxonomyError> {
        let key = fold(raw);
        if key.is_empty() {
            return Err(TaxonomyError::EmptyLabel);
        }
        family
            .modalities()
            .iter()
            .copied()
            .find(|m| {
                let name = m.canonical_name();
                key == name || key == format!("{name}s")
            })
            .ok_or_else(|| TaxonomyError::NoMatch(raw.trim().to_string()))
    }
}

impl TaxonomyLabel for TargetModality {
    fn all() -> &'static [Self] {
        &TargetModality::ALL
    }

    fn canonical_name(self) -> &'static str {
        TargetModality::canonical_name(self)
    }
}

label_serde!(TargetModality);

impl FromStr for TargetModality {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TargetModality::normalize_in(s, Family::Visual)
            .or_else(|_| TargetModality::normalize_in(s, Family::Audio))
    }
}

/// One row of the machine-readable taxonomy listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDefinition {
    pub name: String,
    pub level: Level,
    pub parent: Option<String>,
    pub definition: String,
    pub aliases: Vec<String>,
}

/// Definitions at `level`, in prompt order (7 or 17 rows).
pub fn list_definitions(level: Level) -> Vec<ActionDefinition> {
    match level {
        Level::General => GeneralAction::ALL
            .into_iter()
            .map(|g| ActionDefinition {
                name: g.canonical_name().to_string(),
                level,
                parent: None,
                definition: format!("{}: {}", g.display_name(), g.description()),
                aliases: g.aliases().iter().map(|a| a.to_string()).collect(),
            })
            .collect(),
        Level::Specific => SpecificAction::ALL
            .into_iter()
            .map(|s| ActionDefinition {
                name: s.canonical_name().to_string(),
                level,
                parent: Some(s.general().canonical_name().to_string()),
                definition: s.definition_line(),
                aliases: s.aliases().iter().map(|a| a.to_string()).collect(),
            })
            .collect(),
    }
}
