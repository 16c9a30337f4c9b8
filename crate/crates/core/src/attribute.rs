//! Attribute vocabulary, preference pairs and attribute subsets.
//!
//! Attributes are addressed by [`AttributeId`] everywhere inside the crate;
//! names only appear when a library is serialized or when a prompt is
//! augmented with an `Attributes:` block.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The 42 attribute names of the default vocabulary, in id order.
///
/// The source table is two columns read column-major, so the left column
/// (`Base` .. `Vague`) takes ids 0..=20 and the right column
/// (`Creative` .. `Eco-friendly`) takes ids 21..=41.
pub const DEFAULT_ATTRIBUTES: [&str; 42] = [
    "Base",
    "Formal",
    "Concise",
    "Vivid",
    "Modest",
    "Engineer",
    "Persuasive",
    "Emotion",
    "Humor",
    "Energy",
    "Code",
    "Easy",
    "Direct",
    "Social",
    "Western",
    "Eastern",
    "Respect",
    "Internet Slang",
    "Proverb",
    "Critical",
    "Vague",
    "Creative",
    "Analytic",
    "Empathetic",
    "Sycophant",
    "Old-fashioned",
    "Meritocratic",
    "Myopic",
    "Principled",
    "Hedonist",
    "Utilitarian",
    "Realist",
    "Pessimistic",
    "Storyteller",
    "Flexible",
    "Spontaneous",
    "Collectivist",
    "Individualistic",
    "Exclamatory",
    "Conspiracy",
    "Tech Industry Priority",
    "Eco-friendly",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibraryError {
    #[error("attribute library is empty")]
    Empty,
    #[error("attribute name at position {0} is blank")]
    BlankName(usize),
    #[error("duplicate attribute name {0:?}")]
    DuplicateName(String),
    #[error("attribute ids must be 0..K-1 in order; position {position} has id {id}")]
    IdGap { position: usize, id: u16 },
    #[error("unsupported library version {0}")]
    Version(u32),
    #[error("library has more than {} attributes", u16::MAX)]
    TooLarge,
    #[error("malformed library file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PairError {
    #[error("preference pair {pair_id:?} has an empty {field}")]
    EmptyField { pair_id: String, field: &'static str },
    #[error("preference pair {0:?} has identical chosen and rejected responses")]
    DegeneratePair(String),
    #[error("pairs file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Stable integer handle of an attribute inside one library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeId(pub u16);

impl AttributeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub id: AttributeId,
    pub name: String,
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    version: u32,
    attributes: Vec<Attribute>,
}

/// The universe of named attributes available for selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeLibrary {
    attributes: Vec<Attribute>,
}

fn fold_name(name: &str) -> String {
    name.trim().to_lowercase()
}

impl AttributeLibrary {
    /// Builds a library from names, assigning ids in order.
    pub fn from_names<I, S>(names: I) -> Result<Self, LibraryError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let attributes = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let id = u16::try_from(i).map_err(|_| LibraryError::TooLarge)?;
                Ok(Attribute { id: AttributeId(id), name: name.into() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_attributes(attributes)
    }

    pub fn from_attributes(attributes: Vec<Attribute>) -> Result<Self, LibraryError> {
        if attributes.is_empty() {
            return Err(LibraryError::Empty);
        }
        let mut seen = HashSet::with_capacity(attributes.len());
        for (position, attr) in attributes.iter().enumerate() {
            if attr.id.index() != position {
                return Err(LibraryError::IdGap { position, id: attr.id.0 });
            }
            if attr.name.trim().is_empty() {
                return Err(LibraryError::BlankName(position));
            }
            if !seen.insert(fold_name(&attr.name)) {
                return Err(LibraryError::DuplicateName(attr.name.clone()));
            }
        }
        Ok(Self { attributes })
    }

    /// The first `k` attributes as a library of their own.
    pub fn truncated(&self, k: usize) -> Result<Self, LibraryError> {
        Self::from_attributes(self.attributes.iter().take(k).cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn ids(&self) -> impl Iterator<Item = AttributeId> + '_ {
        self.attributes.iter().map(|a| a.id)
    }

    pub fn contains(&self, id: AttributeId) -> bool {
        id.index() < self.attributes.len()
    }

    pub fn name(&self, id: AttributeId) -> Option<&str> {
        self.attributes.get(id.index()).map(|a| a.name.as_str())
    }

    /// Case-insensitive lookup, ignoring surrounding whitespace.
    pub fn id_of(&self, name: &str) -> Option<AttributeId> {
        let folded = fold_name(name);
        self.attributes.iter().find(|a| fold_name(&a.name) == folded).map(|a| a.id)
    }

    /// Canonical JSON form `{"version":1,"attributes":[{"id":0,"name":"Base"},...]}`.
    pub fn to_json(&self) -> String {
        let file = LibraryFile { version: 1, attributes: self.attributes.clone() };
        serde_json::to_string(&file).expect("library serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, LibraryError> {
        let file: LibraryFile =
            serde_json::from_str(text).map_err(|e| LibraryError::Parse(e.to_string()))?;
        if file.version != 1 {
            return Err(LibraryError::Version(file.version));
        }
        Self::from_attributes(file.attributes)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// The default 42-attribute vocabulary.
pub fn load_default_library() -> AttributeLibrary {
    AttributeLibrary::from_names(DEFAULT_ATTRIBUTES).expect("default vocabulary is valid")
}

/// One pairwise judgement: `chosen` was preferred over `rejected` for `prompt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub pair_id: String,
    pub user_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
}

impl PreferencePair {
    pub fn new(
        pair_id: impl Into<String>,
        user_id: impl Into<String>,
        prompt: impl Into<String>,
        chosen: impl Into<String>,
        rejected: impl Into<String>,
    ) -> Self {
        Self {
            pair_id: pair_id.into(),
            user_id: user_id.into(),
            prompt: prompt.into(),
            chosen: chosen.into(),
            rejected: rejected.into(),
        }
    }

    /// The same judgement with the two responses exchanged.
    pub fn swapped(&self) -> Self {
        Self { chosen: self.rejected.clone(), rejected: self.chosen.clone(), ..self.clone() }
    }
}

pub fn validate_pair(pair: PreferencePair) -> Result<PreferencePair, PairError> {
    for (field, value) in [
        ("prompt", &pair.prompt),
        ("chosen response", &pair.chosen),
        ("rejected response", &pair.rejected),
    ] {
        if value.trim().is_empty() {
            return Err(PairError::EmptyField { pair_id: pair.pair_id.clone(), field });
        }
    }
    if pair.chosen == pair.rejected {
        return Err(PairError::DegeneratePair(pair.pair_id));
    }
    Ok(pair)
}

/// Reads a JSON Lines pairs file, validating every record. Blank lines are skipped.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<Vec<PreferencePair>, PairError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| PairError::Parse { line: line_no, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: PreferencePair = serde_json::from_str(&line)
            .map_err(|e| PairError::Parse { line: line_no, reason: e.to_string() })?;
        pairs.push(validate_pair(pair)?);
    }
    Ok(pairs)
}

pub fn write_pairs<W: Write>(mut writer: W, pairs: &[PreferencePair]) -> std::io::Result<()> {
    for pair in pairs {
        serde_json::to_writer(&mut writer, pair)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// An ordered selection of attributes with the marginal gain recorded for each pick.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AttributeSubset {
    pub members: Vec<AttributeId>,
    pub gains: Vec<f64>,
}

impl AttributeSubset {
    pub fn empty() -> Self {
        Self::default()
    }

    /// A subset without a gain trace (e.g. hand-specified or loaded from disk).
    pub fn from_ids(members: Vec<AttributeId>) -> Self {
        Self { members, gains: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> &[AttributeId] {
        &self.members
    }

    /// Members in ascending id order.
    pub fn canonical(&self) -> Vec<AttributeId> {
        let mut ids = self.members.clone();
        ids.sort_unstable();
        ids
    }

    /// Checks the structural invariants against a library and budget.
    pub fn check(&self, library: &AttributeLibrary, budget: usize) -> Result<(), String> {
        if self.members.len() > budget {
            return Err(format!("{} members exceed budget {budget}", self.members.len()));
        }
        let mut seen = HashSet::new();
        for id in &self.members {
            if !library.contains(*id) {
                return Err(format!("attribute id {id} is not in the library"));
            }
            if !seen.insert(*id) {
                return Err(format!("attribute id {id} appears twice"));
            }
        }
        if !self.gains.is_empty() && self.gains.len() != self.members.len() {
            return Err("gain trace length differs from member count".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_library_has_42_entries() {
        let lib = load_default_library();
        assert_eq!(lib.len(), 42);
        assert_eq!(lib.name(AttributeId(0)), Some("Base"));
        assert_eq!(lib.name(AttributeId(1)), Some("Formal"));
        assert_eq!(lib.name(AttributeId(21)), Some("Creative"));
        assert_eq!(lib.name(AttributeId(41)), Some("Eco-friendly"));
        assert!(lib.id_of("Internet Slang").is_some());
        assert!(lib.id_of("eco-friendly ").is_some());
    }

    #[test]
    fn default_library_ids_and_names_are_unique() {
        let lib = load_default_library();
        let ids: Vec<_> = lib.ids().map(|a| a.0).collect();
        assert_eq!(ids, (0..42).collect::<Vec<u16>>());
        let names: HashSet<_> = lib.attributes().iter().map(|a| fold_name(&a.name)).collect();
        assert_eq!(names.len(), 42);
    }

    #[test]
    fn library_rejects_bad_input() {
        assert_eq!(AttributeLibrary::from_names(Vec::<String>::new()), Err(LibraryError::Empty));
        assert!(matches!(
            AttributeLibrary::from_names(["Formal", " formal"]),
            Err(LibraryError::DuplicateName(_))
        ));
        assert_eq!(AttributeLibrary::from_names(["a", "  "]), Err(LibraryError::BlankName(1)));
        let gap = vec![
            Attribute { id: AttributeId(0), name: "a".into() },
            Attribute { id: AttributeId(2), name: "b".into() },
        ];
        assert_eq!(
            AttributeLibrary::from_attributes(gap),
            Err(LibraryError::IdGap { position: 1, id: 2 })
        );
    }

    #[test]
    fn library_json_round_trip_is_byte_identical() {
        let lib = load_default_library();
        let json = lib.to_json();
        assert!(json.starts_with(r#"{"version":1,"attributes":[{"id":0,"name":"Base"},"#));
        let back = AttributeLibrary::from_json(&json).unwrap();
        assert_eq!(back, lib);
        assert_eq!(back.to_json(), json);
        assert_eq!(back.content_hash(), lib.content_hash());
        assert!(matches!(
            AttributeLibrary::from_json(r#"{"version":2,"attributes":[]}"#),
            Err(LibraryError::Version(2))
        ));
    }

    #[test]
    fn validate_pair_cases() {
        assert!(validate_pair(PreferencePair::new("p", "u", "q", "a", "b")).is_ok());
        assert_eq!(
            validate_pair(PreferencePair::new("p", "u", "q", "a", "a")),
            Err(PairError::DegeneratePair("p".into()))
        );
        assert!(matches!(
            validate_pair(PreferencePair::new("p", "u", "", "a", "b")),
            Err(PairError::EmptyField { field: "prompt", .. })
        ));
        assert!(matches!(
            validate_pair(PreferencePair::new("p", "u", "q", " ", "b")),
            Err(PairError::EmptyField { .. })
        ));
    }

    #[test]
    fn pairs_file_uses_chosen_rejected_keys() {
        let text = "{\"pair_id\":\"1\",\"user_id\":\"u\",\"prompt\":\"q\",\"chosen\":\"a\",\"rejected\":\"b\"}\n\n";
        let pairs = read_pairs(text.as_bytes()).unwrap();
        assert_eq!(pairs, vec![PreferencePair::new("1", "u", "q", "a", "b")]);
        let mut out = Vec::new();
        write_pairs(&mut out, &pairs).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text.trim_end().to_string() + "\n");

        let bad = "{\"pair_id\":\"1\",\"user_id\":\"u\",\"prompt\":\"q\",\"chosen\":\"a\",\"rejected\":\"a\"}";
        assert!(matches!(read_pairs(bad.as_bytes()), Err(PairError::DegeneratePair(_))));
        assert!(matches!(read_pairs("{".as_bytes()), Err(PairError::Parse { line: 1, .. })));
    }

    #[test]
    fn subset_check() {
        let lib = load_default_library();
        let ok = AttributeSubset { members: vec![AttributeId(3), AttributeId(1)], gains: vec![1.0, 0.5] };
        assert!(ok.check(&lib, 3).is_ok());
        assert_eq!(ok.canonical(), vec![AttributeId(1), AttributeId(3)]);
        assert!(ok.check(&lib, 1).is_err());
        assert!(AttributeSubset::from_ids(vec![AttributeId(1), AttributeId(1)]).check(&lib, 3).is_err());
        assert!(AttributeSubset::from_ids(vec![AttributeId(42)]).check(&lib, 3).is_err());
    }
}
