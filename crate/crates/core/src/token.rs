use std::fmt;

/// Default marker prefixed to word-internal subwords in serialized form.
pub const DEFAULT_MARKER: &str = "#";

/// Whether a subword may start a word or only continue one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PositionClass {
    Initial,
    Internal,
}

impl PositionClass {
    pub fn at(position: usize) -> Self {
        if position == 0 {
            PositionClass::Initial
        } else {
            PositionClass::Internal
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PositionClass::Initial => "initial",
            PositionClass::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Subword {
    pub surface: String,
    pub class: PositionClass,
}

impl Subword {
    pub fn new(surface: impl Into<String>, class: PositionClass) -> Self {
        Subword {
            surface: surface.into(),
            class,
        }
    }

    /// Serialized form: internal subwords carry `marker` as a prefix.
    pub fn render(&self, marker: &str) -> String {
        match self.class {
            PositionClass::Initial => self.surface.clone(),
            PositionClass::Internal => format!("{marker}{}", self.surface),
        }
    }
}

/// One segmentation of a single word.
///
/// The first subword is always [`PositionClass::Initial`] and the rest are
/// [`PositionClass::Internal`]; [`Tokenization::from_surfaces`] enforces that.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tokenization(Vec<Subword>);

impl Tokenization {
    pub fn from_surfaces<I, S>(surfaces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Tokenization(
            surfaces
                .into_iter()
                .enumerate()
                .map(|(i, s)| Subword::new(s, PositionClass::at(i)))
                .collect(),
        )
    }

    pub fn subwords(&self) -> &[Subword] {
        &self.0
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|s| s.surface.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenation of the surfaces, i.e. the original word.
    pub fn word(&self) -> String {
        self.surfaces().collect()
    }

    pub fn render(&self, marker: &str) -> Vec<String> {
        self.0.iter().map(|s| s.render(marker)).collect()
    }

    /// Space-joined marked form, as written to tokenized corpora and reports.
    pub fn to_marked_string(&self, marker: &str) -> String {
        self.render(marker).join(" ")
    }
}

impl fmt::Display for Tokenization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.render(DEFAULT_MARKER).join(", "))
    }
}

impl From<Vec<Subword>> for Tokenization {
    fn from(v: Vec<Subword>) -> Self {
        Tokenization(v)
    }
}
