//! Phonetic transcriptions: tokenizing forms into phones and resolving
//! phones to ordinal feature vectors.
//!
//! A phone is one base symbol followed by the diacritics written after it,
//! so `L:` is a single unit distinct from `L`. The symbol inventory is data:
//! multi-character base symbols are allowed and matched longest-first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscriptError {
    #[error("unknown symbol {found:?} at character {index} in {form:?}")]
    UnknownSymbol {
        form: String,
        index: usize,
        found: char,
    },
    #[error("diacritic {symbol:?} at character {index} in {form:?} has no base symbol")]
    DanglingDiacritic {
        form: String,
        index: usize,
        symbol: String,
    },
    #[error("symbol {0:?} has no entry in the feature system")]
    MissingSymbol(String),
    #[error("symbol {0:?} is declared both as a base symbol and as a diacritic")]
    InventoryOverlap(String),
    #[error("symbol inventory contains an empty symbol")]
    EmptySymbol,
    #[error("{source_name}:{line}: {message}")]
    Table {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// The twelve ordinal phonetic features, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Nasality,
    Stricture,
    Laterality,
    Articulator,
    Glottis,
    Place,
    Palatalization,
    Rounding,
    Length,
    Height,
    Strength,
    Syllabicity,
}

pub const FEATURE_COUNT: usize = 12;

pub type FeatureVector = [f64; FEATURE_COUNT];

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::Nasality,
        Feature::Stricture,
        Feature::Laterality,
        Feature::Articulator,
        Feature::Glottis,
        Feature::Place,
        Feature::Palatalization,
        Feature::Rounding,
        Feature::Length,
        Feature::Height,
        Feature::Strength,
        Feature::Syllabicity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Nasality => "nasality",
            Feature::Stricture => "stricture",
            Feature::Laterality => "laterality",
            Feature::Articulator => "articulator",
            Feature::Glottis => "glottis",
            Feature::Place => "place",
            Feature::Palatalization => "palatalization",
            Feature::Rounding => "rounding",
            Feature::Length => "length",
            Feature::Height => "height",
            Feature::Strength => "strength",
            Feature::Syllabicity => "syllabicity",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Points on the place-of-articulation scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Place {
    Glottal,
    Uvular,
    Postvelar,
    Velar,
    Prevelar,
    Palatal,
    Alveolar,
    Dental,
    Labial,
}

impl Place {
    pub fn value(self) -> f64 {
        match self {
            Place::Glottal => 0.0,
            Place::Uvular => 0.1,
            Place::Postvelar => 0.2,
            Place::Velar => 0.3,
            Place::Prevelar => 0.4,
            Place::Palatal => 0.5,
            Place::Alveolar => 0.7,
            Place::Dental => 0.8,
            Place::Labial => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phone {
    pub base: String,
    pub diacritics: Vec<String>,
}

impl Phone {
    pub fn new(base: impl Into<String>) -> Self {
        Phone {
            base: base.into(),
            diacritics: Vec::new(),
        }
    }

    pub fn with_diacritics<I, S>(base: impl Into<String>, diacritics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Phone {
            base: base.into(),
            diacritics: diacritics.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Phone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        for d in &self.diacritics {
            f.write_str(d)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhoneSeq {
    pub phones: Vec<Phone>,
    pub source: String,
}

impl PhoneSeq {
    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }

    /// Concatenation of every phone's symbols.
    pub fn concat(&self) -> String {
        self.phones.iter().map(|p| p.to_string()).collect()
    }
}

impl fmt::Display for PhoneSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, p) in self.phones.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolInventory {
    base: BTreeSet<String>,
    diacritics: BTreeSet<String>,
    // Longest symbols first, so matching is maximal-munch.
    base_by_len: Vec<String>,
    diacritics_by_len: Vec<String>,
}

fn longest_first(set: &BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = set.iter().cloned().collect();
    v.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    v
}

impl SymbolInventory {
    pub fn new<I, J, S, T>(base: I, diacritics: J) -> Result<Self, TranscriptError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let base: BTreeSet<String> = base.into_iter().map(Into::into).collect();
        let diacritics: BTreeSet<String> = diacritics.into_iter().map(Into::into).collect();
        if base.contains("") || diacritics.contains("") {
            return Err(TranscriptError::EmptySymbol);
        }
        if let Some(s) = base.intersection(&diacritics).next() {
            return Err(TranscriptError::InventoryOverlap(s.clone()));
        }
        Ok(SymbolInventory {
            base_by_len: longest_first(&base),
            diacritics_by_len: longest_first(&diacritics),
            base,
            diacritics,
        })
    }

    /// The inventory implied by a feature system: its base rows and its
    /// diacritic entries.
    pub fn from_feature_system(fs: &FeatureSystem) -> Self {
        SymbolInventory::new(
            fs.base_table.keys().cloned(),
            fs.diacritic_overrides.keys().cloned(),
        )
        .expect("feature system keys are validated on construction")
    }

    pub fn base_symbols(&self) -> &BTreeSet<String> {
        &self.base
    }

    pub fn diacritic_symbols(&self) -> &BTreeSet<String> {
        &self.diacritics
    }

    fn match_at<'a>(candidates: &'a [String], rest: &str) -> Option<&'a str> {
        candidates
            .iter()
            .find(|s| rest.starts_with(s.as_str()))
            .map(String::as_str)
    }

    pub fn tokenize(&self, form: &str) -> Result<PhoneSeq, TranscriptError> {
        let mut phones: Vec<Phone> = Vec::new();
        let mut pos = 0usize;
        while pos < form.len() {
            let rest = &form[pos..];
            let char_index = form[..pos].chars().count();
            if let Some(base) = Self::match_at(&self.base_by_len, rest) {
                pos += base.len();
                let mut phone = Phone::new(base);
                while let Some(d) = Self::match_at(&self.diacritics_by_len, &form[pos..]) {
                    phone.diacritics.push(d.to_string());
                    pos += d.len();
                }
                phones.push(phone);
            } else if let Some(d) = Self::match_at(&self.diacritics_by_len, rest) {
                return Err(TranscriptError::DanglingDiacritic {
                    form: form.to_string(),
                    index: char_index,
                    symbol: d.to_string(),
                });
            } else {
                return Err(TranscriptError::UnknownSymbol {
                    form: form.to_string(),
                    index: char_index,
                    found: rest.chars().next().unwrap_or_default(),
                });
            }
        }
        Ok(PhoneSeq {
            phones,
            source: form.to_string(),
        })
    }
}

/// Ordinal feature values for every base symbol plus per-diacritic
/// overrides. All values lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSystem {
    base_table: BTreeMap<String, FeatureVector>,
    diacritic_overrides: BTreeMap<String, Vec<(Feature, f64)>>,
}

const DEFAULT_BASE_TSV: &str = include_str!("../data/features.tsv");
const DEFAULT_DIACRITIC_TSV: &str = include_str!("../data/diacritics.tsv");

fn check_unit(value: f64) -> bool {
    value.is_finite() && (0.0..=1.0).contains(&value)
}

fn table_err(source_name: &str, line: usize, message: impl Into<String>) -> TranscriptError {
    TranscriptError::Table {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_unit(source_name: &str, line: usize, field: &str) -> Result<f64, TranscriptError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| table_err(source_name, line, format!("not a decimal value: {field:?}")))?;
    if !check_unit(v) {
        return Err(table_err(
            source_name,
            line,
            format!("value {v} outside [0,1]"),
        ));
    }
    Ok(v)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

impl FeatureSystem {
    pub fn new(
        base_table: BTreeMap<String, FeatureVector>,
        diacritic_overrides: BTreeMap<String, Vec<(Feature, f64)>>,
    ) -> Result<Self, TranscriptError> {
        for (sym, row) in &base_table {
            if let Some(v) = row.iter().find(|v| !check_unit(**v)) {
                return Err(table_err(
                    "features",
                    0,
                    format!("{sym}: value {v} outside [0,1]"),
                ));
            }
        }
        for (sym, ov) in &diacritic_overrides {
            if let Some((_, v)) = ov.iter().find(|(_, v)| !check_unit(*v)) {
                return Err(table_err(
                    "diacritics",
                    0,
                    format!("{sym}: value {v} outside [0,1]"),
                ));
            }
        }
        SymbolInventory::new(
            base_table.keys().cloned(),
            diacritic_overrides.keys().cloned(),
        )?;
        Ok(FeatureSystem {
            base_table,
            diacritic_overrides,
        })
    }

    /// The shipped default table. Only the place column follows a published
    /// scale; every other column is an editable, artifact-chosen default.
    pub fn builtin() -> Self {
        FeatureSystem::from_tsv(DEFAULT_BASE_TSV, DEFAULT_DIACRITIC_TSV)
            .expect("bundled feature tables are valid")
    }

    pub fn builtin_tsv() -> (&'static str, &'static str) {
        (DEFAULT_BASE_TSV, DEFAULT_DIACRITIC_TSV)
    }

    pub fn load(base_path: &Path, diacritic_path: &Path) -> Result<Self, TranscriptError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| TranscriptError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        };
        let base = read(base_path)?;
        let diacritics = read(diacritic_path)?;
        Self::parse(
            &base,
            &base_path.display().to_string(),
            &diacritics,
            &diacritic_path.display().to_string(),
        )
    }

    pub fn from_tsv(base_tsv: &str, diacritic_tsv: &str) -> Result<Self, TranscriptError> {
        Self::parse(base_tsv, "features", diacritic_tsv, "diacritics")
    }

    fn parse(
        base_tsv: &str,
        base_name: &str,
        diacritic_tsv: &str,
        diacritic_name: &str,
    ) -> Result<Self, TranscriptError> {
        let mut lines = content_lines(base_tsv);
        let (hline, header) = lines
            .next()
            .ok_or_else(|| table_err(base_name, 1, "missing header row"))?;
        let expected: Vec<&str> = std::iter::once("symbol")
            .chain(Feature::ALL.iter().map(|f| f.name()))
            .collect();
        let got: Vec<&str> = header.split('\t').map(str::trim).collect();
        if got != expected {
            return Err(table_err(
                base_name,
                hline,
                format!("header must be {:?}", expected.join("\t")),
            ));
        }
        let mut base_table = BTreeMap::new();
        for (line, row) in lines {
            let fields: Vec<&str> = row.split('\t').collect();
            if fields.len() != FEATURE_COUNT + 1 {
                return Err(table_err(
                    base_name,
                    line,
                    format!(
                        "expected {} fields, found {}",
                        FEATURE_COUNT + 1,
                        fields.len()
                    ),
                ));
            }
            let symbol = fields[0].trim();
            if symbol.is_empty() {
                return Err(table_err(base_name, line, "empty symbol"));
            }
            let mut vec = [0.0; FEATURE_COUNT];
            for (slot, field) in vec.iter_mut().zip(&fields[1..]) {
                *slot = parse_unit(base_name, line, field)?;
            }
            if base_table.insert(symbol.to_string(), vec).is_some() {
                return Err(table_err(
                    base_name,
                    line,
                    format!("duplicate symbol {symbol:?}"),
                ));
            }
        }

        let mut overrides: BTreeMap<String, Vec<(Feature, f64)>> = BTreeMap::new();
        for (line, row) in content_lines(diacritic_tsv) {
            let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
            if fields == ["diacritic", "feature", "value"] {
                continue;
            }
            match fields.as_slice() {
                [sym] if !sym.is_empty() => {
                    overrides.entry(sym.to_string()).or_default();
                }
                [sym, feature, value] if !sym.is_empty() => {
                    let feature = Feature::from_name(feature).ok_or_else(|| {
                        table_err(diacritic_name, line, format!("unknown feature {feature:?}"))
                    })?;
                    let value = parse_unit(diacritic_name, line, value)?;
                    overrides
                        .entry(sym.to_string())
                        .or_default()
                        .push((feature, value));
                }
                _ => {
                    return Err(table_err(
                        diacritic_name,
                        line,
                        "expected `diacritic<TAB>feature<TAB>value` or a lone diacritic",
                    ))
                }
            }
        }
        FeatureSystem::new(base_table, overrides)
    }

    pub fn to_tsv(&self) -> (String, String) {
        let mut base = String::from("symbol");
        for f in Feature::ALL {
            base.push('\t');
            base.push_str(f.name());
        }
        base.push('\n');
        for (sym, row) in &self.base_table {
            base.push_str(sym);
            for v in row {
                base.push('\t');
                base.push_str(&v.to_string());
            }
            base.push('\n');
        }
        let mut diacritics = String::from("diacritic\tfeature\tvalue\n");
        for (sym, ov) in &self.diacritic_overrides {
            if ov.is_empty() {
                diacritics.push_str(sym);
                diacritics.push('\n');
            }
            for (f, v) in ov {
                diacritics.push_str(&format!("{sym}\t{}\t{v}\n", f.name()));
            }
        }
        (base, diacritics)
    }

    pub fn base_row(&self, symbol: &str) -> Option<&FeatureVector> {
        self.base_table.get(symbol)
    }

    pub fn overrides(&self, diacritic: &str) -> Option<&[(Feature, f64)]> {
        self.diacritic_overrides.get(diacritic).map(Vec::as_slice)
    }

    /// Fails with the first symbol of `inv` that has no row or override entry.
    pub fn check_inventory(&self, inv: &SymbolInventory) -> Result<(), TranscriptError> {
        if let Some(s) = inv
            .base_symbols()
            .iter()
            .find(|s| !self.base_table.contains_key(*s))
        {
            return Err(TranscriptError::MissingSymbol(s.clone()));
        }
        if let Some(s) = inv
            .diacritic_symbols()
            .iter()
            .find(|s| !self.diacritic_overrides.contains_key(*s))
        {
            return Err(TranscriptError::MissingSymbol(s.clone()));
        }
        Ok(())
    }

    /// Base row with each diacritic's overrides applied in order; a later
    /// diacritic wins over an earlier one on the same feature.
    pub fn phone_vector(&self, phone: &Phone) -> Result<FeatureVector, TranscriptError> {
        let mut v = *self
            .base_table
            .get(&phone.base)
            .ok_or_else(|| TranscriptError::MissingSymbol(phone.base.clone()))?;
        for d in &phone.diacritics {
            let ov = self
                .diacritic_overrides
                .get(d)
                .ok_or_else(|| TranscriptError::MissingSymbol(d.clone()))?;
            for (feature, value) in ov {
                v[feature.index()] = *value;
            }
        }
        Ok(v)
    }

    pub fn phone_distance(&self, p: &Phone, q: &Phone) -> Result<f64, TranscriptError> {
        Ok(vector_distance(
            &self.phone_vector(p)?,
            &self.phone_vector(q)?,
        ))
    }
}

/// Mean absolute difference over the twelve features.
pub fn vector_distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / FEATURE_COUNT as f64
}
