//! The linguistic atlas: sites, concepts, transcribed citations and
//! categorical isogloss features, read from a single JSON document.
//!
//! ```json
//! {
//!   "inventory": { "base_symbols": ["a", "L"], "diacritic_symbols": [":"] },
//!   "sites": [{ "id": "A", "name": "Doolin", "region_path": ["Doolin", "Clare", "Munster", "Ireland"] }],
//!   "concepts": [{ "id": "cattle", "gloss": "cattle" }],
//!   "citations": [{ "site": "A", "concept": "cattle", "form": "aL:i", "word": "eallach", "etymon": "eall-" }],
//!   "isogloss_features": [{ "id": "sell-verb", "assignments": { "A": "diol" } }]
//! }
//! ```
//!
//! `inventory` is optional and defaults to the symbols of the bundled
//! feature table. `word` and `etymon` are optional per citation; metrics
//! that need them refuse to run without them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{FeatureSystem, PhoneSeq, SymbolInventory, TranscriptError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: duplicate {kind} id {id:?}")]
    DuplicateId {
        location: String,
        kind: &'static str,
        id: String,
    },
    #[error("{location}: site {site:?} has an empty region_path")]
    EmptyRegionPath { location: String, site: String },
    #[error("{location}: unknown {kind} {id:?}")]
    UnknownReference {
        location: String,
        kind: &'static str,
        id: String,
    },
    #[error("{location}: {source}")]
    Tokenization {
        location: String,
        source: TranscriptError,
    },
    #[error("word {word:?} is assigned to etymon {first:?} and to etymon {second:?} ({location})")]
    WordEtymonConflict {
        location: String,
        word: String,
        first: String,
        second: String,
    },
    #[error("{location}: isogloss feature {feature:?} needs at least two distinct categories")]
    TooFewCategories { location: String, feature: String },
    #[error("inventory: {0}")]
    Inventory(TranscriptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub id: String,
    pub name: String,
    pub region_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Concept {
    pub id: String,
    pub gloss: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Citation {
    pub site: String,
    pub concept: String,
    pub form: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etymon: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsoglossFeature {
    pub id: String,
    pub assignments: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventorySpec {
    pub base_symbols: Vec<String>,
    pub diacritic_symbols: Vec<String>,
}

/// The raw interchange document, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inventory: Option<InventorySpec>,
    pub sites: Vec<Site>,
    pub concepts: Vec<Concept>,
    pub citations: Vec<Citation>,
    pub isogloss_features: Vec<IsoglossFeature>,
}

/// A citation together with its tokenized form.
#[derive(Debug, Clone, Copy)]
pub struct CitationRef<'a> {
    pub citation: &'a Citation,
    pub phones: &'a PhoneSeq,
}

/// A validated atlas. Citations are held in canonical order, so two
/// documents that differ only in citation order load to equal atlases.
#[derive(Debug, Clone)]
pub struct Atlas {
    doc: AtlasDocument,
    inventory: SymbolInventory,
    phones: Vec<PhoneSeq>,
    site_index: HashMap<String, usize>,
    concept_index: HashMap<String, usize>,
    // citation indices per (site, concept), row-major over sites
    cells: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

impl PartialEq for Atlas {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

fn index_ids<'a>(
    ids: impl Iterator<Item = &'a str>,
    kind: &'static str,
    section: &str,
) -> Result<HashMap<String, usize>, AtlasError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(AtlasError::DuplicateId {
                location: format!("{section}[{i}].id"),
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(map)
}

impl Atlas {
    pub fn new(mut doc: AtlasDocument) -> Result<Self, AtlasError> {
        let inventory = match &doc.inventory {
            Some(spec) => SymbolInventory::new(
                spec.base_symbols.iter().cloned(),
                spec.diacritic_symbols.iter().cloned(),
            )
            .map_err(AtlasError::Inventory)?,
            None => SymbolInventory::from_feature_system(&FeatureSystem::builtin()),
        };

        let site_index = index_ids(doc.sites.iter().map(|s| s.id.as_str()), "site", "sites")?;
        let concept_index = index_ids(
            doc.concepts.iter().map(|c| c.id.as_str()),
            "concept",
            "concepts",
        )?;
        index_ids(
            doc.isogloss_features.iter().map(|f| f.id.as_str()),
            "isogloss feature",
            "isogloss_features",
        )?;

        for (i, site) in doc.sites.iter().enumerate() {
            if site.region_path.is_empty() {
                return Err(AtlasError::EmptyRegionPath {
                    location: format!("sites[{i}]"),
                    site: site.id.clone(),
                });
            }
        }

        let mut word_etymon: HashMap<&str, (&str, usize)> = HashMap::new();
        for (i, c) in doc.citations.iter().enumerate() {
            if !site_index.contains_key(&c.site) {
                return Err(AtlasError::UnknownReference {
                    location: format!("citations[{i}].site"),
                    kind: "site",
                    id: c.site.clone(),
                });
            }
            if !concept_index.contains_key(&c.concept) {
                return Err(AtlasError::UnknownReference {
                    location: format!("citations[{i}].concept"),
                    kind: "concept",
                    id: c.concept.clone(),
                });
            }
            inventory
                .tokenize(&c.form)
                .map_err(|source| AtlasError::Tokenization {
                    location: format!("citations[{i}].form"),
                    source,
                })?;
            if let (Some(word), Some(etymon)) = (&c.word, &c.etymon) {
                match word_etymon.get(word.as_str()) {
                    Some((first, j)) if *first != etymon.as_str() => {
                        return Err(AtlasError::WordEtymonConflict {
                            location: format!("citations[{j}] and citations[{i}]"),
                            word: word.clone(),
                            first: first.to_string(),
                            second: etymon.clone(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        word_etymon.insert(word, (etymon, i));
                    }
                }
            }
        }

        for (i, feature) in doc.isogloss_features.iter().enumerate() {
            for site in feature.assignments.keys() {
                if !site_index.contains_key(site) {
                    return Err(AtlasError::UnknownReference {
                        location: format!("isogloss_features[{i}].assignments"),
                        kind: "site",
                        id: site.clone(),
                    });
                }
            }
            let categories: BTreeSet<&String> = feature.assignments.values().collect();
            if categories.len() < 2 {
                return Err(AtlasError::TooFewCategories {
                    location: format!("isogloss_features[{i}]"),
                    feature: feature.id.clone(),
                });
            }
        }

        doc.citations.sort();
        let phones: Vec<PhoneSeq> = doc
            .citations
            .iter()
            .map(|c| inventory.tokenize(&c.form).expect("checked above"))
            .collect();

        let n_concepts = doc.concepts.len();
        let mut cells = vec![Vec::new(); doc.sites.len() * n_concepts];
        for (k, c) in doc.citations.iter().enumerate() {
            cells[site_index[&c.site] * n_concepts + concept_index[&c.concept]].push(k);
        }

        let mut warnings = Vec::new();
        for (ci, concept) in doc.concepts.iter().enumerate() {
            if (0..doc.sites.len()).all(|si| cells[si * n_concepts + ci].is_empty()) {
                warnings.push(format!("concept {:?} has no citations", concept.id));
            }
        }
        for (si, site) in doc.sites.iter().enumerate() {
            if cells[si * n_concepts..(si + 1) * n_concepts]
                .iter()
                .all(Vec::is_empty)
            {
                warnings.push(format!("site {:?} has no citations", site.id));
            }
        }

        Ok(Atlas {
            doc,
            inventory,
            phones,
            site_index,
            concept_index,
            cells,
            warnings,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, AtlasError> {
        let doc: AtlasDocument = serde_json::from_str(text).map_err(|e| AtlasError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Atlas::new(doc)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.doc).expect("atlas serializes");
        s.push('\n');
        s
    }

    pub fn document(&self) -> &AtlasDocument {
        &self.doc
    }

    pub fn sites(&self) -> &[Site] {
        &self.doc.sites
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.doc.concepts
    }

    pub fn citations(&self) -> &[Citation] {
        &self.doc.citations
    }

    pub fn isogloss_features(&self) -> &[IsoglossFeature] {
        &self.doc.isogloss_features
    }

    pub fn inventory(&self) -> &SymbolInventory {
        &self.inventory
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn site_index(&self, id: &str) -> Option<usize> {
        self.site_index.get(id).copied()
    }

    pub fn concept_index(&self, id: &str) -> Option<usize> {
        self.concept_index.get(id).copied()
    }

    /// Tokenized form of citation `k`.
    pub fn phones(&self, k: usize) -> &PhoneSeq {
        &self.phones[k]
    }

    pub fn citation(&self, k: usize) -> CitationRef<'_> {
        CitationRef {
            citation: &self.doc.citations[k],
            phones: &self.phones[k],
        }
    }

    /// Indices of the citations for one (site, concept) cell.
    pub fn citations_at(&self, site: usize, concept: usize) -> &[usize] {
        &self.cells[site * self.doc.concepts.len() + concept]
    }

    pub fn site(&self, id: &str) -> Option<&Site> {
        self.site_index(id).map(|i| &self.doc.sites[i])
    }
}

pub fn load_atlas(path: &Path) -> Result<Atlas, AtlasError> {
    let text = std::fs::read_to_string(path).map_err(|e| AtlasError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Atlas::from_json_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptCoverage {
    pub concept: String,
    pub sites_attested: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteCoverage {
    pub site: String,
    pub concepts_attested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub concepts: Vec<ConceptCoverage>,
    pub sites: Vec<SiteCoverage>,
}

/// Per concept, the share of sites with at least one citation; per site,
/// the number of concepts it attests.
pub fn validate_coverage(atlas: &Atlas) -> CoverageReport {
    let n_sites = atlas.sites().len();
    let concepts = atlas
        .concepts()
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let attested = (0..n_sites)
                .filter(|&si| !atlas.citations_at(si, ci).is_empty())
                .count();
            ConceptCoverage {
                concept: c.id.clone(),
                sites_attested: attested,
                fraction: if n_sites == 0 {
                    0.0
                } else {
                    attested as f64 / n_sites as f64
                },
            }
        })
        .collect();
    let sites = atlas
        .sites()
        .iter()
        .enumerate()
        .map(|(si, s)| SiteCoverage {
            site: s.id.clone(),
            concepts_attested: (0..atlas.concepts().len())
                .filter(|&ci| !atlas.citations_at(si, ci).is_empty())
                .count(),
        })
        .collect();
    CoverageReport { concepts, sites }
}
