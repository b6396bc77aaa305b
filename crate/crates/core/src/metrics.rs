//! Linguistic distance between sites under the six atlas metrics.
//!
//! Distances are computed bottom-up: citation pair → concept → site pair.
//! A missing value (`None`) propagates explicitly at every level; a concept
//! with no comparable citation pair simply does not contribute.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::atlas::{Atlas, CitationRef};
use crate::matrixlab::{DistanceMatrix, MatrixError};
use crate::transcript::{vector_distance, FeatureSystem, FeatureVector, PhoneSeq, TranscriptError};

/// Default indel cost for the feature model: half the largest possible
/// substitution cost.
pub const DEFAULT_INDEL_COST: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("metric {metric} needs a {field} token on every citation; missing on {citation}")]
    MissingAnnotation {
        metric: MetricKind,
        field: &'static str,
        citation: String,
    },
    #[error("citations compare different concepts ({0} vs {1})")]
    ConceptMismatch(String, String),
    #[error("metric {0} is not defined on citation pairs")]
    NotCitationMetric(MetricKind),
    #[error("unknown site {0:?}")]
    UnknownSite(String),
    #[error("a distance matrix needs at least 2 sites, found {0}")]
    TooFewSites(usize),
    #[error("indel cost must be finite and > 0, got {0}")]
    InvalidIndelCost(f64),
    #[error("metric {metric}: no distance for {} site pair(s): {}", pairs.len(), format_pairs(pairs))]
    IncompleteMatrix {
        metric: MetricKind,
        pairs: Vec<(String, String)>,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a}-{b}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone)]
pub enum CostModel {
    /// Every insertion, deletion and substitution costs 1; identical phones
    /// substitute for free.
    Flat,
    /// Substitution costs the feature distance between the two phones;
    /// insertion and deletion cost `indel_cost`.
    Feature {
        indel_cost: f64,
        features: Arc<FeatureSystem>,
    },
}

impl CostModel {
    pub fn feature(features: Arc<FeatureSystem>, indel_cost: f64) -> Result<Self, MetricError> {
        if !(indel_cost.is_finite() && indel_cost > 0.0) {
            return Err(MetricError::InvalidIndelCost(indel_cost));
        }
        Ok(CostModel::Feature {
            indel_cost,
            features,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Isogloss,
    Etymon,
    Word,
    PhoneString,
    FeatureAllWord,
    FeatureSameWord,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Isogloss,
        MetricKind::PhoneString,
        MetricKind::FeatureAllWord,
        MetricKind::FeatureSameWord,
        MetricKind::Etymon,
        MetricKind::Word,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Isogloss => "isogloss",
            MetricKind::Etymon => "etymon",
            MetricKind::Word => "word",
            MetricKind::PhoneString => "phone_string",
            MetricKind::FeatureAllWord => "feature_all_word",
            MetricKind::FeatureSameWord => "feature_same_word",
        }
    }

    /// Short command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            MetricKind::Isogloss => "isogloss",
            MetricKind::Etymon => "etymon",
            MetricKind::Word => "word",
            MetricKind::PhoneString => "phone",
            MetricKind::FeatureAllWord => "feature-all",
            MetricKind::FeatureSameWord => "feature-same",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Isogloss => "Isoglosses",
            MetricKind::Etymon => "Etymon identity",
            MetricKind::Word => "Word identity",
            MetricKind::PhoneString => "Phone string comparison",
            MetricKind::FeatureAllWord => "Feature string comparison, all-word",
            MetricKind::FeatureSameWord => "Feature string comparison, same-word",
        }
    }

    pub fn uses_features(self) -> bool {
        matches!(
            self,
            MetricKind::FeatureAllWord | MetricKind::FeatureSameWord
        )
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s || k.cli_name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MetricKind::ALL.iter().map(|k| k.cli_name()).collect();
                format!("unknown metric {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// How the cross product of two sites' citations for one concept collapses
/// to a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Min,
}

#[derive(Debug, Clone)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub cost: CostModel,
    pub aggregation: Aggregation,
    /// Divide each Levenshtein value by the longer sequence's length.
    pub normalize_length: bool,
}

impl MetricSpec {
    fn plain(kind: MetricKind) -> Self {
        MetricSpec {
            kind,
            cost: CostModel::Flat,
            aggregation: Aggregation::Mean,
            normalize_length: false,
        }
    }

    pub fn isogloss() -> Self {
        Self::plain(MetricKind::Isogloss)
    }

    pub fn etymon() -> Self {
        Self::plain(MetricKind::Etymon)
    }

    pub fn word() -> Self {
        Self::plain(MetricKind::Word)
    }

    pub fn phone_string() -> Self {
        Self::plain(MetricKind::PhoneString)
    }

    pub fn feature_all_word(
        features: Arc<FeatureSystem>,
        indel_cost: f64,
    ) -> Result<Self, MetricError> {
        Ok(MetricSpec {
            cost: CostModel::feature(features, indel_cost)?,
            ..Self::plain(MetricKind::FeatureAllWord)
        })
    }

    pub fn feature_same_word(
        features: Arc<FeatureSystem>,
        indel_cost: f64,
    ) -> Result<Self, MetricError> {
        Ok(MetricSpec {
            cost: CostModel::feature(features, indel_cost)?,
            ..Self::plain(MetricKind::FeatureSameWord)
        })
    }

    /// Any metric by kind; feature metrics use `features` with `indel_cost`.
    pub fn of_kind(
        kind: MetricKind,
        features: Arc<FeatureSystem>,
        indel_cost: f64,
    ) -> Result<Self, MetricError> {
        match kind {
            MetricKind::FeatureAllWord => Self::feature_all_word(features, indel_cost),
            MetricKind::FeatureSameWord => Self::feature_same_word(features, indel_cost),
            other => Ok(Self::plain(other)),
        }
    }

    pub fn with_aggregation(mut self, aggregation: Aggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    pub fn with_normalized_length(mut self, on: bool) -> Self {
        self.normalize_length = on;
        self
    }

    /// Checks that the atlas carries what this metric needs: identity tokens
    /// on every citation, and feature rows for every phone.
    pub fn check(&self, atlas: &Atlas) -> Result<(), MetricError> {
        let field = match self.kind {
            MetricKind::Etymon => Some("etymon"),
            MetricKind::Word | MetricKind::FeatureSameWord => Some("word"),
            _ => None,
        };
        if let Some(field) = field {
            let missing = atlas.citations().iter().find(|c| match field {
                "etymon" => c.etymon.is_none(),
                _ => c.word.is_none(),
            });
            if let Some(c) = missing {
                return Err(MetricError::MissingAnnotation {
                    metric: self.kind,
                    field,
                    citation: format!("site {} concept {} form {:?}", c.site, c.concept, c.form),
                });
            }
        }
        if let CostModel::Feature { features, .. } = &self.cost {
            for k in 0..atlas.citations().len() {
                for p in &atlas.phones(k).phones {
                    features.phone_vector(p)?;
                }
            }
        }
        Ok(())
    }
}

/// Minimal total edit cost between two sequences by dynamic programming
/// over the `(|a|+1) × (|b|+1)` grid, keeping two rows.
pub fn edit_distance_by<T, F>(a: &[T], b: &[T], indel: f64, subst: F) -> f64
where
    F: Fn(&T, &T) -> f64,
{
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64 * indel).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64 * indel;
        for (j, y) in b.iter().enumerate() {
            let del = prev[j + 1] + indel;
            let ins = cur[j] + indel;
            let sub = prev[j] + subst(x, y);
            cur[j + 1] = del.min(ins).min(sub);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Raw Levenshtein distance between two phone sequences under a cost model.
/// Fails only when a feature model cannot resolve a phone.
pub fn levenshtein(a: &PhoneSeq, b: &PhoneSeq, cost: &CostModel) -> Result<f64, TranscriptError> {
    match cost {
        CostModel::Flat => Ok(edit_distance_by(&a.phones, &b.phones, 1.0, |p, q| {
            if p == q {
                0.0
            } else {
                1.0
            }
        })),
        CostModel::Feature {
            indel_cost,
            features,
        } => {
            let va = resolve(a, features)?;
            let vb = resolve(b, features)?;
            Ok(edit_distance_by(&va, &vb, *indel_cost, vector_distance))
        }
    }
}

fn resolve(seq: &PhoneSeq, fs: &FeatureSystem) -> Result<Vec<FeatureVector>, TranscriptError> {
    seq.phones.iter().map(|p| fs.phone_vector(p)).collect()
}

fn normalized(raw: f64, la: usize, lb: usize) -> f64 {
    match la.max(lb) {
        0 => 0.0,
        n => raw / n as f64,
    }
}

fn identity(a: Option<&String>, b: Option<&String>) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Distance between two citations of the same concept; `None` when the
/// metric leaves the pair uncompared (different words under same-word
/// feature comparison).
pub fn citation_distance(
    a: CitationRef<'_>,
    b: CitationRef<'_>,
    spec: &MetricSpec,
) -> Result<Option<f64>, MetricError> {
    if a.citation.concept != b.citation.concept {
        return Err(MetricError::ConceptMismatch(
            a.citation.concept.clone(),
            b.citation.concept.clone(),
        ));
    }
    let require = |c: CitationRef<'_>, field: &'static str| -> Result<(), MetricError> {
        let present = match field {
            "etymon" => c.citation.etymon.is_some(),
            _ => c.citation.word.is_some(),
        };
        if present {
            Ok(())
        } else {
            Err(MetricError::MissingAnnotation {
                metric: spec.kind,
                field,
                citation: format!(
                    "site {} concept {} form {:?}",
                    c.citation.site, c.citation.concept, c.citation.form
                ),
            })
        }
    };
    let lev = || -> Result<f64, MetricError> {
        let raw = levenshtein(a.phones, b.phones, &spec.cost)?;
        Ok(if spec.normalize_length {
            normalized(raw, a.phones.len(), b.phones.len())
        } else {
            raw
        })
    };
    match spec.kind {
        MetricKind::Isogloss => Err(MetricError::NotCitationMetric(spec.kind)),
        MetricKind::Etymon => {
            require(a, "etymon")?;
            require(b, "etymon")?;
            Ok(Some(identity(
                a.citation.etymon.as_ref(),
                b.citation.etymon.as_ref(),
            )))
        }
        MetricKind::Word => {
            require(a, "word")?;
            require(b, "word")?;
            Ok(Some(identity(
                a.citation.word.as_ref(),
                b.citation.word.as_ref(),
            )))
        }
        MetricKind::PhoneString | MetricKind::FeatureAllWord => lev().map(Some),
        MetricKind::FeatureSameWord => {
            require(a, "word")?;
            require(b, "word")?;
            if a.citation.word == b.citation.word {
                lev().map(Some)
            } else {
                Ok(None)
            }
        }
    }
}

/// Per-citation data resolved once for a whole matrix build: interned phone
/// ids for flat comparison or feature vectors for feature comparison.
enum Prepared {
    None,
    Flat(Vec<Vec<u32>>),
    Feature {
        indel: f64,
        vectors: Vec<Vec<FeatureVector>>,
    },
}

struct Evaluator<'a> {
    atlas: &'a Atlas,
    spec: &'a MetricSpec,
    prepared: Prepared,
}

impl<'a> Evaluator<'a> {
    fn new(atlas: &'a Atlas, spec: &'a MetricSpec) -> Result<Self, MetricError> {
        spec.check(atlas)?;
        let n = atlas.citations().len();
        let prepared = match (spec.kind, &spec.cost) {
            (MetricKind::Isogloss | MetricKind::Etymon | MetricKind::Word, _) => Prepared::None,
            (_, CostModel::Flat) => {
                let mut ids = HashMap::new();
                let seqs = (0..n)
                    .map(|k| {
                        atlas
                            .phones(k)
                            .phones
                            .iter()
                            .map(|p| {
                                let next = ids.len() as u32;
                                *ids.entry(p.clone()).or_insert(next)
                            })
                            .collect()
                    })
                    .collect();
                Prepared::Flat(seqs)
            }
            (
                _,
                CostModel::Feature {
                    indel_cost,
                    features,
                },
            ) => Prepared::Feature {
                indel: *indel_cost,
                vectors: (0..n)
                    .map(|k| resolve(atlas.phones(k), features))
                    .collect::<Result<_, _>>()?,
            },
        };
        Ok(Evaluator {
            atlas,
            spec,
            prepared,
        })
    }

    fn citation_pair(&self, x: usize, y: usize) -> Option<f64> {
        let (cx, cy) = (&self.atlas.citations()[x], &self.atlas.citations()[y]);
        let raw = match self.spec.kind {
            MetricKind::Isogloss => unreachable!("isogloss is not a citation metric"),
            MetricKind::Etymon => return Some(identity(cx.etymon.as_ref(), cy.etymon.as_ref())),
            MetricKind::Word => return Some(identity(cx.word.as_ref(), cy.word.as_ref())),
            MetricKind::FeatureSameWord if cx.word != cy.word => return None,
            _ => match &self.prepared {
                Prepared::Flat(seqs) => {
                    edit_distance_by(
                        &seqs[x],
                        &seqs[y],
                        1.0,
                        |p, q| if p == q { 0.0 } else { 1.0 },
                    )
                }
                Prepared::Feature { indel, vectors } => {
                    edit_distance_by(&vectors[x], &vectors[y], *indel, vector_distance)
                }
                Prepared::None => unreachable!("string metrics are prepared"),
            },
        };
        Some(if self.spec.normalize_length {
            normalized(raw, self.atlas.phones(x).len(), self.atlas.phones(y).len())
        } else {
            raw
        })
    }

    fn isogloss_pair(&self, s1: usize, s2: usize) -> Option<f64> {
        let (a, b) = (&self.atlas.sites()[s1].id, &self.atlas.sites()[s2].id);
        let (mut shared, mut differ) = (0usize, 0usize);
        for feature in self.atlas.isogloss_features() {
            if let (Some(x), Some(y)) = (feature.assignments.get(a), feature.assignments.get(b)) {
                shared += 1;
                if x != y {
                    differ += 1;
                }
            }
        }
        (shared > 0).then(|| differ as f64 / shared as f64)
    }

    fn site_pair(&self, s1: usize, s2: usize) -> Option<f64> {
        if s1 == s2 {
            return Some(0.0);
        }
        if self.spec.kind == MetricKind::Isogloss {
            return self.isogloss_pair(s1, s2);
        }
        let (mut total, mut contributing) = (0.0, 0usize);
        for concept in 0..self.atlas.concepts().len() {
            let (xs, ys) = (
                self.atlas.citations_at(s1, concept),
                self.atlas.citations_at(s2, concept),
            );
            let mut values = xs
                .iter()
                .flat_map(|&x| ys.iter().filter_map(move |&y| self.citation_pair(x, y)));
            let value = match self.spec.aggregation {
                Aggregation::Mean => {
                    let (sum, count) = values
                        .by_ref()
                        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                    (count > 0).then(|| sum / count as f64)
                }
                Aggregation::Min => values.reduce(f64::min),
            };
            if let Some(v) = value {
                total += v;
                contributing += 1;
            }
        }
        (contributing > 0).then(|| total / contributing as f64)
    }
}

/// Distance between two sites; `None` when they share nothing comparable.
pub fn site_pair_distance(
    atlas: &Atlas,
    s1: &str,
    s2: &str,
    spec: &MetricSpec,
) -> Result<Option<f64>, MetricError> {
    let i = atlas
        .site_index(s1)
        .ok_or_else(|| MetricError::UnknownSite(s1.to_string()))?;
    let j = atlas
        .site_index(s2)
        .ok_or_else(|| MetricError::UnknownSite(s2.to_string()))?;
    Ok(Evaluator::new(atlas, spec)?.site_pair(i, j))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MatrixOptions {
    /// Fill missing site pairs with the mean of all defined cells instead of
    /// failing.
    pub impute_missing: bool,
}

#[derive(Debug, Clone)]
pub struct MatrixBuild {
    pub matrix: DistanceMatrix,
    /// Site pairs whose cell was imputed.
    pub imputed: Vec<(String, String)>,
}

/// The full site × site matrix for one metric. Cells are computed in
/// parallel but assembled in fixed order, so the result does not depend on
/// scheduling.
pub fn build_matrix(
    atlas: &Atlas,
    spec: &MetricSpec,
    options: MatrixOptions,
) -> Result<MatrixBuild, MetricError> {
    let n = atlas.sites().len();
    if n < 2 {
        return Err(MetricError::TooFewSites(n));
    }
    let eval = Evaluator::new(atlas, spec)?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| eval.site_pair(i, j))
        .collect();

    let missing: Vec<(String, String)> = pairs
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_none())
        .map(|(&(i, j), _)| (atlas.sites()[i].id.clone(), atlas.sites()[j].id.clone()))
        .collect();
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let fill = if missing.is_empty() {
        0.0
    } else if options.impute_missing && !defined.is_empty() {
        defined.iter().sum::<f64>() / defined.len() as f64
    } else {
        return Err(MetricError::IncompleteMatrix {
            metric: spec.kind,
            pairs: missing,
        });
    };

    let mut cells = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(&values) {
        cells[i * n + j] = v.unwrap_or(fill);
    }
    let ids = atlas.sites().iter().map(|s| s.id.clone()).collect();
    let matrix = DistanceMatrix::from_fn(ids, |i, j| cells[i * n + j])?;
    Ok(MatrixBuild {
        matrix,
        imputed: missing,
    })
}
