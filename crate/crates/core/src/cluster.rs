//! Grouping sites into dialects: bottom-up average-linkage agglomeration,
//! top-down two-medoid partitioning, and silhouette scoring of a binary
//! division.
//!
//! All tie-breaking follows lexicographic site-id order, so results do not
//! depend on the row order of the input matrix.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrixlab::{DistanceMatrix, MatrixError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("clustering needs at least 2 sites, found {0}")]
    TooFewSites(usize),
    #[error("the tree root is a single undivided group")]
    LeafRoot,
    #[error("cannot split a group of {0} site(s)")]
    SingletonGroup(usize),
    #[error("unknown site {0:?}")]
    UnknownSite(String),
    #[error("site {0:?} is listed twice")]
    DuplicateSite(String),
    #[error("site {0:?} is in both groups")]
    Overlap(String),
    #[error("silhouette groups must be nonempty")]
    EmptyGroup,
    #[error("min_size must be at least 2, got {0}")]
    InvalidMinSize(usize),
    #[error("no node at path {0:?}")]
    BadPath(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("tree JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub members: Vec<String>,
    pub height: f64,
    pub children: Vec<ClusterNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medoids: Option<[String; 2]>,
}

impl ClusterNode {
    pub fn leaf(mut members: Vec<String>) -> Self {
        members.sort();
        ClusterNode {
            members,
            height: 0.0,
            children: Vec::new(),
            medoids: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Member sets of every node in the tree; two trees with equal sets have
    /// the same topology regardless of heights or child order.
    pub fn clusters(&self) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.insert(node.members.clone());
            stack.extend(node.children.iter());
        }
        out
    }

    /// Follows a path of `L`/`R` (or `0`/`1`) steps from this node.
    pub fn node_at(&self, path: &str) -> Result<&ClusterNode, ClusterError> {
        let mut node = self;
        for step in path.chars() {
            let idx = match step {
                'L' | 'l' | '0' => 0,
                'R' | 'r' | '1' => 1,
                _ => return Err(ClusterError::BadPath(path.to_string())),
            };
            node = node
                .children
                .get(idx)
                .ok_or_else(|| ClusterError::BadPath(path.to_string()))?;
        }
        Ok(node)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ClusterError> {
        let node: ClusterNode =
            serde_json::from_str(text).map_err(|e| ClusterError::Json(e.to_string()))?;
        node.validate()?;
        Ok(node)
    }

    fn validate(&self) -> Result<(), ClusterError> {
        match self.children.as_slice() {
            [] => Ok(()),
            [a, b] => {
                let mut union: Vec<String> = a.members.iter().chain(&b.members).cloned().collect();
                union.sort();
                let mut mine = self.members.clone();
                mine.sort();
                if union != mine {
                    return Err(ClusterError::Json(
                        "children do not partition their parent".into(),
                    ));
                }
                a.validate()?;
                b.validate()
            }
            _ => Err(ClusterError::Json(
                "a node must have zero or two children".into(),
            )),
        }
    }
}

/// Indices of the matrix's sites in lexicographic id order.
fn canonical_order(m: &DistanceMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m.site_ids()[a].cmp(&m.site_ids()[b]));
    order
}

/// Average-linkage agglomeration over the whole matrix.
///
/// Each step merges the two clusters with the smallest mean distance over
/// all cross pairs of original sites. Cross-pair sums are kept per cluster
/// pair and updated additively on merge, for O(N³) total work. Equal
/// distances merge the lexicographically smallest cluster pair first, where
/// a cluster is keyed by its smallest site id.
pub fn agglomerate(m: &DistanceMatrix) -> Result<ClusterNode, ClusterError> {
    let n = m.len();
    if n < 2 {
        return Err(ClusterError::TooFewSites(n));
    }
    let order = canonical_order(m);
    let ids: Vec<String> = order.iter().map(|&k| m.site_ids()[k].clone()).collect();
    let mut sums = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            sums[a * n + b] = m.get(order[a], order[b]);
        }
    }
    let mut sizes = vec![1usize; n];
    let mut nodes: Vec<Option<ClusterNode>> = ids
        .iter()
        .map(|id| Some(ClusterNode::leaf(vec![id.clone()])))
        .collect();

    for _ in 1..n {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if nodes[a].is_none() {
                continue;
            }
            for b in a + 1..n {
                if nodes[b].is_none() {
                    continue;
                }
                let avg = sums[a * n + b] / (sizes[a] * sizes[b]) as f64;
                if best.is_none_or(|(d, _, _)| avg < d) {
                    best = Some((avg, a, b));
                }
            }
        }
        let (avg, a, b) = best.expect("at least two active clusters");
        let left = nodes[a].take().unwrap();
        let right = nodes[b].take().unwrap();
        for x in 0..n {
            let merged = sums[a * n + x] + sums[b * n + x];
            sums[a * n + x] = merged;
            sums[x * n + a] = merged;
        }
        sizes[a] += sizes[b];
        let mut members: Vec<String> = left.members.iter().chain(&right.members).cloned().collect();
        members.sort();
        // average linkage never inverts; guard against rounding only
        let height = avg.max(left.height).max(right.height);
        nodes[a] = Some(ClusterNode {
            members,
            height,
            children: vec![left, right],
            medoids: None,
        });
    }
    Ok(nodes
        .into_iter()
        .flatten()
        .next()
        .expect("one root remains"))
}

/// The member sets of the root's two children.
pub fn cut_top(tree: &ClusterNode) -> Result<(Vec<String>, Vec<String>), ClusterError> {
    match tree.children.as_slice() {
        [a, b] => Ok((a.members.clone(), b.members.clone())),
        _ => Err(ClusterError::LeafRoot),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MedoidSplit {
    pub groups: [Vec<String>; 2],
    pub medoids: [String; 2],
    /// Mean distance from every member to its own medoid.
    pub objective: f64,
}

fn resolve_members(m: &DistanceMatrix, members: &[String]) -> Result<Vec<usize>, ClusterError> {
    let mut seen = HashSet::new();
    let mut idx = Vec::with_capacity(members.len());
    for s in members {
        if !seen.insert(s.as_str()) {
            return Err(ClusterError::DuplicateSite(s.clone()));
        }
        idx.push(
            m.index_of(s)
                .ok_or_else(|| ClusterError::UnknownSite(s.clone()))?,
        );
    }
    idx.sort_by(|&a, &b| m.site_ids()[a].cmp(&m.site_ids()[b]));
    Ok(idx)
}

/// Best two-medoid split of `members`, by exhaustive search over every
/// unordered medoid pair. Each site joins its nearer medoid (ties go to the
/// medoid earlier in id order); the pair with the least mean distance to
/// own medoid wins, ties going to the lexicographically first pair.
pub fn partition_medoids(
    m: &DistanceMatrix,
    members: &[String],
) -> Result<MedoidSplit, ClusterError> {
    let idx = resolve_members(m, members)?;
    let k = idx.len();
    if k < 2 {
        return Err(ClusterError::SingletonGroup(k));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for p in 0..k {
        let rp = m.row(idx[p]);
        for q in p + 1..k {
            let rq = m.row(idx[q]);
            let cost: f64 = idx.iter().map(|&x| rp[x].min(rq[x])).sum::<f64>() / k as f64;
            if best.is_none_or(|(c, _, _)| cost < c) {
                best = Some((cost, p, q));
            }
        }
    }
    let (cost, p, q) = best.expect("k >= 2");
    let (mp, mq) = (idx[p], idx[q]);
    let mut groups: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for &x in &idx {
        let side = if m.get(x, mq) < m.get(x, mp) { 1 } else { 0 };
        groups[side].push(m.site_ids()[x].clone());
    }
    Ok(MedoidSplit {
        groups,
        medoids: [m.site_ids()[mp].clone(), m.site_ids()[mq].clone()],
        objective: cost,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOutcome {
    pub tree: ClusterNode,
    pub warnings: Vec<String>,
}

/// Recursive two-medoid partitioning of all sites. A group is split only
/// while it has at least `2 * min_size` members and the depth is below
/// `max_depth`; everything else becomes an undivided leaf.
pub fn recursive_partition(
    m: &DistanceMatrix,
    min_size: usize,
    max_depth: usize,
) -> Result<PartitionOutcome, ClusterError> {
    if m.len() < 2 {
        return Err(ClusterError::TooFewSites(m.len()));
    }
    if min_size < 2 {
        return Err(ClusterError::InvalidMinSize(min_size));
    }
    fn split(
        m: &DistanceMatrix,
        members: Vec<String>,
        depth: usize,
        min_size: usize,
        max_depth: usize,
    ) -> Result<ClusterNode, ClusterError> {
        if depth >= max_depth || members.len() < 2 * min_size {
            return Ok(ClusterNode::leaf(members));
        }
        let s = partition_medoids(m, &members)?;
        let [g0, g1] = s.groups;
        let mut all = members;
        all.sort();
        Ok(ClusterNode {
            members: all,
            height: s.objective,
            children: vec![
                split(m, g0, depth + 1, min_size, max_depth)?,
                split(m, g1, depth + 1, min_size, max_depth)?,
            ],
            medoids: Some(s.medoids),
        })
    }
    let tree = split(m, m.site_ids().to_vec(), 0, min_size, max_depth)?;
    let mut warnings = Vec::new();
    if tree.is_leaf() {
        warnings.push(format!(
            "{} sites not split: need at least 2 x min_size = {} sites and max_depth > 0 (max_depth = {max_depth})",
            m.len(),
            2 * min_size
        ));
    }
    Ok(PartitionOutcome { tree, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SilhouetteEntry {
    pub site: String,
    /// 0 for the first group, 1 for the second.
    pub group: usize,
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SilhouetteReport {
    /// Group 0 first, then group 1; within a group by `s` descending, ties
    /// by site id.
    pub entries: Vec<SilhouetteEntry>,
    pub group_sizes: [usize; 2],
    pub group_means: [f64; 2],
    pub overall_mean: f64,
}

/// s from mean own-group dissimilarity `a` and mean other-group
/// dissimilarity `b`.
pub fn silhouette_value(a: f64, b: f64) -> f64 {
    if a < b {
        1.0 - a / b
    } else if a > b {
        b / a - 1.0
    } else {
        0.0
    }
}

impl SilhouetteReport {
    pub fn from_entries(mut entries: Vec<SilhouetteEntry>) -> Self {
        entries.sort_by(|x, y| {
            x.group
                .cmp(&y.group)
                .then_with(|| y.s.total_cmp(&x.s))
                .then_with(|| x.site.cmp(&y.site))
        });
        let mut sizes = [0usize; 2];
        let mut sums = [0.0f64; 2];
        for e in &entries {
            sizes[e.group] += 1;
            sums[e.group] += e.s;
        }
        let mean = |g: usize| {
            if sizes[g] == 0 {
                0.0
            } else {
                sums[g] / sizes[g] as f64
            }
        };
        let overall_mean = if entries.is_empty() {
            0.0
        } else {
            entries.iter().map(|e| e.s).sum::<f64>() / entries.len() as f64
        };
        SilhouetteReport {
            group_means: [mean(0), mean(1)],
            group_sizes: sizes,
            overall_mean,
            entries,
        }
    }

    pub fn group(&self, g: usize) -> impl Iterator<Item = &SilhouetteEntry> {
        self.entries.iter().filter(move |e| e.group == g)
    }
}

/// Silhouette of the binary division `g1 | g2`. A member of a singleton
/// group gets s = 0.
pub fn silhouette(
    m: &DistanceMatrix,
    g1: &[String],
    g2: &[String],
) -> Result<SilhouetteReport, ClusterError> {
    if g1.is_empty() || g2.is_empty() {
        return Err(ClusterError::EmptyGroup);
    }
    let i1 = resolve_members(m, g1)?;
    let i2 = resolve_members(m, g2)?;
    if let Some(&x) = i1.iter().find(|x| i2.contains(x)) {
        return Err(ClusterError::Overlap(m.site_ids()[x].clone()));
    }
    let groups = [i1, i2];
    let mut entries = Vec::with_capacity(groups[0].len() + groups[1].len());
    for (g, own) in groups.iter().enumerate() {
        let other = &groups[1 - g];
        for &i in own {
            let row = m.row(i);
            let b = other.iter().map(|&j| row[j]).sum::<f64>() / other.len() as f64;
            let (a, s) = if own.len() == 1 {
                (0.0, 0.0)
            } else {
                let a = own
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| row[j])
                    .sum::<f64>()
                    / (own.len() - 1) as f64;
                (a, silhouette_value(a, b))
            };
            entries.push(SilhouetteEntry {
                site: m.site_ids()[i].clone(),
                group: g,
                a,
                b,
                s,
            });
        }
    }
    Ok(SilhouetteReport::from_entries(entries))
}

/// Mean s over all sites of a report.
pub fn mean_silhouette(report: &SilhouetteReport) -> f64 {
    report.overall_mean
}
