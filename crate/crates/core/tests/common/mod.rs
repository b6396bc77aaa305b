//! Independent reference implementations and generators shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use dialectometry::atlas::{AtlasDocument, Citation, Concept, IsoglossFeature, Site};
use dialectometry::matrixlab::DistanceMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Sub,
    Del,
    Ins,
}

/// Minimum cost over every edit script turning `a` into `b`. Each script is
/// built explicitly as an operation list and costed afterwards.
pub fn brute_edit<T, F>(a: &[T], b: &[T], indel: f64, subst: F) -> f64
where
    F: Fn(&T, &T) -> f64,
{
    #[allow(clippy::too_many_arguments)]
    fn walk<T, F: Fn(&T, &T) -> f64>(
        a: &[T],
        b: &[T],
        i: usize,
        j: usize,
        script: &mut Vec<Op>,
        indel: f64,
        subst: &F,
        best: &mut f64,
    ) {
        if i == a.len() && j == b.len() {
            let (mut x, mut y, mut cost) = (0, 0, 0.0);
            for op in script.iter() {
                match op {
                    Op::Sub => {
                        cost += subst(&a[x], &b[y]);
                        x += 1;
                        y += 1;
                    }
                    Op::Del => {
                        cost += indel;
                        x += 1;
                    }
                    Op::Ins => {
                        cost += indel;
                        y += 1;
                    }
                }
            }
            if cost < *best {
                *best = cost;
            }
            return;
        }
        if i < a.len() && j < b.len() {
            script.push(Op::Sub);
            walk(a, b, i + 1, j + 1, script, indel, subst, best);
            script.pop();
        }
        if i < a.len() {
            script.push(Op::Del);
            walk(a, b, i + 1, j, script, indel, subst, best);
            script.pop();
        }
        if j < b.len() {
            script.push(Op::Ins);
            walk(a, b, i, j + 1, script, indel, subst, best);
            script.pop();
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, &mut Vec::new(), indel, &subst, &mut best);
    best
}

pub const BASES: [&str; 14] = [
    "p", "b", "t", "k", "s", "x", "m", "n", "N", "l", "L", "a", "i", "u",
];
pub const DIACRITICS: [&str; 3] = [":", "'", "~"];

/// A random transcription of at most `max_len` phones over the bundled
/// inventory.
pub fn random_form(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    let len = rng.gen_range(min_len..=max_len);
    let mut s = String::new();
    for _ in 0..len {
        s.push_str(BASES.choose(rng).unwrap());
        if rng.gen_bool(0.25) {
            s.push_str(DIACRITICS.choose(rng).unwrap());
        }
    }
    s
}

/// K_c by enumerating every (anchor, unordered pair) triple.
pub fn brute_kc(x: &DistanceMatrix, y: &DistanceMatrix) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in j + 1..n {
                if j == i || k == i {
                    continue;
                }
                let p = (x.get(i, j) - x.get(i, k)) * (y.get(i, j) - y.get(i, k));
                total += if p > 0.0 {
                    1.0
                } else if p < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                count += 1.0;
            }
        }
    }
    total / count
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteSplit {
    pub groups: [BTreeSet<String>; 2],
    pub medoids: [String; 2],
    pub objective: f64,
}

/// Two-medoid split by trying every medoid pair in id order.
pub fn brute_medoids(m: &DistanceMatrix, members: &[String]) -> BruteSplit {
    let mut ids: Vec<String> = members.to_vec();
    ids.sort();
    let d = |a: &str, b: &str| m.get(m.index_of(a).unwrap(), m.index_of(b).unwrap());
    let mut best: Option<BruteSplit> = None;
    for p in 0..ids.len() {
        for q in p + 1..ids.len() {
            let (mp, mq) = (&ids[p], &ids[q]);
            let mut groups = [BTreeSet::new(), BTreeSet::new()];
            let mut total = 0.0;
            for s in &ids {
                let (dp, dq) = (d(s, mp), d(s, mq));
                if dq < dp {
                    groups[1].insert(s.clone());
                    total += dq;
                } else {
                    groups[0].insert(s.clone());
                    total += dp;
                }
            }
            let objective = total / ids.len() as f64;
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(BruteSplit {
                    groups,
                    medoids: [mp.clone(), mq.clone()],
                    objective,
                });
            }
        }
    }
    best.unwrap()
}

pub fn site_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:02}")).collect()
}

/// Euclidean distances between random points in the unit cube.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    euclidean(site_ids(n), &pts)
}

/// Symmetric matrix with independent uniform cells, not necessarily metric.
pub fn random_cells(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let cells: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
    DistanceMatrix::from_fn(site_ids(n), |i, j| cells[i * n + j]).unwrap()
}

pub fn euclidean<const D: usize>(ids: Vec<String>, pts: &[[f64; D]]) -> DistanceMatrix {
    DistanceMatrix::from_fn(ids, |i, j| {
        pts[i]
            .iter()
            .zip(&pts[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
    .unwrap()
}

/// Average linkage recomputed from scratch at every step: the distance
/// between two clusters is the plain mean over all cross pairs. Returns the
/// clusters formed (as sorted member lists) with their merge heights.
pub fn direct_average_linkage(m: &DistanceMatrix) -> BTreeMap<Vec<String>, f64> {
    let mut clusters: Vec<Vec<String>> = m.site_ids().iter().map(|s| vec![s.clone()]).collect();
    let d = |a: &str, b: &str| m.get(m.index_of(a).unwrap(), m.index_of(b).unwrap());
    let mut out = BTreeMap::new();
    while clusters.len() > 1 {
        clusters.sort();
        let mut best: Option<(f64, usize, usize)> = None;
        for p in 0..clusters.len() {
            for q in p + 1..clusters.len() {
                let mut sum = 0.0;
                for a in &clusters[p] {
                    for b in &clusters[q] {
                        sum += d(a, b);
                    }
                }
                let avg = sum / (clusters[p].len() * clusters[q].len()) as f64;
                if best.is_none_or(|(c, _, _)| avg < c) {
                    best = Some((avg, p, q));
                }
            }
        }
        let (h, p, q) = best.unwrap();
        let second = clusters.remove(q);
        let mut merged = clusters.remove(p);
        merged.extend(second);
        merged.sort();
        out.insert(merged.clone(), h);
        clusters.push(merged);
    }
    out
}

/// A small random atlas. Words are nested under etymons, some site/concept
/// cells are empty and some sites carry variant citations. Every site cites
/// word `c0-w0`, so each metric has at least one defined cell.
pub fn random_atlas(rng: &mut ChaCha8Rng) -> AtlasDocument {
    let n_sites = rng.gen_range(3..=7);
    let n_concepts = rng.gen_range(2..=5);
    let sites: Vec<Site> = (0..n_sites)
        .map(|i| Site {
            id: format!("S{i}"),
            name: format!("site {i}"),
            region_path: vec![format!("site {i}"), "R".into()],
        })
        .collect();
    let concepts: Vec<Concept> = (0..n_concepts)
        .map(|c| Concept {
            id: format!("c{c}"),
            gloss: format!("concept {c}"),
        })
        .collect();
    let mut citations = Vec::new();
    for site in &sites {
        for concept in &concepts {
            let anchor = concept.id == "c0";
            if !anchor && rng.gen_bool(0.2) {
                continue;
            }
            let variants = if rng.gen_bool(0.2) { 2 } else { 1 };
            for v in 0..variants {
                let w: usize = if anchor && v == 0 {
                    0
                } else {
                    rng.gen_range(0..4)
                };
                citations.push(Citation {
                    site: site.id.clone(),
                    concept: concept.id.clone(),
                    form: random_form(rng, 1, 5),
                    word: Some(format!("{}-w{w}", concept.id)),
                    etymon: Some(format!("{}-e{}", concept.id, w / 2)),
                });
            }
        }
    }
    let n_features = rng.gen_range(1..=3);
    let isogloss_features = (0..n_features)
        .map(|f| {
            let mut assignments = BTreeMap::new();
            for (i, site) in sites.iter().enumerate() {
                let cat = if i < 2 { i } else { rng.gen_range(0..3) };
                assignments.insert(site.id.clone(), ["x", "y", "z"][cat].to_string());
            }
            IsoglossFeature {
                id: format!("f{f}"),
                assignments,
            }
        })
        .collect();
    AtlasDocument {
        inventory: None,
        sites,
        concepts,
        citations,
        isogloss_features,
    }
}

/// One instance of the unequal-diameter family: a tight cluster of 4 sites
/// in a unit disc at the origin, a wide cluster of 60 sites in a radius-10
/// disc centred 20 units away, and 3 boundary sites between them.
pub fn unequal_diameter_instance(rng: &mut ChaCha8Rng) -> DistanceMatrix {
    let mut pts: Vec<[f64; 2]> = Vec::new();
    let disc = |rng: &mut ChaCha8Rng, cx: f64, r: f64| {
        let rad = r * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        [cx + rad * th.cos(), rad * th.sin()]
    };
    for _ in 0..4 {
        pts.push(disc(rng, 0.0, 1.0));
    }
    for _ in 0..60 {
        pts.push(disc(rng, 20.0, 10.0));
    }
    for _ in 0..3 {
        pts.push([rng.gen_range(2.0..10.0), rng.gen_range(-1.0..1.0)]);
    }
    euclidean(site_ids(pts.len()), &pts)
}
