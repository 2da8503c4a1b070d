use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::patches::{Domain, Patch, PatchSet};
use crate::error::GapError;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub fractions: [f64; 3],
    pub scene_disjoint: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { fractions: [0.7, 0.1, 0.2], scene_disjoint: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), GapError> {
        let sum: f64 = self.fractions.iter().sum();
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
            return Err(GapError::BadFractions(self.fractions));
        }
        Ok(())
    }
}

/// Splits `n` items by the largest-remainder method; ties go to the earlier part.
pub fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Source and target patches of one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainPair {
    pub source: Vec<Patch>,
    pub target: Vec<Patch>,
}

impl DomainPair {
    pub fn len(&self) -> usize {
        self.source.len() + self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scenes(&self) -> BTreeSet<&str> {
        self.source.iter().chain(&self.target).map(|p| p.scene.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: DomainPair,
    pub val: DomainPair,
    pub test: DomainPair,
}

/// Counts reported alongside a measurement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub scenes: [usize; 3],
    pub source_patches: [usize; 3],
    pub target_patches: [usize; 3],
    pub scene_disjoint: bool,
}

impl Splits {
    pub fn parts(&self) -> [&DomainPair; 3] {
        [&self.train, &self.val, &self.test]
    }

    pub fn summary(&self, scene_disjoint: bool) -> SplitSummary {
        let p = self.parts();
        SplitSummary {
            scenes: p.map(|s| s.scenes().len()),
            source_patches: p.map(|s| s.source.len()),
            target_patches: p.map(|s| s.target.len()),
            scene_disjoint,
        }
    }
}

/// Partitions a source and a target patch set into train/val/test.
///
/// With `scene_disjoint`, whole scenes are allocated; otherwise each patch is
/// its own unit. Units are grouped into those present in both domains, source
/// only and target only, shuffled within each group and allocated per group
/// with [`largest_remainder`], so both domains reach every non-empty split.
pub fn split_patches(source: &PatchSet, target: &PatchSet, spec: &SplitSpec, rng: &mut RngStream) -> Result<Splits, GapError> {
    spec.validate()?;
    // unit key -> (source indices, target indices)
    let mut units: BTreeMap<String, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    let key = |p: &Patch, i: usize, d: &str| if spec.scene_disjoint { p.scene.clone() } else { format!("{d}/{i}") };
    for (i, p) in source.patches.iter().enumerate() {
        units.entry(key(p, i, "s")).or_default().0.push(i);
    }
    for (i, p) in target.patches.iter().enumerate() {
        units.entry(key(p, i, "t")).or_default().1.push(i);
    }

    let mut groups: [Vec<&(Vec<usize>, Vec<usize>)>; 3] = Default::default();
    for u in units.values() {
        let g = match (u.0.is_empty(), u.1.is_empty()) {
            (false, false) => 0,
            (false, true) => 1,
            _ => 2,
        };
        groups[g].push(u);
    }

    let mut parts: [DomainPair; 3] = Default::default();
    for group in &mut groups {
        rng.shuffle(group);
        let counts = largest_remainder(group.len(), &spec.fractions);
        let mut it = group.iter();
        for (part, &c) in parts.iter_mut().zip(&counts) {
            for (s, t) in it.by_ref().take(c) {
                part.source.extend(s.iter().map(|&i| source.patches[i].clone()));
                part.target.extend(t.iter().map(|&i| target.patches[i].clone()));
            }
        }
    }

    for (part, f) in parts.iter().zip(spec.fractions) {
        if f <= 0.0 {
            continue;
        }
        for (patches, domain) in [(&part.source, Domain::Source), (&part.target, Domain::Target)] {
            if patches.is_empty() {
                let set = if domain == Domain::Source { source } else { target };
                let scenes = set.patches.iter().map(|p| &p.scene).collect::<BTreeSet<_>>().len();
                return Err(GapError::TooFewScenes { domain: domain.as_str(), scenes });
            }
        }
    }
    let [train, val, test] = parts;
    Ok(Splits { train, val, test })
}
