//! Instance naming of detector boxes from spatial relations in the scene
//! graph.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BoundingBox, PerceptionError};
use crate::grounding::GroundedLabelSet;
use crate::scene::SceneGraph;
use crate::text::fold;

/// Centers closer than this along an axis satisfy neither direction.
pub const RELATION_MARGIN_PX: f64 = 2.0;

/// Largest per-class group searched exhaustively.
const MAX_SEARCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialRelation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl SpatialRelation {
    pub fn parse(relation: &str) -> Option<Self> {
        let r = fold(relation);
        let r = r.strip_prefix("is ").unwrap_or(&r);
        let r = r
            .strip_prefix("to the ")
            .or_else(|| r.strip_prefix("on the "))
            .unwrap_or(r);
        match r {
            "left of" => Some(Self::LeftOf),
            "right of" => Some(Self::RightOf),
            "above" | "on top of" | "over" => Some(Self::Above),
            "below" | "under" | "beneath" | "underneath" => Some(Self::Below),
            _ => None,
        }
    }

    /// Whether `a` stands in this relation to `b` in image space.
    pub fn holds(self, a: &BoundingBox, b: &BoundingBox) -> bool {
        let (au, av) = a.center();
        let (bu, bv) = b.center();
        match self {
            Self::LeftOf => au + RELATION_MARGIN_PX < bu,
            Self::RightOf => bu + RELATION_MARGIN_PX < au,
            Self::Above => av + RELATION_MARGIN_PX < bv,
            Self::Below => bv + RELATION_MARGIN_PX < av,
        }
    }
}

struct Constraint {
    text: String,
    relation: SpatialRelation,
    head: String,
    tail: String,
}

/// Orders `bin_2` before `bin_10`.
fn natural_key(name: &str) -> (String, u64, String) {
    let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (stem, num) = name.split_at(name.len() - digits);
    (stem.to_string(), num.parse().unwrap_or(0), name.to_string())
}

/// Instance name for each box, index aligned with `boxes`.
///
/// Within a class, instance names are matched to boxes so that every
/// spatial triple between named instances agrees with box-center geometry.
/// Among consistent matchings the first in (v0, u0) order wins. Boxes left
/// over get fresh `<class>_<j>` names.
pub fn resolve_instances(
    boxes: &[BoundingBox],
    graph: &SceneGraph,
    labels: &GroundedLabelSet,
) -> Result<Vec<String>, PerceptionError> {
    let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, b) in boxes.iter().enumerate() {
        if !labels.contains_class(&b.label) {
            return Err(PerceptionError::UnknownLabel(b.label.clone()));
        }
        by_class.entry(fold(&b.label)).or_default().push(i);
    }

    let constraints: Vec<Constraint> = graph
        .triples()
        .iter()
        .filter_map(|t| {
            Some(Constraint {
                text: t.to_string(),
                relation: SpatialRelation::parse(t.relation())?,
                head: labels.instance_for(t.head())?.to_string(),
                tail: labels.instance_for(t.tail())?.to_string(),
            })
        })
        .collect();

    // Instances whose box is already determined: classes with one box and
    // one instance. Cross-class triples anchor on these.
    let mut fixed: BTreeMap<String, usize> = BTreeMap::new();
    for (class, idx) in &by_class {
        let inst = labels.instances_of(class);
        if idx.len() == 1 && inst.len() == 1 {
            fixed.insert(inst[0].to_string(), idx[0]);
        }
    }

    let mut names: Vec<Option<String>> = alloc::vec![None; boxes.len()];
    let mut violated = Vec::new();
    for (class, idx) in &by_class {
        let mut order = idx.clone();
        order.sort_by_key(|&i| (boxes[i].v0, boxes[i].u0, i));
        let mut instances: Vec<String> = labels
            .instances_of(class)
            .into_iter()
            .map(String::from)
            .collect();
        instances.sort_by_key(|n| natural_key(n));

        let relevant: Vec<&Constraint> = constraints
            .iter()
            .filter(|c| {
                c.head != c.tail && (instances.contains(&c.head) || instances.contains(&c.tail))
            })
            .collect();

        let assignment = if relevant.is_empty() || order.len().max(instances.len()) > MAX_SEARCH {
            identity(order.len(), instances.len())
        } else {
            match search(&order, &instances, &relevant, &fixed, boxes) {
                Ok(a) => a,
                Err(bad) => {
                    violated.extend(bad);
                    continue;
                }
            }
        };
        for (slot, &bi) in order.iter().enumerate() {
            names[bi] = assignment[slot].map(|k| instances[k].clone());
        }
    }
    if !violated.is_empty() {
        return Err(PerceptionError::Inconsistent { violated });
    }

    // Fresh names for leftovers, in (v0, u0) order per class.
    let mut taken: Vec<String> = labels.instance_names.keys().cloned().collect();
    taken.extend(names.iter().flatten().cloned());
    for (class, idx) in &by_class {
        let mut order = idx.clone();
        order.sort_by_key(|&i| (boxes[i].v0, boxes[i].u0, i));
        let stem = class.replace(' ', "_");
        let mut j = 1;
        for bi in order {
            if names[bi].is_some() {
                continue;
            }
            let name = loop {
                let candidate = format!("{stem}_{j}");
                j += 1;
                if !taken.contains(&candidate) {
                    break candidate;
                }
            };
            taken.push(name.clone());
            names[bi] = Some(name);
        }
    }
    Ok(names
        .into_iter()
        .map(|n| n.expect("every box named"))
        .collect())
}

/// Slot `s` (box in (v0, u0) order) gets instance `s` when it exists.
fn identity(slots: usize, instances: usize) -> Vec<Option<usize>> {
    (0..slots).map(|s| (s < instances).then_some(s)).collect()
}

/// Enumerates injective matchings in lexicographic order from the identity
/// and returns the first one that satisfies every relevant triple. On
/// failure, returns the triples broken by the matching that breaks fewest.
fn search(
    order: &[usize],
    instances: &[String],
    relevant: &[&Constraint],
    fixed: &BTreeMap<String, usize>,
    boxes: &[BoundingBox],
) -> Result<Vec<Option<usize>>, Vec<String>> {
    let n = order.len().max(instances.len());
    // perm[slot] = instance index, or >= instances.len() for none.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Vec<String>> = None;
    loop {
        let assignment: Vec<Option<usize>> = perm[..order.len()]
            .iter()
            .map(|&k| (k < instances.len()).then_some(k))
            .collect();
        let box_of = |name: &str| -> Option<usize> {
            if let Some(k) = instances.iter().position(|i| i == name) {
                let slot = assignment.iter().position(|a| *a == Some(k))?;
                return Some(order[slot]);
            }
            fixed.get(name).copied()
        };
        let broken: Vec<String> = relevant
            .iter()
            .filter(|c| match (box_of(&c.head), box_of(&c.tail)) {
                (Some(h), Some(t)) => !c.relation.holds(&boxes[h], &boxes[t]),
                _ => false,
            })
            .map(|c| c.text.clone())
            .collect();
        if broken.is_empty() {
            return Ok(assignment);
        }
        if best.as_ref().is_none_or(|b| broken.len() < b.len()) {
            best = Some(broken);
        }
        if !next_permutation(&mut perm) {
            return Err(best.unwrap_or_default());
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p
        .iter()
        .rposition(|&x| x > p[i])
        .expect("pivot has a successor");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn permutations_enumerate_all() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(p, vec![3, 2, 1, 0]);
    }

    #[test]
    fn natural_order() {
        let mut v = vec!["bin_10", "bin_2", "bin_1"];
        v.sort_by_key(|n| natural_key(n));
        assert_eq!(v, ["bin_1", "bin_2", "bin_10"]);
    }

    #[test]
    fn relation_phrases() {
        assert_eq!(
            SpatialRelation::parse("to the left of"),
            Some(SpatialRelation::LeftOf)
        );
        assert_eq!(
            SpatialRelation::parse("Right of"),
            Some(SpatialRelation::RightOf)
        );
        assert_eq!(
            SpatialRelation::parse("on top of"),
            Some(SpatialRelation::Above)
        );
        assert_eq!(SpatialRelation::parse("in front of"), None);
    }
}
