//! Balls: for each candidate guess, the passwords it would answer
//! similar (or match) for.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use super::distribution::PasswordDistribution;
use super::model::VariantModel;

/// Probabilities are summed as fixed-point integers so ball weights and
/// their ties do not depend on summation order.
pub const WEIGHT_SCALE: f64 = (1u64 << 56) as f64;

pub fn fixed_weight(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else {
        ((p * WEIGHT_SCALE).round() as u64).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: String,
    /// Sorted.
    pub members: Vec<String>,
    pub weight: f64,
}

/// The attacker's password set, its variant relation and the inverted
/// relation, all by integer id. Password ids follow the distribution order
/// (most probable first); center ids follow string order.
#[derive(Debug)]
pub struct BallIndex {
    passwords: Vec<String>,
    prob: Vec<f64>,
    fp: Vec<u64>,
    centers: Vec<String>,
    members: Vec<Vec<u32>>,
    centers_of: Vec<Vec<u32>>,
    self_center: Vec<u32>,
    usable: Vec<bool>,
}

impl BallIndex {
    /// Passwords in `blocked` are dropped from the attacker's set and never
    /// used as guesses.
    pub fn build(dist: &PasswordDistribution, model: &dyn VariantModel, blocked: &HashSet<String>) -> Self {
        let (passwords, prob): (Vec<String>, Vec<f64>) = dist
            .iter()
            .filter(|(w, _)| !blocked.contains(*w))
            .map(|(w, p)| (w.to_owned(), p))
            .unzip();
        let expansions: Vec<Vec<String>> = passwords
            .par_iter()
            .map(|w| {
                let mut v = model.variants(w);
                v.push(w.clone());
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let mut centers: Vec<String> = expansions.iter().flatten().cloned().collect();
        centers.par_sort_unstable();
        centers.dedup();
        let id: HashMap<&str, u32> = centers.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32)).collect();
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); centers.len()];
        let centers_of: Vec<Vec<u32>> = expansions
            .iter()
            .enumerate()
            .map(|(pid, exp)| {
                exp.iter()
                    .map(|c| {
                        let cid = id[c.as_str()];
                        members[cid as usize].push(pid as u32);
                        cid
                    })
                    .collect()
            })
            .collect();
        let self_center = passwords.iter().map(|w| id[w.as_str()]).collect();
        let usable = centers.iter().map(|c| !blocked.contains(c)).collect();
        let fp = prob.iter().map(|p| fixed_weight(*p)).collect();
        BallIndex {
            passwords,
            prob,
            fp,
            centers,
            members,
            centers_of,
            self_center,
            usable,
        }
    }

    pub fn num_passwords(&self) -> usize {
        self.passwords.len()
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn password(&self, pid: u32) -> &str {
        &self.passwords[pid as usize]
    }

    pub fn center(&self, cid: u32) -> &str {
        &self.centers[cid as usize]
    }

    pub fn center_id(&self, center: &str) -> Option<u32> {
        self.centers.binary_search_by(|c| c.as_str().cmp(center)).ok().map(|i| i as u32)
    }

    pub fn password_id(&self, w: &str) -> Option<u32> {
        self.passwords.iter().position(|p| p == w).map(|i| i as u32)
    }

    pub(crate) fn fp(&self, pid: u32) -> u64 {
        self.fp[pid as usize]
    }

    pub(crate) fn members(&self, cid: u32) -> &[u32] {
        &self.members[cid as usize]
    }

    pub(crate) fn centers_of(&self, pid: u32) -> &[u32] {
        &self.centers_of[pid as usize]
    }

    pub(crate) fn self_center(&self, pid: u32) -> u32 {
        self.self_center[pid as usize]
    }

    pub(crate) fn usable(&self, cid: u32) -> bool {
        self.usable[cid as usize]
    }

    /// Full-weight balls keyed by center.
    pub fn balls(&self) -> BTreeMap<String, Ball> {
        self.centers
            .iter()
            .enumerate()
            .map(|(cid, c)| {
                let mut members: Vec<String> = self.members[cid].iter().map(|p| self.passwords[*p as usize].clone()).collect();
                members.sort();
                let weight = self.members[cid].iter().map(|p| self.prob[*p as usize]).sum();
                (
                    c.clone(),
                    Ball {
                        center: c.clone(),
                        members,
                        weight,
                    },
                )
            })
            .collect()
    }
}

/// `B(c) = { w in W : c = w or c in tau(w) }` for every `c` reachable from
/// the support.
pub fn compute_balls(dist: &PasswordDistribution, model: &dyn VariantModel) -> BTreeMap<String, Ball> {
    BallIndex::build(dist, model, &HashSet::new()).balls()
}

#[cfg(test)]
mod tests {
    use super::super::distribution::synth_distribution;
    use super::super::model::{ExplicitModel, RuleModel};
    use super::*;
    use crate::similarity::{dasr_ruleset, Rule, RuleSet, TransformationPath, UnitTransformation};

    fn del_last() -> RuleSet {
        RuleSet::new(
            "del",
            vec![Rule::new(TransformationPath::single(UnitTransformation::delete(-1)), 0)],
        )
        .unwrap()
    }

    #[test]
    fn shared_variant_ball() {
        let d = PasswordDistribution::new(vec![("a1".into(), 0.6), ("a2".into(), 0.4)]).unwrap();
        let balls = compute_balls(&d, &RuleModel::new(del_last(), 1));
        let a = &balls["a"];
        assert_eq!(a.members, ["a1", "a2"]);
        assert!((a.weight - 1.0).abs() < 1e-12);
        assert_eq!(balls["a1"].members, ["a1"]);
        assert_eq!(balls.len(), 3);
    }

    #[test]
    fn no_rules_means_self_balls() {
        let d = PasswordDistribution::new(vec![("x".into(), 1.0)]).unwrap();
        let balls = compute_balls(&d, &ExplicitModel::new());
        assert_eq!(balls.len(), 1);
        assert_eq!(balls["x"].members, ["x"]);
    }

    #[test]
    fn inversion_matches_double_loop() {
        let d = synth_distribution(17, 200, 1.0).unwrap();
        let model = RuleModel::new(dasr_ruleset(), 5);
        let balls = compute_balls(&d, &model);
        let mut universe: Vec<String> = d.support().to_vec();
        for w in d.support() {
            universe.extend(model.variants(w));
        }
        universe.sort();
        universe.dedup();
        assert_eq!(balls.keys().cloned().collect::<Vec<_>>(), universe);
        for c in &universe {
            let mut expect: Vec<String> = d
                .support()
                .iter()
                .filter(|w| *w == c || model.variants(w).contains(c))
                .cloned()
                .collect();
            expect.sort();
            let weight: f64 = d.iter().filter(|(w, _)| expect.iter().any(|e| e == w)).map(|(_, p)| p).sum();
            assert_eq!(balls[c].members, expect, "{c}");
            assert!((balls[c].weight - weight).abs() < 1e-12);
        }
    }

    #[test]
    fn blocked_passwords_leave_the_index() {
        let d = PasswordDistribution::new(vec![("a1".into(), 0.6), ("a2".into(), 0.4)]).unwrap();
        let blocked: HashSet<String> = ["a1".to_owned(), "a".to_owned()].into();
        let idx = BallIndex::build(&d, &RuleModel::new(del_last(), 1), &blocked);
        assert_eq!(idx.num_passwords(), 1);
        let a = idx.center_id("a").unwrap();
        assert!(!idx.usable(a));
        assert!(idx.usable(idx.center_id("a2").unwrap()));
    }

    #[test]
    fn fixed_weights() {
        assert_eq!(fixed_weight(0.0), 0);
        assert_eq!(fixed_weight(1e-30), 1);
        assert_eq!(fixed_weight(0.5), 1 << 55);
    }
}
