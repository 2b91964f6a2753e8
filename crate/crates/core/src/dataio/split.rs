use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SurvivalRecord;
use crate::error::{Result, SurvError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Validation => "validation",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "validation" | "val" => Ok(Partition::Validation),
            "test" => Ok(Partition::Test),
            other => Err(format!("unknown partition `{other}`")),
        }
    }
}

/// Subject → partition mapping. Knees follow their subject.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    assignment: BTreeMap<String, Partition>,
}

impl SplitAssignment {
    pub fn partition_of(&self, subject_id: &str) -> Option<Partition> {
        self.assignment.get(subject_id).copied()
    }

    pub fn subjects(&self) -> impl Iterator<Item = (&str, Partition)> {
        self.assignment.iter().map(|(s, p)| (s.as_str(), *p))
    }

    pub fn subject_count(&self, partition: Partition) -> usize {
        self.assignment.values().filter(|&&p| p == partition).count()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,partition\n");
        for (s, p) in &self.assignment {
            out.push_str(&format!("{s},{p}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| SurvError::io(path, e))?;
        if let Some(c) = comment {
            writeln!(f, "# {c}").map_err(|e| SurvError::io(path, e))?;
        }
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| SurvError::io(path, e))
    }
}

/// Largest-remainder apportionment of `n` items over `fractions`.
fn quotas(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut q = [0usize; 3];
    for (slot, e) in q.iter_mut().zip(&exact) {
        *slot = e.floor() as usize;
    }
    let assigned: usize = q.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        q[i] += 1;
    }
    q
}

/// Partitions subjects (not knees) into train/validation/test by shuffled
/// largest-remainder quotas. Deterministic for a fixed seed.
pub fn split_subject_level(
    records: &[SurvivalRecord],
    fractions: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment> {
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(SurvError::invalid("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SurvError::invalid(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    let mut subjects: Vec<&str> = records.iter().map(|r| r.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if subjects.len() < Partition::ALL.len() {
        return Err(SurvError::invalid(format!(
            "{} subjects cannot fill {} partitions",
            subjects.len(),
            Partition::ALL.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    subjects.shuffle(&mut rng);

    let q = quotas(subjects.len(), &fractions);
    let mut assignment = BTreeMap::new();
    let mut it = subjects.into_iter();
    for (partition, count) in Partition::ALL.into_iter().zip(q) {
        for s in it.by_ref().take(count) {
            assignment.insert(s.to_string(), partition);
        }
    }
    Ok(SplitAssignment { assignment })
}

/// Row indices of `records` for each partition, in input order.
pub fn partition_rows(
    records: &[SurvivalRecord],
    split: &SplitAssignment,
) -> Result<[Vec<usize>; 3]> {
    let mut out: [Vec<usize>; 3] = Default::default();
    let mut missing = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match split.partition_of(&r.subject_id) {
            Some(p) => out[p as usize].push(i),
            None => missing.push(r.subject_id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.dedup();
        return Err(SurvError::UnmatchedKeys(missing));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Side;
    use proptest::prelude::*;

    fn cohort(n_subjects: usize) -> Vec<SurvivalRecord> {
        let mut v = Vec::new();
        for s in 0..n_subjects {
            v.push(SurvivalRecord::new(format!("S{s}"), Side::Left, 1.0, true));
            if s % 3 == 0 {
                v.push(SurvivalRecord::new(format!("S{s}"), Side::Right, 2.0, false));
            }
        }
        v
    }

    #[test]
    fn both_knees_share_a_partition() {
        let recs = cohort(50);
        let split = split_subject_level(&recs, [0.7, 0.15, 0.15], 3).unwrap();
        let rows = partition_rows(&recs, &split).unwrap();
        for part in &rows {
            for &i in part {
                let p = split.partition_of(&recs[i].subject_id).unwrap();
                assert!(rows[p as usize].contains(&i));
            }
        }
        let s1: Vec<_> = recs.iter().filter(|r| r.subject_id == "S0").collect();
        assert_eq!(s1.len(), 2);
        assert_eq!(rows.iter().map(Vec::len).sum::<usize>(), recs.len());
    }

    #[test]
    fn same_seed_same_assignment() {
        let recs = cohort(40);
        let a = split_subject_level(&recs, [0.6, 0.2, 0.2], 11).unwrap();
        let b = split_subject_level(&recs, [0.6, 0.2, 0.2], 11).unwrap();
        assert_eq!(a, b);
        let mut reversed = recs.clone();
        reversed.reverse();
        assert_eq!(a, split_subject_level(&reversed, [0.6, 0.2, 0.2], 11).unwrap());
    }

    #[test]
    fn cohort_sized_quotas() {
        let recs = cohort(1000);
        let fr = [0.737, 0.102, 0.161];
        let split = split_subject_level(&recs, fr, 7).unwrap();
        let total: usize = Partition::ALL.iter().map(|&p| split.subject_count(p)).sum();
        assert_eq!(total, 1000);
        for (p, f) in Partition::ALL.iter().zip(fr) {
            let quota = f * 1000.0;
            let got = split.subject_count(*p) as f64;
            assert!((got - quota).abs() <= 1.0, "{p}: {got} vs {quota}");
        }
    }

    #[test]
    fn too_few_subjects() {
        let recs = cohort(2);
        assert!(split_subject_level(&recs, [0.5, 0.25, 0.25], 0).is_err());
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let recs = cohort(10);
        assert!(split_subject_level(&recs, [0.5, 0.25, 0.3], 0).is_err());
        assert!(split_subject_level(&recs, [1.0, 0.0, 0.0], 0).is_err());
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(quotas(10, &[0.55, 0.25, 0.2]), [6, 2, 2]);
        assert_eq!(quotas(3, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]), [1, 1, 1]);
        assert_eq!(quotas(7, &[0.5, 0.25, 0.25]), [3, 2, 2]);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 3usize..200, seed in any::<u64>(), a in 0.1f64..0.8) {
            let rest = 1.0 - a;
            let fr = [a, rest / 2.0, rest / 2.0];
            let recs = cohort(n);
            let split = split_subject_level(&recs, fr, seed).unwrap();
            prop_assert_eq!(split.len(), n);
            let q = quotas(n, &fr);
            for (p, want) in Partition::ALL.iter().zip(q) {
                prop_assert_eq!(split.subject_count(*p), want);
            }
        }
    }
}
