//! Positional roles and the cohort roster.
//!
//! Role predicates (TOP, FIRST, LAST, BEFORE, AFTER) are evaluated
//! independently for every included token. A token matching two or more is
//! dropped from all main cohorts; one matching none belongs to MIDDLE.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{ExclusionReason, StudyCorpus, TokenRef};
use crate::exec::Execution;

pub const RANDOM_COHORTS: u8 = 6;
pub const SAMPLER_NAME: &str = "ChaCha8Rng::seed_from_u64(seed) with stream i per RANDi; rand::seq::index::sample";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CohortError {
    #[error("random cohort size {size} exceeds MIDDLE size {available}")]
    SizeTooLarge { size: usize, available: usize },
    #[error("unknown cohort name `{0}`")]
    UnknownName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CohortName {
    Middle,
    Top,
    First,
    Last,
    Before,
    After,
    Second,
    Fourth,
    Rand(u8),
}

impl CohortName {
    pub const SUBJECTS: [CohortName; 5] = [
        CohortName::Top,
        CohortName::First,
        CohortName::Last,
        CohortName::Before,
        CohortName::After,
    ];

    pub fn kind(self) -> CohortKind {
        match self {
            CohortName::Middle => CohortKind::Reference,
            CohortName::Top
            | CohortName::First
            | CohortName::Last
            | CohortName::Before
            | CohortName::After => CohortKind::Subject,
            CohortName::Second | CohortName::Fourth => CohortKind::Supplementary,
            CohortName::Rand(_) => CohortKind::Random,
        }
    }

    /// Table order: reference, subjects, supplementary, random.
    pub fn roster(random: u8) -> Vec<CohortName> {
        let mut v = vec![CohortName::Middle];
        v.extend(Self::SUBJECTS);
        v.push(CohortName::Second);
        v.push(CohortName::Fourth);
        v.extend((1..=random).map(CohortName::Rand));
        v
    }
}

impl fmt::Display for CohortName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CohortName::Middle => f.write_str("MIDDLE"),
            CohortName::Top => f.write_str("TOP"),
            CohortName::First => f.write_str("FIRST"),
            CohortName::Last => f.write_str("LAST"),
            CohortName::Before => f.write_str("BEFORE"),
            CohortName::After => f.write_str("AFTER"),
            CohortName::Second => f.write_str("SECOND"),
            CohortName::Fourth => f.write_str("FOURTH"),
            CohortName::Rand(i) => write!(f, "RAND{i}"),
        }
    }
}

impl FromStr for CohortName {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "MIDDLE" => CohortName::Middle,
            "TOP" => CohortName::Top,
            "FIRST" => CohortName::First,
            "LAST" => CohortName::Last,
            "BEFORE" => CohortName::Before,
            "AFTER" => CohortName::After,
            "SECOND" => CohortName::Second,
            "FOURTH" => CohortName::Fourth,
            _ => s
                .strip_prefix("RAND")
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|n| *n >= 1)
                .map(CohortName::Rand)
                .ok_or_else(|| CohortError::UnknownName(s.to_string()))?,
        })
    }
}

impl Serialize for CohortName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CohortName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CohortKind {
    Reference,
    Subject,
    Supplementary,
    Random,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub is_top_line: bool,
    pub is_line_first: bool,
    pub is_line_last: bool,
    /// Immediately left of an interior drawing gap.
    pub is_before_gap: bool,
    /// Immediately right of an interior drawing gap.
    pub is_after_gap: bool,
    /// Designated position: 1 + certain delimiters to the left.
    pub ordinal: u32,
    /// Position if every uncertain delimiter to the left is a real space.
    pub ordinal_max: u32,
}

impl Annotation {
    fn roles(&self) -> [(CohortName, bool); 5] {
        [
            (CohortName::Top, self.is_top_line),
            (CohortName::First, self.is_line_first),
            (CohortName::Last, self.is_line_last),
            (CohortName::Before, self.is_before_gap),
            (CohortName::After, self.is_after_gap),
        ]
    }
}

/// Annotations laid out like the corpus: paragraph -> line -> slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionAnnotations {
    paragraphs: Vec<Vec<Vec<Annotation>>>,
}

impl PositionAnnotations {
    pub fn get(&self, r: TokenRef) -> &Annotation {
        &self.paragraphs[r.paragraph as usize][r.line as usize][r.slot as usize]
    }
}

/// Annotates every slot, excluded tokens included, from the physical
/// layout of its line. Gaps at a line edge confer no BEFORE/AFTER role.
pub fn assign_positions(corpus: &StudyCorpus, exec: Execution) -> PositionAnnotations {
    let paragraphs = exec.map(&corpus.paragraphs, |para| {
        para.lines
            .iter()
            .enumerate()
            .map(|(li, line)| {
                let n = line.tokens.len();
                let mut certain_left = 0u32;
                line.tokens
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        if i > 0 && !t.flags.uncertain_space_before {
                            certain_left += 1;
                        }
                        let first = i == 0;
                        let last = i + 1 == n;
                        Annotation {
                            is_top_line: li == 0,
                            is_line_first: first,
                            is_line_last: last,
                            is_before_gap: t.flags.precedes_gap && !last,
                            is_after_gap: t.flags.follows_gap && !first,
                            ordinal: 1 + certain_left,
                            ordinal_max: i as u32 + 1,
                        }
                    })
                    .collect()
            })
            .collect()
    });
    PositionAnnotations { paragraphs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub name: CohortName,
    pub kind: CohortKind,
    /// Sorted in document order.
    pub members: Vec<TokenRef>,
}

impl Cohort {
    pub fn new(name: CohortName, mut members: Vec<TokenRef>) -> Self {
        members.sort_unstable();
        Self {
            name,
            kind: name.kind(),
            members,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSet {
    pub cohorts: Vec<Cohort>,
    pub dropped_multi_role: Vec<TokenRef>,
    pub seed: u64,
    pub random_size: usize,
    pub sampler: String,
    pub warnings: Vec<String>,
}

impl CohortSet {
    pub fn get(&self, name: CohortName) -> Option<&Cohort> {
        self.cohorts.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<CohortName> {
        self.cohorts.iter().map(|c| c.name).collect()
    }
}

/// Builds the positional cohorts (everything but the random ones).
pub fn build_cohorts(
    corpus: &StudyCorpus,
    annotations: &PositionAnnotations,
) -> (Vec<Cohort>, Vec<TokenRef>) {
    let mut buckets: Vec<(CohortName, Vec<TokenRef>)> = CohortName::roster(0)
        .into_iter()
        .map(|n| (n, Vec::new()))
        .collect();
    let mut push = |name: CohortName, r: TokenRef| {
        buckets.iter_mut().find(|(n, _)| *n == name).unwrap().1.push(r);
    };
    let mut dropped = Vec::new();

    for r in corpus.token_refs() {
        if corpus.token(r).excluded() {
            continue;
        }
        let a = annotations.get(r);
        let matched: Vec<CohortName> = a
            .roles()
            .into_iter()
            .filter_map(|(n, hit)| hit.then_some(n))
            .collect();
        match matched.as_slice() {
            [] => {
                push(CohortName::Middle, r);
                match a.ordinal {
                    2 => push(CohortName::Second, r),
                    4 => push(CohortName::Fourth, r),
                    _ => {}
                }
            }
            [one] => push(*one, r),
            _ => dropped.push(r),
        }
    }
    let cohorts = buckets
        .into_iter()
        .map(|(n, m)| Cohort::new(n, m))
        .collect();
    (cohorts, dropped)
}

/// Draws `count` independent samples without replacement from MIDDLE.
pub fn sample_random_cohorts(
    middle: &Cohort,
    count: u8,
    size: usize,
    seed: u64,
) -> Result<Vec<Cohort>, CohortError> {
    if size > middle.len() {
        return Err(CohortError::SizeTooLarge {
            size,
            available: middle.len(),
        });
    }
    Ok((1..=count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::from(i));
            let picked = rand::seq::index::sample(&mut rng, middle.len(), size);
            let members = picked.iter().map(|j| middle.members[j]).collect();
            Cohort::new(CohortName::Rand(i), members)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomConfig {
    pub seed: u64,
    /// Size of each random cohort; defaults to the smallest subject cohort.
    pub cohort_size: Option<usize>,
    pub count: u8,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            cohort_size: None,
            count: RANDOM_COHORTS,
        }
    }
}

/// Full roster including random validation cohorts.
pub fn build_cohort_set(
    corpus: &StudyCorpus,
    annotations: &PositionAnnotations,
    random: &RandomConfig,
) -> Result<CohortSet, CohortError> {
    let (mut cohorts, dropped) = build_cohorts(corpus, annotations);
    let middle = cohorts
        .iter()
        .find(|c| c.name == CohortName::Middle)
        .expect("roster always has MIDDLE");
    let size = random.cohort_size.unwrap_or_else(|| {
        cohorts
            .iter()
            .filter(|c| c.kind == CohortKind::Subject)
            .map(Cohort::len)
            .min()
            .unwrap_or(0)
    });
    let randoms = sample_random_cohorts(middle, random.count, size, random.seed)?;
    cohorts.extend(randoms);
    let warnings = cohorts
        .iter()
        .filter(|c| c.is_empty())
        .map(|c| format!("EmptyCohort: {} has no members", c.name))
        .collect();
    Ok(CohortSet {
        cohorts,
        dropped_multi_role: dropped,
        seed: random.seed,
        random_size: size,
        sampler: SAMPLER_NAME.to_string(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateBasis {
    /// Every token slot.
    AllSlots,
    /// Tokens not excluded for any reason other than spacing uncertainty.
    #[default]
    BeforeSpacingExclusion,
    /// Included tokens only.
    Included,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingRate {
    pub ordinal: u32,
    pub designated: usize,
    pub uncertain: usize,
    pub rate: f64,
}

/// Share of tokens designated at `ordinal` whose true position may be higher.
pub fn spacing_uncertainty_rate(
    corpus: &StudyCorpus,
    annotations: &PositionAnnotations,
    ordinal: u32,
    basis: RateBasis,
) -> SpacingRate {
    let mut designated = 0;
    let mut uncertain = 0;
    for r in corpus.token_refs() {
        let t = corpus.token(r);
        let counted = match basis {
            RateBasis::AllSlots => true,
            RateBasis::Included => !t.excluded(),
            RateBasis::BeforeSpacingExclusion => t
                .exclusions
                .iter()
                .all(|e| *e == ExclusionReason::UncertainSpace),
        };
        let a = annotations.get(r);
        if counted && a.ordinal == ordinal {
            designated += 1;
            if a.ordinal_max > a.ordinal {
                uncertain += 1;
            }
        }
    }
    let rate = if designated == 0 {
        0.0
    } else {
        uncertain as f64 / designated as f64
    };
    SpacingRate {
        ordinal,
        designated,
        uncertain,
        rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, FilterCriteria};
    use crate::ivtff::{parse_document, MarkerConfig};

    fn corpus(body: &str) -> StudyCorpus {
        let text = format!("<f1r> <! $I=H $H=1>\n{body}");
        let doc = parse_document(text.as_bytes(), &MarkerConfig::default()).unwrap();
        build_corpus(&doc, &FilterCriteria::default(), Execution::Sequential)
            .unwrap()
            .0
    }

    fn members(c: &StudyCorpus, set: &[Cohort], name: CohortName) -> Vec<String> {
        set.iter()
            .find(|x| x.name == name)
            .unwrap()
            .members
            .iter()
            .map(|r| c.token(*r).text.clone())
            .collect()
    }

    #[test]
    fn one_line_paragraph_annotations() {
        let c = corpus("<f1r.1,@P0> a.b.c.z<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let refs: Vec<_> = c.token_refs().collect();
        assert!(ann.get(refs[0]).is_line_first);
        assert!(ann.get(refs[3]).is_line_last);
        assert!(refs.iter().all(|r| ann.get(*r).is_top_line));
    }

    #[test]
    fn gap_neighbours() {
        let c = corpus("<f1r.1,@P0> x.y\n<f1r.2,+P0> a.b<->c.d\n<f1r.3,+P0> z<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let find = |s: &str| c.token_refs().find(|r| c.token(*r).text == s).unwrap();
        assert!(ann.get(find("b")).is_before_gap);
        assert!(ann.get(find("c")).is_after_gap);
        assert!(!ann.get(find("a")).is_before_gap);
    }

    #[test]
    fn ordinal_ranges_follow_uncertain_spaces() {
        let c = corpus("<f1r.1,@P0> x\n<f1r.2,+P0> a,b.c.d.e\n<f1r.3,+P0> z<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let find = |s: &str| *ann.get(c.token_refs().find(|r| c.token(*r).text == s).unwrap());
        assert_eq!((find("a").ordinal, find("a").ordinal_max), (1, 1));
        assert_eq!((find("b").ordinal, find("b").ordinal_max), (1, 2));
        assert_eq!((find("c").ordinal, find("c").ordinal_max), (2, 3));
        assert_eq!((find("e").ordinal, find("e").ordinal_max), (4, 5));
    }

    #[test]
    fn roster_from_layout() {
        // Top line [A B C], second line [D E F G], third line [H I <gap> J K], final line.
        let c = corpus(
            "<f1r.1,@P0> a.b.c\n<f1r.2,+P0> d.e.f.g\n<f1r.3,+P0> h.i<->j.k\n<f1r.4,+P0> l.m<$>\n",
        );
        let ann = assign_positions(&c, Execution::Sequential);
        let (set, dropped) = build_cohorts(&c, &ann);
        assert_eq!(members(&c, &set, CohortName::Top), ["b"]);
        assert_eq!(members(&c, &set, CohortName::First), ["d", "h", "l"]);
        assert_eq!(members(&c, &set, CohortName::Last), ["g", "k"]);
        assert_eq!(members(&c, &set, CohortName::Before), ["i"]);
        assert_eq!(members(&c, &set, CohortName::After), ["j"]);
        assert_eq!(members(&c, &set, CohortName::Middle), ["e", "f"]);
        assert_eq!(members(&c, &set, CohortName::Second), ["e"]);
        assert!(members(&c, &set, CohortName::Fourth).is_empty());
        let dropped: Vec<_> = dropped.iter().map(|r| c.token(*r).text.as_str()).collect();
        assert_eq!(dropped, ["a", "c"]);
    }

    #[test]
    fn edge_gap_only_gives_line_role() {
        let c = corpus("<f1r.1,@P0> x.y\n<f1r.2,+P0> <->a.b.c<->\n<f1r.3,+P0> z<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let (set, dropped) = build_cohorts(&c, &ann);
        assert_eq!(members(&c, &set, CohortName::First), ["a"]);
        assert_eq!(members(&c, &set, CohortName::Last), ["c"]);
        assert!(members(&c, &set, CohortName::Before).is_empty());
        assert_eq!(dropped.len(), 2);
    }

    #[test]
    fn random_cohorts() {
        let middle = Cohort::new(
            CohortName::Middle,
            (0..50)
                .map(|i| TokenRef {
                    paragraph: 0,
                    line: 0,
                    slot: i,
                })
                .collect(),
        );
        let all = sample_random_cohorts(&middle, 6, 50, 1).unwrap();
        assert!(all.iter().all(|c| c.members == middle.members));

        let a = sample_random_cohorts(&middle, 6, 10, 7).unwrap();
        let b = sample_random_cohorts(&middle, 6, 10, 7).unwrap();
        let c = sample_random_cohorts(&middle, 6, 10, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a[0].members, a[1].members);

        let empty = sample_random_cohorts(&middle, 6, 0, 7).unwrap();
        assert!(empty.iter().all(Cohort::is_empty));

        assert_eq!(
            sample_random_cohorts(&middle, 6, 51, 7),
            Err(CohortError::SizeTooLarge {
                size: 51,
                available: 50
            })
        );
    }

    #[test]
    fn empty_cohorts_warn() {
        let c = corpus("<f1r.1,@P0> a.b.c<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let set = build_cohort_set(&c, &ann, &RandomConfig::default()).unwrap();
        assert!(set.warnings.iter().any(|w| w.contains("MIDDLE")));
        assert_eq!(set.random_size, 0);
    }

    #[test]
    fn no_uncertain_spaces_rate_is_zero() {
        let c = corpus("<f1r.1,@P0> a.b.c.d.e\n<f1r.2,+P0> a.b.c.d.e<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let r = spacing_uncertainty_rate(&c, &ann, 2, RateBasis::default());
        assert_eq!((r.designated, r.rate), (2, 0.0));
    }

    #[test]
    fn spacing_rate_counts_designated_ordinals() {
        // Line "a,b.c.d.e": c is designated 2nd but may be 3rd.
        let c = corpus("<f1r.1,@P0> a,b.c.d.e\n<f1r.2,+P0> a.b.c.d.e<$>\n");
        let ann = assign_positions(&c, Execution::Sequential);
        let r = spacing_uncertainty_rate(&c, &ann, 2, RateBasis::BeforeSpacingExclusion);
        assert_eq!((r.designated, r.uncertain), (2, 1));
        let all = spacing_uncertainty_rate(&c, &ann, 1, RateBasis::AllSlots);
        assert_eq!((all.designated, all.uncertain), (3, 1));
    }

    #[test]
    fn names_round_trip() {
        for n in CohortName::roster(6) {
            assert_eq!(n.to_string().parse::<CohortName>().unwrap(), n);
        }
        assert!("RAND0".parse::<CohortName>().is_err());
    }
}
