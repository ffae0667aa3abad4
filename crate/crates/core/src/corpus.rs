//! Labeled image manifests and the deterministic sampling operations applied
//! to them: stratified splits, class balancing, subsampling and filtering.
//!
//! The on-disk format is a UTF-8 CSV with the header
//! `id,path,species,individual,illumination,width,height`. An empty
//! `individual` field means the record has no individual identity.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

pub const MANIFEST_HEADER: [&str; 7] = [
    "id",
    "path",
    "species",
    "individual",
    "illumination",
    "width",
    "height",
];

/// The closed label set: ten species of interest plus `Unclassified`, which
/// is the negative class for animal detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Bear,
    Chital,
    Dhole,
    Elephant,
    Gaur,
    Leopard,
    Muntjac,
    Sambar,
    Tiger,
    WildPig,
    Unclassified,
}

impl Species {
    pub const ALL: [Species; 11] = [
        Species::Bear,
        Species::Chital,
        Species::Dhole,
        Species::Elephant,
        Species::Gaur,
        Species::Leopard,
        Species::Muntjac,
        Species::Sambar,
        Species::Tiger,
        Species::WildPig,
        Species::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Species::Bear => "bear",
            Species::Chital => "chital",
            Species::Dhole => "dhole",
            Species::Elephant => "elephant",
            Species::Gaur => "gaur",
            Species::Leopard => "leopard",
            Species::Muntjac => "muntjac",
            Species::Sambar => "sambar",
            Species::Tiger => "tiger",
            Species::WildPig => "wild_pig",
            Species::Unclassified => "unclassified",
        }
    }

    /// Only tigers and leopards carry individual identities.
    pub fn has_individuals(self) -> bool {
        matches!(self, Species::Tiger | Species::Leopard)
    }

    pub fn is_animal(self) -> bool {
        self != Species::Unclassified
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Species::ALL
            .iter()
            .copied()
            .find(|sp| sp.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Illumination {
    Day,
    Night,
}

impl Illumination {
    pub fn as_str(self) -> &'static str {
        match self {
            Illumination::Day => "day",
            Illumination::Night => "night",
        }
    }
}

impl fmt::Display for Illumination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Illumination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" => Ok(Illumination::Day),
            "night" => Ok(Illumination::Night),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub species: Species,
    pub individual: Option<String>,
    pub illumination: Illumination,
    pub width: u32,
    pub height: u32,
}

impl ImageRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidRecord {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(bad("width and height must be positive"));
        }
        if self.individual.is_some() && !self.species.has_individuals() {
            return Err(bad("only tiger and leopard records may name an individual"));
        }
        if self.individual.as_deref() == Some("") {
            return Err(bad("empty individual identifier"));
        }
        Ok(())
    }
}

/// An ordered, id-unique list of image records. Record order is part of the
/// value: every sampling operation below is defined relative to it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    records: Vec<ImageRecord>,
    pub provenance: String,
}

impl Manifest {
    pub fn new(records: Vec<ImageRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Manifest {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ImageRecord> {
        self.records.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn species_counts(&self) -> BTreeMap<Species, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.species).or_insert(0) += 1;
        }
        counts
    }

    pub fn individual_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            if let Some(ind) = &r.individual {
                *counts.entry(ind.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Records whose id is in `ids`, in manifest order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Manifest {
        let wanted: HashSet<&str> = ids.iter().map(|s| s.as_ref()).collect();
        self.retain(|r| wanted.contains(r.id.as_str()))
    }

    fn retain(&self, mut keep: impl FnMut(&ImageRecord) -> bool) -> Manifest {
        Manifest {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file, &path.display().to_string())
    }

    /// Parses manifest CSV text. `source` names the input in error messages.
    pub fn parse(reader: impl Read, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let malformed = |line: usize, message: String| Error::MalformedRow {
            path: source.to_string(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?;
        if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
            return Err(malformed(
                1,
                format!("expected header `{}`", MANIFEST_HEADER.join(",")),
            ));
        }
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                malformed(line, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            if row.len() != MANIFEST_HEADER.len() {
                return Err(malformed(
                    line,
                    format!(
                        "expected {} fields, found {}",
                        MANIFEST_HEADER.len(),
                        row.len()
                    ),
                ));
            }
            let species: Species = row[2].parse().map_err(|_| Error::UnknownSpecies {
                line,
                label: row[2].to_string(),
            })?;
            let illumination: Illumination = row[4]
                .parse()
                .map_err(|_| malformed(line, format!("bad illumination `{}`", &row[4])))?;
            let dim = |field: &str, name: &str| -> Result<u32> {
                field
                    .parse::<u32>()
                    .map_err(|_| malformed(line, format!("bad {name} `{field}`")))
            };
            let record = ImageRecord {
                id: row[0].to_string(),
                path: PathBuf::from(&row[1]),
                species,
                individual: (!row[3].is_empty()).then(|| row[3].to_string()),
                illumination,
                width: dim(&row[5], "width")?,
                height: dim(&row[6], "height")?,
            };
            record
                .validate()
                .map_err(|e| malformed(line, e.to_string()))?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId(record.id));
            }
            records.push(record);
        }
        Ok(Manifest {
            records,
            provenance: format!("loaded from {source}"),
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let csv_err = |e: csv::Error| Error::format(e.to_string());
        w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.id.as_str(),
                &r.path.to_string_lossy(),
                r.species.as_str(),
                r.individual.as_deref().unwrap_or(""),
                r.illumination.as_str(),
                &r.width.to_string(),
                &r.height.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::format(e.to_string()))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

impl<'a> IntoIterator for &'a Manifest {
    type Item = &'a ImageRecord;
    type IntoIter = std::slice::Iter<'a, ImageRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// How records are grouped into strata for splitting and subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratifyBy {
    Species,
    /// Individual identity; records without one form a single shared stratum.
    Individual,
    /// Animal present vs. unclassified.
    Presence,
}

impl StratifyBy {
    pub fn key(self, r: &ImageRecord) -> String {
        match self {
            StratifyBy::Species => r.species.as_str().to_string(),
            StratifyBy::Individual => r
                .individual
                .clone()
                .unwrap_or_else(|| format!("<{}>", r.species)),
            StratifyBy::Presence => {
                if r.species.is_animal() {
                    "animal".to_string()
                } else {
                    "unclassified".to_string()
                }
            }
        }
    }
}

impl FromStr for StratifyBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "species" => Ok(StratifyBy::Species),
            "individual" => Ok(StratifyBy::Individual),
            "presence" => Ok(StratifyBy::Presence),
            other => Err(Error::invalid(format!("unknown stratification `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub train_fraction: f64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

impl SplitAssignment {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let split: SplitAssignment =
            toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        let train: HashSet<&String> = split.train.iter().collect();
        if let Some(id) = split.validation.iter().find(|id| train.contains(id)) {
            return Err(Error::format(format!(
                "`{id}` is in both train and validation"
            )));
        }
        Ok(split)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Manifest indices grouped by stratum key, each list in manifest order.
fn strata(
    m: &Manifest,
    key: impl Fn(&ImageRecord) -> Option<String>,
) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in m.records.iter().enumerate() {
        if let Some(k) = key(r) {
            groups.entry(k).or_default().push(i);
        }
    }
    groups
}

/// Uniform sample of `take` members of `members` without replacement, drawn
/// from a stream keyed by (seed, purpose, stratum).
fn sample(members: &[usize], take: usize, seed: u64, purpose: &str, stratum: &str) -> Vec<usize> {
    let mut shuffled = members.to_vec();
    let mut rng = rng_for(seed, &format!("{purpose}/{stratum}"));
    shuffled.shuffle(&mut rng);
    shuffled.truncate(take);
    shuffled
}

/// `round(x)` with halves rounded up.
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Per-stratum split: `round_half_up(fraction × count)` records go to train,
/// clamped to `[1, count − 1]` so both sides of every stratum are non-empty.
pub fn stratified_split(
    m: &Manifest,
    train_fraction: f64,
    seed: u64,
    stratify_by: StratifyBy,
) -> Result<SplitAssignment> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut in_train = vec![false; m.len()];
    for (key, members) in strata(m, |r| Some(stratify_by.key(r))) {
        let n = members.len();
        if n < 2 {
            return Err(Error::StratumTooSmall(key));
        }
        let take = round_half_up(train_fraction * n as f64).clamp(1, n - 1);
        for i in sample(&members, take, seed, "split", &key) {
            in_train[i] = true;
        }
    }
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (r, &t) in m.records.iter().zip(&in_train) {
        if t {
            train.push(r.id.clone());
        } else {
            validation.push(r.id.clone());
        }
    }
    Ok(SplitAssignment {
        train,
        validation,
        seed,
        train_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKey {
    Species,
    Individual,
    /// `animal` versus `unclassified`.
    Presence,
}

impl ClassKey {
    pub fn key(self, r: &ImageRecord) -> Option<String> {
        match self {
            ClassKey::Species => Some(r.species.as_str().to_string()),
            ClassKey::Individual => r.individual.clone(),
            ClassKey::Presence => Some(StratifyBy::Presence.key(r)),
        }
    }
}

/// Downsamples every class to the smallest class count. Records without a
/// value for `class_key` (no individual, under `ClassKey::Individual`) are
/// dropped.
pub fn balance_classes(m: &Manifest, class_key: ClassKey, seed: u64) -> Result<Manifest> {
    let groups = strata(m, |r| class_key.key(r));
    let Some(min) = groups.values().map(Vec::len).min() else {
        return Err(Error::invalid("cannot balance a manifest with no classes"));
    };
    let mut keep = vec![false; m.len()];
    for (key, members) in &groups {
        for i in sample(members, min, seed, "balance", key) {
            keep[i] = true;
        }
    }
    let mut idx = 0;
    Ok(m.retain(|_| {
        idx += 1;
        keep[idx - 1]
    }))
}

/// Per-stratum uniform sample of `round_half_up(fraction × count)` records.
pub fn subsample_fraction(
    m: &Manifest,
    fraction: f64,
    seed: u64,
    stratify_by: StratifyBy,
) -> Result<Manifest> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(m.clone());
    }
    let mut keep = vec![false; m.len()];
    for (key, members) in strata(m, |r| Some(stratify_by.key(r))) {
        let take = round_half_up(fraction * members.len() as f64).min(members.len());
        for i in sample(&members, take, seed, "subsample", &key) {
            keep[i] = true;
        }
    }
    let mut idx = 0;
    Ok(m.retain(|_| {
        idx += 1;
        keep[idx - 1]
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    All,
    Species(BTreeSet<Species>),
    Illumination(Illumination),
    /// Keeps records of individuals seen in strictly more than this many
    /// images. Records without an individual are dropped.
    MinImagesPerIndividual(usize),
}

pub fn filter_manifest(m: &Manifest, predicate: &Predicate) -> Manifest {
    match predicate {
        Predicate::All => m.clone(),
        Predicate::Species(set) => m.retain(|r| set.contains(&r.species)),
        Predicate::Illumination(il) => m.retain(|r| r.illumination == *il),
        Predicate::MinImagesPerIndividual(min) => {
            let counts = m.individual_counts();
            m.retain(|r| r.individual.as_ref().is_some_and(|ind| counts[ind] > *min))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: &str, species: Species, individual: Option<&str>) -> ImageRecord {
        ImageRecord {
            id: id.to_string(),
            path: PathBuf::from(format!("images/{id}.ppm")),
            species,
            individual: individual.map(str::to_string),
            illumination: Illumination::Day,
            width: 96,
            height: 96,
        }
    }

    fn by_counts(counts: &[(&str, usize)]) -> Manifest {
        let mut records = Vec::new();
        for (ind, n) in counts {
            for j in 0..*n {
                records.push(record(&format!("{ind}_{j}"), Species::Tiger, Some(ind)));
            }
        }
        Manifest::new(records, "test").unwrap()
    }

    #[test]
    fn header_only_file_is_empty_manifest() {
        let m = Manifest::parse(MANIFEST_HEADER.join(",").as_bytes(), "mem").unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn unknown_species_names_the_row() {
        let text = "id,path,species,individual,illumination,width,height\n\
                    a,a.ppm,tiger,t1,day,96,96\n\
                    b,b.ppm,wolf,,day,96,96\n";
        match Manifest::parse(text.as_bytes(), "mem") {
            Err(Error::UnknownSpecies { line, label }) => {
                assert_eq!(line, 3);
                assert_eq!(label, "wolf");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_and_duplicate_rows_are_rejected() {
        let text = "id,path,species,individual,illumination,width,height\n\
                    a,a.ppm,tiger,t1,day,96\n";
        assert!(matches!(
            Manifest::parse(text.as_bytes(), "mem"),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let text = "id,path,species,individual,illumination,width,height\n\
                    a,a.ppm,bear,,day,x,96\n";
        assert!(matches!(
            Manifest::parse(text.as_bytes(), "mem"),
            Err(Error::MalformedRow { line: 2, .. })
        ));
        let text = "id,path,species,individual,illumination,width,height\n\
                    a,a.ppm,bear,,day,96,96\n\
                    a,b.ppm,bear,,day,96,96\n";
        assert!(matches!(
            Manifest::parse(text.as_bytes(), "mem"),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
        // individuals only on tigers and leopards
        let text = "id,path,species,individual,illumination,width,height\n\
                    a,a.ppm,bear,b1,day,96,96\n";
        assert!(Manifest::parse(text.as_bytes(), "mem").is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_order() {
        let m = Manifest::new(
            vec![
                record("z", Species::Leopard, Some("l1")),
                record("a", Species::Unclassified, None),
                record("m", Species::WildPig, None),
            ],
            "",
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = Manifest::parse(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.records(), m.records());
    }

    #[test]
    fn split_of_ten_is_five_five() {
        let m = by_counts(&[("t1", 10)]);
        let s = stratified_split(&m, 0.5, 3, StratifyBy::Individual).unwrap();
        assert_eq!((s.train.len(), s.validation.len()), (5, 5));
        let all: BTreeSet<_> = s.train.iter().chain(&s.validation).collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn split_rejects_tiny_strata_and_bad_fractions() {
        let m = by_counts(&[("t1", 5), ("t2", 1)]);
        assert!(matches!(
            stratified_split(&m, 0.7, 0, StratifyBy::Individual),
            Err(Error::StratumTooSmall(k)) if k == "t2"
        ));
        let m = by_counts(&[("t1", 5)]);
        for f in [0.0, 1.0, 1.5, -0.2] {
            assert!(stratified_split(&m, f, 0, StratifyBy::Individual).is_err());
        }
    }

    #[test]
    fn seeds_change_assignment_not_counts() {
        let m = by_counts(&[("t1", 13), ("t2", 8), ("t3", 21)]);
        let a = stratified_split(&m, 0.7, 1, StratifyBy::Individual).unwrap();
        let b = stratified_split(&m, 0.7, 2, StratifyBy::Individual).unwrap();
        assert_ne!(a.train, b.train);
        let count = |ids: &[String]| -> BTreeMap<String, usize> {
            let mut c = BTreeMap::new();
            for id in ids {
                *c.entry(m.get(id).unwrap().individual.clone().unwrap())
                    .or_insert(0) += 1;
            }
            c
        };
        assert_eq!(count(&a.train), count(&b.train));
        assert_eq!(count(&a.validation), count(&b.validation));
    }

    #[test]
    fn split_files_roundtrip_and_reject_overlap() {
        let m = by_counts(&[("a", 4), ("b", 6)]);
        let split = stratified_split(&m, 0.5, 3, StratifyBy::Individual).unwrap();
        assert_eq!(
            SplitAssignment::from_toml(&split.to_toml().unwrap()).unwrap(),
            split
        );
        let mut bad = split.clone();
        bad.validation.push(bad.train[0].clone());
        assert!(SplitAssignment::from_toml(&bad.to_toml().unwrap()).is_err());
    }

    #[test]
    fn balance_downsamples_to_minimum() {
        let m = by_counts(&[("A", 5), ("B", 3), ("C", 7)]);
        let b = balance_classes(&m, ClassKey::Individual, 11).unwrap();
        let counts = b.individual_counts();
        assert!(counts.values().all(|&c| c == 3), "{counts:?}");
        // surviving records keep manifest order
        let pos: Vec<usize> = b
            .iter()
            .map(|r| m.iter().position(|x| x.id == r.id).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn balanced_manifest_is_fixed_point() {
        let m = by_counts(&[("A", 4), ("B", 4)]);
        assert_eq!(balance_classes(&m, ClassKey::Individual, 5).unwrap(), m);
        assert!(balance_classes(&Manifest::default(), ClassKey::Species, 0).is_err());
    }

    #[test]
    fn subsample_identity_and_range() {
        let m = by_counts(&[("A", 4), ("B", 6)]);
        assert_eq!(
            subsample_fraction(&m, 1.0, 9, StratifyBy::Individual).unwrap(),
            m
        );
        assert!(subsample_fraction(&m, 0.0, 9, StratifyBy::Individual).is_err());
        assert!(subsample_fraction(&m, 1.2, 9, StratifyBy::Individual).is_err());
        let a = subsample_fraction(&m, 0.4, 9, StratifyBy::Individual).unwrap();
        assert_eq!(
            a,
            subsample_fraction(&m, 0.4, 9, StratifyBy::Individual).unwrap()
        );
        // round_half_up(1.6) = 2, round_half_up(2.4) = 2
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn filter_by_illumination_can_be_empty() {
        let mut r = record("n", Species::Bear, None);
        r.illumination = Illumination::Night;
        let m = Manifest::new(vec![r], "").unwrap();
        assert!(filter_manifest(&m, &Predicate::Illumination(Illumination::Day)).is_empty());
        assert_eq!(filter_manifest(&m, &Predicate::All), m);
    }
}
