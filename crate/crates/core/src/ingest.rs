//! Rating-file ingestion and dataset preprocessing.
//!
//! A [`RatingDataset`] is immutable once built. User and item identifiers are
//! interned to dense indices in lexicographic order of their original strings,
//! so "smaller index" and "lexicographically smaller identifier" coincide
//! everywhere downstream.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive rating scale of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRange {
    pub min: f64,
    pub max: f64,
}

impl RatingRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::invalid(format!("bad rating range [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    users: Vec<String>,
    items: Vec<String>,
    ratings: Vec<Rating>,
    range: RatingRange,
    /// Value that stands for implicit feedback and is exempt from the range
    /// check until [`convert_implicit`] replaces it.
    implicit_marker: Option<f64>,
}

impl RatingDataset {
    /// Builds a dataset from string triples. Users and items are exactly
    /// those referenced by the triples.
    pub fn from_triples<I, U, T>(triples: I, range: RatingRange) -> Result<Self>
    where
        I: IntoIterator<Item = (U, T, f64)>,
        U: Into<String>,
        T: Into<String>,
    {
        Self::with_entities(
            std::iter::empty::<String>(),
            std::iter::empty::<String>(),
            triples,
            range,
        )
    }

    /// Like [`from_triples`](Self::from_triples) but also registers users and
    /// items that may have no ratings.
    pub fn with_entities<I, U, T>(
        users: impl IntoIterator<Item = impl Into<String>>,
        items: impl IntoIterator<Item = impl Into<String>>,
        triples: I,
        range: RatingRange,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (U, T, f64)>,
        U: Into<String>,
        T: Into<String>,
    {
        let raw: Vec<(String, String, f64)> = triples
            .into_iter()
            .map(|(u, i, v)| (u.into(), i.into(), v))
            .collect();
        let mut user_set: BTreeSet<String> = users.into_iter().map(Into::into).collect();
        let mut item_set: BTreeSet<String> = items.into_iter().map(Into::into).collect();
        for (u, i, _) in &raw {
            user_set.insert(u.clone());
            item_set.insert(i.clone());
        }
        let users: Vec<String> = user_set.into_iter().collect();
        let items: Vec<String> = item_set.into_iter().collect();
        let user_ix: HashMap<&str, u32> = index_of(&users);
        let item_ix: HashMap<&str, u32> = index_of(&items);

        let mut ratings = Vec::with_capacity(raw.len());
        for (u, i, v) in &raw {
            if !range.contains(*v) {
                return Err(Error::RatingOutOfRange {
                    value: *v,
                    line: 0,
                    min: range.min,
                    max: range.max,
                });
            }
            ratings.push(Rating {
                user: user_ix[u.as_str()],
                item: item_ix[i.as_str()],
                value: *v,
            });
        }
        ratings.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = ratings
            .windows(2)
            .find(|w| w[0].user == w[1].user && w[0].item == w[1].item)
        {
            return Err(Error::DuplicatePair {
                user: users[w[0].user as usize].clone(),
                item: items[w[0].item as usize].clone(),
                row: 0,
                line: 0,
            });
        }
        Ok(Self {
            users,
            items,
            ratings,
            range,
            implicit_marker: None,
        })
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// Ratings sorted by (user index, item index).
    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn rating_range(&self) -> RatingRange {
        self.range
    }

    pub fn implicit_marker(&self) -> Option<f64> {
        self.implicit_marker
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_ratings(&self) -> usize {
        self.ratings.len()
    }

    pub fn user_index(&self, id: &str) -> Option<u32> {
        self.users
            .binary_search_by(|u| u.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    pub fn item_index(&self, id: &str) -> Option<u32> {
        self.items
            .binary_search_by(|u| u.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    /// |I_u| for every user.
    pub fn profile_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.users.len()];
        for r in &self.ratings {
            sizes[r.user as usize] += 1;
        }
        sizes
    }

    /// |U_i| for every item.
    pub fn item_rater_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.items.len()];
        for r in &self.ratings {
            counts[r.item as usize] += 1;
        }
        counts
    }

    /// Contiguous slice of `ratings()` per user (ratings are user-sorted).
    pub fn user_spans(&self) -> Vec<std::ops::Range<usize>> {
        let mut spans = vec![0..0; self.users.len()];
        let mut start = 0;
        while start < self.ratings.len() {
            let u = self.ratings[start].user;
            let mut end = start;
            while end < self.ratings.len() && self.ratings[end].user == u {
                end += 1;
            }
            spans[u as usize] = start..end;
            start = end;
        }
        spans
    }

    /// Keeps the ratings selected by `keep` and drops users and items left
    /// without ratings. Indices are recomputed; identifiers keep their order.
    pub fn retain(&self, mut keep: impl FnMut(&Rating) -> bool) -> RatingDataset {
        let kept: Vec<Rating> = self.ratings.iter().copied().filter(|r| keep(r)).collect();
        let mut user_map = vec![u32::MAX; self.users.len()];
        let mut item_map = vec![u32::MAX; self.items.len()];
        for r in &kept {
            user_map[r.user as usize] = 0;
            item_map[r.item as usize] = 0;
        }
        let users = compact(&self.users, &mut user_map);
        let items = compact(&self.items, &mut item_map);
        let ratings = kept
            .into_iter()
            .map(|r| Rating {
                user: user_map[r.user as usize],
                item: item_map[r.item as usize],
                value: r.value,
            })
            .collect();
        RatingDataset {
            users,
            items,
            ratings,
            range: self.range,
            implicit_marker: self.implicit_marker,
        }
    }

    fn map_values(&self, range: RatingRange, f: impl Fn(&Rating) -> f64) -> RatingDataset {
        RatingDataset {
            users: self.users.clone(),
            items: self.items.clone(),
            ratings: self
                .ratings
                .iter()
                .map(|r| Rating { value: f(r), ..*r })
                .collect(),
            range,
            implicit_marker: None,
        }
    }
}

fn index_of(ids: &[String]) -> HashMap<&str, u32> {
    ids.iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect()
}

fn compact(ids: &[String], map: &mut [u32]) -> Vec<String> {
    let mut out = Vec::new();
    for (old, slot) in map.iter_mut().enumerate() {
        if *slot != u32::MAX {
            *slot = out.len() as u32;
            out.push(ids[old].clone());
        }
    }
    out
}

/// Column bindings and value constraints for a delimiter-separated rating file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub delimiter: u8,
    pub user_column: String,
    pub item_column: String,
    pub rating_column: String,
    pub rating_range: RatingRange,
    /// Implicit-feedback sentinel accepted even though it lies outside the range.
    pub implicit_marker: Option<f64>,
}

impl Schema {
    pub fn new(rating_range: RatingRange) -> Self {
        Self {
            delimiter: b',',
            user_column: "user_id".into(),
            item_column: "item_id".into(),
            rating_column: "rating".into(),
            rating_range,
            implicit_marker: None,
        }
    }
}

pub fn parse_ratings(path: impl AsRef<Path>, schema: &Schema) -> Result<RatingDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(std::io::BufReader::new(file), schema)
}

/// Parses ratings from any reader; see [`parse_ratings`].
pub fn read_ratings(reader: impl std::io::Read, schema: &Schema) -> Result<RatingDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (uc, ic, rc) = (
        col(&schema.user_column)?,
        col(&schema.item_column)?,
        col(&schema.rating_column)?,
    );
    let width = headers.len();
    let range = schema.rating_range;

    let mut users: Vec<String> = Vec::new();
    let mut items: Vec<String> = Vec::new();
    let mut user_ix: HashMap<String, u32> = HashMap::new();
    let mut item_ix: HashMap<String, u32> = HashMap::new();
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut raw: Vec<Rating> = Vec::new();

    for (row_no, rec) in rdr.records().enumerate() {
        let row = row_no + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(row + 1, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let user = &rec[uc];
        let item = &rec[ic];
        if user.is_empty() || item.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty user or item identifier".into(),
            });
        }
        let value: f64 = rec[rc].parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("rating `{}` is not a number", &rec[rc]),
        })?;
        let is_marker = schema.implicit_marker == Some(value);
        if !value.is_finite() || (!is_marker && !range.contains(value)) {
            return Err(Error::RatingOutOfRange {
                value,
                line,
                min: range.min,
                max: range.max,
            });
        }
        let u = intern(&mut users, &mut user_ix, user);
        let i = intern(&mut items, &mut item_ix, item);
        if seen.insert((u, i), row).is_some() {
            return Err(Error::DuplicatePair {
                user: user.to_string(),
                item: item.to_string(),
                row,
                line,
            });
        }
        raw.push(Rating { user: u, item: i, value });
    }
    if raw.is_empty() {
        return Err(Error::NoRatings);
    }

    // Re-intern in lexicographic order.
    let user_perm = sorted_permutation(&users);
    let item_perm = sorted_permutation(&items);
    let mut ratings: Vec<Rating> = raw
        .into_iter()
        .map(|r| Rating {
            user: user_perm[r.user as usize],
            item: item_perm[r.item as usize],
            value: r.value,
        })
        .collect();
    ratings.sort_by_key(|r| (r.user, r.item));
    users.sort();
    items.sort();
    Ok(RatingDataset {
        users,
        items,
        ratings,
        range,
        implicit_marker: schema.implicit_marker,
    })
}

fn intern(ids: &mut Vec<String>, ix: &mut HashMap<String, u32>, id: &str) -> u32 {
    if let Some(&i) = ix.get(id) {
        return i;
    }
    let i = ids.len() as u32;
    ids.push(id.to_string());
    ix.insert(id.to_string(), i);
    i
}

/// Maps each old index to its rank in sorted order.
fn sorted_permutation(ids: &[String]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut perm = vec![0u32; ids.len()];
    for (rank, old) in order.into_iter().enumerate() {
        perm[old] = rank as u32;
    }
    perm
}

/// Keeps users whose profile size lies in `min_ratings..=max_ratings`.
/// Pass `usize::MAX` as the upper bound for "no limit".
pub fn filter_users(
    ds: &RatingDataset,
    min_ratings: usize,
    max_ratings: usize,
) -> Result<RatingDataset> {
    if min_ratings < 1 || max_ratings < min_ratings {
        return Err(Error::invalid(format!(
            "filter bounds ({min_ratings}, {max_ratings}) need 1 <= min <= max"
        )));
    }
    let sizes = ds.profile_sizes();
    Ok(ds.retain(|r| {
        let n = sizes[r.user as usize];
        n >= min_ratings && n <= max_ratings
    }))
}

/// Replaces every rating equal to `implicit_marker` with `fill_value`.
pub fn convert_implicit(
    ds: &RatingDataset,
    implicit_marker: f64,
    fill_value: f64,
) -> Result<RatingDataset> {
    if !ds.range.contains(fill_value) {
        return Err(Error::invalid(format!(
            "fill value {fill_value} outside rating range [{}, {}]",
            ds.range.min, ds.range.max
        )));
    }
    Ok(ds.map_values(ds.range, |r| {
        if r.value == implicit_marker {
            fill_value
        } else {
            r.value
        }
    }))
}

/// Per-user linear rescaling of positive play counts onto `target`.
///
/// A user's smallest count maps to `target.min` and largest to `target.max`.
/// Users whose counts are all equal map every item to `target.max`.
pub fn scale_playcounts(ds: &RatingDataset, target: RatingRange) -> Result<RatingDataset> {
    if target.min >= target.max {
        return Err(Error::invalid("target range needs min < max"));
    }
    if let Some(r) = ds.ratings.iter().find(|r| r.value.is_nan() || r.value <= 0.0) {
        return Err(Error::invalid(format!(
            "play count {} for user `{}` is not positive",
            r.value, ds.users[r.user as usize]
        )));
    }
    let mut lo = vec![f64::INFINITY; ds.n_users()];
    let mut hi = vec![f64::NEG_INFINITY; ds.n_users()];
    for r in &ds.ratings {
        let u = r.user as usize;
        lo[u] = lo[u].min(r.value);
        hi[u] = hi[u].max(r.value);
    }
    let width = target.max - target.min;
    Ok(ds.map_values(target, |r| {
        let (l, h) = (lo[r.user as usize], hi[r.user as usize]);
        if h == l {
            target.max
        } else {
            let v = target.min + (r.value - l) / (h - l) * width;
            target.clamp(v)
        }
    }))
}

/// Table-1 style dataset statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    pub ratings_per_user: f64,
    pub ratings_per_item: f64,
    /// 1 - |R| / (|U| x |I|). Note this is the complement of the density.
    pub sparsity: f64,
    pub rating_range: RatingRange,
}

pub fn dataset_stats(ds: &RatingDataset) -> Result<DatasetStats> {
    if ds.n_users() == 0 || ds.n_items() == 0 {
        return Err(Error::degenerate("dataset has no users or no items"));
    }
    let (nu, ni, nr) = (ds.n_users(), ds.n_items(), ds.n_ratings());
    Ok(DatasetStats {
        n_users: nu,
        n_items: ni,
        n_ratings: nr,
        ratings_per_user: nr as f64 / nu as f64,
        ratings_per_item: nr as f64 / ni as f64,
        sparsity: 1.0 - nr as f64 / (nu as f64 * ni as f64),
        rating_range: ds.range,
    })
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>8} {:>10} {:>12} {:>8} {:>8} {:>9}  R-range",
            "|U|", "|I|", "|R|", "|R|/|U|", "|R|/|I|", "sparsity"
        )?;
        write!(
            f,
            "{:>8} {:>10} {:>12} {:>8.0} {:>8.0} {:>9.3}  [{}-{}]",
            self.n_users,
            self.n_items,
            self.n_ratings,
            self.ratings_per_user,
            self.ratings_per_item,
            self.sparsity,
            self.rating_range.min,
            self.rating_range.max
        )
    }
}

/// Writes the canonical `user_id,item_id,rating` dump.
pub fn write_dataset(ds: &RatingDataset, out: impl Write, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(["user_id", "item_id", "rating"])?;
    for r in &ds.ratings {
        w.write_record([
            ds.users[r.user as usize].as_str(),
            ds.items[r.item as usize].as_str(),
            &r.value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<dataset dump>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(a: f64, b: f64) -> RatingRange {
        RatingRange::new(a, b).unwrap()
    }

    fn parse_str(text: &str, schema: &Schema) -> Result<RatingDataset> {
        read_ratings(text.as_bytes(), schema)
    }

    #[test]
    fn parses_three_rows() {
        let ds = parse_str(
            "user_id,item_id,rating\nu1,i1,4\nu1,i2,5\nu2,i1,3\n",
            &Schema::new(range(1.0, 5.0)),
        )
        .unwrap();
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_items(), 2);
        assert_eq!(ds.n_ratings(), 3);
    }

    #[test]
    fn empty_data_section_is_an_error() {
        let err = parse_str("user_id,item_id,rating\n", &Schema::new(range(1.0, 5.0)));
        assert!(matches!(err, Err(Error::NoRatings)));
        assert_eq!(err.unwrap_err().to_string(), "no ratings");
    }

    #[test]
    fn duplicate_pair_names_second_row() {
        let err = parse_str(
            "user_id,item_id,rating\nu1,i1,4\nu1,i1,4\n",
            &Schema::new(range(1.0, 5.0)),
        )
        .unwrap_err();
        match err {
            Error::DuplicatePair { row, line, .. } => {
                assert_eq!(row, 2);
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_and_out_of_range_rows() {
        let schema = Schema::new(range(1.0, 5.0));
        let err = parse_str("user_id,item_id,rating\nu1,i1,x\n", &schema).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err}");
        let err = parse_str("user_id,item_id,rating\nu1,i1,4\nu2,i1\n", &schema).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = parse_str("user_id,item_id,rating\nu1,i1,6\n", &schema).unwrap_err();
        assert!(matches!(err, Error::RatingOutOfRange { line: 2, .. }), "{err}");
        let err = parse_str("user,item_id,rating\nu1,i1,4\n", &schema).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_ratings("/nonexistent/ratings.csv", &Schema::new(range(1.0, 5.0)));
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn custom_schema_and_delimiter() {
        let mut schema = Schema::new(range(1.0, 10.0));
        schema.delimiter = b'\t';
        schema.user_column = "uid".into();
        schema.item_column = "isbn".into();
        schema.rating_column = "score".into();
        schema.implicit_marker = Some(0.0);
        let ds = parse_str("score\tuid\tisbn\n0\ta\tb1\n7\ta\tb2\n", &schema).unwrap();
        assert_eq!(ds.n_ratings(), 2);
        assert_eq!(ds.implicit_marker(), Some(0.0));
        let converted = convert_implicit(&ds, 0.0, 5.0).unwrap();
        let values: Vec<f64> = converted.ratings().iter().map(|r| r.value).collect();
        assert_eq!(values, vec![5.0, 7.0]);
    }

    fn with_profile_sizes(sizes: &[usize]) -> RatingDataset {
        let mut triples = Vec::new();
        for (u, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                triples.push((format!("u{u}"), format!("i{i:05}"), 3.0));
            }
        }
        RatingDataset::from_triples(triples, range(1.0, 5.0)).unwrap()
    }

    #[test]
    fn filter_keeps_inclusive_bounds() {
        let ds = with_profile_sizes(&[49, 50, 2000, 2001]);
        let out = filter_users(&ds, 50, 2000).unwrap();
        assert_eq!(out.users(), &["u1".to_string(), "u2".to_string()]);
        assert_eq!(out.n_ratings(), 2050);
        assert_eq!(out.n_items(), 2000);
    }

    #[test]
    fn filter_identity_and_empty() {
        let ds = with_profile_sizes(&[1, 3, 7]);
        assert_eq!(filter_users(&ds, 1, usize::MAX).unwrap(), ds);
        let empty = filter_users(&ds, 100, 200).unwrap();
        assert_eq!(empty.n_users(), 0);
        assert_eq!(empty.n_items(), 0);
        assert!(filter_users(&ds, 0, 5).is_err());
        assert!(filter_users(&ds, 5, 4).is_err());
    }

    #[test]
    fn filter_drops_orphaned_items() {
        let ds = RatingDataset::from_triples(
            [("a", "x", 1.0), ("a", "y", 2.0), ("b", "z", 3.0)],
            range(1.0, 5.0),
        )
        .unwrap();
        let out = filter_users(&ds, 2, 10).unwrap();
        assert_eq!(out.items(), &["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn implicit_conversion() {
        let mut schema = Schema::new(range(1.0, 10.0));
        schema.implicit_marker = Some(0.0);
        let ds = parse_str("user_id,item_id,rating\nu,i,0\nu,j,8\n", &schema).unwrap();
        let out = convert_implicit(&ds, 0.0, 5.0).unwrap();
        assert_eq!(out.ratings()[0].value, 5.0);
        assert_eq!(out.ratings()[1].value, 8.0);
        assert_eq!(out.implicit_marker(), None);

        let plain = RatingDataset::from_triples([("u", "i", 3.0)], range(1.0, 10.0)).unwrap();
        assert_eq!(convert_implicit(&plain, 0.0, 5.0).unwrap(), plain);
        assert!(convert_implicit(&plain, 0.0, 11.0).is_err());
    }

    #[test]
    fn playcount_scaling() {
        let counts = range(1.0, 1e12);
        let ds = RatingDataset::from_triples(
            [
                ("a", "x", 1.0),
                ("a", "y", 500.0),
                ("b", "x", 10.0),
                ("b", "y", 10.0),
                ("c", "x", 1.0),
                ("c", "y", 2.0),
                ("c", "z", 3.0),
            ],
            counts,
        )
        .unwrap();
        let out = scale_playcounts(&ds, range(1.0, 1000.0)).unwrap();
        let v: Vec<f64> = out.ratings().iter().map(|r| r.value).collect();
        assert_eq!(v, vec![1.0, 1000.0, 1000.0, 1000.0, 1.0, 500.5, 1000.0]);
        assert_eq!(out.rating_range(), range(1.0, 1000.0));
    }

    #[test]
    fn playcount_scaling_rejects_non_positive() {
        let ds = RatingDataset::from_triples([("a", "x", 0.0)], range(0.0, 10.0)).unwrap();
        assert!(scale_playcounts(&ds, range(1.0, 1000.0)).is_err());
    }

    #[test]
    fn stats_of_small_dataset() {
        let ds = parse_str(
            "user_id,item_id,rating\nu1,i1,4\nu1,i2,5\nu2,i1,3\n",
            &Schema::new(range(1.0, 5.0)),
        )
        .unwrap();
        let s = dataset_stats(&ds).unwrap();
        assert_eq!(s.sparsity, 0.25);
        assert_eq!(s.ratings_per_user, 1.5);
        let empty = filter_users(&ds, 10, 20).unwrap();
        assert!(dataset_stats(&empty).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let ds = RatingDataset::from_triples(
            [("b", "x", 2.5), ("a", "y", 1.0), ("a", "x", 4.0)],
            range(1.0, 5.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf, b',').unwrap();
        let back = read_ratings(buf.as_slice(), &Schema::new(range(1.0, 5.0))).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn entities_without_ratings_are_kept() {
        let ds = RatingDataset::with_entities(
            ["z"],
            ["unrated"],
            [("a", "x", 1.0)],
            range(1.0, 5.0),
        )
        .unwrap();
        assert_eq!(ds.n_users(), 2);
        assert_eq!(ds.n_items(), 2);
        assert_eq!(ds.item_index("unrated"), Some(0));
    }
}
