//! MovieLens-100K file formats.
//!
//! `u.data` is tab separated (`user item rating timestamp`); `u.user` and
//! `u.item` are pipe separated ISO-8859-1 text. Every parser takes the file
//! name (for error messages) and the raw bytes so it can be driven directly
//! from a fuzzer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive bounds of the explicit rating scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub const MOVIELENS: RatingScale = RatingScale { min: 1.0, max: 5.0 };

    pub fn contains(&self, r: f64) -> bool {
        r >= self.min && r <= self.max
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.min, self.max)
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self::MOVIELENS
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user_id: u32,
    pub item_id: u32,
    pub rating: f64,
    /// Carried through from the file, never used as a feature.
    pub timestamp: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: u32,
    pub age: u32,
    pub gender: Gender,
    pub occupation: String,
    pub zip: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemProfile {
    pub item_id: u32,
    pub release_year: Option<i32>,
    pub genres: Vec<bool>,
}

/// Ratings plus user and item attribute tables, in file order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawDataset {
    pub ratings: Vec<RatingRecord>,
    pub users: BTreeMap<u32, UserProfile>,
    pub items: BTreeMap<u32, ItemProfile>,
    /// Occupation vocabulary in one-hot column order.
    pub occupations: Vec<String>,
    /// Genre names in flag order.
    pub genres: Vec<String>,
    pub scale: RatingScale,
}

/// ISO-8859-1 maps each byte to the code point of the same value.
pub fn decode_latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn positive_id(file: &str, line: usize, field: &str, what: &str) -> Result<u32> {
    let id: u32 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(file, line, format!("{what} {field:?} is not an integer")))?;
    if id == 0 {
        return Err(Error::parse(file, line, format!("{what} must be positive")));
    }
    Ok(id)
}

/// Parses `u.data`.
pub fn parse_ratings(file: &str, bytes: &[u8], scale: RatingScale) -> Result<Vec<RatingRecord>> {
    let text = decode_latin1(bytes);
    let mut out = Vec::new();
    for (line, row) in lines(&text) {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                file,
                line,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let user_id = positive_id(file, line, fields[0], "user id")?;
        let item_id = positive_id(file, line, fields[1], "item id")?;
        let rating: f64 = fields[2].trim().parse().map_err(|_| {
            Error::parse(
                file,
                line,
                format!("rating {:?} is not a number", fields[2]),
            )
        })?;
        if !rating.is_finite() || !scale.contains(rating) {
            return Err(Error::parse(
                file,
                line,
                format!(
                    "rating {rating} out of scale [{}, {}]",
                    scale.min, scale.max
                ),
            ));
        }
        let timestamp: i64 = fields[3].trim().parse().map_err(|_| {
            Error::parse(
                file,
                line,
                format!("timestamp {:?} is not an integer", fields[3]),
            )
        })?;
        out.push(RatingRecord {
            user_id,
            item_id,
            rating,
            timestamp,
        });
    }
    if out.is_empty() {
        return Err(Error::NoRatings(file.to_string()));
    }
    Ok(out)
}

/// Parses `u.user`. With a vocabulary, occupations outside it are rejected.
pub fn parse_users(
    file: &str,
    bytes: &[u8],
    occupations: Option<&[String]>,
) -> Result<Vec<UserProfile>> {
    let text = decode_latin1(bytes);
    let mut out = Vec::new();
    for (line, row) in lines(&text) {
        let fields: Vec<&str> = row.split('|').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                file,
                line,
                format!("expected 5 pipe-separated fields, found {}", fields.len()),
            ));
        }
        let user_id = positive_id(file, line, fields[0], "user id")?;
        let age: u32 = fields[1].trim().parse().map_err(|_| {
            Error::parse(file, line, format!("age {:?} is not an integer", fields[1]))
        })?;
        if age == 0 {
            return Err(Error::parse(file, line, "age must be positive"));
        }
        let gender = match fields[2].trim() {
            "M" => Gender::M,
            "F" => Gender::F,
            other => {
                return Err(Error::parse(
                    file,
                    line,
                    format!("unknown gender {other:?}"),
                ))
            }
        };
        let occupation = fields[3].trim().to_string();
        if let Some(vocab) = occupations {
            if !vocab.contains(&occupation) {
                return Err(Error::parse(
                    file,
                    line,
                    format!("occupation {occupation:?} not in vocabulary"),
                ));
            }
        }
        out.push(UserProfile {
            user_id,
            age,
            gender,
            occupation,
            zip: fields[4].trim().to_string(),
        });
    }
    Ok(out)
}

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// `"01-Jan-1995"` → 1995; an empty field is a missing date.
pub fn parse_release_year(date: &str) -> std::result::Result<Option<i32>, String> {
    let date = date.trim();
    if date.is_empty() {
        return Ok(None);
    }
    let parts: Vec<&str> = date.split('-').collect();
    if parts.len() != 3 {
        return Err(format!("release date {date:?} is not DD-Mon-YYYY"));
    }
    let day: u32 = parts[0]
        .parse()
        .map_err(|_| format!("bad day in {date:?}"))?;
    if !(1..=31).contains(&day) || !MONTHS.contains(&parts[1]) {
        return Err(format!("bad day or month in {date:?}"));
    }
    if parts[2].len() != 4 {
        return Err(format!("bad year in {date:?}"));
    }
    let year: i32 = parts[2]
        .parse()
        .map_err(|_| format!("bad year in {date:?}"))?;
    Ok(Some(year))
}

/// Parses `u.item`: `id|title|release date|video date|url|flag...`.
///
/// Without an expected genre count the first row fixes it.
pub fn parse_items(file: &str, bytes: &[u8], n_genres: Option<usize>) -> Result<Vec<ItemProfile>> {
    let text = decode_latin1(bytes);
    let mut expected = n_genres;
    let mut out = Vec::new();
    for (line, row) in lines(&text) {
        let fields: Vec<&str> = row.split('|').collect();
        if fields.len() < 6 {
            return Err(Error::parse(
                file,
                line,
                format!(
                    "expected at least 6 pipe-separated fields, found {}",
                    fields.len()
                ),
            ));
        }
        let item_id = positive_id(file, line, fields[0], "item id")?;
        let release_year =
            parse_release_year(fields[2]).map_err(|m| Error::parse(file, line, m))?;
        let flags = &fields[5..];
        let width = *expected.get_or_insert(flags.len());
        if flags.len() != width {
            return Err(Error::parse(
                file,
                line,
                format!("expected {width} genre flags, found {}", flags.len()),
            ));
        }
        let genres = flags
            .iter()
            .map(|f| match f.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(
                    file,
                    line,
                    format!("genre flag {other:?} is not 0/1"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ItemProfile {
            item_id,
            release_year,
            genres,
        });
    }
    Ok(out)
}

/// Parses `u.occupation` (one name per line) or `u.genre` (`name|index`).
pub fn parse_vocabulary(file: &str, bytes: &[u8]) -> Result<Vec<String>> {
    let text = decode_latin1(bytes);
    let mut out: Vec<String> = Vec::new();
    for (line, row) in lines(&text) {
        let name = row.split('|').next().unwrap_or("").trim().to_string();
        if out.contains(&name) {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate entry {name:?}"),
            ));
        }
        out.push(name);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>> {
    match std::fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

impl RawDataset {
    /// Assembles a dataset from parsed tables and checks referential integrity.
    pub fn from_parts(
        ratings: Vec<RatingRecord>,
        users: Vec<UserProfile>,
        items: Vec<ItemProfile>,
        occupations: Vec<String>,
        genres: Vec<String>,
        scale: RatingScale,
    ) -> Result<Self> {
        if ratings.is_empty() {
            return Err(Error::NoRatings("ratings".into()));
        }
        let mut user_map = BTreeMap::new();
        for u in users {
            if !occupations.contains(&u.occupation) {
                return Err(Error::Invalid(format!(
                    "user {} has occupation {:?} outside the vocabulary",
                    u.user_id, u.occupation
                )));
            }
            let id = u.user_id;
            if user_map.insert(id, u).is_some() {
                return Err(Error::Invalid(format!("duplicate user {id}")));
            }
        }
        let mut item_map = BTreeMap::new();
        for it in items {
            if it.genres.len() != genres.len() {
                return Err(Error::Invalid(format!(
                    "item {} has {} genre flags, vocabulary has {}",
                    it.item_id,
                    it.genres.len(),
                    genres.len()
                )));
            }
            let id = it.item_id;
            if item_map.insert(id, it).is_some() {
                return Err(Error::Invalid(format!("duplicate item {id}")));
            }
        }
        for (k, r) in ratings.iter().enumerate() {
            if !user_map.contains_key(&r.user_id) {
                return Err(Error::Invalid(format!(
                    "rating {} references unknown user {}",
                    k + 1,
                    r.user_id
                )));
            }
            if !item_map.contains_key(&r.item_id) {
                return Err(Error::Invalid(format!(
                    "rating {} references unknown item {}",
                    k + 1,
                    r.item_id
                )));
            }
        }
        Ok(Self {
            ratings,
            users: user_map,
            items: item_map,
            occupations,
            genres,
            scale,
        })
    }

    pub fn n_ratings(&self) -> usize {
        self.ratings.len()
    }
}

/// Loads `u.data`, `u.user` and `u.item` from a MovieLens-100K directory.
///
/// `u.occupation` and `u.genre` are used for the vocabularies when present;
/// otherwise occupations are the sorted distinct values of `u.user` and genres
/// are named by position.
pub fn load_movielens(dir: &Path, scale: RatingScale) -> Result<RawDataset> {
    let occupations = match read_optional(&dir.join("u.occupation"))? {
        Some(b) => Some(parse_vocabulary("u.occupation", &b)?),
        None => None,
    };
    let genre_names = match read_optional(&dir.join("u.genre"))? {
        Some(b) => Some(parse_vocabulary("u.genre", &b)?),
        None => None,
    };
    let ratings = parse_ratings("u.data", &read(&dir.join("u.data"))?, scale)?;
    let users = parse_users(
        "u.user",
        &read(&dir.join("u.user"))?,
        occupations.as_deref(),
    )?;
    let items = parse_items(
        "u.item",
        &read(&dir.join("u.item"))?,
        genre_names.as_ref().map(|g| g.len()),
    )?;
    let occupations = occupations.unwrap_or_else(|| {
        let mut v: Vec<String> = users.iter().map(|u| u.occupation.clone()).collect();
        v.sort();
        v.dedup();
        v
    });
    let genres = genre_names.unwrap_or_else(|| {
        (0..items.first().map_or(0, |i| i.genres.len()))
            .map(|k| format!("genre{k}"))
            .collect()
    });
    let ds = RawDataset::from_parts(ratings, users, items, occupations, genres, scale)?;
    log::info!(
        "loaded {} ratings, {} users, {} items from {}",
        ds.ratings.len(),
        ds.users.len(),
        ds.items.len(),
        dir.display()
    );
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_scale_rating_is_rejected() {
        let err = parse_ratings("u.data", b"1\t5\t9\t0\n", RatingScale::MOVIELENS).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("u.data:1"), "{msg}");
        assert!(msg.contains("out of scale"), "{msg}");
    }

    #[test]
    fn empty_ratings_file() {
        let err = parse_ratings("u.data", b"\n\n", RatingScale::MOVIELENS).unwrap_err();
        assert!(err.to_string().contains("no rating records"));
    }

    #[test]
    fn malformed_row_names_line() {
        let err =
            parse_ratings("u.data", b"1\t2\t3\t4\n1\t2\t3\n", RatingScale::MOVIELENS).unwrap_err();
        assert!(err.to_string().starts_with("u.data:2:"), "{err}");
        let err = parse_ratings("u.data", b"0\t2\t3\t4\n", RatingScale::MOVIELENS).unwrap_err();
        assert!(err.to_string().contains("positive"));
    }

    #[test]
    fn parses_user_and_item_rows() {
        let users = parse_users(
            "u.user",
            b"1|24|M|technician|85711\n2|53|F|other|94043\n",
            None,
        )
        .unwrap();
        assert_eq!(users[1].gender, Gender::F);
        assert_eq!(users[0].zip, "85711");
        let err = parse_users("u.user", b"1|0|M|technician|85711\n", None).unwrap_err();
        assert!(err.to_string().contains("age"));
        let vocab = vec!["other".to_string()];
        assert!(parse_users("u.user", b"1|24|M|technician|85711\n", Some(&vocab)).is_err());

        let items = parse_items(
            "u.item",
            b"1|Toy Story (1995)|01-Jan-1995||http://x|0|0|1\n267|unknown|||http://x|1|0|0\n",
            None,
        )
        .unwrap();
        assert_eq!(items[0].release_year, Some(1995));
        assert_eq!(items[1].release_year, None);
        assert_eq!(items[0].genres, vec![false, false, true]);
        let err = parse_items(
            "u.item",
            b"1|T|01-Jan-1995||u|0|1\n2|T|01-Jan-1995||u|0\n",
            None,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("u.item:2:"));
    }

    #[test]
    fn release_dates() {
        assert_eq!(parse_release_year("01-Jan-1995"), Ok(Some(1995)));
        assert_eq!(parse_release_year(""), Ok(None));
        assert!(parse_release_year("1995").is_err());
        assert!(parse_release_year("01-Foo-1995").is_err());
    }

    #[test]
    fn latin1_titles_decode() {
        assert_eq!(decode_latin1(&[0x41, 0xe9]), "Aé");
    }

    #[test]
    fn missing_file_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_movielens(dir.path(), RatingScale::MOVIELENS).unwrap_err();
        assert!(err.to_string().contains("u.data"), "{err}");
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let ratings = vec![RatingRecord {
            user_id: 7,
            item_id: 1,
            rating: 3.0,
            timestamp: 0,
        }];
        let err = RawDataset::from_parts(
            ratings,
            vec![],
            vec![],
            vec![],
            vec![],
            RatingScale::MOVIELENS,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown user 7"));
    }
}
