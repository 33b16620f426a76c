//! A small synthetic MovieLens-format dataset written to a temporary directory.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root().join("ml")
    }

    pub fn income_csv(&self) -> PathBuf {
        self.root().join("income.csv")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.root().join("out")
    }

    /// Config text pointing at the fixture, followed by `extra`.
    pub fn config(&self, extra: &str) -> String {
        format!(
            "data_dir = {}\nincome_csv = {}\nout = {}\nfolds = 3\njobs = 1\nselector.inner_folds = 2\n{extra}",
            self.data_dir().display(),
            self.income_csv().display(),
            self.out_dir().display(),
        )
    }
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    fn unit(&mut self) -> f64 {
        self.next() as f64 / (1u64 << 31) as f64
    }
}

pub const N_USERS: u32 = 40;
pub const N_ITEMS: u32 = 30;
const OCCUPATIONS: [&str; 4] = ["engineer", "student", "writer", "other"];
const ZIPS: [&str; 5] = ["01002", "10001", "94043", "55455", "9999X"];

/// `u.data`, `u.user`, `u.item` with user and item biases plus noise.
pub fn write_dataset(dir: &Path, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = Lcg(seed);
    let mut users = String::new();
    let mut ubias = Vec::new();
    for u in 1..=N_USERS {
        let age = 18 + rng.next() % 50;
        let g = if rng.next().is_multiple_of(2) { "M" } else { "F" };
        let occ = OCCUPATIONS[(rng.next() % 4) as usize];
        let zip = ZIPS[(u as usize) % ZIPS.len()];
        writeln!(users, "{u}|{age}|{g}|{occ}|{zip}").unwrap();
        ubias.push(rng.unit() * 1.6 - 0.8);
    }
    let mut items = String::new();
    let mut ibias = Vec::new();
    for i in 1..=N_ITEMS {
        let year = 1960 + rng.next() % 38;
        let date = if i == 7 {
            String::new()
        } else {
            format!("01-Jan-{year}")
        };
        let flags: Vec<&str> = (0..19)
            .map(|g| if (i as usize + g).is_multiple_of(5) { "1" } else { "0" })
            .collect();
        writeln!(
            items,
            "{i}|Film {i} ({year})|{date}||http://example.org/|{}",
            flags.join("|")
        )
        .unwrap();
        ibias.push(rng.unit() * 2.0 - 1.0);
    }
    let mut data = String::new();
    let mut ts = 880_000_000u64;
    for u in 1..=N_USERS {
        for i in 1..=N_ITEMS {
            if !rng.next().is_multiple_of(3) {
                continue;
            }
            let noise = rng.unit() - 0.5;
            let r = (3.4 + ubias[(u - 1) as usize] + ibias[(i - 1) as usize] + noise)
                .round()
                .clamp(1.0, 5.0);
            ts += 1 + rng.next() % 1000;
            writeln!(data, "{u}\t{i}\t{r}\t{ts}").unwrap();
        }
    }
    std::fs::write(dir.join("u.user"), users).unwrap();
    std::fs::write(dir.join("u.item"), items).unwrap();
    std::fs::write(dir.join("u.data"), data).unwrap();
}

pub fn write_income(path: &Path) {
    std::fs::write(
        path,
        "zip,income\n01002,54129\n10001,88000\n94043,102000\n55455,43000\n",
    )
    .unwrap();
}

pub fn fixture() -> Fixture {
    let f = Fixture {
        dir: tempfile::tempdir().unwrap(),
    };
    write_dataset(&f.data_dir(), 7);
    write_income(&f.income_csv());
    f
}
