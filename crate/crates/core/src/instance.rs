//! Random ATSP cost matrices.
//!
//! Off-diagonal entries live in `[0, 1]`; the diagonal is an excluded edge
//! set, not a large cost. Entries are drawn from a SplitMix64 stream in
//! row-major order, skipping the diagonal. A draw `x` becomes the real
//! `(x >> 11) * 2^-53`, so any implementation of SplitMix64 reproduces the
//! same matrix from `(n, seed, generator_id)`.
//!
//! On disk a matrix is one JSON header line followed by `n` CSV rows, with
//! `inf` on the diagonal and every entry written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::RngCore;
use rand_xoshiro::SplitMix64;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Edge;

pub const MIN_VERTICES: usize = 3;
pub const FILE_FORMAT: &str = "atsp-cost-matrix/1";
pub const GENERATOR_UNIFORM: &str = "splitmix64/uniform";
pub const GENERATOR_INT_PREFIX: &str = "splitmix64/int-scaled/L=";
pub const GENERATOR_EXPLICIT: &str = "explicit";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    n: usize,
    seed: Option<u64>,
    generator_id: String,
    /// Row-major, `INFINITY` on the diagonal.
    entries: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    n: usize,
    seed: Option<u64>,
    generator_id: String,
}

/// Maps a raw 64-bit draw onto `[0, 1)` using its top 53 bits.
pub fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl CostMatrix {
    pub fn generate_uniform(n: usize, seed: u64) -> Result<Self> {
        check_size(n)?;
        let mut rng = SplitMix64::seed_from_u64(seed);
        let entries = fill(n, || unit_interval(rng.next_u64()));
        Ok(Self {
            n,
            seed: Some(seed),
            generator_id: GENERATOR_UNIFORM.to_string(),
            entries,
        })
    }

    /// Entries `k / L` with `k` uniform on `{0, ..., L}`.
    pub fn generate_integer_scaled(n: usize, range: u64, seed: u64) -> Result<Self> {
        check_size(n)?;
        if range == 0 {
            return Err(Error::InvalidRange);
        }
        let mut rng = SplitMix64::seed_from_u64(seed);
        let levels = (range + 1) as f64;
        let entries = fill(n, || {
            let k = ((unit_interval(rng.next_u64()) * levels) as u64).min(range);
            k as f64 / range as f64
        });
        Ok(Self {
            n,
            seed: Some(seed),
            generator_id: format!("{GENERATOR_INT_PREFIX}{range}"),
            entries,
        })
    }

    /// Rebuilds a generated matrix from its self-describing metadata.
    pub fn regenerate(n: usize, seed: u64, generator_id: &str) -> Result<Self> {
        if generator_id == GENERATOR_UNIFORM {
            return Self::generate_uniform(n, seed);
        }
        if let Some(range) = generator_id.strip_prefix(GENERATOR_INT_PREFIX) {
            let range = range
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad generator id {generator_id:?}")))?;
            return Self::generate_integer_scaled(n, range, seed);
        }
        Err(Error::InvalidInput(format!(
            "generator {generator_id:?} cannot be regenerated"
        )))
    }

    /// Builds a matrix from explicit rows. Diagonal values are ignored.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        check_size(n)?;
        let mut entries = vec![f64::INFINITY; n * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &value) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                check_entry(i, j, value)?;
                entries[i * n + j] = value;
            }
        }
        Ok(Self {
            n,
            seed: None,
            generator_id: GENERATOR_EXPLICIT.to_string(),
            entries,
        })
    }

    /// Every off-diagonal entry equal to `value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        check_size(n)?;
        check_entry(0, 1, value)?;
        let entries = fill(n, || value);
        Ok(Self {
            n,
            seed: None,
            generator_id: GENERATOR_EXPLICIT.to_string(),
            entries,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }

    /// Cost of edge `(i, j)`; `None` on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i != j).then(|| self.entries[i * self.n + j])
    }

    /// Cost of edge `(i, j)`, with `f64::INFINITY` as the diagonal sentinel.
    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn edge_cost(&self, (i, j): Edge) -> f64 {
        self.cost(i, j)
    }

    /// Cost of the successor map `perm` (row `i` goes to column `perm[i]`),
    /// summed in row order. All components use this so that equal
    /// matchings always compare equal.
    pub fn permutation_cost(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.cost(i, j)).sum()
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| j != i)
                .map(move |j| self.cost(i, j))
        })
    }

    pub fn to_file_string(&self) -> String {
        let header = Header {
            format: FILE_FORMAT.to_string(),
            n: self.n,
            seed: self.seed,
            generator_id: self.generator_id.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(',');
                }
                if i == j {
                    out.push_str("inf");
                } else {
                    write!(out, "{}", format_real(self.cost(i, j))).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header_line = lines.next().ok_or_else(|| parse_error(1, "header", "empty file"))?;
        let header: Header = serde_json::from_str(header_line)
            .map_err(|e| parse_error(1, "header", &e.to_string()))?;
        if header.format != FILE_FORMAT {
            return Err(parse_error(
                1,
                "format",
                &format!("expected {FILE_FORMAT:?}, found {:?}", header.format),
            ));
        }
        let n = header.n;
        check_size(n)?;
        let mut entries = vec![f64::INFINITY; n * n];
        for i in 0..n {
            let line_no = i + 2;
            let line = lines
                .next()
                .ok_or_else(|| parse_error(line_no, "row", &format!("missing row {i}")))?;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n {
                return Err(parse_error(
                    line_no,
                    "row",
                    &format!("expected {n} fields, found {}", fields.len()),
                ));
            }
            for (j, field) in fields.iter().enumerate() {
                if i == j {
                    if *field != "inf" {
                        return Err(parse_error(
                            line_no,
                            &format!("column {j}"),
                            "diagonal entry must be \"inf\"",
                        ));
                    }
                    continue;
                }
                let value: f64 = field.parse().map_err(|_| {
                    parse_error(line_no, &format!("column {j}"), &format!("not a number: {field:?}"))
                })?;
                check_entry(i, j, value)?;
                entries[i * n + j] = value;
            }
        }
        if let Some((k, extra)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
            return Err(parse_error(n + 2 + k, "row", &format!("unexpected trailing data {extra:?}")));
        }
        Ok(Self {
            n,
            seed: header.seed,
            generator_id: header.generator_id,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Formats a real with 17 significant digits, which round-trips binary64.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn fill(n: usize, mut draw: impl FnMut() -> f64) -> Vec<f64> {
    let mut entries = vec![f64::INFINITY; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                entries[i * n + j] = draw();
            }
        }
    }
    entries
}

fn check_size(n: usize) -> Result<()> {
    if n < MIN_VERTICES {
        return Err(Error::InvalidSize { n, min: MIN_VERTICES });
    }
    Ok(())
}

fn check_entry(row: usize, col: usize, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange { row, col, value });
    }
    Ok(())
}

fn parse_error(line: usize, field: &str, message: &str) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_uniform_has_excluded_diagonal() {
        let c = CostMatrix::generate_uniform(3, 1).unwrap();
        assert_eq!(c.n(), 3);
        assert_eq!(c.off_diagonal().count(), 6);
        for i in 0..3 {
            assert_eq!(c.get(i, i), None);
            assert!(c.cost(i, i).is_infinite());
        }
        assert!(c.off_diagonal().all(|x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = CostMatrix::generate_uniform(5, 7).unwrap();
        let b = CostMatrix::generate_uniform(5, 7).unwrap();
        assert_eq!(a, b);
        let c = CostMatrix::regenerate(5, 7, a.generator_id()).unwrap();
        assert_eq!(a, c);
        assert_ne!(a, CostMatrix::generate_uniform(5, 8).unwrap());
    }

    #[test]
    fn splitmix_stream_is_the_reference_one() {
        // First outputs of SplitMix64 seeded with 0 (reference C implementation).
        let mut rng = SplitMix64::seed_from_u64(0);
        assert_eq!(rng.next_u64(), 0xe220a8397b1dcdaf);
        assert_eq!(rng.next_u64(), 0x6e789e6aa1b965f4);
        let c = CostMatrix::generate_uniform(3, 0).unwrap();
        assert_eq!(c.cost(0, 1), unit_interval(0xe220a8397b1dcdaf));
        assert_eq!(c.cost(0, 2), unit_interval(0x6e789e6aa1b965f4));
    }

    #[test]
    fn large_uniform_mean_is_near_half() {
        let c = CostMatrix::generate_uniform(400, 3).unwrap();
        let mean = c.off_diagonal().sum::<f64>() / (400.0 * 399.0);
        assert!((0.48..=0.52).contains(&mean), "mean {mean}");
    }

    #[test]
    fn integer_scaled_entries_are_quantized() {
        let c = CostMatrix::generate_integer_scaled(4, 1, 2).unwrap();
        assert!(c.off_diagonal().all(|x| x == 0.0 || x == 1.0));
        let c = CostMatrix::generate_integer_scaled(3, 10, 5).unwrap();
        for x in c.off_diagonal() {
            let k = x * 10.0;
            assert!((k - k.round()).abs() < 1e-12, "{x} is not a multiple of 0.1");
        }
        assert!(matches!(
            CostMatrix::generate_integer_scaled(4, 0, 1),
            Err(Error::InvalidRange)
        ));
        let again = CostMatrix::regenerate(3, 5, c.generator_id()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_small_sizes() {
        assert!(matches!(
            CostMatrix::generate_uniform(2, 0),
            Err(Error::InvalidSize { n: 2, .. })
        ));
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let c = CostMatrix::generate_uniform(7, 11).unwrap();
        c.save(&path).unwrap();
        let back = CostMatrix::load(&path).unwrap();
        assert_eq!(c, back);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert_eq!(c.cost(i, j).to_bits(), back.cost(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let small = "{\"format\":\"atsp-cost-matrix/1\",\"n\":2,\"seed\":null,\"generator_id\":\"explicit\"}\ninf,0.5\n0.5,inf\n";
        assert!(matches!(CostMatrix::parse(small), Err(Error::InvalidSize { n: 2, .. })));

        let big_entry = "{\"format\":\"atsp-cost-matrix/1\",\"n\":3,\"seed\":null,\"generator_id\":\"explicit\"}\ninf,0.5,0.5\n0.5,inf,1.5\n0.5,0.5,inf\n";
        assert!(matches!(
            CostMatrix::parse(big_entry),
            Err(Error::OutOfRange { row: 1, col: 2, .. })
        ));

        let junk = "{\"format\":\"atsp-cost-matrix/1\",\"n\":3,\"seed\":null,\"generator_id\":\"explicit\"}\ninf,0.5,0.5\n0.5,inf,abc\n0.5,0.5,inf\n";
        match CostMatrix::parse(junk) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "column 2");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(CostMatrix::parse("not json"), Err(Error::Parse { line: 1, .. })));
    }
}
