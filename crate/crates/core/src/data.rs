//! Labeled datasets, their file formats, stratified splitting and a seeded
//! generator of union-of-subspaces data.
//!
//! # Text format
//!
//! ```text
//! SADL-DS <m> <n> <c>
//! <label_0> <label_1> ... <label_{n-1}>
//! <x_0,0> <x_1,0> ... <x_{m-1},0>        # sample (column) 0
//! ...
//! <x_0,n-1> ... <x_{m-1},n-1>           # sample n-1
//! ```
//!
//! Labels are 0-based. Values are written with shortest round-trip float
//! formatting, so save then load reproduces every bit.
//!
//! # Binary format
//!
//! All integers little-endian: magic `SADS`, format version `u32` (= 1),
//! `m`, `n`, `c` as `u32`, `n` labels as `u32`, then `X` sample by sample
//! (column-major) as `f64`.
//!
//! [`load_dataset`] accepts either form and tells them apart by magic.
//!
//! Random draws use ChaCha8 (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::gaussian_matrix;

const TEXT_MAGIC: &str = "SADL-DS";
const BINARY_MAGIC: &[u8; 4] = b"SADS";
const BINARY_VERSION: u32 = 1;

/// Feature matrix (samples in columns) with 0-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    /// Checks shape, label range and finiteness. Classes may be empty; use
    /// [`Dataset::require_all_classes`] before training.
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidData("class count must be ≥ 1".into()));
        }
        if labels.len() != x.ncols() {
            return Err(Error::dims(
                "Dataset::new",
                format!("{} labels", x.ncols()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature at row {}, sample {}",
                pos % x.nrows().max(1),
                pos / x.nrows().max(1)
            )));
        }
        Ok(Dataset { x, labels, classes })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Feature dimension `m`.
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&n| n == 0) {
            Some(class) => Err(Error::EmptyClass(class)),
            None => Ok(()),
        }
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let x = self.x.select_columns(indices);
        let labels = indices.iter().map(|&j| self.labels[j]).collect();
        Dataset {
            x,
            labels,
            classes: self.classes,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.x.len() * 20);
        writeln!(out, "{TEXT_MAGIC} {} {} {}", self.dim(), self.len(), self.classes).unwrap();
        let labels: Vec<String> = self.labels.iter().map(ToString::to_string).collect();
        out.push_str(&labels.join(" "));
        out.push('\n');
        for col in self.x.column_iter() {
            for (i, v) in col.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [magic, m, n, c] = fields[..] else {
            return Err(Error::Format(format!("malformed header `{header}`")));
        };
        if magic != TEXT_MAGIC {
            return Err(Error::Format(format!("bad magic `{magic}`")));
        }
        let parse_dim = |s: &str, name: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("malformed header: {name} = `{s}`")))
        };
        let (m, n, c) = (parse_dim(m, "m")?, parse_dim(n, "n")?, parse_dim(c, "c")?);

        let label_line = lines
            .next()
            .ok_or_else(|| Error::Format("missing label line".into()))?;
        let labels = label_line
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad label `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if labels.len() != n {
            return Err(Error::dims("load_dataset", format!("{n} labels"), format!("{} labels", labels.len())));
        }

        let mut values = Vec::with_capacity(m * n);
        let mut rows = 0;
        for (j, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = values.len();
            for t in line.split_whitespace() {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::Format(format!("bad value `{t}` in sample {j}")))?;
                values.push(v);
            }
            if values.len() - before != m {
                return Err(Error::dims(
                    "load_dataset",
                    format!("{m} values per sample"),
                    format!("{} in sample {j}", values.len() - before),
                ));
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::dims("load_dataset", format!("{n} samples"), format!("{rows} samples")));
        }
        Dataset::new(DMatrix::from_vec(m, n, values), labels, c)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.len() + 8 * self.x.len());
        out.extend_from_slice(BINARY_MAGIC);
        for v in [BINARY_VERSION, self.dim() as u32, self.len() as u32, self.classes as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &l in &self.labels {
            out.extend_from_slice(&(l as u32).to_le_bytes());
        }
        // nalgebra storage is column-major, i.e. already sample by sample.
        for v in self.x.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != BINARY_MAGIC {
            return Err(Error::Format("bad magic, expected SADS".into()));
        }
        let version = r.u32()?;
        if version != BINARY_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let (m, n, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let labels = (0..n).map(|_| r.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
        let values = r.f64s(m * n)?;
        r.finish()?;
        Dataset::new(DMatrix::from_vec(m, n, values), labels, c)
    }
}

/// Little-endian cursor shared by the binary dataset and model readers.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(count.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn check_path(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "empty path",
        )));
    }
    Ok(())
}

/// Loads either the text or the binary dataset format.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    check_path(path)?;
    let bytes = fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        Dataset::from_binary(&bytes)
    } else if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format(e.to_string()))?;
        Dataset::from_text(text)
    } else {
        Err(Error::Format(format!(
            "{}: not a SADL dataset (missing `{TEXT_MAGIC}` or `SADS` magic)",
            path.display()
        )))
    }
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_path(path)?;
    fs::write(path, data.to_text())?;
    Ok(())
}

pub fn save_dataset_binary(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_path(path)?;
    fs::write(path, data.to_binary())?;
    Ok(())
}

/// How many samples of each class go to the training side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    /// Fraction of the whole set, allocated across classes by largest
    /// remainder so per-class shares are as even as possible.
    Fraction(f64),
    /// Fixed number of training samples per class.
    PerClass(usize),
}

/// Stratified random split. Both halves keep the original sample order.
pub fn split(data: &Dataset, how: Split, seed: u64) -> Result<(Dataset, Dataset)> {
    let counts = data.class_counts();
    let train_counts = match how {
        Split::Fraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidData(format!("train fraction {f} outside [0, 1]")));
            }
            largest_remainder(&counts, f)
        }
        Split::PerClass(k) => vec![k; counts.len()],
    };
    for (class, (&available, &requested)) in counts.iter().zip(&train_counts).enumerate() {
        if requested == 0 || requested > available {
            return Err(Error::ClassTooSmall {
                class,
                available,
                requested,
            });
        }
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.classes()];
    for (j, &l) in data.labels().iter().enumerate() {
        by_class[l].push(j);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; data.len()];
    for (members, &k) in by_class.iter_mut().zip(&train_counts) {
        members.shuffle(&mut rng);
        for &j in &members[..k] {
            in_train[j] = true;
        }
    }
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&j| in_train[j]);
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

fn largest_remainder(counts: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let quotas: Vec<f64> = counts.iter().map(|&n| fraction * n as f64).collect();
    let mut alloc: Vec<usize> = quotas
        .iter()
        .zip(counts)
        .map(|(&q, &n)| (q.floor() as usize).min(n))
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort: ties go to the lower class index.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    let mut missing = target.saturating_sub(alloc.iter().sum());
    for &i in order.iter().cycle().take(counts.len() * 2) {
        if missing == 0 {
            break;
        }
        if alloc[i] < counts[i] {
            alloc[i] += 1;
            missing -= 1;
        }
    }
    alloc
}

/// Parameters of the union-of-subspaces generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub subspace_dim: usize,
    pub ambient_dim: usize,
    pub per_class_train: usize,
    pub per_class_test: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Shift of the in-subspace coordinates, `z ~ N(t·1/√d, I_d)`. At the
    /// default `0` every class is symmetric about the origin, so `x` and `−x`
    /// are equally likely and no linear scorer `argmax(S·x)` can beat
    /// roughly one half accuracy. A shift of a few units breaks the symmetry.
    pub mean_offset: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 4,
            subspace_dim: 5,
            ambient_dim: 32,
            per_class_train: 40,
            per_class_test: 20,
            noise_sigma: 0.05,
            seed: 0,
            mean_offset: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidData(msg));
        if self.classes == 0 || self.subspace_dim == 0 || self.ambient_dim == 0 {
            return bad("classes, subspace_dim and ambient_dim must be ≥ 1".into());
        }
        if self.per_class_train == 0 || self.per_class_test == 0 {
            return bad("per-class sample counts must be ≥ 1".into());
        }
        if self.subspace_dim > self.ambient_dim {
            return bad(format!(
                "subspace_dim {} exceeds ambient_dim {}",
                self.subspace_dim, self.ambient_dim
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise_sigma must be ≥ 0, got {}", self.noise_sigma));
        }
        if !self.mean_offset.is_finite() {
            return bad(format!("mean_offset must be finite, got {}", self.mean_offset));
        }
        Ok(())
    }
}

/// Draws one random `d`-dimensional subspace per class (QR of a Gaussian
/// matrix) and samples `x = B z + σ ε`, `z ~ N(0, I_d)`, `ε ~ N(0, I_m)`,
/// each column scaled to unit norm. Returns `(train, test)` with samples
/// grouped by class. See [`SynthSpec::mean_offset`] for the shifted variant.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let (m, d) = (spec.ambient_dim, spec.subspace_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train_cols = Vec::with_capacity(spec.classes * spec.per_class_train);
    let mut test_cols = Vec::with_capacity(spec.classes * spec.per_class_test);
    let shift = spec.mean_offset / (d as f64).sqrt();

    for _ in 0..spec.classes {
        let basis = gaussian_matrix(m, d, &mut rng).qr().q();
        for k in 0..spec.per_class_train + spec.per_class_test {
            let z = DVector::from_fn(d, |_, _| shift + rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut x = &basis * z + noise * spec.noise_sigma;
            let norm = x.norm();
            if norm > 0.0 {
                x /= norm;
            }
            if k < spec.per_class_train {
                train_cols.push(x);
            } else {
                test_cols.push(x);
            }
        }
    }
    let labels = |per: usize| (0..spec.classes).flat_map(|c| std::iter::repeat_n(c, per)).collect();
    let train = Dataset::new(
        DMatrix::from_columns(&train_cols),
        labels(spec.per_class_train),
        spec.classes,
    )?;
    let test = Dataset::new(
        DMatrix::from_columns(&test_cols),
        labels(spec.per_class_test),
        spec.classes,
    )?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> Dataset {
        Dataset::new(
            DMatrix::from_column_slice(2, 3, &[1.0, 2.0, -0.5, 0.0, 3.25, 1e-300]),
            vec![0, 1, 1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn smallest_text_file() {
        let text = "SADL-DS 2 3 2\n0 1 1\n1 2\n-0.5 0\n3.25 1e-300\n";
        let ds = Dataset::from_text(text).unwrap();
        assert_eq!(ds, tiny());
        assert_eq!((ds.dim(), ds.len(), ds.classes()), (2, 3, 2));
    }

    #[test]
    fn label_equal_to_class_count_is_out_of_range() {
        let err = Dataset::from_text("SADL-DS 1 2 2\n0 2\n1\n2\n").unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 2, classes: 2 }));
        assert!(err.to_string().contains("label out of range"));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(Dataset::from_text("SADL-DS 2 3\n"), Err(Error::Format(_))));
        assert!(matches!(Dataset::from_text("NOPE 1 1 1\n0\n1\n"), Err(Error::Format(_))));
        assert!(matches!(
            Dataset::from_text("SADL-DS 2 1 1\n0\n1\n"),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::from_text("SADL-DS 1 2 1\n0 0\n1\n"),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::from_text("SADL-DS 1 1 1\n0\nNaN\n"),
            Err(Error::InvalidData(_))
        ));
        assert!(matches!(
            Dataset::from_text("SADL-DS 1 1 1\n0\ninf\n"),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn binary_rejects_truncation_and_trailing_bytes() {
        let bytes = tiny().to_binary();
        assert_eq!(Dataset::from_binary(&bytes).unwrap(), tiny());
        assert!(Dataset::from_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Dataset::from_binary(&extra).is_err());
    }

    #[test]
    fn empty_path_is_an_error() {
        assert!(save_dataset(&tiny(), "").is_err());
        assert!(load_dataset("").is_err());
    }

    #[test]
    fn overwrite_existing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        fs::write(&path, "junk").unwrap();
        save_dataset(&tiny(), &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), tiny());
        save_dataset_binary(&tiny(), &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), tiny());
    }

    fn two_classes_of_five() -> Dataset {
        let x = DMatrix::from_fn(1, 10, |_, j| j as f64);
        Dataset::new(x, vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap()
    }

    #[test]
    fn half_split_of_ten() {
        let ds = two_classes_of_five();
        let (train, test) = split(&ds, Split::Fraction(0.5), 7).unwrap();
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 5);
        for counts in [train.class_counts(), test.class_counts()] {
            assert!(counts.iter().all(|&c| c == 2 || c == 3), "{counts:?}");
        }
    }

    #[test]
    fn per_class_count_of_twenty_out_of_twenty_six() {
        let x = DMatrix::from_fn(2, 52, |i, j| (i + 2 * j) as f64);
        let labels = (0..52).map(|j| j / 26).collect();
        let ds = Dataset::new(x, labels, 2).unwrap();
        let (train, test) = split(&ds, Split::PerClass(20), 1).unwrap();
        assert_eq!(train.class_counts(), vec![20, 20]);
        assert_eq!(test.class_counts(), vec![6, 6]);
    }

    #[test]
    fn split_is_deterministic_and_rejects_small_classes() {
        let ds = two_classes_of_five();
        let a = split(&ds, Split::Fraction(0.5), 3).unwrap();
        let b = split(&ds, Split::Fraction(0.5), 3).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            split(&ds, Split::PerClass(6), 0),
            Err(Error::ClassTooSmall { requested: 6, available: 5, .. })
        ));
        assert!(matches!(
            split(&ds, Split::Fraction(0.05), 0),
            Err(Error::ClassTooSmall { requested: 0, .. })
        ));
    }

    #[test]
    fn noiseless_rank_one_classes_are_collinear() {
        let spec = SynthSpec {
            subspace_dim: 1,
            noise_sigma: 0.0,
            per_class_train: 6,
            per_class_test: 3,
            ..SynthSpec::default()
        };
        let (train, _) = generate_synthetic(&spec).unwrap();
        for class in 0..spec.classes {
            let cols: Vec<_> = (0..train.len())
                .filter(|&j| train.labels()[j] == class)
                .map(|j| train.x().column(j).clone_owned())
                .collect();
            for c in &cols[1..] {
                assert!((cols[0].dot(c).abs() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthetic_shapes_and_unit_columns() {
        let spec = SynthSpec::default();
        let (train, test) = generate_synthetic(&spec).unwrap();
        assert_eq!((train.dim(), train.len()), (32, 160));
        assert_eq!((test.dim(), test.len()), (32, 80));
        assert_eq!(train.class_counts(), vec![40; 4]);
        for col in train.x().column_iter().chain(test.x().column_iter()) {
            assert!((col.norm() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(generate_synthetic(&spec).unwrap(), (train, test));
    }

    #[test]
    fn invalid_synth_spec() {
        let spec = SynthSpec {
            subspace_dim: 40,
            ..SynthSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(
            labels in proptest::collection::vec(0usize..3, 6..40),
            frac in 0.3..0.7f64,
            seed in any::<u64>(),
        ) {
            let n = labels.len();
            let mut labels = labels;
            labels.extend([0, 0, 1, 1, 2, 2]);
            let x = DMatrix::from_fn(1, n + 6, |_, j| j as f64);
            let ds = Dataset::new(x, labels, 3).unwrap();
            let (train, test) = match split(&ds, Split::Fraction(frac), seed) {
                Ok(halves) => halves,
                Err(Error::ClassTooSmall { requested: 0, .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let mut ids: Vec<usize> = train.x().iter().chain(test.x().iter()).map(|&v| v as usize).collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n + 6).collect::<Vec<_>>());
            prop_assert!(train.class_counts().iter().all(|&c| c >= 1));
        }
    }
}
