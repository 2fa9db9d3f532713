//! Phase-space grids, sampled scalar fields, quadrature and file formats.
//!
//! Fields are sampled on a rectangular `(q, p)` lattice with inclusive
//! endpoints and stored row-major with `q` varying fastest. Cells can be
//! flagged invalid (e.g. a diverging backtrace); invalid cells always hold
//! `NaN` so that serialisation is lossless and accidental use is loud.
//!
//! # The HGRD container
//!
//! Exported fields use a small checksummed binary format:
//!
//! ```text
//! bytes 0..4   magic "HGRD"
//! byte  4      format version (0x01)
//! bytes 5..9   u32 LE metadata length L
//! ...          L bytes of UTF-8 `key=value` pairs separated by single spaces
//!              (nq, np, qmin, qmax, pmin, pmax, kind, time, digest, and
//!              optionally divisor)
//! ...          nq·np little-endian f64 values, row-major, q fastest
//! ...          nq·np validity bytes (0x01 valid, 0x00 invalid)
//! last 4       u32 LE CRC32 over everything after the version byte
//! ```
//!
//! Floating-point metadata is rendered with Rust's shortest round-trip
//! formatting, so `read(write(f)) == f` holds bit for bit.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::PhasePoint;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum GridIoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("field has no valid positive value to renormalize by")]
    AllInvalid,
    #[error("fields are sampled on different grids")]
    GridMismatch,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("grid dimensions overflow the addressable size")]
    DimensionOverflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rectangular lattice over `[q_min, q_max] × [p_min, p_max]` with `nq × np`
/// points (inclusive endpoints). Point `(i, j)` sits at
/// `q = q_min + i·(q_max-q_min)/(nq-1)`, likewise `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid<T> {
    q_min: T,
    q_max: T,
    p_min: T,
    p_max: T,
    nq: usize,
    np: usize,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(
        q_min: T,
        q_max: T,
        p_min: T,
        p_max: T,
        nq: usize,
        np: usize,
    ) -> Result<Self, GridIoError> {
        if !(q_min < q_max) || !(p_min < p_max) {
            return Err(GridIoError::InvalidGrid("bounds must satisfy min < max"));
        }
        if !(q_min.is_finite() && q_max.is_finite() && p_min.is_finite() && p_max.is_finite()) {
            return Err(GridIoError::InvalidGrid("bounds must be finite"));
        }
        if nq < 2 || np < 2 {
            return Err(GridIoError::InvalidGrid("need at least 2 points per axis"));
        }
        nq.checked_mul(np).ok_or(GridIoError::DimensionOverflow)?;
        Ok(Self {
            q_min,
            q_max,
            p_min,
            p_max,
            nq,
            np,
        })
    }

    /// Square grid `[-half, half]²` with `n × n` points.
    pub fn centered_square(half: T, n: usize) -> Result<Self, GridIoError> {
        Self::new(-half, half, -half, half, n, n)
    }

    pub fn nq(&self) -> usize {
        self.nq
    }
    pub fn np(&self) -> usize {
        self.np
    }
    pub fn bounds(&self) -> (T, T, T, T) {
        (self.q_min, self.q_max, self.p_min, self.p_max)
    }
    pub fn len(&self) -> usize {
        self.nq * self.np
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dq(&self) -> T {
        (self.q_max - self.q_min) / T::from_usize(self.nq - 1).unwrap()
    }
    pub fn dp(&self) -> T {
        (self.p_max - self.p_min) / T::from_usize(self.np - 1).unwrap()
    }

    pub fn q(&self, i: usize) -> T {
        debug_assert!(i < self.nq);
        self.q_min + T::from_usize(i).unwrap() * self.dq()
    }
    pub fn p(&self, j: usize) -> T {
        debug_assert!(j < self.np);
        self.p_min + T::from_usize(j).unwrap() * self.dp()
    }

    /// Flat index of point `(i, j)`: `j·nq + i` (`q` fastest).
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nq && j < self.np);
        j * self.nq + i
    }

    /// Inverse of [`PhaseGrid::index`].
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        debug_assert!(idx < self.len());
        (idx % self.nq, idx / self.nq)
    }

    pub fn point(&self, i: usize, j: usize) -> PhasePoint<T> {
        PhasePoint::new(self.q(i), self.p(j))
    }

    pub fn point_at(&self, idx: usize) -> PhasePoint<T> {
        let (i, j) = self.coords(idx);
        self.point(i, j)
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.nq == other.nq
            && self.np == other.np
            && self.q_min == other.q_min
            && self.q_max == other.q_max
            && self.p_min == other.p_min
            && self.p_max == other.p_max
    }
}

/// What a sampled field physically represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    HusimiClassical,
    HusimiQuantum,
    NormLandscape,
    LogNormLandscape,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::HusimiClassical => "husimi_classical",
            FieldKind::HusimiQuantum => "husimi_quantum",
            FieldKind::NormLandscape => "norm_landscape",
            FieldKind::LogNormLandscape => "log_norm_landscape",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "husimi_classical" => FieldKind::HusimiClassical,
            "husimi_quantum" => FieldKind::HusimiQuantum,
            "norm_landscape" => FieldKind::NormLandscape,
            "log_norm_landscape" => FieldKind::LogNormLandscape,
            _ => return None,
        })
    }
}

/// Provenance carried alongside the samples and into the file header.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMeta<T> {
    pub kind: FieldKind,
    /// Physical evolution time the field was sampled at.
    pub time: T,
    /// Content hash of the generating Hamiltonian.
    pub hamiltonian_digest: String,
    /// Set by [`ScalarField::renormalize_max`]: the divisor applied last.
    pub renorm_divisor: Option<T>,
}

impl<T: Real> FieldMeta<T> {
    pub fn new(kind: FieldKind, time: T, hamiltonian_digest: impl Into<String>) -> Self {
        Self {
            kind,
            time,
            hamiltonian_digest: hamiltonian_digest.into(),
            renorm_divisor: None,
        }
    }
}

/// A real-valued field sampled on a [`PhaseGrid`] with a per-cell validity
/// mask. Valid entries are finite; invalid entries are `NaN`.
#[derive(Clone, Debug)]
pub struct ScalarField<T> {
    grid: PhaseGrid<T>,
    values: Vec<T>,
    valid: Vec<bool>,
    meta: FieldMeta<T>,
}

impl<T: Real> ScalarField<T> {
    /// All cells valid; `values` must be finite and of length `grid.len()`.
    pub fn from_values(grid: PhaseGrid<T>, meta: FieldMeta<T>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        let valid = vec![true; values.len()];
        Self {
            grid,
            values,
            valid,
            meta,
        }
    }

    /// `None` cells become invalid (`NaN`), non-finite values likewise.
    pub fn from_cells(grid: PhaseGrid<T>, meta: FieldMeta<T>, cells: Vec<Option<T>>) -> Self {
        assert_eq!(cells.len(), grid.len());
        let mut values = Vec::with_capacity(cells.len());
        let mut valid = Vec::with_capacity(cells.len());
        for cell in cells {
            match cell {
                Some(v) if v.is_finite() => {
                    values.push(v);
                    valid.push(true);
                }
                _ => {
                    values.push(T::nan());
                    valid.push(false);
                }
            }
        }
        Self {
            grid,
            values,
            valid,
            meta,
        }
    }

    /// Sample a pure function over the grid in parallel. Per-cell evaluation
    /// is independent and collected by index, so the result is identical for
    /// any worker count.
    pub fn from_fn(
        grid: PhaseGrid<T>,
        meta: FieldMeta<T>,
        f: impl Fn(PhasePoint<T>) -> T + Sync,
    ) -> Self {
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.point_at(idx)))
            .collect();
        let valid = values.iter().map(|v| v.is_finite()).collect();
        let values = values
            .into_iter()
            .map(|v| if v.is_finite() { v } else { T::nan() })
            .collect();
        Self {
            grid,
            values,
            valid,
            meta,
        }
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }
    pub fn meta(&self) -> &FieldMeta<T> {
        &self.meta
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }
    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[self.grid.index(i, j)]
    }

    pub fn invalid_cells(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
    pub fn valid_fraction(&self) -> T {
        T::from_usize(self.valid.len() - self.invalid_cells()).unwrap()
            / T::from_usize(self.valid.len()).unwrap()
    }

    /// Largest value over valid cells.
    pub fn max_valid(&self) -> Option<T> {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: T| a.max(v))))
    }

    /// Divide by the maximum over valid cells so the peak becomes 1; the
    /// divisor is recorded in the metadata. Idempotent on the samples.
    pub fn renormalize_max(&self) -> Result<Self, GridIoError> {
        let max = self.max_valid().ok_or(GridIoError::AllInvalid)?;
        if !(max > T::zero()) {
            return Err(GridIoError::AllInvalid);
        }
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| if *ok { *v / max } else { T::nan() })
            .collect();
        let mut meta = self.meta.clone();
        meta.renorm_divisor = Some(max);
        Ok(Self {
            grid: self.grid,
            values,
            valid: self.valid.clone(),
            meta,
        })
    }

    /// Trapezoid quadrature with the coherent-state measure `dq dp / 2π`,
    /// under which normalised states integrate to one. Invalid cells count
    /// as zero; a warning reports how many were skipped.
    pub fn integrate(&self) -> T {
        let skipped = self.invalid_cells();
        if skipped > 0 {
            log::warn!(
                "integrate: {skipped}/{} cells invalid, treated as zero",
                self.valid.len()
            );
        }
        let nq = self.grid.nq;
        let np = self.grid.np;
        let half = T::of(0.5);
        let mut acc = T::zero();
        for j in 0..np {
            let wj = if j == 0 || j == np - 1 { half } else { T::one() };
            for i in 0..nq {
                let idx = self.grid.index(i, j);
                if !self.valid[idx] {
                    continue;
                }
                let wi = if i == 0 || i == nq - 1 { half } else { T::one() };
                acc += wi * wj * self.values[idx];
            }
        }
        acc * self.grid.dq() * self.grid.dp() / (T::of(2.0) * T::PI())
    }

    /// Bit-for-bit equality of grid, samples, mask and metadata.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let bits = |x: T| x.to_f64().map(f64::to_bits);
        self.grid.same_layout(&other.grid)
            && self.valid == other.valid
            && self.meta.kind == other.meta.kind
            && bits(self.meta.time) == bits(other.meta.time)
            && self.meta.hamiltonian_digest == other.meta.hamiltonian_digest
            && self.meta.renorm_divisor.map(bits) == other.meta.renorm_divisor.map(bits)
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| bits(*a) == bits(*b))
    }
}

/// Largest `|a - b|` over cells valid in both fields.
pub fn sup_distance<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<T, GridIoError> {
    if !a.grid.same_layout(&b.grid) {
        return Err(GridIoError::GridMismatch);
    }
    let mut sup = T::zero();
    for idx in 0..a.values.len() {
        if a.valid[idx] && b.valid[idx] {
            sup = sup.max((a.values[idx] - b.values[idx]).abs());
        }
    }
    Ok(sup)
}

/// Trapezoid `∫|a - b| dq dp / 2π` over cells valid in both fields.
pub fn l1_distance<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<T, GridIoError> {
    if !a.grid.same_layout(&b.grid) {
        return Err(GridIoError::GridMismatch);
    }
    let diff: Vec<Option<T>> = a
        .values
        .iter()
        .zip(&b.values)
        .zip(a.valid.iter().zip(&b.valid))
        .map(|((x, y), (vx, vy))| (*vx && *vy).then(|| (*x - *y).abs()))
        .collect();
    let field = ScalarField::from_cells(a.grid, a.meta.clone(), diff);
    Ok(field.integrate())
}

const MAGIC: &[u8; 4] = b"HGRD";
const FORMAT_VERSION: u8 = 0x01;

impl ScalarField<f64> {
    fn metadata_line(&self) -> String {
        let (q_min, q_max, p_min, p_max) = self.grid.bounds();
        let mut line = format!(
            "nq={} np={} qmin={} qmax={} pmin={} pmax={} kind={} time={} digest={}",
            self.grid.nq,
            self.grid.np,
            q_min,
            q_max,
            p_min,
            p_max,
            self.meta.kind.as_str(),
            self.meta.time,
            self.meta.hamiltonian_digest,
        );
        if let Some(d) = self.meta.renorm_divisor {
            line.push_str(&format!(" divisor={d}"));
        }
        line
    }

    /// Write the field in the HGRD container described in the module docs.
    pub fn write_hgrd(&self, path: impl AsRef<Path>) -> Result<(), GridIoError> {
        let meta = self.metadata_line().into_bytes();
        let mut body =
            Vec::with_capacity(4 + meta.len() + self.values.len() * 9 + 4);
        body.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        body.extend_from_slice(&meta);
        for v in &self.values {
            body.extend_from_slice(&v.to_le_bytes());
        }
        for ok in &self.valid {
            body.push(if *ok { 0x01 } else { 0x00 });
        }
        let crc = crc32fast::hash(&body);

        let mut file = fs::File::create(path)?;
        file.write_all(MAGIC)?;
        file.write_all(&[FORMAT_VERSION])?;
        file.write_all(&body)?;
        file.write_all(&crc.to_le_bytes())?;
        Ok(())
    }

    /// Read a field back; the inverse of [`ScalarField::write_hgrd`].
    pub fn read_hgrd(path: impl AsRef<Path>) -> Result<Self, GridIoError> {
        let bytes = fs::read(path)?;
        if bytes.len() < 13 || &bytes[0..4] != MAGIC {
            return Err(GridIoError::MalformedHeader("bad magic".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(GridIoError::UnsupportedVersion(bytes[4]));
        }
        let body = &bytes[5..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(GridIoError::ChecksumMismatch { stored, computed });
        }

        let meta_len = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
        if body.len() < 4 + meta_len {
            return Err(GridIoError::MalformedHeader("truncated metadata".into()));
        }
        let meta_str = std::str::from_utf8(&body[4..4 + meta_len])
            .map_err(|_| GridIoError::MalformedHeader("metadata is not UTF-8".into()))?;
        let mut fields = std::collections::HashMap::new();
        for pair in meta_str.split(' ') {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| GridIoError::MalformedHeader(format!("bad pair `{pair}`")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| GridIoError::MalformedHeader(format!("missing key `{k}`")))
        };
        let parse_usize = |k: &str| -> Result<usize, GridIoError> {
            get(k)?
                .parse()
                .map_err(|_| GridIoError::MalformedHeader(format!("bad integer for `{k}`")))
        };
        let parse_f64 = |k: &str| -> Result<f64, GridIoError> {
            get(k)?
                .parse()
                .map_err(|_| GridIoError::MalformedHeader(format!("bad float for `{k}`")))
        };

        let nq = parse_usize("nq")?;
        let np = parse_usize("np")?;
        let len = nq
            .checked_mul(np)
            .ok_or(GridIoError::DimensionOverflow)?;
        let expected = 4 + meta_len + len * 8 + len;
        if body.len() != expected {
            return Err(GridIoError::DimensionOverflow);
        }
        let grid = PhaseGrid::new(
            parse_f64("qmin")?,
            parse_f64("qmax")?,
            parse_f64("pmin")?,
            parse_f64("pmax")?,
            nq,
            np,
        )?;
        let kind = FieldKind::from_str(get("kind")?)
            .ok_or_else(|| GridIoError::MalformedHeader("unknown field kind".into()))?;
        let mut meta = FieldMeta::new(kind, parse_f64("time")?, get("digest")?.to_string());
        if fields.contains_key("divisor") {
            meta.renorm_divisor = Some(parse_f64("divisor")?);
        }

        let mut values = Vec::with_capacity(len);
        let floats = &body[4 + meta_len..4 + meta_len + len * 8];
        for chunk in floats.chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let valid: Vec<bool> = body[4 + meta_len + len * 8..]
            .iter()
            .map(|b| *b == 0x01)
            .collect();
        Ok(Self {
            grid,
            values,
            valid,
            meta,
        })
    }

    /// Plain-text export: `q,p,value,valid` with 17 significant digits.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), GridIoError> {
        let mut out = String::with_capacity(self.values.len() * 64);
        out.push_str("q,p,value,valid\n");
        for j in 0..self.grid.np {
            for i in 0..self.grid.nq {
                let idx = self.grid.index(i, j);
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{}\n",
                    self.grid.q(i),
                    self.grid.p(j),
                    self.values[idx],
                    u8::from(self.valid[idx]),
                ));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }
}
