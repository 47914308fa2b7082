//! Dense grids and tensors, plus the `TEN` binary container.
//!
//! A `TEN` file is an ASCII header line `TEN <W> <H> <C>\n` followed by
//! `W * H * C` little-endian `f64` values in row-major `(W, H, C)` order.

use std::io::Write;

use crate::error::{Error, Result};

/// A `W x H` grid of reals. Element `(gx, gy)` lives at `gx * H + gy`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(w: usize, h: usize) -> Self {
        Self { w, h, data: vec![0.0; w * h] }
    }

    pub fn filled(w: usize, h: usize, value: f64) -> Self {
        Self { w, h, data: vec![value; w * h] }
    }

    pub fn from_vec(w: usize, h: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != w * h {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", w * h),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { w, h, data })
    }

    pub fn from_fn(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(w * h);
        for gx in 0..w {
            for gy in 0..h {
                data.push(f(gx, gy));
            }
        }
        Self { w, h, data }
    }

    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn idx(&self, gx: usize, gy: usize) -> usize {
        gx * self.h + gy
    }

    #[inline]
    pub fn get(&self, gx: usize, gy: usize) -> f64 {
        self.data[gx * self.h + gy]
    }

    #[inline]
    pub fn set(&mut self, gx: usize, gy: usize, v: f64) {
        self.data[gx * self.h + gy] = v;
    }

    #[inline]
    pub fn add(&mut self, gx: usize, gy: usize, v: f64) {
        self.data[gx * self.h + gy] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Grid) -> Result<()> {
        if self.w != other.w || self.h != other.h {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.w, self.h),
                actual: format!("{}x{}", other.w, other.h),
            });
        }
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn scaled(&self, factor: f64) -> Grid {
        Grid { w: self.w, h: self.h, data: self.data.iter().map(|v| v * factor).collect() }
    }

    pub fn dot(&self, other: &Grid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn write_ten(&self, out: impl Write) -> Result<()> {
        write_ten(out, [self.w, self.h, 1], &self.data)
    }

    pub fn read_ten(bytes: &[u8]) -> Result<Self> {
        let (dims, data) = read_ten(bytes)?;
        if dims[2] != 1 {
            return Err(Error::MalformedTensor(format!("expected 1 channel, found {}", dims[2])));
        }
        Grid::from_vec(dims[0], dims[1], data)
    }
}

/// A dense row-major tensor of arbitrary rank; used for model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{shape:?} ({len} values)"),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedTensor(format!("non-finite value at index {i}")));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Shape folded to the three `TEN` dimensions: the first two axes are
    /// kept and any remaining axes are flattened into the third.
    pub fn ten_dims(&self) -> [usize; 3] {
        let s = &self.shape;
        match s.len() {
            0 => [1, 1, 1],
            1 => [s[0], 1, 1],
            2 => [s[0], s[1], 1],
            _ => [s[0], s[1], s[2..].iter().product()],
        }
    }
}

pub fn write_ten(mut out: impl Write, dims: [usize; 3], data: &[f64]) -> Result<()> {
    let expected = dims[0] * dims[1] * dims[2];
    if data.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{expected} values"),
            actual: format!("{} values", data.len()),
        });
    }
    write!(out, "TEN {} {} {}\n", dims[0], dims[1], dims[2])?;
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Upper bound on the element count accepted from a header, so a hostile
/// header cannot request an enormous allocation before the length check.
const MAX_TEN_ELEMENTS: usize = 1 << 28;

pub fn read_ten(bytes: &[u8]) -> Result<([usize; 3], Vec<f64>)> {
    let nl = bytes
        .iter()
        .take(128)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedTensor("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::MalformedTensor("header is not ASCII".into()))?;
    let mut parts = header.split(' ');
    if parts.next() != Some("TEN") {
        return Err(Error::MalformedTensor(format!("bad magic in header {header:?}")));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let tok = parts
            .next()
            .ok_or_else(|| Error::MalformedTensor(format!("header missing dimension {i}")))?;
        if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::MalformedTensor(format!("bad dimension {tok:?} at header field {}", i + 1)));
        }
        *d = tok
            .parse()
            .map_err(|_| Error::MalformedTensor(format!("dimension {tok:?} overflows")))?;
    }
    if parts.next().is_some() {
        return Err(Error::MalformedTensor("trailing fields in header".into()));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&c| c <= MAX_TEN_ELEMENTS)
        .ok_or_else(|| Error::MalformedTensor(format!("dimensions {dims:?} too large")))?;
    let body = &bytes[nl + 1..];
    if body.len() != count * 8 {
        return Err(Error::MalformedTensor(format!(
            "expected {} payload bytes after header (offset {}), found {}",
            count * 8,
            nl + 1,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((dims, data))
}
