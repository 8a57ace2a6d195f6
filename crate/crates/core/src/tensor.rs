//! Dense row-major tensors with logical indexing.
//!
//! Feature maps are `[channels, height, width]`, kernels are
//! `[out_ch, in_ch, kh, kw]`. Physical layouts used by the accelerator live in
//! `simulator::layout`; this type is always logically ordered.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {:?} need {} values, got {}",
                dims,
                len,
                data.len()
            )));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Uniform values in [-1, 1).
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let len = dims.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        debug_assert_eq!(self.dims.len(), 3);
        self.data[(c * self.dims[1] + y) * self.dims[2] + x]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let idx = (c * self.dims[1] + y) * self.dims[2] + x;
        self.data[idx] = v;
    }

    #[inline]
    pub fn at4(&self, k: usize, c: usize, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.dims.len(), 4);
        let d = &self.dims;
        self.data[((k * d[1] + c) * d[2] + i) * d[3] + j]
    }

    #[inline]
    pub fn set4(&mut self, k: usize, c: usize, i: usize, j: usize, v: f64) {
        let d = &self.dims;
        let idx = ((k * d[1] + c) * d[2] + i) * d[3] + j;
        self.data[idx] = v;
    }

    pub fn scale(&self, a: f64) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * a).collect(),
        }
    }

    /// Same shape reinterpreted under new dims with an equal element count.
    pub fn reshape(mut self, dims: &[usize]) -> Result<Tensor> {
        let len: usize = dims.iter().product();
        if len != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.dims, dims
            )));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    /// Largest elementwise deviation relative to the largest magnitude in `reference`.
    ///
    /// Zero tensors compare by absolute deviation.
    pub fn max_rel_diff(&self, reference: &Tensor) -> f64 {
        assert_eq!(self.dims, reference.dims, "shape mismatch in comparison");
        let scale = reference.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        self.data
            .iter()
            .zip(&reference.data)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
            / scale
    }

    pub fn approx_eq(&self, other: &Tensor, rel_tol: f64) -> bool {
        self.dims == other.dims && self.max_rel_diff(other) <= rel_tol
    }

    /// Round every value onto a signed fixed-point grid with `frac_bits`
    /// fractional bits and `total_bits` overall, saturating at the range ends.
    pub fn quantize(&self, total_bits: u32, frac_bits: u32) -> Tensor {
        let step = (2.0f64).powi(-(frac_bits as i32));
        let max_code = (2.0f64).powi(total_bits as i32 - 1) - 1.0;
        let data = self
            .data
            .iter()
            .map(|v| (v / step).round().clamp(-max_code - 1.0, max_code) * step)
            .collect();
        Tensor {
            dims: self.dims.clone(),
            data,
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(dims: &[usize], bytes: &[u8]) -> Result<Tensor> {
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::ShapeMismatch(format!(
                "raw tensor byte length {} is not a multiple of 8",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Tensor::from_vec(dims, data)
    }

    pub fn write_raw(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_le_bytes())?;
        Ok(())
    }

    pub fn read_raw(path: &Path, dims: &[usize]) -> Result<Tensor> {
        let bytes = fs::read(path)?;
        Tensor::from_le_bytes(dims, &bytes)
    }
}
