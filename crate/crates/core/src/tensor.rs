//! Dense row-major f64 tensors.
//!
//! Everything the engine moves around is one of these. Model state is
//! always rank-2 (`[rows, cols]`, vectors as single-row matrices); the
//! type itself allows any rank so checkpoints can store what they get.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(CoreError::shape(
                "tensor",
                format!("shape {shape:?} wants {expect} values, got {}", values.len()),
            ));
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1, 1],
            values: vec![v],
        }
    }

    /// Single-row matrix `[1, n]` from a slice.
    pub fn row(values: &[f64]) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            values: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rows/cols view of a rank-1 or rank-2 tensor; rank-1 counts as one row.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.len() {
            1 => Ok((1, self.shape[0])),
            2 => Ok((self.shape[0], self.shape[1])),
            _ => Err(CoreError::shape(
                "dims2",
                format!("expected rank <= 2, got shape {:?}", self.shape),
            )),
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

/// One-hot row vector with `classes` entries.
pub fn one_hot(class: usize, classes: usize) -> Result<Tensor> {
    if class >= classes {
        return Err(CoreError::usage(format!(
            "class index {class} out of range 0..{classes}"
        )));
    }
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    Ok(Tensor::row(&v))
}
