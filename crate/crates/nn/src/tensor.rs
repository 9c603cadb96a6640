use crate::scalar::Real;

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub dims: Vec<usize>,
    pub data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            data: vec![F::zero(); dims.iter().product()],
        }
    }

    /// Panics if `data.len()` differs from the product of `dims`.
    pub fn from_vec(dims: &[usize], data: Vec<F>) -> Self {
        assert_eq!(data.len(), dims.iter().product::<usize>(), "tensor data does not match dims {dims:?}");
        Self {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the leading (batch) dimension.
    pub fn rows(&self) -> usize {
        self.dims.first().copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[F] {
        let w = self.len() / self.rows().max(1);
        &self.data[i * w..(i + 1) * w]
    }
}
