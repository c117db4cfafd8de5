use crate::{NumError, Result, Rng};

/// Row-major contiguous f64 array. Scalars use the empty shape `[]`.
///
/// `grad`, when present, always has the same length as `data`. Slicing and
/// reshaping copy; there are no strided views.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(NumError::invalid(
                "tensor",
                format!("shape {:?} needs {} values, got {}", shape, numel, data.len()),
            ));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    /// I.i.d. standard-normal entries, reproducible per `(seed, stream_id)`.
    pub fn gaussian(rng: &mut Rng, shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        let mut data = vec![0.0; numel];
        rng.fill_normal(&mut data);
        Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        }
    }

    /// 1-d tensor from a slice.
    pub fn from_slice(values: &[f64]) -> Self {
        Tensor {
            shape: vec![values.len()],
            data: values.to_vec(),
            requires_grad: false,
            grad: None,
        }
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

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Scalar extraction; errors unless the tensor holds exactly one value.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(NumError::invalid(
                "item",
                format!("expected a single element, shape is {:?}", self.shape),
            ));
        }
        Ok(self.data[0])
    }

    /// Copying reshape; the element count must be preserved.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(NumError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Allocates (or rezeroes) the gradient buffer.
    pub fn zero_grad(&mut self) {
        match self.grad.as_mut() {
            Some(g) => g.iter_mut().for_each(|v| *v = 0.0),
            None => self.grad = Some(vec![0.0; self.data.len()]),
        }
    }

    /// Gradient as a tensor of the same shape, if populated.
    pub fn grad_tensor(&self) -> Option<Tensor> {
        self.grad.as_ref().map(|g| Tensor {
            shape: self.shape.clone(),
            data: g.clone(),
            requires_grad: false,
            grad: None,
        })
    }
}
