use super::NnError;

/// Dense row-major array of `f64` with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(NnError::Shape(format!("shape {shape:?} needs {n} values, got {}", values.len())));
        }
        Ok(Tensor { shape, values, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, values: vec![0.0; n], grad: None }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Tensor { shape, values: vec![value; n], grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) {
        assert_eq!(g.len(), self.values.len(), "gradient length mismatch");
        let buf = self.grad.get_or_insert_with(|| vec![0.0; g.len()]);
        for (b, &x) in buf.iter_mut().zip(g) {
            *b += x;
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Values and gradient together, for optimizers. Missing gradients read as zero.
    pub(crate) fn values_and_grad_mut(&mut self) -> (&mut [f64], &[f64]) {
        let n = self.values.len();
        let grad = self.grad.get_or_insert_with(|| vec![0.0; n]);
        (&mut self.values, grad)
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != self.values.len() {
            return Err(NnError::Shape(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), values: self.values.iter().map(|&v| f(v)).collect(), grad: None }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NnError> {
        self.expect_shape(other.shape())?;
        Ok(Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            grad: None,
        })
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<(), NnError> {
        if self.shape == shape {
            Ok(())
        } else {
            Err(NnError::Shape(format!("expected {shape:?}, found {:?}", self.shape)))
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Stacks `[C, H, W]` tensors with equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor, NnError> {
        let first = parts.first().ok_or_else(|| NnError::Shape("nothing to concatenate".into()))?;
        if first.shape.len() != 3 {
            return Err(NnError::Shape(format!("expected [C,H,W], found {:?}", first.shape)));
        }
        let (h, w) = (first.shape[1], first.shape[2]);
        let mut channels = 0;
        let mut values = Vec::new();
        for p in parts {
            if p.shape.len() != 3 || p.shape[1] != h || p.shape[2] != w {
                return Err(NnError::Shape(format!("cannot stack {:?} with {:?}", p.shape, first.shape)));
            }
            channels += p.shape[0];
            values.extend_from_slice(&p.values);
        }
        Ok(Tensor { shape: vec![channels, h, w], values, grad: None })
    }
}
