use crate::error::{bail, Result};
use crate::nn::Scalar;

/// Dense row-major array with an optional gradient buffer.
///
/// Activations flow between layers as plain tensors; learnable parameters
/// carry `requires_grad` and accumulate into `grad` on every backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
            grad: None,
            requires_grad: false,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            bail!(Shape, "shape {:?} needs {} values, got {}", shape, n, data.len());
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
            requires_grad: false,
        })
    }

    /// Learnable parameter with a zeroed gradient buffer.
    pub fn param(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let mut t = Self::from_vec(shape, data)?;
        t.grad = Some(vec![T::zero(); t.data.len()]);
        t.requires_grad = true;
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [T]> {
        self.grad.as_deref_mut()
    }

    /// Simultaneous access to values and gradient, as an optimizer needs.
    pub fn data_and_grad_mut(&mut self) -> (&mut [T], Option<&mut [T]>) {
        (&mut self.data, self.grad.as_deref_mut())
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            bail!(Shape, "cannot reshape {:?} into {:?}", self.shape, shape);
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts values to another precision; the result carries no gradient.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            grad: None,
            requires_grad: false,
        }
    }

    pub(crate) fn ensure_shape(&self, expected: &[usize], what: &str) -> Result<()> {
        if self.shape != expected {
            bail!(Shape, "{}: expected shape {:?}, got {:?}", what, expected, self.shape);
        }
        Ok(())
    }

    /// Batch, channel, height, width of a 4-D activation.
    pub(crate) fn nchw(&self, what: &str) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => bail!(Shape, "{}: expected a 4-D [N, C, H, W] tensor, got {:?}", what, self.shape),
        }
    }
}

/// Elementwise sum of two tensors of identical shape.
pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    b.ensure_shape(a.shape(), "add")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| *x + *y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Elementwise product of two tensors of identical shape.
pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    b.ensure_shape(a.shape(), "mul")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| *x * *y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// `sum(x)` and its gradient with respect to `x` (all ones).
pub fn sum_loss<T: Scalar>(x: &Tensor<T>) -> (T, Tensor<T>) {
    let total = x.data().iter().copied().sum();
    (total, Tensor::filled(x.shape(), T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f32>::from_vec(&[2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.grad().is_none());
        assert!(t.clone().reshape(&[3, 2]).is_ok());
        assert!(t.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn params_carry_zeroed_grads() {
        let mut p = Tensor::<f64>::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(p.requires_grad());
        assert_eq!(p.grad().unwrap(), &[0.0; 3]);
        p.grad_mut().unwrap()[1] = 4.0;
        p.zero_grad();
        assert_eq!(p.grad().unwrap(), &[0.0; 3]);
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let x = Tensor::<f64>::from_vec(&[2, 2], vec![1.0, -2.0, 3.5, 0.5]).unwrap();
        let (s, g) = sum_loss(&x);
        assert_eq!(s, 3.0);
        assert_eq!(g.data(), &[1.0; 4]);
    }

    #[test]
    fn elementwise_ops_check_shapes() {
        let a = Tensor::<f32>::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f32>::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(add(&a, &b).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(mul(&a, &b).unwrap().data(), &[3.0, 8.0]);
        let c = Tensor::<f32>::zeros(&[3]);
        assert!(add(&a, &c).is_err());
    }
}
