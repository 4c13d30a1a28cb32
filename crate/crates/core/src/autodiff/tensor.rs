use std::ops::Deref;

/// A 1-D tensor of `f64`. Scalars are length-1 tensors; matrices are stored
/// flattened row-major by the ops that consume them.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor(pub Vec<f64>);

impl Tensor {
    pub fn scalar(x: f64) -> Tensor {
        Tensor(vec![x])
    }

    pub fn zeros(n: usize) -> Tensor {
        Tensor(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_scalar(&self) -> f64 {
        assert_eq!(self.0.len(), 1, "tensor of length {} is not a scalar", self.0.len());
        self.0[0]
    }
}

impl Deref for Tensor {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Tensor {
    fn from(v: Vec<f64>) -> Tensor {
        Tensor(v)
    }
}

/// Numerically stable logistic function; the two branches avoid overflow in
/// `exp` for large |x|.
pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Dot product with four independent accumulators. The lane split speeds up
/// the hot loops and, being a fixed order, keeps results bit-reproducible.
pub fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let lanes = n - n % 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < lanes {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut s = (s0 + s1) + (s2 + s3);
    while i < n {
        s += a[i] * b[i];
        i += 1;
    }
    s
}
