//! Dense N-dimensional array in row-major NCHW layout.
//!
//! `Tensor<f32>` is the value carrier for activations, weights and gradients.
//! The element type is generic so the gradient-check harness can rerun layer
//! math in `f64`, where central finite differences are meaningful.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scalar types a [`Tensor`] can hold. Implemented for `f32` and `f64`.
pub trait Element:
    num_traits::Float + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + 'static
{
}

impl Element for f32 {}
impl Element for f64 {}

/// Elementwise binary operation selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Reduction selector for [`Tensor::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

/// Dense tensor: a shape plus contiguous row-major data.
///
/// Invariant: `shape.iter().product() == data.len()` and every extent is ≥ 1.
/// 4-D tensors follow the NCHW convention.
#[derive(Debug, Clone)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Bitwise equality (NaN-safe), used by persistence round-trip checks.
impl<T: Element> PartialEq for Tensor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::Shape(format!("shape {shape:?} overflows element count")))
}

impl<T: Element> Tensor<T> {
    /// Tensor of the given shape with every element equal to `fill`.
    pub fn filled(shape: &[usize], fill: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![fill; n],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::filled(shape, T::one())
    }

    /// Wrap existing data; `data.len()` must equal the shape's element count.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} implies {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-0 scalar tensor.
    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    /// Single element of a rank-0 or single-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.data.len() != 1 {
            return Err(Error::Shape(format!(
                "item() on tensor of {} elements",
                self.data.len()
            )));
        }
        Ok(self.data[0])
    }

    /// Same data under a new shape with an equal element count.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} elems) to {shape:?} ({n} elems)",
                self.shape,
                self.data.len()
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what}: shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// result[i] = a[i] op b[i]; shapes must match exactly (no broadcasting).
    pub fn elementwise(&self, other: &Self, op: BinaryOp) -> Result<Self> {
        self.same_shape(other, "elementwise")?;
        if op == BinaryOp::Div && other.data.iter().any(|&b| b == T::zero()) {
            return Err(Error::Numeric("elementwise div: zero divisor".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
            })
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, BinaryOp::Add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, BinaryOp::Sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, BinaryOp::Mul)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, BinaryOp::Div)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    fn rank2(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Shape(format!(
                "{what}: expected rank 2, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Standard matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.rank2("matmul lhs")?;
        let (k2, n) = other.rank2("matmul rhs")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul: inner extents differ ({k} vs {k2})"
            )));
        }
        let mut out = vec![T::zero(); m * n];
        matmul_into(&self.data, &other.data, &mut out, m, k, n);
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// Materialized transpose of a rank-2 tensor.
    pub fn transpose2(&self) -> Result<Self> {
        let (r, c) = self.rank2("transpose2")?;
        let mut data = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Self {
            shape: vec![c, r],
            data,
        })
    }

    /// Reduce over `axes`. Reduced extents are removed, or kept as 1 when
    /// `keep_dims` is set. `Mean` divides the sum by the reduced count.
    pub fn reduce(&self, axes: &[usize], op: ReduceOp, keep_dims: bool) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        for &ax in axes {
            if ax >= rank {
                return Err(Error::Shape(format!(
                    "reduce: axis {ax} out of range for rank {rank}"
                )));
            }
            if seen[ax] {
                return Err(Error::Shape(format!("reduce: duplicate axis {ax}")));
            }
            seen[ax] = true;
        }

        let out_shape: Vec<usize> = (0..rank)
            .filter_map(|d| match (seen[d], keep_dims) {
                (true, true) => Some(1),
                (true, false) => None,
                (false, _) => Some(self.shape[d]),
            })
            .collect();
        let out_len = out_shape.iter().product::<usize>().max(1);

        let init = match op {
            ReduceOp::Max => T::neg_infinity(),
            _ => T::zero(),
        };
        let mut out = vec![init; out_len];

        // Strides of the output laid over the kept input axes.
        let mut out_strides = vec![0usize; rank];
        let mut stride = 1;
        for d in (0..rank).rev() {
            if !seen[d] {
                out_strides[d] = stride;
                stride *= self.shape[d];
            }
        }

        let mut idx = vec![0usize; rank];
        for &v in &self.data {
            let mut o = 0;
            for d in 0..rank {
                o += idx[d] * out_strides[d];
            }
            match op {
                ReduceOp::Sum | ReduceOp::Mean => out[o] = out[o] + v,
                ReduceOp::Max => {
                    if v > out[o] {
                        out[o] = v;
                    }
                }
            }
            for d in (0..rank).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }

        if op == ReduceOp::Mean {
            let count = (0..rank)
                .filter(|&d| seen[d])
                .map(|d| self.shape[d])
                .product::<usize>();
            let c = T::from(count).expect("count fits element type");
            for v in &mut out {
                *v = *v / c;
            }
        }
        Ok(Self {
            shape: out_shape,
            data: out,
        })
    }

    /// Index of each row's maximum; ties break to the lowest index.
    pub fn argmax_rows(&self) -> Result<Vec<usize>> {
        let (rows, cols) = self.rank2("argmax_rows")?;
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &self.data[r * cols..(r + 1) * cols];
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            out.push(best);
        }
        Ok(out)
    }
}

/// Minimum work (m·k·n) before matmul rows are farmed out to rayon.
const PAR_MATMUL_WORK: usize = 1 << 17;

/// C += A·B with A: m×k, B: k×n, C: m×n, all row-major. Each output row is
/// accumulated sequentially in a fixed order, so the result is bitwise
/// deterministic regardless of thread scheduling.
pub(crate) fn matmul_into<T: Element>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    let row = |c_row: &mut [T], a_row: &[T]| {
        for (kk, &aik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                *cj = *cj + aik * bj;
            }
        }
    };
    if m * k * n >= PAR_MATMUL_WORK && m > 1 {
        c.par_chunks_mut(n)
            .zip(a.par_chunks(k))
            .for_each(|(c_row, a_row)| row(c_row, a_row));
    } else {
        for (c_row, a_row) in c.chunks_mut(n).zip(a.chunks(k)) {
            row(c_row, a_row);
        }
    }
}

/// C += Aᵀ·B with A: k×m, B: k×n, C: m×n. Used by conv/dense backward.
pub(crate) fn matmul_at_into<T: Element>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    k: usize,
    m: usize,
    n: usize,
) {
    if m * k * n >= PAR_MATMUL_WORK && m > 1 {
        c.par_chunks_mut(n).enumerate().for_each(|(i, c_row)| {
            for kk in 0..k {
                let aki = a[kk * m + i];
                let b_row = &b[kk * n..(kk + 1) * n];
                for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                    *cj = *cj + aki * bj;
                }
            }
        });
    } else {
        for (i, c_row) in c.chunks_mut(n).enumerate() {
            for kk in 0..k {
                let aki = a[kk * m + i];
                let b_row = &b[kk * n..(kk + 1) * n];
                for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                    *cj = *cj + aki * bj;
                }
            }
        }
    }
}

/// C += A·Bᵀ with A: m×k, B: n×k, C: m×n. Row-by-row dot products.
pub(crate) fn matmul_bt_into<T: Element>(
    a: &[T],
    b: &[T],
    c: &mut [T],
    m: usize,
    k: usize,
    n: usize,
) {
    let row = |c_row: &mut [T], a_row: &[T]| {
        for (j, cj) in c_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc = acc + av * bv;
            }
            *cj = *cj + acc;
        }
    };
    if m * k * n >= PAR_MATMUL_WORK && m > 1 {
        c.par_chunks_mut(n)
            .zip(a.par_chunks(k))
            .for_each(|(c_row, a_row)| row(c_row, a_row));
    } else {
        for (c_row, a_row) in c.chunks_mut(n).zip(a.chunks(k)) {
            row(c_row, a_row);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn create_fills() {
        let t = Tensor::<f32>::filled(&[2, 2], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
        let t = Tensor::<f32>::filled(&[1], 7.5).unwrap();
        assert_eq!(t.data(), &[7.5]);
        let t = Tensor::<f32>::filled(&[3, 2, 1, 1], 1.0).unwrap();
        assert_eq!(t.len(), 6);
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn create_rejects_zero_extent() {
        assert!(matches!(
            Tensor::<f32>::filled(&[2, 0], 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn elementwise_basics() {
        let a = Tensor::from_vec(&[2], vec![1.0f32, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0f32, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);

        let x = Tensor::from_vec(&[3], vec![1.5f32, -2.0, 9.0]).unwrap();
        let z = Tensor::zeros(&[3]).unwrap();
        assert_eq!(x.mul(&z).unwrap().data(), &[0.0; 3]);

        let n = Tensor::from_vec(&[2], vec![6.0f32, 8.0]).unwrap();
        let d = Tensor::from_vec(&[2], vec![2.0f32, 4.0]).unwrap();
        assert_eq!(n.div(&d).unwrap().data(), &[3.0, 2.0]);
    }

    #[test]
    fn elementwise_errors() {
        let a = Tensor::<f32>::zeros(&[2]).unwrap();
        let b = Tensor::<f32>::zeros(&[3]).unwrap();
        assert!(matches!(a.add(&b), Err(Error::Shape(_))));
        let z = Tensor::from_vec(&[2], vec![1.0f32, 0.0]).unwrap();
        assert!(matches!(a.div(&z), Err(Error::Numeric(_))));
    }

    #[test]
    fn matmul_identity_and_dot() {
        let i = Tensor::from_vec(&[2, 2], vec![1.0f32, 0.0, 0.0, 1.0]).unwrap();
        let m = Tensor::from_vec(&[2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(i.matmul(&m).unwrap().data(), m.data());

        let a = Tensor::from_vec(&[1, 2], vec![1.0f32, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![3.0f32, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_errors() {
        let a = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        assert!(matches!(a.matmul(&b), Err(Error::Shape(_))));
        let c = Tensor::<f32>::zeros(&[2, 3, 1]).unwrap();
        assert!(matches!(c.matmul(&a), Err(Error::Shape(_))));
    }

    /// Naive triple-loop oracle, kept independent of the kernel above.
    fn matmul_oracle(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let mut out = vec![0.0f64; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a.data()[i * k + kk] * b.data()[kk * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        Tensor::from_vec(&[m, n], out).unwrap()
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let a = Tensor::from_vec(&[5, 7], (0..35).map(|_| next()).collect()).unwrap();
        let b = Tensor::from_vec(&[7, 3], (0..21).map(|_| next()).collect()).unwrap();
        let got = a.matmul(&b).unwrap();
        let want = matmul_oracle(&a, &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-5, "{g} vs {w}");
        }
    }

    #[test]
    fn reduce_examples() {
        let m = Tensor::from_vec(&[2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let s = m.reduce(&[0, 1], ReduceOp::Sum, false).unwrap();
        assert_eq!(s.item().unwrap(), 10.0);

        let v = Tensor::from_vec(&[2], vec![2.0f32, 4.0]).unwrap();
        assert_eq!(v.reduce(&[0], ReduceOp::Mean, false).unwrap().item().unwrap(), 3.0);

        let m = Tensor::from_vec(&[2, 2], vec![1.0f32, 9.0, 5.0, 2.0]).unwrap();
        let mx = m.reduce(&[1], ReduceOp::Max, false).unwrap();
        assert_eq!(mx.data(), &[9.0, 5.0]);
    }

    #[test]
    fn reduce_axis_errors() {
        let m = Tensor::<f32>::zeros(&[2, 2]).unwrap();
        assert!(matches!(m.reduce(&[2], ReduceOp::Sum, false), Err(Error::Shape(_))));
        assert!(matches!(m.reduce(&[0, 0], ReduceOp::Sum, false), Err(Error::Shape(_))));
    }

    #[test]
    fn reduce_keep_dims() {
        let m = Tensor::from_vec(&[2, 3], vec![1.0f32; 6]).unwrap();
        let r = m.reduce(&[1], ReduceOp::Sum, true).unwrap();
        assert_eq!(r.shape(), &[2, 1]);
        assert_eq!(r.data(), &[3.0, 3.0]);
    }

    #[test]
    fn argmax_examples() {
        let m = Tensor::from_vec(&[2, 2], vec![0.1f32, 0.9, 0.8, 0.2]).unwrap();
        assert_eq!(m.argmax_rows().unwrap(), vec![1, 0]);
        let tie = Tensor::from_vec(&[1, 2], vec![0.5f32, 0.5]).unwrap();
        assert_eq!(tie.argmax_rows().unwrap(), vec![0]);
    }

    #[test]
    fn argmax_matches_linear_scan_oracle() {
        let mut state = 12345u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) % 1000) as f32 / 1000.0
        };
        let rows = 100;
        let cols = 7;
        let data: Vec<f32> = (0..rows * cols).map(|_| next()).collect();
        let t = Tensor::from_vec(&[rows, cols], data.clone()).unwrap();
        let got = t.argmax_rows().unwrap();
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            let mut best = 0;
            for j in 0..cols {
                if row[j] > row[best] {
                    best = j;
                }
            }
            assert_eq!(got[r], best);
        }
    }

    proptest! {
        #[test]
        fn matmul_associative_on_small_instances(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            b in proptest::collection::vec(-1.0f64..1.0, 16),
            c in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            let a = Tensor::from_vec(&[4, 4], a).unwrap();
            let b = Tensor::from_vec(&[4, 4], b).unwrap();
            let c = Tensor::from_vec(&[4, 4], c).unwrap();
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (l, r) in left.data().iter().zip(right.data()) {
                prop_assert!((l - r).abs() <= 1e-4);
            }
        }

        #[test]
        fn reduce_sum_matches_sequential_f64(
            data in proptest::collection::vec(-10.0f32..10.0, 1..200),
        ) {
            let n = data.len();
            let want: f64 = data.iter().map(|&v| v as f64).sum();
            let t = Tensor::from_vec(&[n], data).unwrap();
            let got = t.reduce(&[0], ReduceOp::Sum, false).unwrap().item().unwrap() as f64;
            let denom = want.abs().max(1.0);
            prop_assert!(((got - want) / denom).abs() <= 1e-4);
        }

        #[test]
        fn argmax_tie_breaks_to_lowest_index(
            vals in proptest::collection::vec(0.0f32..1.0, 4),
            dup in 0usize..4,
        ) {
            // Force a duplicated maximum and check the earliest wins.
            let mut row = vals;
            let max = row.iter().cloned().fold(f32::MIN, f32::max);
            row[dup] = max;
            let first = row.iter().position(|&v| v == max).unwrap();
            let t = Tensor::from_vec(&[1, 4], row).unwrap();
            prop_assert_eq!(t.argmax_rows().unwrap()[0], first);
        }
    }
}
