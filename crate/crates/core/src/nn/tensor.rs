use alloc::vec;
use alloc::vec::Vec;

use super::NnError;

/// Dense `(batch, channels, length)` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    b: usize,
    c: usize,
    l: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(b: usize, c: usize, l: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != b * c * l {
            return Err(NnError::Shape {
                op: "tensor",
                expected: [b, c, l],
                got: [data.len(), 1, 1],
            });
        }
        Ok(Self { b, c, l, data })
    }

    pub fn zeros(b: usize, c: usize, l: usize) -> Self {
        Self {
            b,
            c,
            l,
            data: vec![0.0; b * c * l],
        }
    }

    pub fn filled(b: usize, c: usize, l: usize, value: f64) -> Self {
        Self {
            b,
            c,
            l,
            data: vec![value; b * c * l],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.b, self.c, self.l]
    }

    pub fn batch(&self) -> usize {
        self.b
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn length(&self) -> usize {
        self.l
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

    #[inline]
    pub fn index(&self, b: usize, c: usize, l: usize) -> usize {
        (b * self.c + c) * self.l + l
    }

    pub fn at(&self, b: usize, c: usize, l: usize) -> f64 {
        self.data[self.index(b, c, l)]
    }

    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let s = (b * self.c + c) * self.l;
        &self.data[s..s + self.l]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let s = (b * self.c + c) * self.l;
        &mut self.data[s..s + self.l]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `Σ self·other`; shapes must agree.
    pub fn dot(&self, other: &Tensor3) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub(crate) fn expect_dims(&self, op: &'static str, expected: [Option<usize>; 3]) -> Result<(), NnError> {
        let got = self.dims();
        let ok = expected
            .iter()
            .zip(got)
            .all(|(e, g)| e.is_none_or(|e| e == g));
        if ok {
            Ok(())
        } else {
            Err(NnError::Shape {
                op,
                expected: [
                    expected[0].unwrap_or(got[0]),
                    expected[1].unwrap_or(got[1]),
                    expected[2].unwrap_or(got[2]),
                ],
                got,
            })
        }
    }
}
