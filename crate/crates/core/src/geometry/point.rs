//! Block vectors: primal points and dual (gradient-like) vectors.
//!
//! A saddle-point problem over `Δ × Δ` uses two blocks, a generic VI on a ball
//! uses one. Both types share the same storage; they are kept distinct so that
//! the pairing `⟨g, z⟩` always takes one of each.

use std::ops::{Add, Mul, Neg, Sub};

use ndarray::Array1;

use crate::error::{Error, Result};

macro_rules! block_vector {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            blocks: Vec<Array1<f64>>,
        }

        impl $name {
            pub fn new(blocks: Vec<Array1<f64>>) -> Self {
                Self { blocks }
            }

            pub fn from_vecs(blocks: Vec<Vec<f64>>) -> Self {
                Self::new(blocks.into_iter().map(Array1::from).collect())
            }

            pub fn single(block: Array1<f64>) -> Self {
                Self::new(vec![block])
            }

            pub fn zeros(shape: &[usize]) -> Self {
                Self::new(shape.iter().map(|&n| Array1::zeros(n)).collect())
            }

            pub fn blocks(&self) -> &[Array1<f64>] {
                &self.blocks
            }

            pub fn blocks_mut(&mut self) -> &mut [Array1<f64>] {
                &mut self.blocks
            }

            pub fn into_blocks(self) -> Vec<Array1<f64>> {
                self.blocks
            }

            pub fn block(&self, i: usize) -> &Array1<f64> {
                &self.blocks[i]
            }

            pub fn num_blocks(&self) -> usize {
                self.blocks.len()
            }

            /// Total number of real coordinates.
            pub fn len(&self) -> usize {
                self.blocks.iter().map(|b| b.len()).sum()
            }

            pub fn is_empty(&self) -> bool {
                self.len() == 0
            }

            pub fn shape(&self) -> Vec<usize> {
                self.blocks.iter().map(|b| b.len()).collect()
            }

            pub fn is_finite(&self) -> bool {
                self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
            }

            pub fn ensure_shape(&self, shape: &[usize]) -> Result<()> {
                if self.shape() == shape {
                    Ok(())
                } else {
                    Err(Error::Shape(format!(
                        "expected blocks {:?}, got {:?}",
                        shape,
                        self.shape()
                    )))
                }
            }

            pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
                self.blocks.iter().flat_map(|b| b.iter().copied())
            }

            pub fn to_flat(&self) -> Vec<f64> {
                self.iter().collect()
            }

            pub fn scaled(&self, alpha: f64) -> Self {
                Self::new(self.blocks.iter().map(|b| b * alpha).collect())
            }

            /// `self += alpha * other`
            pub fn axpy(&mut self, alpha: f64, other: &Self) {
                for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
                    a.scaled_add(alpha, b);
                }
            }

            pub fn max_abs(&self) -> f64 {
                self.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.blocks
                    .iter()
                    .zip(&other.blocks)
                    .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
                    .fold(0.0, f64::max)
            }

            pub fn l1_norm(&self) -> f64 {
                self.iter().map(f64::abs).sum()
            }

            pub fn l2_norm(&self) -> f64 {
                self.iter().map(|v| v * v).sum::<f64>().sqrt()
            }

            /// Euclidean inner product of two vectors of the same kind.
            pub fn inner(&self, other: &Self) -> f64 {
                self.blocks
                    .iter()
                    .zip(&other.blocks)
                    .map(|(a, b)| a.dot(b))
                    .sum()
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                $name::new(self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect())
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                $name::new(self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect())
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, rhs: f64) -> $name {
                self.scaled(rhs)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scaled(-1.0)
            }
        }
    };
}

block_vector!(Point);
block_vector!(DualVector);

impl DualVector {
    /// The duality pairing `⟨g, z⟩`.
    pub fn pair(&self, z: &Point) -> f64 {
        self.blocks.iter().zip(z.blocks()).map(|(g, x)| g.dot(x)).sum()
    }
}

impl Point {
    /// Uniform distribution on each block.
    pub fn uniform(shape: &[usize]) -> Self {
        Self::new(shape.iter().map(|&n| Array1::from_elem(n, 1.0 / n as f64)).collect())
    }
}
