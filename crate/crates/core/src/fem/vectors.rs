//! Coefficient vectors tagged by role.
//!
//! A [`PrimalVec`] holds nodal values of a P1 function on the interior
//! nodes. A [`DualVec`] holds the coefficients `r_i = <r, phi_i>` of a
//! functional against the interior basis. Arithmetic never mixes the two;
//! the only bridge is the pairing [`DualVec::pair`].

use std::ops::{Add, Deref, Index, Mul, Neg, Sub};

macro_rules! role_vec {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn zeros(n: usize) -> Self {
                $name(vec![0.0; n])
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn scaled(&self, alpha: f64) -> Self {
                $name(self.0.iter().map(|v| alpha * v).collect())
            }

            pub fn norm_inf(&self) -> f64 {
                crate::linalg::norm_inf(&self.0)
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl Index<usize> for $name {
            type Output = f64;

            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                $name(v)
            }
        }

        impl Add for &$name {
            type Output = $name;

            fn add(self, rhs: &$name) -> $name {
                assert_eq!(self.len(), rhs.len());
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
            }
        }

        impl Sub for &$name {
            type Output = $name;

            fn sub(self, rhs: &$name) -> $name {
                assert_eq!(self.len(), rhs.len());
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
            }
        }

        impl Neg for &$name {
            type Output = $name;

            fn neg(self) -> $name {
                self.scaled(-1.0)
            }
        }

        impl Mul<&$name> for f64 {
            type Output = $name;

            fn mul(self, rhs: &$name) -> $name {
                rhs.scaled(self)
            }
        }
    };
}

role_vec!(PrimalVec);
role_vec!(DualVec);

impl DualVec {
    /// `sum_i r_i v_i`.
    pub fn pair(&self, v: &PrimalVec) -> f64 {
        crate::linalg::dot(&self.0, &v.0)
    }
}
