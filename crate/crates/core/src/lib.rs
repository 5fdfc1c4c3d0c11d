//! Discrete jet-bundle field theory on periodic lattices: gauge connections,
//! their curvature, the covariant Hamiltonian (De Donder–Weyl) formulation,
//! multimomentum connections, gauge transformations and the triad/spin
//! reformulation of three-dimensional Einstein–Cartan gravity.

#![allow(clippy::needless_range_loop)]

/// Typed wrapper around a [`lattice::LatticeField`] with a fixed component layout
/// determined by the algebra dimension `r` and the base dimension `m`.
macro_rules! lattice_wrapper {
    ($(#[$meta:meta])* $name:ident, |$r:ident, $m:ident| $layout:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            values: $crate::lattice::LatticeField,
            r: usize,
        }

        impl $name {
            /// Component layout for algebra dimension `r` on an `m`-dimensional base.
            pub fn layout($r: usize, $m: usize) -> $crate::lattice::Shape {
                $layout
            }

            pub fn zeros(grid: &$crate::lattice::Grid, r: usize) -> Self {
                Self {
                    values: $crate::lattice::LatticeField::zeros(grid, Self::layout(r, grid.dim())),
                    r,
                }
            }

            /// Wrap an existing field, checking its layout and finiteness.
            pub fn from_field(values: $crate::lattice::LatticeField, r: usize) -> $crate::Result<Self> {
                let expected = Self::layout(r, values.grid().dim());
                if values.shape() != &expected {
                    return Err($crate::Error::ShapeMismatch(format!(
                        "{}: expected layout {:?}, got {:?}",
                        stringify!($name),
                        expected.slots(),
                        values.shape().slots()
                    )));
                }
                if !values.is_finite() {
                    return Err($crate::Error::NonFinite(stringify!($name).into()));
                }
                Ok(Self { values, r })
            }

            /// Fill from a function of the node coordinates.
            pub fn from_coord_fn<F>(grid: &$crate::lattice::Grid, r: usize, f: F) -> Self
            where
                F: Fn(&[f64], &mut [f64]) + Sync + Send,
            {
                Self {
                    values: $crate::lattice::LatticeField::from_coord_fn(grid, Self::layout(r, grid.dim()), f),
                    r,
                }
            }

            /// Fill from a function of the node index.
            pub fn from_node_fn<F>(grid: &$crate::lattice::Grid, r: usize, f: F) -> Self
            where
                F: Fn(usize, &mut [f64]) + Sync + Send,
            {
                Self {
                    values: $crate::lattice::LatticeField::from_node_fn(grid, Self::layout(r, grid.dim()), f),
                    r,
                }
            }

            /// Seeded band-limited random field.
            pub fn random(
                grid: &$crate::lattice::Grid,
                r: usize,
                seed: u64,
                kmax: u32,
                amplitude: f64,
            ) -> $crate::Result<Self> {
                let values = $crate::lattice::random_smooth(grid, Self::layout(r, grid.dim()), seed, kmax, amplitude)?;
                Ok(Self { values, r })
            }

            pub fn r(&self) -> usize {
                self.r
            }

            pub fn grid(&self) -> &$crate::lattice::Grid {
                self.values.grid()
            }

            pub fn values(&self) -> &$crate::lattice::LatticeField {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut $crate::lattice::LatticeField {
                &mut self.values
            }

            pub fn into_values(self) -> $crate::lattice::LatticeField {
                self.values
            }

            /// Packed component block at one node.
            pub fn at(&self, node: usize) -> &[f64] {
                self.values.at(node)
            }

            pub fn add(&self, other: &Self) -> $crate::Result<Self> {
                Ok(Self { values: self.values.add(&other.values)?, r: self.r })
            }

            pub fn sub(&self, other: &Self) -> $crate::Result<Self> {
                Ok(Self { values: self.values.sub(&other.values)?, r: self.r })
            }

            /// `self + alpha * other`
            pub fn axpy(&self, alpha: f64, other: &Self) -> $crate::Result<Self> {
                Ok(Self { values: self.values.axpy(alpha, &other.values)?, r: self.r })
            }

            pub fn scale(&self, alpha: f64) -> Self {
                Self { values: self.values.scale(alpha), r: self.r }
            }
        }
    };
}

pub mod algebra;
pub mod connection;
pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod lattice;
pub mod multimomentum;
pub mod triad;

pub use error::{Error, Result};
