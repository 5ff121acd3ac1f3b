//! Dense voxel storage shared by every layer kernel.
//!
//! Spatial data is stored x-fastest: the flat index of voxel `(x, y, z)` is
//! `(z * dim_y + y) * dim_x + x`. Multi-channel tensors are channel-major on
//! top of that layout.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

use crate::error::{Error, Result};

/// Floating point type the layer kernels are generic over. Training runs in
/// `f32`; gradient checks run the same kernels in `f64`.
pub trait Scalar: Float + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Spatial extent `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims3 {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Dims3 {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Dims3 { x, y, z }
    }

    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.y + y) * self.x + x
    }

    /// Inverse of [`Dims3::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.x;
        let y = (idx / self.x) % self.y;
        let z = idx / (self.x * self.y);
        (x, y, z)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }
}

impl std::fmt::Display for Dims3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// One single-channel hippocampal crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims3,
    voxels: Vec<f32>,
}

impl Volume {
    pub fn new(dims: Dims3, voxels: Vec<f32>) -> Result<Self> {
        if dims.x == 0 || dims.y == 0 || dims.z == 0 {
            return Err(Error::shape(format!("volume dims must be positive, got {dims}")));
        }
        if voxels.len() != dims.len() {
            return Err(Error::shape(format!(
                "volume {dims} needs {} voxels, got {}",
                dims.len(),
                voxels.len()
            )));
        }
        if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite voxel at index {i}")));
        }
        Ok(Volume { dims, voxels })
    }

    pub fn zeros(dims: Dims3) -> Self {
        Volume {
            dims,
            voxels: vec![0.0; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<f32> {
        self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.voxels[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f32) {
        let i = self.dims.index(x, y, z);
        self.voxels[i] = v;
    }

    /// Lift into a one-channel tensor of the requested scalar type.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor4<T> {
        Tensor4 {
            channels: 1,
            spatial: self.dims,
            values: self.voxels.iter().map(|&v| T::from_f64(v as f64)).collect(),
        }
    }
}

/// Feature maps between layers: `channels` stacked spatial grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    channels: usize,
    spatial: Dims3,
    values: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn new(channels: usize, spatial: Dims3, values: Vec<T>) -> Result<Self> {
        if channels == 0 || spatial.is_empty() {
            return Err(Error::shape("tensor dims must be positive"));
        }
        if values.len() != channels * spatial.len() {
            return Err(Error::shape(format!(
                "tensor ({channels}, {spatial}) needs {} values, got {}",
                channels * spatial.len(),
                values.len()
            )));
        }
        Ok(Tensor4 {
            channels,
            spatial,
            values,
        })
    }

    pub fn zeros(channels: usize, spatial: Dims3) -> Self {
        Tensor4 {
            channels,
            spatial,
            values: vec![T::zero(); channels * spatial.len()],
        }
    }

    pub fn filled(channels: usize, spatial: Dims3, v: T) -> Self {
        Tensor4 {
            channels,
            spatial,
            values: vec![v; channels * spatial.len()],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial(&self) -> Dims3 {
        self.spatial
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.spatial.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.spatial.len();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize, z: usize) -> T {
        self.values[c * self.spatial.len() + self.spatial.index(x, y, z)]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.spatial == other.spatial
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Numeric(format!("{what}: non-finite value at index {i}"))),
            None => Ok(()),
        }
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape("add: tensor shapes differ"));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor4 {
            channels: self.channels,
            spatial: self.spatial,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            channels: self.channels,
            spatial: self.spatial,
            values: self.values.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let d = Dims3::new(29, 21, 55);
        for &i in &[0, 1, 28, 29, 609, 33494] {
            let (x, y, z) = d.coords(i);
            assert_eq!(d.index(x, y, z), i);
        }
        assert_eq!(d.index(1, 0, 0), 1);
        assert_eq!(d.index(0, 1, 0), 29);
        assert_eq!(d.index(0, 0, 1), 29 * 21);
    }

    #[test]
    fn volume_rejects_bad_input() {
        let d = Dims3::new(2, 2, 2);
        assert!(matches!(Volume::new(d, vec![0.0; 7]), Err(Error::Shape(_))));
        let mut v = vec![0.0; 8];
        v[3] = f32::NAN;
        assert!(matches!(Volume::new(d, v), Err(Error::Numeric(_))));
        assert!(Volume::new(Dims3::new(0, 2, 2), vec![]).is_err());
    }

    #[test]
    fn tensor_channel_slices() {
        let d = Dims3::new(2, 1, 1);
        let t = Tensor4::<f64>::new(2, d, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.channel(1), &[3.0, 4.0]);
        assert_eq!(t.get(1, 1, 0, 0), 4.0);
    }
}
