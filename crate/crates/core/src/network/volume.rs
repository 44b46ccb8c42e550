use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::voxel::VoxelGrid;

/// Channel-major feature volume: `data[c * side^3 + x + side*y + side^2*z]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    channels: usize,
    side: usize,
    data: Vec<T>,
}

impl<T: Scalar> Volume<T> {
    pub fn zeros(channels: usize, side: usize) -> Self {
        Self {
            channels,
            side,
            data: vec![T::zero(); channels * side.pow(3)],
        }
    }

    pub fn from_data(channels: usize, side: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * side.pow(3) {
            return Err(Error::Shape(format!(
                "{} values for a {channels}x{side}^3 volume",
                data.len()
            )));
        }
        Ok(Self { channels, side, data })
    }

    pub fn from_grid(grid: &VoxelGrid) -> Self {
        Self {
            channels: 1,
            side: grid.resolution(),
            data: grid.to_scalars(),
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of spatial positions, `side^3`.
    #[inline]
    pub fn positions(&self) -> usize {
        self.side.pow(3)
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

    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.positions();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let p = self.positions();
        &mut self.data[c * p..(c + 1) * p]
    }

    /// Feature vector at spatial position `pos`.
    pub fn feature(&self, pos: usize, out: &mut [T]) {
        let p = self.positions();
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.data[c * p + pos];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.channels == other.channels && self.side == other.side
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks volumes of equal side along the channel axis.
    pub fn concat(parts: &[&Volume<T>]) -> Result<Self> {
        let side = parts
            .first()
            .map(|p| p.side)
            .ok_or_else(|| Error::Shape("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.side != side) {
            return Err(Error::Shape("concatenated volumes differ in size".into()));
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * side.pow(3));
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self { channels, side, data })
    }

    /// Inverse of [`Volume::concat`].
    pub fn split(&self, widths: &[usize]) -> Vec<Volume<T>> {
        let p = self.positions();
        let mut start = 0;
        widths
            .iter()
            .map(|&w| {
                let v = Volume {
                    channels: w,
                    side: self.side,
                    data: self.data[start * p..(start + w) * p].to_vec(),
                };
                start += w;
                v
            })
            .collect()
    }
}
