use crate::error::{Error, Result};
use crate::tensor::{ComplexMatrix, ComplexTensor};

/// Nested Tucker forward model with the known factors folded into the core:
/// `(core x_2 S) x_0 G`, shape `L x N x T x N²`. The unknown second and
/// fourth factors enter through [`NestedTuckerModel::angle_design`] and
/// [`NestedTuckerModel::delay_doppler_design`].
#[derive(Clone, Debug)]
pub struct NestedTuckerModel {
    folded: ComplexTensor,
    n: usize,
}

impl NestedTuckerModel {
    pub fn new(core: &ComplexTensor, g: &ComplexMatrix, s: &ComplexMatrix) -> Result<Self> {
        let n = g.ncols();
        let expected = [n, n, n.pow(4), n * n];
        if core.shape() != expected {
            return Err(Error::Shape(format!("core of shape {:?} does not match N = {n}", core.shape())));
        }
        if s.ncols() != n.pow(4) {
            return Err(Error::Shape(format!(
                "selection matrix has {} columns, expected N⁴ = {}",
                s.ncols(),
                n.pow(4)
            )));
        }
        let folded = core.mode_product(s, 2)?.mode_product(g, 0)?;
        Ok(Self { folded, n })
    }

    pub fn group_size(&self) -> usize {
        self.n
    }

    pub fn antennas(&self) -> usize {
        self.folded.shape()[0]
    }

    pub fn slots(&self) -> usize {
        self.folded.shape()[2]
    }

    /// `N x LT` matrix `P₁` with `[Y]_(1) = F1 P₁` for a given `1 x N²` angle row.
    pub fn angle_design(&self, p_prime: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.folded.mode_product(p_prime, 3)?.unfold(1)
    }

    /// `N² x LMQT` matrix `P₂` with `vec(Y)ᵀ = p′ P₂` for a given `MQ x N` factor.
    pub fn delay_doppler_design(&self, f1: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(self.delay_doppler_design_t(f1)?.transpose())
    }

    /// `P₂ᵀ`, which is the storage order of the last unfolding and so costs
    /// no permutation.
    pub fn delay_doppler_design_t(&self, f1: &ComplexMatrix) -> Result<ComplexMatrix> {
        let t = self.folded.mode_product(f1, 1)?;
        let cols = t.shape()[3];
        let rows = t.len() / cols;
        Ok(ComplexMatrix::from_vec(rows, cols, t.into_data()))
    }

    /// Unit-gain echo `L x MQ x T` for the given factors.
    pub fn reconstruct(&self, f1: &ComplexMatrix, p_prime: &ComplexMatrix) -> Result<ComplexTensor> {
        let column = self.delay_doppler_design_t(f1)? * p_prime.transpose();
        let shape = [self.antennas(), f1.nrows(), self.slots()];
        ComplexTensor::new(shape.to_vec(), column.as_slice().to_vec())
    }
}
