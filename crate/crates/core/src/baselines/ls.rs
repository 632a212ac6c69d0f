use super::EffectiveChannel;
use crate::error::{Error, Result};
use crate::tensor::{lstsq, ComplexMatrix, ComplexTensor};

#[derive(Clone, Debug)]
pub struct LsEstimate {
    pub channel: EffectiveChannel,
    /// Numerical rank of the selection matrix.
    pub rank: usize,
}

/// Unstructured estimate `pinv(S) [Y]_(2)` of the effective channel.
///
/// The selection matrix of a single group never has more than
/// `N²(N² + 1) / 2` independent rows, so the solve is minimum norm; the true
/// channel lies in the row space and is still recovered exactly without noise.
pub fn direct_ls(y: &ComplexTensor, s: &ComplexMatrix, pinv_tol: f64) -> Result<LsEstimate> {
    let (t, cols) = s.shape();
    let n4 = cols;
    if y.order() != 3 || y.shape()[2] != t {
        return Err(Error::Shape(format!(
            "echo of shape {:?} does not match a selection matrix with {t} slots",
            y.shape()
        )));
    }
    if t < n4 {
        return Err(Error::Identifiability(format!("direct LS needs T >= N⁴, got T = {t} < {n4}")));
    }
    let solved = lstsq(s, &y.unfold(2)?, pinv_tol)?;
    Ok(LsEstimate { channel: EffectiveChannel { matrix: solved.matrix }, rank: solved.rank })
}
