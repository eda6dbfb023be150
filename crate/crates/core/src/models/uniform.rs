use nalgebra::DMatrix;

use super::{AuxBlock, ModelTarget};
use crate::givens::Shape;

/// Constant density on `Y`. Sampling it through the Givens chart gives the
/// uniform (Haar) distribution because the change-of-measure term is added
/// by the gradient layer.
#[derive(Debug, Clone)]
pub struct UniformStiefel {
    shape: Shape,
}

pub fn uniform_stiefel_target(shape: Shape) -> UniformStiefel {
    UniformStiefel { shape }
}

impl ModelTarget for UniformStiefel {
    fn name(&self) -> &str {
        "uniform"
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    fn aux_blocks(&self) -> &[AuxBlock] {
        &[]
    }

    fn evaluate(&self, _y: &DMatrix<f64>, _aux: &[f64], grad_y: &mut DMatrix<f64>, _grad_aux: &mut [f64]) -> f64 {
        grad_y.fill(0.0);
        0.0
    }

    fn default_aux(&self) -> Vec<f64> {
        Vec::new()
    }
}
