//! Log-density targets over `(Y, aux)`.
//!
//! A target reports its log density together with the gradient with respect
//! to the matrix `Y` and to the constrained auxiliary parameters; everything
//! from `Y` back to sampler coordinates lives in [`crate::diff`].

use std::fmt::Debug;

use nalgebra::DMatrix;

use crate::givens::Shape;

mod aux;
mod data;
mod eigenmodel;
mod ppca;
pub(crate) mod probit;
mod uniform;

pub use aux::{aux_labels, aux_len, backward_aux, constrain_aux, unconstrain_aux, AuxBlock, AuxTransform};
pub use data::{parse_network_csv, parse_observations_csv, read_network_csv, read_observations_csv};
pub use eigenmodel::{
    eigenmodel_target, heldout_log_predictive, holdout_mask, intercept_only_log_predictive, synth_network, EigenDraw,
    EigenmodelTarget, NetworkData, SynthNetwork,
};
pub use ppca::{ppca_target, simulate_ppca, PpcaData, PpcaSimulation, PpcaTarget};
pub use uniform::{uniform_stiefel_target, UniformStiefel};

/// A log density over a Stiefel matrix and auxiliary parameters.
pub trait ModelTarget: Send + Sync + Debug {
    fn name(&self) -> &str;

    fn shape(&self) -> Shape;

    fn aux_blocks(&self) -> &[AuxBlock];

    /// Evaluate at `y` and constrained `aux`, writing `d logp / d Y` and
    /// `d logp / d aux`. Returns `-inf` outside the support.
    fn evaluate(&self, y: &DMatrix<f64>, aux: &[f64], grad_y: &mut DMatrix<f64>, grad_aux: &mut [f64]) -> f64;

    /// Suggested constrained starting values for the auxiliary parameters.
    fn default_aux(&self) -> Vec<f64>;
}
