//! Residuals and analytic Jacobians of the four factor kinds.

use super::EpochState;
use nalgebra::{DMatrix, DVector, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Rtk,
    MovingBase,
    DopplerVelocity,
    BaselineLength,
}

/// One residual term of the graph objective. All residuals are weighted by
/// a diagonal information matrix `I / sigma^2`.
#[derive(Debug, Clone)]
pub enum Factor {
    /// `X_i^j - measured`: antenna j pinned to base position + baseline.
    Rtk {
        epoch: usize,
        antenna: usize,
        measured: Vector3<f64>,
        sigma: f64,
    },
    /// `(X_i^to - X_i^from) - measured`: inter-antenna vector.
    MovingBase {
        epoch: usize,
        from: usize,
        to: usize,
        measured: Vector3<f64>,
        sigma: f64,
    },
    /// `(X_i^j - X_{i-1}^j) - displacement`: Doppler velocity times dt,
    /// connecting epochs (epoch-1, epoch).
    DopplerVelocity {
        epoch: usize,
        antenna: usize,
        displacement: Vector3<f64>,
        sigma: f64,
    },
    /// Antenna separations: `(|X2-X1| - L12, |X4-X3| - L34)`, or their sum
    /// as a single scalar in the printed compatibility form.
    BaselineLength {
        epoch: usize,
        l12: f64,
        l34: f64,
        sigma: f64,
        scalar_form: bool,
    },
}

fn antenna_pos(state: &EpochState, j: usize) -> Vector3<f64> {
    Vector3::new(state[3 * j], state[3 * j + 1], state[3 * j + 2])
}

impl Factor {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factor::Rtk { .. } => FactorKind::Rtk,
            Factor::MovingBase { .. } => FactorKind::MovingBase,
            Factor::DopplerVelocity { .. } => FactorKind::DopplerVelocity,
            Factor::BaselineLength { .. } => FactorKind::BaselineLength,
        }
    }

    /// Epochs this factor touches: (primary, optional earlier epoch).
    pub fn epochs(&self) -> (usize, Option<usize>) {
        match self {
            Factor::Rtk { epoch, .. }
            | Factor::MovingBase { epoch, .. }
            | Factor::BaselineLength { epoch, .. } => (*epoch, None),
            Factor::DopplerVelocity { epoch, .. } => (*epoch, Some(*epoch - 1)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factor::BaselineLength { scalar_form, .. } => {
                if *scalar_form {
                    1
                } else {
                    2
                }
            }
            _ => 3,
        }
    }

    /// Per-component standard deviation behind the information matrix.
    pub fn sigma(&self) -> f64 {
        match self {
            Factor::Rtk { sigma, .. }
            | Factor::MovingBase { sigma, .. }
            | Factor::DopplerVelocity { sigma, .. }
            | Factor::BaselineLength { sigma, .. } => *sigma,
        }
    }

    pub fn residual(&self, states: &[EpochState]) -> DVector<f64> {
        match self {
            Factor::Rtk {
                epoch,
                antenna,
                measured,
                ..
            } => {
                let r = antenna_pos(&states[*epoch], *antenna) - measured;
                DVector::from_column_slice(r.as_slice())
            }
            Factor::MovingBase {
                epoch,
                from,
                to,
                measured,
                ..
            } => {
                let s = &states[*epoch];
                let r = antenna_pos(s, *to) - antenna_pos(s, *from) - measured;
                DVector::from_column_slice(r.as_slice())
            }
            Factor::DopplerVelocity {
                epoch,
                antenna,
                displacement,
                ..
            } => {
                let r = antenna_pos(&states[*epoch], *antenna)
                    - antenna_pos(&states[*epoch - 1], *antenna)
                    - displacement;
                DVector::from_column_slice(r.as_slice())
            }
            Factor::BaselineLength {
                epoch,
                l12,
                l34,
                scalar_form,
                ..
            } => {
                let s = &states[*epoch];
                let front = (antenna_pos(s, 1) - antenna_pos(s, 0)).norm() - l12;
                let rear = (antenna_pos(s, 3) - antenna_pos(s, 2)).norm() - l34;
                if *scalar_form {
                    DVector::from_column_slice(&[front + rear])
                } else {
                    DVector::from_column_slice(&[front, rear])
                }
            }
        }
    }

    /// Analytic Jacobian blocks: one (epoch, dim x 12) entry per involved
    /// epoch.
    pub fn jacobians(&self, states: &[EpochState]) -> Vec<(usize, DMatrix<f64>)> {
        match self {
            Factor::Rtk { epoch, antenna, .. } => {
                let mut j = DMatrix::zeros(3, 12);
                for k in 0..3 {
                    j[(k, 3 * antenna + k)] = 1.0;
                }
                vec![(*epoch, j)]
            }
            Factor::MovingBase {
                epoch, from, to, ..
            } => {
                let mut j = DMatrix::zeros(3, 12);
                for k in 0..3 {
                    j[(k, 3 * to + k)] = 1.0;
                    j[(k, 3 * from + k)] = -1.0;
                }
                vec![(*epoch, j)]
            }
            Factor::DopplerVelocity { epoch, antenna, .. } => {
                let mut jc = DMatrix::zeros(3, 12);
                let mut jp = DMatrix::zeros(3, 12);
                for k in 0..3 {
                    jc[(k, 3 * antenna + k)] = 1.0;
                    jp[(k, 3 * antenna + k)] = -1.0;
                }
                vec![(*epoch, jc), (*epoch - 1, jp)]
            }
            Factor::BaselineLength {
                epoch, scalar_form, ..
            } => {
                let s = &states[*epoch];
                let d12 = antenna_pos(s, 1) - antenna_pos(s, 0);
                let d34 = antenna_pos(s, 3) - antenna_pos(s, 2);
                let u12 = d12 / d12.norm().max(1e-12);
                let u34 = d34 / d34.norm().max(1e-12);
                let rows = if *scalar_form { 1 } else { 2 };
                let mut j = DMatrix::zeros(rows, 12);
                let rear_row = if *scalar_form { 0 } else { 1 };
                for k in 0..3 {
                    j[(0, 3 + k)] = u12[k];
                    j[(0, k)] = -u12[k];
                    j[(rear_row, 9 + k)] = u34[k];
                    j[(rear_row, 6 + k)] = -u34[k];
                }
                vec![(*epoch, j)]
            }
        }
    }
}
