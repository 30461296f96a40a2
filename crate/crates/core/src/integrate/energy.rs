use nalgebra::DVector;

use super::Trajectory;
use crate::error::{PhError, Result};
use crate::linalg;
use crate::system::PortHamiltonian;

/// Slack allowed in the decay check `H(x_{k+1}) ≤ H(x_k) + tol·(1 + |H(x_k)|)`.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Per-step discrete energy balance of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `|H(x_{k+1}) − H(x_k) − dt·(−[z_m; u_m]ᵀ W [z_m; u_m] + u_mᵀ y_m)|`.
    pub residuals: Vec<f64>,
    /// `H(x_{k+1}) − H(x_k)` per step.
    pub energy_change: Vec<f64>,
    pub max_residual: f64,
    /// All midpoint inputs are exactly zero.
    pub unforced: bool,
    /// `Some(true)` if an unforced run never gains energy beyond
    /// [`MONOTONE_TOL`]; `None` for forced runs.
    pub monotone: Option<bool>,
}

impl EnergyReport {
    pub fn steps(&self) -> usize {
        self.residuals.len()
    }

    /// Decay was required (`u ≡ 0`) and violated.
    pub fn decay_violated(&self) -> bool {
        self.monotone == Some(false)
    }
}

/// Recomputes the discrete balance of `traj` from `sys`, with midpoint
/// effort `z_m = z((x_k + x_{k+1})/2)` and the stored midpoint inputs.
pub fn energy_report<S: PortHamiltonian + ?Sized>(traj: &Trajectory, sys: &S) -> Result<EnergyReport> {
    let steps = traj.steps();
    if traj.midpoint_inputs().len() != steps {
        return Err(PhError::dim("midpoint inputs", steps, traj.midpoint_inputs().len()));
    }
    if let Some(n) = traj.state_dim() {
        if n != sys.state_dim() {
            return Err(PhError::dim("trajectory state", sys.state_dim(), n));
        }
    }
    let dt = traj.dt();
    let states = traj.states();
    let energies: Vec<f64> = states.iter().map(|x| sys.hamiltonian(x)).collect();
    let mut residuals = Vec::with_capacity(steps);
    let mut energy_change = Vec::with_capacity(steps);
    for (k, um) in traj.midpoint_inputs().iter().enumerate() {
        if um.len() != sys.input_dim() {
            return Err(PhError::dim("midpoint input", sys.input_dim(), um.len()));
        }
        let xm: DVector<f64> = (&states[k] + &states[k + 1]) * 0.5;
        let mats = sys.matrices(&xm);
        let z = sys.effort(&xm);
        let y = (&mats.port + &mats.port_dissipation).transpose() * &z
            + (&mats.feedthrough_sym - &mats.feedthrough_skew) * um;
        let zu = linalg::stack_vectors(&[z, um.clone()]);
        let supplied = -zu.dot(&(mats.w() * &zu)) + um.dot(&y);
        let dh = energies[k + 1] - energies[k];
        energy_change.push(dh);
        residuals.push((dh - dt * supplied).abs());
    }
    let unforced = traj.midpoint_inputs().iter().all(|u| u.iter().all(|&v| v == 0.0));
    let monotone = unforced.then(|| energies.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL * (1.0 + w[0].abs())));
    Ok(EnergyReport {
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        energy_change,
        unforced,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::integrate::{implicit_midpoint, zero_input, Method};
    use crate::system::LinearPhSystem;

    fn damped() -> LinearPhSystem {
        LinearPhSystem::explicit(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.3]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn midpoint_balance_is_exact() {
        let sys = damped();
        let u = |t: f64| DVector::from_vec(vec![(3.0 * t).sin()]);
        let traj = implicit_midpoint(&sys, &u, &DVector::from_vec(vec![1.0, -1.0]), 0.0, 5.0, 0.05).unwrap();
        let rep = energy_report(&traj, &sys).unwrap();
        assert_eq!(rep.steps(), 100);
        assert!(rep.max_residual <= 1e-12);
        assert!(!rep.unforced);
        assert_eq!(rep.monotone, None);
    }

    #[test]
    fn unforced_damped_run_is_monotone() {
        let sys = damped();
        let traj = implicit_midpoint(&sys, &zero_input(1), &DVector::from_vec(vec![1.0, 0.0]), 0.0, 2.0, 0.01).unwrap();
        let rep = energy_report(&traj, &sys).unwrap();
        assert_eq!(rep.monotone, Some(true));
        assert!(!rep.decay_violated());
    }

    #[test]
    fn energy_gain_is_flagged() {
        let sys = damped();
        let times = vec![0.0, 0.1];
        let states = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![2.0, 0.0])];
        let traj = Trajectory::from_states(Method::External, &sys, times, states, &zero_input(1)).unwrap();
        let rep = energy_report(&traj, &sys).unwrap();
        assert!(rep.decay_violated());
        assert!(rep.max_residual > 1.0);
    }

    #[test]
    fn empty_trajectory_gives_empty_report() {
        let sys = damped();
        let traj = Trajectory::from_states(Method::External, &sys, vec![], vec![], &zero_input(1)).unwrap();
        let rep = energy_report(&traj, &sys).unwrap();
        assert_eq!(rep.steps(), 0);
        assert_eq!(rep.max_residual, 0.0);
    }
}
