use crate::env::{self, ChannelRealization, Objective, PowerAction};

use super::{SolverError, SolverResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-8,
        }
    }
}

/// Scalar WMMSE for sum spectral efficiency.
///
/// Works on amplitudes `v_i = sqrt(p_i)` and alternates the receiver,
/// weight and transmitter updates until the SE gain of one sweep drops
/// below `tol` or `max_iter` sweeps have run. `history[0]` is the SE of the
/// start point and `history[k]` the SE after sweep `k`.
pub fn wmmse_max_se(
    chan: &ChannelRealization,
    p_init: &PowerAction,
    max_iter: usize,
    tol: f64,
) -> Result<SolverResult, SolverError> {
    chan.check_admissible(p_init)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(SolverError::InvalidArgument("tol must be positive".into()));
    }
    let n = chan.n_cells();
    let v_max = chan.p_max().sqrt();
    let noise = chan.noise_power();
    let amp = |i: usize, j: usize| chan.gain(i, j).sqrt();

    let mut v: Vec<f64> = p_init.iter().map(|p| p.sqrt()).collect();
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut p: Vec<f64> = v.iter().map(|x| x * x).collect();
    let mut se = env::sum_rate_bits(chan, &p);
    let mut history = vec![se];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            let received: f64 = noise + (0..n).map(|j| chan.gain(i, j) * v[j] * v[j]).sum::<f64>();
            u[i] = amp(i, i) * v[i] / received;
            w[i] = 1.0 / (1.0 - u[i] * amp(i, i) * v[i]);
        }
        for i in 0..n {
            let num = w[i] * u[i] * amp(i, i);
            let den: f64 = (0..n).map(|j| w[j] * u[j] * u[j] * chan.gain(j, i)).sum();
            v[i] = if den > 0.0 {
                (num / den).clamp(0.0, v_max)
            } else if num > 0.0 {
                v_max
            } else {
                // u == 0 everywhere: all-zero power is a fixed point
                v[i]
            };
        }
        if let Some(bad) = v.iter().chain(&u).chain(&w).find(|x| !x.is_finite()) {
            return Err(SolverError::NumericFailure {
                iteration: iterations,
                what: format!("WMMSE update produced {bad}"),
            });
        }
        for (pi, vi) in p.iter_mut().zip(&v) {
            *pi = (vi * vi).min(chan.p_max());
        }
        let next = env::sum_rate_bits(chan, &p);
        history.push(next);
        let gain = next - se;
        se = next;
        if gain < tol {
            converged = true;
            break;
        }
    }

    let mut result =
        SolverResult::from_point(Objective::Se, chan, PowerAction::new(p), iterations, converged)?;
    result.history = history;
    Ok(result)
}
