use std::f64::consts::LN_2;

use crate::env::{self, ChannelRealization, Objective, PowerAction};

use super::{SolverError, SolverResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachConfig {
    pub max_outer: usize,
    pub tol: f64,
}

impl Default for DinkelbachConfig {
    fn default() -> Self {
        Self {
            max_outer: 50,
            tol: 1e-8,
        }
    }
}

/// Projected gradient ascent settings for the subtracted subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Sufficient-increase constant of the Armijo test.
    pub armijo: f64,
    pub shrink: f64,
    pub initial_step: f64,
    /// Stop when the projected-gradient step `|P(p + g) - p|` falls below this.
    pub grad_tol: f64,
    pub max_steps: usize,
    /// Smallest trial step before the line search gives up.
    pub min_step: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            grad_tol: 1e-8,
            max_steps: 10_000,
            min_step: 1e-20,
        }
    }
}

/// `SE(p) - lambda * (sum(p) + n * p_circuit)`, SE in bits.
pub fn subtracted_objective(chan: &ChannelRealization, lambda: f64, p: &[f64]) -> f64 {
    env::sum_rate_bits(chan, p) - lambda * (p.iter().sum::<f64>() + chan.n_cells() as f64 * chan.p_circuit())
}

/// Analytic gradient of [`subtracted_objective`].
///
/// With `T_i` the total received power at `i` (noise included) and `I_i`
/// the same without the own signal, the natural-log sum rate has
/// `d/dp_k = g_kk / T_k + sum_{i != k} g_ik (1/T_i - 1/I_i)`.
pub fn subtracted_gradient(chan: &ChannelRealization, lambda: f64, p: &[f64], out: &mut [f64]) {
    let n = chan.n_cells();
    let mut inv_total = vec![0.0; n];
    let mut inv_interf = vec![0.0; n];
    for i in 0..n {
        let interf: f64 = chan.noise_power()
            + (0..n).filter(|&j| j != i).map(|j| chan.gain(i, j) * p[j]).sum::<f64>();
        inv_interf[i] = 1.0 / interf;
        inv_total[i] = 1.0 / (interf + chan.gain(i, i) * p[i]);
    }
    for k in 0..n {
        let mut d = chan.gain(k, k) * inv_total[k];
        for i in (0..n).filter(|&i| i != k) {
            d += chan.gain(i, k) * (inv_total[i] - inv_interf[i]);
        }
        out[k] = d / LN_2 - lambda;
    }
}

fn project(p: &mut [f64], p_max: f64) {
    for x in p {
        *x = x.clamp(0.0, p_max);
    }
}

/// Maximizes `SE(p) - lambda * power(p)` over the box `[0, p_max]^n` by
/// projected gradient ascent with Armijo backtracking. The result is a
/// stationary point reachable from `p_init`; the objective never decreases
/// along the way.
pub fn inner_subtracted_max(
    chan: &ChannelRealization,
    lambda: f64,
    p_init: &PowerAction,
) -> Result<PowerAction, SolverError> {
    inner_with(chan, lambda, p_init, &InnerConfig::default()).map(|(p, _)| p)
}

pub(crate) fn inner_with(
    chan: &ChannelRealization,
    lambda: f64,
    p_init: &PowerAction,
    cfg: &InnerConfig,
) -> Result<(PowerAction, usize), SolverError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SolverError::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if p_init.len() != chan.n_cells() {
        return Err(SolverError::InvalidArgument("p_init has wrong length".into()));
    }
    let n = chan.n_cells();
    let p_max = chan.p_max();
    let mut p = p_init.powers().to_vec();
    project(&mut p, p_max);
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f = subtracted_objective(chan, lambda, &p);
    let mut steps = 0;

    while steps < cfg.max_steps {
        subtracted_gradient(chan, lambda, &p, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(SolverError::NumericFailure {
                iteration: steps,
                what: "non-finite gradient".into(),
            });
        }
        let pg_norm = p
            .iter()
            .zip(&grad)
            .map(|(x, g)| {
                let d = (x + g).clamp(0.0, p_max) - x;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        if pg_norm < cfg.grad_tol {
            break;
        }
        steps += 1;

        let mut t = cfg.initial_step;
        let mut accepted = false;
        while t >= cfg.min_step {
            for k in 0..n {
                trial[k] = (p[k] + t * grad[k]).clamp(0.0, p_max);
            }
            let f_trial = subtracted_objective(chan, lambda, &trial);
            let predicted: f64 = grad.iter().zip(trial.iter().zip(&p)).map(|(g, (a, b))| g * (a - b)).sum();
            if f_trial >= f + cfg.armijo * predicted {
                accepted = true;
                break;
            }
            t *= cfg.shrink;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut p, &mut trial);
        f = subtracted_objective(chan, lambda, &p);
        if !f.is_finite() {
            return Err(SolverError::NumericFailure {
                iteration: steps,
                what: "non-finite objective".into(),
            });
        }
    }
    Ok((PowerAction::new(p), steps))
}

/// Dinkelbach iteration for network energy efficiency.
///
/// Starting from `lambda = EE(p_init)`, each outer step maximizes the
/// subtracted objective warm-started at the previous maximizer, then sets
/// `lambda` to the EE of the new point. Stops once the residual
/// `SE(p*) - lambda * power(p*)` is at most `tol`. `history` holds the
/// lambda sequence and `residuals` the residual of every outer step.
pub fn dinkelbach_max_ee(
    chan: &ChannelRealization,
    p_init: &PowerAction,
    max_outer: usize,
    tol: f64,
) -> Result<SolverResult, SolverError> {
    chan.check_admissible(p_init)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(SolverError::InvalidArgument("tol must be positive".into()));
    }
    let cfg = InnerConfig::default();
    let mut p = p_init.clone();
    let mut lambda = env::energy_efficiency_raw(chan, p.powers());
    let mut lambdas = vec![lambda];
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut outer = 0;

    while outer < max_outer {
        outer += 1;
        let (next, _) = inner_with(chan, lambda, &p, &cfg).map_err(|e| match e {
            SolverError::NumericFailure { what, .. } => SolverError::NumericFailure { iteration: outer, what },
            other => other,
        })?;
        p = next;
        let residual = subtracted_objective(chan, lambda, p.powers());
        if !residual.is_finite() {
            return Err(SolverError::NumericFailure {
                iteration: outer,
                what: "non-finite residual".into(),
            });
        }
        residuals.push(residual);
        if residual <= tol {
            converged = true;
            break;
        }
        lambda = env::energy_efficiency_raw(chan, p.powers());
        lambdas.push(lambda);
    }

    let mut result = SolverResult::from_point(Objective::Ee, chan, p, outer, converged)?;
    result.history = lambdas;
    result.residuals = residuals;
    Ok(result)
}
