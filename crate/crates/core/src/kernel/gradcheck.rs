use super::params::{Grads, ParamStore};
use crate::error::Result;
use crate::parallel::{self, Exec};

/// A model whose scalar loss on a batch can be evaluated deterministically
/// and differentiated analytically.
pub trait Differentiable: Clone + Send + Sync {
    type Batch: ?Sized + Sync;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// Loss with stochastic layers disabled.
    fn eval_loss(&self, batch: &Self::Batch) -> Result<f64>;
    /// Loss and gradients with stochastic layers disabled.
    fn eval_loss_and_grads(&self, batch: &Self::Batch) -> Result<(f64, Grads)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    /// Largest `|a − n|` over all coordinates.
    pub max_abs_error: f64,
    pub coordinates: usize,
}

/// `|a − n| / max(1e-12, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12)
}

/// Compares analytic gradients against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` on every coordinate.
pub fn grad_check<M: Differentiable>(model: &M, batch: &M::Batch, eps: f64, exec: Exec) -> Result<GradCheckReport> {
    let (_, grads) = model.eval_loss_and_grads(batch)?;
    let coords: Vec<(usize, usize)> = model
        .params()
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| (0..p.len()).map(move |i| (pi, i)))
        .collect();
    let chunk = coords.len().div_ceil(64).max(1);
    let results = parallel::map_chunks(exec, &coords, chunk, |part| -> Result<Vec<(usize, usize, f64)>> {
        let mut m = model.clone();
        let mut out = Vec::with_capacity(part.len());
        for &(pi, i) in part {
            let original = m.params().as_slice()[pi].values[i];
            m.params_mut().as_mut_slice()[pi].values[i] = original + eps;
            let plus = m.eval_loss(batch)?;
            m.params_mut().as_mut_slice()[pi].values[i] = original - eps;
            let minus = m.eval_loss(batch)?;
            m.params_mut().as_mut_slice()[pi].values[i] = original;
            out.push((pi, i, (plus - minus) / (2.0 * eps)));
        }
        Ok(out)
    });
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        max_abs_error: 0.0,
        coordinates: coords.len(),
    };
    for chunk in results {
        for (pi, i, numeric) in chunk? {
            let analytic = grads.0[pi][i];
            let err = relative_error(analytic, numeric);
            report.max_abs_error = report.max_abs_error.max((analytic - numeric).abs());
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((model.params().as_slice()[pi].name.clone(), i));
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
