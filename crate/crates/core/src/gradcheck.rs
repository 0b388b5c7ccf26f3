//! Central finite-difference verification of model gradients.

use crate::error::Result;
use crate::model::{Bound, ModelConfig, Parameterized};
use crate::numerics::{Graph, NodeId};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Entries checked per tensor, spread evenly plus the largest analytic one.
    pub per_tensor: usize,
    /// Denominator floor of the relative error; smaller gradients are in
    /// effect compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            per_tensor: 6,
            floor: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `tensor[index]` with the largest error.
    pub worst: String,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn run<P, F>(params: &P, build: &F) -> Result<(Graph, Bound, NodeId)>
where
    P: Parameterized,
    F: Fn(&mut Graph, &ModelConfig, &Bound) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let root = build(&mut g, params.config(), &bound)?;
    Ok((g, bound, root))
}

/// Compares backward-pass gradients of the loss built by `build` with
/// central differences on a sample of every parameter tensor.
pub fn check_gradients<P, F>(params: &P, build: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    P: Parameterized + Clone,
    F: Fn(&mut Graph, &ModelConfig, &Bound) -> Result<NodeId>,
{
    let (mut g, bound, root) = run(params, &build)?;
    let mut grads = g.backward(root)?;
    let names: Vec<(String, usize)> = params
        .named_tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.numel()))
        .collect();
    let analytic: Vec<Vec<f64>> = bound
        .ids()
        .into_iter()
        .zip(&names)
        .map(|(id, (_, n))| grads.take_or_zeros(id, *n))
        .collect();

    let eval = |p: &P| -> Result<f64> {
        let (g, _, root) = run(p, &build)?;
        Ok(g.scalar(root))
    };

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    let mut probe = params.clone();
    for (ti, (name, numel)) in names.iter().enumerate() {
        let grad = &analytic[ti];
        let k = opts.per_tensor.min(*numel);
        let mut picks: Vec<usize> = (0..k).map(|j| j * numel / k).collect();
        let argmax = (0..*numel)
            .max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()))
            .unwrap_or(0);
        if !picks.contains(&argmax) {
            picks.push(argmax);
        }
        for i in picks {
            let orig = probe.named_tensors()[ti].1.data()[i];
            let set = |p: &mut P, v: f64| p.named_tensors_mut()[ti].1.data_mut()[i] = v;
            set(&mut probe, orig + opts.step);
            let up = eval(&probe)?;
            set(&mut probe, orig - opts.step);
            let down = eval(&probe)?;
            set(&mut probe, orig);
            let numeric = (up - down) / (2.0 * opts.step);
            let err = relative_error(grad[i], numeric, opts.floor);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = format!("{name}[{i}] analytic {:.6e} numeric {:.6e}", grad[i], numeric);
            }
        }
    }
    Ok(report)
}
