//! Central finite-difference checks of analytic gradients.

use super::params::{Gradients, ParamId, ParameterStore};
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max |a - n| / max(|a| + |n|, GRAD_FLOOR)` over every checked coordinate.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Label, flat index, analytic and numeric value of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck {
            max_rel_error: 0.0,
            checked: 0,
            worst: None,
        }
    }

    fn record(&mut self, label: &str, index: usize, analytic: f64, numeric: f64) {
        let err = relative_error(analytic, numeric);
        self.checked += 1;
        if self.worst.is_none() || err > self.max_rel_error {
            self.max_rel_error = err;
            self.worst = Some((label.to_string(), index, analytic, numeric));
        }
    }
}

/// Magnitude below which gradients are compared absolutely. Central
/// differences of an O(10) loss carry rounding noise near `1e-11`.
pub const GRAD_FLOOR: f64 = 1e-8;

/// `|a - n| / max(|a| + |n|, GRAD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(GRAD_FLOOR)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Error::Contract(format!(
            "finite-difference epsilon {epsilon} outside [1e-6, 1e-4]"
        )));
    }
    Ok(())
}

fn finite(loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numeric(format!("non-finite loss {loss} during gradient check")))
    }
}

/// Checks a loss graph built by `build` from differentiable `inputs`.
///
/// `build` receives one input node per tensor and must return a `1 x 1` node.
pub fn check_gradients<F>(inputs: &[Tensor], epsilon: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    check_epsilon(epsilon)?;
    let eval = |xs: &[Tensor]| -> (Tape, Vec<NodeId>, NodeId) {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = xs.iter().map(|x| tape.input(x.clone())).collect();
        let out = build(&mut tape, &ids);
        (tape, ids, out)
    };

    let (tape, ids, out) = eval(inputs);
    finite(tape.value(out).item())?;
    let back = tape.backward(out);
    let analytic: Vec<Tensor> = ids
        .iter()
        .zip(inputs)
        .map(|(&id, x)| {
            back.grad(id)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(x.rows(), x.cols()))
        })
        .collect();

    let mut report = GradCheck::new();
    let mut xs = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        for k in 0..xs[which].len() {
            let orig = xs[which].data()[k];
            xs[which].data_mut()[k] = orig + epsilon;
            let (t, _, o) = eval(&xs);
            let plus = finite(t.value(o).item())?;
            xs[which].data_mut()[k] = orig - epsilon;
            let (t, _, o) = eval(&xs);
            let minus = finite(t.value(o).item())?;
            xs[which].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            report.record(&format!("input{which}"), k, grad.data()[k], numeric);
        }
    }
    Ok(report)
}

/// Checks parameter gradients of an arbitrary loss over a parameter store.
///
/// `loss_and_grads` must return the loss together with its analytic gradient;
/// `loss_only` is used for the perturbed evaluations. `stride` > 1 checks every
/// `stride`-th coordinate of each parameter.
pub fn check_param_gradients<L, G>(
    params: &ParameterStore,
    epsilon: f64,
    stride: usize,
    loss_and_grads: G,
    loss_only: L,
) -> Result<GradCheck>
where
    G: Fn(&ParameterStore) -> Result<(f64, Gradients)>,
    L: Fn(&ParameterStore) -> Result<f64>,
{
    check_epsilon(epsilon)?;
    let (loss, analytic) = loss_and_grads(params)?;
    finite(loss)?;
    let mut report = GradCheck::new();
    let mut probe = params.clone();
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let name = params.name(id).to_string();
        let n = params.get(id).len();
        for k in (0..n).step_by(stride.max(1)) {
            let orig = probe.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + epsilon;
            let plus = finite(loss_only(&probe)?)?;
            probe.get_mut(id).data_mut()[k] = orig - epsilon;
            let minus = finite(loss_only(&probe)?)?;
            probe.get_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            report.record(&name, k, analytic.get(id).data()[k], numeric);
        }
    }
    Ok(report)
}
