//! Central finite-difference gradient checking.

use super::{Bindings, Graph, Gradients, NodeId};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error <= self.tolerance)
    }
}

/// `|a - n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Checks the analytic gradient of `loss` against central differences for every parameter entry.
pub fn grad_check(
    graph: &mut Graph,
    loss: NodeId,
    bindings: &Bindings,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let analytic = {
        let values = graph.forward(bindings)?;
        graph.backward(&values, loss)?
    };
    compare_gradients(graph, loss, bindings, &analytic, step, tolerance)
}

/// Compares a supplied gradient against central differences.
pub fn compare_gradients(
    graph: &mut Graph,
    loss: NodeId,
    bindings: &Bindings,
    analytic: &Gradients,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport { params: Vec::new(), tolerance };
    for p in 0..graph.params().len() {
        let mut worst: f64 = 0.0;
        for k in 0..graph.params()[p].value.numel() {
            let original = graph.params()[p].value.data()[k];
            graph.params_mut()[p].value.data_mut()[k] = original + step;
            let plus = scalar(graph, bindings, loss);
            graph.params_mut()[p].value.data_mut()[k] = original - step;
            let minus = scalar(graph, bindings, loss);
            graph.params_mut()[p].value.data_mut()[k] = original;
            let numeric = (plus? - minus?) / (2.0 * step);
            worst = worst.max(relative_error(analytic.params()[p].data()[k], numeric));
        }
        report.params.push(ParamCheck {
            name: graph.params()[p].name.clone(),
            max_rel_error: worst,
        });
    }
    Ok(report)
}

fn scalar(graph: &Graph, bindings: &Bindings, loss: NodeId) -> Result<f64> {
    Ok(graph.forward(bindings)?.get(loss).data()[0])
}
