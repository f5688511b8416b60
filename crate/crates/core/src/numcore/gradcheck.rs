use serde::Serialize;

use super::params::{ParamInfo, ParamKind, Parameterized};
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Result of comparing one parameter tensor's analytic gradient with central differences.
#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    /// Entries where the one-sided differences disagree in a way no smooth
    /// function produces; the gradient is undefined there.
    pub kinks: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn non_differentiable(&self) -> bool {
        self.params.iter().any(|p| !p.kinks.is_empty())
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        !self.non_differentiable() && self.max_rel_error < tolerance
    }
}

/// Compares `analytic` against central differences of `loss_fn` around `params`.
///
/// Error per entry is `|analytic - central| / max(1, |central|)`.
pub fn finite_diff_check<S, P, F>(
    params: &P,
    analytic: &P,
    mut loss_fn: F,
    epsilon: f64,
) -> Result<GradCheckReport>
where
    S: Scalar,
    P: Parameterized<S>,
    F: FnMut(&P) -> Result<S>,
{
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [1e-6, 1e-3]"
        )));
    }
    let eval = |f: &mut F, p: &P| -> Result<f64> {
        let v = f(p)?.as_f64();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("loss".into()))
        }
    };

    let base = eval(&mut loss_fn, params)?;
    let grads: Vec<Vec<f64>> = analytic
        .params()
        .iter()
        .map(|(_, t)| t.data().iter().map(|g| g.as_f64()).collect())
        .collect();
    let names: Vec<String> = params.params().into_iter().map(|(i, _)| i.name).collect();
    if grads.len() != names.len() {
        return Err(Error::Shape(
            "analytic gradient registry differs from parameters".into(),
        ));
    }

    let mut work = params.clone();
    let mut checks = Vec::with_capacity(names.len());
    for (p, name) in names.into_iter().enumerate() {
        let n = grads[p].len();
        let mut check = ParamCheck {
            name,
            max_rel_error: 0.0,
            worst_index: 0,
            kinks: Vec::new(),
        };
        for k in 0..n {
            let orig = work.params()[p].1.data()[k];
            let h = S::lit(epsilon);
            set_entry(&mut work, p, k, orig + h);
            let plus = eval(&mut loss_fn, &work)?;
            set_entry(&mut work, p, k, orig - h);
            let minus = eval(&mut loss_fn, &work)?;
            set_entry(&mut work, p, k, orig);

            let central = (plus - minus) / (2.0 * epsilon);
            let forward = (plus - base) / epsilon;
            let backward = (base - minus) / epsilon;
            if (forward - backward).abs() / (forward.abs() + backward.abs()).max(1.0) > 0.5 {
                check.kinks.push(k);
            }
            let err = (grads[p][k] - central).abs() / central.abs().max(1.0);
            if err > check.max_rel_error {
                check.max_rel_error = err;
                check.worst_index = k;
            }
        }
        checks.push(check);
    }
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        epsilon,
        params: checks,
        max_rel_error,
    })
}

fn set_entry<S: Scalar, P: Parameterized<S>>(p: &mut P, which: usize, k: usize, v: S) {
    let mut all = p.params_mut();
    all[which].1.data_mut()[k] = v;
}

impl<S: Scalar> Parameterized<S> for Tensor2<S> {
    fn params(&self) -> Vec<(ParamInfo, &Tensor2<S>)> {
        vec![(ParamInfo::new("value", ParamKind::Weight), self)]
    }

    fn params_mut(&mut self) -> Vec<(ParamInfo, &mut Tensor2<S>)> {
        vec![(ParamInfo::new("value", ParamKind::Weight), self)]
    }
}
