//! The fixed tiny instance used to validate analytic gradients end to end.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::graphdata::DynamicBrainGraph;
use crate::model::{param_group, FgsanModel, ModelConfig, PreparedGraph, Variant};
use crate::numcore::rng::{stream, Stream};
use crate::numcore::{finite_diff_check, Activation, GradCheckReport, Parameterized, Tensor2};

pub const GRADCHECK_REGIONS: usize = 5;
pub const GRADCHECK_DIM: usize = 4;
pub const GRADCHECK_SAMPLES: usize = 3;
pub const GRADCHECK_EPSILON: f64 = 1e-4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub struct GradcheckInstance {
    pub model: FgsanModel<f64>,
    pub batch: Vec<PreparedGraph<f64>>,
    /// Frozen selector noise.
    pub noise: Vec<f64>,
}

/// 5 regions, 4 feature dims, three width-4 layers, 3 samples. Every
/// parameter group is randomized so that no gradient is trivially zero.
pub fn gradcheck_instance(seed: u64, variant: Variant) -> Result<GradcheckInstance> {
    let mut rng = stream(seed, Stream::Synth);
    let (n, d) = (GRADCHECK_REGIONS, GRADCHECK_DIM);
    let graphs: Vec<DynamicBrainGraph> = (0..GRADCHECK_SAMPLES)
        .map(|s| {
            let mut x = Tensor2::zeros(n, d);
            x.data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-1.5..1.5));
            let connectivity = (0..2)
                .map(|_| {
                    let mut a = Tensor2::zeros(n, n);
                    for i in 0..n {
                        a.set(i, i, 1.0);
                        for j in 0..i {
                            let v: f64 = rng.gen();
                            a.set(i, j, v);
                            a.set(j, i, v);
                        }
                    }
                    a
                })
                .collect();
            DynamicBrainGraph {
                node_features: x,
                connectivity,
                label: u8::from(s % 2 == 1),
            }
        })
        .collect();

    let config = ModelConfig {
        hidden_dims: vec![d; 3],
        mlp_hidden: Some(2),
        activation: Activation::Tanh,
        ..ModelConfig::default()
    };
    let batch = PreparedGraph::prepare_all(&graphs, &config)?;
    let mut model = FgsanModel::init(&config, variant, d, n, seed)?;
    for (info, t) in model.params_mut() {
        let is_matrix = info.name.ends_with("weight") && !info.name.starts_with("mlp.out");
        for v in t.data_mut() {
            if is_matrix {
                *v += rng.gen_range(-0.3..0.3);
            } else {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
    }
    if !variant.uses_spatial() {
        model.encoder.spatial.bias.fill(0.0);
    }
    let noise = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
    Ok(GradcheckInstance {
        model,
        batch,
        noise,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupError {
    pub group: String,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckOutcome {
    pub seed: u64,
    pub groups: Vec<GroupError>,
    pub max_rel_error: f64,
    pub non_differentiable: bool,
    pub passed: bool,
    pub report: GradCheckReport,
}

/// Full-loss finite-difference check on the tiny instance. `corrupt` perturbs
/// the analytic gradient, as a negative control.
pub fn run_gradcheck(seed: u64, corrupt: bool) -> Result<GradcheckOutcome> {
    let inst = gradcheck_instance(seed, Variant::Full)?;
    let batch: Vec<&PreparedGraph<f64>> = inst.batch.iter().collect();
    let (_, mut grads) = inst.model.loss_and_grad(&batch, &inst.noise)?;
    if corrupt {
        if let Some((_, t)) = grads.params_mut().into_iter().next() {
            t.data_mut()[0] += 0.5;
        }
    }
    let report = finite_diff_check(
        &inst.model,
        &grads,
        |m: &FgsanModel<f64>| Ok(m.loss(&batch, &inst.noise)?.total),
        GRADCHECK_EPSILON,
    )?;
    let mut groups: Vec<GroupError> = Vec::new();
    for p in &report.params {
        let group = param_group(&p.name);
        match groups.iter_mut().find(|g| g.group == group) {
            Some(g) => g.max_rel_error = g.max_rel_error.max(p.max_rel_error),
            None => groups.push(GroupError {
                group: group.to_string(),
                max_rel_error: p.max_rel_error,
            }),
        }
    }
    Ok(GradcheckOutcome {
        seed,
        groups,
        max_rel_error: report.max_rel_error,
        non_differentiable: report.non_differentiable(),
        passed: report.passes(GRADCHECK_TOLERANCE),
        report,
    })
}
