use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::softmax_cross_entropy;
use super::network::{Mode, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Parameters compared per tensor (all of them for smaller tensors).
    pub samples_per_tensor: usize,
    /// Chooses which parameters are sampled.
    pub seed: u64,
    /// Seed for the forward pass (dropout masks).
    pub forward_seed: u64,
    /// Denominator floor: gradients below this are compared absolutely.
    /// Central differences cannot resolve much below it in 64-bit.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-4,
            samples_per_tensor: 50,
            seed: 0,
            forward_seed: 0,
            floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name, flat index, analytic and numeric value at the maximum.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
    /// Samples where a ReLU or max-pool switched branch within ±ε; these are
    /// re-evaluated with the base point's masks and routes held fixed.
    pub kinks: usize,
    pub per_tensor: Vec<(String, f64)>,
}

/// Compares analytic gradients to central differences of the mean
/// cross-entropy loss, in train mode with a fixed forward seed.
pub fn grad_check(net: &Network<f64>, x: &Tensor<f64>, labels: &[usize], opts: GradCheckOptions) -> Result<GradCheckReport> {
    let (logits, cache) = net.forward(x, Mode::Train, opts.forward_seed)?;
    let (_, dlogits) = softmax_cross_entropy(&logits, labels)?;
    let grads = net.backward(&cache, &dlogits)?;
    grad_check_against(net, x, labels, &grads, opts)
}

/// Like [`grad_check`] but against caller-supplied gradients.
pub fn grad_check_against(
    net: &Network<f64>,
    x: &Tensor<f64>,
    labels: &[usize],
    analytic: &[Tensor<f64>],
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    if analytic.len() != net.params().len() {
        return Err(Error::dim("grad_check", "gradient list does not match parameters"));
    }
    let mut probe = net.clone();
    let base = probe.forward(x, Mode::Train, opts.forward_seed)?.1;
    let base_sig = base.signature();
    let names: Vec<String> = net.param_names().into_iter().map(String::from).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        kinks: 0,
        per_tensor: Vec::new(),
    };
    let eval = |probe: &mut Network<f64>, t: usize, j: usize, value: f64| -> Result<(f64, u64)> {
        probe.params_mut()[t].data_mut()[j] = value;
        let (logits, cache) = probe.forward(x, Mode::Train, opts.forward_seed)?;
        Ok((softmax_cross_entropy(&logits, labels)?.0, cache.signature()))
    };
    let eval_frozen = |probe: &mut Network<f64>, t: usize, j: usize, value: f64| -> Result<f64> {
        probe.params_mut()[t].data_mut()[j] = value;
        let logits = probe.forward_with_pattern(x, Mode::Train, opts.forward_seed, &base)?;
        Ok(softmax_cross_entropy(&logits, labels)?.0)
    };
    for t in 0..net.params().len() {
        let len = net.params()[t].len();
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(&[opts.seed, t as u64])));
        let budget = opts.samples_per_tensor.min(len);
        let mut tensor_max = 0.0f64;
        for &j in order.iter().take(budget) {
            let orig = net.params()[t].data()[j];
            let (mut lp, sp) = eval(&mut probe, t, j, orig + opts.epsilon)?;
            let (mut lm, sm) = eval(&mut probe, t, j, orig - opts.epsilon)?;
            if sp != base_sig || sm != base_sig {
                report.kinks += 1;
                lp = eval_frozen(&mut probe, t, j, orig + opts.epsilon)?;
                lm = eval_frozen(&mut probe, t, j, orig - opts.epsilon)?;
            }
            probe.params_mut()[t].data_mut()[j] = orig;
            let numeric = (lp - lm) / (2.0 * opts.epsilon);
            let a = analytic[t].data()[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            if report.worst.is_none() || rel > report.max_rel_error {
                report.worst = Some((names[t].clone(), j, a, numeric));
                report.max_rel_error = rel;
            }
            tensor_max = tensor_max.max(rel);
            report.checked += 1;
        }
        report.per_tensor.push((names[t].clone(), tensor_max));
    }
    Ok(report)
}
