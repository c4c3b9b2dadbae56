//! Central finite-difference checks of the analytic gradients, in f64.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{self, ConvSpec, LayerKind, LayerParams, LayerSpec, Mode};
use crate::models::{InitScheme, NetSpec, Network};
use crate::optim::euclidean_loss;
use crate::tensor::Tensor;

/// `|a - n| / max(|a|, |n|, 1e-12)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub name: String,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates left out because the perturbation flipped a ReLU, a
    /// pooling argmax or a maxout winner, so the difference straddles a kink.
    pub skipped: usize,
    pub max_rel_error: f64,
    /// `(flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(usize, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub label: String,
    /// The input block, then one weight and one bias block per weight layer.
    pub blocks: Vec<BlockReport>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    /// Every block compared at least one coordinate and stayed under
    /// `tolerance`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.blocks.iter().all(|b| b.checked > 0) && self.max_rel_error() < tolerance
    }

    pub fn param_blocks(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks.iter().filter(|b| b.name != "input")
    }
}

/// Renders reports as a table with a PASS/FAIL column against `tolerance`.
pub fn render_reports(reports: &[GradReport], tolerance: f64) -> String {
    let width = reports
        .iter()
        .flat_map(|r| r.blocks.iter().map(move |b| r.label.len() + b.name.len() + 1))
        .chain([5])
        .max()
        .unwrap_or(5);
    let mut s = format!(
        "{:<width$}  {:>8}  {:>8}  {:>12}  result\n",
        "block", "checked", "kinks", "max rel err"
    );
    for r in reports {
        for b in &r.blocks {
            let name = format!("{} {}", r.label, b.name);
            let verdict = if b.checked > 0 && b.max_rel_error < tolerance { "PASS" } else { "FAIL" };
            writeln!(
                s,
                "{name:<width$}  {:>8}  {:>8}  {:>12.3e}  {verdict}",
                b.checked, b.skipped, b.max_rel_error
            )
            .unwrap();
        }
    }
    s
}

/// How much of each block to perturb.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub epsilon: f64,
    /// Check at most this many randomly chosen coordinates per block.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_coords: None,
            seed: 0,
        }
    }
}

impl CheckOptions {
    fn validate(&self) -> Result<()> {
        if !(1e-7..=1e-3).contains(&self.epsilon) {
            return Err(Error::config(format!(
                "finite-difference epsilon {} outside [1e-7, 1e-3]",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn coords(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match self.max_coords {
            Some(k) if k < len => {
                let mut v = index::sample(rng, len, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        }
    }
}

fn finite(t: &Tensor<f64>, what: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        let i = t.data().iter().position(|v| !v.is_finite()).unwrap();
        Err(Error::NonFinite(format!("{what} at index {i} ({})", t.data()[i])))
    }
}

/// Compares `analytic` against central differences of `loss` while
/// perturbing the block selected by `slot`. `loss` also reports whether the
/// perturbed pass kept every branch of the unperturbed one; coordinates where
/// either side did not are counted as skipped.
fn check_block<S>(
    name: String,
    state: &mut S,
    slot: impl Fn(&mut S) -> &mut Tensor<f64>,
    analytic: &Tensor<f64>,
    loss: &impl Fn(&S) -> Result<(f64, bool)>,
    opts: &CheckOptions,
    rng: &mut ChaCha8Rng,
) -> Result<BlockReport> {
    finite(analytic, &format!("analytic gradient of {name}"))?;
    let coords = opts.coords(analytic.len(), rng);
    let mut report = BlockReport {
        name,
        checked: 0,
        skipped: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for i in coords {
        let orig = slot(state).data()[i];
        slot(state).data_mut()[i] = orig + opts.epsilon;
        let (plus, plus_smooth) = loss(state)?;
        slot(state).data_mut()[i] = orig - opts.epsilon;
        let (minus, minus_smooth) = loss(state)?;
        slot(state).data_mut()[i] = orig;
        if !(plus_smooth && minus_smooth) {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let numeric = (plus - minus) / (2.0 * opts.epsilon);
        if !numeric.is_finite() {
            return Err(Error::NonFinite(format!("finite difference of {} at index {i}", report.name)));
        }
        let a = analytic.data()[i];
        let err = relative_error(a, numeric);
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((i, a, numeric));
        }
    }
    Ok(report)
}

struct LayerState {
    input: Tensor<f64>,
    params: Option<LayerParams<f64>>,
}

/// Checks one layer under the scalar loss `sum(r * layer(x))` for a fixed
/// random `r`. Dropout draws the same mask on every evaluation.
pub fn check_layer(
    spec: &LayerSpec,
    params: Option<&LayerParams<f64>>,
    input: &Tensor<f64>,
    opts: &CheckOptions,
) -> Result<GradReport> {
    opts.validate()?;
    finite(input, "input")?;
    let run = |x: &Tensor<f64>, p: Option<&LayerParams<f64>>| {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
        layers::forward(spec, p, x, Mode::Train, &mut mask_rng)
    };
    let (out, cache) = run(input, params)?;
    finite(&out, &format!("{} output", spec.kind()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r = Tensor::from_fn(out.shape().to_vec(), |_| rng.random_range(-1.0..1.0));
    let base = cache.clone();
    let (grad_in, grad_params) = layers::layer_backward(spec, params, cache, &r)?;

    let loss = |s: &LayerState| -> Result<(f64, bool)> {
        let (y, c) = run(&s.input, s.params.as_ref())?;
        Ok((y.dot(&r), c.same_branches(&base)))
    };
    let mut state = LayerState {
        input: input.clone(),
        params: params.cloned(),
    };
    let mut blocks = vec![check_block("input".into(), &mut state, |s| &mut s.input, &grad_in, &loss, opts, &mut rng)?];
    if let Some(g) = grad_params {
        blocks.push(check_block(
            "weights".into(),
            &mut state,
            |s| &mut s.params.as_mut().unwrap().weights,
            &g.weights,
            &loss,
            opts,
            &mut rng,
        )?);
        blocks.push(check_block(
            "bias".into(),
            &mut state,
            |s| &mut s.params.as_mut().unwrap().bias,
            &g.bias,
            &loss,
            opts,
            &mut rng,
        )?);
    }
    Ok(GradReport {
        label: spec.kind().to_string(),
        blocks,
    })
}

/// Checks a whole network through the Euclidean loss against `target`.
pub fn check_network(
    net: &Network<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    opts: &CheckOptions,
) -> Result<GradReport> {
    opts.validate()?;
    finite(input, "input")?;
    let run = |n: &Network<f64>, x: &Tensor<f64>| {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
        n.forward(x, Mode::Train, &mut mask_rng)
    };
    let (pred, trace) = run(net, input)?;
    finite(&pred, "network output")?;
    let (_, grad_out) = euclidean_loss(&pred, target, 1)?;
    let base = trace.clone();
    let (grad_in, grads) = net.backward(trace, &grad_out)?;

    let loss = |s: &(Network<f64>, Tensor<f64>)| -> Result<(f64, bool)> {
        let (p, t) = run(&s.0, &s.1)?;
        Ok((euclidean_loss(&p, target, 1)?.0, t.same_branches(&base)))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut state = (net.clone(), input.clone());
    let mut blocks = vec![check_block("input".into(), &mut state, |s| &mut s.1, &grad_in, &loss, opts, &mut rng)?];
    for (i, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        let kind = net.spec().layers[i].kind();
        blocks.push(check_block(
            format!("layer {} ({kind}) weights", i + 1),
            &mut state,
            |s| &mut s.0.params_mut()[i].as_mut().unwrap().weights,
            &g.weights,
            &loss,
            opts,
            &mut rng,
        )?);
        blocks.push(check_block(
            format!("layer {} ({kind}) bias", i + 1),
            &mut state,
            |s| &mut s.0.params_mut()[i].as_mut().unwrap().bias,
            &g.bias,
            &loss,
            opts,
            &mut rng,
        )?);
    }
    Ok(GradReport {
        label: net.spec().name.clone(),
        blocks,
    })
}

fn uniform(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values in `[-1, -0.1] U [0.1, 1]`, clear of the ReLU kink.
fn away_from_zero(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A random small instance of `kind`: spec, parameters and input, with
/// extents between 1 and 4 (slightly larger inputs where a kernel needs room).
pub fn random_layer_case(
    kind: LayerKind,
    rng: &mut impl Rng,
) -> (LayerSpec, Option<LayerParams<f64>>, Tensor<f64>) {
    let c = rng.random_range(1..=3);
    let spec = match kind {
        LayerKind::Conv => {
            let k = rng.random_range(1..=3);
            let stride = rng.random_range(1..=2);
            let out = rng.random_range(2..=4);
            let (oh, ow) = (rng.random_range(1..=3), rng.random_range(1..=3));
            // padding only where the implied input keeps a positive extent
            let room = (oh.min(ow) - 1) * stride + k;
            let pad = if k > 1 && room > 2 { rng.random_range(0..=1) } else { 0 };
            let spec = LayerSpec::Conv(ConvSpec::new(k, out).with_stride(stride).with_pad(pad));
            let extent = |o: usize| (o - 1) * stride + k - 2 * pad;
            let input = uniform(vec![c, extent(oh), extent(ow)], rng);
            return with_params(spec, input, rng);
        }
        LayerKind::Deconv => {
            let k = rng.random_range(1..=3);
            let stride = rng.random_range(1..=2);
            let pad = if k > 1 { rng.random_range(0..=1) } else { 0 };
            let out = rng.random_range(1..=3);
            let (h, w) = (rng.random_range(2..=4), rng.random_range(2..=4));
            let spec = LayerSpec::Deconv(ConvSpec::new(k, out).with_stride(stride).with_pad(pad));
            return with_params(spec, uniform(vec![c, h, w], rng), rng);
        }
        LayerKind::FullyConnected => {
            let spec = LayerSpec::FullyConnected {
                out_units: rng.random_range(1..=4),
            };
            let input = uniform(vec![c, rng.random_range(1..=3), rng.random_range(1..=3)], rng);
            return with_params(spec, input, rng);
        }
        LayerKind::MaxPool => {
            let k = rng.random_range(2..=3);
            let stride = rng.random_range(1..=k);
            let extent = |o: usize| (o - 1) * stride + k;
            let (oh, ow) = (rng.random_range(1..=2), rng.random_range(1..=2));
            let spec = LayerSpec::MaxPool {
                kernel: (k, k),
                stride,
            };
            return (spec, None, uniform(vec![c, extent(oh), extent(ow)], rng));
        }
        LayerKind::Relu => {
            let input = away_from_zero(vec![c, rng.random_range(2..=4), rng.random_range(2..=4)], rng);
            return (LayerSpec::Relu, None, input);
        }
        LayerKind::Maxout => {
            let pieces = rng.random_range(2..=3);
            LayerSpec::Maxout { pieces }
        }
        LayerKind::Dropout => LayerSpec::Dropout {
            ratio: rng.random_range(0.2..0.7),
        },
    };
    let lead = match spec {
        LayerSpec::Maxout { pieces } => pieces * rng.random_range(1..=4),
        _ => c,
    };
    let input = uniform(vec![lead, rng.random_range(1..=4), rng.random_range(1..=4)], rng);
    (spec, None, input)
}

fn with_params(
    spec: LayerSpec,
    input: Tensor<f64>,
    rng: &mut impl Rng,
) -> (LayerSpec, Option<LayerParams<f64>>, Tensor<f64>) {
    let (w, b) = spec
        .param_shapes(input.shape())
        .expect("valid geometry")
        .expect("parameterized layer");
    let params = LayerParams {
        weights: uniform(w, rng),
        bias: uniform(b, rng),
    };
    (spec, Some(params), input)
}

/// One random instance of every layer kind, derived from `seed`.
pub fn layer_suite(seed: u64, epsilon: f64) -> Result<Vec<GradReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LayerKind::ALL
        .iter()
        .map(|&kind| {
            let (spec, params, input) = random_layer_case(kind, &mut rng);
            let opts = CheckOptions {
                epsilon,
                max_coords: None,
                seed: rng.random(),
            };
            check_layer(&spec, params.as_ref(), &input, &opts)
        })
        .collect()
}

/// A He-initialized f64 network with a uniform `[-1, 1]` input and a uniform
/// `[0, 1]` target, all drawn from `seed`.
pub fn network_case(spec: NetSpec, seed: u64) -> Result<(Network<f64>, Tensor<f64>, Tensor<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = uniform(spec.input_dims().to_vec(), &mut rng);
    let target = Tensor::from_fn(spec.output_map_shape().to_vec(), |_| rng.random_range(0.0..1.0));
    let net = Network::new(spec, InitScheme::He, &mut rng)?;
    Ok((net, input, target))
}
