//! The layer zoo: forward passes that record a cache, and exact backward
//! passes that consume it.

mod activation;
mod conv;
mod dense;
mod pool;
mod spec;

use rand::Rng;

pub use spec::{ConvSpec, LayerKind, LayerParams, LayerSpec};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Test,
}

/// Values recorded by one forward call and needed by its backward call.
#[derive(Clone, Debug)]
pub struct LayerCache<T = f32> {
    kind: LayerKind,
    output_shape: Vec<usize>,
    state: CacheState<T>,
}

#[derive(Clone, Debug)]
enum CacheState<T> {
    Input(Tensor<T>),
    Argmax { input_shape: Vec<usize>, argmax: Vec<usize> },
    ReluMask(Vec<bool>),
    Winners { input_shape: Vec<usize>, winner: Vec<u8> },
    DropoutMask(Option<Vec<T>>),
}

impl<T> LayerCache<T> {
    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    /// True when both caches picked the same branch at every ReLU, pooling
    /// window and maxout group. Layers without branches always agree.
    pub fn same_branches(&self, other: &Self) -> bool {
        match (&self.state, &other.state) {
            (CacheState::Argmax { argmax: a, .. }, CacheState::Argmax { argmax: b, .. }) => a == b,
            (CacheState::ReluMask(a), CacheState::ReluMask(b)) => a == b,
            (CacheState::Winners { winner: a, .. }, CacheState::Winners { winner: b, .. }) => a == b,
            (CacheState::Input(_), CacheState::Input(_)) => true,
            (CacheState::DropoutMask(_), CacheState::DropoutMask(_)) => true,
            _ => false,
        }
    }
}

fn require_params<'a, T>(
    spec: &LayerSpec,
    params: Option<&'a LayerParams<T>>,
) -> Result<&'a LayerParams<T>> {
    params.ok_or_else(|| Error::config(format!("{} layer requires parameters", spec.kind())))
}

pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let out = conv::conv_forward(input, params, spec)?;
    let cache = LayerCache {
        kind: LayerKind::Conv,
        output_shape: out.shape().to_vec(),
        state: CacheState::Input(input.clone()),
    };
    Ok((out, cache))
}

pub fn deconv2d_forward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let out = conv::deconv_forward(input, params, spec)?;
    let cache = LayerCache {
        kind: LayerKind::Deconv,
        output_shape: out.shape().to_vec(),
        state: CacheState::Input(input.clone()),
    };
    Ok((out, cache))
}

pub fn maxpool_forward<T: Real>(
    input: &Tensor<T>,
    kernel: (usize, usize),
    stride: usize,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let (out, argmax) = pool::maxpool(input, kernel, stride)?;
    let cache = LayerCache {
        kind: LayerKind::MaxPool,
        output_shape: out.shape().to_vec(),
        state: CacheState::Argmax {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    };
    Ok((out, cache))
}

pub fn relu_forward<T: Real>(input: &Tensor<T>) -> (Tensor<T>, LayerCache<T>) {
    let (out, mask) = activation::relu(input);
    let cache = LayerCache {
        kind: LayerKind::Relu,
        output_shape: out.shape().to_vec(),
        state: CacheState::ReluMask(mask),
    };
    (out, cache)
}

pub fn fully_connected_forward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    out_units: usize,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let out = dense::fc_forward(input, params, out_units)?;
    let cache = LayerCache {
        kind: LayerKind::FullyConnected,
        output_shape: out.shape().to_vec(),
        state: CacheState::Input(input.clone()),
    };
    Ok((out, cache))
}

pub fn maxout_forward<T: Real>(
    input: &Tensor<T>,
    pieces: usize,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    let (out, winner) = activation::maxout(input, pieces)?;
    let cache = LayerCache {
        kind: LayerKind::Maxout,
        output_shape: out.shape().to_vec(),
        state: CacheState::Winners {
            input_shape: input.shape().to_vec(),
            winner,
        },
    };
    Ok((out, cache))
}

/// Inverted dropout in train mode, identity in test mode.
pub fn dropout_forward<T: Real, R: Rng + ?Sized>(
    input: &Tensor<T>,
    ratio: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    LayerSpec::Dropout { ratio }.validate()?;
    let (out, mask) = match mode {
        Mode::Train if ratio > 0.0 => {
            let (out, mask) = activation::dropout(input, ratio, rng);
            (out, Some(mask))
        }
        _ => (input.clone(), None),
    };
    let cache = LayerCache {
        kind: LayerKind::Dropout,
        output_shape: out.shape().to_vec(),
        state: CacheState::DropoutMask(mask),
    };
    Ok((out, cache))
}

/// Runs any layer forward. `params` must be present exactly for the
/// parameterized kinds.
pub fn forward<T: Real, R: Rng + ?Sized>(
    spec: &LayerSpec,
    params: Option<&LayerParams<T>>,
    input: &Tensor<T>,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, LayerCache<T>)> {
    match spec {
        LayerSpec::Conv(c) => conv2d_forward(input, require_params(spec, params)?, c),
        LayerSpec::Deconv(c) => deconv2d_forward(input, require_params(spec, params)?, c),
        LayerSpec::MaxPool { kernel, stride } => maxpool_forward(input, *kernel, *stride),
        LayerSpec::Relu => Ok(relu_forward(input)),
        LayerSpec::FullyConnected { out_units } => {
            fully_connected_forward(input, require_params(spec, params)?, *out_units)
        }
        LayerSpec::Maxout { pieces } => maxout_forward(input, *pieces),
        LayerSpec::Dropout { ratio } => dropout_forward(input, *ratio, rng, mode),
    }
}

/// Gradient of the layer map. Parameter-free layers return `None` for the
/// parameter gradient.
pub fn layer_backward<T: Real>(
    spec: &LayerSpec,
    params: Option<&LayerParams<T>>,
    cache: LayerCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Option<LayerParams<T>>)> {
    let mismatch = |reason: String| Error::CacheMismatch {
        layer: spec.kind().to_string(),
        reason,
    };
    if cache.kind != spec.kind() {
        return Err(mismatch(format!("cache was produced by a {} layer", cache.kind)));
    }
    if grad_out.shape() != cache.output_shape.as_slice() {
        return Err(mismatch(format!(
            "grad_out shape {:?} differs from forward output {:?}",
            grad_out.shape(),
            cache.output_shape
        )));
    }
    match (spec, cache.state) {
        (LayerSpec::Conv(c), CacheState::Input(input)) => {
            let (gi, gp) = conv::conv_backward(&input, require_params(spec, params)?, c, grad_out)?;
            Ok((gi, Some(gp)))
        }
        (LayerSpec::Deconv(c), CacheState::Input(input)) => {
            let (gi, gp) =
                conv::deconv_backward(&input, require_params(spec, params)?, c, grad_out)?;
            Ok((gi, Some(gp)))
        }
        (LayerSpec::FullyConnected { .. }, CacheState::Input(input)) => {
            let (gi, gp) = dense::fc_backward(&input, require_params(spec, params)?, grad_out)?;
            Ok((gi, Some(gp)))
        }
        (LayerSpec::MaxPool { .. }, CacheState::Argmax { input_shape, argmax }) => {
            Ok((pool::maxpool_backward(&input_shape, &argmax, grad_out), None))
        }
        (LayerSpec::Relu, CacheState::ReluMask(mask)) => {
            Ok((activation::relu_backward(&mask, grad_out), None))
        }
        (LayerSpec::Maxout { .. }, CacheState::Winners { input_shape, winner }) => {
            Ok((activation::maxout_backward(&input_shape, &winner, grad_out), None))
        }
        (LayerSpec::Dropout { .. }, CacheState::DropoutMask(mask)) => Ok((
            match mask {
                Some(m) => activation::dropout_backward(&m, grad_out),
                None => grad_out.clone(),
            },
            None,
        )),
        _ => Err(mismatch("cache contents do not match layer kind".into())),
    }
}
