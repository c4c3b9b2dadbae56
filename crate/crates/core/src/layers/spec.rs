use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Geometry shared by convolution and transposed convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: (usize, usize),
    pub stride: usize,
    pub pad: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    pub fn new(kernel: usize, out_channels: usize) -> Self {
        Self {
            kernel: (kernel, kernel),
            stride: 1,
            pad: 0,
            out_channels,
        }
    }

    /// Symmetric padding that keeps the spatial extent at stride 1.
    pub fn same(kernel: usize, out_channels: usize) -> Self {
        Self {
            pad: kernel / 2,
            ..Self::new(kernel, out_channels)
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.pad = pad;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    Deconv,
    MaxPool,
    Relu,
    FullyConnected,
    Maxout,
    Dropout,
}

impl LayerKind {
    pub const ALL: [LayerKind; 7] = [
        LayerKind::Conv,
        LayerKind::Deconv,
        LayerKind::MaxPool,
        LayerKind::Relu,
        LayerKind::FullyConnected,
        LayerKind::Maxout,
        LayerKind::Dropout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Deconv => "deconv",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Relu => "relu",
            LayerKind::FullyConnected => "fc",
            LayerKind::Maxout => "maxout",
            LayerKind::Dropout => "dropout",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One layer of a sequential network. Each variant carries only the
/// hyperparameters relevant to its kind.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    Deconv(ConvSpec),
    MaxPool { kernel: (usize, usize), stride: usize },
    Relu,
    FullyConnected { out_units: usize },
    Maxout { pieces: usize },
    Dropout { ratio: f64 },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv(_) => LayerKind::Conv,
            LayerSpec::Deconv(_) => LayerKind::Deconv,
            LayerSpec::MaxPool { .. } => LayerKind::MaxPool,
            LayerSpec::Relu => LayerKind::Relu,
            LayerSpec::FullyConnected { .. } => LayerKind::FullyConnected,
            LayerSpec::Maxout { .. } => LayerKind::Maxout,
            LayerSpec::Dropout { .. } => LayerKind::Dropout,
        }
    }

    pub fn pool(size: usize) -> Self {
        LayerSpec::MaxPool {
            kernel: (size, size),
            stride: size,
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv(_) | LayerSpec::Deconv(_) | LayerSpec::FullyConnected { .. }
        )
    }

    /// Checks hyperparameters that do not depend on the input shape.
    pub fn validate(&self) -> Result<()> {
        match self {
            LayerSpec::Conv(c) | LayerSpec::Deconv(c) => {
                if c.kernel.0 == 0 || c.kernel.1 == 0 || c.stride == 0 || c.out_channels == 0 {
                    return Err(Error::config(format!(
                        "{}: kernel, stride and channels must be positive",
                        self.kind()
                    )));
                }
            }
            LayerSpec::MaxPool { kernel, stride } => {
                if kernel.0 == 0 || kernel.1 == 0 || *stride == 0 {
                    return Err(Error::config("maxpool: window and stride must be positive"));
                }
            }
            LayerSpec::FullyConnected { out_units } => {
                if *out_units == 0 {
                    return Err(Error::config("fc: out_units must be positive"));
                }
            }
            LayerSpec::Maxout { pieces } => {
                if *pieces < 2 {
                    return Err(Error::config("maxout: pieces must be at least 2"));
                }
            }
            LayerSpec::Dropout { ratio } => {
                if !(0.0..=1.0).contains(ratio) {
                    return Err(Error::config(format!("dropout: ratio {ratio} outside [0,1]")));
                }
            }
            LayerSpec::Relu => {}
        }
        Ok(())
    }

    /// Output shape produced from `input`, or a configuration error if the
    /// geometry does not fit.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        match self {
            LayerSpec::Conv(c) => {
                let (_, h, w) = spatial(input, "conv")?;
                let oh = conv_extent(h, c.kernel.0, c.stride, c.pad, "height")?;
                let ow = conv_extent(w, c.kernel.1, c.stride, c.pad, "width")?;
                Ok(vec![c.out_channels, oh, ow])
            }
            LayerSpec::Deconv(c) => {
                let (_, h, w) = spatial(input, "deconv")?;
                let oh = deconv_extent(h, c.kernel.0, c.stride, c.pad, "height")?;
                let ow = deconv_extent(w, c.kernel.1, c.stride, c.pad, "width")?;
                Ok(vec![c.out_channels, oh, ow])
            }
            LayerSpec::MaxPool { kernel, stride } => {
                let (ch, h, w) = spatial(input, "maxpool")?;
                let oh = pool_extent(h, kernel.0, *stride, "height")?;
                let ow = pool_extent(w, kernel.1, *stride, "width")?;
                Ok(vec![ch, oh, ow])
            }
            LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::FullyConnected { out_units } => Ok(vec![*out_units]),
            LayerSpec::Maxout { pieces } => {
                let lead = input[0];
                if lead % pieces != 0 {
                    return Err(Error::config(format!(
                        "maxout: {lead} channels/units not divisible by {pieces} pieces"
                    )));
                }
                let mut out = input.to_vec();
                out[0] = lead / pieces;
                Ok(out)
            }
        }
    }

    /// Weight and bias shapes for an input of the given shape, if the layer
    /// carries parameters.
    pub fn param_shapes(&self, input: &[usize]) -> Result<Option<(Vec<usize>, Vec<usize>)>> {
        Ok(match self {
            LayerSpec::Conv(c) => {
                let (cin, _, _) = spatial(input, "conv")?;
                Some((
                    vec![c.out_channels, cin, c.kernel.0, c.kernel.1],
                    vec![c.out_channels],
                ))
            }
            LayerSpec::Deconv(c) => {
                let (cin, _, _) = spatial(input, "deconv")?;
                Some((
                    vec![cin, c.out_channels, c.kernel.0, c.kernel.1],
                    vec![c.out_channels],
                ))
            }
            LayerSpec::FullyConnected { out_units } => {
                let fan_in = input.iter().product();
                Some((vec![*out_units, fan_in], vec![*out_units]))
            }
            _ => None,
        })
    }
}

fn spatial(shape: &[usize], layer: &str) -> Result<(usize, usize, usize)> {
    match *shape {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::shape(layer, "input rank", 3, shape.len())),
    }
}

fn conv_extent(input: usize, kernel: usize, stride: usize, pad: usize, dim: &str) -> Result<usize> {
    let padded = input + 2 * pad;
    if kernel > padded {
        return Err(Error::config(format!(
            "conv {dim}: kernel {kernel} larger than padded input {padded}"
        )));
    }
    if (padded - kernel) % stride != 0 {
        return Err(Error::config(format!(
            "conv {dim}: ({input} + 2*{pad} - {kernel}) not divisible by stride {stride}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

fn deconv_extent(input: usize, kernel: usize, stride: usize, pad: usize, dim: &str) -> Result<usize> {
    let full = stride * (input - 1) + kernel;
    if full <= 2 * pad {
        return Err(Error::config(format!(
            "deconv {dim}: output extent {full} - 2*{pad} is not positive"
        )));
    }
    Ok(full - 2 * pad)
}

fn pool_extent(input: usize, kernel: usize, stride: usize, dim: &str) -> Result<usize> {
    if kernel > input {
        return Err(Error::config(format!(
            "maxpool {dim}: window {kernel} larger than input {input}"
        )));
    }
    if (input - kernel) % stride != 0 {
        return Err(Error::config(format!(
            "maxpool {dim}: window {kernel}/stride {stride} leaves a partial window on extent {input}"
        )));
    }
    Ok((input - kernel) / stride + 1)
}

/// Weights and bias of a parameterized layer.
///
/// Convolution weights are `[out, in, kh, kw]`, transposed convolution
/// weights are `[in, out, kh, kw]`, fully-connected weights are `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> LayerParams<T> {
    pub fn zeros(weight_shape: Vec<usize>, bias_shape: Vec<usize>) -> Self {
        Self {
            weights: Tensor::zeros(weight_shape),
            bias: Tensor::zeros(bias_shape),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.weights.shape().to_vec(), self.bias.shape().to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.weights.add_assign(&other.weights);
        self.bias.add_assign(&other.bias);
    }

    pub fn cast<U: Real>(&self) -> LayerParams<U> {
        LayerParams {
            weights: self.weights.cast(),
            bias: self.bias.cast(),
        }
    }
}
