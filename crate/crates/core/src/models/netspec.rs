//! Declarative network descriptions, the shipped presets and their text form.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layers::{ConvSpec, LayerKind, LayerSpec};

pub const SHALLOW_SALICON_TEXT: &str = include_str!("../../specs/shallow-salicon.spec");
pub const SHALLOW_ISUN_TEXT: &str = include_str!("../../specs/shallow-isun.spec");
pub const DEEP_DEFAULT_TEXT: &str = include_str!("../../specs/deep-default.spec");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputKind {
    /// The final vector is reshaped into a `side x side` map.
    VectorMap { side: usize },
    /// The final layer already produces a `1 x H x W` map at input resolution.
    FullResolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShallowVariant {
    Salicon,
    Isun,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetSpec {
    pub name: String,
    /// `(channels, height, width)`
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub output: OutputKind,
}

/// Knobs of the shallow family, used for the published variants and for
/// channel-shrunken copies at desk scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ShallowConfig {
    pub name: String,
    pub input_side: usize,
    pub conv_depths: [usize; 3],
    pub fc_units: usize,
    pub maxout_pieces: usize,
    pub output_side: usize,
    pub dropout: Option<f64>,
}

impl ShallowConfig {
    pub fn salicon() -> Self {
        Self {
            name: "shallow-salicon".into(),
            input_side: 96,
            conv_depths: [32, 64, 128],
            fc_units: 4608,
            maxout_pieces: 2,
            output_side: 48,
            dropout: None,
        }
    }

    pub fn isun() -> Self {
        Self {
            name: "shallow-isun".into(),
            conv_depths: [32, 64, 64],
            ..Self::salicon()
        }
    }

    /// Depths 8/16/32 and FC 1152/576: trainable on a single CPU core.
    pub fn shrunken() -> Self {
        Self {
            name: "shallow-shrunken".into(),
            input_side: 96,
            conv_depths: [8, 16, 32],
            fc_units: 1152,
            maxout_pieces: 2,
            output_side: 24,
            dropout: None,
        }
    }

    /// 24x24 input with single-digit depths, small enough to finite-difference
    /// every parameter.
    pub fn tiny() -> Self {
        Self {
            name: "shallow-tiny".into(),
            input_side: 24,
            conv_depths: [2, 3, 4],
            fc_units: 8,
            maxout_pieces: 2,
            output_side: 4,
            dropout: None,
        }
    }

    pub fn build(&self) -> NetSpec {
        let [d1, d2, d3] = self.conv_depths;
        let mut layers = vec![
            LayerSpec::Conv(ConvSpec::new(5, d1)),
            LayerSpec::Relu,
            LayerSpec::pool(2),
            LayerSpec::Conv(ConvSpec::new(3, d2)),
            LayerSpec::Relu,
            LayerSpec::pool(2),
            LayerSpec::Conv(ConvSpec::new(3, d3)),
            LayerSpec::Relu,
            LayerSpec::pool(2),
            LayerSpec::FullyConnected {
                out_units: self.fc_units,
            },
            LayerSpec::Maxout {
                pieces: self.maxout_pieces,
            },
        ];
        if let Some(ratio) = self.dropout {
            layers.push(LayerSpec::Dropout { ratio });
        }
        layers.push(LayerSpec::FullyConnected {
            out_units: self.output_side * self.output_side,
        });
        NetSpec {
            name: self.name.clone(),
            input_shape: (3, self.input_side, self.input_side),
            layers,
            output: OutputKind::VectorMap {
                side: self.output_side,
            },
        }
    }
}

pub fn shallow_spec(variant: ShallowVariant) -> NetSpec {
    match variant {
        ShallowVariant::Salicon => ShallowConfig::salicon().build(),
        ShallowVariant::Isun => ShallowConfig::isun().build(),
    }
}

/// Ten weight layers: three VGG-M shaped convolutions (first at stride 1),
/// six further "same" convolutions and a 4x upsampling deconvolution.
pub fn deep_spec() -> NetSpec {
    let mut layers = vec![
        LayerSpec::Conv(ConvSpec::same(7, 96)),
        LayerSpec::Relu,
        LayerSpec::pool(2),
        LayerSpec::Conv(ConvSpec::same(5, 256)),
        LayerSpec::Relu,
        LayerSpec::pool(2),
        LayerSpec::Conv(ConvSpec::same(3, 512)),
        LayerSpec::Relu,
    ];
    for (kernel, depth) in [(5, 512), (5, 512), (7, 256), (11, 128), (11, 32)] {
        layers.push(LayerSpec::Conv(ConvSpec::same(kernel, depth)));
        layers.push(LayerSpec::Relu);
    }
    layers.push(LayerSpec::Conv(ConvSpec::same(13, 1)));
    layers.push(LayerSpec::Deconv(
        ConvSpec::new(8, 1).with_stride(4).with_pad(2),
    ));
    NetSpec {
        name: "deep".into(),
        input_shape: (3, 240, 320),
        layers,
        output: OutputKind::FullResolution,
    }
}

/// Resolves a preset name.
pub fn preset(name: &str) -> Option<NetSpec> {
    match name {
        "shallow-salicon" | "shallow" => Some(shallow_spec(ShallowVariant::Salicon)),
        "shallow-isun" => Some(shallow_spec(ShallowVariant::Isun)),
        "shallow-shrunken" => Some(ShallowConfig::shrunken().build()),
        "shallow-tiny" => Some(ShallowConfig::tiny().build()),
        "deep" | "deep-default" => Some(deep_spec()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 5] = [
    "shallow-salicon",
    "shallow-isun",
    "shallow-shrunken",
    "shallow-tiny",
    "deep",
];

impl NetSpec {
    pub fn input_dims(&self) -> [usize; 3] {
        let (c, h, w) = self.input_shape;
        [c, h, w]
    }

    /// Output shape of every layer for an input of the given shape.
    pub fn layer_shapes_for(&self, input: [usize; 3]) -> Result<Vec<Vec<usize>>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.output_shape(&current).map_err(|e| {
                Error::config(format!("{}: layer {} ({}): {e}", self.name, i + 1, layer.kind()))
            })?;
            shapes.push(current.clone());
        }
        let last = shapes
            .last()
            .ok_or_else(|| Error::config(format!("{}: no layers", self.name)))?;
        match self.output {
            OutputKind::VectorMap { side } => {
                let n: usize = last.iter().product();
                if n != side * side {
                    return Err(Error::config(format!(
                        "{}: final layer produces {n} values, vector map needs {side}x{side}",
                        self.name
                    )));
                }
            }
            OutputKind::FullResolution => {
                if last.len() != 3 || last[0] != 1 || last[1] != input[1] || last[2] != input[2] {
                    return Err(Error::config(format!(
                        "{}: full-resolution output {last:?} does not match input {}x{}",
                        self.name, input[1], input[2]
                    )));
                }
            }
        }
        Ok(shapes)
    }

    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        self.layer_shapes_for(self.input_dims())
    }

    /// Shape of the prediction map for the declared input.
    pub fn output_map_shape(&self) -> [usize; 3] {
        match self.output {
            OutputKind::VectorMap { side } => [1, side, side],
            OutputKind::FullResolution => [1, self.input_shape.1, self.input_shape.2],
        }
    }

    /// Indices of layers that carry weights.
    pub fn weight_layer_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.has_params())
            .map(|(i, _)| i)
            .collect()
    }

    /// Canonical text form, one layer per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (c, h, w) = self.input_shape;
        writeln!(s, "name {}", self.name).unwrap();
        writeln!(s, "input {c} {h} {w}").unwrap();
        match self.output {
            OutputKind::VectorMap { side } => writeln!(s, "output vector_map {side}").unwrap(),
            OutputKind::FullResolution => writeln!(s, "output full_resolution").unwrap(),
        }
        for layer in &self.layers {
            match layer {
                LayerSpec::Conv(cs) | LayerSpec::Deconv(cs) => writeln!(
                    s,
                    "{} kernel={}x{} stride={} pad={} out={}",
                    layer.kind(),
                    cs.kernel.0,
                    cs.kernel.1,
                    cs.stride,
                    cs.pad,
                    cs.out_channels
                ),
                LayerSpec::MaxPool { kernel, stride } => writeln!(
                    s,
                    "maxpool kernel={}x{} stride={stride}",
                    kernel.0, kernel.1
                ),
                LayerSpec::Relu => writeln!(s, "relu"),
                LayerSpec::FullyConnected { out_units } => writeln!(s, "fc out={out_units}"),
                LayerSpec::Maxout { pieces } => writeln!(s, "maxout pieces={pieces}"),
                LayerSpec::Dropout { ratio } => writeln!(s, "dropout ratio={ratio}"),
            }
            .unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut name = None;
        let mut input = None;
        let mut output = None;
        let mut layers = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::SpecParse {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().expect("non-empty line");
            let rest: Vec<&str> = tokens.collect();
            match head {
                "name" => {
                    if rest.len() != 1 {
                        return Err(err("expected `name <identifier>`".into()));
                    }
                    name = Some(rest[0].to_string());
                }
                "input" => {
                    let dims = rest
                        .iter()
                        .map(|t| parse_positive(t))
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(err)?;
                    match dims[..] {
                        [c, h, w] => input = Some((c, h, w)),
                        _ => return Err(err("expected `input <c> <h> <w>`".into())),
                    }
                }
                "output" => {
                    output = Some(match rest[..] {
                        ["vector_map", side] => OutputKind::VectorMap {
                            side: parse_positive(side).map_err(err)?,
                        },
                        ["full_resolution"] => OutputKind::FullResolution,
                        _ => {
                            return Err(err(
                                "expected `output vector_map <side>` or `output full_resolution`"
                                    .into(),
                            ))
                        }
                    });
                }
                kind => {
                    let layer = parse_layer(kind, &rest).map_err(err)?;
                    layer.validate().map_err(|e| err(e.to_string()))?;
                    layers.push(layer);
                }
            }
        }

        let spec = NetSpec {
            name: name.ok_or_else(|| Error::SpecParse {
                line: 0,
                message: "missing `name` line".into(),
            })?,
            input_shape: input.ok_or_else(|| Error::SpecParse {
                line: 0,
                message: "missing `input` line".into(),
            })?,
            layers,
            output: output.ok_or_else(|| Error::SpecParse {
                line: 0,
                message: "missing `output` line".into(),
            })?,
        };
        spec.layer_shapes()?;
        Ok(spec)
    }
}

fn parse_positive(token: &str) -> std::result::Result<usize, String> {
    match token.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{token}` is not a positive integer")),
    }
}

fn parse_layer(kind: &str, args: &[&str]) -> std::result::Result<LayerSpec, String> {
    let mut kernel = None;
    let mut stride = None;
    let mut pad = None;
    let mut out = None;
    let mut pieces = None;
    let mut ratio = None;
    for arg in args {
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{arg}`"))?;
        match key {
            "kernel" => {
                let (h, w) = value.split_once('x').unwrap_or((value, value));
                kernel = Some((parse_positive(h)?, parse_positive(w)?));
            }
            "stride" => stride = Some(parse_positive(value)?),
            "pad" => {
                pad = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| format!("`{value}` is not a non-negative integer"))?,
                )
            }
            "out" => out = Some(parse_positive(value)?),
            "pieces" => pieces = Some(parse_positive(value)?),
            "ratio" => {
                ratio = Some(
                    value
                        .parse::<f64>()
                        .map_err(|_| format!("`{value}` is not a number"))?,
                )
            }
            other => return Err(format!("unknown key `{other}`")),
        }
    }
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| format!("{kind}: missing `{key}`"));
    let conv = || -> std::result::Result<ConvSpec, String> {
        Ok(ConvSpec {
            kernel: kernel.ok_or_else(|| format!("{kind}: missing `kernel`"))?,
            stride: stride.unwrap_or(1),
            pad: pad.unwrap_or(0),
            out_channels: need(out, "out")?,
        })
    };
    let layer = match kind {
        "conv" => LayerSpec::Conv(conv()?),
        "deconv" => LayerSpec::Deconv(conv()?),
        "maxpool" => {
            let kernel = kernel.ok_or("maxpool: missing `kernel`")?;
            LayerSpec::MaxPool {
                kernel,
                stride: stride.unwrap_or(kernel.0),
            }
        }
        "relu" => LayerSpec::Relu,
        "fc" => LayerSpec::FullyConnected {
            out_units: need(out, "out")?,
        },
        "maxout" => LayerSpec::Maxout {
            pieces: pieces.unwrap_or(2),
        },
        "dropout" => LayerSpec::Dropout {
            ratio: ratio.ok_or("dropout: missing `ratio`")?,
        },
        other => return Err(format!("unknown layer kind `{other}`")),
    };
    // reject keys that do not belong to the kind
    let allowed: &[&str] = match layer.kind() {
        LayerKind::Conv | LayerKind::Deconv => &["kernel", "stride", "pad", "out"],
        LayerKind::MaxPool => &["kernel", "stride"],
        LayerKind::Relu => &[],
        LayerKind::FullyConnected => &["out"],
        LayerKind::Maxout => &["pieces"],
        LayerKind::Dropout => &["ratio"],
    };
    for arg in args {
        let key = arg.split_once('=').map(|(k, _)| k).unwrap_or(arg);
        if !allowed.contains(&key) {
            return Err(format!("`{key}` does not apply to {kind}"));
        }
    }
    Ok(layer)
}
