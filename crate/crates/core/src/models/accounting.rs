//! Parameter and blob-memory accounting in the layout of a per-layer table:
//! one row per stored intermediate blob, with the filter weights that
//! produced it.

use std::fmt::Write as _;

use crate::error::Result;
use crate::layers::LayerSpec;
use crate::models::netspec::{NetSpec, OutputKind};

/// Bytes per stored value (32-bit floats).
pub const BYTES_PER_VALUE: u64 = 4;
const MIB: f64 = 1024.0 * 1024.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlobRow {
    pub label: String,
    /// `[channels, height, width]`; vectors are `[units, 1, 1]`.
    pub shape: [usize; 3],
    pub values: u64,
    /// Weight-layer parameters producing this blob, if any.
    pub params: Option<LayerParamCount>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerParamCount {
    /// Index of the layer within the network description.
    pub layer: usize,
    /// Kernel height x kernel width x input depth (or fan-in for FC).
    pub fan_in: u64,
    pub out: u64,
    pub weights: u64,
    pub biases: u64,
}

impl LayerParamCount {
    pub fn total(&self) -> u64 {
        self.weights + self.biases
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCounts {
    pub per_layer: Vec<LayerParamCount>,
    pub total: u64,
}

/// Memory footprint at 4 bytes per value. Blob memory doubles at train time
/// to hold the error signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryEstimate {
    pub blob_values: u64,
    pub param_values: u64,
    pub blob_bytes_test: u64,
    pub blob_bytes_train: u64,
    pub param_bytes: u64,
    pub total_train_bytes: u64,
    pub total_test_bytes: u64,
}

impl MemoryEstimate {
    pub fn mib(bytes: u64) -> f64 {
        bytes as f64 / MIB
    }
}

fn as_chw(shape: &[usize]) -> [usize; 3] {
    match *shape {
        [c, h, w] => [c, h, w],
        [n] => [n, 1, 1],
        _ => [shape.iter().product(), 1, 1],
    }
}

fn values(shape: &[usize; 3]) -> u64 {
    shape.iter().map(|&d| d as u64).product()
}

/// Counts for every weight layer: `fan_in * out + out`.
pub fn count_parameters(spec: &NetSpec) -> Result<ParamCounts> {
    let shapes = spec.layer_shapes()?;
    let mut input = spec.input_dims().to_vec();
    let mut per_layer = Vec::new();
    for (i, (layer, out)) in spec.layers.iter().zip(&shapes).enumerate() {
        if let Some((w, b)) = layer.param_shapes(&input)? {
            let weights: u64 = w.iter().map(|&d| d as u64).product();
            let biases = b[0] as u64;
            per_layer.push(LayerParamCount {
                layer: i,
                fan_in: weights / biases,
                out: biases,
                weights,
                biases,
            });
        }
        input = out.clone();
    }
    let total = per_layer.iter().map(LayerParamCount::total).sum();
    Ok(ParamCounts { per_layer, total })
}

/// The stored blobs of a forward pass on `input`. In-place layers (ReLU,
/// dropout) add no blob; maxout stores each slice plus the max.
pub fn blob_rows(spec: &NetSpec, input: [usize; 3]) -> Result<Vec<BlobRow>> {
    let shapes = spec.layer_shapes_for(input)?;
    let mut rows = vec![BlobRow {
        label: "input".into(),
        shape: input,
        values: values(&input),
        params: None,
    }];
    let mut prev = input.to_vec();
    for (i, (layer, out)) in spec.layers.iter().zip(&shapes).enumerate() {
        let shape = as_chw(out);
        let params = layer.param_shapes(&prev)?.map(|(w, b)| {
            let weights: u64 = w.iter().map(|&d| d as u64).product();
            let biases = b[0] as u64;
            LayerParamCount {
                layer: i,
                fan_in: weights / biases,
                out: biases,
                weights,
                biases,
            }
        });
        match layer {
            LayerSpec::Relu | LayerSpec::Dropout { .. } => {}
            LayerSpec::Maxout { pieces } => {
                for piece in 1..=*pieces {
                    rows.push(BlobRow {
                        label: format!("slice{piece}"),
                        shape,
                        values: values(&shape),
                        params: None,
                    });
                }
                rows.push(BlobRow {
                    label: "maxout".into(),
                    shape,
                    values: values(&shape),
                    params: None,
                });
            }
            _ => rows.push(BlobRow {
                label: layer_label(layer),
                shape,
                values: values(&shape),
                params,
            }),
        }
        prev = out.clone();
    }
    if let OutputKind::VectorMap { side } = spec.output {
        let shape = [1, side, side];
        rows.push(BlobRow {
            label: "output".into(),
            shape,
            values: values(&shape),
            params: None,
        });
    }
    Ok(rows)
}

fn layer_label(layer: &LayerSpec) -> String {
    match layer {
        LayerSpec::Conv(c) => format!("conv{}-{}", c.kernel.0, c.out_channels),
        LayerSpec::Deconv(c) => format!("deconv{}-{}", c.kernel.0, c.out_channels),
        LayerSpec::MaxPool { kernel, .. } => format!("maxpool{}", kernel.0),
        LayerSpec::FullyConnected { out_units } => format!("FC-{out_units}"),
        LayerSpec::Relu => "relu".into(),
        LayerSpec::Maxout { .. } => "maxout".into(),
        LayerSpec::Dropout { .. } => "dropout".into(),
    }
}

pub fn estimate_memory(spec: &NetSpec, input: [usize; 3]) -> Result<MemoryEstimate> {
    let blob_values: u64 = blob_rows(spec, input)?.iter().map(|r| r.values).sum();
    let param_values = count_parameters(spec)?.total;
    let blob_bytes_test = blob_values * BYTES_PER_VALUE;
    let blob_bytes_train = 2 * blob_bytes_test;
    let param_bytes = param_values * BYTES_PER_VALUE;
    Ok(MemoryEstimate {
        blob_values,
        param_values,
        blob_bytes_test,
        blob_bytes_train,
        param_bytes,
        total_train_bytes: blob_bytes_train + param_bytes,
        total_test_bytes: blob_bytes_test + param_bytes,
    })
}

/// Thousands separators: 601216 -> "601,216".
pub fn group_digits(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Renders the per-layer blob/parameter table followed by memory totals.
pub fn render_table(spec: &NetSpec, input: [usize; 3]) -> Result<String> {
    let rows = blob_rows(spec, input)?;
    let counts = count_parameters(spec)?;
    let mem = estimate_memory(spec, input)?;

    let mut lines: Vec<(String, String, String)> = Vec::new();
    for row in &rows {
        let [c, h, w] = row.shape;
        let blob = format!("{w}x{h}x{c} = {}", group_digits(row.values));
        let params = match row.params {
            Some(p) => format!(
                "({})x{}+{} = {}",
                fan_in_label(spec, p, input)?,
                group_digits(p.out),
                group_digits(p.biases),
                group_digits(p.total())
            ),
            None if row.label == "output" => String::new(),
            None => "0".into(),
        };
        lines.push((row.label.clone(), blob, params));
    }
    let label_w = lines.iter().map(|l| l.0.len()).max().unwrap_or(5).max(14);
    let blob_w = lines.iter().map(|l| l.1.len()).max().unwrap_or(0).max(24);

    let mut s = String::new();
    writeln!(s, "network: {}", spec.name).unwrap();
    writeln!(
        s,
        "{:<label_w$}  {:<blob_w$}  Filter Weights",
        "Layer", "Blob Data Size [WxHxD]"
    )
    .unwrap();
    for (label, blob, params) in &lines {
        writeln!(s, "{label:<label_w$}  {blob:<blob_w$}  {params}").unwrap();
    }
    writeln!(
        s,
        "{:<label_w$}  {:<blob_w$}  {}",
        "Total",
        group_digits(mem.blob_values),
        group_digits(counts.total)
    )
    .unwrap();
    writeln!(
        s,
        "{:<label_w$}  {:<blob_w$}  -",
        "Memory (train)",
        format!("{:.2} MB", MemoryEstimate::mib(mem.blob_bytes_train))
    )
    .unwrap();
    writeln!(
        s,
        "{:<label_w$}  {:<blob_w$}  {:.2} MB",
        "Memory (test)",
        format!("{:.2} MB", MemoryEstimate::mib(mem.blob_bytes_test)),
        MemoryEstimate::mib(mem.param_bytes)
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(s, "weight layers:      {}", counts.per_layer.len()).unwrap();
    writeln!(s, "parameters:         {}", group_digits(counts.total)).unwrap();
    writeln!(s, "blob values:        {}", group_digits(mem.blob_values)).unwrap();
    writeln!(
        s,
        "blob bytes (test):  {} ({:.2} MB)",
        group_digits(mem.blob_bytes_test),
        MemoryEstimate::mib(mem.blob_bytes_test)
    )
    .unwrap();
    writeln!(
        s,
        "blob bytes (train): {} ({:.2} MB)",
        group_digits(mem.blob_bytes_train),
        MemoryEstimate::mib(mem.blob_bytes_train)
    )
    .unwrap();
    writeln!(
        s,
        "param bytes:        {} ({:.2} MB)",
        group_digits(mem.param_bytes),
        MemoryEstimate::mib(mem.param_bytes)
    )
    .unwrap();
    writeln!(
        s,
        "total (train):      {:.2} MB",
        MemoryEstimate::mib(mem.total_train_bytes)
    )
    .unwrap();
    writeln!(
        s,
        "total (test):       {:.2} MB",
        MemoryEstimate::mib(mem.total_test_bytes)
    )
    .unwrap();
    Ok(s)
}

fn fan_in_label(spec: &NetSpec, p: LayerParamCount, input: [usize; 3]) -> Result<String> {
    let in_shape = if p.layer == 0 {
        input.to_vec()
    } else {
        spec.layer_shapes_for(input)?[p.layer - 1].clone()
    };
    Ok(match &spec.layers[p.layer] {
        LayerSpec::Conv(c) | LayerSpec::Deconv(c) => {
            format!("{}x{}x{}", c.kernel.0, c.kernel.1, in_shape[0])
        }
        _ => format!("1x1x{}", group_digits(p.fan_in)),
    })
}
