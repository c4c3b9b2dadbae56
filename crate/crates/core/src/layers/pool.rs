use crate::error::Result;
use crate::layers::spec::LayerSpec;
use crate::tensor::{Real, Tensor};

/// Max pooling. Returns the output and, per output element, the flat input
/// index of the winning element (first maximum in scan order).
pub(crate) fn maxpool<T: Real>(
    input: &Tensor<T>,
    kernel: (usize, usize),
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let spec = LayerSpec::MaxPool { kernel, stride };
    let out_shape = spec.output_shape(input.shape())?;
    let (c, h, w) = input.chw()?;
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let data = input.data();

    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride * w + ox * stride;
                for dy in 0..kernel.0 {
                    let row = base + (oy * stride + dy) * w + ox * stride;
                    for idx in row..row + kernel.1 {
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(out_shape, out)?, argmax))
}

pub(crate) fn maxpool_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let mut grad = Tensor::zeros(input_shape.to_vec());
    let g = grad.data_mut();
    for (&src, &d) in argmax.iter().zip(grad_out.data()) {
        g[src] += d;
    }
    grad
}
