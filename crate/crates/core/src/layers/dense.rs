use crate::error::Result;
use crate::layers::conv::check_params;
use crate::layers::spec::{LayerParams, LayerSpec};
use crate::tensor::{Real, Tensor};

/// `y = W x + b` with `x` the flattened input.
pub(crate) fn fc_forward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    out_units: usize,
) -> Result<Tensor<T>> {
    let spec = LayerSpec::FullyConnected { out_units };
    let expected = spec.param_shapes(input.shape())?.expect("fc has params");
    check_params("fc", params, &expected)?;
    // matrix-vector products are memory bound; plain row loops beat gemm here
    let x = input.data();
    let out: Vec<T> = params
        .weights
        .data()
        .chunks_exact(x.len())
        .zip(params.bias.data())
        .map(|(row, &b)| b + row.iter().zip(x).fold(T::zero(), |acc, (&w, &v)| acc + w * v))
        .collect();
    Tensor::new(vec![out_units], out)
}

pub(crate) fn fc_backward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, LayerParams<T>)> {
    let out_units = grad_out.len();
    let fan_in = input.len();
    let x = input.data();
    let mut dw = Vec::with_capacity(out_units * fan_in);
    let mut dx = vec![T::zero(); fan_in];
    for (row, &g) in params.weights.data().chunks_exact(fan_in).zip(grad_out.data()) {
        dw.extend(x.iter().map(|&v| g * v));
        for (d, &w) in dx.iter_mut().zip(row) {
            *d += g * w;
        }
    }
    Ok((
        Tensor::new(input.shape().to_vec(), dx)?,
        LayerParams {
            weights: Tensor::new(vec![out_units, fan_in], dw)?,
            bias: grad_out.clone(),
        },
    ))
}
