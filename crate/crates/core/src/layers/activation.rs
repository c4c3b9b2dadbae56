use rand::Rng;

use crate::error::Result;
use crate::layers::spec::LayerSpec;
use crate::tensor::{Real, Tensor};

pub(crate) fn relu<T: Real>(input: &Tensor<T>) -> (Tensor<T>, Vec<bool>) {
    let mask: Vec<bool> = input.data().iter().map(|&v| v > T::zero()).collect();
    (input.map(|v| v.max(T::zero())), mask)
}

pub(crate) fn relu_backward<T: Real>(mask: &[bool], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (v, &keep) in g.data_mut().iter_mut().zip(mask) {
        if !keep {
            *v = T::zero();
        }
    }
    g
}

/// Elementwise max over `pieces` contiguous slices of the input. Returns the
/// winning slice index per output element.
pub(crate) fn maxout<T: Real>(input: &Tensor<T>, pieces: usize) -> Result<(Tensor<T>, Vec<u8>)> {
    let shape = LayerSpec::Maxout { pieces }.output_shape(input.shape())?;
    let width = input.len() / pieces;
    let data = input.data();
    let mut out = data[..width].to_vec();
    let mut winner = vec![0u8; width];
    for piece in 1..pieces {
        let slice = &data[piece * width..(piece + 1) * width];
        for ((o, w), &v) in out.iter_mut().zip(&mut winner).zip(slice) {
            if v > *o {
                *o = v;
                *w = piece as u8;
            }
        }
    }
    Ok((Tensor::new(shape, out)?, winner))
}

pub(crate) fn maxout_backward<T: Real>(
    input_shape: &[usize],
    winner: &[u8],
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let width = winner.len();
    let mut g = Tensor::zeros(input_shape.to_vec());
    let gd = g.data_mut();
    for (i, (&w, &d)) in winner.iter().zip(grad_out.data()).enumerate() {
        gd[w as usize * width + i] = d;
    }
    g
}

/// Inverted dropout: survivors are scaled by `1/(1-ratio)`. Returns the
/// multiplicative mask applied.
pub(crate) fn dropout<T: Real, R: Rng + ?Sized>(
    input: &Tensor<T>,
    ratio: f64,
    rng: &mut R,
) -> (Tensor<T>, Vec<T>) {
    let keep_scale = if ratio < 1.0 {
        T::lit(1.0 / (1.0 - ratio))
    } else {
        T::zero()
    };
    let mask: Vec<T> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < ratio {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect();
    let mut out = input.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (out, mask)
}

pub(crate) fn dropout_backward<T: Real>(mask: &[T], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = grad_out.clone();
    for (v, &m) in g.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    g
}
