//! Convolution and transposed convolution via im2col / col2im and GEMM.

use crate::error::{Error, Result};
use crate::layers::spec::{ConvSpec, LayerParams, LayerSpec};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    /// Geometry of a convolution reading a `[channels, height, width]` image.
    fn new(channels: usize, height: usize, width: usize, spec: &ConvSpec) -> Self {
        let (kh, kw) = spec.kernel;
        Self {
            channels,
            height,
            width,
            kh,
            kw,
            stride: spec.stride,
            pad: spec.pad,
            out_h: (height + 2 * spec.pad - kh) / spec.stride + 1,
            out_w: (width + 2 * spec.pad - kw) / spec.stride + 1,
        }
    }

    fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Calls `f(col_index, image_index)` for every in-bounds tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let cols = self.col_cols();
        for c in 0..self.channels {
            for dy in 0..self.kh {
                for dx in 0..self.kw {
                    let row = (c * self.kh + dy) * self.kw + dx;
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + dy) as isize - self.pad as isize;
                        if iy < 0 || iy as usize >= self.height {
                            continue;
                        }
                        let img_row = (c * self.height + iy as usize) * self.width;
                        let col_row = row * cols + oy * self.out_w;
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + dx) as isize - self.pad as isize;
                            if ix < 0 || ix as usize >= self.width {
                                continue;
                            }
                            f(col_row + ox, img_row + ix as usize);
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn im2col<T: Real>(image: &[T], g: &Geometry) -> Vec<T> {
    let mut cols = vec![T::zero(); g.col_rows() * g.col_cols()];
    g.for_each_tap(|ci, ii| cols[ci] = image[ii]);
    cols
}

pub(crate) fn col2im<T: Real>(cols: &[T], g: &Geometry) -> Vec<T> {
    let mut image = vec![T::zero(); g.channels * g.height * g.width];
    g.for_each_tap(|ci, ii| image[ii] += cols[ci]);
    image
}

fn conv_geometry<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
) -> Result<Geometry> {
    let layer = LayerSpec::Conv(*spec);
    layer.output_shape(input.shape())?;
    let (c, h, w) = input.chw()?;
    let expected = layer.param_shapes(input.shape())?.expect("conv has params");
    check_params("conv", params, &expected)?;
    Ok(Geometry::new(c, h, w, spec))
}

/// Geometry of the forward convolution whose adjoint is this deconvolution,
/// i.e. the one reading the deconvolution's output.
fn deconv_geometry<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
) -> Result<Geometry> {
    let layer = LayerSpec::Deconv(*spec);
    let out = layer.output_shape(input.shape())?;
    let expected = layer.param_shapes(input.shape())?.expect("deconv has params");
    check_params("deconv", params, &expected)?;
    Ok(Geometry::new(out[0], out[1], out[2], spec))
}

pub(crate) fn check_params<T: Real>(
    layer: &str,
    params: &LayerParams<T>,
    expected: &(Vec<usize>, Vec<usize>),
) -> Result<()> {
    let check = |what: &str, got: &[usize], want: &[usize]| -> Result<()> {
        if got.len() != want.len() {
            return Err(Error::shape(layer, format!("{what} rank"), want.len(), got.len()));
        }
        const AXES: [&str; 4] = ["dim0", "dim1", "dim2", "dim3"];
        for (axis, (&g, &w)) in got.iter().zip(want).enumerate() {
            if g != w {
                return Err(Error::shape(layer, format!("{what} {}", AXES[axis]), w, g));
            }
        }
        Ok(())
    };
    check("weights", params.weights.shape(), &expected.0)?;
    check("bias", params.bias.shape(), &expected.1)
}

fn add_channel_bias<T: Real>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_mut(plane).zip(bias) {
        for v in chunk {
            *v += b;
        }
    }
}

fn channel_sums<T: Real>(grad: &[T], channels: usize, plane: usize) -> Vec<T> {
    (0..channels)
        .map(|c| grad[c * plane..(c + 1) * plane].iter().copied().sum())
        .collect()
}

pub(crate) fn conv_forward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let g = conv_geometry(input, params, spec)?;
    let cols = im2col(input.data(), &g);
    let cout = spec.out_channels;
    let plane = g.col_cols();
    let mut out = vec![T::zero(); cout * plane];
    T::gemm(
        cout,
        g.col_rows(),
        plane,
        T::one(),
        params.weights.data(),
        false,
        &cols,
        false,
        T::zero(),
        &mut out,
    );
    add_channel_bias(&mut out, params.bias.data(), plane);
    Tensor::new(vec![cout, g.out_h, g.out_w], out)
}

/// Returns `(grad_input, grad_params)` for a convolution.
pub(crate) fn conv_backward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, LayerParams<T>)> {
    let g = conv_geometry(input, params, spec)?;
    let cout = spec.out_channels;
    let plane = g.col_cols();
    let cols = im2col(input.data(), &g);

    let mut dw = vec![T::zero(); cout * g.col_rows()];
    T::gemm(
        cout,
        plane,
        g.col_rows(),
        T::one(),
        grad_out.data(),
        false,
        &cols,
        true,
        T::zero(),
        &mut dw,
    );
    let db = channel_sums(grad_out.data(), cout, plane);

    let mut dcols = cols;
    T::gemm(
        g.col_rows(),
        cout,
        plane,
        T::one(),
        params.weights.data(),
        true,
        grad_out.data(),
        false,
        T::zero(),
        &mut dcols,
    );
    let dx = col2im(&dcols, &g);
    Ok((
        Tensor::new(input.shape().to_vec(), dx)?,
        LayerParams {
            weights: Tensor::new(params.weights.shape().to_vec(), dw)?,
            bias: Tensor::new(vec![cout], db)?,
        },
    ))
}

pub(crate) fn deconv_forward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let g = deconv_geometry(input, params, spec)?;
    let (cin, h, w) = input.chw()?;
    debug_assert_eq!((h, w), (g.out_h, g.out_w));
    let mut cols = vec![T::zero(); g.col_rows() * g.col_cols()];
    T::gemm(
        g.col_rows(),
        cin,
        g.col_cols(),
        T::one(),
        params.weights.data(),
        true,
        input.data(),
        false,
        T::zero(),
        &mut cols,
    );
    let mut out = col2im(&cols, &g);
    add_channel_bias(&mut out, params.bias.data(), g.height * g.width);
    Tensor::new(vec![g.channels, g.height, g.width], out)
}

pub(crate) fn deconv_backward<T: Real>(
    input: &Tensor<T>,
    params: &LayerParams<T>,
    spec: &ConvSpec,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, LayerParams<T>)> {
    let g = deconv_geometry(input, params, spec)?;
    let (cin, _, _) = input.chw()?;
    let dcols = im2col(grad_out.data(), &g);

    let mut dx = vec![T::zero(); cin * g.col_cols()];
    T::gemm(
        cin,
        g.col_rows(),
        g.col_cols(),
        T::one(),
        params.weights.data(),
        false,
        &dcols,
        false,
        T::zero(),
        &mut dx,
    );
    let mut dw = vec![T::zero(); cin * g.col_rows()];
    T::gemm(
        cin,
        g.col_cols(),
        g.col_rows(),
        T::one(),
        input.data(),
        false,
        &dcols,
        true,
        T::zero(),
        &mut dw,
    );
    let db = channel_sums(grad_out.data(), g.channels, g.height * g.width);
    Ok((
        Tensor::new(input.shape().to_vec(), dx)?,
        LayerParams {
            weights: Tensor::new(params.weights.shape().to_vec(), dw)?,
            bias: Tensor::new(vec![g.channels], db)?,
        },
    ))
}
