//! Plane-wise image operations shared by preprocessing, prediction and metrics.

use crate::tensor::{Real, Tensor};

/// Bilinear resampling of every channel of a `[c, h, w]` tensor to
/// `out_h x out_w`, sampling at pixel centers.
pub fn resize_bilinear<T: Real>(t: &Tensor<T>, out_h: usize, out_w: usize) -> Tensor<T> {
    let (c, h, w) = t.chw().expect("rank-3 tensor");
    if (h, w) == (out_h, out_w) {
        return t.clone();
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let ys = taps(out_h, h);
    let xs = taps(out_w, w);
    let src = t.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let v00 = plane[y0 * w + x0].as_f64();
                let v01 = plane[y0 * w + x1].as_f64();
                let v10 = plane[y1 * w + x0].as_f64();
                let v11 = plane[y1 * w + x1].as_f64();
                let top = v00 + (v01 - v00) * fx;
                let bottom = v10 + (v11 - v10) * fx;
                out.push(T::lit(top + (bottom - top) * fy));
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out).expect("consistent extents")
}

/// Index into `0..n` under symmetric reflection (`d c b a | a b c d`).
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Unit-sum Gaussian taps truncated at 4 sigma.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian smoothing of each channel with reflected borders.
pub fn gaussian_blur<T: Real>(t: &Tensor<T>, sigma: f64) -> Tensor<T> {
    if sigma <= 0.0 {
        return t.clone();
    }
    let (c, h, w) = t.chw().expect("rank-3 tensor");
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let src: Vec<f64> = t.data().iter().map(|v| v.as_f64()).collect();
    let mut tmp = vec![0.0; src.len()];
    let mut dst = vec![0.0; src.len()];
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &kv) in k.iter().enumerate() {
                    let xx = reflect(x as isize + j as isize - r, w);
                    acc += kv * src[base + y * w + xx];
                }
                tmp[base + y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (j, &kv) in k.iter().enumerate() {
                    let yy = reflect(y as isize + j as isize - r, h);
                    acc += kv * tmp[base + yy * w + x];
                }
                dst[base + y * w + x] = acc;
            }
        }
    }
    Tensor::new(t.shape().to_vec(), dst.into_iter().map(T::lit).collect()).expect("same shape")
}

/// Rescales to `[0, 1]`. A range below `1e-12` maps everything to zero.
pub fn min_max_normalize<T: Real>(t: &Tensor<T>) -> Tensor<T> {
    let (lo, hi) = t
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.as_f64()), hi.max(v.as_f64()))
        });
    let range = hi - lo;
    if !(range >= 1e-12) {
        return Tensor::zeros(t.shape().to_vec());
    }
    t.map(|v| T::lit(((v.as_f64() - lo) / range).clamp(0.0, 1.0)))
}

/// Mirrors every channel left to right.
pub fn flip_horizontal<T: Real>(t: &Tensor<T>) -> Tensor<T> {
    let (_, _, w) = t.chw().expect("rank-3 tensor");
    let mut out = t.clone();
    for row in out.data_mut().chunks_mut(w) {
        row.reverse();
    }
    out
}
