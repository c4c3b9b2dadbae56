use crate::data::{Preprocessor, Sample, SaliencyMap, ValueRange};
use crate::error::Result;
use crate::imageops::{gaussian_blur, min_max_normalize, resize_bilinear};
use crate::models::netspec::OutputKind;
use crate::models::network::Network;
use crate::tensor::Tensor;

/// Post-processing of the raw network output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostProcess {
    /// Gaussian smoothing after resizing; `0` disables it.
    pub sigma: f64,
}

impl Default for PostProcess {
    fn default() -> Self {
        Self { sigma: 2.0 }
    }
}

impl PostProcess {
    /// Smoothing for low-resolution vector outputs, none for full-resolution ones.
    pub fn for_output(kind: OutputKind) -> Self {
        match kind {
            OutputKind::VectorMap { .. } => Self::default(),
            OutputKind::FullResolution => Self { sigma: 0.0 },
        }
    }
}

/// Runs a preprocessed `input` through the network and maps the result back to
/// a `height x width` map in `[0, 1]`.
pub fn predict(
    net: &Network<f32>,
    input: &Tensor<f32>,
    extents: (usize, usize),
    post: PostProcess,
) -> Result<SaliencyMap> {
    let raw = net.infer(input)?.cast::<f64>();
    let resized = resize_bilinear(&raw, extents.0, extents.1);
    let smooth = gaussian_blur(&resized, post.sigma);
    SaliencyMap::new(min_max_normalize(&smooth), ValueRange::Unit)
}

/// Preprocesses a raw sample and predicts at its original resolution.
pub fn predict_sample(
    net: &Network<f32>,
    pre: &Preprocessor,
    sample: &Sample,
    post: PostProcess,
) -> Result<SaliencyMap> {
    let input = pre.input(sample)?;
    predict(net, &input, (sample.height(), sample.width()), post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::netspec::{NetSpec, ShallowConfig};
    use crate::models::network::InitScheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> (NetSpec, Network<f32>) {
        let spec = ShallowConfig::tiny().build();
        let net = Network::new(spec.clone(), InitScheme::He, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        (spec, net)
    }

    #[test]
    fn output_matches_requested_extents_and_range() {
        let (_, net) = tiny();
        let input = Tensor::from_fn(vec![3, 24, 24], |i| ((i % 17) as f32 - 8.0) / 8.0);
        let map = predict(&net, &input, (30, 41), PostProcess::default()).unwrap();
        assert_eq!(map.extents(), (30, 41));
        assert!(map.values().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn constant_output_gives_zero_map() {
        let (spec, _) = tiny();
        // zero weights: the output is the (zero) bias everywhere
        let net = Network::<f32>::zeroed(spec).unwrap();
        let input = Tensor::full(vec![3, 24, 24], 0.5);
        let map = predict(&net, &input, (24, 24), PostProcess::default()).unwrap();
        assert!(map.values().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smoothing_keeps_isolated_peak() {
        let mut t = Tensor::<f64>::zeros(vec![1, 21, 21]);
        t.set(0, 7, 13, 1.0);
        let b = gaussian_blur(&t, 2.0);
        let d = b.data();
        let arg = (0..d.len()).fold(0, |a, i| if d[i] > d[a] { i } else { a });
        assert_eq!((arg / 21, arg % 21), (7, 13));
    }

    #[test]
    fn full_resolution_has_no_smoothing() {
        assert_eq!(PostProcess::for_output(OutputKind::FullResolution).sigma, 0.0);
        assert_eq!(PostProcess::for_output(OutputKind::VectorMap { side: 48 }).sigma, 2.0);
    }
}
