use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::layers::{self, LayerCache, LayerParams, Mode};
use crate::models::netspec::{NetSpec, OutputKind};
use crate::tensor::{Real, Tensor};

/// Weight initialization schemes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// Weights from `N(0, std^2)`, every bias set to `bias`.
    Gaussian { std: f64, bias: f64 },
    /// Weights from `N(0, 2 / fan_in)`, zero biases.
    He,
}

impl InitScheme {
    /// Zero-mean Gaussian with std 0.01 and biases at 0.1.
    pub const SHALLOW: InitScheme = InitScheme::Gaussian {
        std: 0.01,
        bias: 0.1,
    };
}

/// A network spec together with one parameter block per weight layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f32> {
    spec: NetSpec,
    params: Vec<Option<LayerParams<T>>>,
}

/// Per-layer caches of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    caches: Vec<LayerCache<T>>,
    raw_output_shape: Vec<usize>,
}

impl<T> ForwardTrace<T> {
    /// See [`LayerCache::same_branches`].
    pub fn same_branches(&self, other: &Self) -> bool {
        self.caches.len() == other.caches.len()
            && self.caches.iter().zip(&other.caches).all(|(a, b)| a.same_branches(b))
    }
}

/// Parameter gradients aligned with `Network::params`.
pub type Gradients<T> = Vec<Option<LayerParams<T>>>;

impl<T: Real> Network<T> {
    /// All parameters zero.
    pub fn zeroed(spec: NetSpec) -> Result<Self> {
        let mut shape = spec.input_dims().to_vec();
        let mut params = Vec::with_capacity(spec.layers.len());
        let outputs = spec.layer_shapes()?;
        for (layer, out) in spec.layers.iter().zip(outputs) {
            params.push(
                layer
                    .param_shapes(&shape)?
                    .map(|(w, b)| LayerParams::zeros(w, b)),
            );
            shape = out;
        }
        Ok(Self { spec, params })
    }

    pub fn new<R: Rng + ?Sized>(spec: NetSpec, scheme: InitScheme, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        net.init_weights(scheme, rng);
        Ok(net)
    }

    pub(crate) fn from_parts(spec: NetSpec, params: Vec<Option<LayerParams<T>>>) -> Result<Self> {
        let reference = Self::zeroed(spec)?;
        if params.len() != reference.params.len() {
            return Err(Error::shape(
                "network",
                "layer count",
                reference.params.len(),
                params.len(),
            ));
        }
        for (i, (got, want)) in params.iter().zip(&reference.params).enumerate() {
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w))
                    if g.weights.shape() == w.weights.shape()
                        && g.bias.shape() == w.bias.shape() => {}
                _ => {
                    return Err(Error::ModelFormat(format!(
                        "layer {} parameters do not match the network description",
                        i + 1
                    )))
                }
            }
        }
        Ok(Self {
            spec: reference.spec,
            params,
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Option<LayerParams<T>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams<T>>] {
        &mut self.params
    }

    /// Parameter blocks of the weight layers, in order.
    pub fn weight_layers(&self) -> impl Iterator<Item = (usize, &LayerParams<T>)> {
        self.params
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (i, p)))
    }

    pub fn param_count(&self) -> usize {
        self.weight_layers().map(|(_, p)| p.len()).sum()
    }

    pub fn init_weights<R: Rng + ?Sized>(&mut self, scheme: InitScheme, rng: &mut R) {
        for p in self.params.iter_mut().flatten() {
            let (std, bias) = match scheme {
                InitScheme::Gaussian { std, bias } => (std, bias),
                InitScheme::He => {
                    let fan_in: usize = p.weights.shape()[1..].iter().product();
                    ((2.0 / fan_in as f64).sqrt(), 0.0)
                }
            };
            let normal = Normal::new(0.0, std).expect("finite std");
            for w in p.weights.data_mut() {
                *w = T::lit(normal.sample(rng));
            }
            for b in p.bias.data_mut() {
                *b = T::lit(bias);
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self
                .params
                .iter()
                .map(|p| p.as_ref().map(LayerParams::cast))
                .collect(),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let want = self.spec.input_dims();
        let got = input.shape();
        if got.len() != 3 {
            return Err(Error::shape("network input", "rank", 3, got.len()));
        }
        for (axis, (&g, &w)) in ["channels", "height", "width"].iter().zip(got.iter().zip(&want)) {
            // fully convolutional nets accept any spatial extent
            let flexible = self.spec.output == OutputKind::FullResolution && *axis != "channels";
            if g != w && !flexible {
                return Err(Error::shape("network input", *axis, w, g));
            }
        }
        Ok(())
    }

    /// Forward pass returning the output map (`[1, H, W]`) and the caches.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, ForwardTrace<T>)> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut x = input.clone();
        for (layer, params) in self.spec.layers.iter().zip(&self.params) {
            let (y, cache) = layers::forward(layer, params.as_ref(), &x, mode, rng)?;
            caches.push(cache);
            x = y;
        }
        let raw_output_shape = x.shape().to_vec();
        let out = match self.spec.output {
            OutputKind::VectorMap { side } => x.reshape(vec![1, side, side])?,
            OutputKind::FullResolution => x,
        };
        Ok((
            out,
            ForwardTrace {
                caches,
                raw_output_shape,
            },
        ))
    }

    /// Test-mode forward without keeping caches around.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        // test mode never draws from the rng
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        self.forward(input, Mode::Test, &mut rng).map(|(out, _)| out)
    }

    /// Backpropagates `grad_out` (shaped like the forward output). Returns the
    /// input gradient and the parameter gradients.
    pub fn backward(
        &self,
        trace: ForwardTrace<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Gradients<T>)> {
        let mut grad = grad_out.clone().reshape(trace.raw_output_shape)?;
        let mut grads: Gradients<T> = vec![None; self.params.len()];
        for (i, cache) in trace.caches.into_iter().enumerate().rev() {
            let (gi, gp) = layers::layer_backward(
                &self.spec.layers[i],
                self.params[i].as_ref(),
                cache,
                &grad,
            )?;
            grads[i] = gp;
            grad = gi;
        }
        Ok((grad, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::netspec::{deep_spec, ShallowConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_init_statistics() {
        let spec = ShallowConfig {
            fc_units: 1000,
            ..ShallowConfig::shrunken()
        }
        .build();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::<f64>::new(spec, InitScheme::SHALLOW, &mut rng).unwrap();
        let weights: Vec<f64> = net
            .weight_layers()
            .flat_map(|(_, p)| p.weights.data().to_vec())
            .collect();
        assert!(weights.len() >= 1_000_000);
        let n = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let std = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.01).abs() / 0.01 < 0.02, "std {std}");
        for (_, p) in net.weight_layers() {
            assert!(p.bias.data().iter().all(|&b| b == 0.1));
        }
    }

    #[test]
    fn he_init_variance() {
        use crate::layers::{ConvSpec, LayerSpec};
        let spec = NetSpec {
            name: "he".into(),
            input_shape: (64, 3, 3),
            layers: vec![
                LayerSpec::Conv(ConvSpec::new(3, 128)),
                LayerSpec::FullyConnected { out_units: 1 },
            ],
            output: OutputKind::VectorMap { side: 1 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::<f64>::zeroed(spec).unwrap();
        let mut samples = Vec::new();
        while samples.len() < 1_000_000 {
            net.init_weights(InitScheme::He, &mut rng);
            samples.extend_from_slice(net.params[0].as_ref().unwrap().weights.data());
        }
        let n = samples.len() as f64;
        let var = samples.iter().map(|w| w * w).sum::<f64>() / n;
        let want = 2.0 / (3.0 * 3.0 * 64.0);
        assert!((var - want).abs() / want < 0.05, "var {var} want {want}");
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = ShallowConfig::tiny().build();
        let a = Network::<f32>::new(spec.clone(), InitScheme::He, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = Network::<f32>::new(spec.clone(), InitScheme::He, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = Network::<f32>::new(spec, InitScheme::He, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forward_produces_output_map() {
        let net = Network::<f32>::new(
            ShallowConfig::tiny().build(),
            InitScheme::SHALLOW,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let out = net.infer(&Tensor::full(vec![3, 24, 24], 0.5)).unwrap();
        assert_eq!(out.shape(), &[1, 4, 4]);
        assert!(net.infer(&Tensor::full(vec![3, 20, 24], 0.5)).is_err());
    }

    #[test]
    fn deep_accepts_other_sizes_divisible_by_four() {
        let spec = deep_spec();
        for (h, w) in [(16, 24), (32, 8), (240, 320)] {
            let shapes = spec.layer_shapes_for([3, h, w]).unwrap();
            assert_eq!(shapes.last().unwrap(), &vec![1, h, w]);
        }
    }
}
