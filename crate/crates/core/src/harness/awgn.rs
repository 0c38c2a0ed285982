use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FieldElem};
use crate::polarlab::Sampler;

/// GF(2^m) symbols sent as `m` BPSK uses over an AWGN channel.
///
/// A symbol is split into its coordinates on the basis `1, a, ..., a^(m-1)`
/// of the primitive element `a`; coordinate bit 0 is sent as `+1` and bit 1
/// as `-1`.
#[derive(Clone, Debug)]
pub struct AwgnSampler {
    field: FieldCtx,
    sigma: f64,
    /// `signs[x][k]` is the BPSK amplitude of coordinate `k` of symbol `x`.
    signs: Vec<Vec<f64>>,
}

impl AwgnSampler {
    pub fn new(field: &FieldCtx, sigma: f64) -> Result<Self> {
        if field.p() != 2 {
            return Err(Error::BadParameter(format!(
                "AWGN mapping needs a binary field, got {field}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::BadParameter(format!(
                "noise deviation must be positive, got {sigma}"
            )));
        }
        let prime = field.subfield_of_degree(1);
        let basis = field.decomposition(&prime)?;
        let signs = field
            .elements()
            .map(|x| {
                basis
                    .decompose(x)
                    .iter()
                    .map(|c| if c.is_zero() { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        Ok(Self {
            field: field.clone(),
            sigma,
            signs,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Binary uses per symbol.
    pub fn uses_per_symbol(&self) -> usize {
        self.field.m() as usize
    }

    /// Amplitudes sent for `x`.
    pub fn modulate(&self, x: FieldElem) -> &[f64] {
        &self.signs[x.index()]
    }

    /// Likelihoods of every symbol for the received amplitudes, scaled so the
    /// largest is one.
    pub fn likelihoods(&self, received: &[f64], out: &mut [f64]) {
        let inv_var = 1.0 / (self.sigma * self.sigma);
        // only the cross term of the squared distance depends on x
        for (o, s) in out.iter_mut().zip(&self.signs) {
            *o = s.iter().zip(received).map(|(a, y)| a * y).sum::<f64>() * inv_var;
        }
        let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.iter_mut().for_each(|v| *v = (*v - top).exp());
    }
}

impl Sampler for AwgnSampler {
    fn field(&self) -> &FieldCtx {
        &self.field
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        input: Option<FieldElem>,
        out: &mut [f64],
    ) -> FieldElem {
        let x = input.unwrap_or_else(|| FieldElem(rng.random_range(0..self.field.q() as u32)));
        let received: Vec<f64> = self.signs[x.index()]
            .iter()
            .map(|a| {
                let noise: f64 = StandardNormal.sample(rng);
                a + self.sigma * noise
            })
            .collect();
        self.likelihoods(&received, out);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_two_dimensional_gaussian() {
        let field = FieldCtx::of_size(4).unwrap();
        let sigma = 0.8;
        let s = AwgnSampler::new(&field, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut got = vec![0.0; 4];
        for _ in 0..100 {
            let y = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            s.likelihoods(&y, &mut got);
            let direct: Vec<f64> = field
                .elements()
                .map(|x| {
                    let a = s.modulate(x);
                    let d2 = (y[0] - a[0]).powi(2) + (y[1] - a[1]).powi(2);
                    (-d2 / (2.0 * sigma * sigma)).exp()
                        / (2.0 * std::f64::consts::PI * sigma * sigma)
                })
                .collect();
            let (gs, ds): (f64, f64) = (got.iter().sum(), direct.iter().sum());
            for (a, b) in got.iter().zip(&direct) {
                assert!((a / gs - b / ds).abs() < 1e-10);
                assert!(*a > 0.0);
            }
            // posterior factorizes over the two binary uses
            let bit = |k: usize, x: FieldElem| {
                (-(y[k] - s.modulate(x)[k]).powi(2) / (2.0 * sigma * sigma)).exp()
            };
            let norm: f64 = field.elements().map(|z| bit(0, z) * bit(1, z)).sum();
            for x in field.elements() {
                assert!((bit(0, x) * bit(1, x) / norm - got[x.index()] / gs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn basis_map_and_errors() {
        let field = FieldCtx::of_size(4).unwrap();
        let s = AwgnSampler::new(&field, 1.0).unwrap();
        assert_eq!(s.modulate(FieldElem::ZERO), &[1.0, 1.0]);
        assert_eq!(s.modulate(FieldElem::ONE), &[-1.0, 1.0]);
        assert_eq!(s.modulate(field.alpha()), &[1.0, -1.0]);
        assert!(AwgnSampler::new(&FieldCtx::of_size(3).unwrap(), 1.0).is_err());
        assert!(AwgnSampler::new(&field, 0.0).is_err());
    }
}
