//! Frozen random-feature backbone.
//!
//! The backbone maps raw input features to an embedding through one fixed
//! tanh layer and carries the fixed base projection that adapters perturb.
//! Both are seeded at construction and never change afterwards — there is
//! deliberately no mutable access, and training touches only adapter
//! parameters. The seed plus a content digest is enough to reconstruct and
//! verify the whole frozen stack when loading a checkpoint.

use crate::num::{tanh, Matrix, NumError, Vector};
use crate::seed::rng_for;
use rand::Rng;

/// Frozen encoder (`d × input_dim` + bias) and base projection (`d × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    input_dim: usize,
    d: usize,
    seed: u64,
    encoder_w: Matrix,
    encoder_b: Vector,
    w0: Matrix,
}

impl Backbone {
    /// Builds the frozen stack from a seed. Encoder entries are uniform on
    /// `[-1/sqrt(input_dim), 1/sqrt(input_dim)]`, the base projection on
    /// `[-1/sqrt(d), 1/sqrt(d)]`. Identical arguments produce identical
    /// weights.
    pub fn init(input_dim: usize, d: usize, seed: u64) -> Result<Backbone, NumError> {
        if input_dim == 0 || d == 0 {
            return Err(NumError::Contract {
                op: "Backbone::init",
                detail: format!("dimensions must be positive, got input_dim={input_dim}, d={d}"),
            });
        }
        let mut rng = rng_for(seed, "backbone/init");
        let enc_bound = 1.0 / (input_dim as f64).sqrt();
        let encoder_w = Matrix::from_fn(d, input_dim, |_, _| rng.random_range(-enc_bound..=enc_bound));
        let encoder_b = Vector::new((0..d).map(|_| rng.random_range(-enc_bound..=enc_bound)).collect());
        let w0_bound = 1.0 / (d as f64).sqrt();
        let w0 = Matrix::from_fn(d, d, |_, _| rng.random_range(-w0_bound..=w0_bound));
        Ok(Backbone { input_dim, d, seed, encoder_w, encoder_b, w0 })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn encoder_w(&self) -> &Matrix {
        &self.encoder_w
    }

    pub fn encoder_b(&self) -> &Vector {
        &self.encoder_b
    }

    /// The frozen base projection adapters are added to.
    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    /// Embeds an input: `tanh(W_enc · x + b_enc)`. Every component lies in
    /// `(-1, 1)`.
    pub fn encode(&self, input: &Vector) -> Result<Vector, NumError> {
        if input.len() != self.input_dim {
            return Err(NumError::Shape {
                op: "Backbone::encode",
                detail: format!("expected input length {}, got {}", self.input_dim, input.len()),
            });
        }
        let pre = self.encoder_w.matvec(input)?.add(&self.encoder_b)?;
        Ok(tanh(&pre))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = Backbone::init(6, 4, 7).unwrap();
        let b = Backbone::init(6, 4, 7).unwrap();
        let c = Backbone::init(6, 4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_uniform_bounds() {
        let bb = Backbone::init(16, 9, 3).unwrap();
        let enc_bound = 1.0 / 4.0;
        assert!(bb.encoder_w().data().iter().all(|w| w.abs() <= enc_bound));
        assert!(bb.encoder_b().iter().all(|w| w.abs() <= enc_bound));
        let w0_bound = 1.0 / 3.0;
        assert!(bb.w0().data().iter().all(|w| w.abs() <= w0_bound));
    }

    #[test]
    fn encode_is_bounded_and_checks_length() {
        let bb = Backbone::init(5, 8, 1).unwrap();
        let z = bb.encode(&Vector::new(vec![10.0, -3.0, 0.5, 2.0, -8.0])).unwrap();
        assert_eq!(z.len(), 8);
        assert!(z.iter().all(|v| v.abs() < 1.0));
        assert!(matches!(
            bb.encode(&Vector::zeros(4)),
            Err(NumError::Shape { .. })
        ));
    }

    #[test]
    fn encode_is_lipschitz_in_the_encoder_norm() {
        // tanh is 1-Lipschitz, so ||z1 - z2|| <= ||W_enc||_F ||x1 - x2||.
        let bb = Backbone::init(6, 10, 11).unwrap();
        let lip = bb.encoder_w().frobenius_norm();
        let xs = [
            (vec![0.0, 1.0, -1.0, 2.0, 0.5, -0.3], vec![0.1, 0.9, -1.2, 2.2, 0.4, -0.5]),
            (vec![5.0, -5.0, 3.0, 0.0, 0.0, 1.0], vec![-5.0, 5.0, -3.0, 0.0, 0.1, 1.0]),
        ];
        for (x1, x2) in xs {
            let x1 = Vector::new(x1);
            let x2 = Vector::new(x2);
            let z1 = bb.encode(&x1).unwrap();
            let z2 = bb.encode(&x2).unwrap();
            let dz = z1.add(&z2.scale(-1.0)).unwrap().norm();
            let dx = x1.add(&x2.scale(-1.0)).unwrap().norm();
            assert!(dz <= lip * dx + 1e-12, "dz={dz}, bound={}", lip * dx);
        }
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(Backbone::init(0, 4, 1).is_err());
        assert!(Backbone::init(4, 0, 1).is_err());
    }
}
