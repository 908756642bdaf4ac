use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Ordered collection of named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its slot index.
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Adam optimizer moments for a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Every gradient is checked before any
    /// parameter is touched, so a non-finite gradient leaves the state intact.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Invalid(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != params.get(i).len() {
                return Err(Error::Shape {
                    op: "adam",
                    a: params.get(i).shape().to_vec(),
                    b: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(Error::Optimizer {
                    param: params.names()[i].clone(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = params.get_mut(i).data_mut();
            for j in 0..p.len() {
                let gj = g.data()[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::from_vec(&[2], vec![1.0, -1.0]).unwrap());
        let mut opt = Adam::new(&ps, 0.1);
        let g = Tensor::from_vec(&[2], vec![3.0, -0.5]).unwrap();
        opt.step(&mut ps, &[g]).unwrap();
        // bias-corrected first step is lr * sign(g) up to eps
        assert!((ps.get(0).data()[0] - 0.9).abs() < 1e-6);
        assert!((ps.get(0).data()[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut ps = ParamSet::new();
        ps.push("x", Tensor::from_vec(&[3], vec![2.0, -3.0, 0.5]).unwrap());
        let mut opt = Adam::new(&ps, 0.05);
        for _ in 0..2000 {
            let g = Tensor::from_vec(&[3], ps.get(0).data().iter().map(|x| 2.0 * x).collect()).unwrap();
            opt.step(&mut ps, &[g]).unwrap();
        }
        assert!(ps.get(0).data().iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn rejects_nan_gradient_without_mutating() {
        let mut ps = ParamSet::new();
        ps.push("a", Tensor::scalar(1.0));
        ps.push("b", Tensor::scalar(2.0));
        let mut opt = Adam::new(&ps, 0.1);
        let err = opt
            .step(&mut ps, &[Tensor::scalar(1.0), Tensor::scalar(f64::NAN)])
            .unwrap_err();
        assert!(matches!(err, Error::Optimizer { ref param } if param == "b"));
        assert_eq!(ps.get(0).item(), 1.0);
        assert_eq!(opt.steps_taken(), 0);
    }
}
