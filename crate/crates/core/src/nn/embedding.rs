use rand::Rng;

use super::{Mat, NnError, NnResult, Parameterized, Scalar, Tensor};

/// Lookup table, `n × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<F> {
    pub table: Tensor<F>,
}

impl<F: Scalar> Embedding<F> {
    pub fn new<R: Rng>(name: &str, n: usize, dim: usize, rng: &mut R) -> Self {
        Embedding {
            table: Tensor::uniform(format!("{name}.table"), &[n, dim], 0.1, rng),
        }
    }

    pub fn zeros(name: &str, n: usize, dim: usize) -> Self {
        Embedding {
            table: Tensor::zeros(format!("{name}.table"), &[n, dim]),
        }
    }

    pub fn n(&self) -> usize {
        self.table.shape[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape[1]
    }

    pub fn forward(&self, ids: &[usize]) -> NnResult<Mat<F>> {
        let d = self.dim();
        let mut out = Mat::zeros(ids.len(), d);
        for (t, &id) in ids.iter().enumerate() {
            if id >= self.n() {
                return Err(NnError::Index {
                    what: "embedding table",
                    index: id,
                    size: self.n(),
                });
            }
            out.row_mut(t)
                .copy_from_slice(&self.table.data[id * d..(id + 1) * d]);
        }
        Ok(out)
    }

    pub fn backward(&mut self, ids: &[usize], dy: &Mat<F>) {
        let d = self.dim();
        for (t, &id) in ids.iter().enumerate() {
            for (g, &v) in self.table.grad[id * d..(id + 1) * d]
                .iter_mut()
                .zip(dy.row(t))
            {
                *g += v;
            }
        }
    }

    pub fn cast<G: Scalar>(&self) -> Embedding<G> {
        Embedding {
            table: self.table.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for Embedding<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        f(&self.table);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        f(&mut self.table);
    }
}
